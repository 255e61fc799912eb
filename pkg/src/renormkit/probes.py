"""Numerical probes: exponent fits, dyadic shell integrals, Monte Carlo integration and verdicts.

Every evaluator is a callable taking configurations of shape (..., n, d) and
returning an array of shape (...).  Stochastic routines draw from fixed
per-block substreams of one seed, so results do not depend on how blocks are
scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import special, stats

from .errors import DeterminismError, ExceptionalConfigurationError
from .graph import Graph, _members, as_array, is_non_exceptional
from .taylor import RenormalizedEvaluator, SubtractionScheme, forest_term
from .weights import INF, WeightModel, eval_weight, format_degree, ir_degree

Evaluator = Callable[[np.ndarray], np.ndarray]

UV_GRID = 2.0 ** -np.arange(4, 15)
IR_GRID = 2.0 ** np.arange(4, 15)
SUPER_POLYNOMIAL_SLOPE = -50.0
EXPONENT_TOL = 0.2
RATIO_TOL = 0.05
BLOCK_SIZE = 4096


def _require_seed(seed) -> int:
    if seed is None:
        raise DeterminismError("stochastic routines need an explicit seed")
    return int(seed)


def block_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one (stream, block) pair of a seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


# regions ----------------------------------------------------------------------


@dataclass(frozen=True)
class RegionData:
    rho: float
    rho_star: float


def region_radii(g: Graph, x) -> RegionData:
    """Smallest distance between two vertices joined by a path, and the derived ball radius."""
    arr = as_array(g, x)
    if arr.ndim != 2:
        raise ValueError("region_radii expects one configuration")
    if not is_non_exceptional(g, arr):
        raise ExceptionalConfigurationError("configuration lies on the large graph diagonal")
    rho = math.inf
    for comp in g.components():
        for a, b in combinations(comp, 2):
            rho = min(rho, float(np.linalg.norm(arr[g.index[a]] - arr[g.index[b]])))
    if not math.isfinite(rho) or rho <= 0:
        raise ExceptionalConfigurationError("no vertex pair with positive separation")
    return RegionData(rho, rho / (2 * g.n_vertices))


# exponent probes ----------------------------------------------------------------


@dataclass(frozen=True)
class ProbeResult:
    """Fitted power of |f| under scaling; ``exponent`` is minus the log-log slope."""

    exponent: float | None
    slope: float | None
    status: str
    points: tuple[tuple[float, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "exponent": _finite_or_str(self.exponent),
            "slope": _finite_or_str(self.slope),
            "status": self.status,
            "points": [[s, v] for s, v in self.points],
        }


def _finite_or_str(v):
    if v is None:
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def fit_slope(scales, values, drop: int = 1) -> float:
    """Least-squares slope of log|values| against log scales, dropping ``drop`` points at each end."""
    ls = np.log(np.asarray(scales, dtype=float))
    lv = np.log(np.abs(np.asarray(values, dtype=float)))
    if drop:
        ls, lv = ls[drop:-drop], lv[drop:-drop]
    return float(np.polyfit(ls, lv, 1)[0])


def scaled_configurations(g: Graph, x, vertices: Iterable[int], scales, center=None) -> np.ndarray:
    """Configurations with x_v -> c + s (x_v - c) for the chosen vertices, one per scale s.

    ``center`` defaults to the centroid of the chosen vertices.
    """
    arr = as_array(g, x)
    idx = [g.index[v] for v in vertices]
    if center is None:
        center = arr[idx].mean(axis=0)
    center = np.asarray(center, dtype=float)
    scales = np.asarray(scales, dtype=float)
    out = np.repeat(arr[None], len(scales), axis=0)
    out[:, idx] = center + scales[:, None, None] * (arr[idx] - center)
    return out


def uv_scaling_probe(
    evaluator: Evaluator,
    g: Graph,
    x,
    scale_vertices: Iterable[int],
    lambdas=UV_GRID,
    reference: Evaluator | None = None,
    zero_tol: float = 1e-12,
) -> ProbeResult:
    """Contract the chosen vertices toward their centroid and fit the blow-up power.

    A point counts as zero when the value vanishes or, given a reference
    evaluator, when it is below ``zero_tol`` times the reference magnitude.
    """
    configs = scaled_configurations(g, x, list(scale_vertices), lambdas)
    vals = np.asarray(evaluator(configs), dtype=float)
    zero = vals == 0
    if reference is not None:
        zero |= np.abs(vals) <= zero_tol * np.abs(np.asarray(reference(configs), dtype=float))
    points = tuple((float(s), float(v)) for s, v in zip(lambdas, vals))
    if 2 * zero.sum() >= len(vals):
        return ProbeResult(None, None, "exact-zero", points)
    keep = ~zero
    slope = fit_slope(np.asarray(lambdas)[keep], vals[keep], drop=1 if keep.sum() >= 5 else 0)
    return ProbeResult(-slope, slope, "fit", points)


def ir_scaling_probe(
    evaluator: Evaluator,
    g: Graph,
    x,
    scale_vertices: Iterable[int],
    lambdas=IR_GRID,
    center=None,
) -> ProbeResult:
    """Dilate the chosen vertices away from ``center`` (the origin by default) and fit the decay power.

    Values that underflow to zero, or a fitted slope below -50, mark
    super-polynomial decay and report an infinite exponent.
    """
    arr = as_array(g, x)
    if center is None:
        center = np.zeros(g.dimension)
    configs = scaled_configurations(g, arr, list(scale_vertices), lambdas, center)
    vals = np.asarray(evaluator(configs), dtype=float)
    points = tuple((float(s), float(v)) for s, v in zip(lambdas, vals))
    nonzero = vals != 0
    if nonzero.sum() < 3:
        return ProbeResult(INF, -INF, "super-polynomial", points)
    if not nonzero.all():
        slope = fit_slope(np.asarray(lambdas)[nonzero], vals[nonzero], drop=0)
        return ProbeResult(INF, min(slope, SUPER_POLYNOMIAL_SLOPE), "super-polynomial", points)
    slope = fit_slope(lambdas, vals)
    if slope < SUPER_POLYNOMIAL_SLOPE:
        return ProbeResult(INF, slope, "super-polynomial", points)
    return ProbeResult(-slope, slope, "fit", points)


# shells -----------------------------------------------------------------------


def _uniform_ball(rng: np.random.Generator, n: int, d: int, radius) -> np.ndarray:
    direction = rng.standard_normal((n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = np.asarray(radius) * rng.random(n) ** (1.0 / d)
    return direction * r[:, None]


def ball_volume(d: int, r: float) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


def contraction_targets(g: Graph, i) -> list[tuple[tuple[int, ...], int]]:
    """Each connected block of integrated vertices paired with a fixed neighbor it contracts onto."""
    members = _members(i)
    out = []
    for comp in g.components(members):
        neighbors = sorted({w for v in comp for w in g.adjacency[v] if w not in members}, key=g.index.__getitem__)
        if not neighbors:
            raise ValueError(f"integrated block {comp} has no fixed neighbor to contract onto")
        out.append((comp, neighbors[0]))
    return out


@dataclass(frozen=True)
class Shell:
    k: int
    r_in: float
    r_out: float
    estimate: float
    stderr: float


@dataclass(frozen=True)
class ShellReport:
    shells: tuple[Shell, ...]
    slope: float
    sd_estimate: float
    n_integrated: int
    dimension: int
    targets: tuple[tuple[tuple[int, ...], int], ...]
    seed: int
    samples: int
    flags: tuple[str, ...] = ()

    @property
    def ratios(self) -> list[float]:
        est = [s.estimate for s in self.shells]
        return [b / a if a else math.nan for a, b in zip(est, est[1:])]

    @property
    def fitted_exponent(self) -> float:
        return self.slope

    def to_dict(self) -> dict:
        return {
            "shells": [asdict(s) for s in self.shells],
            "ratios": self.ratios,
            "slope": self.slope,
            "sd_estimate": self.sd_estimate,
            "integration_dimension": self.dimension * self.n_integrated,
            "targets": [{"block": list(c), "target": t} for c, t in self.targets],
            "seed": self.seed,
            "samples": self.samples,
            "flags": list(self.flags),
        }

    def csv_rows(self) -> list[list]:
        return [[s.k, s.r_in, s.r_out, s.estimate, s.stderr] for s in self.shells]


def shell_integrate(
    evaluator: Evaluator,
    g: Graph,
    x0,
    i,
    k_range: Sequence[int] = range(4, 11),
    samples: int = 10_000,
    seed: int | None = None,
    r0: float | None = None,
) -> ShellReport:
    """Monte Carlo integral of |f| over dyadic shells around the contraction targets.

    In shell k every integrated vertex lies within 2^-k r0 of its target and at
    least one lies farther than 2^(-k-1) r0.  Samples are uniform in the product
    of outer balls with the inner product region rejected.
    """
    seed = _require_seed(seed)
    arr = as_array(g, x0)
    if r0 is None:
        r0 = region_radii(g, arr).rho_star
    targets = contraction_targets(g, i)
    moving = [(g.index[v], g.index[t]) for comp, t in targets for v in comp]
    d = g.dimension
    shells = []
    flags = []
    for k in k_range:
        r_out, r_in = r0 * 2.0**-k, r0 * 2.0 ** (-k - 1)
        vol = ball_volume(d, r_out) ** len(moving)
        total, total_sq, n_done, block = 0.0, 0.0, 0, 0
        while n_done < samples:
            n = min(BLOCK_SIZE, samples - n_done)
            rng = block_rng(seed, int(k), block)
            cfg = np.repeat(arr[None], n, axis=0)
            dist = np.zeros(n)
            for vi, ti in moving:
                off = _uniform_ball(rng, n, d, r_out)
                cfg[:, vi] = arr[ti] + off
                dist = np.maximum(dist, np.linalg.norm(off, axis=1))
            vals = np.zeros(n)
            keep = dist > r_in
            if keep.any():
                vals[keep] = np.abs(np.asarray(evaluator(cfg[keep]), dtype=float))
            total += float(vals.sum())
            total_sq += float((vals * vals).sum())
            n_done += n
            block += 1
        mean = total / samples
        var = max(total_sq / samples - mean * mean, 0.0)
        if not (math.isfinite(mean) and math.isfinite(var)):
            flags.append(f"variance-overflow:k={k}")
        shells.append(Shell(int(k), r_in, r_out, vol * mean, vol * math.sqrt(var / samples)))
    ks = np.array([s.k for s in shells], dtype=float)
    est = np.array([s.estimate for s in shells])
    positive = est > 0
    if positive.sum() >= 2:
        slope = float(np.polyfit(ks[positive] * math.log(2), np.log(est[positive]), 1)[0])
    else:
        slope = -INF
        flags.append("shell-estimates-vanish")
    return ShellReport(
        tuple(shells),
        slope,
        d * len(moving) + slope,
        len(moving),
        d,
        tuple(targets),
        seed,
        samples,
        tuple(flags),
    )


# Monte Carlo over balls -------------------------------------------------------------


@dataclass(frozen=True)
class MCResult:
    estimate: float
    stderr: float
    samples: int
    radius: float
    seed: int
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return asdict(self) | {"flags": list(self.flags)}


@dataclass(frozen=True)
class _Radial:
    """Radial density proportional to r^(k-1) exp(-m r) on [0, r_max], centered at ``center``."""

    center: np.ndarray
    k: float
    m: float
    r_max: float

    def _cdf_max(self) -> float:
        return float(stats.gamma.cdf(self.r_max, self.k, scale=1.0 / self.m)) if self.m else 1.0

    def sample(self, rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        u = rng.random(n)
        if self.m:
            r = stats.gamma.ppf(u * self._cdf_max(), self.k, scale=1.0 / self.m)
        else:
            r = self.r_max * u ** (1.0 / self.k)
        direction = rng.standard_normal((n, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return self.center + direction * r[:, None]

    def log_density(self, y: np.ndarray, d: int) -> np.ndarray:
        r = np.linalg.norm(y - self.center, axis=-1)
        log_sphere = math.log(2) + (d / 2) * math.log(math.pi) - special.gammaln(d / 2)
        with np.errstate(divide="ignore"):
            if self.m:
                log_r = stats.gamma.logpdf(r, self.k, scale=1.0 / self.m) - math.log(self._cdf_max())
            else:
                log_r = math.log(self.k) + (self.k - 1) * np.log(r) - self.k * math.log(self.r_max)
            out = log_r - log_sphere - (d - 1) * np.log(r)
        return np.where(r <= self.r_max, out, -np.inf)


@dataclass(frozen=True)
class _Uniform:
    center: np.ndarray
    radius: float

    def sample(self, rng, n, d):
        return self.center + _uniform_ball(rng, n, d, self.radius)

    def log_density(self, y, d):
        r = np.linalg.norm(y - self.center, axis=-1)
        return np.where(r <= self.radius, -math.log(ball_volume(d, self.radius)), -np.inf)


def _mixture(w: WeightModel, arr: np.ndarray, v: int, members, center, radius, uniform_share):
    g = w.graph
    d = g.dimension
    comps = []
    for nb in g.adjacency[v]:
        if nb in members:
            continue
        e = (v, nb) if (v, nb) in w.kernel else (nb, v)
        kern = w.kernel[e]
        a_eff = min(float(kern.a), d - 0.5)
        pos = arr[g.index[nb]]
        r_max = radius + float(np.linalg.norm(pos - center))
        comps.append(_Radial(pos, d - a_eff, kern.m, r_max))
    weights = [(1 - uniform_share) / len(comps)] * len(comps) if comps else []
    comps.append(_Uniform(center, radius))
    weights.append(uniform_share if len(comps) > 1 else 1.0)
    return comps, np.array(weights)


def default_centers(g: Graph, arr: np.ndarray, i) -> dict[int, np.ndarray]:
    """Ball center per integrated vertex: its first fixed neighbor, else its anchor position."""
    members = _members(i)
    out = {}
    for v in g.sort_vertices(members):
        fixed = [w for w in g.sort_vertices(g.adjacency[v]) if w not in members]
        out[v] = arr[g.index[fixed[0]]] if fixed else arr[g.index[v]]
    return out


def mc_integrate(
    evaluator: Evaluator,
    w: WeightModel,
    x_anchor,
    i,
    radius: float,
    samples: int,
    seed: int | None = None,
    centers: Mapping[int, np.ndarray] | None = None,
    uniform_share: float = 0.25,
    workers: int = 1,
) -> MCResult:
    """Importance-sampled integral of |f| over one ball of ``radius`` per integrated vertex.

    Each integrated vertex is drawn from a mixture of radial laws r^(d-1-a) e^(-m r)
    around its fixed neighbors (a, m from the connecting kernel) and a uniform
    law on its ball.
    """
    seed = _require_seed(seed)
    g = w.graph
    d = g.dimension
    arr = as_array(g, x_anchor)
    members = _members(i)
    order = g.sort_vertices(members)
    centers = dict(centers) if centers is not None else default_centers(g, arr, members)
    mixtures = {v: _mixture(w, arr, v, members, np.asarray(centers[v], float), radius, uniform_share) for v in order}
    n_blocks = -(-samples // BLOCK_SIZE)

    def run_block(b: int) -> tuple[float, float]:
        n = min(BLOCK_SIZE, samples - b * BLOCK_SIZE)
        rng = block_rng(seed, b)
        cfg = np.repeat(arr[None], n, axis=0)
        log_q = np.zeros(n)
        inside = np.ones(n, dtype=bool)
        for v in order:
            comps, wts = mixtures[v]
            choice = rng.choice(len(comps), size=n, p=wts)
            y = np.empty((n, d))
            for c, comp in enumerate(comps):
                sel = choice == c
                if sel.any():
                    y[sel] = comp.sample(rng, int(sel.sum()), d)
            dens = np.stack([comp.log_density(y, d) for comp in comps]) + np.log(wts)[:, None]
            log_q += special.logsumexp(dens, axis=0)
            inside &= np.linalg.norm(y - centers[v], axis=1) <= radius
            cfg[:, g.index[v]] = y
        vals = np.zeros(n)
        if inside.any():
            f = np.abs(np.asarray(evaluator(cfg[inside]), dtype=float))
            vals[inside] = f * np.exp(-log_q[inside])
        return float(vals.sum()), float((vals * vals).sum())

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run_block, range(n_blocks)))
    else:
        parts = [run_block(b) for b in range(n_blocks)]
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    flags = () if math.isfinite(mean) and math.isfinite(var) else ("variance-overflow",)
    return MCResult(mean, math.sqrt(var / samples), samples, float(radius), seed, flags)


# verdicts -----------------------------------------------------------------------


@dataclass
class Verdict:
    claim: str
    status: str
    hypothesis: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None
    witness: dict | None = None

    @property
    def passed(self) -> bool:
        return self.status in ("pass", "hypothesis-not-met", "exact-zero")

    def to_dict(self) -> dict:
        return asdict(self)


def local_hypothesis(w: WeightModel) -> dict:
    powers = {f"{a}-{b}": str(w.kernel[(a, b)].a) for a, b in w.graph.edges}
    return {"edge_powers": powers, "met": all(k.a > 0 for k in w.kernel.values())}


def global_hypothesis(w: WeightModel, i) -> dict:
    members = sorted(_members(i), key=w.graph.index.__getitem__)
    degrees = {}
    met = True
    for k in range(1, len(members) + 1):
        for subset in combinations(members, k):
            deg = ir_degree(w, subset, subset)
            degrees[",".join(map(str, subset))] = format_degree(deg)
            met &= deg > 0
    return {"ir_degrees": degrees, "met": bool(met)}


def _is_exact_zero(ev: Evaluator, ref: Evaluator, arr: np.ndarray, tol: float = 1e-12) -> bool:
    rng = block_rng(0, 0)
    pts = arr[None] + 0.1 * rng.standard_normal((8,) + arr.shape)
    try:
        vals = np.abs(ev(pts))
    except ExceptionalConfigurationError:
        return False
    return bool(np.all(vals <= tol * np.abs(ref(pts))))


def check_local(
    w: WeightModel,
    i,
    x_anchor,
    seed: int | None = None,
    k_range: Sequence[int] = range(4, 11),
    samples: int = 10_000,
    scheme: SubtractionScheme = SubtractionScheme.EDGE_WEIGHTED,
    cap: int = 8,
) -> Verdict:
    seed = _require_seed(seed)
    hyp = local_hypothesis(w)
    tol = {"shell_slope": "< 0"}
    if not hyp["met"]:
        return Verdict("local_integrability", "hypothesis-not-met", hyp, {}, tol, seed)
    ev = RenormalizedEvaluator(w, scheme=scheme, cap=cap, check_exceptional=False)
    arr = as_array(w.graph, x_anchor)
    u = lambda y: eval_weight(w, y)
    if _is_exact_zero(ev, u, arr):
        return Verdict("local_integrability", "exact-zero", hyp, {}, tol, seed)
    measured = {}
    failures = []
    for comp, target in contraction_targets(w.graph, i):
        rep = shell_integrate(ev, w.graph, arr, comp, k_range, samples, seed)
        probe = uv_scaling_probe(ev, w.graph, arr, list(comp) + [target], reference=u)
        key = ",".join(map(str, comp)) + f"->{target}"
        measured[key] = {"shells": rep.to_dict(), "uv_probe": probe.to_dict()}
        if not rep.slope < 0:
            failures.append(key)
    status = "fail" if failures else "pass"
    witness = {"configuration": arr.tolist(), "failing_targets": failures} if failures else None
    return Verdict("local_integrability", status, hyp, measured, tol, seed, witness)


def check_global(
    w: WeightModel,
    i,
    x_anchor,
    seed: int | None = None,
    radius: float = 8.0,
    samples: int = 100_000,
    drift_tol: float = 0.01,
    scheme: SubtractionScheme = SubtractionScheme.EDGE_WEIGHTED,
    cap: int = 8,
) -> Verdict:
    """Ball integrals at radius R and 2R, plus per-forest IR exponents against the bare weight.

    When the hypothesis fails, the integrals at R, 2R, 4R and their growth
    rate in log R are still reported.
    """
    seed = _require_seed(seed)
    g = w.graph
    members = _members(i)
    hyp = global_hypothesis(w, members)
    ev = RenormalizedEvaluator(w, scheme=scheme, cap=cap, check_exceptional=False)
    arr = as_array(g, x_anchor)
    tol = {"radius_drift": drift_tol, "ir_exponent": EXPONENT_TOL}
    if not hyp["met"]:
        radii = [radius, 2 * radius, 4 * radius]
        runs = [mc_integrate(ev, w, arr, members, r, samples, seed) for r in radii]
        growth = float(np.polyfit(np.log(radii), [r.estimate for r in runs], 1)[0])
        measured = {"integrals": [r.to_dict() for r in runs], "log_growth_per_unit_log_radius": growth}
        return Verdict("global_integrability", "hypothesis-not-met", hyp, measured, tol, seed)
    near = mc_integrate(ev, w, arr, members, radius, samples, seed)
    far = mc_integrate(ev, w, arr, members, 2 * radius, samples, seed)
    drift = abs(far.estimate - near.estimate) / max(abs(near.estimate), 1e-300)
    scale = g.sort_vertices(members)
    u = lambda y: eval_weight(w, y)
    base_probe = ir_scaling_probe(u, g, arr, scale)
    per_forest = {}
    ir_ok = True
    for f in ev.forests:
        term = lambda y, f=f: forest_term(w, f, y, ev.scheme, cap=cap)
        p = ir_scaling_probe(term, g, arr, scale)
        per_forest[repr(f)] = p.to_dict()
        if base_probe.exponent is not None and p.exponent is not None and math.isfinite(base_probe.exponent):
            ir_ok &= p.exponent >= base_probe.exponent - EXPONENT_TOL
    measured = {
        "integrals": [near.to_dict(), far.to_dict()],
        "relative_drift": drift,
        "ir_probe_weight": base_probe.to_dict(),
        "ir_probe_forest_terms": per_forest,
    }
    ok = drift < drift_tol and ir_ok and not (near.flags or far.flags)
    witness = None if ok else {"configuration": arr.tolist()}
    return Verdict("global_integrability", "pass" if ok else "fail", hyp, measured, tol, seed, witness)


def check_theorem(w: WeightModel, which: str, i, x_anchor, seed: int | None = None, **kwargs) -> Verdict:
    if which in ("local", "local_integrability"):
        return check_local(w, i, x_anchor, seed, **kwargs)
    if which in ("global", "global_integrability"):
        return check_global(w, i, x_anchor, seed, **kwargs)
    raise ValueError(f"unknown theorem {which!r}")

