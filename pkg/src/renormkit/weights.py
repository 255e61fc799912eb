"""Graph weights built from power-law/massive edge kernels and smooth vertex couplings.

Degrees are computed in closed form for this family; fitted exponents appear
only in the probes and tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import ContractedEdgeError, ExpansionPointSingularError, JetOrderCapError, SpecError
from .graph import Edge, Graph, _members, _vertex_set, as_array, parse_graph
from .jet import DEFAULT_ORDER_CAP, Jet, jet_space

INF = math.inf
ExtendedDegree = Union[Fraction, float]


def _rational(value) -> Fraction:
    if isinstance(value, bool):
        raise SpecError("power must be a number or a 'p/q' string")
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"cannot read rational {value!r}") from exc
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**6)
    raise SpecError(f"cannot read rational {value!r}")


def format_degree(value: ExtendedDegree) -> str:
    if value == INF:
        return "inf"
    return str(Fraction(value))


@dataclass(frozen=True)
class EdgeKernel:
    """c * |y|^(-a) * exp(-m |y|)."""

    c: float = 1.0
    a: Fraction = Fraction(0)
    m: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", _rational(self.a))
        if not self.c > 0:
            raise SpecError(f"kernel amplitude must be positive, got {self.c}")
        if self.a < 0:
            raise SpecError(f"kernel power must be nonnegative, got {self.a}")
        if self.m < 0:
            raise SpecError(f"kernel mass must be nonnegative, got {self.m}")

    def value(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = self.c * r ** (-float(self.a))
        if self.m:
            out = out * np.exp(-self.m * r)
        return out

    def jet(self, r2: Jet) -> Jet:
        """Kernel as a jet, given the jet of the squared separation."""
        if np.any(r2.value <= 0):
            raise ExpansionPointSingularError("edge contracts at the expansion point")
        out = r2.power(-float(self.a) / 2) * self.c if self.a else Jet.constant(r2.space, np.full(r2.shape, self.c))
        if self.m:
            out = out * (r2.sqrt() * (-self.m)).exp()
        return out

    def to_dict(self, edge: Edge) -> dict:
        return {"edge": list(edge), "c": self.c, "a": str(self.a), "m": self.m}


@dataclass(frozen=True)
class VertexCoupling:
    """Constant coupling, or a Gaussian bump amplitude * exp(-|x - center|^2 / width^2)."""

    kind: str = "constant"
    value: float = 1.0
    center: tuple[float, ...] = ()
    width: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian"):
            raise SpecError(f"unknown coupling kind {self.kind!r}")
        if self.kind == "gaussian" and not self.width > 0:
            raise SpecError("gaussian width must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @classmethod
    def constant(cls, value: float = 1.0) -> "VertexCoupling":
        return cls("constant", value=float(value))

    @classmethod
    def gaussian(cls, center, width: float = 1.0, amplitude: float = 1.0) -> "VertexCoupling":
        return cls("gaussian", center=tuple(center), width=float(width), amplitude=float(amplitude))

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def _center(self, d: int) -> np.ndarray:
        if not self.center:
            return np.zeros(d)
        if len(self.center) != d:
            raise SpecError("gaussian center has wrong dimension")
        return np.array(self.center)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            return np.full(x.shape[:-1], self.value)
        diff = x - self._center(x.shape[-1])
        return self.amplitude * np.exp(-np.sum(diff * diff, axis=-1) / self.width**2)

    def jet(self, x: Jet) -> Jet:
        """Coupling of a position jet whose last trailing axis holds coordinates."""
        if self.is_constant:
            return Jet.constant(x.space, np.full(x.shape[:-1], self.value))
        diff = x - self._center(x.shape[-1])
        return (diff.dot(diff) * (-1.0 / self.width**2)).exp() * self.amplitude

    def to_dict(self, vertex: int) -> dict:
        if self.is_constant:
            return {"vertex": vertex, "kind": "constant", "value": self.value}
        return {
            "vertex": vertex,
            "kind": "gaussian",
            "center": list(self.center),
            "width": self.width,
            "amplitude": self.amplitude,
        }


@dataclass(frozen=True)
class WeightModel:
    graph: Graph
    kernel: Mapping[Edge, EdgeKernel] = field(hash=False)
    coupling: Mapping[int, VertexCoupling] = field(hash=False)

    def __post_init__(self):
        missing_e = [e for e in self.graph.edges if e not in self.kernel]
        if missing_e:
            raise SpecError(f"no kernel for edges {missing_e}")
        missing_v = [v for v in self.graph.vertex_ids if v not in self.coupling]
        if missing_v:
            raise SpecError(f"no coupling for vertices {missing_v}")

    @classmethod
    def uniform(cls, graph: Graph, kernel: EdgeKernel, coupling: VertexCoupling | None = None) -> "WeightModel":
        coupling = coupling or VertexCoupling.constant(1.0)
        return cls(graph, {e: kernel for e in graph.edges}, {v: coupling for v in graph.vertex_ids})

    @property
    def dimension(self) -> int:
        return self.graph.dimension

    def to_dict(self) -> dict:
        out = self.graph.to_dict()
        out["kernels"] = [self.kernel[e].to_dict(e) for e in self.graph.edges]
        out["couplings"] = [self.coupling[v].to_dict(v) for v in self.graph.vertex_ids]
        return out


def parse_weight_model(spec) -> WeightModel:
    """Graph plus kernel and coupling records from a graph-spec document.

    Every edge needs a kernel record; vertices without a coupling record get the
    constant coupling 1.
    """
    if isinstance(spec, (str, bytes)):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise SpecError(f"graph spec is not valid JSON: {exc}") from exc
    graph = parse_graph(spec)
    index = graph.index
    kernels: dict[Edge, EdgeKernel] = {}
    for rec in spec.get("kernels", []):
        try:
            a, b = (int(v) for v in rec["edge"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"bad kernel record {rec!r}") from exc
        edge = (a, b) if index.get(a, -1) < index.get(b, -1) else (b, a)
        if edge not in graph.edges:
            raise SpecError(f"kernel record for non-edge {[a, b]}")
        if edge in kernels:
            raise SpecError(f"two kernel records for edge {[a, b]}")
        kernels[edge] = EdgeKernel(float(rec.get("c", 1.0)), _rational(rec.get("a", 0)), float(rec.get("m", 0.0)))
    couplings: dict[int, VertexCoupling] = {}
    for rec in spec.get("couplings", []):
        v = int(rec["vertex"])
        if v not in index:
            raise SpecError(f"coupling record for unknown vertex {v}")
        kind = rec.get("kind", "constant")
        if kind == "constant":
            couplings[v] = VertexCoupling.constant(float(rec.get("value", 1.0)))
        elif kind == "gaussian":
            center = rec.get("center", [0.0] * graph.dimension)
            if len(center) != graph.dimension:
                raise SpecError(f"gaussian center of vertex {v} has wrong dimension")
            couplings[v] = VertexCoupling.gaussian(center, rec.get("width", 1.0), rec.get("amplitude", 1.0))
        else:
            raise SpecError(f"unknown coupling kind {kind!r}")
    for v in graph.vertex_ids:
        couplings.setdefault(v, VertexCoupling.constant(1.0))
    return WeightModel(graph, kernels, couplings)


# evaluation -----------------------------------------------------------------


def _select(w: WeightModel, part, edges, vertices):
    g = w.graph
    if part is None:
        sel_e = g.edges if edges is None else tuple(edges)
        sel_v = g.vertex_ids if vertices is None else tuple(vertices)
    else:
        vs = _vertex_set(part)
        sel_e = g.induced_edges(vs) if edges is None else tuple(edges)
        sel_v = g.sort_vertices(vs) if vertices is None else tuple(vertices)
    return sel_e, sel_v


def eval_weight(w: WeightModel, x, part=None, edges=None, vertices=None) -> np.ndarray:
    """Product of kernels over the selected edges and couplings over the selected vertices.

    ``x`` may carry leading batch axes: shape (..., n_vertices, d).
    """
    g = w.graph
    arr = as_array(g, x)
    sel_e, sel_v = _select(w, part, edges, vertices)
    out = np.ones(arr.shape[:-2])
    for a, b in sel_e:
        r = np.linalg.norm(arr[..., g.index[a], :] - arr[..., g.index[b], :], axis=-1)
        if np.any(r == 0):
            raise ContractedEdgeError(f"edge ({a}, {b}) has zero length")
        out = out * w.kernel[(a, b)].value(r)
    for v in sel_v:
        out = out * w.coupling[v].evaluate(arr[..., g.index[v], :])
    return out


def log_weight(w: WeightModel, x, part=None, edges=None, vertices=None) -> np.ndarray:
    """Natural log of |eval_weight|, immune to underflow of massive kernels."""
    g = w.graph
    arr = as_array(g, x)
    sel_e, sel_v = _select(w, part, edges, vertices)
    out = np.zeros(arr.shape[:-2])
    for a, b in sel_e:
        k = w.kernel[(a, b)]
        r = np.linalg.norm(arr[..., g.index[a], :] - arr[..., g.index[b], :], axis=-1)
        if np.any(r == 0):
            raise ContractedEdgeError(f"edge ({a}, {b}) has zero length")
        out = out + math.log(k.c) - float(k.a) * np.log(r) - k.m * r
    for v in sel_v:
        cp = w.coupling[v]
        xv = arr[..., g.index[v], :]
        if cp.is_constant:
            out = out + math.log(abs(cp.value)) if cp.value else out - np.inf
        else:
            diff = xv - cp._center(g.dimension)
            out = out + math.log(cp.amplitude) - np.sum(diff * diff, axis=-1) / cp.width**2
    return out


# degrees ----------------------------------------------------------------------


def uv_scaling_degree(w: WeightModel, s) -> Fraction:
    """Exact UV scaling degree: sum of kernel powers over the induced edges."""
    edges = w.graph.induced_edges(_vertex_set(s))
    return sum((w.kernel[e].a for e in edges), Fraction(0))


def uv_degree(w: WeightModel, s) -> Fraction:
    n = len(_vertex_set(s))
    return uv_scaling_degree(w, s) - w.dimension * (n - 1)


def taylor_order(w: WeightModel, s) -> int | None:
    deg = uv_degree(w, s)
    return math.floor(deg) if deg >= 0 else None


def ir_scaling_degree(w: WeightModel, s, i) -> ExtendedDegree:
    """Large-argument scaling degree when the vertices of ``s`` lying in ``i`` are dilated.

    Every edge touching a dilated vertex stretches linearly, so massless edges add
    their power and a single massive edge, or a Gaussian coupling on a dilated
    vertex, makes the decay super-polynomial.
    """
    scaled = _vertex_set(s) & _members(i)
    if not scaled:
        return Fraction(0)
    total = Fraction(0)
    for e in w.graph.incident_edges(scaled):
        k = w.kernel[e]
        if k.m > 0:
            return INF
        total += k.a
    for v in scaled:
        if not w.coupling[v].is_constant:
            return INF
    return total


def ir_degree(w: WeightModel, s, i) -> ExtendedDegree:
    sd = ir_scaling_degree(w, s, i)
    if sd == INF:
        return INF
    n = w.dimension * len(_vertex_set(s) & _members(i))
    return sd - n


# jets -----------------------------------------------------------------------


def jet_eval(
    w: WeightModel,
    edges: Iterable[Edge],
    vertex_factors: Iterable[int],
    x,
    expand_vertices: Iterable[int],
    center,
    order: int,
    cap: int = DEFAULT_ORDER_CAP,
) -> Jet:
    """Taylor expansion of a partial weight in the displacements of ``expand_vertices``.

    Variables are ordered vertex by vertex (in ``expand_vertices`` order), then by
    coordinate.  ``center`` is a single point shared by all expanded vertices, or a
    mapping vertex -> point.
    """
    g = w.graph
    d = g.dimension
    arr = as_array(g, x)
    if arr.ndim != 2:
        raise ValueError("jet_eval expects a single configuration")
    expand = list(expand_vertices)
    if order > cap:
        raise JetOrderCapError(f"jet order {order} exceeds cap {cap}")
    space = jet_space(len(expand) * d, order, cap)
    if isinstance(center, Mapping):
        centers = {v: np.asarray(center[v], dtype=float) for v in expand}
    else:
        c = np.asarray(center, dtype=float)
        centers = {v: c for v in expand}
    pos: dict[int, Jet] = {}
    for k, v in enumerate(expand):
        coeffs = np.zeros((space.size, d))
        coeffs[0] = centers[v]
        if order >= 1:
            for c in range(d):
                alpha = [0] * space.n
                alpha[k * d + c] = 1
                coeffs[space.index[tuple(alpha)], c] = 1.0
        pos[v] = Jet(space, coeffs)

    def position(v: int) -> Jet:
        if v in pos:
            return pos[v]
        return Jet.constant(space, arr[g.index[v]])

    out = Jet.constant(space, 1.0)
    for e in edges:
        e = tuple(e)
        key = e if e in w.kernel else (e[1], e[0])
        diff = position(key[0]) - position(key[1])
        out = out * w.kernel[key].jet(diff.dot(diff))
    for v in vertex_factors:
        out = out * w.coupling[v].jet(position(v))
    return out


def restrict(w: WeightModel, vertices: Iterable[int]) -> WeightModel:
    """Weight of the full vertex part on ``vertices``, as a model over its own graph."""
    g = w.graph
    vs = g.sort_vertices(vertices)
    edges = g.induced_edges(vs)
    sub = Graph.build(vs, edges, g.dimension)
    return WeightModel(sub, {e: w.kernel[e] for e in sub.edges}, {v: w.coupling[v] for v in vs})
