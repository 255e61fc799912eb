"""Command-line front end: ``renormkit <subcommand> SPEC [flags]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import RenormkitError
from .forestry import (
    DEFAULT_FOREST_LIMIT,
    active_family_from_sets,
    default_active_family,
    validate_active_family,
)
from .graph import Configuration, IntegrationSet
from .lemmas import check_scaling_lemmas, random_configuration
from .probes import (
    IR_GRID,
    UV_GRID,
    check_theorem,
    ir_scaling_probe,
    mc_integrate,
    shell_integrate,
    uv_scaling_probe,
)
from .reports import Report, degree_table, emit_report, evaluation_breakdown, forest_table, make_manifest
from .taylor import RenormalizedEvaluator, SubtractionScheme, forest_term, reordered_terms
from .weights import format_degree, ir_scaling_degree, parse_weight_model, uv_scaling_degree, eval_weight

STOCHASTIC = {"uv-probe", "ir-probe", "shells", "integrate", "check", "lemmas"}


class UsageError(Exception):
    pass


def _vertex_list(text: str) -> list[int]:
    text = text.strip()
    if text.startswith("["):
        return [int(v) for v in json.loads(text)]
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _vertex_sets(text: str) -> list[list[int]]:
    text = text.strip()
    if text.startswith("["):
        return [[int(v) for v in s] for s in json.loads(text)]
    return [_vertex_list(chunk) for chunk in text.split(";") if chunk.strip()]


def _shell_range(text: str) -> range:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise UsageError("--shells expects k0..k1")
    return range(int(lo), int(hi) + 1)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("spec_file", nargs="?", help="graph-spec JSON file")
    common.add_argument("--spec", help="graph-spec JSON file (alternative to the positional argument)")
    common.add_argument("--report", help="write the JSON report here instead of standard output")
    common.add_argument("--csv", help="write the table (shells) as CSV here")
    common.add_argument("--seed", type=int, help="seed for every random choice")
    common.add_argument("--scheme", choices=[s.value for s in SubtractionScheme], default="edge-weighted")
    common.add_argument("--jet-cap", type=int, default=8, help="maximal nested Taylor order")
    common.add_argument("--timestamp", help="fixed manifest timestamp, for byte-identical reruns")
    common.add_argument("--integration-set", help="integrated vertices, e.g. 2 or 2,3")
    common.add_argument("--active-family", help="active parts, e.g. '1,2;3,4' or [[1,2]]")
    common.add_argument("--limit", type=int, default=DEFAULT_FOREST_LIMIT, help="renormalization part limit")
    common.add_argument("--config", help="positions file: JSON map vertex id -> coordinates")

    parser = argparse.ArgumentParser(prog="renormkit", description="Configuration-space forest-formula toolkit")
    parser.add_argument("--version", action="version", version=f"renormkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("forests", parents=[common], help="renormalization parts, forests and saturation classes")
    sub.add_parser("degrees", parents=[common], help="closed-form UV and IR degrees")
    p = sub.add_parser("evaluate", parents=[common], help="renormalized weight at one configuration")
    p.add_argument("--forest", default="all", help="forest index or 'all'")
    p.add_argument("--reordered", action="store_true", help="also evaluate the saturated-class sum")

    for name, helptext in (("uv-probe", "fitted contraction exponent"), ("ir-probe", "fitted dilation exponent")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--vertices", help="vertices to scale (default: all for uv, the integration set for ir)")
        p.add_argument("--target", choices=["u", "ru"], default="ru", help="bare or renormalized weight")
        p.add_argument("--forest", help="probe a single forest term by index")

    p = sub.add_parser("shells", parents=[common], help="dyadic shell integrals at a diagonal")
    p.add_argument("--shells", default="4..10", help="shell index range k0..k1")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--radius", type=float, help="base radius r0 (default: the region radius)")
    p.add_argument("--target", choices=["u", "ru"], default="ru")

    p = sub.add_parser("integrate", parents=[common], help="Monte Carlo integral over balls")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--radius", type=float, default=8.0)
    p.add_argument("--target", choices=["u", "ru"], default="ru")

    p = sub.add_parser("check", parents=[common], help="integrability verdicts")
    p.add_argument("--which", choices=["local", "global", "both"], default="both")
    p.add_argument("--shells", default="4..10")
    p.add_argument("--samples", type=int, help="samples per shell (local) or per integral (global)")
    p.add_argument("--radius", type=float, default=8.0, help="ball radius for the global check")

    p = sub.add_parser("lemmas", parents=[common], help="scaling-lemma verdicts")
    p.add_argument("--family", action="store_true", help="run on the built-in test family instead of SPEC")
    return parser


# helpers ------------------------------------------------------------------------------


def _spec_path(args) -> str | None:
    if args.spec and args.spec_file and args.spec != args.spec_file:
        raise UsageError("give the graph file either positionally or with --spec, not both")
    return args.spec or args.spec_file


def _load(args):
    path = _spec_path(args)
    if path is None:
        raise UsageError("a graph-spec file is required")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    return path, parse_weight_model(text)


def _integration_set(args, w, required: bool = False):
    if args.integration_set is None:
        if required:
            raise UsageError("--integration-set is required for this subcommand")
        return None
    return IntegrationSet.of(w.graph, _vertex_list(args.integration_set)).members


def _active_family(args, w, i):
    if i is None:
        return None
    if args.active_family is None:
        return default_active_family(w, i)
    act = active_family_from_sets(w, _vertex_sets(args.active_family))
    validate_active_family(w, i, act)
    return act


def _configuration(args, w) -> np.ndarray:
    g = w.graph
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read configuration {args.config}: {exc}") from exc
        return Configuration({int(k): tuple(v) for k, v in raw.items()}).array(g)
    if args.seed is None:
        raise UsageError("give --config or --seed to choose a configuration")
    return random_configuration(g, args.seed)


def _evaluator(args, w, which: str):
    if which == "u":
        return lambda y: eval_weight(w, y)
    ev = RenormalizedEvaluator(w, scheme=args.scheme, cap=args.jet_cap, limit=args.limit, check_exceptional=False)
    forest = getattr(args, "forest", None)
    if forest is not None and forest != "all":
        f = ev.forests[int(forest)]
        return lambda y: forest_term(w, f, y, ev.scheme, cap=ev.cap)
    return ev


# subcommands -----------------------------------------------------------------------------


def cmd_forests(args):
    path, w = _load(args)
    i = _integration_set(args, w)
    return path, forest_table(w, i, _active_family(args, w, i), args.limit), None, 0


def cmd_degrees(args):
    path, w = _load(args)
    return path, degree_table(w, _integration_set(args, w)), None, 0


def cmd_evaluate(args):
    path, w = _load(args)
    x = _configuration(args, w)
    ev = RenormalizedEvaluator(w, scheme=args.scheme, cap=args.jet_cap, limit=args.limit)
    if args.forest != "all":
        k = int(args.forest)
        ev = RenormalizedEvaluator(w, [ev.forests[k]], scheme=args.scheme, cap=args.jet_cap)
    terms = ev.terms(x)
    total = np.sum(terms, axis=0) if terms else 0.0
    payload = evaluation_breakdown(ev.forests, terms, total)
    payload["configuration"] = x.tolist()
    if args.reordered:
        i = _integration_set(args, w, required=True)
        act = _active_family(args, w, i)
        rows = reordered_terms(ev, x, i, act)
        payload["reordered"] = {
            "integration_set": sorted(i),
            "active_family": act.to_list(),
            "total": float(sum(t for _, t in rows)),
            "terms": [{"saturated": s.to_list(), "value": float(t)} for s, t in rows],
        }
    return path, payload, None, 0


def cmd_uv_probe(args):
    path, w = _load(args)
    x = _configuration(args, w)
    verts = _vertex_list(args.vertices) if args.vertices else list(w.graph.vertex_ids)
    ref = (lambda y: eval_weight(w, y)) if args.target == "ru" else None
    res = uv_scaling_probe(_evaluator(args, w, args.target), w.graph, x, verts, UV_GRID, reference=ref)
    payload = {
        "vertices": verts,
        "target": args.target,
        "probe": res.to_dict(),
        "closed_form_uv_scaling_degree": str(uv_scaling_degree(w, verts)),
        "configuration": x.tolist(),
    }
    return path, payload, None, 0


def cmd_ir_probe(args):
    path, w = _load(args)
    x = _configuration(args, w)
    if args.vertices:
        verts = _vertex_list(args.vertices)
    else:
        verts = sorted(_integration_set(args, w, required=True), key=w.graph.index.__getitem__)
    res = ir_scaling_probe(_evaluator(args, w, args.target), w.graph, x, verts, IR_GRID)
    payload = {
        "vertices": verts,
        "target": args.target,
        "probe": res.to_dict(),
        "closed_form_ir_scaling_degree": format_degree(ir_scaling_degree(w, verts, verts)),
        "configuration": x.tolist(),
    }
    return path, payload, None, 0


def cmd_shells(args):
    path, w = _load(args)
    i = _integration_set(args, w, required=True)
    x = _configuration(args, w)
    rep = shell_integrate(
        _evaluator(args, w, args.target), w.graph, x, i, _shell_range(args.shells), args.samples, args.seed, args.radius
    )
    payload = rep.to_dict() | {"target": args.target, "configuration": x.tolist()}
    return path, payload, rep.csv_rows(), 0


def cmd_integrate(args):
    path, w = _load(args)
    i = _integration_set(args, w, required=True)
    x = _configuration(args, w)
    res = mc_integrate(_evaluator(args, w, args.target), w, x, i, args.radius, args.samples, args.seed)
    return path, res.to_dict() | {"target": args.target, "configuration": x.tolist()}, None, 0


def cmd_check(args):
    path, w = _load(args)
    i = _integration_set(args, w, required=True)
    x = _configuration(args, w)
    kinds = ["local", "global"] if args.which == "both" else [args.which]
    verdicts = []
    for kind in kinds:
        extra = {"scheme": args.scheme, "cap": args.jet_cap}
        if kind == "local":
            extra["k_range"] = _shell_range(args.shells)
            if args.samples:
                extra["samples"] = args.samples
        else:
            extra["radius"] = args.radius
            if args.samples:
                extra["samples"] = args.samples
        verdicts.append(check_theorem(w, kind, i, x, args.seed, **extra))
    code = 0 if all(v.passed for v in verdicts) else 1
    return path, {"verdicts": [v.to_dict() for v in verdicts], "configuration": x.tolist()}, None, code


def cmd_lemmas(args):
    if args.family:
        path, w = _spec_path(args), None
    else:
        path, w = _load(args)
    verdicts = check_scaling_lemmas(w, args.seed, args.scheme)
    failed = sum(not v.passed for v in verdicts)
    payload = {"verdicts": [v.to_dict() for v in verdicts], "total": len(verdicts), "failed": failed}
    return path, payload, None, 1 if failed else 0


COMMANDS = {
    "forests": cmd_forests,
    "degrees": cmd_degrees,
    "evaluate": cmd_evaluate,
    "uv-probe": cmd_uv_probe,
    "ir-probe": cmd_ir_probe,
    "shells": cmd_shells,
    "integrate": cmd_integrate,
    "check": cmd_check,
    "lemmas": cmd_lemmas,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command in STOCHASTIC and args.seed is None:
            raise UsageError(f"'{args.command}' needs --seed")
        path, payload, rows, code = COMMANDS[args.command](args)
        flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("spec_file", "spec", "command")}
        manifest = make_manifest(path, args.command, flags, args.seed, args.timestamp)
        text = emit_report(Report(manifest, payload), args.report, args.csv, rows)
    except UsageError as exc:
        print(f"renormkit: error: {exc}", file=sys.stderr)
        return 2
    except (RenormkitError, ValueError, OSError, IndexError) as exc:
        print(f"renormkit: error: {exc}", file=sys.stderr)
        return 2
    if args.report is None:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())
