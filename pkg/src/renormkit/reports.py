"""Report envelopes, payload tables and atomic output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema
import numpy as np

from . import __version__
from .forestry import (
    ActiveFamily,
    Forest,
    enumerate_forests,
    equivalence_classes,
    renormalization_parts,
    saturation_record,
)
from .graph import classify_subgraph, enumerate_full_vertex_parts
from .weights import (
    WeightModel,
    format_degree,
    ir_degree,
    ir_scaling_degree,
    taylor_order,
    uv_degree,
    uv_scaling_degree,
)

SCHEMA_VERSION = 1
SHELL_CSV_HEADER = ("k", "r_in", "r_out", "estimate", "stderr")

REPORT_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "manifest", "payload"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "manifest": {
            "type": "object",
            "required": ["path", "sha256", "subcommand", "flags", "seed", "version", "timestamp"],
            "additionalProperties": False,
            "properties": {
                "path": {"type": ["string", "null"]},
                "sha256": {"type": ["string", "null"], "pattern": "^[0-9a-f]{64}$"},
                "subcommand": {
                    "enum": ["forests", "degrees", "evaluate", "uv-probe", "ir-probe", "shells", "integrate", "check", "lemmas"]
                },
                "flags": {"type": "object"},
                "seed": {"type": ["integer", "null"]},
                "version": {"type": "string"},
                "timestamp": {"type": "string"},
            },
        },
        "payload": {"type": "object"},
    },
}


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types: Fractions become strings, infinities become 'inf'/'-inf'."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


@dataclass(frozen=True)
class RunManifest:
    path: str | None
    sha256: str | None
    subcommand: str
    flags: dict
    seed: int | None
    version: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "sha256": self.sha256,
            "subcommand": self.subcommand,
            "flags": to_jsonable(self.flags),
            "seed": self.seed,
            "version": self.version,
            "timestamp": self.timestamp,
        }


def make_manifest(
    spec_path: str | None, subcommand: str, flags: dict, seed: int | None, timestamp: str | None = None
) -> RunManifest:
    digest = None
    if spec_path is not None:
        digest = hashlib.sha256(Path(spec_path).read_bytes()).hexdigest()
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).replace(microsecond=0).isoformat()
    return RunManifest(spec_path, digest, subcommand, dict(flags), seed, __version__, timestamp)


@dataclass(frozen=True)
class Report:
    manifest: RunManifest
    payload: dict

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "manifest": self.manifest.to_dict(), "payload": to_jsonable(self.payload)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        validate_report(data)
        m = data["manifest"]
        return cls(RunManifest(**m), data["payload"])


def validate_report(data: dict) -> None:
    jsonschema.validate(data, REPORT_SCHEMA)


def _atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def emit_report(
    report: Report,
    json_path: str | os.PathLike | None = None,
    csv_path: str | os.PathLike | None = None,
    csv_rows: Iterable[Sequence] | None = None,
    csv_header: Sequence[str] = SHELL_CSV_HEADER,
) -> str:
    """Validate and write the report; returns the JSON text."""
    data = report.to_dict()
    validate_report(data)
    text = report.to_json()
    if json_path is not None:
        _atomic_write(json_path, text)
    if csv_path is not None:
        _atomic_write(csv_path, csv_text(csv_header, csv_rows or []))
    return text


# payload builders ------------------------------------------------------------------


def _role(s, i) -> str | None:
    return None if i is None else classify_subgraph(s, i).value


def degree_table(w: WeightModel, i=None) -> dict:
    parts = []
    for s in enumerate_full_vertex_parts(w.graph):
        parts.append(
            {
                "vertices": list(s.vertices),
                "edges": [list(e) for e in s.edges],
                "uv_scaling_degree": str(uv_scaling_degree(w, s)),
                "uv_degree": str(uv_degree(w, s)),
                "taylor_order": taylor_order(w, s),
                "role": _role(s, i),
            }
        )
    out = {"dimension": w.dimension, "parts": parts}
    if i is not None:
        members = w.graph.sort_vertices(i)
        ir = []
        for k in range(1, len(members) + 1):
            for subset in combinations(members, k):
                ir.append(
                    {
                        "vertices": list(subset),
                        "ir_scaling_degree": format_degree(ir_scaling_degree(w, subset, subset)),
                        "ir_degree": format_degree(ir_degree(w, subset, subset)),
                    }
                )
        out["integration_set"] = list(members)
        out["ir"] = ir
    return out


def forest_table(w: WeightModel, i=None, act: ActiveFamily | None = None, limit: int = 20) -> dict:
    parts = renormalization_parts(w)
    forests = enumerate_forests(w, limit)
    out: dict = {
        "renormalization_parts": [
            {
                "vertices": list(s.vertices),
                "uv_degree": str(uv_degree(w, s)),
                "taylor_order": taylor_order(w, s),
                "role": _role(s, i),
            }
            for s in parts
        ],
        "forests": [{"index": k, "elements": f.to_list()} for k, f in enumerate(forests)],
        "count": len(forests),
    }
    if i is not None and act is not None:
        g = w.graph
        out["integration_set"] = list(g.sort_vertices(i))
        out["active_family"] = act.to_list()
        out["saturation"] = [saturation_record(f, i, act, g).to_dict(g) for f in forests]
        out["classes"] = [
            {
                "saturated": c.saturated.to_list(),
                "base": c.base.to_list(),
                "h_set": [list(h.vertices) for h in c.h_set],
                "members": [m.to_list() for m in c.members],
            }
            for c in equivalence_classes(w, i, act, limit)
        ]
    return out


def evaluation_breakdown(forests: Sequence[Forest], terms: Sequence[np.ndarray], total) -> dict:
    return {
        "total": float(np.asarray(total)),
        "terms": [{"index": k, "forest": f.to_list(), "value": float(np.asarray(t))} for k, (f, t) in enumerate(zip(forests, terms))],
    }
