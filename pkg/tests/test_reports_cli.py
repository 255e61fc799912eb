from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from renormkit.cli import run
from renormkit.reports import Report, make_manifest, validate_report

from cli_cases import INVOCATIONS, PAIR, SPECS, STAMP

def _run(tmp_path, name, extra=()):
    report = tmp_path / f"{name}.json"
    code = run([name, *INVOCATIONS[name], "--report", str(report), "--timestamp", STAMP, *extra])
    return code, report


@pytest.mark.parametrize("name", list(INVOCATIONS))
def test_reports_validate_and_rerun_bit_identically(tmp_path, name):
    code, first = _run(tmp_path, name)
    assert code == 0
    before = first.read_bytes()
    assert _run(tmp_path, name)[0] == code
    assert first.read_bytes() == before
    data = json.loads(first.read_text())
    validate_report(data)
    assert data["manifest"]["subcommand"] == name
    assert Report.from_dict(data).to_json() == first.read_text()


def test_forest_report_for_p3(tmp_path):
    _, path = _run(tmp_path, "forests")
    payload = json.loads(path.read_text())["payload"]
    assert payload["count"] == 6 and len(payload["forests"]) == 6
    assert [p["uv_degree"] for p in payload["renormalization_parts"]] == ["0", "0", "0"]
    assert [p["role"] for p in payload["renormalization_parts"]] == ["variable", "variable", "constant"]
    assert len(payload["classes"]) == 4


def test_evaluation_terms_sum_to_total(tmp_path):
    spec = str(SPECS / "p3_gaussian.json")
    path = tmp_path / "eval.json"
    assert run(["evaluate", spec, "--config", str(SPECS / "p3_config.json"), "--report", str(path)]) == 0
    payload = json.loads(path.read_text())["payload"]
    total = payload["total"]
    assert len(payload["terms"]) == 6
    assert sum(t["value"] for t in payload["terms"]) == pytest.approx(total, rel=1e-12, abs=1e-300)


def test_shell_csv_has_fixed_header(tmp_path):
    csv_path = tmp_path / "shells.csv"
    code, _ = _run(tmp_path, "shells", ["--csv", str(csv_path), "--shells", "4..6"])
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "k,r_in,r_out,estimate,stderr"
    assert [row.split(",")[0] for row in lines[1:]] == ["4", "5", "6"]


def test_local_check_on_log_divergent_pair_exits_zero(tmp_path):
    code, path = _run(tmp_path, "check")
    assert code == 0
    (verdict,) = json.loads(path.read_text())["payload"]["verdicts"]
    assert verdict["status"] == "pass"


def test_global_check_hypothesis_not_met_exits_zero(tmp_path):
    path = tmp_path / "g.json"
    code = run(["check", str(SPECS / "p3_a2.json"), "--config", str(SPECS / "p3_config.json"), "--integration-set", "2",
                "--which", "global", "--samples", "5000", "--seed", "1", "--report", str(path)])
    assert code == 0
    assert json.loads(path.read_text())["payload"]["verdicts"][0]["status"] == "hypothesis-not-met"


@pytest.mark.parametrize("name", ["uv-probe", "ir-probe", "shells", "integrate", "check", "lemmas"])
def test_stochastic_commands_need_a_seed(tmp_path, name, capsys):
    args = [a for a in INVOCATIONS[name]]
    k = args.index("--seed")
    del args[k : k + 2]
    assert run([name, *args]) == 2
    assert "--seed" in capsys.readouterr().err


def test_usage_errors_exit_two(tmp_path, capsys):
    assert run(["forests"]) == 2
    assert run(["forests", str(tmp_path / "missing.json")]) == 2
    assert run(["frobnicate"]) == 2
    assert run(["shells", PAIR, "--seed", "1", "--config", str(SPECS / "pair_config.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"vertices": [1, 2], "edges": [[1, 2]]}')
    assert run(["degrees", str(bad)]) == 2


def test_jet_cap_overflow_exits_two(tmp_path):
    # a = 8 needs an order-4 subtraction, above a jet cap of 2
    spec = json.loads(Path(PAIR).read_text())
    spec["kernels"][0]["a"] = 8
    path = tmp_path / "deep.json"
    path.write_text(json.dumps(spec))
    code = run(["evaluate", str(path), "--config", str(SPECS / "pair_config.json"), "--jet-cap", "2"])
    assert code == 2


def test_failed_verdict_exits_one(tmp_path, monkeypatch):
    from renormkit import cli
    from renormkit.probes import Verdict

    monkeypatch.setattr(cli, "check_theorem", lambda *a, **k: Verdict("local_integrability", "fail", witness={}))
    assert _run(tmp_path, "check")[0] == 1


def test_manifest_records_hash_and_flags(tmp_path):
    m = make_manifest(PAIR, "degrees", {"seed": None}, None, STAMP)
    assert len(m.sha256) == 64 and m.timestamp == STAMP
    assert make_manifest(PAIR, "degrees", {}, None).timestamp != ""


def test_report_json_is_sorted_and_byte_stable():
    m = make_manifest(None, "degrees", {"b": 1, "a": np.float64(2.0)}, None, STAMP)
    r = Report(m, {"z": np.arange(2), "a": float("inf")})
    assert r.to_json() == r.to_json()
    data = json.loads(r.to_json())
    assert list(data) == sorted(data)
