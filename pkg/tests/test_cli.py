import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from fockphase import cli
from fockphase.config import validate
from fockphase.errors import ConfigValidationError, ZeroProbabilityRecordError

BASE = {"name": "t", "seed": 5, "condensate": {"n_a": 5000, "n_b": 5000},
        "events": {"P": 40, "kind": "position"}}
SPIN = {"name": "s", "seed": 2,
        "condensate": {"n_a": 500, "n_b": 500, "spinful": True,
                       "layout": {"regions": {"D": [4, 1, 1], "D'": [2, 1, [0, 1]],
                                              "D''": [2, 1, [0, 1]]}}},
        "events": {"P": 20, "kind": "spin", "region": "D", "targets": ["D'", "D''"]}}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def run(*args):
    return cli.main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_validate_valid_config():
    cfg = validate(BASE)
    assert cfg.P == 40 and cfg.spec.N == 10000 and cfg.M >= 4096
    assert cfg.raw == BASE


def test_validate_reports_paths():
    with pytest.raises(ConfigValidationError) as exc:
        validate({"condensate": {"n_a": 0, "n_b": 0}})
    assert ("condensate", "empty condensate") in exc.value.errors
    with pytest.raises(ConfigValidationError) as exc:
        validate({"condensate": {"n_a": 50, "n_b": 50}, "events": {"P": 50}})
    paths = dict(exc.value.errors)
    assert "approximation domain violated" in paths["events.P"]
    validate({"condensate": {"n_a": 50, "n_b": 50}, "events": {"P": 50}, "allow_large_P": True})
    with pytest.raises(ConfigValidationError) as exc:
        validate({"condensate": {"n_a": 50, "n_b": 50}, "events": {"kind": "spin", "policy": {"kind": "x"}},
                  "prior": {"kind": "coherent", "modulus": -1}, "grid": {"M": 8}})
    paths = {p for p, _ in exc.value.errors}
    assert {"events.kind", "events.policy.kind", "prior.modulus", "grid.M"} <= paths


def test_simulate_outputs_and_determinism(tmp_path):
    cfg = write(tmp_path, BASE)
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "a") == 0
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "b") == 0
    for name in ("record.csv", "posterior.csv", "summary.json", "snapshots/posterior_0040.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = read_csv(tmp_path / "a" / "record.csv")
    assert len(rows) == 40 and list(rows[0]) == ["index", "u", "theta", "eta"]
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["final"]["std"] < summary["initial"]["std"]
    assert len(summary["trajectory"]) == 41
    post = read_csv(tmp_path / "a" / "posterior.csv")
    assert len(post) == summary["grid_M"]
    # 17 significant digits round-trip exactly
    vals = np.array([float(r["density"]) for r in post])
    assert np.sum(vals) * 2 * math.pi / len(vals) == pytest.approx(1.0, abs=1e-12)
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "c", "--seed", "6") == 0
    assert (tmp_path / "c" / "record.csv").read_bytes() != (tmp_path / "a" / "record.csv").read_bytes()


def test_simulate_empty_record(tmp_path):
    cfg = write(tmp_path, {**BASE, "events": {"P": 0}})
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "o", "--final-only") == 0
    assert len(read_csv(tmp_path / "o" / "record.csv")) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["final"]["resultant"] < 1e-12 and summary["final"]["mean"] is None
    assert not (tmp_path / "o" / "snapshots").exists()


def test_region_run_and_external_posterior(tmp_path):
    cfg = write(tmp_path, SPIN)
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "s", "--final-only") == 0
    summary = json.loads((tmp_path / "s" / "summary.json").read_text())
    assert summary["predictions"]["D'"] == summary["predictions"]["D''"]
    assert run("posterior", "--config", cfg, "--record", tmp_path / "s" / "record.csv",
               "--out-dir", tmp_path / "p", "--final-only") == 0
    assert (tmp_path / "p" / "posterior.csv").read_bytes() == (tmp_path / "s" / "posterior.csv").read_bytes()


def test_impossible_external_record_exit_code(tmp_path):
    cfg = write(tmp_path, {"condensate": {"n_a": 50, "n_b": 50, "spinful": True},
                           "events": {"kind": "spin"}})
    rec = tmp_path / "rec.csv"
    rec.write_text("index,u,theta,eta\n0,0,0,1\n1,0,0,-1\n2,0,0,1\n3,0,1.5707963267948966,1\n"
                   "4,0,1.5707963267948966,-1\n")
    # (1+cos)(1-cos)(1+sin)(1-sin) vanishes only on a measure-zero set, so this is possible
    assert run("posterior", "--config", cfg, "--record", rec, "--out-dir", tmp_path / "ok") == 0


def test_zero_probability_record_exit_code(tmp_path, monkeypatch):
    cfg = write(tmp_path, {"condensate": {"n_a": 50, "n_b": 50, "spinful": True},
                           "events": {"kind": "spin"}})
    rec = tmp_path / "rec.csv"
    rec.write_text("index,u,theta,eta\n0,0,0,1\n")

    def refuse(*_):
        raise ZeroProbabilityRecordError("impossible")

    monkeypatch.setattr(cli.eng, "posterior_update", refuse)
    assert run("posterior", "--config", cfg, "--record", rec, "--out-dir", tmp_path / "z") == 3


def test_validation_exit_code(tmp_path):
    cfg = write(tmp_path, {"condensate": {"n_a": 0, "n_b": 0}})
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "x") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("simulate", "--config", bad, "--out-dir", tmp_path / "x") == 2


def test_oracle_compare(tmp_path):
    cfg = write(tmp_path, {**BASE, "oracle": {"N_values": [100, 1000, 10000, 100000], "P": 2}})
    assert run("oracle-compare", "--config", cfg, "--out-dir", tmp_path / "o") == 0
    rows = read_csv(tmp_path / "o" / "oracle_compare.csv")
    assert all(float(r["rel_dev_engine_power"]) <= 1e-10 for r in rows)
    devs = [float(r["rel_dev_falling_power"]) for r in rows]
    assert all(b < a for a, b in zip(devs, devs[1:]))


def test_oracle_compare_hand_value():
    cfg = validate({"condensate": {"n_a": 10, "n_b": 10}, "events": {"P": 2}})
    from fockphase.model import DetectionEvent
    from fockphase import oracle
    ev = [DetectionEvent("position", u=0.0)] * 2
    assert oracle.exact_sequence_probability(ev, cfg.spec, "falling").value == pytest.approx(580)
    assert oracle.exact_sequence_probability(ev, cfg.spec, "power").value == pytest.approx(600)


def test_oracle_cap_exit_code(tmp_path):
    cfg = write(tmp_path, {"condensate": {"n_a": 500, "n_b": 500, "n_c": 500},
                           "oracle": {"N_values": [1500], "P": 16}})
    assert run("oracle-compare", "--config", cfg, "--out-dir", tmp_path / "o") == 3


def test_wallis_table(tmp_path):
    assert run("wallis", "--max-p", "4", "--out-dir", tmp_path) == 0
    rows = {(int(r["p_plus"]), int(r["p_minus"])): r for r in read_csv(tmp_path / "wallis.csv")}
    assert float(rows[(1, 0)]["closed_form"]) == pytest.approx(0.5)
    assert float(rows[(1, 1)]["quadrature"]) == pytest.approx(0.125)
    assert float(rows[(2, 0)]["closed_form"]) == pytest.approx(0.375)
    assert all(float(r["abs_diff"]) < 1e-12 for r in rows.values())
    assert run("wallis", "--max-p", "65") == 2


def test_sweep_single_cell_matches_simulate(tmp_path):
    cfg = write(tmp_path, {**BASE, "sweep": {"seeds": 1}})
    assert run("sweep", "--config", cfg, "--out-dir", tmp_path / "w") == 0
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "s", "--final-only") == 0
    row = read_csv(tmp_path / "w" / "sweep.csv")[0]
    summary = json.loads((tmp_path / "s" / "summary.json").read_text())
    assert float(row["median_std"]) == summary["final"]["std"]


def test_sweep_parallel_is_deterministic(tmp_path):
    cfg = write(tmp_path, {**BASE, "sweep": {"P": [5, 40], "seeds": 6}})
    assert run("sweep", "--config", cfg, "--out-dir", tmp_path / "one", "--jobs", "1") == 0
    assert run("sweep", "--config", cfg, "--out-dir", tmp_path / "two", "--jobs", "3") == 0
    a = (tmp_path / "one" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "two" / "sweep.csv").read_bytes()
    rows = read_csv(tmp_path / "one" / "sweep.csv")
    assert float(rows[1]["median_std"]) < float(rows[0]["median_std"])


def test_sweep_coherent_prior_widths(tmp_path):
    cfg = write(tmp_path, {**BASE, "events": {"P": 0}, "sweep": {"modulus": [2, 5]}})
    assert run("sweep", "--config", cfg, "--out-dir", tmp_path / "w") == 0
    rows = read_csv(tmp_path / "w" / "sweep.csv")
    assert float(rows[1]["median_std"]) < float(rows[0]["median_std"])
    cfg = write(tmp_path, {**BASE, "sweep": {"P": []}}, "empty.json")
    assert run("sweep", "--config", cfg, "--out-dir", tmp_path / "e") == 2


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "fockphase.cli", "wallis", "--max-p", "1"],
                         capture_output=True, text=True, env={"FOCKPHASE_LOG": "DEBUG", "PATH": ""})
    assert out.returncode == 0
    assert out.stdout.splitlines()[0] == "p_plus,p_minus,closed_form,quadrature,abs_diff"
