import csv
import json

import numpy as np
import pytest

from quadrix.cli import main


def write_config(tmp_path, name="config.json", **overrides):
    cfg = {
        "family": {"alpha": 2, "sign": "minus", "f": {"kind": "quadratic", "a": [1, 2]}},
        "levels": [1.0],
        "offsets": [0.5, 1.0],
        "points": {"count": 4, "seed": 4242},
        "quadrature": {"directions": 256, "radial_order": 16},
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def header_lines(path):
    return [ln for ln in path.read_text().splitlines() if ln.startswith("#")]


class TestMeasures:
    def test_reproducible_bytes(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "m1.csv", tmp_path / "m2.csv"
        assert main(["measures", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["measures", "--config", str(cfg), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "j1.csv", tmp_path / "j4.csv"
        assert main(["measures", "--config", str(cfg), "--out", str(out1), "--jobs", "1"]) == 0
        assert main(["measures", "--config", str(cfg), "--out", str(out2), "--jobs", "4"]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_header_metadata_and_columns(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "m.csv"
        main(["measures", "--config", str(cfg), "--out", str(out)])
        head = header_lines(out)
        assert head[0].startswith("# quadrix ")
        assert head[1].startswith("# config_sha256=")
        assert head[2] == "# seed=4242"
        rows = read_rows(out)
        assert len(rows) == 8  # 1 level x 2 offsets x 4 points
        assert list(rows[0]) == [
            "k", "h", "t", "Vstar", "Vstar_err", "Astar", "Astar_err",
            "Sstar", "Sstar_err", "grad_norm", "seed", "error",
        ]
        # cap volume is point-independent on this family
        by_h = {}
        for row in rows:
            by_h.setdefault(row["h"], []).append(float(row["Vstar"]))
        for vals in by_h.values():
            assert max(vals) - min(vals) <= 1e-9 * max(vals)

    def test_seed_override(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "m.csv"
        main(["measures", "--config", str(cfg), "--out", str(out), "--seed", "99"])
        assert "# seed=99" in header_lines(out)

    def test_missing_offsets_is_config_error(self, tmp_path):
        cfg = write_config(tmp_path, offsets=[])
        assert main(["measures", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 1

    def test_jobs_env_fallback(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path)
        ref, out = tmp_path / "ref.csv", tmp_path / "env.csv"
        main(["measures", "--config", str(cfg), "--out", str(ref)])
        monkeypatch.setenv("QUADRIX_JOBS", "3")
        assert main(["measures", "--config", str(cfg), "--out", str(out)]) == 0
        assert out.read_bytes() == ref.read_bytes()

    def test_partial_failures_keep_exit_zero(self, tmp_path):
        # one offset lies outside the admissible interval of the plus family
        cfg = write_config(
            tmp_path,
            family={"alpha": 2, "sign": "plus", "f": {"kind": "quadratic", "a": [1, 1]}},
            offsets=[-0.5, 0.5],
            points={"count": 3, "seed": 5, "box": [[-0.4, 0.4], [-0.4, 0.4]]},
        )
        out = tmp_path / "p.csv"
        assert main(["measures", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_rows(out)
        bad = [r for r in rows if r["error"]]
        good = [r for r in rows if not r["error"]]
        assert len(bad) == 3 and len(good) == 3

    def test_all_rows_failing_exits_one(self, tmp_path):
        cfg = write_config(
            tmp_path,
            family={"alpha": 2, "sign": "plus", "f": {"kind": "quadratic", "a": [1, 1]}},
            offsets=[0.5, 1.0],  # wrong direction for this family
            points={"count": 3, "seed": 5, "box": [[-0.4, 0.4], [-0.4, 0.4]]},
        )
        assert main(["measures", "--config", str(cfg), "--out", str(tmp_path / "f.csv")]) == 1


class TestCurvature:
    def test_unit_sphere_rows(self, tmp_path):
        cfg = write_config(
            tmp_path,
            family={"alpha": 2, "sign": "plus", "f": {"kind": "quadratic", "a": [1, 1]}},
            points={"count": 6, "seed": 11, "box": [[-0.5, 0.5], [-0.5, 0.5]]},
        )
        out = tmp_path / "c.csv"
        assert main(["curvature", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_rows(out)
        assert len(rows) == 6
        for row in rows:
            assert float(row["invariant"]) == pytest.approx(16.0, rel=1e-10)
            assert float(row["K"]) == pytest.approx(1.0, rel=1e-10)

    def test_alpha_three_reports_and_exits_zero(self, tmp_path):
        cfg = write_config(
            tmp_path,
            family={"alpha": 3, "sign": "minus", "f": {"kind": "quadratic", "a": [1, 1]}},
            points={"count": 4, "seed": 11, "box": [[-0.4, 0.4], [-0.4, 0.4]]},
        )
        out = tmp_path / "c3.csv"
        assert main(["curvature", "--config", str(cfg), "--out", str(out)]) == 0
        invs = [float(r["invariant"]) for r in read_rows(out)]
        assert max(invs) - min(invs) > 1e-3 * max(invs)  # reporting, not failing

    def test_convexity_failure_exits_two(self, tmp_path):
        cfg = write_config(
            tmp_path,
            family={"alpha": 1, "sign": "minus",
                    "f": {"kind": "expression", "source": "x1^2 - x2^2", "n": 2}},
            levels=[0.0],
        )
        assert main(["curvature", "--config", str(cfg), "--out", str(tmp_path / "s.csv")]) == 2

    def test_bad_config_exits_one(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\"family\": {}}")
        assert main(["curvature", "--config", str(path)]) == 1


class TestClassify:
    def test_hyperboloid_verdict(self, tmp_path):
        cfg = write_config(tmp_path, levels=[0.5, 1.0], offsets=None,
                           points={"count": 6, "seed": 4242})
        out = tmp_path / "cls.json"
        assert main(["classify", "--config", str(cfg), "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        cls = doc["classification"]
        assert cls["verdict"] == "elliptic_hyperboloid"
        assert doc["schema_version"] == 1
        assert {r["condition"] for r in cls["evidence"]} == {"curvature_invariant", "Vstar", "Astar"}

    def test_perturbed_clean_negative_exits_zero(self, tmp_path):
        cfg = write_config(
            tmp_path,
            family={"alpha": 2, "sign": "minus",
                    "f": {"kind": "perturbed_quadratic", "a": [1, 1], "epsilon": 0.2,
                          "perturbation": "quartic"}},
            offsets=None,
        )
        out = tmp_path / "cls.json"
        assert main(["classify", "--config", str(cfg), "--out", str(out)]) == 0
        assert json.loads(out.read_text())["classification"]["verdict"] == "not_characterized"

    def test_blocked_classification_exits_three(self, tmp_path):
        # the sampling box misses the admissible set entirely
        cfg = write_config(
            tmp_path,
            family={"alpha": 2, "sign": "plus", "f": {"kind": "quadratic", "a": [1, 1]}},
            offsets=None,
            points={"count": 4, "seed": 1, "box": [[1.5, 2.0], [1.5, 2.0]]},
        )
        out = tmp_path / "cls.json"
        with pytest.warns(UserWarning):
            assert main(["classify", "--config", str(cfg), "--out", str(out)]) == 3


class TestSweep:
    def test_paraboloid_scaling(self, tmp_path):
        cfg = write_config(
            tmp_path,
            family={"alpha": 1, "sign": "minus", "f": {"kind": "quadratic", "a": [1, 1]}},
            levels=[1.0],
            offsets=[2.0 ** -j for j in range(6, 0, -1)],
            sweep={"x": [0.0, 0.0]},
        )
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_rows(out)
        hs = np.array([float(r["h"]) for r in rows])
        vs = np.array([float(r["Vstar"]) for r in rows])
        slope, intercept = np.polyfit(np.log(hs), np.log(vs), 1)
        assert slope == pytest.approx(2.0, abs=0.01)
        assert np.exp(intercept) == pytest.approx(np.pi / 2.0, rel=0.01)

    def test_empty_grid_exits_one(self, tmp_path):
        cfg = write_config(tmp_path, offsets=[])
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s.csv")]) == 1


class TestVerify:
    def test_runs_clean(self, tmp_path, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.count("PASS") >= 20
