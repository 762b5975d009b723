"""Monte Carlo harness: persistence, determinism, aggregation, CLI surface."""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from gossipopt.cli import main
from gossipopt.config import load_config
from gossipopt.runner import (
    _fmt,
    export_trace,
    read_trace_csv,
    run_experiment,
)


def small_config(**overrides):
    raw = {
        "scenario": {"type": "scenario1", "n_agents": 5},
        "topology": {"type": "complete"},
        "gossip": {"scheme": "pairwise", "beta": 0.5},
        "schedule": {"gamma0": 0.5, "xi": 0.8},
        "iterations": 60,
        "monte_carlo_runs": 3,
        "master_seed": 31,
        "trace_stride": 5,
    }
    raw.update(overrides)
    return raw


def hash_dir(path: Path) -> dict:
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(path.iterdir())
        if p.is_file()
    }


class TestPersistence:
    def test_output_files_and_header_contract(self, tmp_path):
        config = load_config(small_config())
        run_experiment(config, output_dir=tmp_path)
        names = {p.name for p in tmp_path.iterdir()}
        assert {"run_000.csv", "run_001.csv", "run_002.csv", "aggregate.csv", "manifest.json"} <= names
        header = (tmp_path / "run_000.csv").read_text().splitlines()[0]
        assert header == "iteration,disagreement,objective,kkt_residual,deviation,avg_0,avg_1"

    def test_one_record_line_has_expected_column_count(self, tmp_path):
        config = load_config(small_config(iterations=0, monte_carlo_runs=1))
        run_experiment(config, output_dir=tmp_path)
        lines = (tmp_path / "run_000.csv").read_text().strip().splitlines()
        assert len(lines) == 2  # header + initial state
        assert len(lines[1].split(",")) == 5 + 2

    def test_empty_trace_exports_header_only(self, tmp_path):
        payload = {
            "iterations": np.empty(0, dtype=np.int64),
            "disagreements": np.empty(0),
            "objectives": np.empty(0),
            "kkt_residuals": np.empty(0),
            "deviations": np.empty(0),
            "averages": np.empty((0, 3)),
        }
        out = tmp_path / "empty.csv"
        export_trace(payload, out)
        assert out.read_text() == "iteration,disagreement,objective,kkt_residual,deviation,avg_0,avg_1,avg_2\n"

    def test_csv_round_trip_is_exact(self, tmp_path):
        config = load_config(small_config(monte_carlo_runs=1))
        result = run_experiment(config, output_dir=tmp_path)
        back = read_trace_csv(tmp_path / "run_000.csv")
        agg_back = back  # single run: per-run curves equal the aggregate means
        assert np.array_equal(back["iterations"], result.iterations)
        assert np.array_equal(agg_back["disagreements"], result.disagreement_mean)
        assert np.array_equal(agg_back["deviations"], result.deviation_mean)

    def test_17_digit_float_format_round_trips(self):
        values = [1.0 / 3.0, np.pi, 1e-300, 123456.789012345678, 5.386975699707091]
        for v in values:
            assert float(_fmt(v)) == v

    def test_aggregate_equals_mean_of_rereads(self, tmp_path):
        config = load_config(small_config())
        result = run_experiment(config, output_dir=tmp_path)
        traces = [read_trace_csv(tmp_path / f"run_{k:03d}.csv") for k in range(3)]
        recomputed = np.mean([t["deviations"] for t in traces], axis=0)
        np.testing.assert_allclose(recomputed, result.deviation_mean, atol=1e-12)
        recomputed_dis = np.mean([t["disagreements"] for t in traces], axis=0)
        np.testing.assert_allclose(recomputed_dis, result.disagreement_mean, atol=1e-12)

    def test_manifest_contents(self, tmp_path):
        config = load_config(small_config())
        run_experiment(config, output_dir=tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["master_seed"] == 31
        assert manifest["n_runs"] == 3
        assert len(manifest["run_summaries"]) == 3
        assert manifest["config"] == small_config()
        assert len(manifest["provenance_sha256"]) == 64


class TestDeterminism:
    def test_same_seed_twice_is_byte_identical(self, tmp_path):
        config = load_config(small_config())
        a, b = tmp_path / "a", tmp_path / "b"
        run_experiment(config, output_dir=a)
        run_experiment(config, output_dir=b)
        assert hash_dir(a) == hash_dir(b)

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        config = load_config(small_config())
        serial, parallel = tmp_path / "serial", tmp_path / "parallel"
        run_experiment(config, output_dir=serial, workers=1)
        run_experiment(config, output_dir=parallel, workers=3)
        assert hash_dir(serial) == hash_dir(parallel)

    def test_different_seed_changes_results(self, tmp_path):
        a = run_experiment(load_config(small_config()), output_dir=tmp_path / "a")
        b = run_experiment(load_config(small_config(master_seed=32)), output_dir=tmp_path / "b")
        assert not np.array_equal(a.deviation_mean, b.deviation_mean)


class TestCLI:
    def test_validate_ok(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(small_config()))
        assert main(["validate", str(path)]) == 0
        assert "config ok" in capsys.readouterr().out

    def test_validate_bad_config_exits_one(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(small_config(schedule={"gamma0": 1.0, "xi": 0.3})))
        assert main(["validate", str(path)]) == 1
        assert "xi" in capsys.readouterr().out

    def test_run_writes_outputs(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(small_config()))
        out = tmp_path / "results"
        assert main(["run", str(path), "--out", str(out)]) == 0
        assert (out / "aggregate.csv").exists()
        assert "mean final deviation" in capsys.readouterr().out

    def test_run_seed_override(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(small_config()))
        main(["run", str(path), "--out", str(tmp_path / "a"), "--seed", "99"])
        main(["run", str(path), "--out", str(tmp_path / "b"), "--seed", "99"])
        main(["run", str(path), "--out", str(tmp_path / "c"), "--seed", "100"])
        ha, hb, hc = (hash_dir(tmp_path / x) for x in "abc")
        assert {k: v for k, v in ha.items() if k != "manifest.json"} == {
            k: v for k, v in hb.items() if k != "manifest.json"
        }
        assert ha != hc

    def test_missing_config_exits_one(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "absent.json")]) == 1

    def test_unwritable_output_exits_two(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(small_config()))
        assert main(["run", str(path), "--out", "/proc/definitely/not/writable"]) == 2

    def test_rho_reports_statistics(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(small_config()))
        assert main(["rho", str(path)]) == 0
        out = capsys.readouterr().out
        assert "spectral rho" in out
        assert "connected: True" in out

    def test_kkt_prints_candidates(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(small_config()))
        assert main(["kkt", str(path), "--starts", "3"]) == 0
        assert "candidate stationary point" in capsys.readouterr().out

    def test_landscape_export(self, tmp_path, capsys):
        raw = small_config(
            scenario={
                "type": "scenario2",
                "channel": {
                    "gains": [[2, 1], [1, 2]],
                    "noise_vars": [0.1, 0.1],
                    "max_powers": [10, 10],
                    "weights": [0.6666666666666666, 0.3333333333333333],
                },
            },
            topology={"type": "complete"},
        )
        path = tmp_path / "c.json"
        path.write_text(json.dumps(raw))
        out = tmp_path / "landscape.csv"
        assert main(["landscape", str(path), "--out", str(out), "--resolution", "12"]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "p1,p2,objective"
        assert len(lines) == 1 + 12 * 12

    def test_landscape_rejects_wrong_scenario(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(small_config()))
        assert main(["landscape", str(path)]) == 1


class TestFailureHandling:
    def test_failing_run_preserves_partial_trace(self, tmp_path, monkeypatch):
        import gossipopt.problems as problems_module

        original = problems_module.constrained_least_squares

        def sabotaged(n_agents, rng):
            problem = original(n_agents, rng)
            call_count = {"n": 0}
            real_observe = problem.observe

            def bad_observe(theta, rng_inner):
                call_count["n"] += 1
                out = real_observe(theta, rng_inner)
                if call_count["n"] >= 10:
                    out = out.copy()
                    out[0] = np.nan
                return out

            object.__setattr__(problem, "observe", bad_observe)
            return problem

        monkeypatch.setattr("gossipopt.config.constrained_least_squares", sabotaged)
        config = load_config(small_config(monte_carlo_runs=2))
        from gossipopt.runner import RunFailure

        with pytest.raises(RunFailure) as err:
            run_experiment(config, output_dir=tmp_path)
        assert err.value.run_index == 0
        assert err.value.iteration == 10
        partial = tmp_path / "run_000_partial.csv"
        assert partial.exists()
        back = read_trace_csv(partial)
        assert back["iterations"].tolist() == [0, 1, 5]  # strided records before the abort
