"""Config parsing and validation diagnostics."""

import json

import numpy as np
import pytest

from gossipopt.config import build_problem, load_config, validate_config
from gossipopt.gossip import ConfigurationError


def base_config(**overrides):
    raw = {
        "scenario": {"type": "scenario1", "n_agents": 10},
        "topology": {"type": "cycle"},
        "gossip": {"scheme": "pairwise", "beta": 0.5},
        "schedule": {"gamma0": 0.1, "xi": 0.9},
        "iterations": 100,
        "monte_carlo_runs": 2,
        "master_seed": 5,
    }
    raw.update(overrides)
    return raw


class TestValidation:
    def test_clean_config_has_no_diagnostics(self):
        assert validate_config(base_config()) == []

    def test_small_decay_exponent_rejected(self):
        diags = validate_config(base_config(schedule={"gamma0": 0.1, "xi": 0.4}))
        assert any(d.severity == "error" and "xi" in d.message for d in diags)

    def test_incompatible_thinning_rejected(self):
        raw = base_config(
            gossip={"scheme": "broadcast", "beta": 0.5, "rarefaction": {"a": 1.0, "eta": 0.4}},
            schedule={"gamma0": 0.1, "xi": 0.7},
        )
        diags = validate_config(raw)
        assert any(d.severity == "error" and "eta" in d.message for d in diags)

    def test_compatible_thinning_accepted(self):
        raw = base_config(
            gossip={"scheme": "broadcast", "beta": 0.5, "rarefaction": {"a": 1.0, "eta": 0.2}},
            schedule={"gamma0": 0.1, "xi": 0.8},
        )
        assert validate_config(raw) == []

    def test_disconnected_topology_warns(self):
        raw = base_config(
            scenario={"type": "scenario1", "n_agents": 4},
            topology={"type": "edge_list", "edges": [[0, 1], [2, 3]]},
        )
        diags = validate_config(raw)
        assert any(d.severity == "warning" and "rho=1" in d.message for d in diags)
        assert not any(d.severity == "error" for d in diags)

    def test_bad_beta_rejected(self):
        diags = validate_config(base_config(gossip={"scheme": "pairwise", "beta": 1.5}))
        assert any(d.severity == "error" for d in diags)

    def test_missing_keys_reported(self):
        diags = validate_config({"scenario": {"type": "scenario1", "n_agents": 3}})
        assert {d.severity for d in diags} == {"error"}

    def test_infeasible_rician_moments_rejected(self):
        raw = base_config(
            scenario={
                "type": "scenario2",
                "channel": {
                    "gains": [[2, 1], [1, 2]],
                    "noise_vars": [0.1, 0.1],
                    "max_powers": [10, 10],
                    "weights": [0.5, 0.5],
                },
                "fading": {"means": [[0.5, 1], [1, 0.5]], "variance": 0.5},
            }
        )
        diags = validate_config(raw)
        assert any("variance exceeds" in d.message for d in diags)

    def test_topology_size_mismatch_rejected(self):
        raw = base_config(topology={"type": "cycle", "n_agents": 7})
        diags = validate_config(raw)
        assert any("agents" in d.message and d.severity == "error" for d in diags)


class TestLoading:
    def test_load_from_file_and_build(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(base_config()))
        config = load_config(path)
        assert config.n_agents == 10
        assert config.dimension == 2
        problem = build_problem(config, np.random.default_rng(0))
        assert problem.n_agents == 10

    def test_invalid_config_raises(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(base_config(schedule={"gamma0": 0.1, "xi": 0.4})))
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_channel_file_resolves_relative_to_config(self, tmp_path):
        channel = {
            "gains": [[2, 1], [1, 2]],
            "noise_vars": [0.1, 0.1],
            "max_powers": [10, 10],
            "weights": [0.6666666666666666, 0.3333333333333333],
        }
        (tmp_path / "channel.json").write_text(json.dumps(channel))
        raw = base_config(
            scenario={"type": "scenario2", "channel_file": "channel.json"},
            topology={"type": "complete"},
        )
        path = tmp_path / "config.json"
        path.write_text(json.dumps(raw))
        config = load_config(path)
        assert config.n_agents == 2
        assert config.dimension == 2
        problem = build_problem(config, np.random.default_rng(0))
        assert problem.dimension == 2

    def test_custom_problem_file(self, tmp_path):
        problem_spec = {
            "targets": [[0.5, 0.0], [0.0, 0.5], [-0.5, 0.0]],
            "noise_std": 0.2,
            "constraint_set": {"type": "ball", "center": [0, 0], "radius": 1},
        }
        (tmp_path / "problem.json").write_text(json.dumps(problem_spec))
        raw = base_config(scenario={"type": "custom", "file": "problem.json"})
        path = tmp_path / "config.json"
        path.write_text(json.dumps(raw))
        config = load_config(path)
        assert (config.n_agents, config.dimension) == (3, 2)
        problem = build_problem(config, np.random.default_rng(0))
        np.testing.assert_allclose(problem.theta_star, [0.0, 1.0 / 6.0], atol=1e-15)

    def test_halfspace_custom_problem(self, tmp_path):
        problem_spec = {
            "targets": [[2.0, 2.0], [1.0, 1.5]],
            "noise_std": 0.0,
            "constraint_set": {
                "type": "halfspaces",
                "normals": [[-1, 0], [0, -1], [1, 1]],
                "offsets": [0, 0, 1],
            },
        }
        raw = base_config(scenario={"type": "custom", **problem_spec})
        config = load_config(raw, base_dir=tmp_path)
        problem = build_problem(config, np.random.default_rng(0))
        # target mean (1.5, 1.75) projects onto the hypotenuse
        np.testing.assert_allclose(problem.theta_star, [0.375, 0.625], atol=1e-9)
