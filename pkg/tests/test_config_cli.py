import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from kinflock.cli import main
from kinflock.config import load_config, validate_config
from kinflock.errors import ConfigError
from kinflock.io import fmt


def scenario_path(name):
    return str(resources.files("kinflock.scenarios").joinpath(name))


def minimal_kinetic(**overrides):
    data = {
        "mode": "kinetic",
        "dim": 1,
        "lam": 1.0,
        "radius": 0.5,
        "dt": 0.05,
        "t_final": 0.2,
        "initial": {
            "kind": "box_indicator",
            "x_bounds": [[0.0, 1.0]],
            "v_bounds": [[-0.5, 0.5]],
            "sampling": {"kind": "tensor_grid", "n_x": 8, "n_v": 8},
        },
    }
    data.update(overrides)
    return data


class TestValidation:
    def test_minimal_config_fills_defaults(self):
        cfg = validate_config(minimal_kinetic())
        assert cfg["delta"] == 0.0
        assert cfg["seed"] == 0
        assert cfg["diagnostics"]["enabled"] is True

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="typo_key"):
            validate_config(minimal_kinetic(typo_key=1))

    def test_bad_mode_rejected(self):
        with pytest.raises(ConfigError):
            validate_config(minimal_kinetic(mode="nonsense"))

    def test_semantic_checks(self):
        with pytest.raises(ConfigError, match="lam"):
            validate_config(minimal_kinetic(lam=-1.0))
        with pytest.raises(ConfigError, match="radius"):
            validate_config(minimal_kinetic(radius=0.0))
        with pytest.raises(ConfigError, match="delta"):
            validate_config(minimal_kinetic(delta=-0.1))

    def test_large_dt_needs_override(self):
        with pytest.raises(ConfigError, match="lam\\*dt"):
            validate_config(minimal_kinetic(dt=2.0))
        cfg = validate_config(minimal_kinetic(dt=2.0, allow_large_dt=True))
        assert cfg["allow_large_dt"]

    def test_picard_requires_positive_delta(self):
        data = minimal_kinetic(mode="picard")
        with pytest.raises(ConfigError, match="delta"):
            validate_config(data)
        data["delta"] = 0.1
        validate_config(data)

    def test_kinetic_requires_initial(self):
        data = minimal_kinetic()
        del data["initial"]
        with pytest.raises(ConfigError, match="initial"):
            validate_config(data)

    def test_oracle_is_1d_only(self):
        data = {"mode": "oracle", "dim": 2, "lam": 1.0, "radius": 0.5,
                "dt": 0.1, "t_final": 0.2}
        with pytest.raises(ConfigError, match="1D"):
            validate_config(data)

    def test_bounds_dimension_mismatch(self):
        data = minimal_kinetic(dim=2)
        with pytest.raises(ConfigError, match="per dimension"):
            validate_config(data)

    def test_missing_file_and_bad_json(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        with pytest.raises(ConfigError, match="malformed"):
            load_config(bad)

    def test_shipped_scenarios_validate(self):
        for name in ("two_particle_symmetric.json", "kinetic_two_bump.json",
                     "oracle_l2.json", "picard_small.json",
                     "agents_cluster.json", "vicsek_basic.json"):
            load_config(scenario_path(name))

    def test_resolved_config_round_trips(self):
        cfg = validate_config(minimal_kinetic())
        again = validate_config(json.loads(cfg.to_json()))
        assert again.data == cfg.data


class TestSeeding:
    def test_streams_are_deterministic(self):
        a = validate_config(minimal_kinetic(seed=42)).seed_streams()
        b = validate_config(minimal_kinetic(seed=42)).seed_streams()
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.random(5), rb.random(5))

    def test_streams_are_independent_and_seed_sensitive(self):
        s1, s2, s3 = validate_config(minimal_kinetic(seed=1)).seed_streams()
        assert not np.array_equal(s1.random(5), s2.random(5))
        t1, _, _ = validate_config(minimal_kinetic(seed=2)).seed_streams()
        u1, _, _ = validate_config(minimal_kinetic(seed=1)).seed_streams()
        assert not np.array_equal(u1.random(5), t1.random(5))


class TestFormatting:
    def test_fmt_round_trips_doubles(self):
        rng = np.random.default_rng(0)
        for x in rng.uniform(-1e6, 1e6, 200):
            assert float(fmt(x)) == x
        for x in (np.pi, np.exp(-1), 1e-300, -0.0, 123456789.123456789):
            assert float(fmt(x)) == x


class TestCli:
    def test_validate_good_and_bad(self, tmp_path, capsys):
        assert main(["validate", "--config", scenario_path("two_particle_symmetric.json")]) == 0
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(minimal_kinetic(lam=-1.0)))
        assert main(["validate", "--config", str(bad)]) == 2

    def test_run_missing_config_exit_2(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "no.json"),
                     "--out", str(tmp_path / "out")]) == 2

    def test_run_writes_artifacts_and_passes(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(minimal_kinetic()))
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "[PASS]" in text and "[FAIL]" not in text
        assert (out / "diagnostics.json").is_file()
        assert (out / "diagnostics.csv").is_file()
        assert (out / "resolved_config.json").is_file()
        report = json.loads((out / "diagnostics.json").read_text())
        assert all(c["passed"] for c in report["assertions"])

    def test_run_is_reproducible_across_thread_counts(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(minimal_kinetic(delta=0.01)))
        out1, out8 = tmp_path / "o1", tmp_path / "o8"
        assert main(["run", "--config", str(cfg), "--out", str(out1),
                     "--threads", "1"]) == 0
        assert main(["run", "--config", str(cfg), "--out", str(out8),
                     "--threads", "8"]) == 0
        for name in ("particles.csv", "diagnostics.csv"):
            assert (out1 / name).read_bytes() == (out8 / name).read_bytes()
        assert main(["diff-reports", str(out1 / "diagnostics.json"),
                     str(out8 / "diagnostics.json")]) == 0

    def test_seed_override_changes_monte_carlo_output(self, tmp_path):
        data = minimal_kinetic()
        data["initial"]["sampling"] = {"kind": "monte_carlo", "n": 64}
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(data))
        outs = []
        for seed in (1, 2, 1):
            out = tmp_path / f"s{seed}_{len(outs)}"
            assert main(["run", "--config", str(cfg), "--out", str(out),
                         "--seed", str(seed)]) == 0
            outs.append((out / "particles.csv").read_bytes())
        assert outs[0] != outs[1]
        assert outs[0] == outs[2]

    def test_diff_reports_flags_differences(self, tmp_path, capsys):
        a = {"records": [{"t": 0.0, "m": 1.0}], "assertions":
             [{"name": "x", "value": 0.0, "tolerance": 1.0, "passed": True}]}
        b = json.loads(json.dumps(a))
        b["records"][0]["m"] = 1.5
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        pa.write_text(json.dumps(a))
        pb.write_text(json.dumps(b))
        assert main(["diff-reports", str(pa), str(pb)]) == 1
        assert main(["diff-reports", str(pa), str(pb), "--tol", "1.0"]) == 0
        assert main(["diff-reports", str(pa), str(tmp_path / "missing.json")]) == 2
