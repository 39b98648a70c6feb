import json

import numpy as np
import pytest

import lobequil as L
from lobequil.cli import main
from lobequil.config import RunConfig
from lobequil.errors import ConfigurationError


BASE_TOML = """
[market]
x0 = 100.0
q0 = 10.0

[grid]
nt = 10
nx = 16
nk = 16

[mc]
paths = 10
seed = 3
"""


@pytest.fixture()
def cfg_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(BASE_TOML)
    return str(p)


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig.from_dict({})
        assert cfg.params.x0 == 100.0
        assert cfg.params.lam == 2.0
        assert cfg.penalty.eta == 0.5
        assert cfg.grid.nq == 108

    def test_full_sections(self):
        cfg = RunConfig.from_dict({
            "utility": {"family": "exponential", "a": 2.0, "gamma": 0.2},
            "market": {"x0": 50.0, "q0": 8.0, "T": 2.0, "K": 4.0,
                       "lambda": 1.0, "mu_hat": 0.01, "sigma_hat": 0.3,
                       "nu_sizes": [1.0, -1.0], "nu_probs": [0.6, 0.4]},
            "penalty": {"eta": 0.25},
            "grid": {"nt": 8, "nx": 12, "nk": 12, "x_min": 10.0,
                     "x_max": 200.0, "q_max": 12.0},
            "mc": {"paths": 50, "seed": 9},
            "output": {"dir": "results"},
        })
        assert cfg.utility.gamma == 0.2
        assert cfg.params.jumps.sizes == (1.0, -1.0)
        assert cfg.grid.x_max == 200.0
        assert cfg.out_dir == "results"

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigurationError, match="section"):
            RunConfig.from_dict({"markets": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError, match="market"):
            RunConfig.from_dict({"market": {"x_0": 100.0}})
        with pytest.raises(ConfigurationError, match="grid"):
            RunConfig.from_dict({"grid": {"Nt": 10}})

    def test_invalid_values_rejected(self):
        with pytest.raises(Exception):
            RunConfig.from_dict({"market": {"x0": -5.0}})
        with pytest.raises(Exception):
            RunConfig.from_dict({"market": {"nu_probs": [0.7, 0.7],
                                            "nu_sizes": [1.0, -1.0]}})


class TestCommands:
    def test_solve_artifacts(self, cfg_file, tmp_path):
        out = str(tmp_path / "o1")
        assert main(["--config", cfg_file, "--out", out, "solve"]) == 0
        side = json.loads((tmp_path / "o1" / "value_field.json").read_text())
        assert side["grid"]["nt"] == 10
        v = np.load(tmp_path / "o1" / "value_field.npy")
        assert v.shape[0] == 11
        assert (tmp_path / "o1" / "slice_t0_x0.csv").exists()

    def test_simulate_artifacts(self, cfg_file, tmp_path):
        out = str(tmp_path / "o2")
        assert main(["--config", cfg_file, "--out", out, "simulate",
                     "--strategy", "twap"]) == 0
        costs = json.loads((tmp_path / "o2" / "costs.json").read_text())
        assert len(costs["paths"]) == 10
        header = (tmp_path / "o2" / "paths.csv").read_text().splitlines()[0]
        assert header == "path,t,x,q,pi,dY"

    def test_policy_artifacts(self, cfg_file, tmp_path):
        out = str(tmp_path / "o3")
        assert main(["--config", cfg_file, "--out", out, "policy"]) == 0
        stats = json.loads((tmp_path / "o3" / "rollout_stats.json").read_text())
        assert "policy_J1" in stats and "twap_J1" in stats
        header = (tmp_path / "o3" / "policy.csv").read_text().splitlines()[0]
        assert header == "t,x,q,interval_start,interval_end"

    def test_policy_from_saved_field(self, cfg_file, tmp_path):
        out = str(tmp_path / "o4")
        main(["--config", cfg_file, "--out", out, "solve"])
        assert main(["--config", cfg_file, "--out", out, "policy",
                     "--field", str(tmp_path / "o4" / "value_field")]) == 0

    def test_sweep(self, cfg_file, tmp_path):
        out = str(tmp_path / "o5")
        assert main(["--config", cfg_file, "--out", out, "sweep",
                     "--axis", "lambda", "--values", "0,1,2"]) == 0
        lines = (tmp_path / "o5" / "sweep_lambda.csv").read_text().splitlines()
        assert lines[0] == "lambda,value_at_start"
        assert len(lines) == 4
        # purely positive inflow cannot hurt the buyer: weak monotonicity
        vals = [float(l.split(",")[1]) for l in lines[1:]]
        assert all(b <= a + 1e-6 for a, b in zip(vals, vals[1:]))

    def test_cfl_violation_exits_nonzero(self, tmp_path, capsys):
        p = tmp_path / "cfl.toml"
        p.write_text("[grid]\nsubsteps = 1\nnt = 10\nnx = 30\nnk = 16\n")
        code = main(["--config", str(p), "solve"])
        assert code == 2
        assert "stability bound" in capsys.readouterr().err

    def test_bad_config_exits_nonzero(self, tmp_path, capsys):
        p = tmp_path / "bad.toml"
        p.write_text("[market]\nx_0 = 100.0\n")
        assert main(["--config", str(p), "solve"]) == 2
        assert "x_0" in capsys.readouterr().err

    def test_missing_config_exits_nonzero(self, tmp_path):
        assert main(["--config", str(tmp_path / "nope.toml"), "solve"]) == 2

    def test_byte_identical_reruns(self, cfg_file, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            main(["--config", cfg_file, "--out", str(out), "solve"])
            main(["--config", cfg_file, "--out", str(out), "simulate"])
            outs.append(out)
        for fname in ("value_field.npy", "value_field.json", "paths.csv",
                      "costs.json", "slice_t0_x0.csv"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_seed_flag_overrides(self, cfg_file, tmp_path):
        a, b = str(tmp_path / "s1"), str(tmp_path / "s2")
        main(["--config", cfg_file, "--out", a, "--seed", "1", "simulate"])
        main(["--config", cfg_file, "--out", b, "--seed", "2", "simulate"])
        assert (tmp_path / "s1" / "paths.csv").read_text() \
            != (tmp_path / "s2" / "paths.csv").read_text()


class TestVerifyCommand:
    def test_verify_passes_on_defaults(self, cfg_file, tmp_path):
        out = str(tmp_path / "ov")
        code = main(["--config", cfg_file, "--out", out, "verify"])
        assert code == 0
        report = json.loads((tmp_path / "ov" / "verify_report.json").read_text())
        assert all(c["status"] == "pass" for c in report)
