import json

import numpy as np
import pytest

import lobequil as L
from lobequil.errors import ConfigurationError
from lobequil.verify import oracle_probes, report_to_json


@pytest.fixture(scope="module")
def mini(default_models):
    utility, params, penalty = default_models
    return L.MiniInstance(utility=utility, penalty=penalty)


class TestMiniInstance:
    def test_martingale_chain(self, mini):
        pu, pm, pd = mini.x_probs
        u = mini.x_ratio
        assert pu + pm + pd == pytest.approx(1.0)
        assert pu * u + pm + pd / u == pytest.approx(1.0, abs=1e-12)

    def test_size_bound(self, default_models):
        utility, _, penalty = default_models
        with pytest.raises(ConfigurationError):
            L.MiniInstance(utility=utility, penalty=penalty, n_steps=5)
        with pytest.raises(ConfigurationError):
            L.MiniInstance(utility=utility, penalty=penalty, unit=0.01)

    def test_lattice_check(self, default_models):
        utility, _, penalty = default_models
        with pytest.raises(ConfigurationError):
            L.MiniInstance(utility=utility, penalty=penalty, q0=10.3)


class TestBruteForce:
    def test_zero_target_zero_value(self, default_models):
        utility, _, penalty = default_models
        inst = L.MiniInstance(utility=utility, penalty=penalty, K=0.0,
                              max_levels=1)
        v = L.brute_force_value(inst)["v"]
        np.testing.assert_allclose(v[np.isfinite(v)], 0.0, atol=1e-12)

    def test_terminal_layer_is_penalty(self, mini, default_models):
        _, _, penalty = default_models
        table = L.brute_force_value(mini)
        v = table["v"]
        n = mini.n_steps
        ks = np.arange(int(mini.K / mini.unit) + 1) * mini.unit
        for jx, x in enumerate(table["xs"]):
            expect = penalty.g(x, mini.K - ks)
            np.testing.assert_allclose(v[n, jx, :, 0], expect, atol=1e-9)

    def test_one_step_frozen_hand_check(self, default_models):
        utility, _, penalty = default_models
        inst = L.MiniInstance(utility=utility, penalty=penalty, n_steps=1,
                              sigma_hat=1e-12, lam=0.0, K=2.0, q0=4.0,
                              q_max=8.0)
        table = L.brute_force_value(inst)
        iq0 = int(round(inst.q0 / inst.unit))
        got = table["v"][0, 1, 0, iq0]
        # direct minimization over the purchase lattice
        best = min(
            utility.integral_q(inst.x0, inst.q0 - a, inst.q0)
            + float(penalty.g(inst.x0, inst.K - a))
            for a in np.arange(0, inst.K + inst.unit / 2, inst.unit))
        assert got == pytest.approx(best, rel=1e-9)

    def test_value_decreases_in_k_and_q(self, mini):
        v = L.brute_force_value(mini)["v"]
        n = mini.n_steps
        interior = v[0, n]  # t = 0, central price state
        assert np.all(np.diff(interior, axis=0) <= 1e-9)   # k
        assert np.all(np.diff(interior, axis=1) <= 1e-9)   # q


class TestOracleEquivalence:
    def test_probes_close(self, mini, default_field):
        probes = oracle_probes(L.brute_force_value(mini), default_field)
        assert len(probes) >= 9
        assert max(p["rel_err"] for p in probes) <= 0.05


class TestDppResidual:
    def test_lower_bound_and_attainment(self, default_field):
        rep = L.dpp_residual(default_field, 0.0, 0.5, n_paths=200, seed=5)
        tol = default_field.residual_tol
        for name in ("flat", "twap", "policy"):
            assert rep[name]["mean"] >= rep["v_t1"] - tol - 3 * rep[name]["stderr"]
        gap = abs(rep["policy"]["mean"] - rep["v_t1"])
        assert gap <= tol + 3 * rep["policy"]["stderr"]

    def test_invalid_times(self, default_field):
        with pytest.raises(Exception):
            L.dpp_residual(default_field, 0.5, 0.2, 10, 0)


class TestLadder:
    def test_continuous_strategy_degenerate(self, default_models):
        utility, params, penalty = default_models
        times = np.linspace(0, 1, 101)
        strat = L.strategy_twap(times, params.K)
        lad = L.thm41_ladder(strat, params, utility, penalty, m_list=[2],
                             delta_list=[0.1], n_paths=30, seed=1)
        assert lad["J1_trunc_m2"]["gap_mean"] == pytest.approx(0.0, abs=1e-9)
        assert lad["J0_smooth_d0.1"]["gap_mean"] == pytest.approx(0.0, abs=1e-9)

    def test_two_jump_ladder_converges(self, default_models):
        utility, params, penalty = default_models
        times = np.linspace(0, 1, 101)
        strat = L.Strategy(times=times, rates=np.zeros(100),
                           jumps=((0.2, 2.5), (0.6, 2.5)))
        lad = L.thm41_ladder(strat, params, utility, penalty, m_list=[4],
                             delta_list=[0.1, 0.05, 0.025], n_paths=400,
                             seed=2024)
        gaps = [abs(lad[f"J0_smooth_d{d}"]["gap_mean"]) for d in (0.1, 0.05, 0.025)]
        bands = [3 * lad[f"J0_smooth_d{d}"]["step_stderr"] for d in (0.05, 0.025)]
        assert gaps[1] <= gaps[0] + bands[0]
        assert gaps[2] <= gaps[1] + bands[1]
        assert gaps[-1] <= 0.01 * lad["J1"]["mean"]


class TestRegularity:
    def test_clean_scan_at_defaults(self, default_field):
        rep = L.regularity_scan(default_field)
        assert max(rep["monotonicity"].values()) <= rep["mono_tol"]
        assert np.isfinite(rep["C_hat"])
        assert all(np.isfinite(v) for v in rep["lipschitz"].values())

    def test_temporal_constant_stable(self, default_models):
        utility, params, penalty = default_models
        chats = []
        for nt in (20, 40, 80):
            g = L.Grid.from_params(params, nt=nt, nx=30, nk=30)
            f = L.solve_qvi(g, utility, penalty, params)
            chats.append(L.regularity_scan(f)["C_hat"])
        mid = chats[1]
        assert all(abs(c - mid) <= 0.25 * mid for c in chats)


class TestRunAll:
    def test_all_pass_and_report(self, default_field, tmp_path):
        checks = L.run_all(default_field, seed=2024, n_paths=300)
        out = tmp_path / "report.json"
        ok = report_to_json(checks, str(out))
        loaded = json.loads(out.read_text())
        assert ok
        assert {c["check"] for c in loaded} >= {
            "density_normalization", "cost_identity", "relaxed_cost_bound",
            "oracle_equivalence", "dpp_lower_bound", "dpp_attainment",
            "thm41_ladder", "monotonicity"}
        assert all(c["status"] == "pass" for c in loaded)
