"""Acceptance suite: one test per criterion, named by number so the verbose
pytest report reads as one pass/fail line per criterion.  Each test also
prints its statistic and tolerance."""

import numpy as np
import pytest
from scipy.integrate import quad

import lobequil as L
from lobequil.verify import oracle_probes


def _line(n, desc, stat, tol):
    print(f"criterion {n:2d} [{desc}]: statistic={stat:.3e} tolerance={tol:.3e}")


def _dp_dalpha(snap, a):
    u = snap.utility
    rem = snap.q - a
    return float(a * u.dqq(snap.x, rem) - 2.0 * u.dq(snap.x, rem))


class TestAcceptance:

    def test_criterion_01_density_normalization(self, rng):
        """Integral of the density over [p(0), p(alpha)] recovers alpha."""
        worst = 0.0
        for _ in range(100):
            u = L.ExponentialUtility(a=float(rng.uniform(0.5, 3.0)),
                                     gamma=float(rng.uniform(0.05, 0.5)))
            snap = L.LobSnapshot(float(rng.uniform(20, 300)),
                                 float(rng.uniform(0.5, 25)), u)
            alpha = float(rng.uniform(0.05, 1.0) * snap.q)
            # substitution y = p(a): dy = p'(a) da
            val, _ = quad(lambda a: L.density_at_depth(snap, a)
                          * _dp_dalpha(snap, a), 0.0, alpha,
                          epsabs=1e-13, epsrel=1e-13)
            worst = max(worst, abs(val - alpha) / alpha)
        _line(1, "density normalization", worst, 1e-8)
        assert worst <= 1e-8

    def test_criterion_02_cost_identity(self):
        """Integral of y*mu(y) over the eaten band equals the block cost."""
        u = L.ExponentialUtility()
        worst = 0.0
        for q in np.linspace(1.0, 20.0, 20):
            snap = L.LobSnapshot(100.0, float(q), u)
            for frac in np.linspace(0.05, 1.0, 20):
                alpha = float(frac * q)
                val, _ = quad(lambda a: L.price_at_depth(snap, a)
                              * L.density_at_depth(snap, a)
                              * _dp_dalpha(snap, a), 0.0, alpha,
                              epsabs=1e-13, epsrel=1e-13)
                c = L.execution_cost(snap, alpha)
                worst = max(worst, abs(val - c) / c)
        _line(2, "equilibrium cost identity", worst, 1e-8)
        assert worst <= 1e-8

    def test_criterion_03_block_shape_degeneracy(self, rng):
        u = L.LinearUtility(a=1.0, b=0.05)
        worst = 0.0
        for _ in range(100):
            snap = L.LobSnapshot(float(rng.uniform(20, 300)),
                                 float(rng.uniform(0.1, 19.0)), u)
            alpha = float(rng.uniform(0.0, 1.0) * snap.q)
            worst = max(worst, abs(L.density_at_depth(snap, alpha) - 10.0))
        _line(3, "block-shape degeneracy", worst, 1e-12)
        assert worst <= 1e-12

    def test_criterion_04_relaxed_cost_bound(self, rng):
        u = L.ExponentialUtility()
        worst = -np.inf
        for _ in range(1000):
            snap = L.LobSnapshot(float(rng.uniform(20, 300)),
                                 float(rng.uniform(0.5, 25)), u)
            alpha = float(rng.uniform(0.01, 1.0) * snap.q)
            d, c = L.smoothed_cost(snap, alpha), L.execution_cost(snap, alpha)
            worst = max(worst, d - c)
            assert d < c  # strict for alpha > 0
        snap = L.LobSnapshot(100.0, 10.0, u)
        assert L.smoothed_cost(snap, 0.0) == L.execution_cost(snap, 0.0) == 0.0
        _line(4, "D <= C, equality iff alpha=0", worst, 0.0)
        assert worst <= 0.0

    def test_criterion_05_thm41_ladder(self, default_models):
        utility, params, penalty = default_models
        times = np.linspace(0, params.T, 101)
        strat = L.Strategy(times=times, rates=np.zeros(100),
                           jumps=((0.2, params.K / 2), (0.6, params.K / 2)))
        lad = L.thm41_ladder(strat, params, utility, penalty, m_list=[4],
                             delta_list=[0.1, 0.05, 0.025], n_paths=1000,
                             seed=2024)
        gaps = [abs(lad[f"J0_smooth_d{d}"]["gap_mean"])
                for d in (0.1, 0.05, 0.025)]
        bands = [3 * lad[f"J0_smooth_d{d}"]["step_stderr"]
                 for d in (0.05, 0.025)]
        _line(5, "Thm-4.1 ladder final gap", gaps[-1],
              0.01 * lad["J1"]["mean"])
        assert gaps[1] <= gaps[0] + bands[0]
        assert gaps[2] <= gaps[1] + bands[1]
        assert gaps[-1] <= 0.01 * lad["J1"]["mean"]

    def test_criterion_06_qvi_residual(self, default_field):
        g = default_field.grid
        assert (g.nt, g.nx, g.nk) == (20, 30, 30)
        tol = default_field.residual_tol
        worst_res = 0.0
        worst_m = 0.0
        for it in range(g.nt):
            r = L.residual_field(default_field, it)
            worst_res = max(worst_res, float(np.max(np.abs(r))))
            m = L.obstacle_field(default_field, it)
            worst_m = max(worst_m, float(max(0.0, -np.min(m))))
        _line(6, "QVI residual", worst_res, tol)
        assert worst_res <= tol
        assert worst_m <= tol

    def test_criterion_07_monotonicity(self, default_field):
        viol = L.monotonicity_violations(default_field)
        worst = max(viol.values())
        tol = 1e-8 * default_field.scale * default_field.grid.T
        _line(7, "monotonicity of V", worst, tol)
        assert worst <= tol

    def test_criterion_08_oracle_equivalence(self, default_models, default_field):
        utility, params, penalty = default_models
        inst = L.MiniInstance(utility=utility, penalty=penalty, x0=params.x0,
                              q0=params.q0, K=params.K, T=params.T,
                              sigma_hat=params.sigma_hat, lam=params.lam)
        probes = oracle_probes(L.brute_force_value(inst), default_field)
        worst = max(p["rel_err"] for p in probes)
        _line(8, f"oracle equivalence ({len(probes)} probes)", worst, 0.05)
        assert len(probes) >= 9
        assert worst <= 0.05

    def test_criterion_09_dpp_residual(self, default_field):
        rep = L.dpp_residual(default_field, 0.0, 0.5, n_paths=1000, seed=2024)
        tol = default_field.residual_tol
        worst_lower = min(rep[n]["mean"] - rep["v_t1"] + 3 * rep[n]["stderr"]
                          for n in ("flat", "twap", "policy"))
        gap = abs(rep["policy"]["mean"] - rep["v_t1"])
        _line(9, "DPP residual (policy attainment)", gap,
              tol + 3 * rep["policy"]["stderr"])
        assert worst_lower >= -tol
        assert gap <= tol + 3 * rep["policy"]["stderr"]

    def test_criterion_10_verification_rollout(self, default_field):
        stats = L.rollout(default_field, 1000, 2024)
        v0 = stats["value_at_start"]
        tol = default_field.residual_tol
        mean = stats["policy_J1"]["mean"]
        se = stats["policy_J1"]["stderr"]
        _line(10, "verification rollout |J1 - V(0)|", abs(mean - v0),
              tol + 3 * se)
        assert v0 - tol <= mean <= v0 + tol + 3 * se
        for base in ("twap_J1", "terminal_J1"):
            b = stats[base]
            assert mean <= b["mean"] + 2 * b["stderr"]

    def test_criterion_11_temporal_regularity(self, default_models):
        utility, params, penalty = default_models
        chats = []
        for nt in (20, 40, 80):
            g = L.Grid.from_params(params, nt=nt, nx=30, nk=30)
            f = L.solve_qvi(g, utility, penalty, params)
            chats.append(L.regularity_scan(f)["C_hat"])
        mid = chats[1]
        spread = max(abs(c - mid) / mid for c in chats)
        _line(11, "temporal regularity constant stability", spread, 0.25)
        assert spread <= 0.25
