"""Demo: simulated market scenarios and pathwise strategy costs.

Simulates the fundamental price (geometric diffusion) with compound-Poisson
order flow, replays a few purchase strategies against the paths, and shows
the three cost functionals J (block cost), J0 (frontier cost) and J1
(relaxed cost), plus the jump-smoothing approximation.

Run:  python demos/market_simulation.py
"""

import numpy as np

import lobequil as L


def main():
    utility = L.ExponentialUtility()
    params = L.MarketParams()          # x0=100, q0=10, T=1, K=5, lam=2
    penalty = L.PenaltyModel(utility=utility)
    args = (utility, penalty, params.K, params.q0)

    path = L.simulate_path(params, dt=0.01, seed=L.path_rng_seed(0, 0))
    print(f"one path: X_T = {path.x[-1]:.4f}, "
          f"{len(path.jump_idx)} flow jump(s) at t = "
          f"{np.round(path.jump_times, 3)}")
    print()

    strategies = {
        "do nothing (pay penalty)": L.strategy_none(path.times),
        "TWAP rate K/T": L.strategy_twap(path.times, params.K),
        "single block at t=0.2": L.strategy_single_jump(path.times, 0.2, params.K),
    }
    print(f"{'strategy':28} {'J':>10} {'J0':>10} {'J1':>10}")
    for name, strat in strategies.items():
        j = L.cost_J(path, strat, *args, cap_to_book=True)
        j0 = L.cost_J0(path, strat, *args, cap_to_book=True)
        j1 = L.cost_J1(path, strat, *args, cap_to_book=True)
        print(f"{name:28} {j:10.4f} {j0:10.4f} {j1:10.4f}")
    print("(for a jumpy strategy J0 <= J1 <= J; for continuous ones all agree)")
    print()

    print("jump smoothing: replacing the block with a fast ramp converges to J1")
    block = L.strategy_single_jump(path.times, 0.2, params.K)
    j1 = L.cost_J1(path, block, *args, cap_to_book=True)
    for delta in (0.1, 0.05, 0.025):
        sm = L.jump_smooth(block, delta, path)
        j0s = L.cost_J0(path, sm, *args, cap_to_book=True)
        print(f"  delta = {delta:6.3f}: J0(smoothed) = {j0s:.4f}  "
              f"gap vs J1(block) = {j0s - j1:+.5f}")
    print()

    n = 500
    means = {}
    for name, build in (("TWAP", lambda p: L.strategy_twap(p.times, params.K)),
                        ("none", lambda p: L.strategy_none(p.times))):
        vals = [L.cost_J1(L.simulate_path(params, 0.01, L.path_rng_seed(1, i)),
                          build(L.simulate_path(params, 0.01, L.path_rng_seed(1, i))),
                          *args, cap_to_book=True) for i in range(n)]
        means[name] = (np.mean(vals), np.std(vals, ddof=1) / np.sqrt(n))
    print(f"Monte Carlo over {n} paths:")
    for name, (m, se) in means.items():
        print(f"  mean J1 [{name:4}] = {m:9.4f} +- {se:.4f}")


if __name__ == "__main__":
    main()
