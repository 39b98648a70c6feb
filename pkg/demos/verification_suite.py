"""Demo: independent verification of the solver.

Runs the exact brute-force oracle on a small discrete instance and compares
it with the interpolated QVI value, then the full verification suite
(density identities, cost bounds, dynamic-programming residuals, the
approximation ladder, regularity scans).

Run:  python demos/verification_suite.py
"""

import lobequil as L
from lobequil.verify import oracle_probes


def main():
    utility = L.ExponentialUtility()
    params = L.MarketParams()
    penalty = L.PenaltyModel(utility=utility)
    grid = L.Grid.from_params(params, nt=20, nx=30, nk=30)
    field = L.solve_qvi(grid, utility, penalty, params)

    inst = L.MiniInstance(utility=utility, penalty=penalty)
    table = L.brute_force_value(inst)
    print("brute-force oracle vs interpolated QVI value at interior probes:")
    print(f"{'t':>6} {'x':>9} {'k':>5} {'q':>5} {'oracle':>10} {'qvi':>10} {'rel err':>9}")
    for p in oracle_probes(table, field):
        print(f"{p['t']:6.3f} {p['x']:9.3f} {p['k']:5.1f} {p['q']:5.1f} "
              f"{p['oracle']:10.4f} {p['qvi']:10.4f} {p['rel_err']:9.2e}")
    print()

    print("full verification suite:")
    for c in L.run_all(field, seed=2024, n_paths=500):
        tol = f" (tol {c['tolerance']:.3g})" if c["tolerance"] is not None else ""
        print(f"  [{c['status'].upper():4}] {c['check']:24} "
              f"statistic {c['statistic']:.4g}{tol}")


if __name__ == "__main__":
    main()
