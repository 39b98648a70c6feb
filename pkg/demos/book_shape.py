"""Demo: the equilibrium book shape implied by an expected-return family.

Walks the closed forms for one snapshot — best ask, depth-price map, density
and execution costs — and contrasts the exponential family with the linear
(block-shaped) degenerate case.

Run:  python demos/book_shape.py
"""

import numpy as np

import lobequil as L


def main():
    utility = L.ExponentialUtility(a=1.0, gamma=0.1)
    snap = L.LobSnapshot(x=100.0, q=10.0, utility=utility)

    print("== exponential family, x=100, q=10, a=1, gamma=0.1 ==")
    print(f"fundamental price      : {snap.x:10.4f}")
    print(f"best ask U(x, q)       : {L.best_ask(snap):10.4f}")
    print(f"bid-ask spread         : {L.best_ask(snap) - snap.x:10.4f}")
    print()

    print("depth-price map and density (alpha = shares eaten from the frontier)")
    print(f"{'alpha':>6} {'p(alpha)':>10} {'mu':>8} {'C (block)':>10} "
          f"{'D (relaxed)':>11} {'liq. cost':>10}")
    for alpha in (0.0, 1.0, 2.5, 5.0, 7.5, 10.0):
        p = L.price_at_depth(snap, alpha)
        mu = L.density_at_depth(snap, alpha)
        c = L.execution_cost(snap, alpha)
        d = L.smoothed_cost(snap, alpha)
        lc = L.liquidity_cost(snap, alpha)
        print(f"{alpha:6.1f} {p:10.4f} {mu:8.3f} {c:10.3f} {d:11.3f} {lc:10.4f}")
    print()

    print("the map inverts: depth_at_price(p(alpha)) == alpha")
    for alpha in (2.0, 6.0):
        y = L.price_at_depth(snap, alpha)
        print(f"  p({alpha}) = {y:.6f}  ->  depth = "
              f"{L.depth_at_price(snap, y):.6f}")
    print()

    print("== linear family: the classical block-shaped book ==")
    lin = L.LobSnapshot(x=100.0, q=10.0, utility=L.LinearUtility(a=1.0, b=0.05))
    alphas = np.linspace(0.0, 10.0, 5)
    print("density is constant 1/(2b) =", 1 / 0.1)
    print("  mu(alpha) =", np.round(L.density_at_depth(lin, alphas), 10))


if __name__ == "__main__":
    main()
