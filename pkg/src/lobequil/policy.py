"""Optimal-policy extraction from a solved value field.

The trader's state moves along the diagonal ``(k + dy, q - dy)`` when
buying, so the policy at ``(t, x, q)`` is summarized by the inaction set

    O(t, x, q) = { y in [0, K ^ q] : M[v](t, x, y, q - y) > 0 },

the holdings at which one more marginal purchase has positive marginal
value-cost.  Outside ``O`` the trader jumps: the jump map

    phi(t, k, q) = inf{ y > k : y in O } ^ K ^ q     (phi = k for k in O)

sends the holding to the near edge of the next inaction interval (or to the
cap when none remains).  ``synthesize`` rolls this rule along a simulated
market path, re-applying ``phi`` at every mesh step -- which tracks a moving
inaction boundary without estimating its velocity -- and pausing at
order-flow arrival points so purchases never coincide with a flow jump.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .market import (MarketPath, Strategy, cost_J, cost_J0, cost_J1,
                     jump_smooth, simulate_path, path_rng_seed,
                     strategy_none, strategy_twap)
from .solver import ValueField

__all__ = [
    "Policy",
    "inaction_region",
    "jump_map",
    "synthesize",
    "rollout",
    "greedy_strategy",
]

_M_TOL_FACTOR = 1e-10


@dataclass
class Policy:
    """Inaction intervals and jump map bound to a solved value field.

    ``x`` fixes the price coordinate for the two-argument ``jump_map``
    signature ``phi(t, k, q)``; it defaults to the model's ``x0``.
    Extracted intervals are cached per grid node.
    """

    vfield: ValueField
    x: float | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def _x(self) -> float:
        return self.vfield.params.x0 if self.x is None else self.x

    @property
    def m_tol(self) -> float:
        return _M_TOL_FACTOR * self.vfield.scale * self.vfield.grid.T

    def _node_intervals(self, it: int, ix: int, iq: int) -> list[tuple[float, float]]:
        key = (it, ix, iq)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        g = self.vfield.grid
        dk = g.dk
        cap = min(g.K, g.qs[iq])
        jmax = min(g.nk - 1, iq - 1)  # need y < K and q - y > 0
        intervals: list[tuple[float, float]] = []
        if jmax >= 0 and iq > 0:
            v = self.vfield.v[it, ix]
            u = self.vfield.utility.value(g.xs[ix], g.qs[iq - np.arange(jmax + 1)])
            mvals = u + (v[np.arange(1, jmax + 2), iq - np.arange(1, jmax + 2)]
                         - v[np.arange(jmax + 1), iq - np.arange(jmax + 1)]) / dk
            pos = mvals > self.m_tol  # ties go to the trade region
            j = 0
            while j <= jmax:
                if pos[j]:
                    j0 = j
                    while j + 1 <= jmax and pos[j + 1]:
                        j += 1
                    lo = max(0.0, j0 * dk - dk / 2)
                    hi = min(cap, j * dk + dk / 2)
                    if hi > lo:
                        intervals.append((lo, hi))
                j += 1
        self._cache[key] = intervals
        return intervals

    def _snap(self, t: float, x: float, q: float) -> tuple[int, int, int]:
        g = self.vfield.grid
        it = int(round(np.clip(t / g.dt, 0, g.nt)))
        if not (g.x_min - 1e-9 <= x <= g.x_max + 1e-9):
            warnings.warn(f"price {x} outside solver grid [{g.x_min}, {g.x_max}]; "
                          "clamping", RuntimeWarning, stacklevel=3)
        ix = int(round(np.clip((x - g.x_min) / g.dx, 0, g.nx)))
        iq = int(round(np.clip(q / g.dq, 0, g.nq)))
        return it, ix, iq

    def inaction_region(self, t: float, x: float, q: float) -> list[tuple[float, float]]:
        """Ordered disjoint open intervals of holdings ``y`` in ``[0, K ^ q]``
        where the marginal purchase value ``M`` is positive (inaction)."""
        it, ix, iq = self._snap(t, x, q)
        return self._node_intervals(it, ix, iq)

    def jump_map(self, t: float, k: float, q: float, x: float | None = None) -> float:
        """Target holding ``phi(t, k, q)``: stay for ``k`` inside the
        inaction set, else the near edge of the next interval above ``k``,
        capped at ``K ^ q``."""
        g = self.vfield.grid
        if not (-1e-9 <= k <= g.K + 1e-9):
            raise DomainError(f"holding {k} outside [0, K={g.K}]")
        cap = min(g.K, q)
        if k >= cap - 1e-12:
            return float(k)
        intervals = self.inaction_region(t, self._x if x is None else x, q)
        for lo, hi in intervals:
            if lo - 1e-12 <= k < hi:
                return float(k)
        above = [lo for lo, _ in intervals if lo > k]
        phi = min(above) if above else cap
        return float(min(max(phi, k), cap))


def inaction_region(vfield: ValueField, t: float, x: float, q: float):
    """Functional form of :meth:`Policy.inaction_region`."""
    return Policy(vfield).inaction_region(t, x, q)


def jump_map(policy: Policy, t: float, k: float, q: float) -> float:
    """Functional form of :meth:`Policy.jump_map` (price taken from the
    policy binding)."""
    return policy.jump_map(t, k, q)


def synthesize(vfield: ValueField, path: MarketPath, q0: float | None = None,
               policy: Policy | None = None) -> Strategy:
    """Roll the jump map along one market path.

    At every mesh point without a flow arrival the holding is sent to
    ``phi``; points with an arrival are skipped so the strategy never jumps
    at a flow-jump time (the re-read book is acted on at the next point).
    All purchases are jumps (the continuous part is identically zero);
    boundary tracking emerges as a train of small per-step jumps.  Jump
    sizes are clamped to the available book, so the result is admissible.
    """
    if q0 is None:
        q0 = vfield.params.q0
    pol = policy if policy is not None else Policy(vfield)
    flow = path.jumps_by_index()
    n = path.n_steps
    book = float(q0)
    pi = 0.0
    jumps: list[tuple[float, float]] = []
    for i in range(n):
        for dy in flow.get(i, ()):
            book = max(book + dy, 0.0)
        if i in flow:
            continue  # act at the next mesh point instead
        phi = pol.jump_map(path.times[i], pi, book, x=path.x[i])
        d = min(phi - pi, book)
        if d > 1e-12:
            jumps.append((float(path.times[i]), d))
            pi += d
            book -= d
    return Strategy(times=path.times, rates=np.zeros(n), jumps=tuple(jumps), k0=0.0)


def greedy_strategy(path: MarketPath, K: float, q0: float) -> Strategy:
    """Buy as much as possible as early as possible (baseline)."""
    flow = path.jumps_by_index()
    book = float(q0)
    pi = 0.0
    jumps = []
    for i in range(path.n_steps):
        for dy in flow.get(i, ()):
            book = max(book + dy, 0.0)
        if i in flow:
            continue
        d = min(K - pi, book)
        if d > 1e-12:
            jumps.append((float(path.times[i]), d))
            pi += d
            book -= d
        if pi >= K - 1e-12:
            break
    return Strategy(times=path.times, rates=np.zeros(path.n_steps),
                    jumps=tuple(jumps), k0=0.0)


def rollout(vfield: ValueField, n_paths: int, seed: int, dt: float | None = None,
            smooth_delta: float = 0.05) -> dict:
    """Monte Carlo cost statistics for the synthesized strategy and baselines.

    Per path: the synthesized strategy scored under ``J1`` and ``J``, its
    ``jump_smooth`` approximation under ``J0``, and three baselines under
    ``J1`` -- TWAP (constant rate, clipped to the book), buy-all-at-terminal
    (pay the penalty on the full target), and greedy-immediate.  Returns
    mean/stderr per series plus the grid value at the initial state.
    """
    params = vfield.params
    utility, penalty = vfield.utility, vfield.penalty
    if dt is None:
        dt = params.T / 100
    pol = Policy(vfield)
    series: dict[str, list[float]] = {k: [] for k in
                                      ("policy_J1", "policy_J", "policy_smoothed_J0",
                                       "twap_J1", "terminal_J1", "greedy_J1")}
    args = (utility, penalty, params.K, params.q0)
    for ipath in range(n_paths):
        path = simulate_path(params, dt, path_rng_seed(seed, ipath))
        strat = synthesize(vfield, path, policy=pol)
        series["policy_J1"].append(cost_J1(path, strat, *args))
        series["policy_J"].append(cost_J(path, strat, *args))
        series["policy_smoothed_J0"].append(
            cost_J0(path, jump_smooth(strat, smooth_delta, path), *args))
        series["twap_J1"].append(
            cost_J1(path, strategy_twap(path.times, params.K), *args, cap_to_book=True))
        series["terminal_J1"].append(
            cost_J1(path, strategy_none(path.times), *args))
        series["greedy_J1"].append(
            cost_J1(path, greedy_strategy(path, params.K, params.q0), *args))
    out = {"n_paths": n_paths, "seed": seed, "dt": dt,
           "value_at_start": vfield.interp(0.0, params.x0, 0.0, params.q0)}
    for name, vals in series.items():
        a = np.asarray(vals)
        out[name] = {"mean": float(a.mean()),
                     "stderr": float(a.std(ddof=1) / np.sqrt(len(a))) if len(a) > 1 else 0.0}
    return out
