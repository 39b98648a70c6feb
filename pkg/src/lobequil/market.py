"""Market simulation and pathwise cost evaluation.

The fundamental price follows a diffusion (geometric by default) simulated
with Euler-Maruyama on a uniform time mesh.  Aggregate order flow is a
compound Poisson process; arrival times are snapped to the next mesh point
so that the ordering of strategy purchases versus flow jumps is unambiguous.
Purchase strategies are non-decreasing paths made of a piecewise-constant
buying rate plus discrete jumps; a jump recorded at mesh time ``t`` executes
immediately after ``t`` (left-continuous convention), and constructed
strategies never place a jump at a flow-jump mesh point.

Three pathwise cost functionals are provided:

* ``cost_J``  -- block jumps priced at the true block cost ``C``;
* ``cost_J0`` -- every purchase priced at the frontier ``U`` (the natural
  cost of a continuous strategy; coincides with ``cost_J`` when there are
  no jumps);
* ``cost_J1`` -- block jumps priced at the relaxed cost ``D <= C``.

``jump_truncate`` and ``jump_smooth`` convert a jumpy strategy into,
respectively, a finitely-jumpy and a fully continuous one; the realized
``cost_J0`` of the smoothed strategy converges to ``cost_J1`` of the
original as the ramp width shrinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import AdmissibilityError, DomainError, SimulationError
from .utility import UtilityModel

__all__ = [
    "JumpDistribution",
    "MarketParams",
    "PenaltyModel",
    "MarketPath",
    "Strategy",
    "simulate_path",
    "path_rng_seed",
    "replay",
    "evolve_inventory",
    "CostBreakdown",
    "cost_J",
    "cost_J0",
    "cost_J1",
    "jump_truncate",
    "jump_smooth",
    "strategy_none",
    "strategy_twap",
    "strategy_single_jump",
]

_Q_TOL = 1e-9


@dataclass(frozen=True)
class JumpDistribution:
    """Finite discrete distribution of order-flow jump sizes (in shares)."""

    sizes: tuple[float, ...] = (2.0, -2.0)
    probs: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self):
        if len(self.sizes) != len(self.probs) or not self.sizes:
            raise DomainError("jump sizes and probabilities must align and be non-empty")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-12:
            raise DomainError(f"jump probabilities must sum to 1, got {self.probs}")

    @property
    def mean_abs(self) -> float:
        return float(sum(p * abs(s) for s, p in zip(self.sizes, self.probs)))

    @property
    def max_positive(self) -> float:
        return float(max([s for s in self.sizes if s > 0], default=0.0))

    @property
    def max_abs(self) -> float:
        return float(max(abs(s) for s in self.sizes))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(len(self.sizes), size=n, p=np.asarray(self.probs))
        return np.asarray(self.sizes, dtype=float)[idx]


@dataclass(frozen=True)
class MarketParams:
    """Market environment: price dynamics, order flow, horizon and target.

    Drift and volatility default to the geometric forms ``b = mu_hat * x``
    and ``sigma = sigma_hat * x``; arbitrary ``(t, x)`` callables can be
    supplied instead (they must satisfy ``sigma(t, 0) = 0`` and
    ``b(t, 0) >= 0`` so the price stays positive).
    """

    x0: float = 100.0
    q0: float = 10.0
    T: float = 1.0
    K: float = 5.0
    lam: float = 2.0
    jumps: JumpDistribution = field(default_factory=JumpDistribution)
    mu_hat: float = 0.0
    sigma_hat: float = 0.2
    drift: Callable[[float, float], float] | None = None
    vol: Callable[[float, float], float] | None = None

    def __post_init__(self):
        if self.x0 <= 0 or self.q0 < 0 or self.T <= 0 or self.K <= 0:
            raise DomainError("need x0 > 0, q0 >= 0, T > 0, K > 0")
        if self.lam < 0:
            raise DomainError("jump intensity must be non-negative")
        for fn, name, zero_cond in ((self.drift, "drift", lambda v: v >= 0),
                                    (self.vol, "vol", lambda v: v == 0)):
            if fn is not None:
                for t in (0.0, self.T / 2, self.T):
                    if not zero_cond(float(fn(t, 0.0))):
                        raise DomainError(f"custom {name} violates the x=0 boundary condition")

    def b(self, t, x):
        if self.drift is not None:
            return self.drift(t, x)
        return self.mu_hat * x

    def sigma(self, t, x):
        if self.vol is not None:
            return self.vol(t, x)
        return self.sigma_hat * x


@dataclass(frozen=True)
class PenaltyModel:
    """Terminal penalty ``g(x, y) = U(x, 0) * y + eta * y**2`` for an unmet
    amount ``y``: buying the shortfall off-book costs at least the
    zero-liquidity price, plus a convex markup."""

    utility: UtilityModel
    eta: float = 0.5

    def __post_init__(self):
        if self.eta < 0:
            raise DomainError("penalty curvature must be non-negative")

    def g(self, x, y):
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        return self.utility.value(x, 0.0) * y + self.eta * y**2


@dataclass(frozen=True)
class MarketPath:
    """One realized market scenario on a uniform mesh.

    ``jump_idx``/``jump_sizes``: flow jumps snapped to mesh points, in
    arrival order (several may share an index).
    """

    times: np.ndarray
    x: np.ndarray
    jump_idx: np.ndarray
    jump_sizes: np.ndarray
    seed: object = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def jump_times(self) -> np.ndarray:
        return self.times[self.jump_idx]

    def jumps_by_index(self) -> dict[int, list[float]]:
        out: dict[int, list[float]] = {}
        for i, s in zip(self.jump_idx, self.jump_sizes):
            out.setdefault(int(i), []).append(float(s))
        return out


@dataclass(frozen=True)
class Strategy:
    """Non-decreasing purchase path on a mesh.

    ``rates[i]`` is the buying rate (shares per unit time, >= 0) on
    ``[times[i], times[i+1])``; ``jumps`` is a sorted list of
    ``(mesh time, size > 0)`` block purchases executing right after their
    time stamp (times strictly inside ``[0, T)`` and distinct).
    ``k0`` is the holding already in hand at time 0.
    """

    times: np.ndarray
    rates: np.ndarray
    jumps: tuple[tuple[float, float], ...] = ()
    k0: float = 0.0

    def __post_init__(self):
        if len(self.rates) != len(self.times) - 1:
            raise DomainError("need one rate per mesh cell")
        if np.any(np.asarray(self.rates) < -1e-15):
            raise DomainError("buying rates must be non-negative")
        ts = [t for t, _ in self.jumps]
        if ts != sorted(ts) or len(set(ts)) != len(ts):
            raise DomainError("jump times must be strictly increasing")
        T = float(self.times[-1])
        dt = float(self.times[1] - self.times[0]) if len(self.times) > 1 else T
        for t, d in self.jumps:
            if d <= 0:
                raise DomainError(f"jump sizes must be positive, got {d}")
            if not (0.0 <= t < T - 1e-12):
                raise DomainError(f"jump time {t} outside [0, T)")
            if abs(t / dt - round(t / dt)) > 1e-9:
                raise DomainError(f"jump time {t} is not a mesh point")

    def jump_at(self, i: int) -> float:
        t = float(self.times[i])
        return sum(d for tj, d in self.jumps if abs(tj - t) < 1e-12)

    def jumps_by_index(self) -> dict[int, float]:
        dt = self.times[1] - self.times[0]
        return {int(round(t / dt)): d for t, d in self.jumps}

    def holdings(self) -> np.ndarray:
        """Left-limit holdings ``pi_t`` at every mesh point (jump at ``t_i``
        and the rate on the following cell show up from ``t_{i+1}`` on)."""
        n = len(self.times) - 1
        dt = float(self.times[1] - self.times[0])
        jumps = self.jumps_by_index()
        pi = np.empty(n + 1)
        pi[0] = self.k0
        for i in range(n):
            pi[i + 1] = pi[i] + jumps.get(i, 0.0) + self.rates[i] * dt
        return pi

    @property
    def total(self) -> float:
        dt = float(self.times[1] - self.times[0])
        return float(self.k0 + sum(d for _, d in self.jumps)
                     + float(np.sum(self.rates)) * dt)

    @property
    def is_continuous(self) -> bool:
        return not self.jumps


def path_rng_seed(root_seed: int, index: int) -> np.random.SeedSequence:
    """Seed-splitting rule for path ensembles: path ``index`` draws from
    ``SeedSequence(root_seed, spawn_key=(index,))``."""
    return np.random.SeedSequence(root_seed, spawn_key=(index,))


def simulate_path(params: MarketParams, dt: float, seed) -> MarketPath:
    """Simulate the fundamental price and the order flow on a uniform mesh.

    Euler-Maruyama for the price (with a positivity floor at machine scale);
    Poisson arrivals from exponential inter-arrival times, each snapped to
    the next mesh point, sizes i.i.d. from the jump distribution.
    Deterministic given ``(params, dt, seed)``.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    n = int(round(params.T / dt))
    if abs(n * dt - params.T) > 1e-9 * params.T or n < 1:
        raise DomainError(f"dt={dt} does not divide the horizon T={params.T}")
    rng = np.random.default_rng(seed)

    times = np.linspace(0.0, params.T, n + 1)
    x = np.empty(n + 1)
    x[0] = params.x0
    z = rng.standard_normal(n)
    sq = math.sqrt(dt)
    floor = np.finfo(float).eps * params.x0
    for i in range(n):
        xi = x[i]
        x[i + 1] = xi + params.b(times[i], xi) * dt + params.sigma(times[i], xi) * sq * z[i]
        if not np.isfinite(x[i + 1]):
            raise SimulationError(f"non-finite price sample at step {i + 1}", step=i + 1)
        if x[i + 1] < floor:
            x[i + 1] = floor

    arrivals: list[float] = []
    if params.lam > 0:
        t = 0.0
        while True:
            t += rng.exponential(1.0 / params.lam)
            if t > params.T:
                break
            arrivals.append(t)
    idx = np.array([min(int(math.ceil(t / dt - 1e-12)), n) for t in arrivals], dtype=int)
    keep = idx >= 1
    idx = idx[keep]
    sizes = params.jumps.sample(rng, len(arrivals))[keep] if len(arrivals) else np.empty(0)
    return MarketPath(times=times, x=x, jump_idx=idx, jump_sizes=sizes, seed=seed)


@dataclass
class CostBreakdown:
    """Pathwise replay of a strategy against one market path."""

    q: np.ndarray            # book volume right after all events at each mesh point
    pi: np.ndarray           # left-limit holdings at each mesh point
    jump_cost_block: float   # sum of C(X, Q, jump)
    jump_cost_smooth: float  # sum of D(X, Q, jump)
    jump_cost_frontier: float  # sum of U(X, Q) * jump
    cont_cost: float         # integral of U dpi^c (left-point rule)
    terminal_holding: float
    capped: bool = False     # True if purchases were clipped to the book


def replay(path: MarketPath,
           strat: Strategy,
           q0: float,
           utility: UtilityModel | None = None,
           cap_to_book: bool = False) -> CostBreakdown:
    """Walk the mesh applying, at each point: flow jumps (book clamped at
    zero), then the strategy jump, then the buying rate over the next cell.

    Raises :class:`AdmissibilityError` at the first time purchases would
    drive the book negative, unless ``cap_to_book`` clips them instead.
    """
    if len(strat.times) != len(path.times) or abs(strat.times[-1] - path.times[-1]) > 1e-12:
        raise DomainError("strategy and path must share the same mesh")
    n = path.n_steps
    dt = path.dt
    flow = path.jumps_by_index()
    sjumps = strat.jumps_by_index()

    q = np.empty(n + 1)
    pi = np.empty(n + 1)
    jc = jd = jf = cc = 0.0
    cur_pi = strat.k0
    capped = False
    book = float(q0)
    for i in range(n + 1):
        xi = path.x[i]
        pi[i] = cur_pi
        for dy in flow.get(i, ()):  # flow first: the trader reacts afterwards
            book = max(book + dy, 0.0)
        if i < n:
            d = sjumps.get(i, 0.0)
            if d > 0.0:
                if d > book + _Q_TOL:
                    if cap_to_book:
                        d = max(book, 0.0)
                        capped = True
                    else:
                        raise AdmissibilityError(
                            f"jump of {d} exceeds book volume {book} at t={path.times[i]}",
                            time=float(path.times[i]))
                d = min(d, book)
                if utility is not None and d > 0.0:
                    jc += d * float(utility.value(xi, book - d))
                    jd += float(utility.integral_q(xi, book - d, book))
                    jf += d * float(utility.value(xi, book))
                book -= d
                cur_pi += d
            bought = strat.rates[i] * dt
            if bought > 0.0:
                if bought > book + _Q_TOL:
                    if cap_to_book:
                        bought = max(book, 0.0)
                        capped = True
                    else:
                        raise AdmissibilityError(
                            f"buying rate drains the book below zero in "
                            f"[{path.times[i]}, {path.times[i + 1]})",
                            time=float(path.times[i]))
                bought = min(bought, book)
                if utility is not None:
                    # exact in q: the book re-equilibrates during the fill,
                    # so the frontier integral over the cell is integral_q
                    cc += float(utility.integral_q(xi, book - bought, book))
                book -= bought
                cur_pi += bought
        q[i] = book
    return CostBreakdown(q=q, pi=pi, jump_cost_block=jc, jump_cost_smooth=jd,
                         jump_cost_frontier=jf, cont_cost=cc,
                         terminal_holding=cur_pi, capped=capped)


def evolve_inventory(path: MarketPath, strat: Strategy, q0: float) -> np.ndarray:
    """Book volume after all events at each mesh point; flags inadmissible
    strategies via :class:`AdmissibilityError`."""
    return replay(path, strat, q0).q


def _terminal_g(res: CostBreakdown, penalty: PenaltyModel, K: float, x_T: float) -> float:
    if res.terminal_holding > K + 1e-9:
        raise DomainError(f"terminal holding {res.terminal_holding} exceeds the target {K}")
    return float(penalty.g(x_T, K - min(res.terminal_holding, K)))


def cost_J(path, strat, utility, penalty, K, q0, cap_to_book=False) -> float:
    """Realized cost with block jumps priced at the true block cost."""
    r = replay(path, strat, q0, utility, cap_to_book)
    return r.jump_cost_block + r.cont_cost + _terminal_g(r, penalty, K, path.x[-1])


def cost_J0(path, strat, utility, penalty, K, q0, cap_to_book=False) -> float:
    """Realized cost pricing every purchase at the frontier."""
    r = replay(path, strat, q0, utility, cap_to_book)
    return r.jump_cost_frontier + r.cont_cost + _terminal_g(r, penalty, K, path.x[-1])


def cost_J1(path, strat, utility, penalty, K, q0, cap_to_book=False) -> float:
    """Realized cost with block jumps priced at the relaxed cost ``D``."""
    r = replay(path, strat, q0, utility, cap_to_book)
    return r.jump_cost_smooth + r.cont_cost + _terminal_g(r, penalty, K, path.x[-1])


def jump_truncate(strat: Strategy, m: int) -> Strategy:
    """Keep only the first ``m**2`` jumps of size at least ``1/m``; the
    continuous part is unchanged.  The result never exceeds the original."""
    if m < 1:
        raise DomainError("truncation level m must be >= 1")
    kept = tuple((t, d) for t, d in strat.jumps if d >= 1.0 / m)[: m * m]
    return replace(strat, jumps=kept)


def jump_smooth(strat: Strategy, delta: float, path: MarketPath) -> Strategy:
    """Replace each jump by a ramp of slope ``size/delta`` truncated at the
    next strategy jump, the next flow jump, or the horizon; truncated mass
    is dropped.  The result is continuous, never exceeds the original, and
    is admissible whenever the original is."""
    if delta <= 0:
        raise DomainError("ramp width delta must be positive")
    if not strat.jumps:
        return strat
    dt = path.dt
    T = float(path.times[-1])
    rates = np.array(strat.rates, dtype=float)
    flow_times = np.sort(np.unique(path.jump_times))
    jump_times = [t for t, _ in strat.jumps]
    for j, (tj, d) in enumerate(strat.jumps):
        end = min(tj + delta, T)
        nxt = [t for t in jump_times if t > tj + 1e-12]
        if nxt:
            end = min(end, nxt[0])
        after = flow_times[flow_times > tj + 1e-12]
        if len(after):
            end = min(end, float(after[0]))
        slope = d / delta
        i = int(round(tj / dt))
        while i < len(rates) and path.times[i] < end - 1e-15:
            covered = min(path.times[i + 1], end) - path.times[i]
            rates[i] += slope * covered / dt
            i += 1
    return replace(strat, rates=rates, jumps=())


def strategy_none(times: np.ndarray, k0: float = 0.0) -> Strategy:
    return Strategy(times=times, rates=np.zeros(len(times) - 1), k0=k0)


def strategy_twap(times: np.ndarray, K: float, k0: float = 0.0) -> Strategy:
    """Constant-rate schedule reaching the target at the horizon."""
    T = float(times[-1])
    return Strategy(times=times, rates=np.full(len(times) - 1, (K - k0) / T), k0=k0)


def strategy_single_jump(times: np.ndarray, t: float, size: float, k0: float = 0.0) -> Strategy:
    return Strategy(times=times, rates=np.zeros(len(times) - 1),
                    jumps=((t, size),), k0=k0)
