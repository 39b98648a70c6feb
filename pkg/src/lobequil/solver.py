"""Finite-difference solver for the optimal-execution quasi-variational
inequality ``min(L[V], M[V]) = 0``.

State is ``(t, x, k, q)``: time, fundamental price, shares already bought,
standing book volume.  ``L`` is the parabolic integro-differential generator
of the market (diffusion in ``x`` plus the compound-Poisson flow acting on
``q``); ``M[V] = U(x, q) + dV/dk - dV/dq`` is the marginal value of buying
one more share at the frontier, and the trader buys exactly where ``M`` hits
zero.

Scheme: explicit backward Euler in time with central/upwinded differences in
``x``, the flow integral as an exact finite sum (linear interpolation in
``q``, clamped to the grid), and after every substep an obstacle projection

    v(k, q) <- min(v(k, q), U(x, q) * dk + v(k + dk, q - dk))

swept along descending ``k``.  With ``dk = dq`` the buying direction is a
single grid diagonal, so one descending sweep reaches the projection fixed
point exactly.  Substeps are sized automatically from the positive-scheme
stability bound ``dt * (sigma^2/dx^2 + |b|/dx + lambda) <= c``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, SolverError
from .market import MarketParams, PenaltyModel
from .utility import UtilityModel, utility_from_dict

__all__ = [
    "Grid",
    "ValueField",
    "solve_qvi",
    "apply_L",
    "apply_M",
    "residual_field",
    "obstacle_field",
    "monotonicity_violations",
    "cfl_stable_dt",
]

CFL_SAFETY = 0.9


@dataclass(frozen=True)
class Grid:
    """Uniform 4-D grid over ``[0,T] x [x_min,x_max] x [0,K] x [0,q_max]``.

    ``dk = dq`` is enforced by construction: ``dq`` is set to ``K / nk`` and
    ``q_max`` is rounded up to the nearest multiple, so the buying direction
    ``(k+dk, q-dk)`` is a single grid diagonal.
    """

    T: float
    K: float
    x_min: float
    x_max: float
    q_max: float
    nt: int
    nx: int
    nk: int

    def __post_init__(self):
        if self.x_min <= 0 or self.x_max <= self.x_min:
            raise DomainError("need 0 < x_min < x_max")
        if min(self.nt, self.nx, self.nk) < 2:
            raise DomainError("need at least 2 cells per axis")
        if self.q_max < self.K:
            raise DomainError("q_max must cover at least the purchase target K")
        # round q_max up so that dq = dk divides it exactly
        nq = int(math.ceil(self.q_max / self.dk - 1e-9))
        object.__setattr__(self, "q_max", nq * self.dk)

    @classmethod
    def from_params(cls, params: MarketParams, nt: int = 20, nx: int = 30,
                    nk: int = 30, x_span: float = 4.0,
                    jump_headroom: float = 4.0) -> "Grid":
        """Default domain: ``x in [x0/x_span, x0*x_span]`` and
        ``q_max = q0 + jump_headroom * (largest positive flow jump)``."""
        q_max = max(params.q0 + jump_headroom * params.jumps.max_positive, params.K)
        return cls(T=params.T, K=params.K, x_min=params.x0 / x_span,
                   x_max=params.x0 * x_span, q_max=q_max, nt=nt, nx=nx, nk=nk)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dk(self) -> float:
        return self.K / self.nk

    @property
    def dq(self) -> float:
        return self.dk

    @property
    def nq(self) -> int:
        return int(round(self.q_max / self.dk))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx + 1)

    @property
    def ks(self) -> np.ndarray:
        return np.linspace(0.0, self.K, self.nk + 1)

    @property
    def qs(self) -> np.ndarray:
        return np.linspace(0.0, self.q_max, self.nq + 1)

    def to_dict(self) -> dict:
        return {"T": self.T, "K": self.K, "x_min": self.x_min, "x_max": self.x_max,
                "q_max": self.q_max, "nt": self.nt, "nx": self.nx, "nk": self.nk}


@dataclass
class ValueField:
    """Value function samples ``v[it, ix, ik, iq]`` plus the models that
    produced them and scheme metadata (substep counts, CFL ratio, residual
    tolerance)."""

    grid: Grid
    v: np.ndarray
    utility: UtilityModel
    penalty: PenaltyModel
    params: MarketParams
    meta: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        """Value scale used in tolerance expressions."""
        return float(np.max(self.v)) / self.grid.T

    @property
    def residual_tol(self) -> float:
        g = self.grid
        return (g.dt + g.dx + g.dq) * self.scale

    def interp(self, t: float, x: float, k: float, q: float,
               warn_out_of_range: bool = True) -> float:
        """Multilinear interpolation; coordinates outside the grid are
        clamped (with a warning by default)."""
        g = self.grid
        coords = []
        for val, lo, hi, n in ((t, 0.0, g.T, g.nt), (x, g.x_min, g.x_max, g.nx),
                               (k, 0.0, g.K, g.nk), (q, 0.0, g.q_max, g.nq)):
            if warn_out_of_range and not (lo - 1e-9 <= val <= hi + 1e-9):
                warnings.warn(f"coordinate {val} outside grid range [{lo}, {hi}]; "
                              "clamping", RuntimeWarning, stacklevel=2)
            z = (min(max(val, lo), hi) - lo) / (hi - lo) * n
            i = min(int(z), n - 1)
            coords.append((i, z - i))
        out = 0.0
        for bt in range(2):
            for bx in range(2):
                for bk in range(2):
                    for bq in range(2):
                        w = 1.0
                        idx = []
                        for (i, f), b in zip(coords, (bt, bx, bk, bq)):
                            w *= f if b else (1.0 - f)
                            idx.append(i + b)
                        if w:
                            out += w * self.v[tuple(idx)]
        return float(out)

    def save(self, stem: str) -> None:
        """Write ``<stem>.npy`` (row-major array, dims in the npy header)
        and ``<stem>.json`` (grid, models, metadata)."""
        if self.params.drift is not None or self.params.vol is not None:
            raise ConfigurationError("cannot serialize custom drift/vol callables")
        np.save(stem + ".npy", self.v)
        side = {
            "grid": self.grid.to_dict(),
            "utility": self.utility.to_dict(),
            "penalty": {"eta": self.penalty.eta},
            "params": {"x0": self.params.x0, "q0": self.params.q0,
                       "T": self.params.T, "K": self.params.K,
                       "lam": self.params.lam,
                       "mu_hat": self.params.mu_hat,
                       "sigma_hat": self.params.sigma_hat,
                       "jump_sizes": list(self.params.jumps.sizes),
                       "jump_probs": list(self.params.jumps.probs)},
            "meta": self.meta,
        }
        with open(stem + ".json", "w") as f:
            json.dump(side, f, indent=2)

    @classmethod
    def load(cls, stem: str) -> "ValueField":
        from .market import JumpDistribution  # local to avoid cycle noise
        v = np.load(stem + ".npy")
        with open(stem + ".json") as f:
            side = json.load(f)
        grid = Grid(**side["grid"])
        utility = utility_from_dict(side["utility"])
        p = side["params"]
        params = MarketParams(x0=p["x0"], q0=p["q0"], T=p["T"], K=p["K"],
                              lam=p["lam"], mu_hat=p["mu_hat"],
                              sigma_hat=p["sigma_hat"],
                              jumps=JumpDistribution(tuple(p["jump_sizes"]),
                                                     tuple(p["jump_probs"])))
        penalty = PenaltyModel(utility=utility, eta=side["penalty"]["eta"])
        return cls(grid=grid, v=v, utility=utility, penalty=penalty,
                   params=params, meta=side["meta"])

    def slice_csv(self, path: str, it: int, ix: int) -> None:
        """Dump the (k, q) table at fixed time/price indices as long-format
        CSV with columns ``k,q,value``."""
        g = self.grid
        with open(path, "w") as f:
            f.write("k,q,value\n")
            for ik, k in enumerate(g.ks):
                for iq, q in enumerate(g.qs):
                    f.write(f"{k:.10g},{q:.10g},{self.v[it, ix, ik, iq]:.12g}\n")


def _jump_interp_tables(grid: Grid, params: MarketParams):
    """Per jump size: (lower index, weight) arrays mapping each q node to the
    post-jump volume ``clip(q + u, 0, q_max)`` by linear interpolation."""
    qs = grid.qs
    tables = []
    for u, p in zip(params.jumps.sizes, params.jumps.probs):
        target = np.clip(qs + u, 0.0, grid.q_max)
        z = target / grid.dq
        lo = np.minimum(z.astype(int), grid.nq - 1)
        w = z - lo
        tables.append((p, lo, w))
    return tables


def _spatial_rate(v: np.ndarray, grid: Grid, params: MarketParams,
                  t: float, jump_tables) -> np.ndarray:
    """Spatial + integral part of ``L`` applied to one time slice
    ``v[ix, ik, iq]``; x-boundaries use one-sided differences."""
    xs = grid.xs
    dx = grid.dx
    b = np.array([params.b(t, x) for x in xs])
    sig = np.array([params.sigma(t, x) for x in xs])

    d1 = np.empty_like(v)
    d2 = np.empty_like(v)
    d2[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dx**2
    d2[0] = (v[0] - 2.0 * v[1] + v[2]) / dx**2
    d2[-1] = (v[-1] - 2.0 * v[-2] + v[-3]) / dx**2

    central = np.empty_like(v)
    central[1:-1] = (v[2:] - v[:-2]) / (2.0 * dx)
    central[0] = (v[1] - v[0]) / dx
    central[-1] = (v[-1] - v[-2]) / dx
    upwind = np.abs(b) * dx > sig**2
    d1[:] = central
    for ix in np.nonzero(upwind)[0]:
        if b[ix] > 0 and ix < len(xs) - 1:
            d1[ix] = (v[ix + 1] - v[ix]) / dx
        elif b[ix] < 0 and ix > 0:
            d1[ix] = (v[ix] - v[ix - 1]) / dx

    rate = (b[:, None, None] * d1
            + 0.5 * (sig**2)[:, None, None] * d2)
    if params.lam > 0:
        integ = np.zeros_like(v)
        for p, lo, w in jump_tables:
            shifted = (1.0 - w)[None, None, :] * v[:, :, lo] + w[None, None, :] * v[:, :, lo + 1]
            integ += p * (shifted - v)
        rate += params.lam * integ
    return rate


def _project_obstacle(v: np.ndarray, ugrid: np.ndarray, dk: float) -> None:
    """In-place diagonal projection ``v(k,q) <- min(v, U*dk + v(k+dk,q-dk))``
    swept k-descending; exact fixed point in one pass since each update reads
    only already-final higher-k values.  ``q = 0`` carries no obstacle."""
    nk = v.shape[1] - 1
    for ik in range(nk - 1, -1, -1):
        cand = ugrid[:, 1:] * dk + v[:, ik + 1, :-1]
        np.minimum(v[:, ik, 1:], cand, out=v[:, ik, 1:])


def cfl_stable_dt(grid: Grid, params: MarketParams,
                  safety: float = CFL_SAFETY) -> float:
    """Largest stable explicit substep for the positive-coefficient scheme:
    ``safety / max(sigma^2/dx^2 + |b|/dx + lambda)`` over the x grid."""
    xs = grid.xs
    worst = 0.0
    for t in (0.0, grid.T / 2, grid.T):
        s2 = np.array([params.sigma(t, x) for x in xs]) ** 2
        babs = np.abs([params.b(t, x) for x in xs])
        worst = max(worst, float(np.max(s2 / grid.dx**2 + babs / grid.dx + params.lam)))
    if worst == 0.0:
        return grid.dt
    return safety / worst


def solve_qvi(grid: Grid, utility: UtilityModel, penalty: PenaltyModel,
              params: MarketParams, n_sub: int | None = None) -> ValueField:
    """Backward sweep producing the value field.

    Per stored step: explicit Euler substeps for the ``L`` part, each
    followed by the obstacle projection; then boundary assignments
    ``v(:, K, :) = 0`` and ``v >= 0``.  ``n_sub`` overrides the automatic
    substep count; a choice violating the stability bound raises
    :class:`ConfigurationError` naming the bound.
    """
    dt_stable = cfl_stable_dt(grid, params)
    auto = max(1, int(math.ceil(grid.dt / dt_stable - 1e-12)))
    if n_sub is None:
        n_sub = auto
    elif grid.dt / n_sub > dt_stable * (1 + 1e-12):
        raise ConfigurationError(
            f"explicit substep {grid.dt / n_sub:.6g} violates the stability bound "
            f"dt <= {dt_stable:.6g} (need n_sub >= {auto})")
    dt_sub = grid.dt / n_sub

    xs, ks, qs = grid.xs, grid.ks, grid.qs
    ugrid = utility.value(xs[:, None], qs[None, :])  # (nx+1, nq+1)
    jump_tables = _jump_interp_tables(grid, params)

    v = np.empty((grid.nt + 1, grid.nx + 1, grid.nk + 1, grid.nq + 1))
    # terminal condition g(x, K - k), constant in q
    gterm = penalty.g(xs[:, None], (grid.K - ks)[None, :])  # (nx+1, nk+1)
    v[grid.nt] = gterm[:, :, None]

    times = grid.times
    for it in range(grid.nt - 1, -1, -1):
        cur = v[it + 1].copy()
        for s in range(n_sub):
            t = times[it + 1] - s * dt_sub
            cur = cur + dt_sub * _spatial_rate(cur, grid, params, t, jump_tables)
            if not np.all(np.isfinite(cur)):
                raise SolverError(f"non-finite values in backward sweep at slice {it}")
            cur[:, grid.nk, :] = 0.0
            _project_obstacle(cur, ugrid, grid.dk)
            np.maximum(cur, 0.0, out=cur)
        v[it] = cur

    field_ = ValueField(grid=grid, v=v, utility=utility, penalty=penalty,
                        params=params,
                        meta={"n_sub": n_sub, "dt_sub": dt_sub,
                              "dt_stable": dt_stable,
                              "cfl_ratio": dt_sub / dt_stable,
                              "scheme": "explicit Euler + diagonal obstacle projection"})
    field_.meta["residual_tol"] = field_.residual_tol
    return field_


def apply_L(field: ValueField, node: tuple[int, int, int, int]) -> float:
    """Discretized generator at a grid node ``(it, ix, ik, iq)``: forward
    time difference between stored slices plus the spatial/integral part
    evaluated on the later slice."""
    it, ix, ik, iq = node
    g = field.grid
    if it >= g.nt:
        raise DomainError("apply_L needs a node with a later time slice")
    jump_tables = _jump_interp_tables(g, field.params)
    rate = _spatial_rate(field.v[it + 1], g, field.params, g.times[it + 1], jump_tables)
    dt_term = (field.v[it + 1, ix, ik, iq] - field.v[it, ix, ik, iq]) / g.dt
    return float(dt_term + rate[ix, ik, iq])


def apply_M(field: ValueField, node: tuple[int, int, int, int]) -> float:
    """Obstacle value ``U(x, q) + [v(k+dk, q-dk) - v(k, q)] / dk`` at a grid
    node; requires ``k < K`` and ``q > 0``."""
    it, ix, ik, iq = node
    g = field.grid
    if ik >= g.nk or iq <= 0:
        raise DomainError("apply_M needs k < K and q > 0")
    u = float(field.utility.value(g.xs[ix], g.qs[iq]))
    return u + (field.v[it, ix, ik + 1, iq - 1] - field.v[it, ix, ik, iq]) / g.dk


def obstacle_field(field: ValueField, it: int) -> np.ndarray:
    """Vectorized ``M`` over one time slice; shape ``(nx+1, nk, nq)`` for
    ``ik in [0, nk)`` and ``iq in [1, nq]``."""
    g = field.grid
    u = field.utility.value(g.xs[:, None], g.qs[None, 1:])  # (nx+1, nq)
    v = field.v[it]
    return u[:, None, :] + (v[:, 1:, :-1] - v[:, :-1, 1:]) / g.dk


def residual_field(field: ValueField, it: int) -> np.ndarray:
    """Vectorized ``min(L, M)`` on interior nodes of slice ``it`` (interior
    in x; ``k < K``, ``q > 0``); shape ``(nx-1, nk, nq)``."""
    g = field.grid
    jump_tables = _jump_interp_tables(g, field.params)
    rate = _spatial_rate(field.v[it + 1], g, field.params, g.times[it + 1], jump_tables)
    L = (field.v[it + 1] - field.v[it]) / g.dt + rate
    M = obstacle_field(field, it)
    return np.minimum(L[1:-1, :-1, 1:], M[1:-1])


def monotonicity_violations(field: ValueField) -> dict:
    """Worst adjacent-node violation of each monotonicity invariant over the
    whole field (positive numbers are violations; 0 means clean)."""
    v = field.v
    return {
        "x_nondecreasing": float(max(0.0, np.max(-(v[:, 1:] - v[:, :-1])))),
        "k_nonincreasing": float(max(0.0, np.max(v[:, :, 1:] - v[:, :, :-1]))),
        "q_nonincreasing": float(max(0.0, np.max(v[:, :, :, 1:] - v[:, :, :, :-1]))),
        "nonnegative": float(max(0.0, -np.min(v))),
    }
