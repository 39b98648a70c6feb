"""Equilibrium book geometry: depth-price map, density, and execution costs.

Given a fundamental price ``x``, a standing sell volume ``q`` and an
expected-return model ``U``, the book re-equilibrates instantly so that the
price reached after eating ``alpha`` shares and the density of resting
orders are both closed forms:

    p(alpha)      = U(x, q - alpha) - alpha * U_q(x, q - alpha)
    mu(p(alpha))  = 1 / p'(alpha) = 1 / (alpha * U_qq - 2 * U_q)

with the best ask ``p(0) = U(x, q)``.  The cost of a block of ``alpha``
shares collapses to ``C = alpha * U(x, q - alpha)``, and the size-averaged
price ``C / alpha = U(x, q - alpha)`` is a proper supply curve (increasing
and convex in the trade size).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, ModelViolationError
from .utility import UtilityModel

__all__ = [
    "LobSnapshot",
    "best_ask",
    "price_at_depth",
    "density_at_depth",
    "depth_at_price",
    "execution_cost",
    "smoothed_cost",
    "liquidity_cost",
    "supply_curve",
]


@dataclass(frozen=True)
class LobSnapshot:
    """Instantaneous state of the sell-side book.

    ``x``: fundamental price (> 0); ``q``: total standing volume (>= 0);
    ``utility``: the expected-return model generating the shape.
    """

    x: float
    q: float
    utility: UtilityModel

    def __post_init__(self):
        if not (self.x > 0):
            raise DomainError(f"fundamental price must be positive, got {self.x}")
        if not (self.q >= 0):
            raise DomainError(f"book volume must be non-negative, got {self.q}")
        self.utility.check_q(self.q)


def _check_alpha(snap: LobSnapshot, alpha, allow_zero: bool = True) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    lo_ok = a > 0 if not allow_zero else a >= 0
    if not np.all(lo_ok & (a <= snap.q + 1e-12)):
        raise DomainError(
            f"trade size {alpha!r} outside "
            f"{'[0' if allow_zero else '(0'}, q={snap.q}]")
    return np.minimum(a, snap.q)


def best_ask(snap: LobSnapshot) -> float:
    """Lowest ask price of the book; equals ``U(x, q)``."""
    return float(snap.utility.value(snap.x, snap.q))


def price_at_depth(snap: LobSnapshot, alpha):
    """Price at which cumulative volume from the frontier equals ``alpha``.

    Strictly increasing in ``alpha``; ``price_at_depth(snap, 0)`` is the
    best ask.
    """
    a = _check_alpha(snap, alpha)
    u = snap.utility
    rem = snap.q - a
    p = u.value(snap.x, rem) - a * u.dq(snap.x, rem)
    return float(p) if np.isscalar(alpha) else p


def density_at_depth(snap: LobSnapshot, alpha):
    """Book density (shares per price unit) at depth ``alpha``.

    Equals ``1 / p'(alpha)``; always positive for a valid model.
    """
    a = _check_alpha(snap, alpha)
    u = snap.utility
    rem = snap.q - a
    denom = a * u.dqq(snap.x, rem) - 2.0 * u.dq(snap.x, rem)
    if np.any(np.asarray(denom) <= 0):
        raise ModelViolationError(
            "non-positive density denominator: the utility model violates "
            "the decreasing/convex requirements at this point")
    mu = 1.0 / denom
    return float(mu) if np.isscalar(alpha) else mu


def depth_at_price(snap: LobSnapshot, y: float) -> float:
    """Inverse of the depth-price map: the ``alpha`` with ``p(alpha) = y``.

    Bracketed root-find to 1e-10 in ``alpha``; monotonicity of ``p``
    guarantees the bracket.
    """
    lo = price_at_depth(snap, 0.0)
    hi = price_at_depth(snap, snap.q)
    if not (lo - 1e-9 <= y <= hi + 1e-9):
        raise DomainError(
            f"price {y} outside the book range [{lo}, {hi}]")
    y = min(max(y, lo), hi)
    if snap.q == 0.0:
        return 0.0
    f = lambda a: price_at_depth(snap, a) - y
    return float(brentq(f, 0.0, snap.q, xtol=1e-10))


def execution_cost(snap: LobSnapshot, alpha):
    """Cost of a market buy of ``alpha`` shares: ``alpha * U(x, q - alpha)``."""
    a = _check_alpha(snap, alpha)
    c = a * snap.utility.value(snap.x, snap.q - a)
    return float(c) if np.isscalar(alpha) else c


def smoothed_cost(snap: LobSnapshot, alpha):
    """Relaxed block cost ``integral_0^alpha U(x, q - u) du``.

    Lower-bounds the true block cost (equality only at ``alpha = 0``): it is
    what a block would cost if the book re-equilibrated continuously during
    the fill, and is attainable in the limit by fast continuous buying.
    """
    a = _check_alpha(snap, alpha)
    u = snap.utility
    if np.isscalar(alpha):
        return float(u.integral_q(snap.x, snap.q - a, snap.q))
    return np.array([u.integral_q(snap.x, snap.q - ai, snap.q) for ai in np.atleast_1d(a)])


def liquidity_cost(snap: LobSnapshot, alpha):
    """Execution cost in excess of the fundamental: ``C(x, q, alpha) - alpha*x``.

    Non-negative; its slope at ``alpha = 0+`` is the bid-ask spread
    ``p(0) - x``, the rest is the shape (higher-order) part.
    """
    a = _check_alpha(snap, alpha)
    c = a * (snap.utility.value(snap.x, snap.q - a) - snap.x)
    return float(c) if np.isscalar(alpha) else c


def supply_curve(snap: LobSnapshot, alpha):
    """Size-averaged execution price ``C / alpha = U(x, q - alpha)``.

    Undefined at ``alpha = 0`` (use :func:`best_ask` for the limit).
    """
    a = _check_alpha(snap, alpha, allow_zero=False)
    s = snap.utility.value(snap.x, snap.q - a)
    return float(s) if np.isscalar(alpha) else s
