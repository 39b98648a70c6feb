"""Expected-return families that generate the book shape endogenously.

Everything in the equilibrium book (best ask, density, execution costs) is
derived from a single function ``U(x, q)``: the common expected return a
patient seller demands when the fundamental price is ``x`` and the total
standing sell volume is ``q``.  A valid family must have ``U > 0`` for
``x > 0``, be non-decreasing in ``x``, strictly decreasing in ``q``, and
convex in ``q`` (the density formula divides by ``alpha*U_qq - 2*U_q``,
which must stay positive).

Two closed-form families are provided:

* exponential (default): ``U = x + a*exp(-gamma*q)`` -- satisfies every
  structural requirement strictly and has a closed antiderivative in ``q``,
  so quadrature-based costs are exact;
* linear: ``U = x + a - b*q`` on ``q in [0, a/b)`` -- sits on the convexity
  boundary (``U_qq = 0``) and reproduces the classical block-shaped book
  with constant density ``1/(2b)``; useful as an exact degenerate test case.

A custom family can be supplied as a ``(U, U_q, U_qq)`` triple of callables;
it is sanity-checked on a sample grid at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, ModelViolationError

__all__ = [
    "UtilityModel",
    "ExponentialUtility",
    "LinearUtility",
    "CustomUtility",
    "utility_from_dict",
]


class UtilityModel:
    """Interface shared by all expected-return families."""

    family: str = "abstract"

    def value(self, x, q):
        raise NotImplementedError

    def dq(self, x, q):
        raise NotImplementedError

    def dqq(self, x, q):
        raise NotImplementedError

    def q_upper(self) -> float:
        """Upper end of the valid volume domain (``inf`` if unrestricted)."""
        return np.inf

    def integral_q(self, x, q_lo, q_hi):
        """``Integral of U(x, s) ds`` over ``[q_lo, q_hi]``.

        Falls back to adaptive quadrature; closed-form families override.
        """
        val, _ = quad(lambda s: float(self.value(x, s)), q_lo, q_hi,
                      epsabs=1e-12, epsrel=1e-12)
        return val

    def check_q(self, q) -> None:
        qa = np.asarray(q, dtype=float)
        if np.any(qa < 0.0) or np.any(qa >= self.q_upper() + 1e-12):
            raise DomainError(
                f"volume {q!r} outside the valid domain [0, {self.q_upper()}) "
                f"of the {self.family} family")

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialUtility(UtilityModel):
    """``U(x, q) = x + a * exp(-gamma * q)``.

    ``a`` is the zero-liquidity premium over the fundamental price; ``gamma``
    controls how fast the premium decays with standing volume.  The premium
    vanishes as ``q -> inf``, so a deep book trades at the fundamental price.
    """

    a: float = 1.0
    gamma: float = 0.1
    family: str = field(default="exponential", init=False)

    def __post_init__(self):
        if self.a <= 0 or self.gamma <= 0:
            raise ModelViolationError(
                f"exponential family needs a > 0 and gamma > 0, "
                f"got a={self.a}, gamma={self.gamma}")

    def value(self, x, q):
        return np.asarray(x, dtype=float) + self.a * np.exp(-self.gamma * np.asarray(q, dtype=float))

    def dq(self, x, q):
        return -self.a * self.gamma * np.exp(-self.gamma * np.asarray(q, dtype=float)) + 0.0 * np.asarray(x, dtype=float)

    def dqq(self, x, q):
        return self.a * self.gamma**2 * np.exp(-self.gamma * np.asarray(q, dtype=float)) + 0.0 * np.asarray(x, dtype=float)

    def integral_q(self, x, q_lo, q_hi):
        # antiderivative: x*s - (a/gamma) * exp(-gamma*s)
        g = self.gamma
        return (x * (q_hi - q_lo)
                - (self.a / g) * (np.exp(-g * q_hi) - np.exp(-g * q_lo)))

    def to_dict(self) -> dict:
        return {"family": "exponential", "a": self.a, "gamma": self.gamma}


@dataclass(frozen=True)
class LinearUtility(UtilityModel):
    """``U(x, q) = x + a - b*q`` on ``q in [0, a/b)``.

    Boundary case of the convexity requirement (``U_qq = 0``); the implied
    book is block-shaped with constant density ``1/(2b)``.
    """

    a: float = 1.0
    b: float = 0.05
    family: str = field(default="linear", init=False)

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ModelViolationError(
                f"linear family needs a > 0 and b > 0, got a={self.a}, b={self.b}")

    def q_upper(self) -> float:
        return self.a / self.b

    def value(self, x, q):
        return np.asarray(x, dtype=float) + self.a - self.b * np.asarray(q, dtype=float)

    def dq(self, x, q):
        return np.broadcast_arrays(np.asarray(x, dtype=float),
                                   np.full_like(np.asarray(q, dtype=float), -self.b))[1]

    def dqq(self, x, q):
        return np.zeros_like(np.asarray(q, dtype=float) + 0.0 * np.asarray(x, dtype=float))

    def integral_q(self, x, q_lo, q_hi):
        return ((x + self.a) * (q_hi - q_lo)
                - 0.5 * self.b * (q_hi**2 - q_lo**2))

    def to_dict(self) -> dict:
        return {"family": "linear", "a": self.a, "b": self.b}


class CustomUtility(UtilityModel):
    """User-supplied ``(U, U_q, U_qq)`` triple.

    The triple is validated on a sample grid at construction: ``U > 0``,
    ``U_q < 0``, ``U_qq >= 0`` and a positive density denominator
    ``alpha*U_qq - 2*U_q``.  Violations raise :class:`ModelViolationError`
    rather than producing negative densities downstream.
    """

    family = "custom"

    def __init__(self,
                 u: Callable,
                 u_q: Callable,
                 u_qq: Callable,
                 x_samples=(1.0, 50.0, 100.0, 500.0),
                 q_samples=(0.0, 0.5, 1.0, 5.0, 10.0, 50.0)):
        self._u, self._u_q, self._u_qq = u, u_q, u_qq
        self._validate(x_samples, q_samples)

    def _validate(self, x_samples, q_samples):
        for x in x_samples:
            for q in q_samples:
                u = float(self._u(x, q))
                uq = float(self._u_q(x, q))
                uqq = float(self._u_qq(x, q))
                if not np.isfinite([u, uq, uqq]).all():
                    raise ModelViolationError(
                        f"custom utility non-finite at (x={x}, q={q})")
                if u <= 0:
                    raise ModelViolationError(
                        f"custom utility not positive at (x={x}, q={q}): U={u}")
                if uq >= 0:
                    raise ModelViolationError(
                        f"custom utility must be strictly decreasing in q; "
                        f"U_q={uq} at (x={x}, q={q})")
                if uqq < 0:
                    raise ModelViolationError(
                        f"custom utility must be convex in q; "
                        f"U_qq={uqq} at (x={x}, q={q})")

    def value(self, x, q):
        return np.asarray(self._u(x, q), dtype=float)

    def dq(self, x, q):
        return np.asarray(self._u_q(x, q), dtype=float)

    def dqq(self, x, q):
        return np.asarray(self._u_qq(x, q), dtype=float)

    def to_dict(self) -> dict:
        raise ModelViolationError("custom utility families are not serializable")


def utility_from_dict(spec: dict) -> UtilityModel:
    """Build a utility model from a config mapping (see the ``[utility]``
    section of the run configuration)."""
    spec = dict(spec)
    family = spec.pop("family", "exponential")
    if family == "exponential":
        model = ExponentialUtility(a=spec.pop("a", 1.0), gamma=spec.pop("gamma", 0.1))
    elif family == "linear":
        model = LinearUtility(a=spec.pop("a", 1.0), b=spec.pop("b", 0.05))
    else:
        raise ModelViolationError(f"unknown utility family {family!r}")
    if spec:
        raise ModelViolationError(f"unknown utility keys: {sorted(spec)}")
    return model
