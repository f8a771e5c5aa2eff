"""Step-size caps, the non-convex convergence bound and the iteration-count
requirement for OLDSGD, as plain arithmetic on the problem constants.

Caps or terms with ``M`` in a denominator are treated as non-binding
(``+inf``) when ``M == 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "InvalidConstantsError",
    "PreconditionError",
    "TheoryConstants",
    "step_size_caps",
    "max_step_size",
    "theorem1_rhs",
    "corollary1_min_T",
]


class InvalidConstantsError(ValueError):
    pass


class PreconditionError(ValueError):
    """The step size is outside the range where the bound is guaranteed."""


@dataclass(frozen=True)
class TheoryConstants:
    L: float
    sigma2: float
    M: float
    zeta2: float
    P: float
    p: float
    tau: int
    n: int
    f0: float = 0.0
    fstar: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidConstantsError(f"L must be > 0, got {self.L}")
        if not 0 < self.p <= 1:
            raise InvalidConstantsError(f"p must be in (0, 1], got {self.p}")
        if self.tau < 1 or self.n < 1:
            raise InvalidConstantsError("tau and n must be >= 1")
        if min(self.sigma2, self.M, self.zeta2, self.P) < 0:
            raise InvalidConstantsError("variance and heterogeneity constants must be >= 0")

    @property
    def C(self) -> float:
        return 12 * (2 * self.tau + self.M) * self.n * (self.P + 1) / self.p

    @property
    def D(self) -> float:
        return 6 * ((2 * self.tau + self.M) * self.n * self.zeta2 + self.n * self.sigma2) / self.p


def step_size_caps(tc: TheoryConstants) -> tuple[float, float, float, float, float]:
    L, M, P, n, tau, p = tc.L, tc.M, tc.P, tc.n, tc.tau, tc.p
    inf = math.inf
    return (
        1 / L,
        n / (4 * L * M * (P + 1)) if M > 0 else inf,
        n / (L * M) if M > 0 else inf,
        p / (16 * L * math.sqrt(3 * tau * (2 * tau + M))),
        math.sqrt(p * n / (2 * tc.C * tau)) / (32 * L),
    )


def max_step_size(tc: TheoryConstants) -> float:
    return min(step_size_caps(tc))


def theorem1_rhs(tc: TheoryConstants, alpha: float, T: int, strict: bool = True) -> float:
    """Upper bound on ``(1/T) sum_t E||grad f(xbar^t)||^2``.

    With ``strict`` (the default) a step size above :func:`max_step_size`
    raises :class:`PreconditionError`; pass ``strict=False`` to evaluate the
    expression anyway.
    """
    if not alpha > 0 or T < 1:
        raise PreconditionError("need alpha > 0 and T >= 1")
    cap = max_step_size(tc)
    if strict and alpha > cap:
        raise PreconditionError(f"alpha={alpha:g} exceeds the admissible step size {cap:g}")
    L, n = tc.L, tc.n
    return (8 * (tc.f0 - tc.fstar) / (alpha * T)
            + 8 * alpha * L / n * (tc.sigma2 / 2 + tc.M * tc.zeta2)
            + 1024 * L**2 / n * tc.D * tc.tau / tc.p * alpha**2)


def corollary1_terms(tc: TheoryConstants) -> tuple[float, float, float, float, float]:
    L, M, P, n, tau, p = tc.L, tc.M, tc.P, tc.n, tc.tau, tc.p
    return (
        n * L**2,
        16 * L**2 * M**2 * (P + 1) ** 2 / n,
        L**2 * M**2 / n,
        768 * n * L**2 * tau * (2 * tau + M) / p**2,
        24576 * n * L**2 * tau * (2 * tau + M) * (P + 1) / p**2,
    )


def corollary1_min_T(tc: TheoryConstants) -> int:
    """Smallest ``T`` for which the ``alpha = sqrt(n / T)`` rate applies."""
    # tolerate float fuzz before taking the ceiling of an integral value
    m = max(corollary1_terms(tc))
    r = round(m)
    return int(r) if abs(m - r) <= 1e-9 * max(1.0, m) else math.ceil(m)
