"""Closed-form and numeric SP-vs-DP crossing-point SNRs.

Compares a single-stream SP link against a two-stream DP link. The Jensen-based
crossing has a rational closed form; the lower-bound-based crossing solves a
quadratic with a correction factor alpha = exp(w_DP - w_SP). A result without
a positive crossing means the DP setup is ahead at every positive SNR.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import math

import numpy as np

from .errors import CurveEvaluationError


@dataclass(frozen=True)
class CrossingResult:
    rho: float | None
    tangency: bool = False

    @property
    def always_dp(self) -> bool:
        return self.rho is None

    @property
    def rho_db(self) -> float:
        if self.rho is None or self.rho <= 0.0:
            raise ValueError("no positive crossing point")
        return 10.0 * math.log10(self.rho)


ALWAYS_DP = CrossingResult(rho=None)


@dataclass(frozen=True)
class CrossingSpec:
    """Eigenvalue data of the SP (1-stream) vs DP (2-stream) comparison.

    w_sp / w_dp are the lower-bound penalties in nats; they only enter the
    lower-bound crossing through alpha = exp(w_dp - w_sp).
    """

    lambda_sp1: float
    lambda_dp: tuple[float, float]
    lambda_q_dp: tuple[float, float]
    w_sp: float = 0.0
    w_dp: float = 0.0

    def __post_init__(self):
        if self.lambda_sp1 <= 0.0 or min(self.lambda_dp) <= 0.0:
            raise ValueError("transmit eigenvalues must be positive")
        q1, q2 = self.lambda_q_dp
        if q1 <= 0.0 or q2 <= 0.0 or abs(q1 + q2 - 1.0) > 1e-10:
            raise ValueError("DP stream powers must be positive and sum to 1")
        if self.w_sp < 0.0 or self.w_dp < 0.0:
            raise ValueError("penalties must be non-negative")

    @property
    def lambda_sum(self) -> float:
        (l1, l2), (q1, q2) = self.lambda_dp, self.lambda_q_dp
        return l1 * q1 + l2 * q2

    @property
    def lambda_prod(self) -> float:
        (l1, l2), (q1, q2) = self.lambda_dp, self.lambda_q_dp
        return l1 * q1 * l2 * q2

    @property
    def alpha(self) -> float:
        return math.exp(self.w_dp - self.w_sp)


def rho_cp_jensen(spec: CrossingSpec) -> CrossingResult:
    """Positive SNR where the SP and DP Jensen MI curves cross, if any."""
    if spec.lambda_sp1 <= spec.lambda_sum:
        return ALWAYS_DP
    return CrossingResult(rho=(spec.lambda_sp1 - spec.lambda_sum) / spec.lambda_prod)


def rho_cp_lower_bound(spec: CrossingSpec) -> CrossingResult:
    """Positive SNR where the two lower-bound MI curves cross, if any.

    Root of lambda_prod rho^2 + (lambda_sum - alpha lambda_sp1) rho + (1 - alpha) = 0;
    a vanishing discriminant is a tangency and is still reported as a crossing.
    """
    alpha = spec.alpha
    b = (spec.lambda_sp1 * alpha - spec.lambda_sum) / (2.0 * spec.lambda_prod)
    disc = b * b + (alpha - 1.0) / spec.lambda_prod
    if disc < 0.0:
        return ALWAYS_DP
    tangent = disc <= 1e-14 * max(b * b, 1.0)
    rho = b + math.sqrt(disc)
    if rho <= 0.0:
        return ALWAYS_DP
    return CrossingResult(rho=rho, tangency=bool(tangent))


def numeric_crossing(
    curve_a: Callable[[float], float],
    curve_b: Callable[[float], float],
    rho_grid: Sequence[float],
    rel_tol: float = 1e-9,
) -> list[float]:
    """All sign-change roots of curve_a - curve_b on an ascending SNR grid.

    Each bracketed sign change is bisected until the bracket width drops below
    rel_tol relative to the root location. Non-finite curve values abort with
    the offending SNR attached.
    """
    grid = [float(r) for r in rho_grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("rho grid must be ascending with at least two points")

    def f(rho: float) -> float:
        val = curve_a(rho) - curve_b(rho)
        if not np.isfinite(val):
            raise CurveEvaluationError("curve difference is not finite", rho=rho)
        return float(val)

    vals = [f(r) for r in grid]
    roots: list[float] = []
    # an exact zero at a grid point counts only if the curve changes sign
    # through it (identical curves must yield no crossings)
    for i, (r, v) in enumerate(zip(grid, vals)):
        if v != 0.0:
            continue
        before = next((x for x in reversed(vals[:i]) if x != 0.0), None)
        after = next((x for x in vals[i + 1:] if x != 0.0), None)
        if before is not None and after is not None and before * after < 0.0:
            roots.append(r)
    for (a, fa), (b, fb) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
        if fa * fb >= 0.0:
            continue
        lo, hi, flo = a, b, fa
        while hi - lo > rel_tol * max(abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            fmid = f(mid)
            if fmid == 0.0:
                lo = hi = mid
                break
            if flo * fmid < 0.0:
                hi = mid
            else:
                lo, flo = mid, fmid
        roots.append(0.5 * (lo + hi))
    roots.sort()
    return roots
