"""Special functions backing the hitting-time and overcrowding bounds.

Complete elliptic integrals are evaluated with the arithmetic-geometric mean
(quadratic convergence, no dependence on any quadrature routine, which the
tests use as an independent oracle).  Negative parameters are first mapped
into [0, 1) with the imaginary-modulus transformation, which keeps every
intermediate quantity positive and cancellation-free even at m = -1e6.

All functions are total over their declared domains and raise
:class:`DomainError` elsewhere; they never return non-finite values.  Inputs
within 1e-15 of a domain boundary that belongs to the domain are clamped to
that boundary.
"""

from __future__ import annotations

import math

from scipy.optimize import brentq

__all__ = [
    "DomainError",
    "elliptic_k",
    "elliptic_e",
    "k_inverse",
    "lambert_w_lower",
    "normal_cdf",
    "brownian_sup_lower_bound",
]

_BOUNDARY_TOL = 1e-15
_INV_E = math.exp(-1.0)


class DomainError(ValueError):
    """Input outside a function's declared domain.

    Attributes:
        fn: name of the rejecting function.
        value: the offending input.
    """

    def __init__(self, fn: str, value: float, constraint: str):
        self.fn = fn
        self.value = value
        super().__init__(f"{fn}: argument {value!r} outside domain ({constraint})")


def _agm_pair(m: float, one_minus_m: float) -> tuple[float, float]:
    """K(m), E(m) for m in [0, 1) by the AGM with the c-series for E.

    The complement 1 - m is passed explicitly so callers can supply it in
    exact form when m itself would cancel (transformed negative parameters).
    """
    if m == 0.0:
        return math.pi / 2.0, math.pi / 2.0
    a = 1.0
    b = math.sqrt(one_minus_m)
    csum = 0.5 * m  # 2^{n-1} c_n^2 at n = 0 with c_0^2 = m
    pow2 = 1.0
    for _ in range(64):
        c = 0.5 * (a - b)
        csum += pow2 * c * c
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        pow2 *= 2.0
        if abs(a - b) <= 1e-17 * a:
            break
    k = math.pi / (2.0 * a)
    return k, k * (1.0 - csum)


def _elliptic_pair(m: float, fn: str) -> tuple[float, float]:
    if not math.isfinite(m) or m >= 1.0:
        raise DomainError(fn, m, "m < 1")
    if m < 0.0:
        # imaginary-modulus transformation onto [0, 1); the transformed
        # complement 1 - m/(m-1) equals 1/(1-m) exactly
        mt = m / (m - 1.0)
        comp = 1.0 / (1.0 - m)
        s = math.sqrt(1.0 - m)
        k, e = _agm_pair(mt, comp)
        return k / s, e * s
    return _agm_pair(m, 1.0 - m)


def elliptic_k(m: float) -> float:
    """Complete elliptic integral of the first kind, parameter m < 1."""
    return _elliptic_pair(m, "elliptic_k")[0]


def elliptic_e(m: float) -> float:
    """Complete elliptic integral of the second kind, parameter m < 1."""
    return _elliptic_pair(m, "elliptic_e")[1]


def lambert_w_lower(z: float) -> float:
    """Lower real branch of the Lambert W function on [-1/e, 0).

    Returns the w <= -1 solving w * exp(w) = z.  Initial guesses come from
    the branch-point series near -1/e and the log-log asymptotic near 0-,
    refined by Halley iteration to residual |w e^w - z| <= 1e-13 |z|.
    """
    if not math.isfinite(z) or z >= 0.0:
        raise DomainError("lambert_w_lower", z, "-1/e <= z < 0")
    if z < -_INV_E:
        if z >= -_INV_E - _BOUNDARY_TOL:
            return -1.0
        raise DomainError("lambert_w_lower", z, "-1/e <= z < 0")

    # distance from the branch point in the series variable
    p2 = 2.0 * (1.0 + math.e * z)
    if p2 <= 0.0:
        return -1.0
    if p2 < 2e-6:
        p = -math.sqrt(p2)
        return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))

    if p2 < 0.4:
        p = -math.sqrt(p2)
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))))
    else:
        l1 = math.log(-z)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1

    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - z
        w1 = w + 1.0
        step = f / (ew * w1 - f * (w + 2.0) / (2.0 * w1))
        wn = w - step
        if wn > -1.0:
            wn = 0.5 * (w - 1.0)  # stay on the lower branch
        if abs(wn - w) <= 1e-16 * (2.0 + abs(wn)):
            w = wn
            break
        w = wn
    return w


def k_inverse(x: float) -> float:
    """Inverse of elliptic_k restricted to parameters m <= 0.

    Args:
        x: target value in (0, pi/2].

    Returns:
        The unique m <= 0 with elliptic_k(m) = x, to |K(m) - x| <= 1e-10 max(1, x).
    """
    half_pi = math.pi / 2.0
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError("k_inverse", x, "0 < x <= pi/2")
    if x > half_pi:
        if x <= half_pi + _BOUNDARY_TOL:
            return 0.0
        raise DomainError("k_inverse", x, "0 < x <= pi/2")
    if x == half_pi:
        return 0.0

    # initial scale: W-based inversion of the small-x asymptotic of K, or a
    # quadratic-in-m expansion near pi/2
    if x < 0.5:
        w = lambert_w_lower(-x / 4.0)
        guess = -(w * w) / (x * x)
    else:
        guess = min(4.0 * (2.0 * x / math.pi - 1.0), -1e-9)

    lo = min(2.0 * guess, -1e-9)
    while elliptic_k(lo) > x:
        lo *= 8.0
        if lo < -1e280:
            raise DomainError("k_inverse", x, "bracket search failed")

    m = brentq(lambda mm: elliptic_k(mm) - x, lo, 0.0, xtol=1e-280, rtol=8.9e-16, maxiter=200)
    return m


def normal_cdf(x: float) -> float:
    """Standard normal distribution function."""
    if not math.isfinite(x):
        raise DomainError("normal_cdf", x, "finite x")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def brownian_sup_lower_bound(delta: float) -> float:
    """Lower bound on P(sup_{t<=1} |B_t| <= delta), clipped to [0, 1].

    Uses the single-reflection bound 2 (2 Phi(delta/4) - 1).
    """
    if not math.isfinite(delta) or delta <= 0.0:
        raise DomainError("brownian_sup_lower_bound", delta, "delta > 0")
    return min(1.0, max(0.0, 2.0 * (2.0 * normal_cdf(delta / 4.0) - 1.0)))
