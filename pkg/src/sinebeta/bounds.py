"""Closed-form bounds on overcrowding and fast-crossing probabilities.

Everything here is pure arithmetic on the model parameters; no simulation.
All probabilities are handled in log space because the interesting regimes
sit far below float range (the overcrowding envelope decays like
``exp(-n^2 log n)``).

Three families are covered:

* the overcrowding envelope: a leading term ``-(beta/2) n^2 log(n/lam)``
  widened symmetrically by ``c (n log(n+1) log(n/lam) + n^2)``, evaluated
  by :func:`envelope_log_bounds`, with :func:`fit_envelope_constant`
  returning the smallest ``c`` that brackets a set of estimates;
* the per-level product bound ``n log(lam / 2 pi)`` of
  :func:`trivial_log_upper`;
* the fast-crossing tail ``-(2/t) W^2(-lam t)`` with a symmetric
  ``c (1 + 1/t) log(1/(lam t))`` correction, evaluated on either side by
  :func:`tau_log_bound` (``W`` is the lower Lambert branch, so the bound
  needs ``lam t < 1/e``).

The two scalar recursions that generate envelope constants are iterated by
:func:`lower_recursion` and :func:`upper_recursion` on a shared
:class:`RecursionState` cache; the cache is stamped with the recursion kind
and parameters on first use so a state can never silently mix sequences.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .sde import ConfigError
from .specialfn import DomainError, lambert_w_lower

__all__ = [
    "BoundEnvelope",
    "BoundSide",
    "RecursionState",
    "envelope_log_bounds",
    "fit_envelope_constant",
    "lower_recursion",
    "tau_log_bound",
    "trivial_log_upper",
    "upper_recursion",
]


class BoundSide(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


def _require_positive(name: str, value: float) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value) or value <= 0.0:
        raise ConfigError(f"{name} must be finite and > 0, got {value}")


def _require_level(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, int):
        raise ConfigError(f"n must be an integer, got {n!r}")
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")


@dataclass(frozen=True)
class BoundEnvelope:
    """Parameter pack for the envelope bounds.

    ``beta`` and ``lambda0`` fix the model regime; ``c`` widens the
    overcrowding envelope; ``c1`` and ``c2`` drive the lower and upper
    recursions.  All five must be strictly positive.
    """

    beta: float
    lambda0: float
    c: float
    c1: float
    c2: float

    def __post_init__(self) -> None:
        for name in ("beta", "lambda0", "c", "c1", "c2"):
            _require_positive(name, getattr(self, name))


@dataclass
class RecursionState:
    """Cached iterates of one scalar recursion started at ``f(n0) = f0``.

    The cache fills lazily; entry ``i`` holds the value at index ``n0 + i``.
    The first recursion call stamps the state with its kind and parameters,
    and later calls must match the stamp exactly.
    """

    n0: int
    f0: float
    _values: list[float] = field(default_factory=list, repr=False)
    _stamp: tuple[str, float, float] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if isinstance(self.n0, bool) or not isinstance(self.n0, int) or self.n0 < 1:
            raise ConfigError(f"n0 must be an integer >= 1, got {self.n0!r}")
        _require_positive("f0", self.f0)

    def _bind(self, stamp: tuple[str, float, float]) -> list[float]:
        if self._stamp is None:
            self._stamp = stamp
            self._values.append(float(self.f0))
        elif self._stamp != stamp:
            raise ConfigError(
                f"state already bound to {self._stamp}, cannot iterate {stamp}"
            )
        return self._values


def envelope_log_bounds(
    n: int, lam: float, env: BoundEnvelope
) -> tuple[float, float]:
    """Log envelope around the overcrowding probability at level ``n``.

    Returns ``(lower, upper)`` where both sides share the leading term
    ``-(env.beta/2) n^2 log(n/lam)`` and differ by twice the ``c``-weighted
    spread ``n log(n+1) log(n/lam) + n^2``.  The formula is evaluated
    verbatim, so for ``lam`` large enough that the spread turns negative
    the tuple order flips rather than being silently clamped.
    """
    _require_level(n)
    if not math.isfinite(lam) or lam <= 0.0 or lam > env.lambda0:
        raise ConfigError(f"lam must lie in (0, {env.lambda0}], got {lam}")
    log_ratio = math.log(n / lam)
    main = -0.5 * env.beta * n * n * log_ratio
    spread = env.c * (n * math.log(n + 1.0) * log_ratio + n * n)
    return main - spread, main + spread


def trivial_log_upper(n: int, lam: float) -> float:
    """Log of the elementary per-level product bound, ``n log(lam / 2 pi)``."""
    _require_level(n)
    _require_positive("lam", lam)
    return n * math.log(lam / (2.0 * math.pi))


def tau_log_bound(lam: float, t: float, c: float, side: BoundSide) -> float:
    """One side of the log tail bound for crossing a level before time ``t``.

    The core term is ``-(2/t) W^2(-lam t)`` with ``W`` the lower Lambert
    branch; ``side`` adds or subtracts the correction
    ``c (1 + 1/t) log(1/(lam t))``.  Requires ``lam t < 1/e`` so the branch
    point is not crossed.
    """
    _require_positive("lam", lam)
    _require_positive("t", t)
    _require_positive("c", c)
    if not isinstance(side, BoundSide):
        raise ConfigError(f"side must be a BoundSide, got {side!r}")
    u = lam * t
    if u >= 1.0 / math.e:
        raise DomainError("tau_log_bound", u, "lam * t < 1/e")
    w = lambert_w_lower(-u)
    core = -(2.0 / t) * w * w
    correction = c * (1.0 + 1.0 / t) * math.log(1.0 / u)
    if side is BoundSide.UPPER:
        return core + correction
    return core - correction


def lower_recursion(n: int, state: RecursionState, beta: float, c1: float) -> float:
    """Iterate ``f(k) = ((k+1)/k) f(k-1) + (beta/2) k + c1`` up to ``n``.

    Extends the cache in ``state`` as far as needed and returns ``f(n)``.
    ``n`` must exceed ``state.n0``.
    """
    _require_positive("beta", beta)
    _require_positive("c1", c1)
    _require_level(n)
    if n <= state.n0:
        raise ConfigError(f"n must exceed n0 = {state.n0}, got {n}")
    values = state._bind(("lower", float(beta), float(c1)))
    for k in range(state.n0 + len(values), n + 1):
        values.append((k + 1.0) / k * values[-1] + 0.5 * beta * k + c1)
    return values[n - state.n0]


def upper_recursion(n: int, state: RecursionState, beta: float, c2: float) -> float:
    """Iterate the three-way minimum recursion up to ``n``.

    Each step takes the smallest of ``f + sqrt(2 beta f) - c2``,
    ``f (1 + 3/k)`` and ``(beta/2) k^2``, so iterates never exceed the
    quadratic cap.  The conventional base is ``f0 = n0``; any positive base
    is accepted.  Raises if an iterate leaves the positive domain (possible
    when ``c2`` is large relative to the base).
    """
    _require_positive("beta", beta)
    _require_positive("c2", c2)
    _require_level(n)
    if n <= state.n0:
        raise ConfigError(f"n must exceed n0 = {state.n0}, got {n}")
    values = state._bind(("upper", float(beta), float(c2)))
    for k in range(state.n0 + len(values), n + 1):
        f = values[-1]
        nxt = min(f + math.sqrt(2.0 * beta * f) - c2, f * (1.0 + 3.0 / k),
                  0.5 * beta * k * k)
        if nxt <= 0.0:
            raise ConfigError(f"upper recursion left the positive domain at k={k}")
        values.append(nxt)
    return values[n - state.n0]


def fit_envelope_constant(
    estimates: list[tuple[int, float, float]], env_template: BoundEnvelope
) -> float:
    """Smallest ``c >= 0`` whose envelope brackets every estimate.

    ``estimates`` holds ``(n, lam, log_prob)`` triples.  For each triple the
    envelope encloses ``log_prob`` exactly when the residual against the
    leading term is at most ``c`` times the unit spread, so the fit is a
    maximum of residual ratios.  Raises when a triple has nonpositive unit
    spread (no ``c`` can bracket it) or a non-finite ``log_prob``.
    """
    if not estimates:
        raise ConfigError("estimates must be nonempty")
    worst = 0.0
    for n, lam, log_prob in estimates:
        _require_level(n)
        if not math.isfinite(lam) or lam <= 0.0 or lam > env_template.lambda0:
            raise ConfigError(
                f"lam must lie in (0, {env_template.lambda0}], got {lam}"
            )
        if not math.isfinite(log_prob):
            raise ConfigError(f"log_prob must be finite, got {log_prob}")
        log_ratio = math.log(n / lam)
        unit = n * math.log(n + 1.0) * log_ratio + n * n
        if unit <= 0.0:
            raise ConfigError(
                f"point (n={n}, lam={lam}) has nonpositive spread {unit}"
            )
        residual = log_prob - (-0.5 * env_template.beta * n * n * log_ratio)
        worst = max(worst, abs(residual) / unit)
    return worst
