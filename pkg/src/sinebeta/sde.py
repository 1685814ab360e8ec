"""Euler-Maruyama engines for the phase diffusions and their transforms.

Four related one-dimensional diffusions are simulated here:

* ``ALPHA_DECAYING``: d a = lam (beta/4) e^{-beta t/4} dt + 2 sin(a/2) dB,
  the phase whose terminal winding number a(inf)/(2 pi) is the counting
  variable of interest.
* ``ALPHA_CONSTANT``: d a = lam dt + 2 sin(a/2) dB, the constant-drift
  comparison process.
* ``X_CONSTANT``: the log-tangent transform x = log tan(a/4) of the
  constant-drift phase; crossing 2 pi becomes explosion to +infinity.
* ``Y_FAMILY``: d y = (lam/2) sqrt(cosh^2 y + a) dt + (1/2) tanh y dt + dB,
  the tilted proposal family used for importance sampling; a = 0 recovers
  ``X_CONSTANT`` exactly.

Phase paths enforce the monotone floor: once a path exceeds a multiple of
2 pi it is clamped there from below, matching the almost-sure monotonicity
of the winding number.  Crossing times are linearly interpolated inside the
crossing step.  Transformed paths run between +-x_cap; the residual travel
time outside the caps is deterministic to leading order and is added as the
ODE tail time integral of dx / drift.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.integrate import quad

from .noise import NoiseStream

__all__ = [
    "ConfigError",
    "DiffusionKind",
    "DiffusionSpec",
    "PathEvent",
    "PathOutcome",
    "SimConfig",
    "XPathRecord",
    "alpha_constant",
    "alpha_decaying",
    "counting_horizon",
    "couple_pair",
    "default_step",
    "girsanov_log_weight",
    "log_likelihood_ratio",
    "simulate_alpha",
    "simulate_x",
    "x_constant",
    "y_family",
]

TWO_PI = 2.0 * math.pi

# increments consumed per noise request while a path is still running
_CHUNK = 8192

# The transformed drift grows like e^{|x|} near the caps, so fixed-step Euler
# would overshoot the whole interval in one move.  Substeps shrink so that a
# single drift increment never exceeds this bound; the extra cost is at most
# 2 x_cap / bound substeps per cap traversal.
_DRIFT_CAP = 0.05


class ConfigError(ValueError):
    """Invalid diffusion or simulation configuration."""


class DiffusionKind(enum.Enum):
    ALPHA_DECAYING = "alpha_decaying"
    ALPHA_CONSTANT = "alpha_constant"
    X_CONSTANT = "x_constant"
    Y_FAMILY = "y_family"


_ALPHA_KINDS = (DiffusionKind.ALPHA_DECAYING, DiffusionKind.ALPHA_CONSTANT)
_X_KINDS = (DiffusionKind.X_CONSTANT, DiffusionKind.Y_FAMILY)


@dataclass(frozen=True)
class DiffusionSpec:
    """Which diffusion to run and its parameters.

    ``lam`` is the intensity parameter (lam = 0 is allowed as a degenerate
    case for tests: the phase then sticks at its starting lattice point).
    ``beta`` is required exactly for ``ALPHA_DECAYING``; ``a`` exactly for
    ``Y_FAMILY``.
    """

    kind: DiffusionKind
    lam: float
    beta: float | None = None
    a: float | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.lam) or self.lam < 0.0:
            raise ConfigError(f"lam must be finite and >= 0, got {self.lam}")
        if self.kind is DiffusionKind.ALPHA_DECAYING:
            if self.beta is None or not math.isfinite(self.beta) or self.beta <= 0.0:
                raise ConfigError("ALPHA_DECAYING needs beta > 0")
        elif self.beta is not None:
            raise ConfigError(f"{self.kind.name} does not take beta")
        if self.kind is DiffusionKind.Y_FAMILY:
            if self.a is None or not math.isfinite(self.a) or self.a <= -1.0:
                raise ConfigError("Y_FAMILY needs a > -1")
        elif self.a is not None:
            raise ConfigError(f"{self.kind.name} does not take a")


def alpha_decaying(lam: float, beta: float) -> DiffusionSpec:
    return DiffusionSpec(DiffusionKind.ALPHA_DECAYING, lam, beta=beta)


def alpha_constant(lam: float) -> DiffusionSpec:
    return DiffusionSpec(DiffusionKind.ALPHA_CONSTANT, lam)


def x_constant(lam: float) -> DiffusionSpec:
    return DiffusionSpec(DiffusionKind.X_CONSTANT, lam)


def y_family(lam: float, a: float) -> DiffusionSpec:
    return DiffusionSpec(DiffusionKind.Y_FAMILY, lam, a=a)


@dataclass(frozen=True)
class SimConfig:
    """Discretization and horizon parameters.

    Invariants: 0 < step <= t_max, x_cap >= 5.
    """

    step: float
    t_max: float
    x_cap: float = 12.0
    seed: int = 0
    substream_id: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.step) or self.step <= 0.0:
            raise ConfigError(f"step must be > 0, got {self.step}")
        if not math.isfinite(self.t_max) or self.t_max < self.step:
            raise ConfigError("need step <= t_max")
        if not math.isfinite(self.x_cap) or self.x_cap < 5.0:
            raise ConfigError(f"x_cap must be >= 5, got {self.x_cap}")

    def stream(self) -> NoiseStream:
        return NoiseStream(self.seed, self.substream_id)


class PathEvent(enum.Enum):
    HIT_LEVEL = "hit_level"
    EXPLODED = "exploded"
    CENSORED = "censored"


@dataclass(frozen=True)
class PathOutcome:
    """Terminal summary of one simulated path.

    ``levels_crossed`` is the absolute floor index floor(a / 2 pi) at
    termination for phase paths (0 for transformed paths), so it is
    nondecreasing across continued runs of the same path.
    """

    terminal_value: float
    elapsed: float
    event: PathEvent
    levels_crossed: int
    increments_consumed: int


@dataclass(frozen=True)
class XPathRecord:
    """Stored discretization of a transformed path, for reweighting."""

    spec: DiffusionSpec
    decay_rate: float
    xs: np.ndarray  # position at the start of each step
    dws: np.ndarray  # Brownian increment of each step
    dts: np.ndarray  # step lengths


def default_step(lam: float, a: float = 0.0) -> float:
    """Default Euler step: 1e-3 min(1, 1/lam), shrunk so one drift increment
    of the transformed process stays below 0.02 near the origin."""
    base = 1e-3 * min(1.0, 1.0 / lam) if lam > 0.0 else 1e-3
    drift_scale = 0.5 * lam * math.sqrt(1.0 + max(a, 0.0)) + 0.5
    return min(base, 0.02 / drift_scale)


def counting_horizon(lam: float, beta: float, eps_cens: float = 1e-4) -> float:
    """Horizon after which the undiscovered crossing mass is below eps_cens.

    The expected phase still to be gained after time t is lam e^{-beta t/4},
    so by Markov's inequality the probability of any further 2 pi crossing
    is below eps_cens once t >= (4/beta) log(lam / (2 pi eps_cens)).
    """
    if lam < 0 or beta <= 0 or eps_cens <= 0:
        raise ConfigError("need lam >= 0, beta > 0, eps_cens > 0")
    if lam == 0.0:
        return 1.0
    return max(1.0, 4.0 / beta * math.log(lam / (TWO_PI * eps_cens)))


# ------------------------------------------------------------------ kernels

_RUNNING, _HIT, _CENSORED = 0, 1, 2


@njit(cache=True, nogil=True)
def _alpha_kernel(y, floor, amp, rate, h, n_steps, g0, t_end, target, z):
    """Advance a phase path through one noise chunk.

    Returns (y, floor, used, status, elapsed_if_terminal).
    """
    used = 0
    for i in range(z.shape[0]):
        g = g0 + i
        t = g * h
        if g == n_steps - 1:
            dt = t_end - t
        else:
            dt = h
        drift = amp * math.exp(-rate * t) if rate > 0.0 else amp
        ynew = y + drift * dt + 2.0 * math.sin(0.5 * y) * math.sqrt(dt) * z[i]
        used = i + 1
        if ynew >= target:
            elapsed = t + dt * (target - y) / (ynew - y)
            return target, target, used, _HIT, elapsed
        while ynew >= floor + TWO_PI:
            floor += TWO_PI
        if ynew < floor:
            ynew = floor
        y = ynew
        if g == n_steps - 1:
            return y, floor, used, _CENSORED, t_end
    return y, floor, used, _RUNNING, 0.0


@njit(cache=True, nogil=True)
def _x_kernel(x, t, lam, a, rate, h, t_end, x_cap, z, xs_buf, dw_buf, dt_buf):
    """Advance a transformed path through one noise chunk, recording substeps.

    One increment per substep; substeps shrink where the drift is stiff.
    Returns (x, t, used, status, elapsed_if_terminal).
    """
    used = 0
    for i in range(z.shape[0]):
        c = math.cosh(x)
        lam_t = lam * math.exp(-rate * t) if rate > 0.0 else lam
        drift = 0.5 * lam_t * math.sqrt(c * c + a) + 0.5 * math.tanh(x)
        dt = h
        ab = abs(drift)
        if ab * dt > _DRIFT_CAP:
            dt = _DRIFT_CAP / ab
        last = t + dt >= t_end
        if last:
            dt = t_end - t
        dw = math.sqrt(dt) * z[i]
        xs_buf[i] = x
        dw_buf[i] = dw
        dt_buf[i] = dt
        xnew = x + drift * dt + dw
        used = i + 1
        if xnew >= x_cap:
            elapsed = t + dt * (x_cap - x) / (xnew - x)
            return x_cap, t, used, _HIT, elapsed
        if xnew < -x_cap:
            xnew = -x_cap
        x = xnew
        t += dt
        if last:
            return x, t, used, _CENSORED, t_end
    return x, t, used, _RUNNING, 0.0


# ------------------------------------------------------------------ drivers


def _n_steps(t_max: float, h: float) -> int:
    n = int(math.ceil(t_max / h - 1e-9))
    return max(n, 1)


def simulate_alpha(
    spec: DiffusionSpec,
    start: float,
    target_level: int | None,
    cfg: SimConfig,
    noise: NoiseStream,
) -> PathOutcome:
    """Run one phase path until it hits 2 pi * target_level or is censored.

    Args:
        spec: ALPHA_DECAYING or ALPHA_CONSTANT diffusion.
        start: initial phase, >= 0.
        target_level: absolute level index >= 1 whose coordinate
            2 pi * target_level terminates the path, or None to always run
            to the horizon.
        cfg: discretization; the path is censored at cfg.t_max.
        noise: increment stream; consumed increments advance its cursor.
    """
    if spec.kind not in _ALPHA_KINDS:
        raise ConfigError(f"simulate_alpha needs a phase diffusion, got {spec.kind.name}")
    if not math.isfinite(start) or start < 0.0:
        raise ConfigError(f"start must be >= 0, got {start}")
    if target_level is not None:
        if target_level < 1 or target_level != int(target_level):
            raise ConfigError(f"target_level must be an integer >= 1, got {target_level}")
        if start >= TWO_PI * target_level:
            raise ConfigError("start must lie below the target coordinate")

    if spec.kind is DiffusionKind.ALPHA_DECAYING:
        amp = spec.lam * spec.beta / 4.0
        rate = spec.beta / 4.0
    else:
        amp = spec.lam
        rate = 0.0
    target = TWO_PI * target_level if target_level is not None else math.inf

    h = cfg.step
    n_steps = _n_steps(cfg.t_max, h)
    y = float(start)
    # tolerance so a restart from a terminal sitting an ulp below k 2 pi
    # still counts as having crossed level k
    floor = TWO_PI * math.floor(start / TWO_PI + 1e-9)
    y = max(y, floor)
    g0 = 0
    used_total = 0
    cursor0 = noise.cursor
    while True:
        want = min(_CHUNK, n_steps - g0)
        z = noise.normals(want)
        y, floor, used, status, elapsed = _alpha_kernel(
            y, floor, amp, rate, h, n_steps, g0, cfg.t_max, target, z
        )
        used_total += used
        g0 += used
        if status != _RUNNING:
            break
    noise.seek(cursor0 + used_total)

    if status == _HIT:
        event = PathEvent.HIT_LEVEL
        levels = int(target_level)
        terminal = target
    else:
        event = PathEvent.CENSORED
        levels = int(round(floor / TWO_PI))
        terminal = y
    return PathOutcome(terminal, elapsed, event, levels, used_total)


@lru_cache(maxsize=4096)
def _tail_times(lam: float, a: float, x_cap: float) -> tuple[float, float]:
    """Deterministic ODE travel times outside +-x_cap (entrance, exit)."""
    if lam == 0.0:
        return 0.0, 0.0

    def speed(x: float) -> float:
        c = math.cosh(x)
        return 0.5 * lam * math.sqrt(c * c + a) + 0.5 * math.tanh(x)

    # beyond ~x_cap + 40 the integrand is below 1e-17 of its cap value
    hi = x_cap + 40.0
    exit_t, _ = quad(lambda x: 1.0 / speed(x), x_cap, hi, epsabs=1e-300, epsrel=1e-10, limit=200)
    if speed(-x_cap) <= 0.0:
        raise ConfigError("x_cap too small: drift not positive at the entrance cap")
    ent_t, _ = quad(lambda x: 1.0 / speed(x), -hi, -x_cap, epsabs=1e-300, epsrel=1e-10, limit=200)
    return ent_t, exit_t


def simulate_x(
    spec: DiffusionSpec,
    cfg: SimConfig,
    noise: NoiseStream,
    record: bool = False,
    decay_rate: float = 0.0,
) -> PathOutcome | tuple[PathOutcome, XPathRecord]:
    """Run one transformed path from -x_cap until explosion or censoring.

    On explosion the reported elapsed time adds the deterministic entrance
    and exit tail times, approximating the passage from -infinity to
    +infinity.  With ``record=True`` also returns the stored path for
    reweighting.  ``decay_rate`` replaces the intensity factor lam with
    lam e^{-decay_rate t}, the transformed image of the decaying-drift
    phase process restarted on a fresh level.
    """
    if spec.kind not in _X_KINDS:
        raise ConfigError(f"simulate_x needs a transformed diffusion, got {spec.kind.name}")
    if not math.isfinite(decay_rate) or decay_rate < 0.0:
        raise ConfigError(f"decay_rate must be finite and >= 0, got {decay_rate}")
    a = float(spec.a) if spec.kind is DiffusionKind.Y_FAMILY else 0.0
    lam = spec.lam

    h = cfg.step
    x = -cfg.x_cap
    t = 0.0
    used_total = 0
    cursor0 = noise.cursor
    xs_parts: list[np.ndarray] = []
    dw_parts: list[np.ndarray] = []
    dt_parts: list[np.ndarray] = []
    # substep count is state-dependent, so size the first request by the
    # plain-grid estimate plus the cap-traversal budget
    want = min(_CHUNK, _n_steps(cfg.t_max, h) + int(2.0 * cfg.x_cap / _DRIFT_CAP) + 16)
    while True:
        z = noise.normals(want)
        xs_buf = np.empty(want)
        dw_buf = np.empty(want)
        dt_buf = np.empty(want)
        x, t, used, status, elapsed = _x_kernel(
            x, t, lam, a, decay_rate, h, cfg.t_max, cfg.x_cap, z, xs_buf, dw_buf, dt_buf
        )
        used_total += used
        if record and used:
            xs_parts.append(xs_buf[:used])
            dw_parts.append(dw_buf[:used])
            dt_parts.append(dt_buf[:used])
        if status != _RUNNING:
            break
        want = _CHUNK
    noise.seek(cursor0 + used_total)

    if status == _HIT:
        if decay_rate == 0.0:
            ent, ext = _tail_times(lam, a, cfg.x_cap)
        else:
            # decayed intensity at exit makes the cached tail integral wrong;
            # both tails are below 1e-4 at the caps in use, so omit them
            ent = ext = 0.0
        outcome = PathOutcome(
            cfg.x_cap, ent + elapsed + ext, PathEvent.EXPLODED, 0, used_total
        )
    else:
        outcome = PathOutcome(x, cfg.t_max, PathEvent.CENSORED, 0, used_total)
    if not record:
        return outcome
    rec = XPathRecord(
        spec,
        decay_rate,
        np.concatenate(xs_parts) if xs_parts else np.empty(0),
        np.concatenate(dw_parts) if dw_parts else np.empty(0),
        np.concatenate(dt_parts) if dt_parts else np.empty(0),
    )
    return outcome, rec


def log_likelihood_ratio(
    record: XPathRecord, lam: float, a_from: float, a_to: float
) -> float:
    """Log density of the ``a_to`` tilt relative to the ``a_from`` tilt over
    a recorded path simulated under the ``a_from`` dynamics.

    The two drifts differ by db(x, t) = (lam(t)/2)(sqrt(cosh^2 x + a_to)
    - sqrt(cosh^2 x + a_from)) with lam(t) = lam e^{-decay_rate t};
    the ratio is sum db dW - 1/2 sum db^2 dt over the recorded increments.
    db is bounded (it vanishes at both caps), keeping weight variance
    finite for every pair of tilts > -1.
    """
    spec = record.spec
    if spec.kind is not DiffusionKind.Y_FAMILY:
        raise ConfigError("record must come from a Y_FAMILY proposal")
    if spec.lam != lam or spec.a != a_from:
        raise ConfigError(
            f"record simulated under (lam={spec.lam}, a={spec.a}), "
            f"asked for (lam={lam}, a_from={a_from})"
        )
    if not a_to > -1.0:
        raise ConfigError(f"a_to must be > -1, got {a_to}")
    c = np.cosh(record.xs)
    lam_t = lam
    if record.decay_rate > 0.0:
        ts = np.cumsum(record.dts) - record.dts
        lam_t = lam * np.exp(-record.decay_rate * ts)
    db = 0.5 * lam_t * (np.sqrt(c * c + a_to) - np.sqrt(c * c + a_from))
    return float(db @ record.dws - 0.5 * (db * db) @ record.dts)


def girsanov_log_weight(record: XPathRecord, lam: float, a: float) -> float:
    """Log likelihood ratio moving a tilted proposal path onto the untilted
    transformed dynamics with the same intensity (and decay, if any).

    For a path simulated under Y_FAMILY(lam, a), averaging
    exp(log_weight) 1{event} over proposal paths estimates the untilted
    probability of the event; see log_likelihood_ratio for the form.
    """
    return log_likelihood_ratio(record, lam, a, 0.0)


def couple_pair(
    spec_low: DiffusionSpec,
    spec_high: DiffusionSpec,
    cfg: SimConfig,
    noise: NoiseStream,
    start: float = 0.0,
    target_level: int | None = None,
) -> tuple[PathOutcome, PathOutcome]:
    """Run two paths driven by the identical increment sequence.

    Both specs must be phase diffusions (or both transformed ones); the
    pairing realizes the monotone couplings between constant and decaying
    drifts.  The parent stream advances by the larger of the two
    consumptions.
    """
    both_alpha = spec_low.kind in _ALPHA_KINDS and spec_high.kind in _ALPHA_KINDS
    both_x = spec_low.kind in _X_KINDS and spec_high.kind in _X_KINDS
    if not (both_alpha or both_x):
        raise ConfigError("couple_pair needs two phase or two transformed diffusions")
    s1 = noise.fork()
    s2 = noise.fork()
    if both_alpha:
        o1 = simulate_alpha(spec_low, start, target_level, cfg, s1)
        o2 = simulate_alpha(spec_high, start, target_level, cfg, s2)
    else:
        o1 = simulate_x(spec_low, cfg, s1)
        o2 = simulate_x(spec_high, cfg, s2)
    noise.seek(max(s1.cursor, s2.cursor))
    return o1, o2
