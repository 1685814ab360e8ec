"""Monte Carlo estimators built on the diffusion engines.

Provides counting-variable sampling, hitting-time CDF estimation (direct
and importance-sampled), a two-stage restart consistency check, a
sequential splitting estimator for P(N >= n) with optional per-level
importance sampling, a Chernoff-bound check, and the explosion-window
diagnostic.

All estimators draw exclusively from NoiseStream children indexed by
sample, so results are reproducible for a fixed seed regardless of how
calls are scheduled.  Sample aggregation uses compensated or log-space
summation, making reported values independent of accumulation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import logsumexp, ndtr

from .noise import NoiseStream
from .sde import (
    ConfigError,
    DiffusionKind,
    DiffusionSpec,
    PathEvent,
    SimConfig,
    alpha_constant,
    alpha_decaying,
    default_step,
    girsanov_log_weight,
    simulate_alpha,
    simulate_x,
    y_family,
)
from .specialfn import elliptic_e, elliptic_k, k_inverse, lambert_w_lower

__all__ = [
    "Estimate",
    "Particle",
    "SplittingConfig",
    "direct_overcrowding",
    "estimate_hitting_cdf",
    "estimate_overcrowding",
    "mgf_check",
    "recursion_check",
    "sample_counting",
    "splitting_level_profile",
    "window_probability",
]

TWO_PI = 2.0 * math.pi

# weighted estimates with fewer effective samples than this are flagged
ESS_RELIABLE = 30.0

# uniform floor mixed into the twisted resampling law; bounds the
# compensator carried by any resampled particle at 1/_TWIST_FLOOR
_TWIST_FLOOR = 0.2

# splitting clock is sliced in units of the drift e-folding time 4/beta
_SLICE_FRACTION = 0.5

# slice length ceiling while a drift boost is active, keeping the
# per-slice log-weight spread (boost/2) sqrt(slice) below about 0.8
_BOOST_SLICE = 0.0625

# upper bound on the phase drift boost; stronger proposals only widen the
# weight spread per slice
_BOOST_CAP = 8.0


@dataclass(frozen=True)
class Estimate:
    """Point estimate with uncertainty and diagnostics.

    ``ess`` is the effective sample size (sum of weights squared over sum
    of squared weights); it equals ``n_samples`` for unweighted estimates.
    ``log_value``/``log_stderr`` carry the log-scale result for values that
    underflow a float (the linearized ``stderr`` is value * log_stderr
    in that regime).  ``extinct_level`` is set by the splitting estimator
    when no particle delivered the level, to the highest level reached.
    """

    value: float
    stderr: float
    n_samples: int
    ess: float
    censored_fraction: float
    log_value: float | None = None
    log_stderr: float | None = None
    unreliable: bool = False
    extinct_level: int | None = None

    def __post_init__(self) -> None:
        if self.stderr < 0.0 or math.isnan(self.stderr):
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")
        if self.n_samples <= 0:
            raise ValueError("n_samples must be > 0")
        if not self.ess > 0.0:
            raise ValueError(f"ess must be > 0, got {self.ess}")
        if self.ess > self.n_samples * (1.0 + 1e-9):
            raise ValueError(f"ess {self.ess} exceeds n_samples {self.n_samples}")
        if not 0.0 <= self.censored_fraction <= 1.0:
            raise ValueError(f"censored_fraction must be in [0,1], got {self.censored_fraction}")


@dataclass(frozen=True)
class Particle:
    """Splitting-population member: absolute phase coordinate, clock time
    of the snapshot, completed 2 pi levels, and accumulated log weight."""

    coordinate: float
    elapsed: float
    level: int
    log_weight: float


@dataclass(frozen=True)
class SplittingConfig:
    """Sequential splitting parameters.

    The population advances on a shared clock, resampled after every
    slice; ``target_level`` is the n in P(N >= n).  ``per_level_is``
    selects the per-level proposal tilt: ``None`` runs the plain dynamics,
    ``"auto"`` derives a tilt for each level from its effective intensity
    and the remaining clock, and an explicit tuple gives the tilt
    parameter a (> -1) per level.  ``is_time_fraction`` is the fraction of
    the horizon by which the auto schedule wants all levels banked; paths
    ahead of that schedule are never tilted.  ``censor_eps`` sets the overall horizon
    through the drift-budget rule: simulation stops once the expected
    residual phase gain drops below 2 pi censor_eps.  ``resolve_limit``
    resolves each particle's final partial level with its martingale-limit
    probability (see sample_counting); switching it off counts only
    completed levels, which makes level one coincide with the
    finite-horizon hitting CDF.
    """

    n_particles: int
    target_level: int
    per_level_is: str | tuple[float, ...] | None = None
    censor_eps: float = 1e-4
    is_time_fraction: float = 0.5
    resolve_limit: bool = True

    def __post_init__(self) -> None:
        if self.n_particles < 100:
            raise ConfigError(f"n_particles must be >= 100, got {self.n_particles}")
        if self.target_level < 1:
            raise ConfigError(f"target_level must be >= 1, got {self.target_level}")
        if isinstance(self.per_level_is, str):
            if self.per_level_is != "auto":
                raise ConfigError(f"per_level_is string form must be 'auto', got {self.per_level_is!r}")
        elif self.per_level_is is not None:
            if len(self.per_level_is) != self.target_level:
                raise ConfigError("per_level_is schedule must list one tilt per level")
            if any(a <= -1.0 for a in self.per_level_is):
                raise ConfigError("per_level_is entries must satisfy a > -1")
        if not 0.0 < self.censor_eps < 1.0:
            raise ConfigError(f"censor_eps must be in (0,1), got {self.censor_eps}")
        if not 0.0 < self.is_time_fraction <= 1.0:
            raise ConfigError(f"is_time_fraction must be in (0,1], got {self.is_time_fraction}")


def _binomial_estimate(hits: int, n: int, censored_fraction: float) -> Estimate:
    p = hits / n
    se = math.sqrt(p * (1.0 - p) / n)
    return Estimate(
        value=p,
        stderr=se,
        n_samples=n,
        ess=float(n),
        censored_fraction=censored_fraction,
        log_value=math.log(p) if p > 0.0 else -math.inf,
    )


def sample_counting(
    lam: float,
    beta: float,
    cfg: SimConfig,
    noise: NoiseStream,
    *,
    resolve_limit: bool = True,
) -> int:
    """Levels of one decaying-drift phase path: completed 2 pi levels at
    cfg.t_max, plus (by default) a draw resolving the final partial level.

    Once the drift has decayed the phase is a bounded martingale on its
    current 2 pi interval, so from offset y it converges to the upper
    lattice point with probability y / 2 pi; drawing that Bernoulli makes
    the sampled integer unbiased for the t -> infinity count (up to the
    censoring tolerance), where the completed-level floor alone would
    undercount by the mean offset.  ``resolve_limit=False`` returns the
    bare floor count.
    """
    out = simulate_alpha(alpha_decaying(lam, beta), 0.0, None, cfg, noise)
    levels = out.levels_crossed
    if resolve_limit:
        frac = (out.terminal_value - TWO_PI * levels) / TWO_PI
        if frac > 0.0 and ndtr(noise.normals(1)[0]) < frac:
            levels += 1
    return levels


def direct_overcrowding(
    lam: float,
    beta: float,
    n: int,
    n_samples: int,
    cfg: SimConfig,
    noise: NoiseStream,
    *,
    resolve_limit: bool = True,
) -> Estimate:
    """Plain MC estimate of P(N >= n) from independent counting samples."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    hits = 0
    for i in range(n_samples):
        if sample_counting(lam, beta, cfg, noise.child(i), resolve_limit=resolve_limit) >= n:
            hits += 1
    return _binomial_estimate(hits, n_samples, 0.0)


# ------------------------------------------------------------- hitting CDF


def _weighted_estimate(
    log_w: np.ndarray, n: int, censored_fraction: float
) -> Estimate:
    """Estimate from per-sample log weights (-inf where the event failed)."""
    live = log_w[np.isfinite(log_w)]
    if live.size == 0:
        return Estimate(
            value=0.0,
            stderr=0.0,
            n_samples=n,
            ess=1.0,
            censored_fraction=censored_fraction,
            log_value=-math.inf,
            log_stderr=math.inf,
            unreliable=True,
        )
    l1 = float(logsumexp(live))
    l2 = float(logsumexp(2.0 * live))
    log_value = l1 - math.log(n)
    # relative variance of the weight mean, computed in log space
    rel2 = max(n * math.exp(l2 - 2.0 * l1) - 1.0, 0.0) / n
    log_stderr = math.sqrt(rel2)
    ess = math.exp(2.0 * l1 - l2)
    value = math.exp(log_value)
    return Estimate(
        value=value,
        stderr=value * log_stderr,
        n_samples=n,
        ess=ess,
        censored_fraction=censored_fraction,
        log_value=log_value,
        log_stderr=log_stderr,
        unreliable=ess < ESS_RELIABLE,
    )


def _is_sim_params(base: SimConfig, lam: float, a: float) -> tuple[float, float]:
    """Step and cap for a tilted run: the cap grows with the tilt so the
    neglected weight contribution beyond the caps stays negligible."""
    step = min(base.step, default_step(lam, a))
    x_cap = max(base.x_cap, 0.5 * math.log1p(max(a, 0.0)) + 5.0)
    return step, x_cap


def estimate_hitting_cdf(
    spec: DiffusionSpec,
    t: float,
    method: str,
    n_samples: int,
    cfg: SimConfig,
    noise: NoiseStream,
    *,
    a: float | None = None,
) -> Estimate:
    """Estimate P(tau <= t), tau the first 2 pi crossing (phase specs) or
    the explosion time (transformed specs).

    ``method="direct"`` counts events; ``method="girsanov"`` (X_CONSTANT
    targets only) simulates tilted proposals with parameter ``a`` and
    averages exp(log_weight) over paths that explode by t.
    """
    if not 0.0 < t <= cfg.t_max:
        raise ConfigError(f"need 0 < t <= t_max, got t={t}, t_max={cfg.t_max}")
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    if method not in ("direct", "girsanov"):
        raise ConfigError(f"method must be 'direct' or 'girsanov', got {method!r}")

    if spec.lam == 0.0:
        # the phase sticks at its starting lattice point
        return Estimate(
            value=0.0,
            stderr=0.0,
            n_samples=n_samples,
            ess=float(n_samples),
            censored_fraction=1.0,
            log_value=-math.inf,
        )

    if method == "girsanov":
        if spec.kind is not DiffusionKind.X_CONSTANT:
            raise ConfigError("girsanov method needs an X_CONSTANT target")
        if a is None or not a > -1.0:
            raise ConfigError("girsanov method needs a tilt parameter a > -1")
        step, x_cap = _is_sim_params(cfg, spec.lam, a)
        run_cfg = SimConfig(step=step, t_max=cfg.t_max, x_cap=x_cap,
                            seed=cfg.seed, substream_id=cfg.substream_id)
        proposal = y_family(spec.lam, a)
        log_w = np.full(n_samples, -math.inf)
        censored = 0
        for i in range(n_samples):
            out, rec = simulate_x(proposal, run_cfg, noise.child(i), record=True)
            if out.event is PathEvent.CENSORED:
                censored += 1
            elif out.elapsed <= t:
                log_w[i] = girsanov_log_weight(rec, spec.lam, a)
        return _weighted_estimate(log_w, n_samples, censored / n_samples)

    hits = 0
    censored = 0
    for i in range(n_samples):
        child = noise.child(i)
        if spec.kind in (DiffusionKind.ALPHA_DECAYING, DiffusionKind.ALPHA_CONSTANT):
            out = simulate_alpha(spec, 0.0, 1, cfg, child)
            hit = out.event is PathEvent.HIT_LEVEL
        else:
            out = simulate_x(spec, cfg, child)
            hit = out.event is PathEvent.EXPLODED
        if out.event is PathEvent.CENSORED:
            censored += 1
        if hit and out.elapsed <= t:
            hits += 1
    return _binomial_estimate(hits, n_samples, censored / n_samples)


# ---------------------------------------------------------------- splitting


@njit(cache=True, nogil=True)
def _slice_kernel(
    y: np.ndarray,
    floor: np.ndarray,
    boost: np.ndarray,
    gap_lo: float,
    gap_hi: float,
    target: float,
    damp: np.ndarray,
    dts: np.ndarray,
    sdts: np.ndarray,
    z: np.ndarray,
    wsum: np.ndarray,
    tsum: np.ndarray,
) -> None:
    """Advance the whole population over one clock slice, in place.

    Per path: drift damp[j] plus, while the within-level offset sits in
    (gap_lo, gap_hi), boost sin(y/2); diffusion 2 sin(y/2); monotone floor
    clamping; parking at the absolute target.  The gap window restricts
    the boost to the stretch the base drift cannot cross on its own, since
    the measure-change cost of the boost is flat in the offset while its
    dynamical effect is not.  wsum/tsum receive the boosted dW and time
    sums feeding the exact discrete Girsanov weight.
    """
    m, n = z.shape
    for i in range(m):
        yi = y[i]
        fl = floor[i]
        if yi >= target:
            wsum[i] = 0.0
            tsum[i] = 0.0
            continue
        b = boost[i]
        ws = 0.0
        ts = 0.0
        for j in range(n):
            drift = damp[j]
            gap = yi - fl
            # sin of the half-offset is the noise amplitude up to sign,
            # and the sign is immaterial under symmetric increments
            s = math.sin(0.5 * gap)
            boosted = b != 0.0 and gap_lo < gap < gap_hi
            if boosted:
                drift = drift + b * s
                ws += sdts[j] * z[i, j]
                ts += dts[j]
            ynew = yi + drift * dts[j] + 2.0 * s * sdts[j] * z[i, j]
            if ynew >= target:
                yi = target
                fl = target
                break
            while ynew >= fl + TWO_PI:
                fl += TWO_PI
            if ynew < fl:
                ynew = fl
            yi = ynew
        y[i] = yi
        floor[i] = fl
        wsum[i] = ws
        tsum[i] = ts


def _auto_boost(lam_x: float, rate: float, t_target: float) -> float:
    """Phase-drift boost for one level, derived from the tilt that makes a
    decaying-intensity proposal typically cross by t_target.

    The tilt parameter solves elliptic_k(-a) = (integrated drift budget up
    to t_target) / 4, the constant-drift rule k_inverse(lam t / 4) in the
    rate -> 0 limit; it is then mapped to the equivalent-strength phase
    boost lam_x (sqrt(1 + a) - 1), the peak drift surplus of the tilted
    transformed dynamics.  Capped: past the cap a stronger proposal only
    adds weight noise faster than it adds speed.
    """
    if rate > 0.0:
        budget = lam_x / rate * -math.expm1(-rate * t_target)
    else:
        budget = lam_x * t_target
    x = budget / 4.0
    if x >= math.pi / 2.0:
        return 0.0
    a = -k_inverse(x)
    return min(lam_x * (math.sqrt(1.0 + a) - 1.0), _BOOST_CAP)


def _progress_fraction(gap: np.ndarray, x_cap: float) -> np.ndarray:
    """Within-level progress credit on the transformed scale: 0 at the
    floor, 1 at the next lattice point."""
    quarter = np.clip(gap / 4.0, 1e-300, math.pi / 2.0 - 1e-12)
    x = np.log(np.tan(quarter))
    return np.clip((x + x_cap) / (2.0 * x_cap), 0.0, 1.0)


def _level_log_price(lam_x: float, t_avail: float) -> float:
    """Log-probability scale of one genuine level crossing by a path with
    transformed intensity lam_x and t_avail of clock left, from the small
    lam_x t asymptotic -(2/t) W^2(-lam_x t / 4), W the lower Lambert
    branch.  Prices the resampling potential: a completed level must be
    rewarded on the same scale as the cost of completing it, or selection
    systematically drops the paths that deliver levels.
    """
    u = lam_x * t_avail / 4.0
    if u >= 1.0:
        return 0.0
    u = max(u, 1e-12)
    w = lambert_w_lower(max(-u, -1.0 / math.e))
    return -(2.0 / t_avail) * w * w


def splitting_level_profile(
    lam: float,
    beta: float,
    split_cfg: SplittingConfig,
    cfg: SimConfig,
    noise: NoiseStream,
    pool_out: list[Particle] | None = None,
) -> list[Estimate]:
    """Sequential splitting estimates of P(N >= k) for k = 1..target_level.

    One population of phase paths advances on a shared clock to the
    censoring horizon in slices of half a drift e-folding time.  After
    each slice the population is resampled (fixed-effort multinomial)
    with probability proportional to weight times a progress potential
    h = (intensity remaining / 2 pi)^(levels still to gain, counting
    fractional within-level progress); each child carries the exact
    compensator mean(h) / h(parent), which keeps every estimate unbiased
    while steering effort toward paths that can still deliver the target.
    Per-level importance sampling adds a drift boost with its discrete
    Girsanov weight folded into the same accounting.

    The k-th entry multiplies the per-slice weight means with the terminal
    weighted fraction of paths whose resolved count reaches k; its
    standard error is the log-scale delta-method value accumulated over
    slices.  If no path delivers level k the entry is zero with
    ``extinct_level`` set to the highest level reached.

    Each entry is unbiased, but only the target entry has controlled
    variance: selection concentrates the terminal population on lineages
    built for the target, so the hit sets for k well below it coincide
    with the target's and those entries degrade to high-variance
    diagnostics.  Estimate shallow levels with their own run.  At deep
    targets the reported log_stderr is a delta-method value on a
    heavy-tailed weight distribution and so understates realization
    error; replicate across seeds for honest spread.
    """
    if not lam > 0.0:
        raise ConfigError(f"lam must be > 0, got {lam}")
    if not beta > 0.0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    m = split_cfg.n_particles
    n_levels = split_cfg.target_level
    rate = beta / 4.0
    horizon = min(max((1.0 / rate) * math.log(lam / (TWO_PI * split_cfg.censor_eps)), 0.0),
                  cfg.t_max)
    target = TWO_PI * n_levels
    schedule = split_cfg.per_level_is
    slice_len = _SLICE_FRACTION / rate
    if schedule is not None:
        slice_len = min(slice_len, _BOOST_SLICE)
    n_slices = max(int(math.ceil(horizon / slice_len)), 1)
    delta = horizon / n_slices

    y = np.zeros(m)
    floor = np.zeros(m)
    pending = np.zeros(m)
    boost = np.zeros(m)
    wsum = np.zeros(m)
    tsum = np.zeros(m)
    log_z = 0.0
    var_log = 0.0
    min_ess = float(m)

    n_steps = max(int(math.ceil(delta / cfg.step)), 1)
    dts = np.full(n_steps, cfg.step)
    dts[-1] = delta - cfg.step * (n_steps - 1)
    if dts[-1] <= 0.0:
        dts[-1] = cfg.step
    sdts = np.sqrt(dts)
    t_grid = np.concatenate(([0.0], np.cumsum(dts[:-1])))

    for s in range(n_slices):
        t0 = s * delta
        # amp is both the phase drift amplitude and the transformed
        # intensity seen by the level a particle is working on
        amp = lam * math.exp(-rate * t0) * rate
        damp = amp * np.exp(-rate * t_grid)
        stage_stream = noise.child(s)

        gap_lo = 0.0
        gap_hi = 0.0
        if schedule is None:
            boost.fill(0.0)
        else:
            # boost only the stretch the base drift cannot cross on its
            # own: offsets within log(4/amp) of the level midpoint on the
            # transformed scale
            half_span = min(max(math.log(4.0 / amp), 1.0), cfg.x_cap)
            gap_lo = 4.0 * math.atan(math.exp(-half_span))
            gap_hi = 4.0 * math.atan(math.exp(half_span))
            lev = np.minimum(np.rint(floor / TWO_PI).astype(np.int64), n_levels - 1)
            if schedule == "auto":
                # paths on schedule run free of charge; a level's boost
                # switches on halfway through its allotment and escalates
                # as the deadline nears, so measure-change cost is paid
                # mostly by laggards the resampler is about to drop anyway
                t_bank = split_cfg.is_time_fraction * horizon
                per_level = np.array([
                    0.0 if t0 < t_bank * (v + 0.5) / n_levels else _auto_boost(
                        amp, rate,
                        max(t_bank * (v + 1.0) / n_levels - t0, slice_len),
                    )
                    for v in range(n_levels)
                ])
            else:
                per_level = np.minimum(
                    amp * (np.sqrt(1.0 + np.asarray(schedule)) - 1.0), _BOOST_CAP
                )
            boost = per_level[lev]

        z = stage_stream.normals(m * n_steps).reshape(m, n_steps)
        _slice_kernel(y, floor, boost, gap_lo, gap_hi, target, damp, dts, sdts,
                      z, wsum, tsum)
        # discrete Girsanov weight of the boost over this slice
        log_w = pending - 0.5 * boost * wsum - 0.125 * boost * boost * tsum

        l1 = float(logsumexp(log_w))
        l2 = float(logsumexp(2.0 * log_w))
        log_z += l1 - math.log(m)
        var_log += max(m * math.exp(l2 - 2.0 * l1) - 1.0, 0.0) / (m - 1)
        min_ess = min(min_ess, math.exp(2.0 * l1 - l2))

        if s + 1 < n_slices:
            t1 = t0 + delta
            lam_next = lam * math.exp(-rate * t1)
            # cumulative cost of the levels still to gain, each priced at
            # the crossing cost with one lookahead window of clock
            t_avail = min(max(horizon - t1, slice_len), 2.0 / rate)
            prices = np.array([
                _level_log_price(lam_next * rate * math.exp(-rate * j * t_avail), t_avail)
                for j in range(n_levels)
            ])
            cum_price = np.concatenate(([0.0], np.cumsum(prices)))
            frac = _progress_fraction(y - floor, cfg.x_cap)
            m_eff = np.maximum(n_levels - floor / TWO_PI - frac, 0.0)
            log_h = np.interp(m_eff, np.arange(n_levels + 1.0), cum_price)
            # a path one partial level short can still deliver through its
            # limit draw; never price it below that channel
            toss_val = np.log(np.maximum(y - floor, 1e-300) / TWO_PI)
            log_h = np.where(m_eff < 1.0, np.maximum(log_h, toss_val), log_h)
            log_h_mean = float(logsumexp(log_w + log_h)) - l1
            log_g = np.logaddexp(
                math.log1p(-_TWIST_FLOOR) + log_h - log_h_mean,
                math.log(_TWIST_FLOOR),
            )
            log_wg = log_w + log_g
            probs = np.exp(log_wg - logsumexp(log_wg))
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            u = ndtr(stage_stream.normals(m))
            chosen = np.searchsorted(cum, u)
            y = y[chosen]
            floor = floor[chosen]
            pending = -log_g[chosen]
        else:
            pending = log_w

    # resolve each path's final partial level with its limit probability
    levels = np.rint(floor / TWO_PI).astype(np.int64)
    tossed = np.zeros(m, dtype=bool)
    if split_cfg.resolve_limit:
        frac = (y - floor) / TWO_PI
        u = ndtr(noise.child(n_slices).normals(m))
        tossed = u < frac
        levels = levels + tossed

    if pool_out is not None:
        pool_out.extend(
            Particle(coordinate=float(y[i]), elapsed=horizon,
                     level=int(levels[i]), log_weight=float(pending[i]))
            for i in range(m)
        )

    profile: list[Estimate] = []
    for k in range(1, n_levels + 1):
        hit = levels >= k
        if not hit.any():
            profile.append(
                Estimate(
                    value=0.0,
                    stderr=0.0,
                    n_samples=m,
                    ess=max(min(min_ess, float(m)), 1.0),
                    censored_fraction=0.0,
                    log_value=-math.inf,
                    log_stderr=math.inf,
                    unreliable=True,
                    extinct_level=int(levels.max(initial=0)),
                )
            )
            continue
        lw_hit = pending[hit]
        l1 = float(logsumexp(lw_hit))
        l2 = float(logsumexp(2.0 * lw_hit))
        log_p = log_z + l1 - math.log(m)
        rel = var_log + max(m * math.exp(l2 - 2.0 * l1) - 1.0, 0.0) / (m - 1)
        ess = min(min_ess, math.exp(2.0 * l1 - l2))
        toss_hit = tossed[hit]
        cens = float(np.exp(logsumexp(lw_hit[toss_hit]) - l1)) if toss_hit.any() else 0.0
        value = math.exp(log_p)
        log_se = math.sqrt(rel)
        profile.append(
            Estimate(
                value=value,
                stderr=value * log_se,
                n_samples=m,
                ess=ess,
                censored_fraction=min(cens, 1.0),
                log_value=log_p,
                log_stderr=log_se,
                unreliable=ess < ESS_RELIABLE,
            )
        )
    return profile


def estimate_overcrowding(
    lam: float,
    beta: float,
    n: int,
    split_cfg: SplittingConfig,
    cfg: SimConfig,
    noise: NoiseStream,
) -> Estimate:
    """Sequential splitting estimate of P(N >= n); see
    splitting_level_profile for the mechanism."""
    if n != split_cfg.target_level:
        raise ConfigError(
            f"n ({n}) must equal split_cfg.target_level ({split_cfg.target_level})"
        )
    return splitting_level_profile(lam, beta, split_cfg, cfg, noise)[-1]


# ------------------------------------------------------------ consistency


def recursion_check(
    lam: float,
    beta: float,
    n: int,
    n_samples: int,
    cfg: SimConfig,
    noise: NoiseStream,
) -> tuple[Estimate, Estimate]:
    """Direct P(N >= n) versus the restart identity.

    The second estimate simulates the first 2 pi crossing, then restarts a
    fresh counting run with the decayed intensity lam e^{-beta tau/4} and
    asks for n-1 further levels; paths that never cross contribute zero.
    """
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}")
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")

    direct_hits = 0
    ns_direct = noise.child(0)
    for i in range(n_samples):
        if sample_counting(lam, beta, cfg, ns_direct.child(i)) >= n:
            direct_hits += 1
    direct = _binomial_estimate(direct_hits, n_samples, 0.0)

    two_hits = 0
    censored = 0
    ns_two = noise.child(1)
    rate = beta / 4.0
    for i in range(n_samples):
        child = ns_two.child(i)
        first = simulate_alpha(alpha_decaying(lam, beta), 0.0, 1, cfg, child)
        if first.event is not PathEvent.HIT_LEVEL:
            censored += 1
            continue
        lam2 = lam * math.exp(-rate * first.elapsed)
        horizon = (4.0 / beta) * math.log(lam2 / (TWO_PI * 1e-4))
        if horizon <= cfg.step:
            continue
        cfg2 = SimConfig(step=cfg.step, t_max=horizon, x_cap=cfg.x_cap,
                         seed=cfg.seed, substream_id=cfg.substream_id)
        if sample_counting(lam2, beta, cfg2, child) >= n - 1:
            two_hits += 1
    two_stage = _binomial_estimate(two_hits, n_samples, censored / n_samples)
    return direct, two_stage


def mgf_check(
    lam: float,
    a: float,
    n_samples: int,
    cfg: SimConfig,
    noise: NoiseStream,
) -> tuple[Estimate, float]:
    """MC estimate of E exp(-(lam^2 a/8 + lam sqrt(a)/4) tau) for the
    constant-drift crossing time tau, with its closed-form ceiling
    exp(-lam ((1+a) K(-a) - E(-a))).

    Censored paths contribute exp(-rate t_max), an upper bound on their
    true contribution, so the estimate errs against the ceiling check.
    """
    if not lam > 0.0 or not a > 0.0:
        raise ConfigError(f"need lam > 0 and a > 0, got lam={lam}, a={a}")
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    rate = lam * lam * a / 8.0 + lam * math.sqrt(a) / 4.0
    spec = alpha_constant(lam)
    vals = np.empty(n_samples)
    censored = 0
    for i in range(n_samples):
        out = simulate_alpha(spec, 0.0, 1, cfg, noise.child(i))
        if out.event is PathEvent.HIT_LEVEL:
            vals[i] = math.exp(-rate * out.elapsed)
        else:
            censored += 1
            vals[i] = math.exp(-rate * cfg.t_max)
    mean = math.fsum(vals) / n_samples
    sd = math.sqrt(math.fsum((vals - mean) ** 2) / (n_samples - 1)) if n_samples > 1 else 0.0
    est = Estimate(
        value=mean,
        stderr=sd / math.sqrt(n_samples),
        n_samples=n_samples,
        ess=float(n_samples),
        censored_fraction=censored / n_samples,
        log_value=math.log(mean) if mean > 0.0 else -math.inf,
    )
    ceiling = math.exp(-lam * ((1.0 + a) * elliptic_k(-a) - elliptic_e(-a)))
    return est, ceiling


def window_probability(
    lam: float,
    a: float,
    n_samples: int,
    cfg: SimConfig,
    noise: NoiseStream,
) -> Estimate:
    """Probability that a tilted explosion lands in the predicted window
    lam tau in 4 K(-a) [1 - 5/(lam sqrt a), 1 + 5/(lam sqrt a)]."""
    if not (lam * math.sqrt(a) >= 2.0 and a > 2.0):
        raise ConfigError(f"need lam sqrt(a) >= 2 and a > 2, got lam={lam}, a={a}")
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    k = elliptic_k(-a)
    half_width = 5.0 / (lam * math.sqrt(a))
    lo = 4.0 * k * (1.0 - half_width) / lam
    hi = 4.0 * k * (1.0 + half_width) / lam
    if cfg.t_max < hi:
        raise ConfigError(f"t_max {cfg.t_max} below the window end {hi}")
    step, x_cap = _is_sim_params(cfg, lam, a)
    run_cfg = SimConfig(step=step, t_max=cfg.t_max, x_cap=x_cap,
                        seed=cfg.seed, substream_id=cfg.substream_id)
    spec = y_family(lam, a)
    hits = 0
    censored = 0
    for i in range(n_samples):
        out = simulate_x(spec, run_cfg, noise.child(i))
        if out.event is PathEvent.CENSORED:
            censored += 1
        elif lo <= out.elapsed <= hi:
            hits += 1
    return _binomial_estimate(hits, n_samples, censored / n_samples)
