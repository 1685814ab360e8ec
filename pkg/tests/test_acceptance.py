"""Acceptance gate: twelve numbered end-to-end criteria.

Each test prints one ``criterion NN PASS|FAIL`` line (run pytest with
``-s`` to see them live) and then asserts it.  Tolerances are part of the
contract and must not be loosened; sample sizes and parameter points are
fixed, and all randomness is seeded, so the outcomes are reproducible.
"""

import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.integrate import quad

from sinebeta.bounds import BoundEnvelope, envelope_log_bounds, fit_envelope_constant
from sinebeta.bounds import RecursionState, lower_recursion, upper_recursion
from sinebeta.estimators import (
    SplittingConfig,
    estimate_hitting_cdf,
    estimate_overcrowding,
    mgf_check,
    recursion_check,
    sample_counting,
    window_probability,
)
from sinebeta.noise import NoiseStream
from sinebeta.sde import (
    PathEvent,
    SimConfig,
    counting_horizon,
    default_step,
    girsanov_log_weight,
    simulate_x,
    x_constant,
    y_family,
)
from sinebeta.specialfn import (
    brownian_sup_lower_bound,
    elliptic_e,
    elliptic_k,
    k_inverse,
    lambert_w_lower,
)

TWO_PI = 2.0 * math.pi


def _report(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num:02d} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    assert ok, line


def _stream(seed: int) -> NoiseStream:
    return NoiseStream(seed=seed, substream_id=0)


def test_criterion_01_special_function_oracles():
    t0 = time.perf_counter()
    ms = -np.logspace(-6, 6, 50)
    worst_k = worst_e = 0.0
    for m in ms:
        qk, _ = quad(lambda x: 1.0 / np.sqrt(1.0 - m * np.sin(x) ** 2),
                     0.0, np.pi / 2, epsrel=1e-13, limit=400)
        qe, _ = quad(lambda x: np.sqrt(1.0 - m * np.sin(x) ** 2),
                     0.0, np.pi / 2, epsrel=1e-13, limit=400)
        worst_k = max(worst_k, abs(elliptic_k(m) - qk) / qk)
        worst_e = max(worst_e, abs(elliptic_e(m) - qe) / qe)

    zs = -np.logspace(-14, math.log10(1.0 / math.e) - 1e-12, 100)
    worst_w = max(
        abs(w * math.exp(w) - z) / abs(z)
        for z in zs
        for w in (lambert_w_lower(float(z)),)
    )
    xs = np.linspace(1e-6, 1.0 / math.e, 50)
    worst_wlog = max(abs(lambert_w_lower(x * math.log(x)) - math.log(x)) for x in xs)

    ok = worst_k <= 1e-10 and worst_e <= 1e-10 and worst_w <= 1e-13 and worst_wlog <= 1e-10
    _report(1, ok,
            f"elliptic K/E vs quadrature rel {worst_k:.1e}/{worst_e:.1e} (tol 1e-10), "
            f"W residual {worst_w:.1e} (tol 1e-13), W(x log x) {worst_wlog:.1e} "
            f"(tol 1e-10) [{time.perf_counter() - t0:.1f}s]")


def test_criterion_02_elliptic_asymptotic_constants():
    t0 = time.perf_counter()
    decades = [10.0 ** p for p in range(2, 7)]
    qk = [a ** 1.5 * abs(elliptic_k(-a) - math.log(16 * a) / (2 * math.sqrt(a)))
          / math.log(a) for a in decades]
    qe = [math.sqrt(a) * abs(elliptic_e(-a) - math.sqrt(a)) / math.log(a)
          for a in decades]
    viol_k = sum(b > a for a, b in zip(qk, qk[1:]))
    viol_e = sum(b > a for a, b in zip(qe, qe[1:]))
    ok = max(qk) <= 1.0 and max(qe) <= 1.0 and viol_k <= 1 and viol_e <= 1
    _report(2, ok,
            f"normalized K residual max {max(qk):.3f}, E max {max(qe):.3f} (<= 1), "
            f"trend violations {viol_k}/{viol_e} (<= 1) "
            f"[{time.perf_counter() - t0:.1f}s]")


def test_criterion_03_mean_counts_match_intensity():
    t0 = time.perf_counter()
    details = []
    ok = True
    for idx, (lam, beta) in enumerate(((TWO_PI, 2.0), (2.0 * TWO_PI, 2.0), (TWO_PI, 1.0))):
        cfg = SimConfig(step=default_step(lam), t_max=counting_horizon(lam, beta),
                        seed=300 + idx)
        ns = _stream(300 + idx)
        counts = np.array(
            [sample_counting(lam, beta, cfg, ns.child(i)) for i in range(10000)])
        se = counts.std(ddof=1) / math.sqrt(len(counts))
        gap = counts.mean() - lam / TWO_PI
        ok = ok and abs(gap) <= 3.0 * se
        details.append(f"({lam / math.pi:.0f}pi,{beta:g}): gap {gap:+.4f} vs 3se {3 * se:.4f}")
    _report(3, ok, "; ".join(details) + f" [{time.perf_counter() - t0:.0f}s]")


def test_criterion_04_geometric_overcrowding_bound():
    t0 = time.perf_counter()
    lam, beta = 1.0, 2.0
    cfg = SimConfig(step=default_step(lam), t_max=counting_horizon(lam, beta), seed=400)
    ns = _stream(400)
    n_paths = 100000
    hits = [0, 0, 0]
    for i in range(n_paths):
        c = sample_counting(lam, beta, cfg, ns.child(i))
        for k in (1, 2, 3):
            if c >= k:
                hits[k - 1] += 1
    ok = True
    details = []
    for k in (1, 2, 3):
        bound = (lam / TWO_PI) ** k
        p = hits[k - 1] / n_paths
        if hits[k - 1] == 0:
            # one-sided 95% upper confidence limit for a zero count
            upper = 3.0 / n_paths
            ok = ok and upper <= bound
            details.append(f"n={k}: 0 hits, CI95 {upper:.1e} <= {bound:.1e}")
        else:
            se = math.sqrt(p * (1.0 - p) / n_paths)
            ok = ok and p <= bound + 3.0 * se
            details.append(f"n={k}: {p:.2e} <= {bound:.2e}+3se")
    _report(4, ok, "; ".join(details) + f" [{time.perf_counter() - t0:.0f}s]")


def test_criterion_05_restart_recursion_consistency():
    t0 = time.perf_counter()
    lam, beta = 2.0, 2.0
    cfg = SimConfig(step=default_step(lam), t_max=counting_horizon(lam, beta), seed=500)
    direct, two_stage = recursion_check(lam, beta, 2, 100000, cfg, _stream(500))
    gap = abs(direct.value - two_stage.value)
    comb = math.hypot(direct.stderr, two_stage.stderr)
    ok = gap <= 3.0 * comb
    _report(5, ok,
            f"direct {direct.value:.5f} vs two-stage {two_stage.value:.5f}, "
            f"|diff| {gap:.5f} <= 3 combined se {3 * comb:.5f} "
            f"[{time.perf_counter() - t0:.0f}s]")


def test_criterion_06_girsanov_machinery():
    t0 = time.perf_counter()
    # (a) pathwise log-weight sandwich at two step sizes
    lam, a = 5.0, 10.0
    const = lam * ((1.0 + a) * elliptic_k(-a) - elliptic_e(-a))
    rate = lam * math.sqrt(a) / 4.0

    def worst_excess(step: float) -> float:
        cfg = SimConfig(step=step, t_max=6.0, seed=600)
        ns = _stream(600)
        excess = -math.inf
        exploded = 0
        for i in range(1000):
            out, rec = simulate_x(y_family(lam, a), cfg, ns.child(i), record=True)
            if out.event is not PathEvent.EXPLODED:
                continue
            exploded += 1
            dev = abs(-girsanov_log_weight(rec, lam, a)
                      + lam * lam * a * out.elapsed / 8.0 - const)
            excess = max(excess, dev - rate * out.elapsed)
        assert exploded >= 900
        return excess

    coarse = worst_excess(8e-4)
    fine = worst_excess(2e-4)
    ok_a = fine <= 0.0 and fine <= coarse + 0.1

    # (b) weighted window probability vs direct MC
    lam_b, a_b = 3.0, 5.0
    k = elliptic_k(-a_b)
    s1 = 4.0 * k * (1.0 - 5.0 / (lam_b * math.sqrt(a_b))) / lam_b
    s2 = 4.0 * k * (1.0 + 5.0 / (lam_b * math.sqrt(a_b))) / lam_b
    cfg = SimConfig(step=default_step(lam_b, a_b), t_max=1.5 * s2, seed=601)
    ns = _stream(601)
    n = 2000
    w = np.zeros(n)
    for i in range(n):
        out, rec = simulate_x(y_family(lam_b, a_b), cfg, ns.child(i), record=True)
        if out.event is PathEvent.EXPLODED and s1 <= out.elapsed <= s2:
            w[i] = math.exp(girsanov_log_weight(rec, lam_b, a_b))
    p_is = w.mean()
    se_is = w.std(ddof=1) / math.sqrt(n)

    ns_d = _stream(602)
    hits = 0
    for i in range(n):
        out = simulate_x(x_constant(lam_b), cfg, ns_d.child(i))
        if out.event is PathEvent.EXPLODED and s1 <= out.elapsed <= s2:
            hits += 1
    p_dir = hits / n
    se_dir = math.sqrt(p_dir * (1.0 - p_dir) / n)
    gap = abs(p_is - p_dir)
    comb = math.hypot(se_is, se_dir)
    ok_b = gap <= 3.0 * comb

    _report(6, ok_a and ok_b,
            f"(a) sandwich excess {coarse:+.2f} -> {fine:+.2f} at h -> h/4 (<= 0); "
            f"(b) window weighted {p_is:.4f} vs direct {p_dir:.4f}, "
            f"|diff| <= 3se {3 * comb:.4f} [{time.perf_counter() - t0:.0f}s]")


def test_criterion_07_chernoff_ceiling():
    t0 = time.perf_counter()
    ok = True
    details = []
    for idx, (lam, a) in enumerate(((4.0, 4.0), (2.0, 9.0))):
        cfg = SimConfig(step=default_step(lam), t_max=min(max(200.0 / lam, 10.0), 500.0),
                        seed=700 + idx)
        est, ceiling = mgf_check(lam, a, 2000, cfg, _stream(700 + idx))
        ok = ok and est.value <= ceiling + 3.0 * est.stderr
        details.append(f"({lam:g},{a:g}): {est.value:.3e} <= {ceiling:.3e}+3se")
    _report(7, ok, "; ".join(details) + f" [{time.perf_counter() - t0:.0f}s]")


def test_criterion_08_crossing_tail_leading_order():
    t0 = time.perf_counter()
    lam = 0.05
    cs = []
    for idx, lt in enumerate((0.002, 0.004, 0.008, 0.0126, 0.02)):
        t = lt / lam
        a = -k_inverse(lam * t / 4.0)
        cfg = SimConfig(step=default_step(lam, a), t_max=t, seed=800 + idx)
        est = estimate_hitting_cdf(x_constant(lam), t, "girsanov", 3000, cfg,
                                   _stream(800 + idx), a=a)
        assert est.log_value is not None and math.isfinite(est.log_value)
        w = lambert_w_lower(-lt)
        core = -(2.0 / t) * w * w
        unit = (1.0 + 1.0 / t) * math.log(1.0 / lt)
        cs.append(abs(est.log_value - core) / unit)
    fitted = max(cs)
    ok = fitted <= 20.0
    _report(8, ok,
            f"lam t in [0.002, 0.02]: fitted correction constant {fitted:.2f} <= 20 "
            f"[{time.perf_counter() - t0:.0f}s]")


def test_criterion_09_envelope_and_superquadratic_decay():
    t0 = time.perf_counter()
    lam, beta = 1.0, 2.0
    cfg = SimConfig(step=default_step(lam), t_max=counting_horizon(lam, beta), seed=900)
    log_ps = []
    for n in (2, 3, 4, 5):
        split = SplittingConfig(n_particles=20000, target_level=n, per_level_is="auto")
        est = estimate_overcrowding(lam, beta, n, split, cfg, _stream(900 + n))
        assert est.log_value is not None and math.isfinite(est.log_value), \
            f"splitting extinct at n={n}"
        log_ps.append(est.log_value)

    template = BoundEnvelope(beta=beta, lambda0=1.0, c=1.0, c1=1.0, c2=1.0)
    fitted = fit_envelope_constant(
        [(n, lam, lp) for n, lp in zip((2, 3, 4, 5), log_ps)], template)
    env = BoundEnvelope(beta=beta, lambda0=1.0, c=fitted, c1=1.0, c2=1.0)
    inside = all(
        lo <= lp <= hi
        for n, lp in zip((2, 3, 4, 5), log_ps)
        for lo, hi in (envelope_log_bounds(n, lam, env),)
    )
    ratios = [-lp / n ** 2 for n, lp in zip((2, 3, 4, 5), log_ps)]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    ok = inside and increasing
    _report(9, ok,
            f"log P = {[f'{v:.1f}' for v in log_ps]}, fitted c {fitted:.2f}, "
            f"all inside envelope: {inside}, -log P / n^2 = "
            f"{[f'{r:.2f}' for r in ratios]} strictly increasing: {increasing} "
            f"[{time.perf_counter() - t0:.0f}s]")


def test_criterion_10_recursion_identities():
    t0 = time.perf_counter()
    beta, c1, c2 = 2.0, 1.5, 0.5
    n0, f0 = 1, 1.0

    # closed form for the lower iterate, summed with fsum for stability
    def closed(n: int) -> float:
        h = math.fsum(1.0 / j for j in range(1, n + 2))
        h0 = math.fsum(1.0 / j for j in range(1, n0 + 2))
        cc = f0 / (n0 + 1.0) - beta / 2.0 * n0 - (c1 - beta / 2.0) * h0
        return (n + 1.0) * (beta / 2.0 * n + (c1 - beta / 2.0) * h + cc)

    state = RecursionState(n0=n0, f0=f0)
    worst = 0.0
    for n in (2, 10, 100, 1000, 10000):
        f = lower_recursion(n, state, beta, c1)
        worst = max(worst, abs(f - closed(n)) / closed(n))
    ok_lower = worst <= 1e-9

    state_up = RecursionState(n0=n0, f0=f0)
    fs = [f0] + [upper_recursion(n, state_up, beta, c2) for n in range(2, 10001)]

    def fit_deficit(limit: int) -> float:
        return max(
            (beta / 2.0 * n * n - fs[n - 1]) / (n * math.log(n + 1.0))
            for n in range(n0, limit + 1)
        )

    c_full = fit_deficit(10000)
    c_half = fit_deficit(5000)
    ok_upper = math.isfinite(c_full) and abs(c_full - c_half) <= 0.1 * abs(c_full)
    ok = ok_lower and ok_upper
    _report(10, ok,
            f"lower iterate vs closed form rel {worst:.1e} <= 1e-9 up to n=1e4; "
            f"upper deficit constant {c_full:.3f} (half-range {c_half:.3f}, "
            f"agree to 10%) [{time.perf_counter() - t0:.1f}s]")


def test_criterion_11_window_floor():
    t0 = time.perf_counter()
    lam, a = 2.0, 4.0
    k = elliptic_k(-a)
    hi = 4.0 * k * (1.0 + 5.0 / (lam * math.sqrt(a))) / lam
    cfg = SimConfig(step=default_step(lam, a), t_max=1.5 * hi, seed=1100)
    est = window_probability(lam, a, 2000, cfg, _stream(1100))
    floor = brownian_sup_lower_bound(math.sqrt(k) / 40.0)
    ok = est.value >= floor - 3.0 * est.stderr
    _report(11, ok,
            f"window probability {est.value:.4f} >= floor {floor:.4f} - 3se "
            f"[{time.perf_counter() - t0:.0f}s]")


def test_criterion_12_cli_worker_determinism():
    t0 = time.perf_counter()
    exe = shutil.which("sinebeta")
    base = [exe] if exe else [sys.executable, "-m", "sinebeta.cli"]

    def rows(cmd: list[str]) -> list[str]:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, proc.stderr
        return [ln for ln in proc.stdout.splitlines() if not ln.startswith("#")]

    ok = True
    details = []
    for argv in (
        ["overcrowding", "--method", "direct", "--lambda", "1.0,2.0,3.0",
         "--n", "1,2", "--samples", "400", "--seed", "7"],
        ["sample-counting", "--lambda", "0.5,1.0,1.5,2.0", "--samples", "200",
         "--seed", "11"],
    ):
        r1 = rows(base + argv + ["--workers", "1"])
        r8 = rows(base + argv + ["--workers", "8"])
        same = r1 == r8
        ok = ok and same
        details.append(f"{argv[0]}: {len(r1) - 1} rows byte-identical: {same}")
    _report(12, ok, "; ".join(details) + f" [{time.perf_counter() - t0:.0f}s]")
