"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Reference deployment: 20 m waveguide 3 m up, 28 GHz, 0.1 dB/m, n_eff 1.4,
UE 1 at (3, -1), UE 2 at (18, 3), noise -90 dBm per real dimension.
"""

import math
import time

import numpy as np
import pytest

from pinchnoma import (
    DLJointOptimizer,
    DlLinkConfig,
    EnvelopeSpec,
    SampledCurve,
    SimSpec,
    SystemGeometry,
    ULPositionOptimizer,
    UlLinkConfig,
    ber1,
    ber2_shared_noise,
    channel_pair,
    dl_ber,
    dl_cost,
    generate_q_coefficients,
    moving_min,
    noise_sigma,
    residual_prob,
    s1hat_detection_prob,
    simulate_dl,
    simulate_ul,
    ul_bers,
    ul_cost,
)
from pinchnoma.dl_ber import amplitudes, ber_from_magnitude
from pinchnoma.ul_ber import QPSK, RESIDUALS

from conftest import ACCEPTANCE_LINES
from oracles import oracle_conditional

GEOM = SystemGeometry()
SIGMA = noise_sigma(-90.0)
UL_POWERS = [-20, -15, -10, -5, 0, 5, 10]
DL_POWERS = [0, 5, 10, 15, 20, 25, 30]
N_SYMBOLS = 10**6
SEED = 20250101


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def watt(dbm):
    return 10 ** ((dbm - 30) / 10)


def ul_link(p_dbm):
    return UlLinkConfig(watt(p_dbm), watt(p_dbm), SIGMA)


def dl_link(p_dbm, alpha=0.9):
    return DlLinkConfig(watt(p_dbm), SIGMA, 4, 16, alpha)


def z_score(p_hat, p, n_bits):
    se = math.sqrt(max(p * (1 - p), 1e-300) / n_bits)
    return abs(p_hat - p) / se


@pytest.fixture(scope="module")
def ul_optima():
    return {p: ULPositionOptimizer().fit(GEOM, ul_link(p)) for p in UL_POWERS}


@pytest.fixture(scope="module")
def dl_optima():
    out = {}
    for p in DL_POWERS:
        joint = DLJointOptimizer(seed=SEED).fit(GEOM, dl_link(p))
        equal = DLJointOptimizer(seed=SEED, alpha=0.5).fit(GEOM, dl_link(p))
        out[p] = (joint, equal)
    return out


def test_criterion_1_ul_analytic_matches_simulation(ul_optima):
    t0 = time.perf_counter()
    worst = (0.0, None)
    fails = []
    diag_worst = 0.0
    row = 0
    for p in UL_POWERS:
        cfg = ul_link(p)
        for name, x in (("optimized", ul_optima[p].x_star_), ("x=10.5", 10.5), ("x=3", 3.0)):
            h1, h2 = (complex(h) for h in channel_pair(GEOM, x))
            b1, b2 = (float(b) for b in ul_bers(x, GEOM, cfg))
            sim = simulate_ul(SimSpec(N_SYMBOLS, seed=SEED + row), h1, h2, cfg)
            row += 1
            for k, (p_an, p_sim) in enumerate(((b1, sim.ber[0]), (b2, sim.ber[1])), start=1):
                z = z_score(p_sim, p_an, 2 * N_SYMBOLS)
                if z > worst[0]:
                    worst = (z, (p, name, k))
                if z > 3:
                    fails.append(f"{p:+d}dBm/{name}/UE{k} z={z:.1f}")
            diag_worst = max(diag_worst, z_score(sim.ber[1], ber2_shared_noise(h1, h2, cfg), 2 * N_SYMBOLS))
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 300
    detail = (f"{len(UL_POWERS)} powers x 3 placements, 1e6 symbols, worst |z|={worst[0]:.1f} at "
              f"{worst[1]}, {elapsed:.0f}s")
    if fails:
        detail += f"; {len(fails)} points beyond 3 SE: " + ", ".join(fails)
    report(1, ok, detail)
    # diagnostic, not part of the criterion: UE 2 against the exact reused-noise receiver
    ACCEPTANCE_LINES.append(
        f"  note: UE 2 simulation vs exact reused-noise SIC receiver (ber2_shared_noise): "
        f"worst |z|={diag_worst:.1f}"
    )
    assert ok, detail


def test_criterion_2_dl_analytic_matches_simulation(dl_optima):
    worst = (0.0, None)
    fails = []
    outliers = []
    row = 0
    for p in DL_POWERS:
        joint, equal = dl_optima[p]
        variants = (
            ("optimized", joint.x_star_, joint.alpha_star_),
            ("x=10,a=0.9", 10.0, 0.9),
            ("a=0.5", equal.x_star_, 0.5),
        )
        for name, x, alpha in variants:
            cfg = dl_link(p, alpha)
            h1, h2 = (complex(h) for h in channel_pair(GEOM, x))
            sim = simulate_dl(SimSpec(N_SYMBOLS, seed=SEED + 1000 + row), h1, h2, cfg)
            row += 1
            for k, bits in ((1, 2), (2, 4)):
                z = z_score(sim.ber[k - 1], dl_ber(k, x, GEOM, cfg), bits * N_SYMBOLS)
                if z > worst[0]:
                    worst = (z, (p, name, k))
                if z > 3:
                    fails.append(f"{p}dBm/{name}/UE{k} z={z:.1f}")
                    if (p, name, x, alpha) not in outliers:
                        outliers.append((p, name, x, alpha))
    ok = not fails
    detail = f"{len(DL_POWERS)} powers x 3 variants, worst |z|={worst[0]:.1f} at {worst[1]}"
    if fails:
        detail += "; beyond 3 SE: " + ", ".join(fails)
    report(2, ok, detail)
    # diagnostic, not part of the criterion: bit errors within a symbol are
    # correlated when noise is negligible, so re-score outliers with a
    # batch-means standard error over 20 independent seeds
    for p, name, x, alpha in outliers:
        cfg = dl_link(p, alpha)
        h1, h2 = (complex(h) for h in channel_pair(GEOM, x))
        batches = np.array([simulate_dl(SimSpec(N_SYMBOLS // 20, seed=SEED + 5000 + b), h1, h2, cfg).ber
                            for b in range(20)])
        mean = batches.mean(axis=0)
        se = batches.std(axis=0, ddof=1) / math.sqrt(len(batches))
        zs = [abs(mean[k] - dl_ber(k + 1, x, GEOM, cfg)) / se[k] for k in (0, 1)]
        ACCEPTANCE_LINES.append(
            f"  note: {p}dBm/{name}: batch-means |z| UE1={zs[0]:.1f} UE2={zs[1]:.1f}, "
            f"batch SE / binomial SE = {se[1] / math.sqrt(mean[1] * (1 - mean[1]) / (4 * N_SYMBOLS)):.1f}"
        )
    assert ok, detail


def test_criterion_3_ul_error_floor():
    powers = [-20, -10, 0, 10, 20, 30]
    mid, opt = [], []
    for p in powers:
        cfg = ul_link(p)
        b1, b2 = ul_bers(10.5, GEOM, cfg)
        mid.append(10 * math.log10((b1 + b2) / 2))
        est = ULPositionOptimizer().fit(GEOM, cfg)
        opt.append(est.cost_ - 10 * math.log10(2))
    drop_mid = -np.diff(mid)
    drop_opt = -np.diff(opt)
    start = None
    for i in range(len(drop_mid)):
        if np.all(drop_mid[i:] < 0.5) and np.all(drop_opt[i:] > 5.0):
            start = i
            break
    ok = start is not None
    detail = (f"drop per +10 dB at x=10.5: {np.round(drop_mid, 2).tolist()} dB; "
              f"at x*: {np.round(drop_opt, 1).tolist()} dB")
    if ok:
        detail += f"; floor holds from {powers[start]} dBm"
    report(3, ok, detail)
    assert ok, detail


def test_criterion_4_dl_equal_power_floor():
    powers = [10, 20, 30, 40]
    bers = []
    for p in powers:
        est = DLJointOptimizer(seed=SEED, alpha=0.5).fit(GEOM, dl_link(p))
        cfg = dl_link(p, 0.5)
        bers.append([dl_ber(k, est.x_star_, GEOM, cfg) for k in (1, 2)])
    db = 10 * np.log10(np.array(bers))
    change = np.abs(np.diff(db, axis=0))
    # at high power (last step) at least one UE is flat
    ok = bool(np.min(change[-1]) < 0.1)
    detail = (f"per-UE |change| per +10 dB at alpha=0.5: "
              f"{np.round(change, 3).tolist()} dB (last step {powers[-2]}->{powers[-1]} dBm)")
    report(4, ok, detail)
    assert ok, detail


def test_criterion_5_optimizer_dominance(ul_optima, dl_optima):
    bad = []
    for p in UL_POWERS:
        cfg = ul_link(p)
        c = ul_optima[p].cost_
        for x in (3.0, 10.5):
            if not c <= ul_cost(x, GEOM, cfg):
                bad.append(f"UL {p}dBm vs x={x}")
    for p in DL_POWERS:
        joint, equal = dl_optima[p]
        cfg = dl_link(p)
        if not joint.cost_ <= dl_cost(10.0, 0.9, GEOM, cfg):
            bad.append(f"DL {p}dBm vs (10, 0.9)")
        if not joint.cost_ <= dl_cost(joint.x_star_, 0.5, GEOM, cfg):
            bad.append(f"DL {p}dBm vs (x*, 0.5)")
        if not joint.cost_ <= equal.cost_:
            bad.append(f"DL {p}dBm vs position-optimised alpha=0.5")
    ok = not bad
    report(5, ok, f"UL at {len(UL_POWERS)} powers, DL at {len(DL_POWERS)} powers"
           + ("" if ok else "; violated: " + ", ".join(bad)))
    assert ok


def test_criterion_6_placement_direction(ul_optima):
    xs = {p: ul_optima[p].x_star_ for p in UL_POWERS}
    ue1 = GEOM.ue[0][0]
    closer = all(abs(x - ue1) < abs(GEOM.midpoint - ue1) and x < GEOM.midpoint for x in xs.values())
    shift = abs(xs[UL_POWERS[0]] - ue1) < abs(xs[UL_POWERS[-1]] - ue1)
    ok = closer and shift
    report(6, ok, "x* by power: " + ", ".join(f"{p:+d}dBm->{x:.3f}" for p, x in xs.items()))
    assert ok


def test_criterion_7_normalisation():
    rng = np.random.default_rng(SEED)
    worst = {"residual": 0.0, "detection": 0.0, "weights": 0.0}
    for _ in range(1000):
        h1, h2 = rng.normal(size=2) + 1j * rng.normal(size=2)
        cfg = UlLinkConfig(rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0.01, 3))
        s2 = QPSK[rng.integers(4)]
        s1 = QPSK[rng.integers(4)]
        worst["residual"] = max(worst["residual"], abs(sum(
            residual_prob(r, s2, h1, h2, cfg) for r in RESIDUALS) - 1))
        worst["detection"] = max(worst["detection"], abs(sum(
            s1hat_detection_prob(c, s1, s2, h1, h2, cfg) for c in QPSK) - 1))
        orders = [(4, 4), (4, 16), (16, 4), (4, 64), (16, 16)][rng.integers(5)]
        dl = DlLinkConfig(1.0, 1.0, orders[0], orders[1], rng.uniform(0, 1))
        for ue in (1, 2):
            worst["weights"] = max(worst["weights"], abs(float(np.sum(generate_q_coefficients(dl, ue).c)) - 1))
    ok = all(v <= 1e-12 for v in worst.values())
    report(7, ok, "1000 random configs, max deviation " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_8_reductions():
    from scipy.special import ndtr

    rng = np.random.default_rng(SEED + 8)
    ul_dev = 0.0
    for _ in range(200):
        h1, h2 = rng.normal(size=2) + 1j * rng.normal(size=2)
        p1, sig = rng.uniform(0.01, 3), rng.uniform(0.05, 3)
        cfg = UlLinkConfig(p1, 0.0, sig)
        ul_dev = max(ul_dev, abs(ber1(h1, h2, cfg) - ndtr(-math.sqrt(p1) * abs(h1) / sig)))
    dl_dev = 0.0
    for sig in (0.05, 0.15, 0.4, 1.0):
        for alpha, ue in ((1.0, 1), (0.0, 2)):
            cfg = DlLinkConfig(1.0, sig, 4, 16, alpha)
            g1, g2 = amplitudes(alpha, cfg)
            oracle = np.mean(list(oracle_conditional(g1, g2, 2, 4, ue, sig).values()))
            dl_dev = max(dl_dev, abs(ber_from_magnitude(ue, 1.0, cfg) - oracle))
    ok = ul_dev <= 1e-12 and dl_dev <= 1e-10
    report(8, ok, f"UL P2=0 max dev {ul_dev:.1e} (tol 1e-12); DL alpha in {{0,1}} vs quadrature "
           f"max dev {dl_dev:.1e} (tol 1e-10)")
    assert ok


def test_criterion_9_envelope_suite():
    rng = np.random.default_rng(SEED + 9)
    failures = 0
    hand = moving_min(SampledCurve(1.0, np.array([5, 1, 4, 4, 4, 0, 9.0]), 6.0), EnvelopeSpec(1))
    hand_ok = hand.values.tolist() == [1, 1, 1, 4, 0, 0, 0]
    for _ in range(500):
        n = int(rng.integers(1, 400))
        c = SampledCurve(1.0, rng.normal(size=n) * rng.uniform(0.1, 100), float(max(n - 1, 1)))
        h = int(rng.integers(0, 40))
        extra = int(rng.integers(0, 40))
        once = moving_min(c, EnvelopeSpec(h)).values
        wider = moving_min(c, EnvelopeSpec(h + extra)).values
        twice = moving_min(SampledCurve(1.0, once, c.L), EnvelopeSpec(h)).values
        double = moving_min(c, EnvelopeSpec(2 * h)).values
        failures += not (np.all(once <= c.values) and np.all(wider <= once) and np.array_equal(twice, double))
    ok = hand_ok and failures == 0
    report(9, ok, f"hand vector {'exact' if hand_ok else 'WRONG'}; 500 random curves, {failures} property failures")
    assert ok


def test_criterion_10_dl_smooth_ul_ripples():
    xs = np.arange(0.0, 20.0 + 1e-9, 0.001)
    ul = ul_cost(xs, GEOM, ul_link(0.0))
    ul_jump = float(np.max(np.abs(np.diff(ul))))
    dl_jump = 0.0
    for alpha in (0.6, 0.75, 0.9):
        dl = dl_cost(xs, alpha, GEOM, dl_link(10.0))
        dl_jump = max(dl_jump, float(np.max(np.abs(np.diff(dl)))))
    ok = dl_jump < 0.1 and ul_jump > 3.0
    report(10, ok, f"1 mm grid: max |delta cost| DL {dl_jump:.4f} dB (< 0.1), UL at 0 dBm {ul_jump:.2f} dB (> 3)")
    assert ok
