"""Acceptance gate.

Every test prints one line ``CRITERION <n> PASS|FAIL: <measurements>`` to the
terminal (outside pytest's capture) and then asserts the criterion.  Run with

    pytest tests/test_acceptance.py -v
"""

import numpy as np
import pytest

from turbodyn.channel import approximate_snr, sample_realization, scale_to_gamma, transmit
from turbodyn.codec import TurboCodeConfig, turbo_encode
from turbodyn.decoder import StopReason, decode, digest
from turbodyn.dynamics import MotionKind, classify_motion, frange, sweep_gamma
from turbodyn.experiments import build_config, cmd_simulate, run_blocks, stopping_report
from turbodyn.siso import bcjr_extrinsic, build_trellis, map_oracle_extrinsic
from turbodyn.stopping import (
    Action,
    StoppingPolicy,
    candidate_points,
    consult,
    detect_zcrease,
    genie_best_iteration,
    zcrease_spread,
)

# Recorded noise-realization seeds for the three-region sweep.
REGION_SEEDS = (1, 2, 3, 4, 5)
# Waterfall SNR for the Z-crease check: inside the middle region of
# realization 2 (labels aperiodic / periodic:6 between -0.18 and 0.04 dB).
WATERFALL_GAMMA_DB = 0.0
# Stopping benchmark operating point; fixed-cap BER is ~2e-5 here.
STOPPING_GAMMA_DB = 1.2
STOPPING_BLOCKS = 2000


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def test_criterion_1_oracle_equivalence(capsys):
    rng = np.random.default_rng(20240601)
    worst = {}
    for k in (4, 8, 10, 12):
        cfg = TurboCodeConfig(k=k)
        t = build_trellis(cfg)
        dev = 0.0
        for _ in range(100):
            ls, lp = rng.normal(0.0, 2.0, (2, k))
            la = rng.normal(0.0, 1.0, k)
            a = bcjr_extrinsic(ls, lp, la, t, saturation=None)
            b = map_oracle_extrinsic(ls, lp, la, cfg)
            dev = max(dev, float(np.max(np.abs(a - b))))
        worst[k] = dev
    ok = all(v <= 1e-9 for v in worst.values())
    report(capsys, 1, ok, "max |bcjr - oracle| per k: " + ", ".join(f"k={k}: {v:.2e}" for k, v in worst.items()))


def test_criterion_2_snr_round_trip(capsys):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        u = sample_realization(int(rng.integers(0, 2**63)), int(rng.integers(4, 2048)))
        g = float(rng.uniform(-20.0, 40.0))
        worst = max(worst, abs(approximate_snr(scale_to_gamma(u, g)) - g))
    z = scale_to_gamma(sample_realization(1, 1024), 0.0)
    energy = float(np.dot(z, z))
    ok = worst <= 1e-9 and abs(energy - 4608.0) <= 1e-9 * 4608.0
    report(capsys, 2, ok, f"max round-trip error {worst:.2e} dB; |z|^2 at 0 dB, k=1024 = {energy!r}")


def test_criterion_3_geometric_uniformity(capsys):
    k = 256
    cfg = TurboCodeConfig(k=k)
    rng = np.random.default_rng(33)
    mismatched = 0
    halves = 0
    for pair in range(20):
        bits = rng.integers(0, 2, k).astype(np.uint8)
        cw = turbo_encode(bits, cfg).bits()
        g = float(rng.uniform(-1.0, 2.0))
        z = scale_to_gamma(sample_realization(int(rng.integers(0, 2**63)), k), g, k)
        pol = StoppingPolicy.disabled(64)
        t1 = decode(transmit(cw, z, g), cfg, pol, bits)
        t0 = decode(
            transmit(np.zeros(3 * k, dtype=np.uint8), z * (1.0 - 2.0 * cw), g),
            cfg, pol, np.zeros(k, dtype=np.uint8),
        )
        halves += len(t1.stats)
        mismatched += t1.errors != t0.errors
    report(capsys, 3, mismatched == 0, f"{20 - mismatched}/20 pairs identical over {halves} half-iterations")


def _region_verdict(res):
    low, mid, high = res.regions()
    labels = res.labels
    low_ok = bool(low) and all((labels[i].tail_errors or 0) > 0 for i in low)
    high_ok = bool(high) and all(labels[i].tail_errors == 0 for i in high)
    mid_ok = bool(mid) and any(labels[i].kind is not MotionKind.FIXED_POINT for i in mid)
    return low_ok and high_ok and mid_ok, f"{len(low)}/{len(mid)}/{len(high)}"


@pytest.mark.slow
def test_criterion_4_three_regions(capsys):
    grid = frange(0.5, 1.5, 0.01)
    cfg = TurboCodeConfig(k=1024)
    verdicts = {}
    for seed in REGION_SEEDS:
        res = sweep_gamma(sample_realization(seed, 1024), grid, cfg, cap=1000)
        verdicts[seed] = _region_verdict(res)
    ok = len(verdicts) >= 5 and all(v[0] for v in verdicts.values())
    detail = "low/mid/high points per seed on 0.5..1.5 dB: " + ", ".join(
        f"seed {s}: {v[1]} {'ok' if v[0] else 'no'}" for s, v in verdicts.items()
    )
    report(capsys, 4, ok, detail)


@pytest.mark.slow
def test_criterion_5_zcrease_exists(capsys):
    cfg = build_config({"k": 1024, "gamma_db": WATERFALL_GAMMA_DB, "block_count": 100, "max_half_iterations": 64, "burn_in": 10})
    results = run_blocks(cfg)
    spreads = [zcrease_spread(r.cap_trace, 10) for r in results]
    earlier = 0
    for r in results:
        n, e = genie_best_iteration(r.cap_trace)
        earlier += n < r.cap_trace.stop_half_iteration and e < r.cap_trace.stats[-1].errors
    wide = sum(s >= 10 for s in spreads)
    ok = wide >= 1 and earlier >= 1
    report(
        capsys, 5, ok,
        f"gamma={WATERFALL_GAMMA_DB} dB: {wide}/100 blocks with spread >= 10 (max {max(spreads)}), "
        f"{earlier}/100 with an earlier strictly better genie point",
    )


@pytest.fixture(scope="module")
def stopping_run():
    cfg = build_config({"k": 1024, "gamma_db": STOPPING_GAMMA_DB, "block_count": STOPPING_BLOCKS, "max_half_iterations": 32})
    results = run_blocks(cfg)
    return cfg, results, stopping_report(cfg, results)


@pytest.mark.slow
def test_criterion_6_stopping_benefit(capsys, stopping_run):
    _, _, rep = stopping_run
    cap_ber, pol_ber = rep["cap_ber"], rep["policy_ber"]
    reduction = 1.0 - rep["policy_avg_half_iterations"] / rep["cap_avg_half_iterations"]
    degradation = (pol_ber - cap_ber) / cap_ber if cap_ber > 0 else (0.0 if pol_ber == 0 else float("inf"))
    fired, fine = rep["traceback_fired"], rep["traceback_not_worse"]
    share = fine / fired if fired else 1.0
    ok = cap_ber <= 1e-3 and reduction >= 0.30 and degradation <= 0.05 and share >= 0.80
    report(
        capsys, 6, ok,
        f"gamma={STOPPING_GAMMA_DB} dB, {rep['blocks']} blocks: cap BER {cap_ber:.3e}, policy BER {pol_ber:.3e} "
        f"({degradation:+.1%}), half-iterations {rep['policy_avg_half_iterations']:.2f} vs 32 (-{reduction:.1%}), "
        f"traceback not worse in {fine}/{fired} fired cases",
    )


@pytest.mark.slow
def test_criterion_7_stopping_semantics(capsys, stopping_run):
    checks = []

    def stats(xs, mins=None):
        mins = mins or [0.0] * len(xs)
        return [type("S", (), {"n": i, "mean_abs": x, "min_abs": m}) for i, (x, m) in enumerate(zip(xs, mins))]

    checks.append(candidate_points([1, 3, 2, 4, 1]) == [1, 3])
    checks.append(candidate_points([1, 2, 3, 4, 5]) == [])
    xs = [1, 5, 2, 4, 3]
    checks.append([xs[i] for i in candidate_points(xs)] == [5, 4])
    checks.append(detect_zcrease((5, 4)) == 1)
    checks.append(detect_zcrease((1, 2, 2, 3)) is None)
    checks.append(detect_zcrease((3, 3)) is None)
    pol = StoppingPolicy()
    mins = [0.0] * 7 + [2 * pol.theta_min]
    d = consult(pol, stats(list(range(8)), mins))
    checks.append(d.action is Action.STOP_CONVERGED and len(mins) - 1 == 7)
    checks.append(consult(pol, stats([1, 3, 2, 4, 1, 2])).action is Action.CONTINUE)
    d = consult(pol, stats([1, 5, 2, 4, 1]))
    checks.append(d.action is Action.STOP_TRACEBACK and d.traceback_to == 1)
    checks.append(genie_best_iteration([10, 4, 7, 4]) == (1, 4))
    checks.append(genie_best_iteration([6, 3, 1, 0, 0, 0]) == (3, 0))
    checks.append(genie_best_iteration([9, 7, 4, 2]) == (3, 2))
    checks.append(zcrease_spread([100, 80, 120, 90], 0) == 40)
    checks.append(zcrease_spread([5, 2, 0, 0, 0], 2) == 0)

    _, results, _ = stopping_run
    fired = [r for r in results if r.trace.stop_reason is StopReason.ZCREASE_TRACEBACK]
    matched = sum(
        digest(r.trace.final_decisions) == r.trace.stats[r.trace.decision_half_iteration].decisions_digest
        for r in fired
    )
    ok = all(checks) and matched == len(fired)
    report(capsys, 7, ok, f"{sum(checks)}/{len(checks)} unit examples; traceback digest match {matched}/{len(fired)}")


def test_criterion_8_motion_calibration(capsys):
    rng = np.random.default_rng(8)
    n = 320
    cases = {"constant": (np.full(n, 12.5), MotionKind.FIXED_POINT, None)}
    for p in (2, 3, 5):
        vals = 10.0 + rng.permutation(p) * 0.4
        cases[f"period-{p}"] = (np.resize(vals, n), MotionKind.PERIODIC, p)
    # period 10 as a doubled period-5 orbit: alternate copies split by 5 tolerances
    five = np.resize(10.0 + rng.permutation(5) * 0.4, n)
    split = 5 * 1e-3 * 10.8 * (-1.0) ** (np.arange(n) // 5)
    cases["period-10"] = (five + split, MotionKind.PERIODIC, 10)
    x = np.empty(n)
    x[0] = 0.3
    for i in range(1, n):
        x[i] = 3.99 * x[i - 1] * (1.0 - x[i - 1])
    cases["logistic"] = (x + 5.0, MotionKind.APERIODIC, None)

    got = {}
    for name, (seq, kind, period) in cases.items():
        lab = classify_motion(seq, tail_errors=0)
        got[name] = (lab.kind is kind and lab.period == period, lab.tag)
    ok = all(v[0] for v in got.values())
    report(capsys, 8, ok, ", ".join(f"{name} -> {tag}" for name, (_, tag) in got.items()))


@pytest.mark.slow
def test_criterion_9_determinism(capsys, tmp_path):
    runs = {}
    for name, workers in (("first", 1), ("second", 1), ("pool", 8)):
        out = tmp_path / name
        cfg = build_config({"k": 1024, "gamma_db": 1.0, "block_count": 100, "master_seed": 1, "workers": workers, "output_dir": str(out)})
        cmd_simulate(cfg)
        runs[name] = {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*.csv"))}
    same_rerun = runs["first"] == runs["second"]
    same_pool = runs["first"] == runs["pool"]
    ok = same_rerun and same_pool and len(runs["first"]) == 102
    report(
        capsys, 9, ok,
        f"{len(runs['first'])} CSV files; rerun identical: {same_rerun}; workers 1 vs 8 identical: {same_pool}",
    )


@pytest.mark.slow
def test_waterfall_band_regression():
    """Recorded sweep over the band where this code's transition lies.

    Not an acceptance criterion: pins the three-region structure observed for
    realization 2 on -0.3..0.2 dB.
    """
    res = sweep_gamma(sample_realization(2, 1024), frange(-0.3, 0.2, 0.02), TurboCodeConfig(k=1024))
    ok, counts = _region_verdict(res)
    assert ok, counts
    tags = {lab.tag for lab in res.labels}
    assert "periodic:6" in tags
    assert res.gamma1_hat == -0.2 and res.gamma2_hat == 0.06
