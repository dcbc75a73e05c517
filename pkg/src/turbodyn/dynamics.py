"""One-dimensional view of decoder motion: wave, phase and bifurcation data.

The motion classifier works on the last ``window`` samples of the mean
LLR-magnitude sequence ``x``:

* range below ``eps_fp``                       -> fixed point
* ``max |x[n+p] - x[n]| < eps_p`` for a p >= 2 -> periodic with the smallest such p
* otherwise                                    -> aperiodic

Both tolerances default to ``1e-3`` times the tail mean.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .channel import NoiseRealization, scale_to_gamma, transmit
from .codec import TurboCodeConfig, build_interleaver
from .decoder import DecoderTrace, decode, perturbation_divergence
from .stopping import StoppingPolicy

DEFAULT_WINDOW = 64
DEFAULT_MAX_PERIOD = 32
DEFAULT_REL_EPS = 1e-3
DYNAMICS_CAP = 1000
BIFURCATION_SAMPLES = 100
SENSITIVITY_DELTA = 1e-6
SENSITIVITY_GAIN = 1e3
SENSITIVITY_STEPS = 50


class MotionKind(str, Enum):
    FIXED_POINT = "fixed_point"
    PERIODIC = "periodic"
    APERIODIC = "aperiodic"


@dataclass(frozen=True)
class MotionLabel:
    kind: MotionKind
    subkind: str | None = None  # "indecisive" / "unequivocal" for fixed points
    period: int | None = None
    sensitive: bool | None = None
    transient_length: int = 0
    tail_errors: int | None = None
    # best-period fit over the tail, relative to the tail mean
    best_period: int | None = None
    residual: float | None = None

    @property
    def tag(self) -> str:
        if self.kind is MotionKind.FIXED_POINT:
            return f"fixed_point:{self.subkind}" if self.subkind else "fixed_point"
        if self.kind is MotionKind.PERIODIC:
            return f"periodic:{self.period}"
        return "aperiodic:sensitive" if self.sensitive else "aperiodic"

    def describe(self) -> str:
        """Coarse motion name in the usual dynamical-systems vocabulary."""
        if self.kind is MotionKind.FIXED_POINT:
            name = f"{self.subkind} fixed point" if self.subkind else "fixed point"
            if self.transient_length > 4 * DEFAULT_WINDOW:
                name += " after a long transient"
            return name
        if self.kind is MotionKind.PERIODIC:
            return f"period-{self.period} orbit"
        if self.sensitive:
            return "chaos"
        return "quasi-periodic or limit cycle"


def mean_abs_llr(m) -> float:
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        raise ValueError("empty LLR vector")
    return float(np.mean(np.abs(m)))


def min_abs_llr(m) -> float:
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        raise ValueError("empty LLR vector")
    return float(np.min(np.abs(m)))


def _xs(trace) -> np.ndarray:
    if isinstance(trace, DecoderTrace):
        return trace.xs
    return np.asarray(trace, dtype=float)


def phase_points(trace) -> list[tuple[float, float]]:
    xs = _xs(trace)
    if len(xs) < 2:
        raise ValueError("phase trajectory needs at least two samples")
    return list(zip(xs[:-1].tolist(), xs[1:].tolist()))


def _lag_deviation(x: np.ndarray, p: int) -> np.ndarray:
    return np.abs(x[p:] - x[:-p])


def _first_holding(ok: np.ndarray) -> int:
    """Smallest i such that ``ok[i:]`` is all true (len(ok) if none)."""
    bad = np.flatnonzero(~ok)
    return int(bad[-1] + 1) if bad.size else 0


def classify_motion(
    trace,
    eps_fp: float | None = None,
    eps_p: float | None = None,
    window: int = DEFAULT_WINDOW,
    max_period: int = DEFAULT_MAX_PERIOD,
    probe: Callable[[int], bool] | None = None,
    tail_errors: int | None = None,
) -> MotionLabel:
    """Label the tail of a trace (or a plain sequence of x values).

    ``probe(start)`` is called for aperiodic tails only; it should report
    whether a tiny perturbation of the state at half-iteration ``start``
    is amplified (sensitivity to initial conditions).
    """
    xs = _xs(trace)
    if len(xs) < 2 * window:
        raise ValueError(f"trace of length {len(xs)} shorter than 2*window = {2 * window}")
    if tail_errors is None and isinstance(trace, DecoderTrace):
        tail_errors = trace.stats[-1].errors
    start = len(xs) - window
    tail = xs[start:]
    scale = float(np.mean(np.abs(tail)))
    eps_fp = DEFAULT_REL_EPS * scale if eps_fp is None else eps_fp
    eps_p = DEFAULT_REL_EPS * scale if eps_p is None else eps_p

    fits = {}
    for p in range(1, min(max_period, window - 1) + 1):
        fits[p] = float(np.max(_lag_deviation(tail, p)))
    best_p = min(range(2, len(fits) + 1), key=lambda p: fits[p]) if len(fits) > 1 else None
    residual = fits[best_p] / scale if best_p and scale > 0 else None

    if np.ptp(tail) < eps_fp:
        # suffix range below eps_fp, found from the running extremes
        hi = np.maximum.accumulate(xs[::-1])[::-1]
        lo = np.minimum.accumulate(xs[::-1])[::-1]
        transient = _first_holding(hi - lo < eps_fp)
        subkind = None if tail_errors is None else ("unequivocal" if tail_errors == 0 else "indecisive")
        return MotionLabel(
            MotionKind.FIXED_POINT,
            subkind=subkind,
            transient_length=transient,
            tail_errors=tail_errors,
            best_period=best_p,
            residual=residual,
        )

    for p in range(2, len(fits) + 1):
        if fits[p] < eps_p:
            transient = _first_holding(_lag_deviation(xs, p) < eps_p)
            return MotionLabel(
                MotionKind.PERIODIC,
                period=p,
                transient_length=transient,
                tail_errors=tail_errors,
                best_period=best_p,
                residual=residual,
            )

    inside = (xs >= tail.min()) & (xs <= tail.max())
    sensitive = bool(probe(start)) if probe is not None else None
    return MotionLabel(
        MotionKind.APERIODIC,
        sensitive=sensitive,
        transient_length=_first_holding(inside),
        tail_errors=tail_errors,
        best_period=best_p,
        residual=residual,
    )


@dataclass
class SweepPoint:
    gamma_db: float
    label: MotionLabel
    tail: np.ndarray
    errors_at_cap: int | None


@dataclass
class SweepResult:
    gamma_grid: list[float]
    points: list[SweepPoint]
    gamma1_hat: float | None
    gamma2_hat: float | None
    realization_seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def labels(self) -> list[MotionLabel]:
        return [p.label for p in self.points]

    def regions(self) -> tuple[list[int], list[int], list[int]]:
        """Grid indices of the low run, the middle and the high run."""
        return _regions(self.labels)


def _is_indecisive(lab: MotionLabel) -> bool:
    return lab.kind is MotionKind.FIXED_POINT and lab.subkind == "indecisive"


def _is_unequivocal(lab: MotionLabel) -> bool:
    return lab.kind is MotionKind.FIXED_POINT and lab.subkind == "unequivocal"


def _regions(labels: Sequence[MotionLabel]):
    n = len(labels)
    lo = 0
    while lo < n and _is_indecisive(labels[lo]):
        lo += 1
    hi = n
    while hi > lo and _is_unequivocal(labels[hi - 1]):
        hi -= 1
    return list(range(lo)), list(range(lo, hi)), list(range(hi, n))


def region_boundaries(grid: Sequence[float], labels: Sequence[MotionLabel]) -> tuple[float | None, float | None]:
    low, _, high = _regions(labels)
    g1 = grid[low[-1]] if low else None
    g2 = grid[high[0]] if high else None
    return g1, g2


def analyze_point(
    u: NoiseRealization,
    gamma_db: float,
    config: TurboCodeConfig,
    cap: int = DYNAMICS_CAP,
    window: int = DEFAULT_WINDOW,
    max_period: int = DEFAULT_MAX_PERIOD,
    sensitivity: bool = True,
) -> tuple[DecoderTrace, MotionLabel]:
    """Decode the all-zero codeword at one SNR and classify the motion."""
    k = config.k
    interleaver = build_interleaver(config.interleaver_seed, k)
    obs = transmit(np.zeros(3 * k, dtype=np.uint8), scale_to_gamma(u, gamma_db, k), gamma_db)
    start = cap - window
    trace = decode(
        obs, config, StoppingPolicy.disabled(cap), np.zeros(k, dtype=np.uint8),
        interleaver=interleaver, snapshot_at=(start - 1,),
    )

    def probe(s: int) -> bool:
        # the message entering half-iteration s left half-iteration s - 1
        msg = trace.snapshots[s - 1]
        div = perturbation_divergence(
            obs, config, msg, s, delta=SENSITIVITY_DELTA, steps=SENSITIVITY_STEPS, interleaver=interleaver
        )
        return div >= SENSITIVITY_GAIN * SENSITIVITY_DELTA

    label = classify_motion(trace, window=window, max_period=max_period, probe=probe if sensitivity else None)
    return trace, label


def _sweep_task(args):
    u, g, config, cap, window, max_period, sensitivity = args
    trace, label = analyze_point(u, g, config, cap, window, max_period, sensitivity)
    return SweepPoint(
        gamma_db=g,
        label=label,
        tail=trace.xs[-BIFURCATION_SAMPLES:].copy(),
        errors_at_cap=trace.stats[-1].errors,
    )


def sweep_gamma(
    u: NoiseRealization,
    grid: Sequence[float],
    config: TurboCodeConfig,
    cap: int = DYNAMICS_CAP,
    window: int = DEFAULT_WINDOW,
    max_period: int = DEFAULT_MAX_PERIOD,
    sensitivity: bool = True,
    workers: int = 1,
) -> SweepResult:
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty SNR grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("SNR grid must be strictly ascending")
    tasks = [(u, g, config, cap, window, max_period, sensitivity) for g in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_sweep_task, tasks))
    else:
        points = [_sweep_task(t) for t in tasks]
    g1, g2 = region_boundaries(grid, [p.label for p in points])
    return SweepResult(gamma_grid=grid, points=points, gamma1_hat=g1, gamma2_hat=g2, realization_seed=u.seed)


def frange(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive grid ``lo, lo+step, ..., hi`` rounded to the step's decimals."""
    if not step > 0:
        raise ValueError(f"grid step must be positive, got {step}")
    if hi < lo:
        raise ValueError(f"SNR grid must be ascending, got {lo}:{hi}")
    n = int(round((hi - lo) / step))
    decimals = max(0, -int(np.floor(np.log10(step))) + 2)
    return [round(lo + i * step, decimals) for i in range(n + 1)]
