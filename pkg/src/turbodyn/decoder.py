"""Iterative turbo decoder recorded half-iteration by half-iteration.

Half-iteration ``n`` (0-based) activates constituent decoder 1 when ``n`` is
even and decoder 2 when ``n`` is odd.  The message passed between them is the
latest extrinsic vector, kept in natural (deinterleaved) order.  The observed
state ``x`` is the mean magnitude of the a-posteriori LLR on the systematic
bits; at a fixed point of the iteration both decoders agree on it, whereas
their extrinsic vectors differ and would read as a spurious period-2 orbit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .channel import ChannelObservation, channel_llrs
from .codec import Interleaver, TurboCodeConfig, build_interleaver, check_block
from .siso import _bcjr_posterior, build_trellis, saturate
from .stopping import Action, StoppingMonitor, StoppingPolicy


class StopReason(str, Enum):
    CONVERGED = "converged"
    ZCREASE_TRACEBACK = "zcrease_traceback"
    ITERATION_CAP = "iteration_cap"


@dataclass(frozen=True)
class HalfIterStats:
    n: int
    mean_abs: float
    min_abs: float
    errors: int | None
    decisions_digest: str


@dataclass(eq=False)
class DecoderTrace:
    stats: list[HalfIterStats]
    final_decisions: np.ndarray
    stop_reason: StopReason
    # last half-iteration executed
    stop_half_iteration: int
    # half-iteration whose decisions are final
    decision_half_iteration: int
    candidate_log: list[tuple[int, float]] = field(default_factory=list)
    clipped: int = 0
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def half_iterations(self) -> int:
        return len(self.stats)

    @property
    def xs(self) -> np.ndarray:
        return np.array([st.mean_abs for st in self.stats])

    @property
    def errors(self) -> list[int | None]:
        return [st.errors for st in self.stats]


def hard_decisions(llr: np.ndarray) -> np.ndarray:
    # LLR exactly 0 decides bit 0
    return (llr < 0).astype(np.uint8)


def digest(decisions: np.ndarray) -> str:
    return hashlib.blake2b(np.packbits(decisions).tobytes(), digest_size=8).hexdigest()


def count_block_errors(decisions, truth) -> int:
    d = np.asarray(decisions)
    t = np.asarray(truth)
    if d.shape != t.shape:
        raise ValueError(f"length mismatch: {d.shape} vs {t.shape}")
    return int(np.count_nonzero(d != t))


class TurboIteration:
    """The map ``m -> f(m)`` of one half-iteration for a fixed observation."""

    def __init__(self, obs: ChannelObservation, config: TurboCodeConfig, interleaver: Interleaver | None = None):
        k = config.k
        if len(obs.s) != 3 * k:
            raise ValueError(f"observation length {len(obs.s)} != 3k = {3 * k}")
        self.config = config
        self.interleaver = interleaver or build_interleaver(config.interleaver_seed, k)
        self.trellis = build_trellis(config)
        llr = channel_llrs(obs)
        if not np.all(np.isfinite(llr)):
            raise ValueError("channel LLRs must be finite")
        self.sys = np.ascontiguousarray(llr[:k])
        self.par1 = np.ascontiguousarray(llr[k : 2 * k])
        self.par2 = np.ascontiguousarray(llr[2 * k :])
        self.sys_i = np.ascontiguousarray(self.interleaver.interleave(self.sys))

    def _siso(self, ls, lp, la):
        t = self.trellis
        post = _bcjr_posterior(
            ls, lp, la, t.next_state, t.output_bit, t.prev_state, t.prev_input, self.config.max_log, True
        )
        return saturate(post - ls - la, self.config.llr_saturation)

    def step(self, n: int, m: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        """Run half-iteration ``n`` with incoming message ``m``.

        Returns the new extrinsic message, the a-posteriori LLRs (both in
        natural order) and the number of clipped values.
        """
        if n % 2 == 0:
            ext, clipped = self._siso(self.sys, self.par1, m)
        else:
            ext_i, clipped = self._siso(self.sys_i, self.par2, np.ascontiguousarray(self.interleaver.interleave(m)))
            ext = self.interleaver.deinterleave(ext_i)
        return ext, self.sys + m + ext, clipped


def decode(
    obs: ChannelObservation,
    config: TurboCodeConfig,
    policy: StoppingPolicy,
    truth=None,
    *,
    interleaver: Interleaver | None = None,
    initial_message: np.ndarray | None = None,
    snapshot_at=(),
    shortcut: bool = True,
) -> DecoderTrace:
    """Decode one block, recording statistics after every half-iteration.

    With ``shortcut`` the loop stops calling the constituent decoders once the
    message vector repeats bit-for-bit at the same decoder parity; from then
    on the trajectory is exactly periodic and later statistics are copies.
    ``snapshot_at`` lists half-iterations whose outgoing message is kept in
    ``trace.snapshots``.
    """
    k = config.k
    it = TurboIteration(obs, config, interleaver)
    if truth is not None:
        truth = check_block(truth, k)
    m = np.zeros(k) if initial_message is None else np.array(initial_message, dtype=float)
    monitor = StoppingMonitor(policy)
    wanted = set(snapshot_at)
    snapshots: dict[int, np.ndarray] = {}

    stats: list[HalfIterStats] = []
    decisions_hist: list[np.ndarray] = []
    messages: list[np.ndarray] = []
    seen: dict[tuple[int, bytes], int] = {}
    cycle: tuple[int, int] | None = None  # (start, period)
    clipped_total = 0
    reason = StopReason.ITERATION_CAP
    final_from = None

    for n in range(policy.max_half_iterations):
        if cycle is None:
            m, post, clipped = it.step(n, m)
            clipped_total += clipped
            dec = hard_decisions(post)
            st = HalfIterStats(
                n=n,
                mean_abs=float(np.mean(np.abs(post))),
                min_abs=float(np.min(np.abs(post))),
                errors=None if truth is None else count_block_errors(dec, truth),
                decisions_digest=digest(dec),
            )
            if shortcut:
                key = (n % 2, hashlib.blake2b(m.tobytes(), digest_size=16).digest())
                j = seen.get(key)
                if j is not None and np.array_equal(messages[j], m):
                    cycle = (j, n - j)
                seen[key] = n
                messages.append(m)
        else:
            start, period = cycle
            # stats[start] saw the message before the cycle; copy from start+1..start+period
            src = start + 1 + (n - start - 1) % period
            st = HalfIterStats(n, stats[src].mean_abs, stats[src].min_abs, stats[src].errors, stats[src].decisions_digest)
            dec = decisions_hist[src]
            m = messages[src]
        stats.append(st)
        decisions_hist.append(dec)
        if n in wanted:
            snapshots[n] = m.copy()

        action = monitor.update(n, st.mean_abs, st.min_abs, dec)
        if action.action is Action.STOP_CONVERGED:
            reason = StopReason.CONVERGED
            break
        if action.action is Action.STOP_TRACEBACK:
            reason = StopReason.ZCREASE_TRACEBACK
            final_from = action.traceback_to
            break

    last = len(stats) - 1
    if reason is StopReason.ZCREASE_TRACEBACK:
        final = monitor.buffered
        decided_at = final_from
    else:
        final = decisions_hist[-1]
        decided_at = last
    return DecoderTrace(
        stats=stats,
        final_decisions=np.array(final, dtype=np.uint8),
        stop_reason=reason,
        stop_half_iteration=last,
        decision_half_iteration=decided_at,
        candidate_log=list(monitor.candidates),
        clipped=clipped_total,
        snapshots=snapshots,
    )


def perturbation_divergence(
    obs: ChannelObservation,
    config: TurboCodeConfig,
    message: np.ndarray,
    start: int,
    *,
    delta: float = 1e-6,
    steps: int = 50,
    interleaver: Interleaver | None = None,
) -> float:
    """Largest ``|x' - x|`` over ``steps`` half-iterations after adding
    ``delta`` to every component of the message entering half-iteration
    ``start``."""
    it = TurboIteration(obs, config, interleaver)
    a = np.array(message, dtype=float)
    b = a + delta
    worst = 0.0
    for n in range(start, start + steps):
        a, pa, _ = it.step(n, a)
        b, pb, _ = it.step(n, b)
        worst = max(worst, abs(float(np.mean(np.abs(pa))) - float(np.mean(np.abs(pb)))))
    return worst
