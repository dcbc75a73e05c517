"""Min-LLR / candidate-point stopping rule and a genie reference.

The decoder stops when either

1. the minimum a-posteriori LLR magnitude reaches ``theta_min`` (keep the
   current decisions), or
2. a local maximum ("candidate point") of the mean LLR magnitude is strictly
   lower than the candidate before it, a Z-crease; the decisions buffered at
   that previous candidate become final.

Candidates are confirmed online with one half-iteration of lag: a rise into
``x[i]`` followed by an optional plateau is confirmed when a strictly lower
value arrives.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np


class StoppingConfigError(ValueError):
    pass


class MissingTruthError(ValueError):
    pass


@dataclass(frozen=True)
class StoppingPolicy:
    theta_min: float = 10.0
    max_half_iterations: int = 64
    enabled: bool = True
    buffer_candidates: bool = True
    # success threshold on the mean magnitude; off unless set
    theta_mean: float | None = None

    def __post_init__(self):
        if not self.theta_min > 0:
            raise StoppingConfigError("theta_min must be positive")
        if self.max_half_iterations < 2:
            raise StoppingConfigError("max_half_iterations must be at least 2")
        if self.theta_mean is not None and not self.theta_mean > 0:
            raise StoppingConfigError("theta_mean must be positive when set")

    @classmethod
    def disabled(cls, max_half_iterations: int) -> "StoppingPolicy":
        return cls(max_half_iterations=max_half_iterations, enabled=False)


class Action(str, Enum):
    CONTINUE = "continue"
    STOP_CONVERGED = "stop_converged"
    STOP_TRACEBACK = "stop_traceback"


@dataclass(frozen=True)
class StopDecision:
    action: Action
    traceback_to: int | None = None


CONTINUE = StopDecision(Action.CONTINUE)


def candidate_points(xs: Sequence[float]) -> list[int]:
    """Indices of interior local maxima of ``xs``.

    ``i`` qualifies when ``xs[i-1] < xs[i]`` and the plateau starting at
    ``i`` is followed by a strictly lower value.
    """
    out = []
    pending = None
    for n in range(1, len(xs)):
        if xs[n] > xs[n - 1]:
            pending = n
        elif xs[n] < xs[n - 1]:
            if pending is not None:
                out.append(pending)
            pending = None
    return out


def detect_zcrease(candidate_values: Sequence[float]) -> int | None:
    for j in range(1, len(candidate_values)):
        if candidate_values[j] < candidate_values[j - 1]:
            return j
    return None


class StoppingMonitor:
    """Online form of :func:`consult`; one instance per decode call."""

    def __init__(self, policy: StoppingPolicy):
        self.policy = policy
        self.candidates: list[tuple[int, float]] = []
        self._prev_x: float | None = None
        self._pending: int | None = None
        self._pending_decisions = None
        self._candidate_decisions = None
        self._fired = False

    @property
    def buffered(self):
        """Hard decisions at the latest confirmed candidate."""
        return self._candidate_decisions

    def update(self, n: int, mean_abs: float, min_abs: float, decisions=None) -> StopDecision:
        policy = self.policy
        buffering = policy.enabled and policy.buffer_candidates
        zcrease_at = None

        x = mean_abs
        if self._prev_x is not None:
            if x > self._prev_x:
                self._pending = n
                if buffering:
                    self._pending_decisions = decisions
            elif x < self._prev_x and self._pending is not None:
                new = (self._pending, self._prev_x)
                if self.candidates and new[1] < self.candidates[-1][1] and not self._fired:
                    zcrease_at = self.candidates[-1][0]
                    self._fired = True
                else:
                    # the previous candidate's buffer is kept when a Z-crease fires
                    if buffering:
                        self._candidate_decisions = self._pending_decisions
                self.candidates.append(new)
                self._pending = None
                self._pending_decisions = None
        self._prev_x = x

        if not policy.enabled:
            return CONTINUE
        if min_abs >= policy.theta_min:
            return StopDecision(Action.STOP_CONVERGED)
        if policy.theta_mean is not None and mean_abs >= policy.theta_mean:
            return StopDecision(Action.STOP_CONVERGED)
        if zcrease_at is not None:
            if not policy.buffer_candidates:
                raise StoppingConfigError("Z-crease traceback requires buffer_candidates")
            return StopDecision(Action.STOP_TRACEBACK, traceback_to=zcrease_at)
        return CONTINUE


def consult(policy: StoppingPolicy, stats) -> StopDecision:
    """Decision after the last entry of ``stats``.

    ``stats`` is a prefix of a trace (objects with ``n``, ``mean_abs`` and
    ``min_abs``).  Pure: replaying a prefix reproduces the online decision.
    """
    if not stats:
        return CONTINUE
    monitor = StoppingMonitor(policy)
    decision = CONTINUE
    for st in stats:
        decision = monitor.update(st.n, st.mean_abs, st.min_abs)
        if decision.action is not Action.CONTINUE and st is not stats[-1]:
            # the decoder would already have stopped earlier in this prefix
            return decision
    return decision


def _errors(trace) -> list[int]:
    errs = [st.errors for st in trace.stats]
    if any(e is None for e in errs):
        raise MissingTruthError("trace has no error counts (decoded without truth)")
    return errs


def genie_best_iteration(trace) -> tuple[int, int]:
    """Earliest half-iteration attaining the minimum error count."""
    errs = _errors(trace) if hasattr(trace, "stats") else list(trace)
    best = int(np.argmin(errs))
    return best, int(errs[best])


def zcrease_spread(trace, burn_in: int = 0) -> int:
    errs = _errors(trace) if hasattr(trace, "stats") else list(trace)
    if len(errs) <= burn_in:
        raise ValueError(f"trace of length {len(errs)} does not extend past burn-in {burn_in}")
    tail = errs[burn_in:]
    return int(max(tail) - min(tail))
