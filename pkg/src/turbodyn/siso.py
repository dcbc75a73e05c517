"""Log-MAP BCJR soft-in/soft-out decoding of one RSC constituent.

LLRs follow ``log P(b=0) / P(b=1)``.  The branch metric for input ``u`` and
parity ``p`` is ``((1-2u)(L_sys + L_apriori) + (1-2p) L_par) / 2``, which is
odd under the codeword translation used by the geometric-uniformity check, and
every reduction over states is order-independent (two-term ``max*`` or a
sorted fold).  Decoding ``c`` with noise ``z`` and the all-zero word with the
sign-adjusted noise therefore produce bit-identical magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .codec import TurboCodeConfig, rsc_encode, rsc_step

ORACLE_MAX_K = 14


class OracleTooLargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TrellisTables:
    """``next_state[s, u]``, ``output_bit[s, u]`` (parity), and the two
    ``(prev_state, prev_input)`` branches entering each state."""

    next_state: np.ndarray
    output_bit: np.ndarray
    prev_state: np.ndarray
    prev_input: np.ndarray

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]


@lru_cache(maxsize=32)
def _tables(feedback_poly: int, feedforward_poly: int, memory: int) -> TrellisTables:
    n = 1 << memory
    nxt = np.empty((n, 2), dtype=np.int64)
    out = np.empty((n, 2), dtype=np.int64)
    prev_state = np.full((n, 2), -1, dtype=np.int64)
    prev_input = np.full((n, 2), -1, dtype=np.int64)
    fill = np.zeros(n, dtype=np.int64)
    for s in range(n):
        for u in (0, 1):
            ns, p = rsc_step(s, u, feedback_poly, feedforward_poly, memory)
            nxt[s, u] = ns
            out[s, u] = p
            if fill[ns] >= 2:
                raise ValueError(f"state {ns} has more than two predecessors")
            prev_state[ns, fill[ns]] = s
            prev_input[ns, fill[ns]] = u
            fill[ns] += 1
    if np.any(fill != 2):
        raise ValueError("every trellis state needs exactly two predecessors")
    for a in (nxt, out, prev_state, prev_input):
        a.setflags(write=False)
    return TrellisTables(nxt, out, prev_state, prev_input)


def build_trellis(config: TurboCodeConfig) -> TrellisTables:
    return _tables(config.feedback_poly, config.feedforward_poly, config.memory)


@numba.njit(cache=True, inline="always")
def _max_star(a, b, max_log):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    m = a if a > b else b
    if max_log:
        return m
    return m + np.log1p(np.exp(-abs(a - b)))


@numba.njit(cache=True)
def _sorted_fold(v, max_log):
    # insertion sort, then fold ascending: result depends only on the multiset
    n = v.shape[0]
    for i in range(1, n):
        x = v[i]
        j = i - 1
        while j >= 0 and v[j] > x:
            v[j + 1] = v[j]
            j -= 1
        v[j + 1] = x
    acc = v[0]
    for i in range(1, n):
        acc = _max_star(acc, v[i], max_log)
    return acc


@numba.njit(cache=True)
def _bcjr_posterior(sys_llr, par_llr, apriori, next_state, parity, prev_state, prev_input, max_log, normalize):
    k = sys_llr.shape[0]
    S = next_state.shape[0]
    half_sys = 0.5 * (sys_llr + apriori)
    half_par = 0.5 * par_llr

    alpha = np.empty((k + 1, S))
    alpha[0, :] = -np.inf
    alpha[0, 0] = 0.0
    for t in range(k):
        a = half_sys[t]
        b = half_par[t]
        top = -np.inf
        for ns in range(S):
            s0 = prev_state[ns, 0]
            u0 = prev_input[ns, 0]
            s1 = prev_state[ns, 1]
            u1 = prev_input[ns, 1]
            g0 = (a if u0 == 0 else -a) + (b if parity[s0, u0] == 0 else -b)
            g1 = (a if u1 == 0 else -a) + (b if parity[s1, u1] == 0 else -b)
            v = _max_star(alpha[t, s0] + g0, alpha[t, s1] + g1, max_log)
            alpha[t + 1, ns] = v
            if v > top:
                top = v
        if normalize:
            for ns in range(S):
                alpha[t + 1, ns] -= top

    beta = np.empty((k + 1, S))
    beta[k, :] = 0.0
    for t in range(k - 1, -1, -1):
        a = half_sys[t]
        b = half_par[t]
        top = -np.inf
        for s in range(S):
            n0 = next_state[s, 0]
            n1 = next_state[s, 1]
            g0 = a + (b if parity[s, 0] == 0 else -b)
            g1 = -a + (b if parity[s, 1] == 0 else -b)
            v = _max_star(g0 + beta[t + 1, n0], g1 + beta[t + 1, n1], max_log)
            beta[t, s] = v
            if v > top:
                top = v
        if normalize:
            for s in range(S):
                beta[t, s] -= top

    post = np.empty(k)
    t0 = np.empty(S)
    t1 = np.empty(S)
    for t in range(k):
        a = half_sys[t]
        b = half_par[t]
        for s in range(S):
            g0 = a + (b if parity[s, 0] == 0 else -b)
            g1 = -a + (b if parity[s, 1] == 0 else -b)
            t0[s] = alpha[t, s] + g0 + beta[t + 1, next_state[s, 0]]
            t1[s] = alpha[t, s] + g1 + beta[t + 1, next_state[s, 1]]
        post[t] = _sorted_fold(t0, max_log) - _sorted_fold(t1, max_log)
    return post


def _check_inputs(*arrays) -> list[np.ndarray]:
    out = [np.ascontiguousarray(a, dtype=np.float64) for a in arrays]
    n = out[0].shape
    for a in out:
        if a.ndim != 1 or a.shape != n:
            raise ValueError("LLR inputs must be 1-D and of equal length")
        if not np.all(np.isfinite(a)):
            raise ValueError("LLR inputs must be finite")
    return out


def saturate(x: np.ndarray, limit: float) -> tuple[np.ndarray, int]:
    clipped = int(np.count_nonzero(np.abs(x) > limit))
    if clipped:
        x = np.clip(x, -limit, limit)
    return x, clipped


def bcjr_posterior(sys_llr, par_llr, apriori, trellis: TrellisTables, *, max_log: bool = False, normalize: bool = True) -> np.ndarray:
    ls, lp, la = _check_inputs(sys_llr, par_llr, apriori)
    return _bcjr_posterior(
        ls, lp, la, trellis.next_state, trellis.output_bit, trellis.prev_state, trellis.prev_input, max_log, normalize
    )


def bcjr_extrinsic(
    sys_llr,
    par_llr,
    apriori,
    trellis: TrellisTables,
    *,
    saturation: float | None = 1e3,
    max_log: bool = False,
    normalize: bool = True,
) -> np.ndarray:
    """Extrinsic LLRs ``posterior - sys_llr - apriori``, clipped to ``saturation``.

    The encoder is assumed to start in state 0 and to end in any state.
    """
    ls, lp, la = _check_inputs(sys_llr, par_llr, apriori)
    post = _bcjr_posterior(
        ls, lp, la, trellis.next_state, trellis.output_bit, trellis.prev_state, trellis.prev_input, max_log, normalize
    )
    ext = post - ls - la
    if saturation is not None:
        ext, _ = saturate(ext, saturation)
    return ext


def _all_blocks(k: int) -> np.ndarray:
    idx = np.arange(1 << k, dtype=np.int64)
    return ((idx[:, None] >> np.arange(k)) & 1).astype(np.uint8)


def map_oracle_extrinsic(sys_llr, par_llr, apriori, config: TurboCodeConfig, *, saturation: float | None = None) -> np.ndarray:
    """Exact per-bit MAP by enumerating all ``2**k`` input blocks."""
    ls, lp, la = _check_inputs(sys_llr, par_llr, apriori)
    k = len(ls)
    if k > ORACLE_MAX_K:
        raise OracleTooLargeError(f"oracle enumeration refused for k={k} > {ORACLE_MAX_K}")
    u = _all_blocks(k)
    p = rsc_encode(u, config)
    # log-probability of each block up to a common constant
    logp = 0.5 * ((1.0 - 2.0 * u) @ (ls + la) + (1.0 - 2.0 * p) @ lp)
    post = np.empty(k)
    for i in range(k):
        zero = u[:, i] == 0
        post[i] = np.logaddexp.reduce(logp[zero]) - np.logaddexp.reduce(logp[~zero])
    ext = post - ls - la
    if saturation is not None:
        ext, _ = saturate(ext, saturation)
    return ext
