"""Rate-1/3 parallel-concatenated turbo encoder.

Conventions used throughout the package:

* Generator polynomials are given in octal; bit ``i`` of the integer is the
  coefficient of ``D**i`` (LSB first).  ``7`` is ``1 + D + D**2`` and ``5`` is
  ``1 + D**2``.
* The RSC register holds the feedback sequence ``w``.  The encoder state is the
  integer whose bit ``i - 1`` is ``w[t - i]`` for ``i = 1..memory``.
* Codewords are stored stream-major: ``[systematic, parity1, parity2]``, each
  of length ``k``.  Neither constituent is terminated, so a codeword has
  exactly ``3k`` bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng

MAX_MEMORY = 4


class InvalidConfigError(ValueError):
    pass


def parse_octal(text: str | int) -> int:
    if isinstance(text, int):
        return text
    try:
        return int(str(text).strip(), 8)
    except ValueError as exc:
        raise InvalidConfigError(f"not an octal polynomial: {text!r}") from exc


@dataclass(frozen=True)
class TurboCodeConfig:
    k: int = 1024
    feedback_poly: int = 0o7
    feedforward_poly: int = 0o5
    interleaver_seed: int = 1
    llr_saturation: float = 1e3
    max_log: bool = False

    def __post_init__(self):
        if self.k < 4:
            raise InvalidConfigError(f"block length k={self.k} < 4")
        if self.feedback_poly <= 0 or not self.feedback_poly & 1:
            raise InvalidConfigError("feedback polynomial needs its D**0 coefficient set")
        if self.feedforward_poly <= 0:
            raise InvalidConfigError("feedforward polynomial must be nonzero")
        if self.memory > MAX_MEMORY:
            raise InvalidConfigError(f"memory {self.memory} exceeds {MAX_MEMORY}")
        if not self.llr_saturation > 0:
            raise InvalidConfigError("llr_saturation must be positive")

    @property
    def memory(self) -> int:
        return max(self.feedback_poly.bit_length(), self.feedforward_poly.bit_length()) - 1

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    @property
    def rate(self) -> float:
        return 1.0 / 3.0

    def header(self) -> dict[str, str]:
        return {
            "k": str(self.k),
            "feedback_poly": format(self.feedback_poly, "o"),
            "feedforward_poly": format(self.feedforward_poly, "o"),
            "interleaver_seed": str(self.interleaver_seed),
            "llr_saturation": repr(self.llr_saturation),
            "max_log": str(self.max_log).lower(),
        }


@dataclass(frozen=True, eq=False)
class Interleaver:
    perm: np.ndarray
    seed: int
    inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        object.__setattr__(self, "inverse", inv)

    def __len__(self) -> int:
        return len(self.perm)

    def interleave(self, x: np.ndarray) -> np.ndarray:
        """Position ``i`` of the output holds ``x[perm[i]]``."""
        return np.asarray(x)[..., self.perm]

    def deinterleave(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y)[..., self.inverse]


def build_interleaver(seed: int, k: int) -> Interleaver:
    if k < 4:
        raise InvalidConfigError(f"block length k={k} < 4")
    # Generator.permutation is a Fisher-Yates shuffle.
    perm = _rng.generator(seed, _rng.STREAM_INTERLEAVER).permutation(k)
    return Interleaver(perm=perm.astype(np.int64), seed=int(seed))


def _taps(poly: int, memory: int) -> list[int]:
    return [(poly >> i) & 1 for i in range(memory + 1)]


def rsc_step(state: int, bit: int, feedback_poly: int, feedforward_poly: int, memory: int) -> tuple[int, int]:
    """One trellis transition; returns ``(next_state, parity_bit)``."""
    fb = _taps(feedback_poly, memory)
    ff = _taps(feedforward_poly, memory)
    w = bit
    for i in range(1, memory + 1):
        w ^= fb[i] & (state >> (i - 1))
    parity = ff[0] & w
    for i in range(1, memory + 1):
        parity ^= ff[i] & (state >> (i - 1))
    next_state = ((state << 1) | w) & ((1 << memory) - 1)
    return next_state, parity & 1


def rsc_encode(bits, config: TurboCodeConfig) -> np.ndarray:
    """Parity stream of the unterminated RSC encoder, starting in state 0.

    ``bits`` may be 2-D, in which case each row is encoded independently.
    """
    u = np.asarray(bits, dtype=np.uint8)
    m = config.memory
    fb = _taps(config.feedback_poly, m)
    ff = _taps(config.feedforward_poly, m)
    # reg[i] holds w[t - 1 - i]
    reg = [np.zeros(u.shape[:-1], dtype=np.uint8) for _ in range(m)]
    parity = np.empty_like(u)
    for t in range(u.shape[-1]):
        w = u[..., t].copy()
        for i in range(1, m + 1):
            if fb[i]:
                w ^= reg[i - 1]
        p = w * ff[0]
        for i in range(1, m + 1):
            if ff[i]:
                p = p ^ reg[i - 1]
        parity[..., t] = p
        reg = [w] + reg[:-1]
    return parity


@dataclass(frozen=True, eq=False)
class Codeword:
    systematic: np.ndarray
    parity1: np.ndarray
    parity2: np.ndarray

    def bits(self) -> np.ndarray:
        return np.concatenate([self.systematic, self.parity1, self.parity2])

    def __len__(self) -> int:
        return 3 * len(self.systematic)

    @classmethod
    def from_bits(cls, bits) -> "Codeword":
        b = np.asarray(bits, dtype=np.uint8)
        if b.ndim != 1 or len(b) % 3:
            raise ValueError("codeword length must be a multiple of 3")
        k = len(b) // 3
        return cls(b[:k].copy(), b[k : 2 * k].copy(), b[2 * k :].copy())


def check_block(bits, k: int) -> np.ndarray:
    b = np.asarray(bits, dtype=np.uint8)
    if b.shape != (k,):
        raise ValueError(f"expected a block of {k} bits, got shape {b.shape}")
    if np.any(b > 1):
        raise ValueError("bits must be 0 or 1")
    return b


def turbo_encode(bits, config: TurboCodeConfig, interleaver: Interleaver | None = None) -> Codeword:
    u = check_block(bits, config.k)
    if interleaver is None:
        interleaver = build_interleaver(config.interleaver_seed, config.k)
    return Codeword(
        systematic=u.copy(),
        parity1=rsc_encode(u, config),
        parity2=rsc_encode(interleaver.interleave(u), config),
    )
