import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from turbodyn.codec import (
    InvalidConfigError,
    TurboCodeConfig,
    build_interleaver,
    parse_octal,
    rsc_encode,
    turbo_encode,
)


def series_divide(num: int, den: int, n: int) -> list[int]:
    """First n coefficients of num(D)/den(D) over GF(2), LSB = D**0."""
    out = []
    rem = num
    for t in range(n):
        bit = (rem >> t) & 1
        out.append(bit)
        if bit:
            rem ^= den << t
    return out


def test_parse_octal():
    assert parse_octal("7") == 7
    assert parse_octal("13") == 11
    with pytest.raises(InvalidConfigError):
        parse_octal("9")


@pytest.mark.parametrize(
    "kwargs",
    [dict(k=3), dict(feedback_poly=0o6), dict(feedforward_poly=0), dict(feedback_poly=0o77), dict(llr_saturation=0.0)],
)
def test_invalid_configs(kwargs):
    with pytest.raises(InvalidConfigError):
        TurboCodeConfig(**kwargs)


def test_memory_and_states():
    cfg = TurboCodeConfig()
    assert cfg.memory == 2
    assert cfg.n_states == 4
    assert TurboCodeConfig(feedback_poly=0o13, feedforward_poly=0o15).memory == 3


def test_interleaver_deterministic_and_bijective():
    a = build_interleaver(1, 8)
    b = build_interleaver(1, 8)
    assert a.perm.tolist() == b.perm.tolist()
    assert sorted(a.perm.tolist()) == list(range(8))
    # recorded once
    assert a.perm.tolist() == [3, 0, 2, 5, 4, 7, 6, 1]


def test_interleaver_seeds_differ():
    a = build_interleaver(11, 1024)
    b = build_interleaver(12, 1024)
    assert not np.array_equal(a.perm, b.perm)


def test_interleaver_rejects_short_block():
    with pytest.raises(InvalidConfigError):
        build_interleaver(1, 3)


@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8), st.integers(0, 2**32))
def test_deinterleave_inverts(xs, seed):
    il = build_interleaver(seed, 8)
    x = np.array(xs)
    assert np.array_equal(il.deinterleave(il.interleave(x)), x)
    assert np.array_equal(il.interleave(il.deinterleave(x)), x)


def test_rsc_zero_input():
    cfg = TurboCodeConfig(k=16)
    assert not rsc_encode(np.zeros(16, dtype=np.uint8), cfg).any()


def test_rsc_impulse_response():
    cfg = TurboCodeConfig(k=12)
    u = np.zeros(12, dtype=np.uint8)
    u[0] = 1
    parity = rsc_encode(u, cfg).tolist()
    assert parity[:7] == [1, 1, 1, 0, 1, 1, 0]
    assert parity == series_divide(0o5, 0o7, 12)


@pytest.mark.parametrize("fb,ff", [(0o7, 0o5), (0o13, 0o15), (0o23, 0o35), (0o3, 0o2)])
def test_rsc_matches_series_division(fb, ff):
    cfg = TurboCodeConfig(k=40, feedback_poly=fb, feedforward_poly=ff)
    rng = np.random.default_rng(fb * 100 + ff)
    u = rng.integers(0, 2, 40).astype(np.uint8)
    # parity(D) = u(D) * ff(D) / fb(D); superpose shifted impulse responses
    h = series_divide(ff, fb, 40)
    expected = np.zeros(40, dtype=np.uint8)
    for t in np.flatnonzero(u):
        expected[t:] ^= np.array(h[: 40 - t], dtype=np.uint8)
    assert np.array_equal(rsc_encode(u, cfg), expected)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_encoding_is_linear(seed):
    cfg = TurboCodeConfig(k=32)
    rng = np.random.default_rng(seed)
    u, v = rng.integers(0, 2, (2, 32)).astype(np.uint8)
    cu, cv, cuv = (turbo_encode(x, cfg).bits() for x in (u, v, u ^ v))
    assert np.array_equal(cuv, cu ^ cv)


@pytest.mark.parametrize("k", [4, 7, 64, 1024])
def test_codeword_length(k):
    cfg = TurboCodeConfig(k=k)
    cw = turbo_encode(np.ones(k, dtype=np.uint8), cfg)
    assert len(cw) == 3 * k == len(cw.bits())


def test_all_zero_codeword():
    cfg = TurboCodeConfig(k=64)
    assert not turbo_encode(np.zeros(64, dtype=np.uint8), cfg).bits().any()


def test_second_parity_uses_interleaved_input():
    cfg = TurboCodeConfig(k=8, interleaver_seed=5)
    il = build_interleaver(5, 8)
    u = np.zeros(8, dtype=np.uint8)
    u[0] = 1
    cw = turbo_encode(u, cfg)
    assert np.array_equal(cw.systematic, u)
    # the impulse lands where perm points back at position 0
    pos = int(np.flatnonzero(il.perm == 0)[0])
    moved = np.zeros(8, dtype=np.uint8)
    moved[pos] = 1
    assert np.array_equal(cw.parity2, rsc_encode(moved, cfg))
    assert np.array_equal(cw.parity1, rsc_encode(u, cfg))


def test_block_validation():
    cfg = TurboCodeConfig(k=8)
    with pytest.raises(ValueError):
        turbo_encode(np.zeros(7, dtype=np.uint8), cfg)
    with pytest.raises(ValueError):
        turbo_encode(np.full(8, 2), cfg)
