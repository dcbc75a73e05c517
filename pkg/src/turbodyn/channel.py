"""BPSK over AWGN with noise realizations scaled by the approximated SNR.

A noise realization is a unit-norm direction in R^{3k}.  Scaling it to
``||z||^2 = 3k / (2 R gamma)`` gives the noise vector for a given approximated
SNR ``gamma`` while keeping every ratio between samples fixed.  ``gamma`` is
handled in dB at the interfaces and in linear scale internally.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as _rng
from .codec import Codeword

RATE = 1.0 / 3.0


class UndefinedSnrError(ValueError):
    pass


def db_to_linear(gamma_db: float) -> float:
    return 10.0 ** (gamma_db / 10.0)


def linear_to_db(gamma: float) -> float:
    return 10.0 * np.log10(gamma)


def noise_variance(gamma_db: float, rate: float = RATE) -> float:
    return 1.0 / (2.0 * rate * db_to_linear(gamma_db))


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    direction: np.ndarray
    seed: int

    @property
    def k(self) -> int:
        return len(self.direction) // 3


@dataclass(frozen=True, eq=False)
class ChannelObservation:
    s: np.ndarray
    gamma_db: float
    sigma2: float

    @property
    def k(self) -> int:
        return len(self.s) // 3


def sample_realization(seed: int, k: int) -> NoiseRealization:
    if k < 4:
        raise ValueError(f"block length k={k} < 4")
    g = _rng.generator(seed, _rng.STREAM_NOISE)
    v = g.standard_normal(3 * k)
    v /= np.linalg.norm(v)
    return NoiseRealization(direction=v, seed=int(seed))


def scale_to_gamma(u: NoiseRealization | np.ndarray, gamma_db: float, k: int | None = None, rate: float = RATE) -> np.ndarray:
    if not np.isfinite(gamma_db):
        raise ValueError(f"gamma_db must be finite, got {gamma_db}")
    d = u.direction if isinstance(u, NoiseRealization) else np.asarray(u, dtype=float)
    if k is None:
        k = len(d) // 3
    target = 3 * k / (2.0 * rate * db_to_linear(gamma_db))
    return d * np.sqrt(target / np.dot(d, d))


def approximate_snr(z, k: int | None = None, rate: float = RATE) -> float:
    z = np.asarray(z, dtype=float)
    energy = float(np.dot(z, z))
    if not energy > 0:
        raise UndefinedSnrError("approximated SNR undefined for zero-norm noise")
    if k is None:
        k = len(z) // 3
    return linear_to_db(3 * k / (2.0 * rate) / energy)


def bpsk(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)


def transmit(cw: Codeword | np.ndarray, z, gamma_db: float, rate: float = RATE) -> ChannelObservation:
    """Noisy observation ``s = bpsk(cw) + z``.

    ``gamma_db`` fixes the noise variance the decoder assumes; it is passed in
    rather than measured from ``z`` so that a noiseless run still has a
    finite channel reliability.
    """
    bits = cw.bits() if isinstance(cw, Codeword) else np.asarray(cw)
    z = np.asarray(z, dtype=float)
    if bits.shape != z.shape:
        raise ValueError(f"codeword length {bits.shape} does not match noise length {z.shape}")
    return ChannelObservation(s=bpsk(bits) + z, gamma_db=float(gamma_db), sigma2=noise_variance(gamma_db, rate))


def channel_llrs(obs: ChannelObservation) -> np.ndarray:
    if not obs.sigma2 > 0:
        raise ValueError(f"noise variance must be positive, got {obs.sigma2}")
    return 2.0 * obs.s / obs.sigma2


# Realization files. CSV: comment header then one value per line.
# Binary: little-endian uint64 k, uint64 seed, then 3k float64.

_BIN_HEADER = struct.Struct("<QQ")


def save_realization(u: NoiseRealization, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        lines = [f"# k={u.k}", f"# seed={u.seed}", "value"]
        lines += [repr(float(v)) for v in u.direction]
        path.write_text("\n".join(lines) + "\n")
    else:
        with open(path, "wb") as fh:
            fh.write(_BIN_HEADER.pack(u.k, u.seed & 0xFFFFFFFFFFFFFFFF))
            fh.write(np.asarray(u.direction, dtype="<f8").tobytes())


def load_realization(path: str | Path) -> NoiseRealization:
    path = Path(path)
    if path.suffix == ".csv":
        meta = {}
        values = []
        for line in path.read_text().splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif line and line != "value":
                values.append(float(line))
        k, seed = int(meta["k"]), int(meta["seed"])
        direction = np.array(values)
    else:
        raw = path.read_bytes()
        k, seed = _BIN_HEADER.unpack_from(raw)
        direction = np.frombuffer(raw, dtype="<f8", offset=_BIN_HEADER.size).copy()
    if len(direction) != 3 * k:
        raise ValueError(f"{path}: expected {3 * k} samples, found {len(direction)}")
    return NoiseRealization(direction=direction, seed=seed)
