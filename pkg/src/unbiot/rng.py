"""Counter-based random streams.

Draw ``j`` of a stream is ``mix64(key + (j + 1) * GOLDEN)``, the SplitMix64
output function applied to a counter. Any draw can be produced without
touching the others, so realizations can be evaluated in any order, on any
number of workers, and by either kernel backend with the same result.

Stream keys are derived from ``(master_seed, realization, substream)``.
The compiled kernel mirrors these definitions bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
STREAM_MUL = 0xD1B54A32D192ED03
TWO_M53 = 2.0**-53
POISSON_CHUNK = 8.0

_GOLDEN_U = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def realization_key(master_seed: int, realization: int) -> int:
    return mix64(mix64(master_seed) + (realization + 1) * GOLDEN)


def stream_key(rkey: int, substream: int) -> int:
    return mix64(rkey ^ mix64((substream + 1) * STREAM_MUL))


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def uniform_at(key: int, counters) -> np.ndarray:
    """Uniforms in (0, 1) for the given counter indices of stream ``key``."""
    c = np.asarray(counters, dtype=np.uint64)
    z = np.uint64(key) + (c + np.uint64(1)) * _GOLDEN_U
    return ((_mix_array(z) >> _S11).astype(np.float64) + 0.5) * TWO_M53


def exponential_at(key: int, counters) -> np.ndarray:
    return -np.log(uniform_at(key, counters))


def uniform_scalar(key: int, counter: int) -> float:
    return ((mix64(key + (counter + 1) * GOLDEN) >> 11) + 0.5) * TWO_M53


def poisson_cdf_table(mean: float) -> np.ndarray:
    """CDF of Poisson(mean) built term by term until it stops growing."""
    p = math.exp(-mean)
    F = p
    out = [F]
    j = 0
    while j < 400:
        j += 1
        p = p * mean / j
        G = F + p
        if G == F and j > mean:
            break
        F = G
        out.append(F)
    return np.array(out)


def poisson_at(key: int, mean: float, start: int = 0) -> tuple[int, int]:
    """Poisson(mean) as a sum of chunks of mean <= 8, each by inversion.

    Returns the count and the next unused counter.
    """
    if mean <= 0.0:
        return 0, start
    chunks = math.ceil(mean / POISSON_CHUNK)
    m = mean / chunks
    u = uniform_at(key, np.arange(start, start + chunks))
    table = poisson_cdf_table(m)
    counts = np.searchsorted(table, u, side="left")
    return int(counts.sum()), start + chunks


class CounterStream:
    """Sequential view of one counter-based stream."""

    def __init__(self, key: int, position: int = 0):
        self.key = key
        self.position = position

    @classmethod
    def for_realization(cls, master_seed: int, realization: int, substream: int) -> "CounterStream":
        return cls(stream_key(realization_key(master_seed, realization), substream))

    def uniform(self, n: int) -> np.ndarray:
        out = uniform_at(self.key, np.arange(self.position, self.position + n))
        self.position += n
        return out

    def exponential(self, n: int) -> np.ndarray:
        return -np.log(self.uniform(n))

    def poisson(self, mean: float) -> int:
        count, self.position = poisson_at(self.key, mean, self.position)
        return count


# substream layout of one realization (mirrored in _ckernel.pyx)
S_BS = 0            # BS count and positions
S_BS_BAND = 1       # band each BS listens to
S_DEV_BAND = 2      # band(s) of the tagged device
S_SERVE = 3         # serving-link fades, counter = message * n_bs + bs
S_DEV_SLOT = 4      # explicit mode: tagged device channels
S_CAND = 5          # explicit mode: candidate interferer trains
S_IOT = 16          # + message (random) or + 0 (pn): IoT interferer points
S_INC = 128         # + message: incumbent points
S_IOT_FADE = 256    # + message (random) or + 0 (pn), counter = source * n_bs + bs
S_INC_FADE = 384    # + message
MAX_MESSAGES = 64
