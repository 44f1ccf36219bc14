"""Pure-Python (numpy) simulation kernel.

This is the reference implementation of one thinned-mode realization and
the fallback used when the compiled extension is unavailable. The compiled
kernel performs the same draws in the same order and accumulates the same
sums in the same order.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import rng

EXISTING, BENCHMARK, SLOTTED, UNSLOTTED = range(4)
RANDOM, PN = range(2)
NO_ASSOC, NEAREST = range(2)
SHARED, PER_BS = range(2)


class KernelParams(NamedTuple):
    side: float
    mu_bs: float        # expected BS count on the torus
    mu_iot: float       # expected interfering IoT devices per message
    mu_inc: float       # expected interfering incumbents per message
    p_inc: float        # incumbent power relative to IoT power
    noise: float        # noise power relative to IoT power (0 when ignored)
    alpha: float
    n_msg: int
    n_bands: int
    kind: int
    scheme: int
    assoc: int
    band_cdf: tuple     # cumulative BS band probabilities, last entry 1.0
    listen_r2: float    # squared radius around the device where BSs are evaluated
    seed: int
    field: int = SHARED  # PER_BS: every BS sees its own independent interferers


class RealizationDetail(NamedTuple):
    bs_xy: np.ndarray
    bs_band: np.ndarray | None
    device_bands: np.ndarray | None
    iot_xy: list        # per message; with PER_BS a list per evaluated BS
    inc_xy: list
    evaluated: list     # per message: indices of the BSs whose SINR was computed
    sinr: list          # per message: SINR at those BSs
    max_sinr: float


def sample_points(key: int, mean: float, side: float) -> np.ndarray:
    n, start = rng.poisson_at(key, mean)
    if n == 0:
        return np.empty((0, 2))
    return rng.uniform_at(key, np.arange(start, start + 2 * n)).reshape(n, 2) * side


def torus_d2(points: np.ndarray, origin, side: float) -> np.ndarray:
    d = np.abs(points - np.asarray(origin, dtype=float))
    d = np.minimum(d, side - d)
    return d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]


def torus_d2_pairs(a: np.ndarray, b: np.ndarray, side: float) -> np.ndarray:
    dx = np.abs(a[:, None, 0] - b[None, :, 0])
    dy = np.abs(a[:, None, 1] - b[None, :, 1])
    dx = np.minimum(dx, side - dx)
    dy = np.minimum(dy, side - dy)
    return dx * dx + dy * dy


def nearest_index(d2: np.ndarray, mask: np.ndarray | None = None) -> int:
    """Index of the smallest ``d2`` among ``mask``; ties go to the lower index."""
    idx = np.flatnonzero(mask) if mask is not None else np.arange(d2.size)
    if idx.size == 0:
        return -1
    return int(idx[np.argmin(d2[idx])])


def shot_noise(src_xy, fade_key, J, bs_xy, n_bs, side, alpha) -> np.ndarray:
    """Sum of fade * distance^-alpha from every source to each BS in ``J``."""
    if src_xy.shape[0] == 0 or J.size == 0:
        return np.zeros(J.size)
    ctr = np.arange(src_xy.shape[0], dtype=np.uint64)[:, None] * np.uint64(n_bs) + J.astype(np.uint64)[None, :]
    fade = rng.exponential_at(fade_key, ctr)
    gain = torus_d2_pairs(src_xy, bs_xy[J], side) ** (-0.5 * alpha)
    return (fade * gain).sum(axis=0)


def message_sinr(kp: KernelParams, rkey: int, i: int, J, bs_xy, d2_dev, iot_xy, inc_xy):
    n_bs = bs_xy.shape[0]
    k = i if kp.scheme == RANDOM else 0
    i_iot = shot_noise(iot_xy, rng.stream_key(rkey, rng.S_IOT_FADE + k), J, bs_xy, n_bs, kp.side, kp.alpha)
    i_inc = shot_noise(inc_xy, rng.stream_key(rkey, rng.S_INC_FADE + i), J, bs_xy, n_bs, kp.side, kp.alpha)
    denom = kp.noise + (i_iot + kp.p_inc * i_inc)
    h = rng.exponential_at(rng.stream_key(rkey, rng.S_SERVE), np.uint64(i * n_bs) + J.astype(np.uint64))
    with np.errstate(divide="ignore"):
        return h * d2_dev[J] ** (-0.5 * kp.alpha) / denom


def _bands(kp: KernelParams, rkey: int, n_bs: int):
    if kp.kind not in (SLOTTED, UNSLOTTED):
        return None, None
    u = rng.uniform_at(rng.stream_key(rkey, rng.S_BS_BAND), np.arange(n_bs))
    bs_band = np.searchsorted(np.asarray(kp.band_cdf), u, side="right")
    n_dev = 1 if kp.kind == SLOTTED else kp.n_msg
    ud = rng.uniform_at(rng.stream_key(rkey, rng.S_DEV_BAND), np.arange(n_dev))
    dev = np.minimum((ud * kp.n_bands).astype(np.int64), kp.n_bands - 1)
    return bs_band, dev


def evaluation_sets(kp: KernelParams, d2_dev, bs_band, dev_bands) -> list:
    """BS indices whose SINR matters for each message."""
    n_bs = d2_dev.size
    out = []
    near = None
    for i in range(kp.n_msg):
        if bs_band is None:
            listen = np.ones(n_bs, dtype=bool)
        else:
            listen = bs_band == dev_bands[i if kp.kind == UNSLOTTED else 0]
        if kp.assoc == NEAREST:
            if near is None or kp.kind == UNSLOTTED:
                near = nearest_index(d2_dev, listen)
            out.append(np.array([near] if near >= 0 else [], dtype=np.int64))
        else:
            out.append(np.flatnonzero(listen & (d2_dev <= kp.listen_r2)))
    return out


def _per_bs_sinr(kp: KernelParams, rkey: int, i: int, J, bs_xy, d2_dev):
    # each evaluated BS draws its own interferers; PN keeps one IoT set per BS
    n_bs = bs_xy.shape[0]
    out = np.empty(J.size)
    iot_sets, inc_sets = [], []
    k = i if kp.scheme == RANDOM else 0
    for n, j in enumerate(J):
        iot = sample_points(rng.stream_key(rng.stream_key(rkey, rng.S_IOT + k), int(j)), kp.mu_iot, kp.side)
        inc = sample_points(rng.stream_key(rng.stream_key(rkey, rng.S_INC + i), int(j)), kp.mu_inc, kp.side)
        out[n] = message_sinr(kp, rkey, i, J[n:n + 1], bs_xy, d2_dev, iot, inc)[0]
        iot_sets.append(iot)
        inc_sets.append(inc)
    return out, iot_sets, inc_sets


def realize(kp: KernelParams, r: int, detail: bool = False):
    rkey = rng.realization_key(kp.seed, r)
    bs_xy = sample_points(rng.stream_key(rkey, rng.S_BS), kp.mu_bs, kp.side)
    n_bs = bs_xy.shape[0]
    centre = (0.5 * kp.side, 0.5 * kp.side)
    d2_dev = torus_d2(bs_xy, centre, kp.side)
    bs_band, dev_bands = _bands(kp, rkey, n_bs)
    sets = evaluation_sets(kp, d2_dev, bs_band, dev_bands)

    best = 0.0
    iot_list, inc_list, sinr_list = [], [], []
    iot_xy = None
    for i in range(kp.n_msg):
        J = sets[i]
        if J.size == 0 and not detail:
            continue
        if kp.field == PER_BS:
            s, iot_xy, inc_xy = _per_bs_sinr(kp, rkey, i, J, bs_xy, d2_dev)
        else:
            if iot_xy is None or kp.scheme == RANDOM:
                iot_xy = sample_points(rng.stream_key(rkey, rng.S_IOT + (i if kp.scheme == RANDOM else 0)),
                                       kp.mu_iot, kp.side)
            inc_xy = sample_points(rng.stream_key(rkey, rng.S_INC + i), kp.mu_inc, kp.side)
            s = message_sinr(kp, rkey, i, J, bs_xy, d2_dev, iot_xy, inc_xy)
        if s.size:
            best = max(best, float(s.max()))
        if detail:
            iot_list.append(iot_xy)
            inc_list.append(inc_xy)
            sinr_list.append(s)
    if detail:
        return RealizationDetail(bs_xy, bs_band, dev_bands, iot_list, inc_list, sets, sinr_list, best)
    return best


def max_sinr_batch(kp: KernelParams, first: int, count: int) -> np.ndarray:
    out = np.empty(count)
    for n in range(count):
        out[n] = realize(kp, first + n)
    return out
