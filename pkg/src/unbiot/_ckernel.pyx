# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled thinned-mode realization loop.

Mirrors ``unbiot._pykernel.realize`` and the streams in ``unbiot.rng``:
identical counters, identical draw order, identical summation order.
"""

from libc.math cimport exp, log, pow, ceil, fabs
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport uint64_t, int64_t

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t STREAM_MUL = 0xD1B54A32D192ED03ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double POISSON_CHUNK = 8.0
cdef int TABLE_MAX = 402

cdef enum:
    S_BS = 0
    S_BS_BAND = 1
    S_DEV_BAND = 2
    S_SERVE = 3
    S_IOT = 16
    S_INC = 128
    S_IOT_FADE = 256
    S_INC_FADE = 384

cdef enum:
    K_EXISTING = 0
    K_BENCHMARK = 1
    K_SLOTTED = 2
    K_UNSLOTTED = 3


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double u01(uint64_t key, uint64_t ctr) noexcept nogil:
    return (<double>(mix64(key + (ctr + 1) * GOLDEN) >> 11) + 0.5) * TWO_M53


cdef inline uint64_t stream_key(uint64_t rkey, uint64_t s) noexcept nogil:
    return mix64(rkey ^ mix64((s + 1) * STREAM_MUL))


cdef struct PoissonTable:
    double mean            # total mean
    int64_t chunks
    int n
    double cdf[402]


cdef void build_table(PoissonTable* t, double mean) noexcept nogil:
    cdef double m, p, F, G
    cdef int j = 0
    t.mean = mean
    t.n = 0
    if mean <= 0.0:
        t.chunks = 0
        return
    t.chunks = <int64_t>ceil(mean / POISSON_CHUNK)
    m = mean / t.chunks
    p = exp(-m)
    F = p
    t.cdf[0] = F
    t.n = 1
    while j < 400:
        j += 1
        p = p * m / j
        G = F + p
        if G == F and j > m:
            break
        F = G
        t.cdf[t.n] = F
        t.n += 1


cdef int64_t poisson(PoissonTable* t, uint64_t key) noexcept nogil:
    cdef int64_t c, total = 0
    cdef int idx
    cdef double u
    for c in range(t.chunks):
        u = u01(key, c)
        idx = 0
        while idx < t.n and t.cdf[idx] < u:
            idx += 1
        total += idx
    return total


cdef struct Buf:
    double* x
    double* y
    int64_t cap


cdef int reserve(Buf* b, int64_t n) noexcept nogil:
    cdef double* nx
    cdef double* ny
    if n <= b.cap:
        return 0
    nx = <double*>realloc(b.x, n * sizeof(double))
    if nx == NULL:
        return -1
    b.x = nx
    ny = <double*>realloc(b.y, n * sizeof(double))
    if ny == NULL:
        return -1
    b.y = ny
    b.cap = n
    return 0


cdef int64_t sample_points(PoissonTable* t, uint64_t key, double side, Buf* out) noexcept nogil:
    cdef int64_t n = poisson(t, key)
    cdef int64_t start = t.chunks
    cdef int64_t k
    if reserve(out, n) != 0:
        return -1
    for k in range(n):
        out.x[k] = u01(key, start + 2 * k) * side
        out.y[k] = u01(key, start + 2 * k + 1) * side
    return n


cdef inline double torus_d2(double ax, double ay, double bx, double by, double side) noexcept nogil:
    cdef double dx = fabs(ax - bx)
    cdef double dy = fabs(ay - by)
    if side - dx < dx:
        dx = side - dx
    if side - dy < dy:
        dy = side - dy
    return dx * dx + dy * dy


cdef double shot_noise(Buf* src, int64_t n_src, uint64_t fade_key, int64_t j, int64_t n_bs,
                       double bx, double by, double side, double half_alpha) noexcept nogil:
    cdef double acc = 0.0
    cdef double fade, gain
    cdef int64_t u
    for u in range(n_src):
        fade = -log(u01(fade_key, <uint64_t>(u * n_bs + j)))
        gain = pow(torus_d2(src.x[u], src.y[u], bx, by, side), -half_alpha)
        acc += fade * gain
    return acc


def max_sinr_batch(params, int64_t first, int64_t count):
    """Maximum SINR of realizations ``first .. first + count - 1``."""
    cdef double side = params.side
    cdef double noise = params.noise
    cdef double p_inc = params.p_inc
    cdef double half_alpha = 0.5 * params.alpha
    cdef int n_msg = params.n_msg
    cdef int n_bands = params.n_bands
    cdef int kind = params.kind
    cdef int pn = params.scheme == 1
    cdef int nearest = params.assoc == 1
    cdef int per_bs = params.field == 1
    cdef double listen_r2 = params.listen_r2
    cdef uint64_t seed = (<object>params.seed) & 0xFFFFFFFFFFFFFFFF
    cdef double[::1] cdf = np.ascontiguousarray(params.band_cdf, dtype=np.float64)
    cdef int banded = kind == K_SLOTTED or kind == K_UNSLOTTED
    cdef cnp.ndarray[cnp.float64_t, ndim=1] result = np.empty(count)
    cdef double[::1] res = result

    cdef PoissonTable t_bs, t_iot, t_inc
    build_table(&t_bs, params.mu_bs)
    build_table(&t_iot, params.mu_iot)
    build_table(&t_inc, params.mu_inc)

    cdef Buf bs, iot, inc
    bs.x = NULL; bs.y = NULL; bs.cap = 0
    iot.x = NULL; iot.y = NULL; iot.cap = 0
    inc.x = NULL; inc.y = NULL; inc.cap = 0
    cdef double* d2dev = NULL
    cdef int* band = NULL
    cdef int64_t aux_cap = 0
    cdef int dev_band[64]

    cdef int64_t n, r, n_bs, n_iot = 0, n_inc, b, j, near
    cdef uint64_t rkey, key, serve_key, iot_fade_key, inc_fade_key
    cdef double best, centre = 0.5 * side, u, i_iot, i_inc, denom, h, s
    cdef int i, m, iot_idx, iot_loaded, want_band
    cdef int failed = 0

    with nogil:
        for n in range(count):
            r = first + n
            rkey = mix64(mix64(seed) + (<uint64_t>(r + 1)) * GOLDEN)
            key = stream_key(rkey, S_BS)
            n_bs = sample_points(&t_bs, key, side, &bs)
            if n_bs < 0:
                failed = 1
                break
            if n_bs > aux_cap:
                d2dev = <double*>realloc(d2dev, n_bs * sizeof(double))
                band = <int*>realloc(band, n_bs * sizeof(int))
                if d2dev == NULL or band == NULL:
                    failed = 1
                    break
                aux_cap = n_bs
            for b in range(n_bs):
                d2dev[b] = torus_d2(bs.x[b], bs.y[b], centre, centre, side)
            if banded:
                key = stream_key(rkey, S_BS_BAND)
                for b in range(n_bs):
                    u = u01(key, b)
                    m = 0
                    while m < n_bands and cdf[m] <= u:
                        m += 1
                    band[b] = m
                key = stream_key(rkey, S_DEV_BAND)
                for i in range(n_msg if kind == K_UNSLOTTED else 1):
                    m = <int>(u01(key, i) * n_bands)
                    dev_band[i] = m if m < n_bands - 1 else n_bands - 1

            best = 0.0
            iot_loaded = -1
            near = -2
            serve_key = stream_key(rkey, S_SERVE)
            for i in range(n_msg):
                want_band = dev_band[i if kind == K_UNSLOTTED else 0] if banded else -1
                iot_idx = 0 if pn else i
                if nearest and (near == -2 or kind == K_UNSLOTTED):
                    near = -1
                    for b in range(n_bs):
                        if banded and band[b] != want_band:
                            continue
                        if near < 0 or d2dev[b] < d2dev[near]:
                            near = b
                n_inc = -1
                iot_fade_key = stream_key(rkey, S_IOT_FADE + iot_idx)
                inc_fade_key = stream_key(rkey, S_INC_FADE + i)
                for j in range(n_bs):
                    if nearest:
                        if j != near:
                            continue
                    else:
                        if banded and band[j] != want_band:
                            continue
                        if d2dev[j] > listen_r2:
                            continue
                    if per_bs:
                        n_iot = sample_points(&t_iot, stream_key(stream_key(rkey, S_IOT + iot_idx), j), side, &iot)
                        n_inc = sample_points(&t_inc, stream_key(stream_key(rkey, S_INC + i), j), side, &inc)
                        iot_loaded = -1
                    else:
                        if iot_loaded != iot_idx:
                            n_iot = sample_points(&t_iot, stream_key(rkey, S_IOT + iot_idx), side, &iot)
                            iot_loaded = iot_idx
                        if n_inc < 0:
                            n_inc = sample_points(&t_inc, stream_key(rkey, S_INC + i), side, &inc)
                    if n_iot < 0 or n_inc < 0:
                        failed = 1
                        break
                    i_iot = shot_noise(&iot, n_iot, iot_fade_key, j, n_bs, bs.x[j], bs.y[j], side, half_alpha)
                    i_inc = shot_noise(&inc, n_inc, inc_fade_key, j, n_bs, bs.x[j], bs.y[j], side, half_alpha)
                    denom = noise + (i_iot + p_inc * i_inc)
                    h = -log(u01(serve_key, <uint64_t>(i * n_bs + j)))
                    s = h * pow(d2dev[j], -half_alpha) / denom
                    if s > best:
                        best = s
                if failed:
                    break
            if failed:
                break
            res[n] = best

    free(bs.x); free(bs.y); free(iot.x); free(iot.y); free(inc.x); free(inc.y)
    free(d2dev); free(band)
    if failed:
        raise MemoryError("kernel buffer allocation failed")
    return result
