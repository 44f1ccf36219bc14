"""Monte-Carlo estimation on a square torus.

Two fidelities are available. ``Mode.THINNED`` draws, for every message of
the tagged device, an independent interferer process at the thinned IoT
density; this is the fast path and runs in the compiled kernel when it is
available. ``Mode.EXPLICIT`` places every potentially colliding device with
its own start time and channels and applies the binary time/frequency
overlap rule, which checks the thinning argument itself.

The tagged device sits at the centre of the torus. Every random draw comes
from a counter-based stream keyed on ``(master_seed, realization,
substream)``, so estimates do not depend on chunking or worker count.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import binomtest

from . import _pykernel as pk
from . import kernel, rng
from .model import (Association, NetworkConfig, Protocol, ProtocolSpec, Scheme,
                    derive_params, validate_config)

MIN_EXPECTED_BS = 20
TAU_FLOOR_DB = -10.0
CHUNK = 500

_KIND = {Protocol.EXISTING: pk.EXISTING, Protocol.BENCHMARK: pk.BENCHMARK,
         Protocol.SLOTTED_MULTIBAND: pk.SLOTTED, Protocol.UNSLOTTED_MULTIBAND: pk.UNSLOTTED}


class Mode(enum.Enum):
    THINNED = "thinned"
    EXPLICIT = "explicit"


class InterferenceField(enum.Enum):
    """How interferers are shared between BSs.

    ``SHARED`` is the physical picture: one interferer population seen by
    every BS. ``PER_BS`` gives each BS its own independent population, which
    makes failures at different BSs conditionally independent.
    """
    SHARED = "shared"
    PER_BS = "per_bs"


class UnsupportedFidelity(ValueError):
    pass


@dataclass(frozen=True)
class SimOptions:
    """Monte-Carlo settings.

    ``torus_side_m=None`` picks ``20 / sqrt(lambda_bs)``, about 400 BSs on
    average. ``listen_radius_m=None`` evaluates only BSs close enough to
    matter: beyond the chosen radius the expected number of BSs that could
    decode even at the lowest threshold of interest is below ``N e^-14``.
    Noise is off by default so that estimates target the
    interference-limited closed forms.
    """

    mode: Mode = Mode.THINNED
    torus_side_m: float | None = None
    realizations: int = 10_000
    master_seed: int = 1
    include_noise: bool = False
    listen_radius_m: float | None = None
    interference: InterferenceField = InterferenceField.SHARED

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.torus_side_m is not None and not self.torus_side_m > 0:
            raise ValueError("torus_side_m must be positive")
        if self.listen_radius_m is not None and not self.listen_radius_m > 0:
            raise ValueError("listen_radius_m must be positive")


class Estimate(NamedTuple):
    value: float
    ci_half: float      # half width of the 95% Wilson interval
    successes: int
    realizations: int


@dataclass
class Realization:
    bs_points: np.ndarray
    bs_bands: np.ndarray | None
    device_bands: np.ndarray | None
    iot_points: list            # per message: interfering IoT positions
    inc_points: list            # per message: incumbent positions
    starts: np.ndarray | None = None      # explicit mode: candidate start offsets
    channels: np.ndarray | None = None    # explicit mode: candidate channels (n, N)
    device_channels: np.ndarray | None = None


@dataclass
class SinrSample:
    realization: Realization
    evaluated: list             # per message: BS indices whose SINR was computed
    sinr: list                  # per message: linear SINR at those BSs
    tau: float
    max_sinr: float = field(init=False)

    def __post_init__(self):
        self.max_sinr = max((float(s.max()) for s in self.sinr if s.size), default=0.0)

    @property
    def success(self) -> bool:
        return self.max_sinr >= self.tau


# -- geometry helpers ------------------------------------------------------

def sample_hppp(density: float, side: float, stream: rng.CounterStream) -> np.ndarray:
    """HPPP of the given density (per m^2) on a ``side x side`` torus."""
    if density < 0:
        raise ValueError("density must be non-negative")
    n = stream.poisson(density * side * side)
    return stream.uniform(2 * n).reshape(n, 2) * side


def nearest_listening_bs(origin, bs_points: np.ndarray, side: float,
                         bands: np.ndarray | None = None, band: int | None = None) -> int | None:
    """Index of the nearest BS (torus distance) listening to ``band``.

    With ``bands=None`` every BS listens. Equidistant BSs resolve to the
    lower index. Returns None when no BS qualifies.
    """
    pts = np.asarray(bs_points, dtype=float).reshape(-1, 2)
    mask = None if bands is None else (np.asarray(bands) == band)
    idx = pk.nearest_index(pk.torus_d2(pts, origin, side), mask)
    return None if idx < 0 else idx


def torus_side(cfg: NetworkConfig, opts: SimOptions) -> float:
    side = opts.torus_side_m if opts.torus_side_m is not None else 20.0 / math.sqrt(cfg.lambda_bs)
    if cfg.lambda_bs * side * side < MIN_EXPECTED_BS:
        warnings.warn(f"torus holds only {cfg.lambda_bs * side * side:.1f} BSs on average "
                      f"(fewer than {MIN_EXPECTED_BS}); edge effects may bias estimates", stacklevel=3)
    return side


def listen_radius(cfg: NetworkConfig, opts: SimOptions, side: float, tau_floor: float) -> float:
    if opts.listen_radius_m is not None:
        return opts.listen_radius_m
    d = derive_params(cfg)
    lam = d.interference_density
    far = side / math.sqrt(2.0)   # farthest point on the torus
    if lam <= 0.0:
        return far
    c = math.pi / d.xi * tau_floor**d.delta * lam
    ratio = d.xi * tau_floor**-d.delta * cfg.lambda_bs / lam
    r2 = (14.0 + math.log(cfg.N) + math.log(max(1.0, ratio))) / c
    return min(far, math.sqrt(r2))


def _band_cdf(spec: ProtocolSpec, M: int) -> tuple:
    cdf = list(np.cumsum(spec.probs(M)))
    cdf[-1] = 1.0
    return tuple(float(c) for c in cdf)


def kernel_params(cfg: NetworkConfig, spec: ProtocolSpec, opts: SimOptions,
                  tau_floor: float | None = None) -> pk.KernelParams:
    validate_config(cfg, spec)
    if cfg.N > rng.MAX_MESSAGES:
        raise ValueError(f"simulation supports N <= {rng.MAX_MESSAGES}")
    d = derive_params(cfg)
    side = torus_side(cfg, opts)
    area = side * side
    if tau_floor is None:
        tau_floor = cfg.tau
    tau_floor = min(tau_floor, 10.0 ** (TAU_FLOOR_DB / 10.0))
    rho = listen_radius(cfg, opts, side, tau_floor)
    banded = spec.kind in (Protocol.SLOTTED_MULTIBAND, Protocol.UNSLOTTED_MULTIBAND)
    return pk.KernelParams(
        side=side,
        mu_bs=cfg.lambda_bs * area,
        mu_iot=d.lambda_iot_thinned * area,
        mu_inc=d.lambda_inc_thinned * area,
        p_inc=d.p_hat_inc,
        noise=d.p_hat_noise if opts.include_noise else 0.0,
        alpha=cfg.alpha,
        n_msg=cfg.N,
        n_bands=cfg.M if banded else 1,
        kind=_KIND[spec.kind],
        scheme=pk.PN if spec.scheme is Scheme.PN else pk.RANDOM,
        assoc=pk.NEAREST if spec.association is Association.NEAREST else pk.NO_ASSOC,
        band_cdf=_band_cdf(spec, cfg.M) if banded else (1.0,),
        listen_r2=rho * rho,
        seed=opts.master_seed & rng.MASK,
        field=pk.PER_BS if opts.interference is InterferenceField.PER_BS else pk.SHARED,
    )


# -- explicit time/frequency overlap ---------------------------------------

@dataclass(frozen=True)
class Transmission:
    """One message on the shared time/frequency grid.

    ``start`` is a time in seconds (unslotted) or a slot index (slotted);
    ``freq`` is a centre frequency in Hz (unslotted) or a channel index.
    """
    start: float
    freq: float


@dataclass(frozen=True)
class OverlapRule:
    duration: float         # t_s
    period: float           # T_s, or the slot count when slotted in time
    bandwidth: float        # b_hz
    span: float             # M * B_hz, or the channel count when slotted in frequency
    slotted_time: bool
    slotted_freq: bool

    @classmethod
    def from_config(cls, cfg: NetworkConfig) -> "OverlapRule":
        for name in ("beta_t", "beta_f"):
            if getattr(cfg, name) not in (1.0, 2.0):
                raise UnsupportedFidelity(f"explicit mode needs {name} in {{1, 2}}, got {getattr(cfg, name)}")
        st, sf = cfg.beta_t == 1.0, cfg.beta_f == 1.0
        period = float(max(1, round(cfg.T_s / cfg.t_s))) if st else cfg.T_s
        span = float(cfg.M * max(1, math.floor(cfg.B_hz / cfg.b_hz))) if sf else cfg.M * cfg.B_hz
        return cls(cfg.t_s, period, cfg.b_hz, span, st, sf)


def _circular(delta, length):
    return np.abs((np.asarray(delta) + 0.5 * length) % length - 0.5 * length)


def explicit_overlap(tx_a: Transmission, tx_b: Transmission, rule: OverlapRule) -> bool:
    """True when two messages collide in both time and frequency.

    Unslotted time collides when the starts differ by strictly less than the
    message duration; slotted time when the slots match. Frequency follows
    the same pattern with the signal bandwidth and channel index. Both axes
    wrap around (period and total spectrum).
    """
    if rule.slotted_time:
        t_hit = int(tx_a.start - tx_b.start) % int(rule.period) == 0
    else:
        t_hit = bool(_circular(tx_a.start - tx_b.start, rule.period) < rule.duration)
    if rule.slotted_freq:
        f_hit = int(tx_a.freq - tx_b.freq) % int(rule.span) == 0
    else:
        f_hit = bool(_circular(tx_a.freq - tx_b.freq, rule.span) < rule.bandwidth)
    return t_hit and f_hit


def _explicit_realize(cfg: NetworkConfig, spec: ProtocolSpec, kp: pk.KernelParams,
                      rule: OverlapRule, r: int, detail: bool):
    N, M = cfg.N, cfg.M
    side = kp.side
    rkey = rng.realization_key(kp.seed, r)
    bs_xy = pk.sample_points(rng.stream_key(rkey, rng.S_BS), kp.mu_bs, side)
    n_bs = bs_xy.shape[0]
    d2_dev = pk.torus_d2(bs_xy, (0.5 * side, 0.5 * side), side)
    bs_band, dev_bands = pk._bands(kp, rkey, n_bs)
    sets = pk.evaluation_sets(kp, d2_dev, bs_band, dev_bands)

    # Only devices whose train can touch the tagged train in time are placed;
    # their start offset relative to the tagged start is uniform over that window.
    area = side * side
    if rule.slotted_time:
        n_off = 2 * N - 1
        window = min(1.0, n_off / rule.period)
    else:
        half = min(N * rule.duration, 0.5 * rule.period)
        window = 2.0 * half / rule.period
    cand = rng.CounterStream(rng.stream_key(rkey, rng.S_CAND))
    xy = sample_hppp(cfg.lambda_iot * window, side, cand)
    n = xy.shape[0]
    u = cand.uniform(n)
    if rule.slotted_time:
        offs = np.floor(u * n_off) - (N - 1) if n_off < rule.period else np.floor(u * rule.period)
    else:
        offs = (2.0 * u - 1.0) * half

    per_band = rule.span / M
    multiband = spec.kind in (Protocol.SLOTTED_MULTIBAND, Protocol.UNSLOTTED_MULTIBAND)
    if spec.kind is Protocol.SLOTTED_MULTIBAND:
        band = np.minimum(np.floor(cand.uniform(n) * M), M - 1)[:, None]
        pos = cand.uniform(n * N).reshape(n, N)
        ch = band * per_band + (np.floor(pos * per_band) if rule.slotted_freq else pos * per_band)
    else:
        pos = cand.uniform(n * N).reshape(n, N)
        ch = np.floor(pos * rule.span) if rule.slotted_freq else pos * rule.span

    dev = rng.CounterStream(rng.stream_key(rkey, rng.S_DEV_SLOT))
    dpos = dev.uniform(N)
    if multiband:
        dband = dev_bands if spec.kind is Protocol.UNSLOTTED_MULTIBAND else np.repeat(dev_bands, N)
        dch = dband * per_band + (np.floor(dpos * per_band) if rule.slotted_freq else dpos * per_band)
    else:
        dch = np.floor(dpos * rule.span) if rule.slotted_freq else dpos * rule.span

    k = np.arange(N)
    best = 0.0
    iot_list, inc_list, sinr_list = [], [], []
    for i in range(N):
        # candidate message k against tagged message i
        if rule.slotted_time:
            t_hit = np.mod(offs[:, None] + (k - i)[None, :], rule.period) == 0
        else:
            t_hit = _circular(offs[:, None] + ((k - i) * rule.duration)[None, :], rule.period) < rule.duration
        if rule.slotted_freq:
            f_hit = ch == dch[i]
        else:
            f_hit = _circular(ch - dch[i], rule.span) < rule.bandwidth
        hit = (t_hit & f_hit).any(axis=1)
        iot_xy = xy[hit]
        J = sets[i]
        if J.size == 0 and not detail:
            continue
        inc_xy = pk.sample_points(rng.stream_key(rkey, rng.S_INC + i), kp.mu_inc, side)
        s = pk.message_sinr(kp, rkey, i, J, bs_xy, d2_dev, iot_xy, inc_xy)
        if s.size:
            best = max(best, float(s.max()))
        if detail:
            iot_list.append(iot_xy)
            inc_list.append(inc_xy)
            sinr_list.append(s)
    if detail:
        real = Realization(bs_xy, bs_band, dev_bands, iot_list, inc_list, offs, ch, dch)
        return real, sets, sinr_list
    return best


def _check_explicit(cfg: NetworkConfig, spec: ProtocolSpec, opts: SimOptions) -> OverlapRule:
    if opts.interference is not InterferenceField.SHARED:
        raise UnsupportedFidelity("explicit mode places one shared interferer population")
    if spec.scheme is not Scheme.RANDOM:
        raise UnsupportedFidelity("explicit mode models the random repetition scheme only")
    return OverlapRule.from_config(cfg)


# -- estimation ------------------------------------------------------------

def simulate_realization(cfg: NetworkConfig, spec: ProtocolSpec, opts: SimOptions, r: int) -> SinrSample:
    """Full detail of realization ``r``: points, evaluated BSs and SINRs."""
    kp = kernel_params(cfg, spec, opts)
    if opts.mode is Mode.EXPLICIT:
        real, sets, sinr = _explicit_realize(cfg, spec, kp, _check_explicit(cfg, spec, opts), r, True)
        return SinrSample(real, sets, sinr, cfg.tau)
    d = pk.realize(kp, r, detail=True)
    real = Realization(d.bs_xy, d.bs_band, d.device_bands, d.iot_xy, d.inc_xy)
    return SinrSample(real, d.evaluated, d.sinr, cfg.tau)


def _explicit_batch(args) -> np.ndarray:
    cfg, spec, kp, rule, first, count = args
    return np.array([_explicit_realize(cfg, spec, kp, rule, r, False) for r in range(first, first + count)])


def _thinned_batch(args) -> np.ndarray:
    kp, first, count, backend = args
    return kernel.max_sinr_batch(kp, first, count, backend)


def max_sinr_samples(cfg: NetworkConfig, spec: ProtocolSpec, opts: SimOptions, *,
                     tau_floor: float | None = None, jobs: int = 1,
                     backend: str | None = None) -> np.ndarray:
    """Maximum SINR per realization, in realization order.

    Realizations are split into fixed chunks; with ``jobs > 1`` the chunks
    run in worker processes. The output is the same either way.
    """
    kp = kernel_params(cfg, spec, opts, tau_floor)
    n = opts.realizations
    spans = [(s, min(CHUNK, n - s)) for s in range(0, n, CHUNK)]
    if opts.mode is Mode.EXPLICIT:
        rule = _check_explicit(cfg, spec, opts)
        fn, tasks = _explicit_batch, [(cfg, spec, kp, rule, s, c) for s, c in spans]
    else:
        fn, tasks = _thinned_batch, [(kp, s, c, backend) for s, c in spans]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(fn, tasks))
    else:
        parts = [fn(t) for t in tasks]
    return np.concatenate(parts)


MIN_CI_REALIZATIONS = 100


def _warn_small(opts: SimOptions):
    if opts.realizations < MIN_CI_REALIZATIONS:
        warnings.warn(f"{opts.realizations} realizations; the Wilson interval assumes at least "
                      f"{MIN_CI_REALIZATIONS}", stacklevel=3)


def wilson(successes: int, n: int) -> Estimate:
    ci = binomtest(successes, n).proportion_ci(confidence_level=0.95, method="wilson")
    return Estimate(successes / n, float(0.5 * (ci.high - ci.low)), successes, n)


def estimate_success_probability(cfg: NetworkConfig, spec: ProtocolSpec, opts: SimOptions,
                                 *, jobs: int = 1) -> Estimate:
    """Fraction of realizations in which some evaluated BS decodes some copy."""
    _warn_small(opts)
    best = max_sinr_samples(cfg, spec, opts, jobs=jobs)
    return wilson(int(np.count_nonzero(best >= cfg.tau)), best.size)


def sinr_cdf(cfg: NetworkConfig, spec: ProtocolSpec, opts: SimOptions, tau_grid: Sequence[float],
             *, jobs: int = 1) -> list[Estimate]:
    """Success probability at each linear threshold, from one set of realizations.

    Because every threshold reuses the same maximum-SINR samples, the output
    is non-increasing along an ascending grid.
    """
    _warn_small(opts)
    taus = np.asarray(tau_grid, dtype=float)
    if taus.size == 0:
        return []
    if np.any(np.diff(taus) < 0):
        raise ValueError("tau_grid must be ascending")
    best = np.sort(max_sinr_samples(cfg, spec, opts, tau_floor=float(taus[0]), jobs=jobs))
    below = np.searchsorted(best, taus, side="left")
    return [wilson(int(best.size - b), best.size) for b in below]
