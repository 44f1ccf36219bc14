"""Closed-form success probabilities and transmission capacities.

Every expression here is interference limited: receiver noise is dropped.
Alternating binomial sums are accumulated in extended precision with
mpmath because their terms cancel catastrophically once ``N`` grows past a
handful of repetitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, NamedTuple, Sequence

import mpmath
from scipy.optimize import brentq

from .model import (Association, NetworkConfig, Protocol, ProtocolSpec, Scheme,
                    derive_params, validate_config)

MAX_COMPOSITIONS = 10**6
_DPS = 60


class UnsupportedCombination(ValueError):
    pass


def harmonic_number(n: int) -> float:
    if n < 1:
        raise ValueError(f"harmonic number needs n >= 1, got {n}")
    return math.fsum(1.0 / k for k in range(1, n + 1))


def _harmonic0(n: int) -> float:
    # empty band: H_0 = 0
    return 0.0 if n == 0 else harmonic_number(n)


def _alternating_sum(n: int, term: Callable[[int], object], start: int = 0) -> float:
    """sum_{k=start..n} C(n, k) (-1)^k term(k), accumulated at high precision."""
    with mpmath.workdps(_DPS):
        total = mpmath.mpf(0)
        for k in range(start, n + 1):
            t = term(k)
            total += (-1) ** k * math.comb(n, k) * t
        return float(total)


def _clamp(p: float) -> float:
    if p < 0.0:
        assert p > -1e-9, p
        return 0.0
    if p > 1.0:
        assert p < 1.0 + 1e-9, p
        return 1.0
    return p


class _Terms(NamedTuple):
    """Per-config constants shared by every formula."""
    N: int
    delta: float
    xi: float
    tau: float
    lam_iot: float       # thinned IoT interferer density
    lam_inc_eff: float   # P_I^delta times thinned incumbent density

    @property
    def lam_total(self) -> float:
        return self.lam_iot + self.lam_inc_eff


def _terms(cfg: NetworkConfig) -> _Terms:
    d = derive_params(cfg)
    return _Terms(cfg.N, d.delta, d.xi, cfg.tau, d.lambda_iot_thinned,
                  d.p_hat_inc**d.delta * d.lambda_inc_thinned)


# -- single listening population of BSs with density lam_b ----------------

def _noassoc_random(t: _Terms, lam_b: float) -> float:
    if lam_b <= 0.0:
        return 0.0
    if t.lam_total == 0.0:
        return 1.0
    expo = t.xi * t.tau**-t.delta * harmonic_number(t.N) * lam_b / t.lam_total
    return _clamp(-math.expm1(-expo))


def _noassoc_pn(t: _Terms, lam_b: float) -> float:
    if lam_b <= 0.0:
        return 0.0
    if t.lam_total == 0.0:
        return 1.0
    delta = mpmath.mpf(t.delta)
    s = _alternating_sum(
        t.N,
        lambda k: 1 / (mpmath.mpf(k) ** delta * t.lam_iot + k * mpmath.mpf(t.lam_inc_eff)),
        start=1)
    return _clamp(-math.expm1(t.xi * t.tau**-t.delta * lam_b * s))


def _nearest(t: _Terms, lam_b: float, pn: bool) -> float:
    if lam_b <= 0.0:
        return 0.0
    scale = mpmath.mpf(t.tau) ** t.delta / t.xi / lam_b
    delta = mpmath.mpf(t.delta)

    def term(k):
        load = (mpmath.mpf(k) ** delta * t.lam_iot + k * mpmath.mpf(t.lam_inc_eff)) if pn \
            else k * mpmath.mpf(t.lam_total)
        return 1 / (1 + scale * load)

    return _clamp(1.0 - _alternating_sum(t.N, term))


def _single_population(t: _Terms, lam_b: float, spec: ProtocolSpec) -> float:
    pn = spec.scheme is Scheme.PN
    if spec.association is Association.NEAREST:
        return _nearest(t, lam_b, pn)
    return _noassoc_pn(t, lam_b) if pn else _noassoc_random(t, lam_b)


# -- public surface --------------------------------------------------------

def success_probability(cfg: NetworkConfig, spec: ProtocolSpec) -> float:
    """Probability that at least one of the ``N`` copies is decoded.

    Existing and benchmark use every BS; slotted multiband averages over the
    device's band with BS density ``p_m * lambda_bs``; unslotted multiband
    averages the per-allocation value over the multinomial band split.
    """
    validate_config(cfg, spec)
    t = _terms(cfg)
    if spec.kind in (Protocol.EXISTING, Protocol.BENCHMARK):
        return _single_population(t, cfg.lambda_bs, spec)
    probs = spec.probs(cfg.M)
    if spec.kind is Protocol.SLOTTED_MULTIBAND:
        return _clamp(math.fsum(_single_population(t, p * cfg.lambda_bs, spec) for p in probs) / cfg.M)
    if spec.scheme is Scheme.PN or spec.association is Association.NEAREST:
        raise UnsupportedCombination(f"no closed form for {spec.label}")
    return _clamp(math.fsum(
        w * _allocation_success(t, cfg.lambda_bs, probs, alloc)
        for alloc, w in enumerate_compositions(cfg.N, cfg.M)))


def _allocation_success(t: _Terms, lam_b: float, probs: Sequence[float], alloc: Sequence[int]) -> float:
    weight = math.fsum(_harmonic0(n) * p for n, p in zip(alloc, probs)) * lam_b
    if weight == 0.0:
        return 0.0
    if t.lam_total == 0.0:
        return 1.0
    return -math.expm1(-t.xi * t.tau**-t.delta * weight / t.lam_total)


def success_given_allocation(cfg: NetworkConfig, spec: ProtocolSpec, alloc: Sequence[int]) -> float:
    """Unslotted multiband success when band ``m`` carries ``alloc[m]`` copies."""
    validate_config(cfg, spec)
    if (spec.kind is not Protocol.UNSLOTTED_MULTIBAND or spec.scheme is not Scheme.RANDOM
            or spec.association is not Association.NONE):
        raise UnsupportedCombination(f"allocation form applies to unslotted/random/none, not {spec.label}")
    if len(alloc) != cfg.M or sum(alloc) != cfg.N or any(n < 0 for n in alloc):
        raise ValueError(f"allocation {tuple(alloc)} is not a composition of N={cfg.N} into M={cfg.M} parts")
    return _clamp(_allocation_success(_terms(cfg), cfg.lambda_bs, spec.probs(cfg.M), alloc))


def _compositions(n: int, m: int) -> Iterator[tuple[int, ...]]:
    if m == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, m - 1):
            yield (first,) + rest


@lru_cache(maxsize=64)
def _composition_table(n: int, m: int) -> tuple[tuple[tuple[int, ...], float], ...]:
    total = float(m) ** n
    out = []
    for alloc in _compositions(n, m):
        coef = math.factorial(n)
        for k in alloc:
            coef //= math.factorial(k)
        out.append((alloc, coef / total))
    return tuple(out)


def enumerate_compositions(N: int, M: int) -> tuple[tuple[tuple[int, ...], float], ...]:
    """All ordered splits of ``N`` copies over ``M`` bands with multinomial weights."""
    if N < 1 or M < 1:
        raise ValueError("N and M must be >= 1")
    if math.comb(N + M - 1, M - 1) > MAX_COMPOSITIONS:
        raise OverflowError(f"C({N + M - 1}, {M - 1}) compositions exceed {MAX_COMPOSITIONS}")
    return _composition_table(N, M)


# -- transmission capacity -------------------------------------------------

@dataclass(frozen=True)
class CapacityQuery:
    gamma: float
    protocol: ProtocolSpec

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")


class CapacityEstimate(NamedTuple):
    density: float      # supported devices per m^2, already multiplied by gamma
    reachable: bool     # False when even an empty IoT network misses gamma


def _is_uniform(spec: ProtocolSpec, M: int) -> bool:
    return all(abs(p - 1.0 / M) < 1e-12 for p in spec.probs(M))


def capacity_closed_form(cfg: NetworkConfig, q: CapacityQuery) -> float:
    """Closed-form capacity in devices per m^2, clamped at zero."""
    spec = q.protocol
    validate_config(cfg, spec)
    if spec.scheme is not Scheme.RANDOM:
        raise UnsupportedCombination(f"no closed-form capacity for {spec.label}")
    d = derive_params(cfg)
    g = q.gamma
    N, M = cfg.N, cfg.M
    base = cfg.B_hz / (cfg.beta_t * cfg.beta_f * cfg.b_hz * cfg.activity)
    signal = d.xi * cfg.tau**-d.delta * harmonic_number(N) * cfg.lambda_bs
    inc = d.p_hat_inc**d.delta * min(1.0, cfg.B_inc_hz / (M * cfg.B_hz)) * cfg.lambda_inc
    log_term = math.log(1.0 / (1.0 - g))
    odds = g / (1.0 - g)
    kind, assoc = spec.kind, spec.association

    if kind in (Protocol.EXISTING, Protocol.BENCHMARK):
        if assoc is Association.NONE:
            value = g * M * base * (signal / (N * log_term) - inc / N)
        else:
            _need_single_copy(N, spec)
            value = g * M * base * (signal / odds - inc)
    elif kind is Protocol.SLOTTED_MULTIBAND and _is_uniform(spec, M):
        if assoc is Association.NONE:
            value = g * base * (signal / (N * log_term) - M * inc / N)
        else:
            _need_single_copy(N, spec)
            value = g * M * base * ((signal / M) / odds - inc)
    else:
        raise UnsupportedCombination(f"no closed-form capacity for {spec.label}")
    return max(0.0, value)


def _need_single_copy(N: int, spec: ProtocolSpec) -> None:
    if N != 1:
        raise UnsupportedCombination(f"closed-form capacity for {spec.label} needs N=1, got N={N}")


def capacity_numeric(cfg: NetworkConfig, q: CapacityQuery, *, cap: float = 1e18) -> CapacityEstimate:
    """Invert the success probability in the IoT density and return ``gamma * density``.

    The success probability is decreasing in the IoT density, so the root is
    bracketed by doubling an upper bound until it falls below ``gamma``.
    """
    spec = q.protocol
    g = q.gamma

    def f(lam: float) -> float:
        return success_probability(cfg.with_(lambda_iot=lam), spec)

    f0 = f(0.0)
    if f0 < g:
        return CapacityEstimate(0.0, False)
    if f0 == g:
        return CapacityEstimate(0.0, True)
    hi = max(cfg.lambda_iot, 1e-12)
    while f(hi) >= g:
        if hi > cap:
            return CapacityEstimate(math.inf, True)
        hi *= 2.0
    lam = brentq(lambda x: f(x) - g, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=1000)
    return CapacityEstimate(g * lam, True)


def success_curve(cfg: NetworkConfig, spec: ProtocolSpec, taus: Sequence[float]) -> list[float]:
    return [success_probability(cfg.with_(tau=t), spec) for t in taus]
