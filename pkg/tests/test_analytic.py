"""Closed forms against quadrature and brute-force enumeration."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from unbiot.analytic import (CapacityQuery, UnsupportedCombination, capacity_closed_form,
                             capacity_numeric, enumerate_compositions, harmonic_number,
                             success_given_allocation, success_probability)
from unbiot.model import Association, Protocol, ProtocolSpec, Scheme, derive_params, table2_config
from unbiot.validation import pgfl_quadrature

R, PN = Scheme.RANDOM, Scheme.PN
NONE, NEAR = Association.NONE, Association.NEAREST


def _c(cfg):
    """Exponent of the single-message success at distance x: exp(-c x^2)."""
    d = derive_params(cfg)
    return math.pi / d.xi * cfg.tau**d.delta * d.interference_density


def quad_inf(f, scale):
    pieces = ((0, scale), (scale, 10 * scale), (10 * scale, np.inf))
    return sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-11, limit=200)[0] for a, b in pieces)


@pytest.mark.parametrize("N", [1, 2, 3, 6])
def test_random_noassoc_against_quadrature(N):
    cfg = table2_config(N=N)
    c = _c(cfg)
    # 1 - exp(-lambda_B * integral of P(some copy decoded at x))
    mean = cfg.lambda_bs * quad_inf(lambda x: 2 * math.pi * x * (1 - (1 - math.exp(-c * x * x)) ** N),
                                    1 / math.sqrt(c))
    expected = 1 - math.exp(-mean)
    assert success_probability(cfg, ProtocolSpec(Protocol.BENCHMARK, R, NONE)) == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("N", [1, 2, 3, 5])
def test_random_nearest_against_quadrature(N):
    cfg = table2_config(N=N)
    c, lb = _c(cfg), cfg.lambda_bs

    def f(x):
        return 2 * math.pi * lb * x * math.exp(-math.pi * lb * x * x) * (1 - (1 - math.exp(-c * x * x)) ** N)
    expected = quad_inf(f, 1 / math.sqrt(math.pi * lb))
    got = success_probability(cfg, ProtocolSpec(Protocol.BENCHMARK, R, NEAR))
    assert got == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("N", [2, 3, 8, 20])
def test_pn_alternating_sum_against_integral(N):
    """Without incumbents the PN sum of k^-delta has a Mellin integral form."""
    cfg = table2_config(N=N, lambda_inc=0.0)
    d = derive_params(cfg)
    dl = d.delta
    # sum_{k>=1} C(N,k)(-1)^k k^-delta = 1/Gamma(delta) int t^(delta-1) ((1 - e^-t)^N - 1) dt
    s = quad_inf(lambda t: t ** (dl - 1) * ((-np.expm1(-t)) ** N - 1), 1.0) / special.gamma(dl)
    expected = -math.expm1(d.xi * cfg.tau**-dl * cfg.lambda_bs * s / d.lambda_iot_thinned)
    got = success_probability(cfg, ProtocolSpec(Protocol.BENCHMARK, PN, NONE))
    assert got == pytest.approx(expected, rel=1e-7)


def test_single_copy_schemes_coincide():
    cfg = table2_config(N=1)
    for assoc in Association:
        a = success_probability(cfg, ProtocolSpec(Protocol.BENCHMARK, R, assoc))
        b = success_probability(cfg, ProtocolSpec(Protocol.BENCHMARK, PN, assoc))
        assert a == pytest.approx(b, rel=1e-12)


def test_harmonic_identity():
    # sum_k C(N,k)(-1)^(k+1)/k = H_N, evaluated in exact rationals
    from fractions import Fraction
    for n in range(1, 30):
        s = sum(Fraction((-1) ** (k + 1) * math.comb(n, k), k) for k in range(1, n + 1))
        assert float(s) == pytest.approx(harmonic_number(n), rel=1e-15)


def test_unslotted_against_brute_force_assignment():
    """Average over all M^N band assignments of the device's copies."""
    cfg = table2_config(N=3, M=4)
    d = derive_params(cfg)
    probs = (0.1, 0.2, 0.3, 0.4)
    spec = ProtocolSpec(Protocol.UNSLOTTED_MULTIBAND, band_probs=probs)
    k = d.xi * cfg.tau**-d.delta * cfg.lambda_bs / d.interference_density
    total = 0.0
    for bands in itertools.product(range(cfg.M), repeat=cfg.N):
        counts = [bands.count(m) for m in range(cfg.M)]
        w = sum(probs[m] * sum(1 / j for j in range(1, n + 1)) for m, n in enumerate(counts))
        total += 1 - math.exp(-k * w)
    # the device picks its bands uniformly
    assert success_probability(cfg, spec) == pytest.approx(total / cfg.M**cfg.N, rel=1e-12)


def test_success_given_allocation():
    cfg = table2_config(N=3, M=2)
    spec = ProtocolSpec(Protocol.UNSLOTTED_MULTIBAND)
    all_in_one = success_given_allocation(cfg, spec, (3, 0))
    split = success_given_allocation(cfg, spec, (2, 1))
    assert split > all_in_one
    with pytest.raises(ValueError):
        success_given_allocation(cfg, spec, (2, 2))
    with pytest.raises(UnsupportedCombination):
        success_given_allocation(cfg, ProtocolSpec(Protocol.SLOTTED_MULTIBAND), (2, 1))


def test_slotted_band_average():
    cfg = table2_config()
    probs = (0.1, 0.1, 0.2, 0.2, 0.4)
    got = success_probability(cfg, ProtocolSpec(Protocol.SLOTTED_MULTIBAND, band_probs=probs))
    # each band m is a benchmark network with BS density p_m lambda_B, device band uniform
    per_band = [success_probability(cfg.with_(lambda_bs=p * cfg.lambda_bs), ProtocolSpec(Protocol.BENCHMARK))
                for p in probs]
    assert got == pytest.approx(sum(per_band) / cfg.M, rel=1e-12)


def test_unsupported_combinations():
    cfg = table2_config()
    for spec in (ProtocolSpec(Protocol.UNSLOTTED_MULTIBAND, PN, NONE),
                 ProtocolSpec(Protocol.UNSLOTTED_MULTIBAND, R, NEAR)):
        with pytest.raises(UnsupportedCombination):
            success_probability(cfg, spec)


def test_compositions_small_case():
    comps = dict(enumerate_compositions(2, 2))
    assert comps == {(2, 0): 0.25, (1, 1): 0.5, (0, 2): 0.25}


def test_composition_guard():
    with pytest.raises(OverflowError):
        enumerate_compositions(40, 40)


def test_pgfl_quadrature_alpha4():
    # alpha = 4: exp(-lambda pi^2/2 sqrt(tau) x^2) by hand
    tau, lam, x = 3.0, 1e-6, 300.0
    assert pgfl_quadrature(tau, 4.0, lam, x) == pytest.approx(
        math.exp(-lam * math.pi**2 / 2 * math.sqrt(tau) * x * x), rel=1e-9)


@pytest.mark.parametrize("kind, assoc, N", [
    (Protocol.BENCHMARK, NONE, 3), (Protocol.SLOTTED_MULTIBAND, NONE, 3),
    (Protocol.BENCHMARK, NEAR, 1), (Protocol.SLOTTED_MULTIBAND, NEAR, 1)])
@pytest.mark.parametrize("gamma", [0.3, 0.5, 0.7])
def test_capacity_closed_form_inverts_success(kind, assoc, N, gamma):
    cfg = table2_config(N=N)
    spec = ProtocolSpec(kind, R, assoc)
    cap = capacity_closed_form(cfg, CapacityQuery(gamma, spec))
    assert cap > 0
    # capacity = gamma * lambda_iot at which success equals gamma
    assert success_probability(cfg.with_(lambda_iot=cap / gamma), spec) == pytest.approx(gamma, abs=1e-10)


def test_capacity_unreachable_and_unsupported():
    cfg = table2_config(N=1, lambda_inc=1e-3)
    q = CapacityQuery(0.99, ProtocolSpec(Protocol.SLOTTED_MULTIBAND, R, NEAR))
    assert capacity_closed_form(cfg, q) == 0.0
    assert capacity_numeric(cfg, q) == (0.0, False)
    with pytest.raises(UnsupportedCombination):
        capacity_closed_form(cfg, CapacityQuery(0.5, ProtocolSpec(Protocol.BENCHMARK, PN)))
    with pytest.raises(UnsupportedCombination):
        capacity_closed_form(table2_config(N=2), CapacityQuery(0.5, ProtocolSpec(Protocol.BENCHMARK, R, NEAR)))
    with pytest.raises(ValueError):
        CapacityQuery(1.0, ProtocolSpec(Protocol.BENCHMARK))


# -- properties ------------------------------------------------------------

specs = st.sampled_from([ProtocolSpec(k, s, a) for k in (Protocol.BENCHMARK, Protocol.SLOTTED_MULTIBAND)
                         for s in Scheme for a in Association]
                        + [ProtocolSpec(Protocol.UNSLOTTED_MULTIBAND)])
configs = st.builds(
    lambda a, n, m, tdb, li: table2_config(alpha=a, N=n, M=m, tau=10 ** (tdb / 10), lambda_iot=li),
    st.floats(2.2, 6.0), st.integers(1, 8), st.integers(1, 6), st.floats(-20, 30), st.floats(1e-5, 1e-1))


@settings(max_examples=150, deadline=None)
@given(configs, specs)
def test_probability_range(cfg, spec):
    p = success_probability(cfg, spec)
    assert 0.0 <= p <= 1.0


@settings(max_examples=80, deadline=None)
@given(configs, specs, st.floats(1.0, 10.0))
def test_monotone_in_threshold_and_load(cfg, spec, factor):
    p = success_probability(cfg, spec)
    assert success_probability(cfg.with_(tau=cfg.tau * factor), spec) <= p + 1e-12
    assert success_probability(cfg.with_(lambda_iot=cfg.lambda_iot * factor), spec) <= p + 1e-12


@settings(max_examples=80, deadline=None)
@given(configs)
def test_random_dominates_pn(cfg):
    for kind in (Protocol.BENCHMARK, Protocol.SLOTTED_MULTIBAND):
        for assoc in Association:
            r = success_probability(cfg, ProtocolSpec(kind, R, assoc))
            p = success_probability(cfg, ProtocolSpec(kind, PN, assoc))
            assert r >= p - 1e-12


@settings(max_examples=40, deadline=None)
@given(configs)
def test_noassoc_dominates_nearest(cfg):
    a = success_probability(cfg, ProtocolSpec(Protocol.BENCHMARK, R, NONE))
    b = success_probability(cfg, ProtocolSpec(Protocol.BENCHMARK, R, NEAR))
    assert a >= b - 1e-12
