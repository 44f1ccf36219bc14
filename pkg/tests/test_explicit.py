import numpy as np
import pytest

from unbiot.model import Protocol, ProtocolSpec, Scheme, table2_config
from unbiot.sim import (InterferenceField, Mode, OverlapRule, SimOptions, Transmission, UnsupportedFidelity,
                        estimate_success_probability, explicit_overlap)


def rule(beta_t=2.0, beta_f=2.0, M=1):
    return OverlapRule.from_config(table2_config(beta_t=beta_t, beta_f=beta_f, M=M))


def test_unslotted_boundaries():
    r = rule()
    t, b = r.duration, r.bandwidth
    a = Transmission(10.0, 1000.0)
    assert explicit_overlap(a, Transmission(10.0 + 0.999 * t, 1000.0 + 0.999 * b), r)
    # touching exactly at the message duration is not a collision
    assert not explicit_overlap(a, Transmission(10.0 + t, 1000.0), r)
    assert not explicit_overlap(a, Transmission(10.0 - t, 1000.0), r)
    assert not explicit_overlap(a, Transmission(10.0, 1000.0 + b), r)


def test_unslotted_wraps_around():
    r = rule()
    assert explicit_overlap(Transmission(0.1, 0.0), Transmission(r.period - 0.1, r.span - 10.0), r)


def test_slotted_rules():
    r = rule(1.0, 1.0)
    assert r.period == round(123.92857142857143 / 0.347)
    assert r.span == 1 * (200000 // 600)
    assert explicit_overlap(Transmission(3, 7), Transmission(3, 7), r)
    assert not explicit_overlap(Transmission(3, 7), Transmission(4, 7), r)
    assert not explicit_overlap(Transmission(3, 7), Transmission(3, 8), r)


def test_unslotted_time_overlap_rate():
    r = rule()
    g = np.random.default_rng(0)
    n = 200_000
    s = g.uniform(0, r.period, (n, 2))
    hits = sum(explicit_overlap(Transmission(a, 0.0), Transmission(b, 0.0), r) for a, b in s)
    p = 2 * r.duration / r.period
    assert abs(hits / n - p) < 4 * np.sqrt(p * (1 - p) / n)


def test_unsupported_fidelity():
    with pytest.raises(UnsupportedFidelity):
        OverlapRule.from_config(table2_config(beta_t=1.5))
    cfg = table2_config(M=1)
    spec = ProtocolSpec(Protocol.EXISTING)
    with pytest.raises(UnsupportedFidelity):
        estimate_success_probability(cfg, spec, SimOptions(mode=Mode.EXPLICIT, realizations=2,
                                                           interference=InterferenceField.PER_BS))
    with pytest.raises(UnsupportedFidelity):
        estimate_success_probability(cfg, ProtocolSpec(Protocol.EXISTING, Scheme.PN),
                                     SimOptions(mode=Mode.EXPLICIT, realizations=2))


@pytest.mark.parametrize("beta_t, beta_f", [(1.0, 1.0), (2.0, 2.0)])
def test_explicit_matches_thinned(beta_t, beta_f):
    cfg = table2_config(M=1, beta_t=beta_t, beta_f=beta_f)
    spec = ProtocolSpec(Protocol.EXISTING)
    est = [estimate_success_probability(cfg, spec, SimOptions(mode=m, realizations=600, master_seed=2,
                                                              torus_side_m=40e3)) for m in Mode]
    assert abs(est[0].value - est[1].value) <= est[0].ci_half + est[1].ci_half
