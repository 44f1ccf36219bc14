"""Built-in property checks behind ``unbiot validate``.

Each check recomputes a quantity through an independent route (quadrature,
brute-force enumeration, sampling, or a second formula) and compares.
``quick`` shrinks the Monte-Carlo workloads so the suite runs in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats

from . import model, rng
from .analytic import (CapacityQuery, capacity_closed_form, capacity_numeric,
                       enumerate_compositions, harmonic_number, success_probability)
from .experiments import agreement_sweep, closed_form_specs
from .model import Association, NetworkConfig, Protocol, ProtocolSpec, Scheme, table2_config
from .sim import (InterferenceField, Mode, SimOptions, estimate_success_probability,
                  nearest_listening_bs, sample_hppp)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_config(g: np.random.Generator, base: NetworkConfig) -> NetworkConfig:
    return base.with_(
        lambda_bs=base.lambda_bs * 10 ** g.uniform(-1, 1),
        lambda_iot=base.lambda_iot * 10 ** g.uniform(-2, 1),
        lambda_inc=base.lambda_inc * 10 ** g.uniform(-2, 2),
        alpha=float(g.uniform(2.2, 5.0)),
        tau=10 ** (g.uniform(-10, 20) / 10),
        N=int(g.integers(1, 9)),
        M=int(g.integers(1, 9)),
    )


def check_jensen(seed: int, n: int = 100) -> CheckResult:
    g = np.random.default_rng(seed)
    base = table2_config()
    worst = math.inf
    for _ in range(n):
        cfg = _random_config(g, base)
        for kind in (Protocol.BENCHMARK, Protocol.SLOTTED_MULTIBAND):
            for assoc in Association:
                r = success_probability(cfg, ProtocolSpec(kind, Scheme.RANDOM, assoc))
                p = success_probability(cfg, ProtocolSpec(kind, Scheme.PN, assoc))
                worst = min(worst, r - p)
    return CheckResult("jensen_random_ge_pn", worst >= -1e-12, f"{n} configs, min(R - PN) = {worst:.3e}")


def check_harmonic_ratio(n_max: int = 64) -> CheckResult:
    r = [harmonic_number(n) / n for n in range(1, n_max + 1)]
    ok = all(a > b for a, b in zip(r, r[1:]))
    return CheckResult("harmonic_ratio_decreasing", ok, f"H_N/N for N=1..{n_max}")


def check_uniform_optimal(seed: int, n: int = 50) -> CheckResult:
    g = np.random.default_rng(seed)
    cfg = table2_config()
    uni = success_probability(cfg, ProtocolSpec(Protocol.SLOTTED_MULTIBAND))
    worst = -math.inf
    for _ in range(n):
        p = g.dirichlet(np.full(cfg.M, 2.0))
        p = tuple(float(x) for x in p / math.fsum(p))
        v = success_probability(cfg, ProtocolSpec(Protocol.SLOTTED_MULTIBAND, band_probs=p))
        worst = max(worst, v - uni)
    return CheckResult("uniform_band_probs_optimal", worst <= 1e-12,
                       f"{n} perturbations, max(perturbed - uniform) = {worst:.3e}")


def pgfl_closed(tau, alpha, lam, x, p_hat=1.0) -> float:
    delta = 2.0 / alpha
    return math.exp(-math.pi / model.xi_constant(delta) * (tau * p_hat) ** delta * lam * x * x)


def pgfl_quadrature(tau, alpha, lam, x, p_hat=1.0) -> float:
    s = tau * x**alpha * p_hat
    knee = s ** (1.0 / alpha)

    def f(y):
        return s * y / (y**alpha + s)   # y - y / (1 + s y^-alpha)

    a, _ = integrate.quad(f, 0.0, knee, epsabs=0.0, epsrel=1e-12, limit=200)
    b, _ = integrate.quad(f, knee, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return math.exp(-2.0 * math.pi * lam * (a + b))


def check_pgfl(seed: int, n: int = 20) -> CheckResult:
    g = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        tau = 10 ** g.uniform(-1, 2)
        alpha = g.uniform(2.5, 5.0)
        lam = 10 ** g.uniform(-8, -5)
        x = g.uniform(50.0, 2000.0)
        c, q = pgfl_closed(tau, alpha, lam, x), pgfl_quadrature(tau, alpha, lam, x)
        worst = max(worst, abs(c - q) / q)
    return CheckResult("pgfl_quadrature", worst <= 1e-6, f"{n} tuples, max rel err = {worst:.2e}")


def check_nearest_terms(cfg: NetworkConfig | None = None) -> CheckResult:
    """Each term of the nearest-BS sum against direct integration over the distance law."""
    cfg = table2_config() if cfg is None else cfg
    d = model.derive_params(cfg)
    lam_b, lam = cfg.lambda_bs, d.interference_density
    worst = 0.0
    for k in range(0, cfg.N + 1):
        c = k * math.pi / d.xi * cfg.tau**d.delta * lam

        def f(x):
            return 2 * math.pi * lam_b * x * math.exp(-math.pi * lam_b * x * x) * math.exp(-c * x * x)

        scale = 1.0 / math.sqrt(math.pi * lam_b)
        val = sum(integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
                  for a, b in ((0.0, scale), (scale, 10 * scale), (10 * scale, np.inf)))
        closed = 1.0 / (1.0 + k * cfg.tau**d.delta * lam / (d.xi * lam_b))
        worst = max(worst, abs(val - closed))
    return CheckResult("nearest_terms_quadrature", worst <= 1e-8, f"max abs err = {worst:.2e}")


def nearest_distances(lam_b: float, draws: int, seed: int) -> np.ndarray:
    side = 20.0 / math.sqrt(lam_b)
    centre = (0.5 * side, 0.5 * side)
    out = np.empty(draws)
    for r in range(draws):
        pts = sample_hppp(lam_b, side, rng.CounterStream.for_realization(seed, r, rng.S_BS))
        j = nearest_listening_bs(centre, pts, side)
        out[r] = math.hypot(*(pts[j] - centre)) if j is not None else math.inf
    return out


def check_nearest_ks(seed: int, draws: int) -> CheckResult:
    lam_b = table2_config().lambda_bs
    x = nearest_distances(lam_b, draws, seed)
    res = stats.kstest(x, lambda v: -np.expm1(-math.pi * lam_b * np.asarray(v) ** 2))
    return CheckResult("nearest_distance_ks", bool(res.pvalue > 0.01),
                       f"{draws} draws, D = {res.statistic:.4f}, p = {res.pvalue:.3f}")


def check_capacity_inversion() -> CheckResult:
    cfg = table2_config()
    worst, count = 0.0, 0
    cases = [(cfg, ProtocolSpec(Protocol.BENCHMARK)),
             (cfg.with_(M=1), ProtocolSpec(Protocol.EXISTING)),
             (cfg, ProtocolSpec(Protocol.SLOTTED_MULTIBAND)),
             (cfg.with_(N=1), ProtocolSpec(Protocol.BENCHMARK, association=Association.NEAREST)),
             (cfg.with_(N=1), ProtocolSpec(Protocol.SLOTTED_MULTIBAND, association=Association.NEAREST))]
    for c, spec in cases:
        for gamma in (0.5, 0.7, 0.8, 0.9, 0.95):
            q = CapacityQuery(gamma, spec)
            closed = capacity_closed_form(c, q)
            if closed <= 0:
                continue
            num = capacity_numeric(c, q).density
            worst = max(worst, abs(num - closed) / closed)
            count += 1
    return CheckResult("capacity_numeric_vs_closed", count > 0 and worst <= 1e-6,
                       f"{count} cases, max rel err = {worst:.2e}")


def check_compositions() -> CheckResult:
    ok = True
    for N in range(1, 7):
        for M in range(1, 7):
            comps = enumerate_compositions(N, M)
            ok &= len(comps) == math.comb(N + M - 1, M - 1)
            ok &= abs(math.fsum(w for _, w in comps) - 1.0) <= 1e-12
            ok &= len({a for a, _ in comps}) == len(comps)
    return CheckResult("composition_enumeration", ok, "N, M in 1..6")


def check_slotted_equivalence() -> CheckResult:
    cfg = table2_config(lambda_inc=0.0)
    sm = success_probability(cfg, ProtocolSpec(Protocol.SLOTTED_MULTIBAND))
    single = success_probability(cfg.with_(M=1), ProtocolSpec(Protocol.EXISTING))
    return CheckResult("slotted_equals_single_band", abs(sm - single) <= 1e-12,
                       f"|diff| = {abs(sm - single):.1e}")


def check_agreement(seed: int, quick: bool, jobs: int) -> CheckResult:
    """Closed forms against Monte-Carlo under the analysis' per-BS interference."""
    opts = SimOptions(realizations=2000 if quick else 10_000, master_seed=seed,
                      interference=InterferenceField.PER_BS)
    specs = [ProtocolSpec(Protocol.BENCHMARK)] if quick else closed_form_specs()
    taus = (5.0,) if quick else None
    kw = {"taus_db": taus} if taus else {}
    res = agreement_sweep(opts=opts, specs=specs, jobs=jobs, **kw)
    worst = max(abs(r) for _, _, r in res.residuals())
    # 0.015 at 1e4 realizations; the quick run allows its larger sampling error
    tol = 0.015 if not quick else 0.035
    return CheckResult("analytic_vs_mc", worst <= tol,
                       f"{len(res.residuals())} points, max |MC - analytic| = {worst:.4f} (tol {tol})")


def check_explicit(seed: int, quick: bool) -> CheckResult:
    cfg = table2_config(M=1)
    spec = ProtocolSpec(Protocol.EXISTING)
    n = 400 if quick else 2000
    est = [estimate_success_probability(cfg, spec, SimOptions(mode=m, realizations=n, master_seed=seed,
                                                              torus_side_m=40e3)) for m in Mode]
    diff = abs(est[0].value - est[1].value)
    bound = est[0].ci_half + est[1].ci_half
    return CheckResult("explicit_vs_thinned", diff <= bound,
                       f"thinned {est[0].value:.4f}, explicit {est[1].value:.4f}, |diff| {diff:.4f} <= {bound:.4f}")


def run_checks(quick: bool = False, seed: int = 1, jobs: int = 1) -> list[CheckResult]:
    checks: list[Callable[[], CheckResult]] = [
        lambda: check_jensen(seed),
        check_harmonic_ratio,
        lambda: check_uniform_optimal(seed),
        lambda: check_pgfl(seed),
        check_nearest_terms,
        lambda: check_nearest_ks(seed, 2000 if quick else 10_000),
        check_capacity_inversion,
        check_compositions,
        check_slotted_equivalence,
        lambda: check_agreement(seed, quick, jobs),
        lambda: check_explicit(seed, quick),
    ]
    out = []
    for c in checks:
        try:
            out.append(c())
        except Exception as exc:  # noqa: BLE001 - a crash is a failed check
            name = getattr(c, "__name__", "check")
            out.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return out
