"""Parameter sweeps, summary statistics and figure presets.

Every preset writes one CSV with the columns
``param,protocol,scheme,association,engine,value,ci_half,realizations,seed``
and one SVG chart. Curve variants (access case, incumbent density) are
appended to the protocol name in brackets, e.g. ``slotted[high]``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .analytic import CapacityQuery, UnsupportedCombination, capacity_closed_form, \
    capacity_numeric, success_probability
from .model import (CONFIG_KEYS, Association, NetworkConfig, Protocol, ProtocolSpec, Scheme,
                    db_to_linear, preset_area_m2, table2_config)
from .sim import SimOptions, sinr_cdf, estimate_success_probability

CSV_HEADER = ("param", "protocol", "scheme", "association", "engine", "value", "ci_half",
              "realizations", "seed")
ENGINES = ("analytic", "mc", "both")
FIGURES = ("fig3", "fig4", "fig5", "fig6a", "fig6b", "fig7")
TAU_GRID_DB = tuple(float(x) for x in range(-10, 21))


class NotBracketed(ValueError):
    pass


def spec_of(kind, scheme=Scheme.RANDOM, assoc=Association.NONE) -> ProtocolSpec:
    return ProtocolSpec(Protocol(kind), Scheme(scheme), Association(assoc))


def config_for(cfg: NetworkConfig, spec: ProtocolSpec) -> NetworkConfig:
    """The existing protocol always runs on a single band."""
    return cfg.with_(M=1) if spec.kind is Protocol.EXISTING and cfg.M != 1 else cfg


# -- sweeps ----------------------------------------------------------------

@dataclass(frozen=True)
class Curve:
    spec: ProtocolSpec
    variant: str = ""

    @property
    def name(self) -> str:
        return f"{self.spec.kind.value}[{self.variant}]" if self.variant else self.spec.kind.value


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter over a grid, for several protocols.

    ``param`` is a config field, ``tau_db`` (threshold in dB), or one of the
    protocol fields ``kind``, ``scheme``, ``association`` (string grids).
    """

    base: NetworkConfig
    param: str
    grid: tuple
    protocols: tuple
    engine: str = "analytic"
    opts: SimOptions = field(default_factory=SimOptions)
    output: str | None = None

    def __post_init__(self):
        problems = sweep_problems(self)
        if problems:
            raise ValueError("; ".join(problems))


_SPEC_FIELDS = {"kind": Protocol, "scheme": Scheme, "association": Association}


def sweep_problems(s: SweepSpec) -> list[str]:
    out = []
    if s.param not in CONFIG_KEYS and s.param != "tau_db" and s.param not in _SPEC_FIELDS:
        out.append(f"unknown parameter {s.param!r}")
    if len(s.grid) == 0:
        out.append("grid is empty")
    elif s.param not in _SPEC_FIELDS and list(s.grid) != sorted(s.grid):
        out.append("grid must be sorted")
    if s.engine not in ENGINES:
        out.append(f"engine must be one of {ENGINES}")
    if not s.protocols:
        out.append("no protocols")
    return out


@dataclass(frozen=True)
class SweepRow:
    param: object
    protocol: str
    scheme: str
    association: str
    engine: str
    value: float | None
    ci_half: float | None = None
    realizations: int | None = None
    seed: int | None = None
    error: str | None = None


@dataclass
class SweepResult:
    rows: list

    def values(self, protocol: str, engine: str = "analytic", scheme=None, association=None) -> list:
        return [r.value for r in self.rows if r.protocol == protocol and r.engine == engine
                and (scheme is None or r.scheme == scheme)
                and (association is None or r.association == association)]

    def residuals(self) -> list[tuple]:
        """``(param, curve, mc - analytic)`` wherever both engines produced a value."""
        ana = {(r.param, r.protocol, r.scheme, r.association): r.value
               for r in self.rows if r.engine == "analytic" and r.value is not None}
        out = []
        for r in self.rows:
            key = (r.param, r.protocol, r.scheme, r.association)
            if r.engine == "mc" and r.value is not None and key in ana:
                out.append((r.param, f"{r.protocol}/{r.scheme}/{r.association}", r.value - ana[key]))
        return out

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def _apply(cfg: NetworkConfig, curve: Curve, param: str, value):
    spec = curve.spec
    if param == "tau_db":
        cfg = cfg.with_(tau=db_to_linear(value))
    elif param in _SPEC_FIELDS:
        spec = replace(spec, **{param: _SPEC_FIELDS[param](value)})
    else:
        cfg = cfg.with_(**{param: type(getattr(cfg, param))(value)})
    return config_for(cfg, spec), spec


def _row(param, curve: Curve, spec: ProtocolSpec, engine: str, **kw) -> SweepRow:
    return SweepRow(param, curve.name, spec.scheme.value, spec.association.value, engine, **kw)


def _curve(c) -> Curve:
    return c if isinstance(c, Curve) else Curve(c)


def run_sweep(s: SweepSpec, *, jobs: int = 1) -> SweepResult:
    """Evaluate every (grid point, protocol, engine) cell.

    Failures are recorded in the row's ``error`` field instead of aborting.
    When the parameter is ``tau_db`` and the Monte-Carlo engine runs, one
    set of realizations serves the whole grid.
    """
    rows: list[SweepRow] = []
    engines = ("analytic", "mc") if s.engine == "both" else (s.engine,)
    for c in map(_curve, s.protocols):
        mc_cache = None
        if "mc" in engines and s.param == "tau_db":
            try:
                cfg0, spec0 = _apply(s.base, c, "tau_db", s.grid[0])
                mc_cache = sinr_cdf(cfg0, spec0, s.opts, [db_to_linear(v) for v in s.grid], jobs=jobs)
            except Exception as exc:  # noqa: BLE001 - reported per row
                mc_cache = exc
        for k, v in enumerate(s.grid):
            for eng in engines:
                try:
                    cfg, spec = _apply(s.base, c, s.param, v)
                    if eng == "analytic":
                        rows.append(_row(v, c, spec, eng, value=success_probability(cfg, spec)))
                    else:
                        if isinstance(mc_cache, Exception):
                            raise mc_cache
                        est = mc_cache[k] if mc_cache is not None else \
                            estimate_success_probability(cfg, spec, s.opts, jobs=jobs)
                        rows.append(_row(v, c, spec, eng, value=est.value, ci_half=est.ci_half,
                                         realizations=est.realizations, seed=s.opts.master_seed))
                except Exception as exc:  # noqa: BLE001 - reported per row
                    spec = c.spec
                    rows.append(_row(v, c, spec, eng, value=None, error=f"{type(exc).__name__}: {exc}"))
    result = SweepResult(rows)
    if s.output:
        Path(s.output).write_text(result.to_csv(), encoding="utf-8", newline="")
    return result


# -- summary statistics ----------------------------------------------------

def median_sinr(taus_db: Sequence[float], success: Sequence[float], level: float = 0.5) -> float:
    """Threshold (dB) at which a non-increasing success curve crosses ``level``.

    Linear interpolation between the two bracketing grid points.
    """
    x = np.asarray(taus_db, dtype=float)
    y = np.asarray(success, dtype=float)
    for k in range(len(x) - 1):
        y0, y1 = y[k], y[k + 1]
        if y0 >= level >= y1 and y0 != y1:
            return float(x[k] + (y0 - level) * (x[k + 1] - x[k]) / (y0 - y1))
        if y0 == level:
            return float(x[k])
    if len(x) and y[-1] == level:
        return float(x[-1])
    raise NotBracketed(f"curve never crosses {level}")


def cell_edge_sinr(taus_db: Sequence[float], success: Sequence[float]) -> float:
    """Threshold (dB) where success equals 0.95, the 5th percentile of max SINR."""
    return median_sinr(taus_db, success, 0.95)


def threshold_db(cfg: NetworkConfig, spec: ProtocolSpec, level: float = 0.5,
                 lo: float = -80.0, hi: float = 80.0) -> float:
    """Exact crossing of the closed-form success curve, found by root bracketing."""
    cfg = config_for(cfg, spec)

    def f(t):
        return success_probability(cfg.with_(tau=db_to_linear(t)), spec) - level

    if f(lo) < 0 or f(hi) > 0:
        raise NotBracketed(f"{spec.label} does not cross {level} in [{lo}, {hi}] dB")
    return brentq(f, lo, hi, xtol=1e-10)


@dataclass(frozen=True)
class CapacityRow:
    gamma: float
    curve: str
    scheme: str
    association: str
    engine: str         # "numeric" (inverted success) or "closed_form"
    devices: float      # devices over the deployment area
    reachable: bool


def capacity_curve(cfg: NetworkConfig, protocols: Iterable, gammas: Sequence[float],
                   area_m2: float | None = None, closed_form: bool = True) -> list[CapacityRow]:
    """Supported device count per protocol and success constraint."""
    area = preset_area_m2() if area_m2 is None else area_m2
    out = []
    for c in map(_curve, protocols):
        spec = c.spec
        cc = config_for(cfg, spec)
        for g in gammas:
            q = CapacityQuery(g, spec)
            est = capacity_numeric(cc, q)
            out.append(CapacityRow(g, c.name, spec.scheme.value, spec.association.value, "numeric",
                                   est.density * area, est.reachable))
            if closed_form:
                try:
                    v = capacity_closed_form(cc, q)
                except UnsupportedCombination:
                    continue
                out.append(CapacityRow(g, c.name, spec.scheme.value, spec.association.value,
                                       "closed_form", v * area, v > 0))
    return out


# -- output ----------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def rows_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        ci = "error" if r.error else r.ci_half
        w.writerow([_fmt(x) for x in (r.param, r.protocol, r.scheme, r.association, r.engine,
                                      r.value, ci, r.realizations, r.seed)])
    return buf.getvalue()


def _svg(path: Path, title: str, xlabel: str, ylabel: str, series: list, logy: bool = False):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "unbiot", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.6))
        for label, x, y, kind in series:
            if kind == "mc":
                ax.plot(x, y, linestyle="none", marker="o", markersize=3, label=label)
            else:
                ax.plot(x, y, label=label)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if logy:
            ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _series(rows: list[SweepRow]) -> list:
    groups: dict = {}
    for r in rows:
        if r.value is None:
            continue
        key = (r.protocol, r.scheme, r.association, r.engine)
        groups.setdefault(key, ([], []))
        groups[key][0].append(float(r.param))
        groups[key][1].append(r.value)
    return [(f"{p}/{s}/{a} ({e})", x, y, e) for (p, s, a, e), (x, y) in groups.items()]


# -- figure presets --------------------------------------------------------

ACCESS_CASES = (("slotted-both", 1.0, 1.0), ("slotted-time", 1.0, 2.0),
                ("slotted-freq", 2.0, 1.0), ("unslotted", 2.0, 2.0))

FIG4_CURVES = (
    ("existing", "random", "none"),
    ("benchmark", "random", "none"),
    ("slotted", "random", "none"),
    ("unslotted", "random", "none"),
    ("slotted", "random", "nearest"),
    ("slotted", "pn", "nearest"),
    ("unslotted", "pn", "none"),
    ("slotted", "pn", "none"),
)

DENSITY_CASES = ("low", "high")


def incumbent_density(cfg: NetworkConfig, case: str) -> float:
    """``low`` keeps the configured value; ``high`` matches the active IoT density."""
    if case == "low":
        return cfg.lambda_inc
    if case == "high":
        return cfg.lambda_iot * cfg.activity
    raise ValueError(f"unknown density case {case!r}")


def _tau_rows(base, curves, engine, opts, jobs, cfg_for_curve=None) -> list:
    rows = []
    for c in curves:
        cfg = cfg_for_curve(c) if cfg_for_curve else base
        s = SweepSpec(cfg, "tau_db", TAU_GRID_DB, (c,), engine, opts)
        rows += [r for r in run_sweep(s, jobs=jobs).rows
                 if not (r.engine == "analytic" and r.error and "UnsupportedCombination" in r.error)]
    return rows


def _grid_rows(param, grid, curves_with_cfg, engine, opts, jobs) -> list:
    rows = []
    for c, cfg in curves_with_cfg:
        rows += run_sweep(SweepSpec(cfg, param, tuple(grid), (c,), engine, opts), jobs=jobs).rows
    return rows


def default_engine(fig: str) -> str:
    """Threshold sweeps carry Monte-Carlo markers; grid sweeps are analytic by default."""
    return "both" if fig in ("fig3", "fig4") else "analytic"


def figure_rows(fig: str, cfg: NetworkConfig | None = None, opts: SimOptions | None = None,
                jobs: int = 1, engine: str | None = None) -> tuple[list, dict]:
    """Rows and chart settings of one preset.

    ``engine`` is ``analytic`` or ``both``; None picks the preset default.
    Fig. 7 is always analytic.
    """
    engine = default_engine(fig) if engine is None else engine
    cfg = table2_config() if cfg is None else cfg
    opts = SimOptions() if opts is None else opts
    if fig == "fig3":
        curves = [Curve(spec_of("existing"), name) for name, _, _ in ACCESS_CASES]
        betas = {name: (bt, bf) for name, bt, bf in ACCESS_CASES}

        def cfg_for(c):
            bt, bf = betas[c.variant]
            return cfg.with_(beta_t=bt, beta_f=bf)
        rows = _tau_rows(cfg, curves, engine, opts, jobs, cfg_for)
        return rows, dict(xlabel="SINR threshold (dB)", ylabel="success probability")
    if fig == "fig4":
        curves = [Curve(spec_of(*c)) for c in FIG4_CURVES]
        rows = _tau_rows(cfg, curves, engine, opts, jobs)
        return rows, dict(xlabel="SINR threshold (dB)", ylabel="success probability")
    if fig == "fig5":
        pairs = []
        for case in DENSITY_CASES:
            c2 = cfg.with_(lambda_inc=incumbent_density(cfg, case))
            for kind in ("existing", "benchmark", "slotted", "unslotted"):
                pairs.append((Curve(spec_of(kind), case), c2))
        rows = _grid_rows("M", range(1, 11), pairs, engine, opts, jobs)
        return rows, dict(xlabel="number of bands M", ylabel="success probability")
    if fig in ("fig6a", "fig6b"):
        case = "low" if fig == "fig6a" else "high"
        c2 = cfg.with_(lambda_inc=incumbent_density(cfg, case))
        pairs = [(Curve(spec_of(kind), case), c2)
                 for kind in ("existing", "benchmark", "slotted", "unslotted")]
        rows = _grid_rows("N", range(1, 9), pairs, engine, opts, jobs)
        return rows, dict(xlabel="number of transmissions N", ylabel="success probability")
    if fig == "fig7":
        curves = [Curve(spec_of("existing")), Curve(spec_of("slotted")), Curve(spec_of("unslotted")),
                  Curve(spec_of("slotted", "random", "nearest"))]
        rows = []
        for r in capacity_curve(cfg, curves, FIG7_GAMMAS):
            rows.append(SweepRow(r.gamma, r.curve, r.scheme, r.association, r.engine, r.devices,
                                 None if r.reachable else "unreachable"))
        return rows, dict(xlabel="success probability constraint", ylabel="supported IoT devices",
                          logy=True)
    raise ValueError(f"unknown figure {fig!r}; choose from {FIGURES}")


FIG7_GAMMAS = tuple(round(0.5 + 0.02 * k, 2) for k in range(25)) + (0.99,)


def reproduce_figure(fig: str, out_dir: str | Path, cfg: NetworkConfig | None = None,
                     opts: SimOptions | None = None, jobs: int = 1,
                     engine: str | None = None) -> tuple[Path, Path]:
    """Write ``<fig>.csv`` and ``<fig>.svg`` into ``out_dir``."""
    rows, chart = figure_rows(fig, cfg, opts, jobs, engine)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, svg_path = out / f"{fig}.csv", out / f"{fig}.svg"
    csv_path.write_text(rows_to_csv(rows), encoding="utf-8", newline="")
    plotted = [r for r in rows if r.value is not None and not (chart.get("logy") and r.value <= 0)]
    _svg(svg_path, fig, chart["xlabel"], chart["ylabel"], _series(plotted), chart.get("logy", False))
    return csv_path, svg_path


# -- analytic vs Monte-Carlo agreement -------------------------------------

AGREEMENT_TAUS_DB = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)


def closed_form_specs() -> list[ProtocolSpec]:
    """Every protocol/scheme/association combination with a closed form."""
    out = []
    for kind in Protocol:
        for scheme in Scheme:
            for assoc in Association:
                if kind is Protocol.UNSLOTTED_MULTIBAND and (scheme is Scheme.PN or assoc is Association.NEAREST):
                    continue
                out.append(ProtocolSpec(kind, scheme, assoc))
    return out


def agreement_sweep(cfg: NetworkConfig | None = None, opts: SimOptions | None = None,
                    taus_db: Sequence[float] = AGREEMENT_TAUS_DB, specs: Sequence | None = None,
                    jobs: int = 1) -> SweepResult:
    """Closed form and Monte-Carlo estimate side by side over a threshold grid."""
    cfg = table2_config() if cfg is None else cfg
    opts = SimOptions() if opts is None else opts
    specs = closed_form_specs() if specs is None else specs
    return run_sweep(SweepSpec(cfg, "tau_db", tuple(taus_db), tuple(specs), "both", opts), jobs=jobs)
