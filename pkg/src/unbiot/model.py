"""Network parameters, protocol descriptions and derived quantities.

All densities are stored per square metre and all powers in dBm. Linear
quantities used by the analysis are relative to the IoT transmit power.
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

KM2 = 1e6  # m^2 per km^2


class Protocol(enum.Enum):
    EXISTING = "existing"
    BENCHMARK = "benchmark"
    SLOTTED_MULTIBAND = "slotted"
    UNSLOTTED_MULTIBAND = "unslotted"


class Scheme(enum.Enum):
    RANDOM = "random"
    PN = "pn"


class Association(enum.Enum):
    NONE = "none"
    NEAREST = "nearest"


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants.

    ``problems`` holds one ``(code, message)`` pair per violated invariant.
    """

    def __init__(self, problems: Sequence[tuple[str, str]]):
        self.problems = list(problems)
        super().__init__("; ".join(f"{code}: {msg}" for code, msg in self.problems))

    @property
    def codes(self) -> list[str]:
        return [code for code, _ in self.problems]


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class NetworkConfig:
    """Physical and protocol parameters of one deployment.

    Densities are per m^2. ``tau`` is the linear SINR threshold. The period
    ``T_s`` together with the message duration ``t_s`` fixes the temporal
    activity ``t_s / T_s``.
    """

    lambda_bs: float
    lambda_iot: float
    lambda_inc: float
    p_iot_dbm: float
    p_inc_dbm: float
    p_noise_dbm: float
    b_hz: float
    B_hz: float
    B_inc_hz: float
    M: int
    N: int
    t_s: float
    T_s: float
    alpha: float
    beta_t: float
    beta_f: float
    tau: float

    @property
    def activity(self) -> float:
        return self.t_s / self.T_s

    @property
    def tau_db(self) -> float:
        return linear_to_db(self.tau)

    def with_(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ProtocolSpec:
    kind: Protocol
    scheme: Scheme = Scheme.RANDOM
    association: Association = Association.NONE
    band_probs: tuple[float, ...] | None = None  # None -> uniform over M

    def probs(self, M: int) -> tuple[float, ...]:
        if self.band_probs is None:
            return (1.0 / M,) * M
        return tuple(self.band_probs)

    @property
    def label(self) -> str:
        return f"{self.kind.value}/{self.scheme.value}/{self.association.value}"


@dataclass(frozen=True)
class DerivedParams:
    delta: float
    xi: float
    p_hat_inc: float
    p_hat_noise: float
    lambda_iot_thinned: float
    lambda_inc_thinned: float

    @property
    def interference_density(self) -> float:
        """IoT density plus incumbent density weighted by ``p_hat_inc**delta``."""
        return self.lambda_iot_thinned + self.p_hat_inc**self.delta * self.lambda_inc_thinned


def xi_constant(delta: float) -> float:
    return math.sin(math.pi * delta) / (delta * math.pi)


def thinned_iot_density(cfg: NetworkConfig) -> float:
    return (cfg.N * cfg.beta_t * cfg.activity
            * (cfg.beta_f * cfg.b_hz / (cfg.M * cfg.B_hz)) * cfg.lambda_iot)


def thinned_inc_density(cfg: NetworkConfig) -> float:
    return min(1.0, cfg.B_inc_hz / (cfg.M * cfg.B_hz)) * cfg.lambda_inc


def derive_params(cfg: NetworkConfig) -> DerivedParams:
    delta = 2.0 / cfg.alpha
    p_iot = dbm_to_watt(cfg.p_iot_dbm)
    p_inc = dbm_to_watt(cfg.p_inc_dbm) * cfg.b_hz / cfg.B_inc_hz
    return DerivedParams(
        delta=delta,
        xi=xi_constant(delta),
        p_hat_inc=p_inc / p_iot,
        p_hat_noise=dbm_to_watt(cfg.p_noise_dbm) / p_iot,
        lambda_iot_thinned=thinned_iot_density(cfg),
        lambda_inc_thinned=thinned_inc_density(cfg),
    )


def config_problems(cfg: NetworkConfig, spec: ProtocolSpec | None = None) -> list[tuple[str, str]]:
    """Return every violated invariant as ``(code, message)``; empty when valid."""
    out: list[tuple[str, str]] = []
    if not cfg.alpha > 2:
        out.append(("AlphaTooSmall", f"alpha must exceed 2, got {cfg.alpha}"))
    if not cfg.lambda_bs > 0:
        out.append(("BadDensity", f"lambda_bs must be positive, got {cfg.lambda_bs}"))
    for name in ("lambda_iot", "lambda_inc"):
        if not getattr(cfg, name) >= 0:
            out.append(("BadDensity", f"{name} must be non-negative"))
    for name in ("b_hz", "B_hz", "B_inc_hz", "t_s", "T_s", "tau"):
        if not getattr(cfg, name) > 0:
            out.append(("NonPositive", f"{name} must be positive"))
    if cfg.b_hz > cfg.B_hz:
        out.append(("SignalWiderThanBand", "b_hz must not exceed B_hz"))
    if cfg.t_s > cfg.T_s:
        out.append(("DurationExceedsPeriod", "t_s must not exceed T_s"))
    for name in ("beta_t", "beta_f"):
        v = getattr(cfg, name)
        if not 1.0 <= v <= 2.0:
            out.append(("BetaOutOfRange", f"{name} must lie in [1, 2], got {v}"))
    for name in ("M", "N"):
        v = getattr(cfg, name)
        if int(v) != v or v < 1:
            out.append(("BadCount", f"{name} must be an integer >= 1, got {v}"))
    if spec is not None:
        if spec.kind is Protocol.EXISTING and cfg.M != 1:
            out.append(("ExistingWithMultipleBands", f"existing protocol needs M=1, got M={cfg.M}"))
        if spec.band_probs is not None:
            p = spec.band_probs
            if len(p) != cfg.M:
                out.append(("BandProbNotSimplex", f"expected {cfg.M} band probabilities, got {len(p)}"))
            elif any(x < 0 for x in p) or abs(math.fsum(p) - 1.0) > 1e-9:
                out.append(("BandProbNotSimplex", f"band probabilities {tuple(p)} do not sum to 1"))
    return out


def validate_config(cfg: NetworkConfig, spec: ProtocolSpec | None = None):
    problems = config_problems(cfg, spec)
    if problems:
        raise ConfigError(problems)
    return cfg, spec


# -- config files ----------------------------------------------------------

_DENSITY_KEYS = ("lambda_bs", "lambda_iot", "lambda_inc")
_INT_KEYS = ("M", "N")
CONFIG_KEYS = tuple(f.name for f in fields(NetworkConfig))


def _parse_value(key: str, text: str):
    if key not in CONFIG_KEYS:
        raise ConfigError([("UnknownKey", f"unknown config key {key!r}")])
    try:
        if key in _INT_KEYS:
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        value = float(text)
    except ValueError:
        raise ConfigError([("BadValue", f"cannot parse {key}={text!r}")]) from None
    if key in _DENSITY_KEYS:
        value /= KM2
    return value


def config_from_mapping(items: dict[str, str]) -> NetworkConfig:
    values = {k: _parse_value(k, v) for k, v in items.items()}
    missing = [k for k in CONFIG_KEYS if k not in values]
    if missing:
        raise ConfigError([("MissingKey", f"missing key {k!r}") for k in missing])
    return NetworkConfig(**values)


def _read_flat(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case sensitive (b_hz vs B_hz)
    parser.read_string("[config]\n" + text)
    return dict(parser["config"])


def load_config(path: str | Path, overrides: Iterable[str] = ()) -> NetworkConfig:
    """Read a flat ``key = value`` file; ``overrides`` are ``key=value`` strings."""
    items = _read_flat(Path(path).read_text(encoding="utf-8"))
    items.update(parse_overrides(overrides))
    return config_from_mapping(items)


def parse_overrides(overrides: Iterable[str]) -> dict[str, str]:
    out = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in CONFIG_KEYS:
            raise ConfigError([("BadOverride", f"override {item!r} must be key=value with a config key")])
        out[key] = value.strip()
    return out


def dump_config(cfg: NetworkConfig) -> str:
    lines = []
    for key in CONFIG_KEYS:
        value = getattr(cfg, key)
        if key in _DENSITY_KEYS:
            value *= KM2
        lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"


def table2_path() -> Path:
    return Path(str(resources.files("unbiot") / "data" / "table2.cfg"))


def table2_config(**changes) -> NetworkConfig:
    cfg = load_config(table2_path())
    return cfg.with_(**changes) if changes else cfg


def preset_area_m2() -> float:
    """Deployment area used by every figure preset: 25 km x 25 km."""
    return 25e3 * 25e3
