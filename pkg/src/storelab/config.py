"""Experiment configuration: a flat key=value text format with validation.

Every knob of every experiment kind lives in one dataclass so a single
parser and renderer cover all subcommands.  ``parse_config(render_config(c))``
returns an equal config for every valid config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .model import Instance, StorageSpec
from .prices import AR1, Clamped, CsvSpec, LogNormal, Normal, ingest

KINDS = ("estimate", "violation-curve", "policy-compare", "adaptive", "relax")
MODELS = ("normal", "lognormal", "ar1")
SCENARIOS = ("baseline", "ar1", "lognormal", "demand-noise")
RESAMPLE_MODES = ("with-replacement", "prefix", "random-window")
FAMILIES = ("dp", "threshold")


class ConfigError(ValueError):
    """A configuration field is missing, malformed, or inconsistent."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "policy-compare"
    # price model
    model: str = "normal"
    mu: float = 10.0
    sigma: float = 2.0
    log_mu: float = 2.28
    log_sigma: float = 0.2
    phi: float = 0.8
    clamp_lo: float | None = None
    clamp_hi: float | None = None
    # history source for estimation experiments
    history: str | None = None
    history_size: int = 100_000
    # instance
    T: int = 24
    B: float = 5.0
    s0: float = 0.0
    demand: str = "constant:1.0"
    # estimation knobs
    alpha: float = 0.05
    conservative: bool = False
    clamp_m: bool = True
    resample_mode: str = "with-replacement"
    eval_source: str = "model"
    verdict: str = "mean"
    clamp_eval_to_bounds: bool = False
    # sweep grids
    n_grid: tuple[int, ...] = (10, 100, 1000)
    warmup_grid: tuple[int, ...] = (10, 100, 1000, 10000)
    refresh_grid: tuple[float, ...] = (math.inf,)
    # Monte Carlo sizes
    rounds: int = 100
    eval_episodes: int = 3
    episodes: int = 200
    # adaptive / relaxation extras
    family: str = "dp"
    scenarios: tuple[str, ...] = SCENARIOS
    eta: float = 0.2
    # numerics
    G: int = 100
    K: int = 51
    # run control
    seed: int = 20260809
    out: str = "report.csv"


_BOOL_FIELDS = {"conservative", "clamp_m", "clamp_eval_to_bounds"}
_INT_FIELDS = {"history_size", "T", "rounds", "eval_episodes", "episodes", "G", "K", "seed"}
_FLOAT_FIELDS = {"mu", "sigma", "log_mu", "log_sigma", "phi", "B", "s0", "alpha", "eta"}
_OPT_FLOAT_FIELDS = {"clamp_lo", "clamp_hi"}
_OPT_STR_FIELDS = {"history"}
_INT_TUPLE_FIELDS = {"n_grid", "warmup_grid"}
_FLOAT_TUPLE_FIELDS = {"refresh_grid"}
_STR_TUPLE_FIELDS = {"scenarios"}


def _parse_bool(field: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(field, f"expected a boolean, got {raw!r}")


def _coerce(field: str, raw: str):
    raw = raw.strip()
    try:
        if field in _BOOL_FIELDS:
            return _parse_bool(field, raw)
        if field in _INT_FIELDS:
            return int(raw)
        if field in _FLOAT_FIELDS:
            return float(raw)
        if field in _OPT_FLOAT_FIELDS:
            return None if raw == "" else float(raw)
        if field in _OPT_STR_FIELDS:
            return None if raw == "" else raw
        if field in _INT_TUPLE_FIELDS:
            return tuple(int(tok) for tok in raw.split(",") if tok.strip())
        if field in _FLOAT_TUPLE_FIELDS:
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        if field in _STR_TUPLE_FIELDS:
            return tuple(tok.strip() for tok in raw.split(",") if tok.strip())
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(field, f"cannot parse value {raw!r}") from None
    return raw


def _render_value(field: str, value) -> str:
    if value is None:
        return ""
    if field in _BOOL_FIELDS:
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    """Parse key=value lines ('#' starts a comment) into a config."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {body!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _coerce(key, raw)
    config = ExperimentConfig(**values)
    validate_config(config)
    return config


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"missing config file: {path}")
    return parse_config(path.read_text(encoding="utf-8"))


def render_config(config: ExperimentConfig) -> str:
    """Canonical key=value text; omitted optional fields render as empty."""
    lines = []
    for f in fields(ExperimentConfig):
        lines.append(f"{f.name}={_render_value(f.name, getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def apply_overrides(config: ExperimentConfig, overrides: dict[str, str]) -> ExperimentConfig:
    """Apply key=value string overrides (CLI --set) on top of a config."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for key, raw in overrides.items():
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _coerce(key, raw)
    updated = ExperimentConfig(**{**_as_dict(config), **values})
    validate_config(updated)
    return updated


def _as_dict(config: ExperimentConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(ExperimentConfig)}


def validate_config(config: ExperimentConfig) -> None:
    """Field-level validation; raises ConfigError naming the offending field."""
    if config.kind not in KINDS:
        raise ConfigError("kind", f"must be one of {KINDS}, got {config.kind!r}")
    if config.model not in MODELS:
        raise ConfigError("model", f"must be one of {MODELS}, got {config.model!r}")
    if not (0.0 < config.alpha < 1.0):
        raise ConfigError("alpha", f"must lie in (0, 1), got {config.alpha}")
    if config.model in ("normal", "ar1") and not config.sigma > 0:
        raise ConfigError("sigma", f"must be > 0, got {config.sigma}")
    if config.model == "lognormal" and not config.log_sigma > 0:
        raise ConfigError("log_sigma", f"must be > 0, got {config.log_sigma}")
    if config.model == "ar1" and not (-1.0 < config.phi < 1.0):
        raise ConfigError("phi", f"must lie in (-1, 1), got {config.phi}")
    if (config.clamp_lo is None) != (config.clamp_hi is None):
        raise ConfigError("clamp_lo", "clamp_lo and clamp_hi must be set together")
    if config.clamp_lo is not None and config.clamp_lo > config.clamp_hi:
        raise ConfigError("clamp_lo", "clamp_lo must not exceed clamp_hi")
    if config.T < 1:
        raise ConfigError("T", f"horizon must be >= 1, got {config.T}")
    if config.B < 0:
        raise ConfigError("B", f"capacity must be >= 0, got {config.B}")
    if not (0.0 <= config.s0 <= config.B):
        raise ConfigError("s0", f"initial level must lie in [0, B], got {config.s0}")
    for name in ("rounds", "eval_episodes", "episodes", "history_size"):
        if getattr(config, name) < 1:
            raise ConfigError(name, f"must be >= 1, got {getattr(config, name)}")
    if config.G < 2:
        raise ConfigError("G", f"grid size must be >= 2, got {config.G}")
    if config.K < 1:
        raise ConfigError("K", f"atom count must be >= 1, got {config.K}")
    if config.resample_mode not in RESAMPLE_MODES:
        raise ConfigError("resample_mode", f"must be one of {RESAMPLE_MODES}")
    if config.eval_source not in ("model", "held-out"):
        raise ConfigError("eval_source", "must be 'model' or 'held-out'")
    if config.verdict not in ("mean", "any"):
        raise ConfigError("verdict", "must be 'mean' or 'any'")
    if config.family not in FAMILIES:
        raise ConfigError("family", f"must be one of {FAMILIES}")
    if not (0.0 <= config.eta < 1.0):
        raise ConfigError("eta", f"demand-noise level must lie in [0, 1), got {config.eta}")
    for name in ("n_grid", "warmup_grid", "refresh_grid", "scenarios"):
        if not getattr(config, name):
            raise ConfigError(name, "grid must be nonempty")
    if any(n < 2 for n in config.n_grid):
        raise ConfigError("n_grid", "every sample size must be >= 2")
    if any(w < 2 for w in config.warmup_grid):
        raise ConfigError("warmup_grid", "every warmup size must be >= 2")
    if any(not (r >= 1) for r in config.refresh_grid):
        raise ConfigError("refresh_grid", "every refresh stride must be >= 1 (inf allowed)")
    unknown = [s for s in config.scenarios if s not in SCENARIOS]
    if unknown:
        raise ConfigError("scenarios", f"unknown scenarios {unknown}, expected {SCENARIOS}")
    if config.kind in ("violation-curve", "estimate") and config.history is not None:
        if not Path(config.history).is_file():
            raise ConfigError("history", f"missing history file: {config.history}")
    if config.history is None and config.kind in ("violation-curve",):
        # synthesized history must accommodate prefix/window draws
        if config.resample_mode != "with-replacement":
            if max(config.n_grid) > config.history_size:
                raise ConfigError(
                    "n_grid", "largest n exceeds history_size for a non-bootstrap mode"
                )
    _parse_demand_spec(config.demand, config.T)  # validates the spec string


def build_model(config: ExperimentConfig):
    """Price model described by the config, including the optional clamp."""
    if config.model == "normal":
        base = Normal(config.mu, config.sigma)
    elif config.model == "lognormal":
        base = LogNormal(config.log_mu, config.log_sigma)
    else:
        base = AR1(config.mu, config.sigma, config.phi)
    if config.clamp_lo is not None:
        return Clamped(base, config.clamp_lo, config.clamp_hi)
    return base


def _parse_demand_spec(spec: str, horizon: int) -> np.ndarray:
    head, _, tail = spec.partition(":")
    if head == "constant":
        try:
            value = float(tail)
        except ValueError:
            raise ConfigError("demand", f"bad constant demand {tail!r}") from None
        if value < 0:
            raise ConfigError("demand", f"demand must be >= 0, got {value}")
        return np.full(horizon, value)
    if head == "vector":
        try:
            values = np.asarray([float(tok) for tok in tail.split(",") if tok.strip()])
        except ValueError:
            raise ConfigError("demand", f"bad demand vector {tail!r}") from None
        if values.size != horizon:
            raise ConfigError(
                "demand", f"vector length {values.size} does not match horizon {horizon}"
            )
        return values
    if head == "file":
        if not Path(tail).is_file():
            raise ConfigError("demand", f"missing demand file: {tail}")
        values = np.asarray(ingest(tail, CsvSpec()))
        if values.size != horizon:
            raise ConfigError(
                "demand", f"file has {values.size} values, horizon is {horizon}"
            )
        return values
    raise ConfigError("demand", f"unknown demand spec {spec!r} (constant:|vector:|file:)")


def build_instance(config: ExperimentConfig) -> Instance:
    demand = _parse_demand_spec(config.demand, config.T)
    storage = StorageSpec(capacity=config.B, initial_level=config.s0)
    return Instance(horizon=config.T, demand=demand, storage=storage)


def load_history(config: ExperimentConfig):
    """Historical series: from file when configured, else synthesized."""
    if config.history is not None:
        return ingest(config.history, CsvSpec())
    from .prices import generate
    from .seeds import stream

    return generate(build_model(config), config.history_size, stream(config.seed, 90))
