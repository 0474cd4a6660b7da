"""Flat ``key=value`` run configuration shared by every subcommand."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .ensemble import EnsembleHyper
from .errors import ParameterError
from .filters import FilterSpec
from .pipeline import PairConfig
from .simulate import PiecewiseSpec

SIDECAR = "resolved_config.txt"


@dataclass(frozen=True)
class RunConfig:
    # gaussian model
    bandwidth: float = 5.0
    ridge: float = 1e-6
    ridge_floor: float = 1e-9
    windowing: str = "offline"
    center: str = "per-sample"
    # ingest
    window: int = 15
    stride: int = 10
    # pairs
    markov_order: int = 1
    gate_radius: float = 100.0
    side_cond_max: int = 3
    min_overlap: int = 20
    # ensemble
    tau: int = 10
    beta: float = 0.01
    gamma: float = 1.0
    base_filters: str = "exp(0.1),exp(0.2),unif"
    max_experts: int = 0  # 0 = unbounded
    # analysis
    max_lag: int = 50
    # simulation
    sim_T: int = 1000
    sim_levels: str = "0.2,0.8,0.4"
    sim_sigma: float = 0.1
    trials: int = 100
    seed: int = 0
    output_dir: str = "."

    def hyper(self):
        specs = tuple(FilterSpec.parse(s) for s in self.base_filters.split(",") if s.strip())
        return EnsembleHyper(
            tau=self.tau, beta=self.beta, gamma=self.gamma, base_set=specs,
            max_experts=self.max_experts or None,
        )

    def pair_config(self):
        return PairConfig(
            markov_order=self.markov_order,
            gate_radius=self.gate_radius,
            side_cond_max=self.side_cond_max,
            bandwidth=self.bandwidth,
            hyper=self.hyper(),
            mode=self.windowing,
            center=self.center,
            ridge=self.ridge,
            ridge_floor=self.ridge_floor,
            min_overlap=self.min_overlap,
        )

    def piecewise_spec(self):
        levels = [float(v) for v in self.sim_levels.split(",") if v.strip()]
        return PiecewiseSpec.evenly_spaced(self.sim_T, levels, self.sim_sigma, self.seed)

    def validate(self):
        """Raise ``ParameterError`` if any module would reject these values."""
        if self.window < 1 or self.window % 2 == 0:
            raise ParameterError("window must be an odd positive integer")
        if self.stride < 1:
            raise ParameterError("stride must be a positive integer")
        if self.max_lag < 0:
            raise ParameterError("max_lag must be non-negative")
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if self.max_experts < 0:
            raise ParameterError("max_experts must be non-negative")
        self.pair_config()
        try:
            self.piecewise_spec()
        except ValueError as exc:
            raise ParameterError(f"simulation settings: {exc}") from None
        return self


KEYS = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"float": float, "int": int, "str": str}


def coerce(key, value):
    if key not in KEYS:
        raise ParameterError(f"unknown configuration key {key!r}")
    cast = _CASTS[KEYS[key]]
    try:
        if cast is int:
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        return cast(value)
    except (TypeError, ValueError):
        raise ParameterError(f"bad value for {key}: {value!r}") from None


def parse_config_text(text, source="<config>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError(f"{source}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = coerce(key, value)
    return out


def resolve(file_values=None, overrides=None):
    """Defaults, then config-file values, then flag overrides."""
    values = {}
    values.update(file_values or {})
    values.update(overrides or {})
    for k, v in list(values.items()):
        values[k] = coerce(k, v)
    return replace(RunConfig(), **values).validate()


def dump_config(cfg, comments=()):
    lines = [f"# {c}" for c in comments]
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name}={v!r}" if isinstance(v, float) else f"{f.name}={v}")
    return "\n".join(lines) + "\n"
