"""Experiment configuration: TOML file, built-in defaults and overrides."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .autoscaler import SIZING_RULES, LITERAL, POLICIES, SloConfig
from .catalog import HOURS_PER_MONTH, InstanceCatalog, InstanceType, load_catalog
from .faults import FAULT_KINDS, FaultKind, FaultScenario
from .metrics import Window
from .workload import DEFAULT_SEED, LOOKBACK_S, WorkloadProfile

SEED_ENV = "FAULTSCALE_SEED"


class ConfigError(ValueError):
    pass


def env_default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return DEFAULT_SEED
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    catalog: InstanceCatalog
    profile: WorkloadProfile
    faults: tuple[FaultScenario, ...]
    slos: tuple[SloConfig, ...]
    policies: tuple[str, ...]
    seeds: tuple[int, ...]
    instances: tuple[InstanceType, ...] = ()
    current_replicas: int = 3
    min_replicas: int = 1
    max_replicas: Optional[int] = None
    hours_per_month: float = HOURS_PER_MONTH
    tolerance_pct: float = 5.0
    sizing_rule: str = LITERAL
    bucket_s: Optional[float] = None
    catalog_source: str = "builtin"
    out_dir: str = "out"
    write_json: bool = True
    write_plots: bool = True
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.instances:
            object.__setattr__(self, "instances", tuple(self.catalog.entries))
        for name in ("faults", "slos", "policies", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"at least one entry required in {name}")
        bad = [p for p in self.policies if p not in POLICIES]
        if bad:
            raise ConfigError(f"unknown policy {bad[0]!r}; valid: {', '.join(POLICIES)}")
        if self.sizing_rule not in SIZING_RULES:
            raise ConfigError(f"sizing_rule must be one of {', '.join(SIZING_RULES)}")
        if self.current_replicas < 1 or self.min_replicas < 1:
            raise ConfigError("replica counts must be >= 1")
        if self.max_replicas is not None and self.max_replicas < self.min_replicas:
            raise ConfigError("max_replicas must be >= min_replicas")
        if not self.hours_per_month > 0:
            raise ConfigError("hours_per_month must be > 0")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("duplicate seeds")

    @property
    def n_scenarios(self) -> int:
        return len(self.faults) * len(self.instances) * len(self.slos) * len(self.policies) * len(self.seeds)

    def calibration(self) -> dict:
        """Every knob that shapes the numbers; written next to the results."""
        p = self.profile
        return {
            "note": "synthetic calibration; costs are not comparable to measured cloud bills",
            "catalog": self.catalog_source,
            "workload": {"means": dict(p.means), "volatility": dict(p.volatility),
                         "mean_reversion_per_s": p.mean_reversion, "duration_s": p.duration,
                         "sample_interval_s": p.sample_interval, "start_offset_s": p.start_offset,
                         "latency_mean_ms": p.latency_mean_ms, "latency_volatility_ms": p.latency_volatility_ms},
            "faults": {f.kind.value: {"window_start_s": f.window.start, "window_duration_s": f.window.duration,
                                      **f.calibration()} for f in self.faults},
            "slos": {s.name: {"target": s.target, "lookback_s": s.lookback_s} for s in self.slos},
            "current_replicas": self.current_replicas,
            "min_replicas": self.min_replicas,
            "max_replicas": self.max_replicas,
            "hours_per_month": self.hours_per_month,
            "tolerance_pct": self.tolerance_pct,
            "sizing_rule": self.sizing_rule,
            "bucket_s": self.bucket_s,
            "seeds": list(self.seeds),
        }


def _as_list(value, name: str) -> list:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    raise ConfigError(f"{name} must be a list or comma-separated string")


def _fault_scenarios(names: Sequence, fault_tables: Mapping[str, Mapping]) -> tuple[FaultScenario, ...]:
    out = []
    for name in names:
        try:
            kind = FaultKind.parse(name)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        table = dict(fault_tables.get(kind.value, {}))
        start = float(table.pop("window_start_s", 750.0))
        duration = float(table.pop("window_duration_s", 300.0))
        try:
            out.append(FaultScenario(kind, Window(start, duration), table))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return tuple(out)


def _workload(table: Mapping, seed: int) -> WorkloadProfile:
    table = dict(table)
    means = {k: table.pop(k) for k in ("cpu", "memory", "disk_io", "network") if k in table}
    kwargs = {}
    renames = {"duration_s": "duration", "start_offset_s": "start_offset", "sample_interval_s": "sample_interval"}
    for key in ("volatility", "mean_reversion", "duration_s", "start_offset_s", "sample_interval_s",
                "latency_mean_ms", "latency_volatility_ms"):
        if key in table:
            kwargs[renames.get(key, key)] = table.pop(key)
    if table:
        raise ConfigError(f"unknown workload key(s): {', '.join(sorted(table))}")
    base = WorkloadProfile()
    try:
        return replace(base, means={**base.means, **means}, seed=seed, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"workload: {exc}") from None


_EXPERIMENT_KEYS = {"catalog", "faults", "instances", "slos", "policies", "seeds", "current_replicas",
                    "min_replicas", "max_replicas", "hours_per_month", "tolerance_pct", "sizing_rule",
                    "bucket_s", "lookback_s"}


def build_config(doc: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Build a config from a parsed document; ``overrides`` (CLI flags) win."""
    exp = dict(doc.get("experiment", {}))
    unknown = set(exp) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown experiment key(s): {', '.join(sorted(unknown))}")
    for key, value in (overrides or {}).items():
        if value is not None:
            exp[key] = value
    catalog_source = str(exp.get("catalog", "builtin"))
    try:
        catalog = load_catalog(catalog_source)
    except FileNotFoundError:
        raise ConfigError(f"catalog file not found: {catalog_source}") from None
    except ValueError as exc:
        raise ConfigError(f"catalog {catalog_source}: {exc}") from None

    instances: tuple[InstanceType, ...] = ()
    inst_names = exp.get("instances", "all")
    if inst_names != "all":
        try:
            instances = tuple(catalog.lookup(n) for n in _as_list(inst_names, "instances"))
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None

    seeds = tuple(int(s) for s in _as_list(exp.get("seeds", [env_default_seed()]), "seeds"))
    lookback = float(exp.get("lookback_s", LOOKBACK_S))
    try:
        slos = tuple(SloConfig.parse(s, lookback) for s in _as_list(exp.get("slos", ["slo85", "slo50"]), "slos"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    faults = _fault_scenarios(_as_list(exp.get("faults", [k.value for k in FAULT_KINDS]), "faults"),
                              doc.get("faults", {}))
    out = dict(doc.get("output", {}))
    max_rep = exp.get("max_replicas")
    bucket = exp.get("bucket_s")
    return ExperimentConfig(
        catalog=catalog,
        profile=_workload(doc.get("workload", {}), seeds[0]),
        faults=faults,
        slos=slos,
        policies=tuple(_as_list(exp.get("policies", ["vertical", "horizontal"]), "policies")),
        seeds=seeds,
        instances=instances,
        current_replicas=int(exp.get("current_replicas", 3)),
        min_replicas=int(exp.get("min_replicas", 1)),
        max_replicas=int(max_rep) if max_rep else None,
        hours_per_month=float(exp.get("hours_per_month", HOURS_PER_MONTH)),
        tolerance_pct=float(exp.get("tolerance_pct", 5.0)),
        sizing_rule=str(exp.get("sizing_rule", LITERAL)),
        bucket_s=float(bucket) if bucket else None,
        catalog_source=catalog_source,
        out_dir=str(out.get("dir", "out")),
        write_json=bool(out.get("json", True)),
        write_plots=bool(out.get("plots", True)),
    )


def load_config(path: Optional[str | Path] = "default", overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """``"default"`` (or ``None``) gives the built-in experiment matrix."""
    if path is None or str(path) == "default":
        return build_config({}, overrides)
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return build_config(doc, overrides)


def default_config(**overrides) -> ExperimentConfig:
    return build_config({}, overrides)


EXAMPLE_CONFIG = """\
# faultscale experiment configuration
[experiment]
catalog = "builtin"
faults = ["syn", "udp", "vol", "rtr", "disk", "app"]
instances = "all"
slos = ["slo85", "slo50"]
policies = ["vertical", "horizontal"]
seeds = [42]
current_replicas = 3
hours_per_month = 730
tolerance_pct = 5.0
sizing_rule = "literal"         # or "headroom"

[workload]
cpu = 0.45
memory = 0.50
disk_io = 0.20
network = 0.25
volatility = 0.05
mean_reversion = 0.1
duration_s = 900

[faults.rtr]
latency_add_ms = 200
io_wait_factor = 0.6

[output]
dir = "out"
json = true
plots = true
"""
