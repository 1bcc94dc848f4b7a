"""Vertical and horizontal scaling decisions and composite triggers."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .catalog import (RESOURCE_KINDS, InstanceCatalog, InstanceType, ResourceVector,
                      UnsatisfiableDemand, grid_search)
from .metrics import LATENCY, MetricTrace, Window, channel_max, max_aggregate
from .workload import LOOKBACK_S

VERTICAL = "vertical"
HORIZONTAL = "horizontal"
POLICIES = (VERTICAL, HORIZONTAL)

LITERAL = "literal"
HEADROOM = "headroom"
SIZING_RULES = (LITERAL, HEADROOM)

SLO_PRESETS = {"slo85": 0.85, "slo50": 0.50}

# products such as 8 * 0.75 may land a few ulps above an integer
_CEIL_TOL = 1e-9


def _ceil(x: float) -> int:
    return math.ceil(x - _CEIL_TOL)


@dataclass(frozen=True)
class SloConfig:
    target: float
    lookback_s: float = LOOKBACK_S
    name: Optional[str] = None

    def __post_init__(self):
        if not 0.0 < self.target <= 1.0:
            raise ValueError(f"SLO target must be in (0, 1], got {self.target!r}")
        if not self.lookback_s > 0:
            raise ValueError("lookback must be > 0")
        if self.name is None:
            object.__setattr__(self, "name", f"slo{round(self.target * 100):d}")

    @classmethod
    def parse(cls, value, lookback_s: float = LOOKBACK_S) -> "SloConfig":
        """Accept ``"slo85"``-style names or a fraction such as ``0.85``."""
        if isinstance(value, SloConfig):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in SLO_PRESETS:
                return cls(SLO_PRESETS[key], lookback_s, key)
            m = re.fullmatch(r"slo(\d{1,3})", key)
            if m:
                return cls(int(m.group(1)) / 100.0, lookback_s, key)
            try:
                value = float(key)
            except ValueError:
                raise ValueError(f"unknown SLO {value!r}; use slo85, slo50 or a fraction") from None
        return cls(float(value), lookback_s)

    def window_for(self, trace: MetricTrace) -> Window:
        return trace.trailing_window(self.lookback_s)


@dataclass(frozen=True)
class ScalingDecision:
    policy: str
    aggregated_metrics: ResourceVector
    triggered: bool
    opt_spec_raw: Optional[ResourceVector] = None
    opt_spec: Optional[ResourceVector] = None
    chosen_instance: Optional[InstanceType] = None
    current_replicas: Optional[int] = None
    opt_replicas: Optional[int] = None
    error: Optional[str] = None

    def __post_init__(self):
        if self.policy == VERTICAL:
            if self.chosen_instance is None or self.opt_replicas is not None:
                raise ValueError("vertical decision needs chosen_instance and no replica count")
        elif self.policy == HORIZONTAL:
            if self.opt_replicas is None or self.chosen_instance is not None:
                raise ValueError("horizontal decision needs opt_replicas and no instance")
            if self.opt_replicas < 1:
                raise ValueError("opt_replicas must be >= 1")
        else:
            raise ValueError(f"unknown policy {self.policy!r}")


def _multiplier(util: float, slo: float, interpretation: str) -> float:
    if interpretation == LITERAL:
        return util - (slo - util)
    if interpretation == HEADROOM:
        return util / slo
    raise ValueError(f"unknown sizing rule {interpretation!r}")


def vertical_raw_opt_spec(spec: ResourceVector, util_max: ResourceVector, slo: SloConfig,
                          interpretation: str = LITERAL) -> ResourceVector:
    """Pre-rounding optimal size per resource, floored at zero.

    Dimensions missing from ``spec`` stay missing.
    """
    out = {}
    for kind in RESOURCE_KINDS:
        s, u = spec.get(kind), util_max.get(kind)
        if s is None or u is None:
            out[kind.value] = None
            continue
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"{kind.value} utilization {u!r} outside [0, 1]")
        out[kind.value] = max(0.0, s * _multiplier(u, slo.target, interpretation))
    return ResourceVector(**out)


def vertical_opt_spec(spec: ResourceVector, util_max: ResourceVector, slo: SloConfig,
                      interpretation: str = LITERAL) -> ResourceVector:
    """Optimal size per resource: ``ceil(spec * (2*max - SLO))``, floored at 0."""
    raw = vertical_raw_opt_spec(spec, util_max, slo, interpretation)
    return ResourceVector(**{k.value: (None if raw.get(k) is None else float(_ceil(raw.get(k))))
                             for k in RESOURCE_KINDS})


def _fallback_instance(catalog: InstanceCatalog, demand: ResourceVector) -> InstanceType:
    d = demand.to_array()
    capped = np.where(np.isnan(d), np.nan, np.fmin(d, catalog.capacity_max()))
    return grid_search(catalog, ResourceVector.from_array(capped))


def vertical_decide(catalog: InstanceCatalog, current: InstanceType, trace: MetricTrace, slo: SloConfig,
                    interpretation: str = LITERAL, bucket_s: Optional[float] = None) -> ScalingDecision:
    util = max_aggregate(trace, slo.window_for(trace), bucket_s=bucket_s)
    raw = vertical_raw_opt_spec(current.specs, util, slo, interpretation)
    demand = vertical_opt_spec(current.specs, util, slo, interpretation)
    error = None
    try:
        chosen = grid_search(catalog, demand)
    except UnsatisfiableDemand:
        # largest fitting size; analysis flags the reliability risk
        chosen = _fallback_instance(catalog, demand)
        error = "demand exceeds catalog"
    return ScalingDecision(
        policy=VERTICAL,
        aggregated_metrics=util,
        triggered=chosen.key != current.key,
        opt_spec_raw=raw,
        opt_spec=demand,
        chosen_instance=chosen,
        error=error,
    )


def horizontal_opt_replicas(current_replicas: int, util_max: ResourceVector, slo: SloConfig,
                            min_replicas: int = 1, max_replicas: Optional[int] = None) -> int:
    """``max_i ceil(current * max_i / SLO)`` clamped to ``[min_replicas, max_replicas]``."""
    if isinstance(current_replicas, bool) or int(current_replicas) != current_replicas or current_replicas < 1:
        raise ValueError(f"current_replicas must be a positive integer, got {current_replicas!r}")
    best = 0
    for kind in RESOURCE_KINDS:
        u = util_max.get(kind)
        if u is None:
            continue
        best = max(best, _ceil(int(current_replicas) * u / slo.target))
    best = max(best, min_replicas, 1)
    if max_replicas is not None:
        best = min(best, max_replicas)
    return int(best)


def horizontal_decide(instance: InstanceType, current_replicas: int, trace: MetricTrace, slo: SloConfig,
                      min_replicas: int = 1, max_replicas: Optional[int] = None,
                      bucket_s: Optional[float] = None) -> ScalingDecision:
    """Replica decision; the instance type is held fixed."""
    util = max_aggregate(trace, slo.window_for(trace), bucket_s=bucket_s)
    opt = horizontal_opt_replicas(current_replicas, util, slo, min_replicas, max_replicas)
    return ScalingDecision(
        policy=HORIZONTAL,
        aggregated_metrics=util,
        triggered=opt != current_replicas,
        current_replicas=int(current_replicas),
        opt_replicas=opt,
    )


def composite_trigger(trace: MetricTrace, thresholds: Mapping[str, float], mode: str = "all",
                      window: Optional[Window] = None) -> bool:
    """Threshold trigger over windowed maxima.

    ``mode="any"`` fires when a single channel exceeds its threshold (the
    usual single-metric behaviour); ``mode="all"`` requires every listed
    channel, e.g. CPU *and* network, to exceed at once.  ``latency_ms`` may be
    used as a channel.
    """
    if mode not in ("any", "all"):
        raise ValueError(f"mode must be 'any' or 'all', got {mode!r}")
    for name in thresholds:
        if not trace.has_channel(name):
            raise KeyError(f"unknown channel {name!r}" if name != LATENCY else "trace has no latency channel")
    window = window or trace.full_window()
    hits = [channel_max(trace, name, window) > float(limit) for name, limit in thresholds.items()]
    return all(hits) if mode == "all" else any(hits)
