"""Synthetic normal-state workload traces."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from . import _kernels
from .catalog import RESOURCE_KINDS
from .metrics import MetricTrace

# Experiment timeline in seconds: 12.5 min normal, 5 min fault, 2.5 min normal,
# decided on the trailing 15 min.  Traces cover only the lookback, so they start
# 5 min into the experiment and windows use experiment time.
NORMAL_PHASE_S = 750.0
FAULT_PHASE_S = 300.0
RECOVERY_PHASE_S = 150.0
EXPERIMENT_S = NORMAL_PHASE_S + FAULT_PHASE_S + RECOVERY_PHASE_S
LOOKBACK_S = 900.0
TRACE_START_S = EXPERIMENT_S - LOOKBACK_S

DEFAULT_MEANS = {"cpu": 0.45, "memory": 0.50, "disk_io": 0.20, "network": 0.25}
DEFAULT_VOLATILITY = 0.05
DEFAULT_SEED = 42


def _per_channel(value: Union[float, Mapping[str, float]], default: float) -> dict[str, float]:
    if isinstance(value, Mapping):
        unknown = set(value) - {k.value for k in RESOURCE_KINDS}
        if unknown:
            raise ValueError(f"unknown channel(s): {', '.join(sorted(unknown))}")
        return {k.value: float(value.get(k.value, default)) for k in RESOURCE_KINDS}
    return {k.value: float(value) for k in RESOURCE_KINDS}


@dataclass(frozen=True)
class WorkloadProfile:
    """Mean-reverting utilization around per-channel means.

    ``volatility`` is the stationary standard deviation of each channel and
    may be a single number or a per-channel mapping.  Latency is generated the
    same way unless ``latency_mean_ms`` is ``None``.
    """

    means: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_MEANS))
    volatility: Union[float, Mapping[str, float]] = DEFAULT_VOLATILITY
    mean_reversion: float = 0.1
    duration: float = LOOKBACK_S
    seed: int = DEFAULT_SEED
    sample_interval: float = 1.0
    start_offset: float = TRACE_START_S
    latency_mean_ms: Optional[float] = 40.0
    latency_volatility_ms: float = 5.0

    def __post_init__(self):
        if not isinstance(self.means, Mapping):
            raise ValueError("means must be a per-channel mapping")
        missing = {k.value for k in RESOURCE_KINDS} - set(self.means)
        if missing:
            raise ValueError(f"missing mean for {', '.join(sorted(missing))}")
        means = _per_channel(self.means, 0.0)
        if any(not 0.0 <= m <= 1.0 for m in means.values()):
            raise ValueError("channel means must lie in [0, 1]")
        vol = _per_channel(self.volatility, DEFAULT_VOLATILITY)
        if any(not (v >= 0 and math.isfinite(v)) for v in vol.values()):
            raise ValueError("volatility must be >= 0")
        if not self.mean_reversion > 0:
            raise ValueError("mean_reversion must be > 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be > 0")
        if self.latency_mean_ms is not None and (self.latency_mean_ms < 0 or self.latency_volatility_ms < 0):
            raise ValueError("latency parameters must be >= 0")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "volatility", vol)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.sample_interval))

    def with_seed(self, seed: int) -> "WorkloadProfile":
        from dataclasses import replace

        return replace(self, seed=int(seed))


def _mean_reverting(mean: float, sigma: float, coef: float, rng: np.random.Generator, n: int) -> np.ndarray:
    innov = sigma * math.sqrt(1.0 - coef * coef)
    shocks = rng.standard_normal(n) * innov
    return _kernels.ar1_path(float(mean), float(coef), shocks)


def generate_baseline(profile: WorkloadProfile) -> MetricTrace:
    """Normal-state trace for ``profile``; identical profiles give identical traces."""
    n = profile.n_samples
    coef = math.exp(-profile.mean_reversion * profile.sample_interval)
    # one independent stream per channel, latency last
    streams = np.random.SeedSequence(int(profile.seed) & (2**64 - 1)).spawn(len(RESOURCE_KINDS) + 1)
    rows = []
    for kind, ss in zip(RESOURCE_KINDS, streams):
        path = _mean_reverting(profile.means[kind.value], profile.volatility[kind.value], coef,
                               np.random.default_rng(ss), n)
        rows.append(np.clip(path, 0.0, 1.0))
    latency = None
    if profile.latency_mean_ms is not None:
        path = _mean_reverting(profile.latency_mean_ms, profile.latency_volatility_ms, coef,
                               np.random.default_rng(streams[-1]), n)
        latency = np.maximum(path, 0.0)
    return MetricTrace(np.vstack(rows), sample_interval=profile.sample_interval,
                       start_offset=profile.start_offset, latency=latency)
