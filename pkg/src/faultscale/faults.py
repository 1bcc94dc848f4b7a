"""Metric-level fault models applied to a normal-state trace."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .catalog import ResourceKind
from .metrics import MetricTrace, TraceError, Window
from .workload import FAULT_PHASE_S, NORMAL_PHASE_S

CPU, MEM, DISK, NET = (k.index for k in (ResourceKind.CPU, ResourceKind.MEMORY,
                                          ResourceKind.DISK_IO, ResourceKind.NETWORK))


class FaultKind(str, enum.Enum):
    SYN_FLOOD = "syn"
    UDP_FLOOD = "udp"
    VOLUMETRIC = "vol"
    ROUTER_FAILURE = "rtr"
    DISK_FAILURE = "disk"
    SOFTWARE_PROBLEM = "app"

    @classmethod
    def parse(cls, name: str) -> "FaultKind":
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown fault kind {name!r}; valid kinds: {valid}") from None


FAULT_KINDS: tuple[FaultKind, ...] = tuple(FaultKind)

_COMMON = {"intensity": 1.0, "burstable_damping": 0.7}

_DEFAULTS: dict[FaultKind, dict[str, float]] = {
    FaultKind.SYN_FLOOD: {"saturation_level": 0.98, "cpu_jitter": 0.01, "flood_network_level": 0.9,
                          "hping3_window_bytes": 64, "hping3_data_bytes": 120},
    FaultKind.UDP_FLOOD: {"saturation_level": 0.98, "cpu_jitter": 0.01, "flood_network_level": 0.9,
                          "hping3_window_bytes": 64, "hping3_data_bytes": 120},
    FaultKind.VOLUMETRIC: {"cpu_add": 0.5, "network_add": 0.3, "disk_io_add": 0.3, "cpu_jitter": 0.02,
                           "mhddos_threads": 450, "mhddos_rps": 150},
    FaultKind.ROUTER_FAILURE: {"latency_add_ms": 200.0, "latency_jitter_ms": 50.0,
                               "io_wait_factor": 0.6, "network_factor": 0.7},
    FaultKind.DISK_FAILURE: {"pause_fraction": 0.6, "pause_disk_level": 0.02, "pause_cpu_factor": 0.7,
                             "backlog_level": 0.97, "backlog_jitter": 0.02, "backlog_tail_s": 0.0},
    FaultKind.SOFTWARE_PROBLEM: {"retry_overhead": 0.25, "burst_probability": 0.15, "burst_amplitude": 0.3,
                                 "latency_add_ms": 80.0, "packet_loss_rate": 0.5},
}

# Recorded with results; no effect on the distortion.
METADATA_PARAMS = frozenset({"hping3_window_bytes", "hping3_data_bytes", "mhddos_threads",
                             "mhddos_rps", "packet_loss_rate"})

_UNIT = (0.0, 1.0)
_NONNEG = (0.0, float("inf"))
PARAM_RANGES: dict[str, tuple[float, float]] = {
    "intensity": _UNIT, "burstable_damping": _UNIT,
    "saturation_level": _UNIT, "flood_network_level": _UNIT, "cpu_jitter": (0.0, 0.5),
    "cpu_add": (-1.0, 1.0), "network_add": (-1.0, 1.0), "disk_io_add": (-1.0, 1.0),
    "latency_add_ms": _NONNEG, "latency_jitter_ms": _NONNEG,
    "io_wait_factor": _UNIT, "network_factor": _UNIT,
    "pause_fraction": _UNIT, "pause_disk_level": _UNIT, "pause_cpu_factor": _UNIT,
    "backlog_level": _UNIT, "backlog_jitter": (0.0, 0.5), "backlog_tail_s": _NONNEG,
    "retry_overhead": (-1.0, 1.0), "burst_probability": _UNIT, "burst_amplitude": _UNIT,
    "packet_loss_rate": _UNIT,
    "hping3_window_bytes": _NONNEG, "hping3_data_bytes": _NONNEG,
    "mhddos_threads": _NONNEG, "mhddos_rps": _NONNEG,
}


def default_fault_params(kind: FaultKind) -> dict[str, float]:
    kind = FaultKind.parse(kind) if not isinstance(kind, FaultKind) else kind
    return {**_DEFAULTS[kind], **_COMMON}


def neutral_fault_params(kind: FaultKind) -> dict[str, float]:
    """Parameters under which ``apply_fault`` returns its input unchanged."""
    return {**default_fault_params(kind), "intensity": 0.0}


def default_window() -> Window:
    return Window(NORMAL_PHASE_S, FAULT_PHASE_S)


def _validate_params(kind: FaultKind, params: Mapping[str, float]) -> dict[str, float]:
    merged = default_fault_params(kind)
    for name, value in params.items():
        if name not in merged:
            raise ValueError(f"{kind.value}: unknown parameter {name!r}")
        value = float(value)
        lo, hi = PARAM_RANGES[name]
        if not lo <= value <= hi:
            raise ValueError(f"{kind.value}: {name}={value:g} outside [{lo:g}, {hi:g}]")
        merged[name] = value
    return merged


@dataclass(frozen=True)
class FaultScenario:
    kind: FaultKind
    window: Window = field(default_factory=default_window)
    params: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, FaultKind) else FaultKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", _validate_params(kind, self.params))

    def with_seed(self, seed: int) -> "FaultScenario":
        return FaultScenario(self.kind, self.window, dict(self.params), int(seed))

    def calibration(self) -> dict[str, float]:
        return dict(sorted(self.params.items()))


def _rng(scenario: FaultScenario) -> np.random.Generator:
    code = FAULT_KINDS.index(scenario.kind)
    return np.random.default_rng(np.random.SeedSequence([int(scenario.seed) & (2**64 - 1), code]))


def _flood(seg, lat, p, rng):
    cpu = np.clip(p["saturation_level"] + rng.normal(0.0, p["cpu_jitter"], seg.shape[1]), 0.0, 1.0)
    seg[CPU] = np.maximum(seg[CPU], cpu)
    seg[NET] = np.maximum(seg[NET], p["flood_network_level"])
    return seg, lat


def _volumetric(seg, lat, p, rng):
    seg[CPU] = seg[CPU] + p["cpu_add"] + rng.normal(0.0, p["cpu_jitter"], seg.shape[1])
    seg[NET] = seg[NET] + p["network_add"]
    seg[DISK] = seg[DISK] + p["disk_io_add"]
    return seg, lat


def _router(seg, lat, p, rng):
    n = seg.shape[1]
    seg[CPU] = seg[CPU] * p["io_wait_factor"]
    seg[NET] = seg[NET] * p["network_factor"]
    jitter = rng.uniform(-p["latency_jitter_ms"], p["latency_jitter_ms"], n)
    lat = lat + p["latency_add_ms"] + jitter
    return seg, lat


def _disk(seg, lat, p, rng, n_window):
    n = seg.shape[1]
    split = int(round(p["pause_fraction"] * n_window))
    if split > 0:
        drift = np.linspace(1.0, p["pause_cpu_factor"], split)
        seg[CPU, :split] = seg[CPU, :split] * drift
        seg[DISK, :split] = np.minimum(seg[DISK, :split], p["pause_disk_level"])
    n_back = n_window - split
    if n_back > 0:
        level = p["backlog_level"] + rng.normal(0.0, p["backlog_jitter"], (2, n_back))
        seg[CPU, split:n_window] = np.maximum(seg[CPU, split:n_window], level[0])
        seg[DISK, split:n_window] = np.maximum(seg[DISK, split:n_window], level[1])
    if n > n_window:
        # backlog drains linearly after the window
        ramp = np.linspace(1.0, 0.0, n - n_window + 2)[1:-1]
        for ch in (CPU, DISK):
            base = seg[ch, n_window:]
            seg[ch, n_window:] = base + ramp * np.maximum(p["backlog_level"] - base, 0.0)
    return seg, lat


def _software(seg, lat, p, rng):
    n = seg.shape[1]
    bursts = (rng.random(n) < p["burst_probability"]) * rng.uniform(0.0, p["burst_amplitude"], n)
    seg[CPU] = seg[CPU] + p["retry_overhead"] + bursts
    lat = lat + p["latency_add_ms"] * rng.uniform(0.5, 1.5, n)
    return seg, lat


def apply_fault(trace: MetricTrace, scenario: FaultScenario, burstable: bool = False) -> MetricTrace:
    """Return a copy of ``trace`` with the fault's symptoms inside its window.

    Samples before the window are never touched; only the disk model may
    reach past the window end (``backlog_tail_s``).  For burstable instances
    the CPU change is scaled by ``burstable_damping``.
    """
    p = scenario.params
    try:
        lo, hi = trace.index_range(scenario.window)
    except TraceError as exc:
        raise TraceError(f"fault window outside trace: {exc}") from None
    end = hi
    if scenario.kind is FaultKind.DISK_FAILURE and p["backlog_tail_s"] > 0:
        end = min(len(trace), hi + int(round(p["backlog_tail_s"] / trace.sample_interval)))

    base = trace.samples[:, lo:end]
    base_lat = trace.latency[lo:end] if trace.latency is not None else np.zeros(end - lo)
    seg, lat = base.copy(), base_lat.copy()
    rng = _rng(scenario)
    kind = scenario.kind
    if kind in (FaultKind.SYN_FLOOD, FaultKind.UDP_FLOOD):
        seg, lat = _flood(seg, lat, p, rng)
    elif kind is FaultKind.VOLUMETRIC:
        seg, lat = _volumetric(seg, lat, p, rng)
    elif kind is FaultKind.ROUTER_FAILURE:
        seg, lat = _router(seg, lat, p, rng)
    elif kind is FaultKind.DISK_FAILURE:
        seg, lat = _disk(seg, lat, p, rng, hi - lo)
    else:
        seg, lat = _software(seg, lat, p, rng)
    seg = np.clip(seg, 0.0, 1.0)

    delta = seg - base
    scale = np.full((delta.shape[0], 1), p["intensity"])
    if burstable:
        scale[CPU] *= p["burstable_damping"]
    seg = np.clip(base + scale * delta, 0.0, 1.0)
    lat = np.maximum(base_lat + p["intensity"] * (lat - base_lat), 0.0)

    samples = np.array(trace.samples)
    samples[:, lo:end] = seg
    latency = trace.latency
    if latency is not None or np.any(lat != base_lat):
        latency = np.array(latency) if latency is not None else np.zeros(len(trace))
        latency[lo:end] = lat
    return trace.replace(samples=samples, latency=latency)
