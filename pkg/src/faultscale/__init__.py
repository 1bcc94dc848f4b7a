"""Simulate how fault-distorted metrics change autoscaling decisions and cost."""
from ._kernels import BACKEND
from .analysis import ExperimentReport, classify, error_ratio, run_matrix
from .autoscaler import (ScalingDecision, SloConfig, composite_trigger, horizontal_decide,
                         horizontal_opt_replicas, vertical_decide, vertical_opt_spec, vertical_raw_opt_spec)
from .catalog import (InstanceCatalog, InstanceType, ResourceKind, ResourceVector, default_catalog, grid_search,
                      load_catalog, monthly_cost)
from .config import ExperimentConfig, default_config, load_config
from .faults import FaultKind, FaultScenario, apply_fault, default_fault_params
from .metrics import MetricTrace, Window, clamp_utilization, export_trace, import_trace, max_aggregate
from .workload import WorkloadProfile, generate_baseline

__version__ = "0.1.0"
