"""Error ratios, classification, the experiment matrix and report files."""
from __future__ import annotations

import csv
import io
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .autoscaler import (HORIZONTAL, VERTICAL, ScalingDecision, horizontal_decide, vertical_decide)
from .catalog import RESOURCE_KINDS, InstanceType, monthly_cost
from .config import ExperimentConfig
from .faults import FaultScenario, apply_fault
from .metrics import MetricTrace
from .workload import generate_baseline

log = logging.getLogger(__name__)

OVER = "overprovision"
UNDER = "underprovision"
NEUTRAL = "neutral"
NA = "n/a"
ERROR = "error"

REPORT_FIELDS = ("fault", "family", "size", "slo", "policy", "seed", "dimension", "error_ratio_pct",
                 "classification", "cost_normal_usd", "cost_abnormal_usd", "cost_delta_usd", "risk_flag")

# dimension whose error ratio classifies a scenario
HEADLINE = {VERTICAL: "cpu", HORIZONTAL: "replicas"}


class UndefinedErrorRatio(ValueError):
    pass


def error_ratio(v_normal: float, v_abnormal: float) -> float:
    """Percent change of the fault-state value against the normal-state value."""
    if v_normal == 0:
        raise UndefinedErrorRatio("error ratio undefined for a zero normal-state value")
    return (v_abnormal - v_normal) / v_normal * 100.0


def classify(value: Optional[float], tolerance_pct: float = 5.0) -> str:
    if value is None:
        return NA
    if abs(value) <= tolerance_pct:
        return NEUTRAL
    return OVER if value > 0 else UNDER


def _ratio_or_none(v_normal: Optional[float], v_abnormal: Optional[float]) -> Optional[float]:
    if v_normal is None or v_abnormal is None:
        return None
    try:
        return error_ratio(v_normal, v_abnormal)
    except UndefinedErrorRatio:
        return None


@dataclass
class ExperimentReport:
    fault: str
    family: str
    size: str
    slo: str
    policy: str
    seed: int
    dimension: str
    error_ratio_pct: Optional[float]
    classification: str
    cost_normal_usd: Optional[float]
    cost_abnormal_usd: Optional[float]
    cost_delta_usd: Optional[float]
    risk_flag: bool
    # detail kept out of report.csv; feeds the figure tables
    slo_target: float = 0.0
    values_normal: dict = field(default_factory=dict)
    values_abnormal: dict = field(default_factory=dict)
    dimension_ratios: dict = field(default_factory=dict)
    note: Optional[str] = None

    @property
    def instance(self) -> str:
        return f"{self.family}.{self.size}"

    def row(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_FIELDS}


def _vertical_values(d: ScalingDecision) -> dict:
    return {k.value: d.opt_spec_raw.get(k) for k in RESOURCE_KINDS}


def _scenario_report(fault: FaultScenario, instance: InstanceType, slo, policy: str, seed: int,
                     normal_trace: MetricTrace, fault_trace: MetricTrace, cfg: ExperimentConfig) -> ExperimentReport:
    common = dict(fault=fault.kind.value, family=instance.family, size=instance.size, slo=slo.name,
                  policy=policy, seed=seed, slo_target=slo.target)
    hours = cfg.hours_per_month
    if policy == VERTICAL:
        dn = vertical_decide(cfg.catalog, instance, normal_trace, slo, cfg.sizing_rule, cfg.bucket_s)
        da = vertical_decide(cfg.catalog, instance, fault_trace, slo, cfg.sizing_rule, cfg.bucket_s)
        vn, va = _vertical_values(dn), _vertical_values(da)
        ratios = {k: _ratio_or_none(vn[k], va[k]) for k in vn}
        cost_n = monthly_cost(dn.chosen_instance, 1, hours)
        cost_a = monthly_cost(da.chosen_instance, 1, hours)
        vn["instance"], va["instance"] = dn.chosen_instance.name, da.chosen_instance.name
        exceeded = bool(dn.error or da.error)
    else:
        dn = horizontal_decide(instance, cfg.current_replicas, normal_trace, slo,
                               cfg.min_replicas, cfg.max_replicas, cfg.bucket_s)
        da = horizontal_decide(instance, cfg.current_replicas, fault_trace, slo,
                               cfg.min_replicas, cfg.max_replicas, cfg.bucket_s)
        vn, va = {"replicas": dn.opt_replicas}, {"replicas": da.opt_replicas}
        ratios = {"replicas": _ratio_or_none(dn.opt_replicas, da.opt_replicas)}
        cost_n = monthly_cost(instance, dn.opt_replicas, hours)
        cost_a = monthly_cost(instance, da.opt_replicas, hours)
        exceeded = False
    dim = HEADLINE[policy]
    value = ratios[dim]
    cls = classify(value, cfg.tolerance_pct)
    return ExperimentReport(
        **common,
        dimension=dim,
        error_ratio_pct=value,
        classification=cls,
        cost_normal_usd=cost_n,
        cost_abnormal_usd=cost_a,
        cost_delta_usd=cost_a - cost_n,
        risk_flag=cls == UNDER or exceeded,
        values_normal=vn,
        values_abnormal=va,
        dimension_ratios=ratios,
        note="demand exceeds catalog" if exceeded else None,
    )


def _error_report(fault: FaultScenario, instance: InstanceType, slo, policy: str, seed: int, exc: Exception):
    return ExperimentReport(fault=fault.kind.value, family=instance.family, size=instance.size, slo=slo.name,
                            policy=policy, seed=seed, dimension=HEADLINE.get(policy, ""), error_ratio_pct=None,
                            classification=ERROR, cost_normal_usd=None, cost_abnormal_usd=None,
                            cost_delta_usd=None, risk_flag=False, slo_target=slo.target,
                            note=f"{type(exc).__name__}: {exc}")


def _run_fault_block(cfg: ExperimentConfig, fault_idx: int, seed: int) -> list[tuple[tuple, ExperimentReport]]:
    """Every scenario sharing one (fault, seed) pair, so traces are built once."""
    fault = cfg.faults[fault_idx].with_seed(seed)
    seed_idx = cfg.seeds.index(seed)
    out = []
    try:
        normal = generate_baseline(cfg.profile.with_seed(seed))
        distorted = {b: apply_fault(normal, fault, burstable=b) for b in (False, True)}
    except Exception as exc:  # recorded per scenario; the matrix keeps going
        log.warning("fault %s seed %d failed: %s", fault.kind.value, seed, exc)
        normal, distorted, setup_error = None, None, exc
    else:
        setup_error = None
    for i_idx, instance in enumerate(cfg.instances):
        for s_idx, slo in enumerate(cfg.slos):
            for p_idx, policy in enumerate(cfg.policies):
                key = (fault_idx, i_idx, s_idx, p_idx, seed_idx)
                if setup_error is not None:
                    out.append((key, _error_report(fault, instance, slo, policy, seed, setup_error)))
                    continue
                try:
                    rep = _scenario_report(fault, instance, slo, policy, seed, normal,
                                           distorted[instance.burstable], cfg)
                except Exception as exc:
                    log.warning("scenario %s failed: %s", key, exc)
                    rep = _error_report(fault, instance, slo, policy, seed, exc)
                out.append((key, rep))
    return out


def run_matrix(cfg: ExperimentConfig, jobs: int = 1) -> list[ExperimentReport]:
    """Evaluate fault x instance x SLO x policy x seed; rows come back in scenario order."""
    blocks = [(f, s) for f in range(len(cfg.faults)) for s in cfg.seeds]
    if jobs > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fault_block, [cfg] * len(blocks), *zip(*blocks)))
    else:
        results = [_run_fault_block(cfg, f, s) for f, s in blocks]
    keyed = [item for block in results for item in block]
    keyed.sort(key=lambda kv: kv[0])
    return [rep for _, rep in keyed]


def errors(reports: Iterable[ExperimentReport]) -> list[ExperimentReport]:
    return [r for r in reports if r.classification == ERROR]


# --- report files ---------------------------------------------------------

def _fmt(value, digits: int) -> str:
    if value is None:
        return NA
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


_DIGITS = {"error_ratio_pct": 6, "cost_normal_usd": 4, "cost_abnormal_usd": 4, "cost_delta_usd": 4}


def _csv(header: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row.get(h), _DIGITS.get(h, 6)) for h in header])
    return buf.getvalue()


def reports_to_csv(reports: Iterable[ExperimentReport]) -> str:
    return _csv(REPORT_FIELDS, (r.row() for r in reports))


def _json_value(key: str, value):
    if isinstance(value, float):
        return round(value, _DIGITS.get(key, 6))
    return value


def reports_to_json(reports: Iterable[ExperimentReport], calibration: Optional[dict] = None) -> str:
    rows = [{k: _json_value(k, v) for k, v in r.row().items()} for r in reports]
    doc = {"calibration": calibration or {}, "reports": rows}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _parse_cell(key: str, text: str):
    if text == NA:
        return None
    if key == "seed":
        return int(text)
    if key == "risk_flag":
        if text not in ("true", "false"):
            raise ValueError(f"risk_flag must be true/false, got {text!r}")
        return text == "true"
    if key in _DIGITS:
        return float(text)
    return text


def read_report_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(reader.fieldnames or ())
    if header != REPORT_FIELDS:
        missing = [f for f in REPORT_FIELDS if f not in header]
        raise ValueError(f"not a report file; missing column(s): {', '.join(missing) or 'order differs'}")
    return [{k: _parse_cell(k, row[k]) for k in REPORT_FIELDS} for row in reader]


def merge_report_rows(tables: Iterable[list[dict]]) -> list[dict]:
    """Concatenate report tables; duplicate scenario ids keep the first row."""
    seen, merged = set(), []
    for rows in tables:
        for row in rows:
            key = tuple(row[k] for k in REPORT_FIELDS[:6])
            if key in seen:
                continue
            seen.add(key)
            merged.append(row)
    merged.sort(key=lambda r: tuple(str(r[k]) if k != "seed" else f"{r[k]:020d}" for k in REPORT_FIELDS[:6]))
    return merged


def rows_to_csv(rows: Iterable[dict]) -> str:
    return _csv(REPORT_FIELDS, rows)


SUMMARY_FIELDS = ("fault", "family", "size", "slo", "policy", "dimension", "n_seeds",
                  "error_ratio_mean", "error_ratio_min", "error_ratio_max",
                  "cost_delta_mean", "cost_delta_min", "cost_delta_max")


def summarize_rows(rows: Iterable[dict]) -> list[dict]:
    """Mean/min/max over seeds for every scenario id."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in ("fault", "family", "size", "slo", "policy", "dimension")), []).append(row)
    out = []
    for key, members in groups.items():
        entry = dict(zip(("fault", "family", "size", "slo", "policy", "dimension"), key))
        entry["n_seeds"] = len(members)
        for src, prefix in (("error_ratio_pct", "error_ratio"), ("cost_delta_usd", "cost_delta")):
            vals = [m[src] for m in members if m[src] is not None]
            entry[f"{prefix}_mean"] = statistics.fmean(vals) if vals else None
            entry[f"{prefix}_min"] = min(vals) if vals else None
            entry[f"{prefix}_max"] = max(vals) if vals else None
        out.append(entry)
    return out


def summary_to_csv(rows: Iterable[dict]) -> str:
    return _csv(SUMMARY_FIELDS, rows)


FIG2_FIELDS = ("fault", "family", "size", "slo", "seed", "dimension", "opt_spec_normal", "opt_spec_abnormal",
               "error_ratio_pct")
FIG3_FIELDS = ("fault", "family", "size", "slo", "seed", "replicas_normal", "replicas_abnormal", "error_ratio_pct")
FIG4_FIELDS = ("policy", "slo", "fault", "family", "size", "seed", "cost_normal_usd", "cost_abnormal_usd",
               "cost_delta_usd", "risk_flag")


def fig2_vertical_csv(reports: Sequence[ExperimentReport]) -> str:
    rows = []
    for r in reports:
        if r.policy != VERTICAL or r.classification == ERROR:
            continue
        for dim, ratio in r.dimension_ratios.items():
            rows.append(dict(fault=r.fault, family=r.family, size=r.size, slo=r.slo, seed=r.seed, dimension=dim,
                             opt_spec_normal=r.values_normal.get(dim), opt_spec_abnormal=r.values_abnormal.get(dim),
                             error_ratio_pct=ratio))
    return _csv(FIG2_FIELDS, rows)


def fig3_horizontal_csv(reports: Sequence[ExperimentReport]) -> str:
    rows = [dict(fault=r.fault, family=r.family, size=r.size, slo=r.slo, seed=r.seed,
                 replicas_normal=r.values_normal["replicas"], replicas_abnormal=r.values_abnormal["replicas"],
                 error_ratio_pct=r.error_ratio_pct)
            for r in reports if r.policy == HORIZONTAL and r.classification != ERROR]
    return _csv(FIG3_FIELDS, rows)


def fig4_cost_csv(reports: Sequence[ExperimentReport]) -> str:
    rows = sorted((r.row() for r in reports if r.classification != ERROR),
                  key=lambda row: (row["policy"], row["slo"]))
    return _csv(FIG4_FIELDS, rows)


def write_outputs(reports: Sequence[ExperimentReport], out_dir: Path, calibration: dict,
                  write_json: bool = True, write_plots: bool = True) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"report.csv": reports_to_csv(reports)}
    if write_json:
        files["report.json"] = reports_to_json(reports, calibration)
    if write_plots:
        files["fig2_vertical.csv"] = fig2_vertical_csv(reports)
        files["fig3_horizontal.csv"] = fig3_horizontal_csv(reports)
        files["fig4_cost.csv"] = fig4_cost_csv(reports)
    written = []
    for name, text in files.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written

