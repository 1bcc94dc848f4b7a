"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import random
import statistics
import time

import numpy as np
import pytest

from faultscale.analysis import (NEUTRAL, OVER, UNDER, UndefinedErrorRatio, classify, error_ratio,
                                 reports_to_csv, reports_to_json, run_matrix)
from faultscale.autoscaler import (SloConfig, composite_trigger, horizontal_decide, horizontal_opt_replicas,
                                   vertical_decide, vertical_opt_spec)
from faultscale.catalog import ResourceVector, UnsatisfiableDemand, default_catalog, grid_search
from faultscale.config import default_config
from faultscale.faults import FaultKind, FaultScenario, apply_fault
from faultscale.metrics import MetricTrace
from faultscale.workload import WorkloadProfile, generate_baseline

from .oracles import brute_force_cheapest, ref_error_ratio, ref_opt_spec, ref_replicas

pytestmark = pytest.mark.acceptance

SLO85 = SloConfig.parse("slo85")
SLO50 = SloConfig.parse("slo50")


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def matrix():
    cfg = default_config()
    t0 = time.perf_counter()
    reports = run_matrix(cfg)
    return cfg, reports, time.perf_counter() - t0


def _vec(cpu, memory=0.0, network=0.0):
    return ResourceVector(cpu=cpu, memory=memory, network=network)


def test_criterion_1_formula_fidelity(capsys):
    t0 = time.perf_counter()
    failures = []
    for spec, m, slo, want in [(4, 1.0, 0.85, 5), (2, 0.85, 0.85, 2), (8, 0.2, 0.85, 0)]:
        got = vertical_opt_spec(_vec(spec), _vec(m), SloConfig(slo)).cpu
        if not got == want == ref_opt_spec(spec, m, slo):
            failures.append(f"opt_spec({spec},{m},{slo})={got}")
    for cur, maxima, slo, want in [(3, (0.85,) * 4, 0.85, 3), (1, (1.0, 0, 0, 0), 0.5, 2),
                                   (3, (0.9, 0, 0, 0), 0.85, 4)]:
        got = horizontal_opt_replicas(cur, ResourceVector(*maxima), SloConfig(slo))
        if not got == want == ref_replicas(cur, maxima, slo):
            failures.append(f"replicas({cur},{maxima},{slo})={got}")
    for vn, va, want in [(3, 5, 200 / 3), (6, 5, -50 / 3), (4.2, 4.2, 0.0)]:
        got = error_ratio(vn, va)
        if abs(got - want) > 1e-9 or abs(got - ref_error_ratio(vn, va)) > 1e-9:
            failures.append(f"error_ratio({vn},{va})={got}")
    try:
        error_ratio(0, 1)
        failures.append("error ratio with zero normal value did not raise")
    except UndefinedErrorRatio:
        pass
    if [classify(0), classify(140), classify(-16.7)] != [NEUTRAL, OVER, UNDER]:
        failures.append("classify examples")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 1.0
    verdict(capsys, 1, ok, f"formula examples, {len(failures)} mismatches, {elapsed * 1000:.1f} ms"
            + (f" ({'; '.join(failures)})" if failures else ""))


def test_criterion_2_grid_search_oracle(capsys):
    catalog = default_catalog()
    rng = random.Random(2024)
    t0 = time.perf_counter()
    agree = 0
    for _ in range(1000):
        cpu, mem, net = rng.uniform(0, 8.5), rng.uniform(0, 33), rng.uniform(0, 10.5)
        expected = brute_force_cheapest(cpu, mem, net)
        try:
            got = grid_search(catalog, _vec(cpu, mem, net)).key
        except UnsatisfiableDemand:
            got = None
        agree += got == expected
    elapsed = time.perf_counter() - t0
    verdict(capsys, 2, agree == 1000 and elapsed < 1.0,
            f"grid search agrees with brute force on {agree}/1000 demands in {elapsed * 1000:.1f} ms")


def test_criterion_3_saturation_invariance(capsys):
    catalog = default_catalog()
    base = generate_baseline(WorkloadProfile())
    samples = np.array(base.samples)
    samples[0, 100] = 1.0   # saturated CPU sample before the fault window
    samples[3, 120] = 0.95  # network already above the flood level
    saturated = base.replace(samples=samples)
    flooded = {k: apply_fault(saturated, FaultScenario(k, seed=42)) for k in (FaultKind.SYN_FLOOD, FaultKind.UDP_FLOOD)}
    problems = []
    for kind, trace in flooded.items():
        for inst in catalog:
            for slo in (SLO85, SLO50):
                vn, va = vertical_decide(catalog, inst, saturated, slo), vertical_decide(catalog, inst, trace, slo)
                hn, ha = horizontal_decide(inst, 3, saturated, slo), horizontal_decide(inst, 3, trace, slo)
                if vn != va or hn != ha:
                    problems.append(f"{kind.value}/{inst.name}/{slo.name}: decisions differ")
                if error_ratio(vn.opt_spec_raw.cpu, va.opt_spec_raw.cpu) != 0.0:
                    problems.append(f"{kind.value}/{inst.name}/{slo.name}: vertical ratio nonzero")
                if error_ratio(hn.opt_replicas, ha.opt_replicas) != 0.0:
                    problems.append(f"{kind.value}/{inst.name}/{slo.name}: horizontal ratio nonzero")
    verdict(capsys, 3, not problems,
            f"saturated baseline vs flooded trace, 72 decision pairs, {len(problems)} differences"
            + (f" (first: {problems[0]})" if problems else ""))


EXPECTED_SIGNS = {
    "syn": {NEUTRAL, OVER}, "udp": {NEUTRAL, OVER}, "vol": {OVER},
    "disk": {OVER}, "app": {OVER}, "rtr": {UNDER},
}


def test_criterion_4_sign_pattern(capsys, matrix):
    _, reports, _ = matrix
    counts, failed = {}, []
    for fault, allowed in EXPECTED_SIGNS.items():
        for policy in ("vertical", "horizontal"):
            rows = [r for r in reports if r.fault == fault and r.policy == policy and r.slo == "slo85"]
            hits = sum(r.classification in allowed for r in rows)
            counts[(fault, policy)] = hits
            if hits < 8:
                seen = sorted({r.classification for r in rows})
                failed.append(f"{fault}/{policy} {hits}/9 (got {','.join(seen)})")
    summary = " ".join(f"{f}/{p[0]}={n}" for (f, p), n in counts.items())
    verdict(capsys, 4, not failed, f"sign pattern at slo85, matches per fault/policy: {summary}"
            + (f"; below 8/9: {'; '.join(failed)}" if failed else ""))


def test_criterion_5_threshold_sensitivity(capsys, matrix):
    _, reports, _ = matrix
    over_faults = {"vol", "disk", "app"}

    def mean_abs(policy, slo):
        return statistics.fmean(abs(r.cost_delta_usd) for r in reports
                                if r.policy == policy and r.slo == slo and r.fault in over_faults)

    v85, v50 = mean_abs("vertical", "slo85"), mean_abs("vertical", "slo50")
    h85, h50 = mean_abs("horizontal", "slo85"), mean_abs("horizontal", "slo50")
    verdict(capsys, 5, v50 < v85 and h50 > h85,
            f"mean |cost delta| vertical {v85:.2f} -> {v50:.2f}, horizontal {h85:.2f} -> {h50:.2f} (slo85 -> slo50)")


def test_criterion_6_doubling(capsys):
    inst = default_catalog().lookup("m5.large")
    trace = MetricTrace.constant({"cpu": 1.0, "memory": 0.3, "disk_io": 0.1, "network": 0.2}, 900, start_offset=300.0)
    a = horizontal_decide(inst, 1, trace, SLO50).opt_replicas
    b = horizontal_decide(inst, 3, trace, SLO85).opt_replicas
    verdict(capsys, 6, (a, b) == (2, 4), f"cpu max 1.0: 1 replica at slo50 -> {a}; 3 replicas at slo85 -> {b}")


def test_criterion_7_burstable_damping(capsys, matrix):
    _, reports, _ = matrix
    index = {(r.fault, r.family, r.size, r.slo, r.policy): r.error_ratio_pct for r in reports}
    checked, violations = 0, []
    for (fault, family, size, slo, policy), t3 in index.items():
        if family != "t3":
            continue
        m5 = index[(fault, "m5", size, slo, policy)]
        checked += 1
        if abs(t3) > abs(m5) + 1e-9:
            violations.append(f"{fault}/{size}/{slo}/{policy}: |{t3:.2f}| > |{m5:.2f}|")
    verdict(capsys, 7, not violations, f"t3 vs m5 error-ratio magnitude, {checked} pairs, {len(violations)} violations"
            + (f" (first: {violations[0]})" if violations else ""))


def test_criterion_8_determinism_performance(capsys, matrix):
    cfg, reports, elapsed = matrix
    again = run_matrix(default_config())
    same = (reports_to_csv(reports) == reports_to_csv(again)
            and reports_to_json(reports, cfg.calibration()) == reports_to_json(again, cfg.calibration()))
    n_samples = len(generate_baseline(cfg.profile))
    ok = len(reports) == 216 and n_samples == 900 and elapsed < 10.0 and same
    verdict(capsys, 8, ok, f"{len(reports)} scenarios, {n_samples} samples/channel, {elapsed:.2f} s, "
            f"byte-identical rerun={same}")


def test_criterion_9_composite_trigger(capsys):
    base = generate_baseline(WorkloadProfile())
    app = apply_fault(base, FaultScenario(FaultKind.SOFTWARE_PROBLEM, seed=42))
    syn = apply_fault(base, FaultScenario(FaultKind.SYN_FLOOD, seed=42))
    window = SLO85.window_for(app)
    single = composite_trigger(app, {"cpu": 0.85}, mode="any", window=window)
    combined = composite_trigger(app, {"cpu": 0.85, "network": 0.5}, mode="all", window=window)
    flood = composite_trigger(syn, {"cpu": 0.85, "network": 0.5}, mode="all", window=window)
    verdict(capsys, 9, single and not combined and flood,
            f"software problem: cpu-only trigger={single}, cpu+network all-mode={combined}; "
            f"syn flood all-mode={flood}")
