import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faultscale.autoscaler import (HEADROOM, HORIZONTAL, VERTICAL, ScalingDecision, SloConfig, composite_trigger,
                                   horizontal_decide, horizontal_opt_replicas, vertical_decide, vertical_opt_spec,
                                   vertical_raw_opt_spec)
from faultscale.catalog import ResourceVector
from faultscale.metrics import MetricTrace, Window

from .oracles import brute_force_cheapest, ref_opt_spec, ref_replicas

SLO85 = SloConfig.parse("slo85")
SLO50 = SloConfig.parse("slo50")
unit = st.floats(0.0, 1.0, allow_nan=False)


def vec(cpu, memory=0.0, network=0.0, disk_io=None):
    return ResourceVector(cpu=cpu, memory=memory, disk_io=disk_io, network=network)


def flat(cpu, memory=0.5, disk_io=0.2, network=0.25):
    return MetricTrace.constant({"cpu": cpu, "memory": memory, "disk_io": disk_io, "network": network}, 900,
                                start_offset=300.0)


def test_slo_parse():
    assert SLO85.target == 0.85 and SLO85.name == "slo85" and SLO85.lookback_s == 900
    assert SloConfig.parse("slo70").target == 0.7
    assert SloConfig.parse("0.6").name == "slo60"
    with pytest.raises(ValueError):
        SloConfig.parse("fast")
    with pytest.raises(ValueError):
        SloConfig(0.0)


def test_slo_window_is_trailing():
    trace = MetricTrace.constant(0.1, 1200)
    assert SloConfig(0.85, 900).window_for(trace) == Window(300, 900)


@pytest.mark.parametrize("spec,m,slo,want", [(4, 1.0, 0.85, 5), (2, 0.85, 0.85, 2), (8, 0.2, 0.85, 0)])
def test_opt_spec_examples(spec, m, slo, want):
    got = vertical_opt_spec(vec(spec), vec(m), SloConfig(slo)).cpu
    assert got == want == ref_opt_spec(spec, m, slo)


def test_opt_spec_exact_product_not_bumped():
    # 8 * (2*0.8 - 0.85) = 6.0 in real arithmetic
    assert vertical_opt_spec(vec(8), vec(0.8), SLO85).cpu == 6


def test_opt_spec_missing_dimension_kept():
    out = vertical_opt_spec(vec(4, 16, 5, disk_io=None), vec(1.0, 0.5, 0.5, disk_io=0.9), SLO85)
    assert out.disk_io is None
    assert (out.cpu, out.memory, out.network) == (5, 3, 1)


def test_opt_spec_headroom_reading():
    raw = vertical_raw_opt_spec(vec(4), vec(0.85), SLO85, HEADROOM)
    assert raw.cpu == pytest.approx(4.0)
    assert vertical_opt_spec(vec(4), vec(1.0), SLO50, HEADROOM).cpu == 8


@pytest.mark.parametrize("cur,maxima,slo,want", [(3, (0.85,), 0.85, 3), (1, (1.0,), 0.5, 2), (3, (0.9,), 0.85, 4)])
def test_replicas_examples(cur, maxima, slo, want):
    util = vec(*maxima)
    assert horizontal_opt_replicas(cur, util, SloConfig(slo)) == want == ref_replicas(cur, maxima + (0, 0), slo)


def test_replicas_bounds_and_validation():
    assert horizontal_opt_replicas(3, vec(0.0), SLO85) == 1
    assert horizontal_opt_replicas(3, vec(0.0), SLO85, min_replicas=2) == 2
    assert horizontal_opt_replicas(3, vec(1.0), SLO50, max_replicas=4) == 4
    for bad in (0, -1, 2.5, True):
        with pytest.raises(ValueError):
            horizontal_opt_replicas(bad, vec(0.5), SLO85)


def test_vertical_at_slo_never_costs_more(catalog):
    for inst in catalog:
        d = vertical_decide(catalog, inst, flat(0.85, 0.85, 0.85, 0.85), SLO85)
        assert d.chosen_instance.hourly_cost <= inst.hourly_cost


def test_vertical_saturated(catalog):
    current = catalog.lookup("m5.xlarge")
    d = vertical_decide(catalog, current, flat(1.0, 0.5, 0.2, 0.5), SLO85)
    assert d.opt_spec.cpu == 5 and d.opt_spec.memory == 3 and d.opt_spec.network == 1
    assert d.chosen_instance.size == "2xlarge"
    assert d.chosen_instance.name == "c5.2xlarge" == ".".join(brute_force_cheapest(5, 3, 1))
    assert d.triggered and d.error is None and d.policy == VERTICAL


def test_vertical_unsatisfiable_falls_back(catalog):
    current = catalog.lookup("t3.2xlarge")
    d = vertical_decide(catalog, current, flat(1.0), SLO50)
    assert d.opt_spec.cpu == 12
    assert d.error == "demand exceeds catalog"
    assert d.chosen_instance.specs.cpu == 8


def test_vertical_uses_trailing_lookback(catalog):
    cpu = np.full(1200, 0.3)
    cpu[:300] = 1.0  # outside the 900 s lookback
    trace = MetricTrace.from_channels({"cpu": cpu, "memory": np.full(1200, 0.3), "disk_io": np.zeros(1200),
                                       "network": np.full(1200, 0.3)})
    d = vertical_decide(catalog, catalog.lookup("m5.xlarge"), trace, SLO85)
    assert d.aggregated_metrics.cpu == pytest.approx(0.3)


def test_horizontal_decide(catalog):
    inst = catalog.lookup("c5.xlarge")
    d = horizontal_decide(inst, 3, flat(0.9, 0.5), SLO85)
    assert d.policy == HORIZONTAL and d.opt_replicas == 4 and d.triggered and d.chosen_instance is None
    assert horizontal_decide(inst, 3, flat(0.9, 0.5), SLO50).opt_replicas == 6


def test_decision_invariants(catalog):
    with pytest.raises(ValueError):
        ScalingDecision(policy=VERTICAL, aggregated_metrics=vec(0.5), triggered=False)
    with pytest.raises(ValueError):
        ScalingDecision(policy=HORIZONTAL, aggregated_metrics=vec(0.5), triggered=False, opt_replicas=2,
                        chosen_instance=catalog.lookup("m5.large"))
    with pytest.raises(ValueError):
        ScalingDecision(policy="diagonal", aggregated_metrics=vec(0.5), triggered=False)


@settings(max_examples=200, deadline=None)
@given(unit, unit, st.sampled_from([2, 4, 8]), st.floats(0.05, 1.0))
def test_opt_spec_monotone_in_max(a, b, spec, slo):
    lo, hi = sorted((a, b))
    cfg = SloConfig(slo)
    assert vertical_opt_spec(vec(spec), vec(lo), cfg).cpu <= vertical_opt_spec(vec(spec), vec(hi), cfg).cpu


@settings(max_examples=200, deadline=None)
@given(unit, st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_opt_spec_non_increasing_in_slo(m, a, b):
    lo, hi = sorted((a, b))
    assert vertical_opt_spec(vec(4), vec(m), SloConfig(hi)).cpu <= vertical_opt_spec(vec(4), vec(m), SloConfig(lo)).cpu


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 50), unit, unit, unit, unit, st.floats(0.05, 1.0))
def test_replicas_bounds(cur, c, m, d, n, slo):
    util = ResourceVector(c, m, d, n)
    got = horizontal_opt_replicas(cur, util, SloConfig(slo))
    assert got >= 1 and got == ref_replicas(cur, (c, m, d, n), slo)
    assert got <= max(1, int(np.ceil(cur / slo)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20), st.floats(0.05, 1.0), st.floats(0.0, 1.0))
def test_saturation_invariance(cur, slo, other):
    # once any channel is saturated the decision no longer depends on the others
    a = horizontal_opt_replicas(cur, ResourceVector(1.0, other, 0.0, 0.0), SloConfig(slo))
    b = horizontal_opt_replicas(cur, ResourceVector(1.0, 0.0, 0.0, 0.0), SloConfig(slo))
    assert a == b


def test_composite_trigger():
    trace = flat(0.9, 0.5, 0.2, 0.6)
    assert composite_trigger(trace, {"cpu": 0.85, "network": 0.5})
    assert not composite_trigger(trace, {"cpu": 0.85, "network": 0.7})
    assert composite_trigger(trace, {"cpu": 0.85, "network": 0.7}, mode="any")
    assert not composite_trigger(trace, {"cpu": 0.9})  # strict comparison
    assert composite_trigger(trace, {})
    assert not composite_trigger(trace, {}, mode="any")
    with pytest.raises(KeyError):
        composite_trigger(trace, {"gpu": 0.5})
    with pytest.raises(KeyError):
        composite_trigger(trace, {"latency_ms": 100})
    with pytest.raises(ValueError):
        composite_trigger(trace, {"cpu": 0.5}, mode="most")


def test_composite_trigger_latency_window():
    lat = np.full(900, 40.0)
    lat[500:600] = 300.0
    trace = MetricTrace.constant(0.3, 900, start_offset=300.0, latency=lat)
    assert composite_trigger(trace, {"latency_ms": 200})
    assert not composite_trigger(trace, {"latency_ms": 200}, window=Window(300, 400))
