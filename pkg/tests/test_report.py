"""Report aggregation and design comparison: scaling math, serialization
purity, pinned 2d-vs-3d headline percentages, and trace replay fidelity."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from spiketile import (
    ArrayConfig,
    ConfigError,
    HeadShape,
    NeuronParams,
    QuantSpec,
    SpikeTensor,
    WeightMatrix,
    aggregate,
    bitwidth_requirements,
    compare,
    lookup_preset,
    parse_trace,
    replay_stats,
    run_attention_layer,
    run_mlp_layer,
)
from spiketile.presets import CostPreset
from spiketile.stats import RunStats, new_phase_cycles
from spiketile.memory import MemoryHierarchy
from spiketile.trace import format_trace


def _mlp_stats(seed=0, n=4, t=4, d_in=16, d_out=16, rows=16, cols=16):
    rng = np.random.default_rng(seed)
    s_in = SpikeTensor.bernoulli(rng, n, t, d_in)
    w = WeightMatrix.random(rng, d_in, d_out, 8)
    _, stats = run_mlp_layer(s_in, w, NeuronParams(v_th=8),
                             QuantSpec(b_w=8, b_x=16, b_a=1),
                             ArrayConfig(rows, cols), 8)
    return stats


def _attn_stats(seed=0, n=16, t=2, heads=2, d=8, rows=16, cols=16):
    rng = np.random.default_rng(seed)
    shape = HeadShape(n, t, heads, d)
    req = bitwidth_requirements(shape)
    quant = QuantSpec(b_a=req.b_a, b_x=req.b_x)
    dim = shape.model_dim
    q = SpikeTensor.bernoulli(rng, n, t, dim)
    k = SpikeTensor.bernoulli(rng, n, t, dim)
    v = SpikeTensor.bernoulli(rng, n, t, dim)
    _, stats = run_attention_layer(q, k, v, shape, NeuronParams(v_th=8),
                                   quant, ArrayConfig(rows, cols),
                                   min(n, rows), min(n, cols))
    return stats


def _bare_stats(cycles: int, workload="mlp") -> RunStats:
    phases = new_phase_cycles()
    phases["compute"] = cycles
    mem = (MemoryHierarchy.for_mlp() if workload == "mlp"
           else MemoryHierarchy.for_attention())
    return RunStats(workload=workload, phase_cycles=phases,
                    counters=mem.counters, records=[])


MLP_3D = lookup_preset("3d", "mlp", "16x128", "8/16")
MLP_2D = lookup_preset("2d", "mlp", "16x128", "8/16")
ATTN_3D = lookup_preset("3d", "attention", "16x16")
ATTN_2D = lookup_preset("2d", "attention", "16x16")


# --------------------------------------------------------------- aggregation

def test_wall_time_scales_cycles_by_frequency():
    report = aggregate(_bare_stats(1000), MLP_3D)
    assert report.wall_time_ns == pytest.approx(1000 / 1.68)
    assert "wall_time_ns=595.238\n" in report.to_kv()


def test_empty_run_divides_to_zero():
    report = aggregate(_bare_stats(0), MLP_3D)
    assert report.wall_time_ns == 0.0
    assert report.utilization == 0.0
    assert report.compute_utilization == 0.0
    assert report.mem_latency_ns == 0.0


def test_mem_latency_counts_every_transfer_event():
    stats = _mlp_stats()
    report = aggregate(stats, MLP_3D)
    assert stats.transfer_events == sum(
        r.action in ("load-w", "load-s", "write-through")
        for r in stats.records)
    assert report.mem_latency_ns == pytest.approx(
        stats.transfer_events * 26 / 1000)
    # the 2d preset scales the same traffic by its slower access
    assert aggregate(stats, MLP_2D).mem_latency_ns == pytest.approx(
        stats.transfer_events * 82 / 1000)


def test_per_buffer_latency_uses_alias_event_sums():
    stats = _mlp_stats()
    report = aggregate(stats, MLP_3D)
    t = stats.counters.tallies
    glb_events = sum(t[n].read_events + t[n].write_events
                     for n in ("act_glb0", "act_glb1"))
    assert report.buffer_latency_ns["act_glb"] == pytest.approx(
        glb_events * 16 / 1000)
    w_events = t["w_glb"].read_events + t["w_glb"].write_events
    assert report.buffer_latency_ns["w_glb"] == pytest.approx(
        w_events * 26 / 1000)


def test_dense_tiling_reaches_full_compute_utilization():
    stats = _mlp_stats(n=8, t=2, d_in=16, d_out=16, rows=16, cols=16)
    report = aggregate(stats, MLP_3D)
    assert report.compute_utilization == 1.0
    assert 0.0 < report.utilization < 1.0  # loads dilute the cycle total


def test_workload_mismatch_rejected():
    with pytest.raises(ConfigError):
        aggregate(_mlp_stats(), ATTN_3D)
    with pytest.raises(ConfigError):
        aggregate(_attn_stats(), MLP_3D)


def test_energy_table_prices_access_events():
    stats = _mlp_stats()
    report = aggregate(stats, MLP_3D,
                       energy_per_access_pj={"w_glb": 2.0, "s_buf": 0.5})
    t = stats.counters.tallies
    w_events = t["w_glb"].read_events + t["w_glb"].write_events
    s_events = t["s_buf"].read_events + t["s_buf"].write_events
    assert report.buffer_energy_pj["w_glb"] == pytest.approx(2.0 * w_events)
    assert report.energy_total_pj == pytest.approx(
        2.0 * w_events + 0.5 * s_events)
    assert "energy_total_pj=" in report.to_kv()
    with pytest.raises(ConfigError):
        aggregate(stats, MLP_3D, energy_per_access_pj={"bogus": 1.0})


def test_extras_append_after_fixed_fields():
    report = aggregate(_bare_stats(10), MLP_3D, extras={"seed": "7"})
    assert report.to_kv().rstrip().endswith("seed=7")


# ------------------------------------------------------------- serialization

def test_kv_is_pure_and_keys_unique():
    stats = _mlp_stats()
    a = aggregate(stats, MLP_3D).to_kv()
    b = aggregate(stats, MLP_3D).to_kv()
    assert a == b
    keys = [line.split("=", 1)[0] for line in a.splitlines()]
    assert len(keys) == len(set(keys))
    assert keys[:4] == ["workload", "design", "array", "bitwidths"]


def test_phases_csv_layout():
    report = aggregate(_bare_stats(10), MLP_3D)
    lines = report.phases_csv().splitlines()
    assert lines[0] == "phase,cycles"
    assert lines[1:] == ["load,0", "compute,10", "extract,0", "generate,0",
                         "total,10"]


def test_text_rendering_headline():
    report = aggregate(_attn_stats(), ATTN_3D)
    text = report.to_text()
    assert text.startswith("cost report: attention 16x16 3d\n")
    assert "peak_attention_values" in text


# ---------------------------------------------------------------- comparison

def test_mlp_wide_array_headline_percentages():
    stats = _mlp_stats()
    cmp = compare(aggregate(stats, MLP_2D), aggregate(stats, MLP_3D))
    assert cmp.freq_gain_percent == pytest.approx(7.006, abs=0.001)
    assert cmp.mem_latency_reduction_percent == pytest.approx(68.29, abs=0.01)
    assert cmp.mem_power_reduction_percent == pytest.approx(69.54, abs=0.01)
    kv = cmp.to_kv()
    assert "freq_gain_percent=7.0\n" in kv
    assert "mem_latency_reduction_percent=68.3\n" in kv
    assert "mem_power_reduction_percent=69.5\n" in kv


def test_attention_headline_percentages():
    stats = _attn_stats()
    cmp = compare(aggregate(stats, ATTN_2D), aggregate(stats, ATTN_3D))
    kv = cmp.to_kv()
    assert "freq_gain_percent=6.3\n" in kv
    assert "mem_latency_reduction_percent=74.2\n" in kv
    assert "mem_power_reduction_percent=49.4\n" in kv
    assert "total_power_reduction_percent=1.5\n" in kv
    assert "area_reduction_percent=50.0\n" in kv
    assert "wire_length_reduction_percent=24.1\n" in kv
    assert "wall_time_reduction_percent=6.0\n" in kv


def test_attention_narrow_array_latency_reduction():
    stats = _attn_stats(rows=16, cols=8)
    small2 = lookup_preset("2d", "attention", "16x8")
    small3 = lookup_preset("3d", "attention", "16x8")
    cmp = compare(aggregate(stats, small2), aggregate(stats, small3))
    assert cmp.mem_latency_reduction_percent == pytest.approx(81.44, abs=0.01)
    assert "mem_latency_reduction_percent=81.4\n" in cmp.to_kv()


def test_compare_requires_matching_workload_and_array():
    with pytest.raises(ConfigError):
        compare(aggregate(_mlp_stats(), MLP_2D),
                aggregate(_attn_stats(), ATTN_3D))
    stats = _attn_stats(rows=16, cols=8)
    with pytest.raises(ConfigError):
        compare(aggregate(_attn_stats(), ATTN_2D),
                aggregate(stats, lookup_preset("3d", "attention", "16x8")))


def test_compare_zero_frequency_baseline_raises():
    stats = _bare_stats(10)
    dead = replace(MLP_2D, effective_freq_ghz=0.0)
    with pytest.raises(ZeroDivisionError):
        compare(aggregate(stats, dead), aggregate(stats, MLP_3D))


def test_compare_is_antisymmetric():
    stats = _attn_stats()
    fwd = compare(aggregate(stats, ATTN_2D), aggregate(stats, ATTN_3D))
    rev = compare(aggregate(stats, ATTN_3D), aggregate(stats, ATTN_2D))
    assert (1 + fwd.freq_gain_percent / 100) * \
        (1 + rev.freq_gain_percent / 100) == pytest.approx(1.0)
    for key, value in fwd.rows()[1:]:
        other = dict(rev.rows())[key]
        assert (1 - value / 100) * (1 - other / 100) == pytest.approx(1.0)


def test_comparison_text_layout():
    stats = _attn_stats()
    text = compare(aggregate(stats, ATTN_2D), aggregate(stats, ATTN_3D)).to_text()
    assert text.startswith("comparison: attention 16x16, 2d -> 3d\n")
    assert "effective frequency gain" in text
    assert "%" in text


# -------------------------------------------------------------- trace replay

@pytest.mark.parametrize("workload", ["mlp", "attention", "attention-resident"])
def test_replayed_trace_reproduces_report(workload):
    if workload == "mlp":
        stats, preset = _mlp_stats(), MLP_3D
    else:
        rng = np.random.default_rng(3)
        shape = HeadShape(16, 2, 2, 8)
        req = bitwidth_requirements(shape)
        quant = QuantSpec(b_a=req.b_a, b_x=req.b_x)
        ten = lambda: SpikeTensor.bernoulli(rng, 16, 2, 16)
        _, stats = run_attention_layer(
            ten(), ten(), ten(), shape, NeuronParams(v_th=8), quant,
            ArrayConfig(16, 16), 16, 16,
            resident_x=workload.endswith("resident"))
        preset = ATTN_3D
    text = format_trace(stats, meta={"design": "3d"})
    records, meta = parse_trace(text)
    rebuilt = replay_stats(records, meta)
    assert aggregate(rebuilt, preset).to_kv() == aggregate(stats, preset).to_kv()
