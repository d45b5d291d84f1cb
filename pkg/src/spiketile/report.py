"""Cost reports: simulated run statistics scaled by post-layout presets.

Reports are pure functions of (RunStats, CostPreset): identical inputs give
identical serialized output. Preset powers are echoed as metadata; an optional
energy-per-access table turns access counts into energy totals. The memory
latency contribution serializes every access (pessimistic, never overlapped
with compute).
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

from .errors import ConfigError
from .presets import PER_BUFFER_METRICS, CostPreset
from .stats import PHASES, RunStats

# report alias -> access-counter buffers it aggregates; the aliases carry the
# per-buffer latency/power rows shipped with the mlp presets
_ALIAS_BUFFERS = {
    "act_glb": ("act_glb0", "act_glb1"),
    "w_glb": ("w_glb",),
    "act_buf": ("s_buf",),
    "w_buf": ("w_buf",),
}


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _parse_array(array: str) -> tuple[int, int]:
    try:
        h, w = array.lower().split("x")
        return int(h), int(w)
    except ValueError as exc:
        raise ConfigError(f"bad array geometry {array!r}") from exc


@dataclass
class Report:
    """Aggregated run outcome plus echoed preset figures."""

    workload: str
    design: str
    array: str
    bitwidths: str
    phase_cycles: dict[str, int]
    total_cycles: int
    wall_time_ns: float
    utilization: float
    compute_utilization: float
    peak_attention_values: int
    transfer_events: int
    transfer_words: int
    tallies: dict[str, tuple[int, int, int, int]]
    mem_latency_ns: float
    buffer_latency_ns: dict[str, float]
    preset: CostPreset
    buffer_energy_pj: dict[str, float] = field(default_factory=dict)
    energy_total_pj: float | None = None
    extras: dict[str, str] = field(default_factory=dict)

    def items(self) -> list[tuple[str, object]]:
        """(key, value) pairs in serialization order."""
        out: list[tuple[str, object]] = [
            ("workload", self.workload),
            ("design", self.design),
            ("array", self.array),
            ("bitwidths", self.bitwidths),
        ]
        for phase in PHASES:
            out.append((f"cycles_{phase}", self.phase_cycles[phase]))
        out += [
            ("cycles_total", self.total_cycles),
            ("wall_time_ns", self.wall_time_ns),
            ("utilization", self.utilization),
            ("compute_utilization", self.compute_utilization),
            ("peak_attention_values", self.peak_attention_values),
            ("transfer_events", self.transfer_events),
            ("transfer_words", self.transfer_words),
            ("mem_latency_ns", self.mem_latency_ns),
        ]
        for name in sorted(self.tallies):
            rw, ww, re, we = self.tallies[name]
            out += [(f"{name}_read_words", rw), (f"{name}_write_words", ww),
                    (f"{name}_read_events", re), (f"{name}_write_events", we)]
        for alias in PER_BUFFER_METRICS:
            if alias in self.buffer_latency_ns:
                out.append((f"{alias}_latency_ns", self.buffer_latency_ns[alias]))
        p = self.preset
        out += [
            ("effective_freq_ghz", p.effective_freq_ghz),
            ("area_w_mm", p.area_w_mm),
            ("area_h_mm", p.area_h_mm),
            ("area_mm2", p.area_mm2),
            ("num_cells", p.num_cells),
            ("wire_length_m", p.wire_length_m),
            ("internal_power_mw", p.internal_power_mw),
            ("switching_power_mw", p.switching_power_mw),
            ("leakage_power_mw", p.leakage_power_mw),
            ("total_power_mw", p.total_power_mw),
            ("mem_access_latency_ps", p.mem_access_latency_ps),
            ("mem_access_power_mw", p.mem_access_power_mw),
        ]
        for alias in PER_BUFFER_METRICS:
            if alias in p.buffer_latency_ps:
                out.append((f"{alias}_latency_ps", p.buffer_latency_ps[alias]))
            if alias in p.buffer_power_mw:
                out.append((f"{alias}_power_mw", p.buffer_power_mw[alias]))
        for name in sorted(self.buffer_energy_pj):
            out.append((f"{name}_energy_pj", self.buffer_energy_pj[name]))
        if self.energy_total_pj is not None:
            out.append(("energy_total_pj", self.energy_total_pj))
        for key in sorted(self.extras):
            out.append((key, self.extras[key]))
        return out

    def to_kv(self) -> str:
        """Line-oriented `key=value` records, one per field."""
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.items())

    def phases_csv(self) -> str:
        """Comma-separated per-phase cycle table."""
        rows = [f"{phase},{self.phase_cycles[phase]}" for phase in PHASES]
        rows.append(f"total,{self.total_cycles}")
        return "phase,cycles\n" + "\n".join(rows) + "\n"

    def to_text(self) -> str:
        out = io.StringIO()
        out.write("cost report: "
                  f"{self.workload} {self.array} {self.design}"
                  + (f" [{self.bitwidths}]" if self.bitwidths != "-" else "")
                  + "\n")
        width = max(len(k) for k, _ in self.items()) + 2
        for key, value in self.items():
            out.write(f"  {key:<{width}}{_fmt(value)}\n")
        return out.getvalue()


def aggregate(stats: RunStats, preset: CostPreset,
              extras: dict[str, str] | None = None,
              energy_per_access_pj: dict[str, float] | None = None) -> Report:
    """Combine run statistics with a cost preset into a report.

    The preset must belong to the same workload class as the run. The optional
    energy table maps buffer names to picojoules per access event.
    """
    if preset.workload != stats.workload:
        raise ConfigError(
            f"preset workload {preset.workload!r} does not match "
            f"run workload {stats.workload!r}")
    rows, cols = _parse_array(preset.array)
    total_cycles = stats.total_cycles
    freq = preset.effective_freq_ghz
    wall_time_ns = total_cycles / freq if freq > 0 else 0.0
    pe_cycle_slots = total_cycles * rows * cols
    utilization = (stats.active_slots / pe_cycle_slots) if pe_cycle_slots else 0.0
    compute_utilization = (stats.active_slots / stats.total_slots
                           if stats.total_slots else 0.0)
    tallies = {name: (t.read_words, t.write_words, t.read_events, t.write_events)
               for name, t in sorted(stats.counters.tallies.items())}
    mem_latency_ns = (stats.transfer_events * preset.mem_access_latency_ps
                      / 1000.0)
    buffer_latency_ns: dict[str, float] = {}
    for alias, members in _ALIAS_BUFFERS.items():
        if alias not in preset.buffer_latency_ps:
            continue
        events = sum(tallies[m][2] + tallies[m][3]
                     for m in members if m in tallies)
        buffer_latency_ns[alias] = events * preset.buffer_latency_ps[alias] / 1000.0
    buffer_energy_pj: dict[str, float] = {}
    energy_total_pj = None
    if energy_per_access_pj is not None:
        for name, pj in sorted(energy_per_access_pj.items()):
            if name not in tallies:
                raise ConfigError(f"energy table names unknown buffer {name!r}")
            events = tallies[name][2] + tallies[name][3]
            buffer_energy_pj[name] = events * pj
        energy_total_pj = sum(buffer_energy_pj.values())
    return Report(
        workload=stats.workload,
        design=preset.design,
        array=preset.array,
        bitwidths=preset.bitwidths,
        phase_cycles=dict(stats.phase_cycles),
        total_cycles=total_cycles,
        wall_time_ns=wall_time_ns,
        utilization=utilization,
        compute_utilization=compute_utilization,
        peak_attention_values=stats.peak_attention_values,
        transfer_events=stats.transfer_events,
        transfer_words=stats.transfer_words,
        tallies=tallies,
        mem_latency_ns=mem_latency_ns,
        buffer_latency_ns=buffer_latency_ns,
        preset=preset,
        buffer_energy_pj=buffer_energy_pj,
        energy_total_pj=energy_total_pj,
        extras=dict(extras or {}),
    )


@dataclass(frozen=True)
class Comparison:
    """Baseline-vs-candidate deltas, in percent (unrounded)."""

    workload: str
    array: str
    baseline_design: str
    candidate_design: str
    freq_gain_percent: float
    mem_latency_reduction_percent: float
    mem_power_reduction_percent: float
    total_power_reduction_percent: float
    area_reduction_percent: float
    wire_length_reduction_percent: float
    wall_time_reduction_percent: float

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("freq_gain_percent", self.freq_gain_percent),
            ("mem_latency_reduction_percent", self.mem_latency_reduction_percent),
            ("mem_power_reduction_percent", self.mem_power_reduction_percent),
            ("total_power_reduction_percent", self.total_power_reduction_percent),
            ("area_reduction_percent", self.area_reduction_percent),
            ("wire_length_reduction_percent", self.wire_length_reduction_percent),
            ("wall_time_reduction_percent", self.wall_time_reduction_percent),
        ]

    def to_kv(self) -> str:
        """Percentages to one decimal, round-half-even."""
        head = [("workload", self.workload), ("array", self.array),
                ("baseline_design", self.baseline_design),
                ("candidate_design", self.candidate_design)]
        lines = [f"{k}={v}" for k, v in head]
        lines += [f"{k}={round(v, 1):.1f}" for k, v in self.rows()]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"comparison: {self.workload} {self.array}, "
                  f"{self.baseline_design} -> {self.candidate_design}\n")
        labels = {
            "freq_gain_percent": "effective frequency gain",
            "mem_latency_reduction_percent": "memory access latency reduction",
            "mem_power_reduction_percent": "memory access power reduction",
            "total_power_reduction_percent": "total power reduction",
            "area_reduction_percent": "footprint reduction",
            "wire_length_reduction_percent": "wire length reduction",
            "wall_time_reduction_percent": "wall time reduction",
        }
        for key, value in self.rows():
            out.write(f"  {labels[key]:<34}{round(value, 1):.1f} %\n")
        return out.getvalue()


def _ratio_delta(baseline: float, candidate: float, what: str,
                 gain: bool) -> float:
    if baseline == 0:
        raise ZeroDivisionError(f"baseline {what} is 0, cannot compare")
    if gain:
        return (candidate / baseline - 1.0) * 100.0
    return (1.0 - candidate / baseline) * 100.0


def compare(baseline: Report, candidate: Report) -> Comparison:
    """Percentage deltas of candidate against baseline.

    Both reports must come from the same workload and array size. Reductions
    are 1 - candidate/baseline; the frequency gain is candidate/baseline - 1.
    """
    if baseline.workload != candidate.workload:
        raise ConfigError(
            f"cannot compare workloads {baseline.workload!r} "
            f"and {candidate.workload!r}")
    if baseline.array != candidate.array:
        raise ConfigError(
            f"cannot compare array sizes {baseline.array!r} "
            f"and {candidate.array!r}")
    bp, cp = baseline.preset, candidate.preset
    return Comparison(
        workload=baseline.workload,
        array=baseline.array,
        baseline_design=baseline.design,
        candidate_design=candidate.design,
        freq_gain_percent=_ratio_delta(
            bp.effective_freq_ghz, cp.effective_freq_ghz,
            "effective frequency", gain=True),
        mem_latency_reduction_percent=_ratio_delta(
            bp.mem_access_latency_ps, cp.mem_access_latency_ps,
            "memory access latency", gain=False),
        mem_power_reduction_percent=_ratio_delta(
            bp.mem_access_power_mw, cp.mem_access_power_mw,
            "memory access power", gain=False),
        total_power_reduction_percent=_ratio_delta(
            bp.total_power_mw, cp.total_power_mw, "total power", gain=False),
        area_reduction_percent=_ratio_delta(
            bp.area_mm2, cp.area_mm2, "footprint", gain=False),
        wire_length_reduction_percent=_ratio_delta(
            bp.wire_length_m, cp.wire_length_m, "wire length", gain=False),
        wall_time_reduction_percent=_ratio_delta(
            baseline.wall_time_ns, candidate.wall_time_ns, "wall time",
            gain=False),
    )
