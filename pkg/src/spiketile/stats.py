"""Run statistics and the step-trace data model shared by both array engines."""
from __future__ import annotations

from dataclasses import dataclass, field

from .memory import AccessCounters

PHASES = ("load", "compute", "extract", "generate")

# schedule/trace action -> accounting phase
ACTION_PHASE = {
    "load-w": "load",
    "load-s": "load",
    "load-kv": "load",
    "load-q": "load",
    "load-x": "load",
    "compute": "compute",
    "mode1-compute": "compute",
    "mode2-compute": "compute",
    "extract": "extract",
    "extract-x": "extract",
    "generate": "generate",
    "read-x-gen": "generate",
    "read-x-buf": "generate",
    "write-through": "generate",
}

# action -> (source buffer, destination buffer); None marks the spike
# generators, which are not an addressable buffer
ACTION_ROUTES = {
    "mlp": {
        "load-w": ("w_glb", "w_buf"),
        "load-s": ("act_glb0", "s_buf"),
        "write-through": (None, "act_glb1"),
    },
    "attention": {
        "load-kv": ("act_glb0", "kv_buf"),
        "load-q": ("act_glb0", "q_buf"),
        "load-x": ("x_glb", "x_buf"),
        "extract-x": ("x_buf", "x_glb"),
        "read-x-gen": ("x_glb", None),
        "read-x-buf": ("x_buf", None),
        "write-through": (None, "act_glb1"),
    },
}

# index column meanings per workload
INDEX_NAMES = {
    "mlp": ("of", "n", "t", "if"),
    "attention": ("h", "t", "i", "j"),
}


@dataclass(frozen=True)
class TraceRecord:
    """One scheduled step: indices, cycles charged, and words moved."""

    step: int
    action: str
    i0: int
    i1: int
    i2: int
    i3: int
    cycles: int
    buffer: str
    words: int


@dataclass
class RunStats:
    """Cycle and access totals for one simulated layer run."""

    workload: str
    phase_cycles: dict[str, int]
    counters: AccessCounters
    active_slots: int = 0
    total_slots: int = 0
    peak_attention_values: int = 0
    records: list[TraceRecord] = field(default_factory=list)

    @property
    def total_cycles(self) -> int:
        return sum(self.phase_cycles.values())

    @property
    def w_loads(self) -> int:
        """Weight-chunk load events from the weight global buffer."""
        return self.counters.tallies["w_glb"].read_events

    @property
    def transfer_events(self) -> int:
        """Scheduled steps that moved data (one per load/store record)."""
        routes = ACTION_ROUTES[self.workload]
        return sum(1 for r in self.records if r.action in routes)

    @property
    def transfer_words(self) -> int:
        routes = ACTION_ROUTES[self.workload]
        return sum(r.words for r in self.records if r.action in routes)


def new_phase_cycles() -> dict[str, int]:
    return {p: 0 for p in PHASES}


def merge_stats(parts: list[RunStats]) -> RunStats:
    """Combine per-layer stats sharing one memory hierarchy into run totals."""
    if not parts:
        raise ValueError("no stats to merge")
    base = parts[0]
    merged = RunStats(
        workload=base.workload,
        phase_cycles=new_phase_cycles(),
        counters=base.counters,
        records=[],
    )
    step = 0
    for part in parts:
        if part.counters is not base.counters:
            raise ValueError("stats to merge must share one memory hierarchy")
        for phase, cyc in part.phase_cycles.items():
            merged.phase_cycles[phase] += cyc
        merged.active_slots += part.active_slots
        merged.total_slots += part.total_slots
        merged.peak_attention_values = max(merged.peak_attention_values,
                                           part.peak_attention_values)
        for rec in part.records:
            merged.records.append(TraceRecord(
                step, rec.action, rec.i0, rec.i1, rec.i2, rec.i3,
                rec.cycles, rec.buffer, rec.words))
            step += 1
    return merged
