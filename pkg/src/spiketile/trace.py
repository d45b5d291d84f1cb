"""Step-trace files: CSV records prefixed with replayable run metadata.

A trace is `# meta key=value` lines, a header row, then one record per
scheduled step. Replaying a trace rebuilds the exact RunStats of the original
run, so the cost report can be regenerated byte-for-byte without re-simulating.
"""
from __future__ import annotations

import csv
import io

from .errors import ConfigError
from .memory import MemoryHierarchy
from .stats import (ACTION_PHASE, ACTION_ROUTES, INDEX_NAMES, RunStats,
                    TraceRecord, new_phase_cycles)

TRACE_MAGIC = "# spiketile-trace v1"
_HEADER = ("step", "action", "i0", "i1", "i2", "i3", "cycles", "buffer", "words")

# meta keys reproduced into RunStats on replay
_STAT_META = ("active_slots", "total_slots", "peak_attention_values")


def format_trace(stats: RunStats, meta: dict[str, str]) -> str:
    """Render a run's records plus metadata as trace-file text."""
    out = io.StringIO()
    out.write(TRACE_MAGIC + "\n")
    full_meta = dict(meta)
    full_meta["workload"] = stats.workload
    full_meta["index_names"] = ",".join(INDEX_NAMES[stats.workload])
    full_meta["active_slots"] = str(stats.active_slots)
    full_meta["total_slots"] = str(stats.total_slots)
    full_meta["peak_attention_values"] = str(stats.peak_attention_values)
    for key, value in full_meta.items():
        out.write(f"# meta {key}={value}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_HEADER)
    for r in stats.records:
        writer.writerow([r.step, r.action, r.i0, r.i1, r.i2, r.i3,
                         r.cycles, r.buffer, r.words])
    return out.getvalue()


def write_trace(path, stats: RunStats, meta: dict[str, str]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trace(stats, meta))


def parse_trace(text: str) -> tuple[list[TraceRecord], dict[str, str]]:
    lines = text.splitlines()
    if not lines or lines[0] != TRACE_MAGIC:
        raise ConfigError("not a trace file (bad or missing magic line)")
    meta: dict[str, str] = {}
    body: list[str] = []
    for line in lines[1:]:
        if line.startswith("# meta "):
            key, _, value = line[len("# meta "):].partition("=")
            meta[key] = value
        elif line.startswith("#") or not line.strip():
            continue
        else:
            body.append(line)
    if not body or tuple(body[0].split(",")) != _HEADER:
        raise ConfigError("trace header row missing or malformed")
    records: list[TraceRecord] = []
    for row in csv.reader(body[1:]):
        if len(row) != len(_HEADER):
            raise ConfigError(f"trace record has {len(row)} fields, expected {len(_HEADER)}")
        step, action, i0, i1, i2, i3, cycles, buffer, words = row
        records.append(TraceRecord(int(step), action, int(i0), int(i1),
                                   int(i2), int(i3), int(cycles), buffer,
                                   int(words)))
    return records, meta


def read_trace(path) -> tuple[list[TraceRecord], dict[str, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh.read())


def replay_stats(records: list[TraceRecord], meta: dict[str, str]) -> RunStats:
    """Rebuild RunStats from a parsed trace.

    Phases re-accumulate from the recorded cycles and access counters from the
    recorded words via each action's fixed source/destination route.
    """
    workload = meta.get("workload")
    if workload not in ACTION_ROUTES:
        raise ConfigError(f"trace meta names unknown workload {workload!r}")
    hier = (MemoryHierarchy.for_mlp() if workload == "mlp"
            else MemoryHierarchy.for_attention())
    counters = hier.counters
    routes = ACTION_ROUTES[workload]
    phase_cycles = new_phase_cycles()
    for rec in records:
        if rec.action not in ACTION_PHASE:
            raise ConfigError(f"trace record has unknown action {rec.action!r}")
        phase_cycles[ACTION_PHASE[rec.action]] += rec.cycles
        src, dst = routes.get(rec.action, (None, None))
        # records carry the GLB endpoint, which alternates for chained layers
        if rec.buffer and "glb" in rec.buffer:
            if src is not None and "glb" in src:
                src = rec.buffer
            elif dst is not None and "glb" in dst:
                dst = rec.buffer
        if src is not None:
            counters.read(src, rec.words)
        if dst is not None:
            counters.write(dst, rec.words)
    stats = RunStats(workload=workload, phase_cycles=phase_cycles,
                     counters=counters, records=list(records))
    for key in _STAT_META:
        if key in meta:
            setattr(stats, key, int(meta[key]))
    return stats
