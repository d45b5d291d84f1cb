"""Fused execution of spiking self-attention on a reconfigurable systolic grid.

The grid maps rows to query tokens and columns to key tokens. Mode 1 streams
query bits left to right against key bits moving top to bottom and leaves each
attention score stationary in its R-PE. Mode 2 keeps those scores in place,
streams value bits down the columns, and accumulates score * value onto X
partials flowing left to right. The full attention map never leaves the grid;
only X partials travel through the X global buffer. The schedule loops head,
timestep, key tile, query tile, so each K/V tile is loaded once per key tile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .golden import (HeadShape, NeuronParams, QuantSpec, SpikeTensor,
                     check_range, lif_step)
from .memory import MemoryHierarchy, transfer_words, words_for_bits
from .mlp_array import ArrayConfig
from .stats import ACTION_PHASE, RunStats, TraceRecord, new_phase_cycles

MODE_SWITCH_CYCLES = 1  # array-wide reconfiguration between mode passes


class AttnMode(Enum):
    MODE1 = 1  # score computation, attention-stationary
    MODE2 = 2  # value aggregation onto streaming X partials


@dataclass
class RPEState:
    """Registers of one reconfigurable PE: two 1-bit stream registers and two
    multi-bit accumulators (score, X partial)."""

    q_reg: int = 0
    kv_reg: int = 0
    a_reg: int = 0
    x_reg: int = 0


class RPEGrid:
    """Vectorized register state of the nq x nk R-PE grid."""

    def __init__(self, nq: int, nk: int):
        if nq < 1 or nk < 1:
            raise ValueError("grid dimensions must be >= 1")
        self.nq = nq
        self.nk = nk
        self.a = np.zeros((nq, nk), dtype=np.int64)
        self.mode: AttnMode | None = None

    def reset_scores(self):
        self.a[:] = 0


@dataclass(frozen=True)
class AttnStep:
    """One scheduled action over (head, timestep, key tile, query tile)."""

    action: str
    h: int
    t: int
    i: int
    j: int


@dataclass
class TileScheduleAttn:
    steps: list[AttnStep]
    tiles_nq: int
    tiles_nk: int
    nq_tile: int
    nk_tile: int


def mode_cycles(d: int, nq: int, nk: int) -> int:
    """Streaming cycles of one mode pass over a tile pair (fill, stream, drain)."""
    return d + nq + nk - 2


def schedule_attention(shape: HeadShape, array: ArrayConfig, nq_tile: int,
                       nk_tile: int, resident_x: bool = False) -> TileScheduleAttn:
    """Materialize the h -> t -> i -> j loop nest of the fused schedule.

    K/V tiles load once per (h, t, i); Q tiles and X partials load inside the
    j loop, so X partials are re-read from the X GLB for every key tile. Spike
    generation runs once per (h, t) after the key loop completes.

    With resident_x the partial integrations stay pinned in the local X buffer
    for the whole (h, t) pass: the per-tile load-x/extract-x round trips
    disappear and generation reads the partials locally instead of from the
    X GLB. Off by default; it constrains nq_rows * d_head * b_x to the local
    buffer capacity.
    """
    if not 1 <= nq_tile <= array.rows:
        raise ValueError(f"nq_tile must be in [1, {array.rows}], got {nq_tile}")
    if not 1 <= nk_tile <= array.cols:
        raise ValueError(f"nk_tile must be in [1, {array.cols}], got {nk_tile}")
    tiles_nq = math.ceil(shape.n_tokens / nq_tile)
    tiles_nk = math.ceil(shape.n_tokens / nk_tile)
    steps: list[AttnStep] = []
    for h in range(shape.heads):
        for t in range(shape.n_steps):
            for i in range(tiles_nk):
                steps.append(AttnStep("load-kv", h, t, i, -1))
                for j in range(tiles_nq):
                    steps.append(AttnStep("load-q", h, t, i, j))
                    steps.append(AttnStep("mode1-compute", h, t, i, j))
                    if not resident_x:
                        steps.append(AttnStep("load-x", h, t, i, j))
                    steps.append(AttnStep("mode2-compute", h, t, i, j))
                    if not resident_x:
                        steps.append(AttnStep("extract-x", h, t, i, j))
            steps.append(AttnStep("read-x-buf" if resident_x else "read-x-gen",
                                  h, t, -1, -1))
            steps.append(AttnStep("generate", h, t, -1, -1))
            steps.append(AttnStep("write-through", h, t, -1, -1))
    return TileScheduleAttn(steps, tiles_nq, tiles_nk, nq_tile, nk_tile)


def mode1_compute(q_tile: np.ndarray, k_tile: np.ndarray, grid: RPEGrid,
                  quant: QuantSpec) -> int:
    """Accumulate binary scores a += q k^T into the stationary score registers.

    Score registers must be zeroed at tile-pair start. Returns streaming
    cycles; scores are range-checked against unsigned b_a.
    """
    nq, d = q_tile.shape
    nk = k_tile.shape[0]
    if (nq, nk) != (grid.nq, grid.nk):
        raise ValueError(f"tile shape ({nq}, {nk}) != grid ({grid.nq}, {grid.nk})")
    grid.a += q_tile.astype(np.int64) @ k_tile.astype(np.int64).T
    grid.a = check_range(grid.a, quant.b_a, quant, signed=False,
                         coords=lambda i: {"query": int(i[0]), "key": int(i[1])})
    grid.mode = AttnMode.MODE1
    return mode_cycles(d, nq, nk)


def mode2_compute(v_tile: np.ndarray, x_partial: np.ndarray, grid: RPEGrid,
                  quant: QuantSpec) -> tuple[np.ndarray, int]:
    """Accumulate stationary scores against value bits onto streaming X
    partials: x_out = x_partial + a v. Returns (x_out, streaming cycles);
    integrations are range-checked against signed b_x.
    """
    nk, d = v_tile.shape
    if nk != grid.nk:
        raise ValueError(f"value tile rows {nk} != grid key dim {grid.nk}")
    if x_partial.shape != (grid.nq, d):
        raise ValueError(f"x partial shape {x_partial.shape} != ({grid.nq}, {d})")
    x_out = x_partial.astype(np.int64) + grid.a @ v_tile.astype(np.int64)
    x_out = check_range(x_out, quant.b_x, quant, signed=True,
                        coords=lambda i: {"query": int(i[0]), "feature": int(i[1])})
    grid.mode = AttnMode.MODE2
    return x_out, mode_cycles(d, grid.nq, grid.nk)


def run_attention_layer(q: SpikeTensor, k: SpikeTensor, v: SpikeTensor,
                        shape: HeadShape, params: NeuronParams, quant: QuantSpec,
                        array: ArrayConfig, nq_tile: int, nk_tile: int,
                        mem: MemoryHierarchy | None = None, *,
                        prefetch: bool = False,
                        resident_x: bool = False) -> tuple[SpikeTensor, RunStats]:
    """Execute one spiking attention layer with the fused two-mode schedule.

    Bit-identical to golden_attention_layer. Each mode pass is charged one
    array-wide mode-switch cycle on top of its streaming cycles; X extraction
    and the generation read charge one cycle per word moved. Word counts use
    nominal tile-sized bursts. resident_x keeps the partial integrations in
    the local X buffer for each (h, t) pass, eliminating X GLB traffic.
    """
    for name, ten in (("q", q), ("k", k), ("v", v)):
        if ten.shape != (shape.n_tokens, shape.n_steps, shape.model_dim):
            raise ValueError(
                f"{name} shape {ten.shape} != expected "
                f"{(shape.n_tokens, shape.n_steps, shape.model_dim)}")
    mem = mem or MemoryHierarchy.for_attention()
    n, t_steps, dim = q.shape
    d = shape.d_head
    schedule = schedule_attention(shape, array, nq_tile, nk_tile, resident_x)
    tiles_nq, tiles_nk = schedule.tiles_nq, schedule.tiles_nk
    nq_rows = tiles_nq * nq_tile  # nominal padded token rows

    in_spec = mem["act_glb0"].spec
    out_spec = mem["act_glb1"].spec
    x_spec = mem["x_glb"].spec
    q_spec = mem["q_buf"].spec
    kv_spec = mem["kv_buf"].spec
    xb_spec = mem["x_buf"].spec

    # static regions: q, k, v tensors; X partials for one (h, t); output spikes
    mem["act_glb0"].reserve_region(
        3 * words_for_bits(n * t_steps * dim, in_spec.word_bits))
    if not resident_x:
        mem["x_glb"].reserve_region(
            words_for_bits(nq_rows * d * quant.b_x, x_spec.word_bits))
    mem["act_glb1"].reserve_region(
        words_for_bits(n * t_steps * dim, out_spec.word_bits))
    x_tile_bits = nq_tile * d * quant.b_x if not resident_x else 0
    for buf, bits in (("q_buf", nq_tile * d), ("kv_buf", 2 * nk_tile * d),
                      ("x_buf", x_tile_bits)):
        words = words_for_bits(bits, mem[buf].spec.word_bits)
        if words > mem[buf].spec.depth_words:
            from .errors import CapacityError
            raise CapacityError(buf, words, mem[buf].spec.depth_words)
    if resident_x:
        # all query-row partials of one (h, t) must sit in the local buffer
        mem["x_buf"].reserve_region(
            words_for_bits(nq_rows * d * quant.b_x, xb_spec.word_bits))

    def pad_tokens(bits_2d: np.ndarray, start: int, count: int) -> np.ndarray:
        tile = np.zeros((count, d), dtype=np.uint8)
        stop = min(start + count, n)
        if start < n:
            tile[:stop - start] = bits_2d[start:stop]
        return tile

    s_out = np.zeros((n, t_steps, dim), dtype=np.uint8)
    membranes = np.zeros((n, dim), dtype=np.int64)
    phase_cycles = new_phase_cycles()
    records: list[TraceRecord] = []
    active_slots = 0
    total_slots = 0
    peak_attention = 0
    seen_compute = False
    grid = RPEGrid(nq_tile, nk_tile)
    x_partials = np.zeros((nq_rows, d), dtype=np.int64)
    current_ht = None
    k_tile = v_tile = None

    def emit(step: AttnStep, cycles: int, buffer: str = "", words: int = 0):
        phase_cycles[ACTION_PHASE[step.action]] += cycles
        records.append(TraceRecord(len(records), step.action, step.h, step.t,
                                   step.i, step.j, cycles, buffer, words))

    for step in schedule.steps:
        h, t, i, j = step.h, step.t, step.i, step.j
        sl = slice(h * d, (h + 1) * d)
        if current_ht != (h, t):
            current_ht = (h, t)
            x_partials = np.zeros((nq_rows, d), dtype=np.int64)
        if step.action == "load-kv":
            words = transfer_words(2 * nk_tile * d, in_spec, kv_spec)
            mem.transfer("act_glb0", "kv_buf", words)
            k_tile = pad_tokens(k.bits[:, t, sl], i * nk_tile, nk_tile)
            v_tile = pad_tokens(v.bits[:, t, sl], i * nk_tile, nk_tile)
            emit(step, 0 if (prefetch and seen_compute) else words,
                 "act_glb0", words)
        elif step.action == "load-q":
            words = transfer_words(nq_tile * d, in_spec, q_spec)
            mem.transfer("act_glb0", "q_buf", words)
            emit(step, 0 if (prefetch and seen_compute) else words,
                 "act_glb0", words)
        elif step.action == "mode1-compute":
            q_tile = pad_tokens(q.bits[:, t, sl], j * nq_tile, nq_tile)
            grid.reset_scores()
            cycles = mode1_compute(q_tile, k_tile, grid, quant)
            seen_compute = True
            peak_attention = max(peak_attention, grid.nq * grid.nk)
            nq_real = max(0, min(nq_tile, n - j * nq_tile))
            nk_real = max(0, min(nk_tile, n - i * nk_tile))
            active_slots += nq_real * nk_real * d
            total_slots += nq_tile * nk_tile * d
            emit(step, MODE_SWITCH_CYCLES + cycles)
        elif step.action == "load-x":
            words = transfer_words(nq_tile * d * quant.b_x, x_spec, xb_spec)
            mem.transfer("x_glb", "x_buf", words)
            emit(step, 0 if (prefetch and seen_compute) else words,
                 "x_glb", words)
        elif step.action == "mode2-compute":
            rows = slice(j * nq_tile, (j + 1) * nq_tile)
            x_out, cycles = mode2_compute(v_tile, x_partials[rows], grid, quant)
            x_partials[rows] = x_out
            nq_real = max(0, min(nq_tile, n - j * nq_tile))
            nk_real = max(0, min(nk_tile, n - i * nk_tile))
            active_slots += nq_real * nk_real * d
            total_slots += nq_tile * nk_tile * d
            emit(step, MODE_SWITCH_CYCLES + cycles)
        elif step.action == "extract-x":
            words = transfer_words(nq_tile * d * quant.b_x, xb_spec, x_spec)
            mem.transfer("x_buf", "x_glb", words)
            emit(step, words, "x_glb", words)
        elif step.action == "read-x-gen":
            bits = nq_rows * d * quant.b_x
            words = mem.read_bits("x_glb", bits)
            emit(step, words, "x_glb", words)
        elif step.action == "read-x-buf":
            bits = nq_rows * d * quant.b_x
            words = mem.read_bits("x_buf", bits)
            emit(step, words, "x_buf", words)
        elif step.action == "generate":
            v_new, spikes = lif_step(
                membranes[:, sl], x_partials[:n], params, quant,
                coords=lambda idx, h=h, t=t: {"head": h, "timestep": t,
                                              "token": int(idx[0]),
                                              "feature": int(idx[1])})
            membranes[:, sl] = v_new
            s_out[:, t, sl] = spikes
            emit(step, tiles_nq)
        elif step.action == "write-through":
            bits = nq_rows * d
            words = mem.write_bits("act_glb1", bits)
            emit(step, 0, "act_glb1", words)
        else:  # pragma: no cover
            raise AssertionError(f"unknown schedule action {step.action}")

    stats = RunStats(workload="attention", phase_cycles=phase_cycles,
                     counters=mem.counters, active_slots=active_slots,
                     total_slots=total_slots,
                     peak_attention_values=peak_attention, records=records)
    return SpikeTensor(s_out), stats
