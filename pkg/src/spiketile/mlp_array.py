"""Tiled systolic execution of spiking linear layers.

The array is H_arr x W_arr: rows carry output features, columns carry (token,
timestep) pairs packed timestep-major within each token. Weights propagate
left to right, spike bits top to bottom, and each PE accumulates its weight
into a local register only when the resident spike bit is 1. The tile loop
nest is output-feature tile, then token tile, then timestep tile, then input-
feature chunk; weight chunks are loaded only when the residency check misses.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .golden import (NeuronParams, QuantSpec, SpikeTensor, WeightMatrix,
                     check_range, lif_step)
from .memory import MemoryHierarchy, transfer_words, words_for_bits
from .stats import ACTION_PHASE, RunStats, TraceRecord, new_phase_cycles

PARALLEL_3D = "parallel-3d"
SERIAL_2D = "serial-2d"


@dataclass(frozen=True)
class ArrayConfig:
    """Systolic array geometry and the synaptic-integration extraction style.

    parallel-3d extracts a whole tile in one cycle through vertical readout
    ports; serial-2d shifts one column per cycle and costs cols cycles.
    """

    rows: int
    cols: int
    extraction_mode: str = PARALLEL_3D
    extraction_cycles_override: int | None = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array rows and cols must be >= 1")
        if self.extraction_mode not in (PARALLEL_3D, SERIAL_2D):
            raise ValueError(
                f"extraction_mode must be '{PARALLEL_3D}' or '{SERIAL_2D}'")
        if self.extraction_mode == PARALLEL_3D and self.extraction_cycles_override not in (None, 1):
            raise ValueError("parallel-3d extraction is fixed at 1 cycle per tile")
        if self.extraction_cycles_override is not None and self.extraction_cycles_override < 1:
            raise ValueError("extraction cycles must be >= 1")

    @property
    def extraction_cycles_per_batch(self) -> int:
        if self.extraction_mode == PARALLEL_3D:
            return 1
        return self.extraction_cycles_override or self.cols


@dataclass
class PEState:
    """Registers of one synaptic-integration-stationary PE."""

    spike_reg: int = 0
    weight_reg: int = 0
    x_reg: int = 0


@dataclass(frozen=True)
class MlpStep:
    """One scheduled action over (of, n, t, if) tile indices."""

    action: str
    of: int
    n: int
    t: int
    if_idx: int


@dataclass
class TileScheduleMLP:
    """Materialized loop nest plus the tiling derived from dims and array."""

    steps: list[MlpStep]
    tiles_of: int
    tiles_n: int
    tiles_t: int
    tiles_if: int
    n_tile: int
    t_tile: int
    if_chunks: list[tuple[int, int]]  # (start feature, chunk size)
    w_buffer_chunks: int


def tile_compute_cycles(if_total: int, rows: int, cols: int) -> int:
    """Streaming cycles for one (of, n, t) tile: fill, stream, drain."""
    return if_total + rows + cols - 2


def _nt_split(n_tokens: int, n_steps: int, cols: int) -> tuple[int, int]:
    """Column packing: timestep-major within a token, tokens fill the rest."""
    t_tile = min(n_steps, cols)
    n_tile = max(1, cols // t_tile)
    return n_tile, t_tile


def schedule_mlp(dims: tuple[int, int, int, int], array: ArrayConfig,
                 if_tile: int, w_buffer_chunks: int | None = None) -> TileScheduleMLP:
    """Materialize the of -> n -> t -> if loop nest.

    A load-w step appears only when the (of, if) chunk is not resident in the
    weight buffer; w_buffer_chunks bounds residency (None keeps a full of-row).
    Every (of, n, t) tile ends with one extract, generate, write-through
    sequence.
    """
    n_tokens, n_steps, d_in, d_out = dims
    if min(dims) < 1:
        raise ValueError(f"dims must all be >= 1, got {dims}")
    if if_tile < 1:
        raise ValueError(f"if_tile must be >= 1, got {if_tile}")
    n_tile, t_tile = _nt_split(n_tokens, n_steps, array.cols)
    tiles_n = math.ceil(n_tokens / n_tile)
    tiles_t = math.ceil(n_steps / t_tile)
    tiles_of = math.ceil(d_out / array.rows)
    chunks = [(s, min(if_tile, d_in - s)) for s in range(0, d_in, if_tile)]
    capacity = len(chunks) if w_buffer_chunks is None else w_buffer_chunks
    if capacity < 1:
        raise ValueError("w_buffer_chunks must be >= 1")
    resident: OrderedDict[tuple[int, int], None] = OrderedDict()
    steps: list[MlpStep] = []
    for of in range(tiles_of):
        for ni in range(tiles_n):
            for ti in range(tiles_t):
                for ci in range(len(chunks)):
                    key = (of, ci)
                    if key in resident:
                        resident.move_to_end(key)
                    else:
                        while len(resident) >= capacity:
                            resident.popitem(last=False)
                        resident[key] = None
                        steps.append(MlpStep("load-w", of, ni, ti, ci))
                    steps.append(MlpStep("load-s", of, ni, ti, ci))
                    steps.append(MlpStep("compute", of, ni, ti, ci))
                steps.append(MlpStep("extract", of, ni, ti, -1))
                steps.append(MlpStep("generate", of, ni, ti, -1))
                steps.append(MlpStep("write-through", of, ni, ti, -1))
    return TileScheduleMLP(steps, tiles_of, tiles_n, tiles_t, len(chunks),
                           n_tile, t_tile, chunks, capacity)


def stream_mlp_tile(s_tile: np.ndarray, w_tile: np.ndarray, x_regs: np.ndarray,
                    *, last_chunk: bool, array: ArrayConfig) -> int:
    """Stream one input-feature chunk through the grid, accumulating into the
    per-PE x registers. Returns the cycles charged for the chunk; the final
    chunk of a tile carries the rows + cols - 2 pipeline fill/drain skew so a
    tile totals tile_compute_cycles(IF_total, rows, cols).
    """
    if x_regs.shape != (array.rows, array.cols):
        raise ValueError(f"x register grid must be {array.rows}x{array.cols}")
    chunk = w_tile.shape[1]
    if s_tile.shape != (array.cols, chunk):
        raise ValueError(
            f"spike tile shape {s_tile.shape} != ({array.cols}, {chunk})")
    x_regs += w_tile.astype(np.int64) @ s_tile.astype(np.int64).T
    cycles = chunk
    if last_chunk:
        cycles += array.rows + array.cols - 2
    return cycles


class SpikeGeneratorBank:
    """Threshold units fed by the array readout for one (of-row, token window).

    Membranes persist across the timestep tiles of the window and are applied
    in ascending timestep order per token.
    """

    def __init__(self, n_tokens: int, n_rows: int, params: NeuronParams,
                 quant: QuantSpec):
        self.v = np.zeros((n_tokens, n_rows), dtype=np.int64)
        self.params = params
        self.quant = quant
        self.n_rows = n_rows

    def update_column(self, tok_local: int, x_col: np.ndarray, *,
                      token: int, timestep: int) -> np.ndarray:
        v_new, spikes = lif_step(
            self.v[tok_local], x_col, self.params, self.quant,
            coords=lambda i: {"token": token, "timestep": timestep,
                              "neuron": int(i[0])})
        self.v[tok_local] = v_new
        return spikes


def extract_and_generate(x_results: np.ndarray, bank: SpikeGeneratorBank,
                         col_map: list[tuple[int, int, int, int]],
                         array: ArrayConfig) -> tuple[np.ndarray, int]:
    """Apply the LIF update to every live column of a tile's x results.

    col_map lists (column, local token, token, timestep) for non-padded
    columns in ascending timestep order per token. Returns the H x W spike
    grid (padded lanes stay 0) and the extraction cycle cost for the tile.
    """
    spikes = np.zeros(x_results.shape, dtype=np.uint8)
    rows = bank.n_rows
    for col, tok_local, token, timestep in col_map:
        spikes[:rows, col] = bank.update_column(
            tok_local, x_results[:rows, col], token=token, timestep=timestep)
    return spikes, array.extraction_cycles_per_batch


def _w_chunk_bits(rows: int, chunk: int, b_w: int) -> int:
    return rows * chunk * b_w


def run_mlp_layer(s_in: SpikeTensor, w: WeightMatrix, params: NeuronParams,
                  quant: QuantSpec, array: ArrayConfig, if_tile: int,
                  mem: MemoryHierarchy | None = None, *,
                  w_buffer_chunks: int | None = None,
                  prefetch: bool = False,
                  _in_glb: str = "act_glb0", _out_glb: str = "act_glb1",
                  ) -> tuple[SpikeTensor, RunStats]:
    """Execute one spiking linear layer on the tiled systolic array.

    Bit-identical to golden_mlp_layer. Cycle accounting is phase-additive:
    loads cost one cycle per word (all hidden after the first compute when
    prefetch is set), compute follows tile_compute_cycles, extraction follows
    the array's extraction mode, and generation costs one trailing cycle per
    tile. Word counts use nominal tile-sized bursts.
    """
    if s_in.n_features != w.d_in:
        raise ValueError(f"input features {s_in.n_features} != weight rows {w.d_in}")
    if w.bitwidth != quant.b_w:
        raise ValueError(f"weight bitwidth {w.bitwidth} != quant b_w {quant.b_w}")
    mem = mem or MemoryHierarchy.for_mlp()
    n_tokens, n_steps, d_in = s_in.shape
    d_out = w.d_out
    rows, cols = array.rows, array.cols

    w_glb, w_buf = mem["w_glb"].spec, mem["w_buf"].spec
    in_spec, s_spec = mem[_in_glb].spec, mem["s_buf"].spec
    out_spec = mem[_out_glb].spec

    full_chunk_words = transfer_words(_w_chunk_bits(rows, if_tile, quant.b_w),
                                      w_glb, w_buf)
    if w_buffer_chunks is None:
        auto = mem["w_buf"].spec.depth_words // max(1, full_chunk_words)
        if auto < 1:
            raise CapacityError("w_buf", full_chunk_words, w_buf.depth_words)
        eff_chunks = min(auto, math.ceil(d_in / if_tile))
    else:
        if w_buffer_chunks * full_chunk_words > w_buf.depth_words:
            raise CapacityError("w_buf", w_buffer_chunks * full_chunk_words,
                                w_buf.depth_words)
        eff_chunks = w_buffer_chunks
    mem["w_buf"].max_chunks = eff_chunks

    schedule = schedule_mlp((n_tokens, n_steps, d_in, d_out), array, if_tile,
                            w_buffer_chunks=eff_chunks)

    # static regions: whole tensors live in the GLBs for the run
    mem[_in_glb].reserve_region(words_for_bits(n_tokens * n_steps * d_in,
                                               in_spec.word_bits))
    mem["w_glb"].reserve_region(words_for_bits(d_in * d_out * quant.b_w,
                                               w_glb.word_bits))
    mem[_out_glb].reserve_region(words_for_bits(n_tokens * n_steps * d_out,
                                                out_spec.word_bits))

    bits = s_in.bits
    weights = w.values
    s_out = np.zeros((n_tokens, n_steps, d_out), dtype=np.uint8)
    phase_cycles = new_phase_cycles()
    records: list[TraceRecord] = []
    active_slots = 0
    total_slots = 0
    seen_compute = False

    n_tile, t_tile = schedule.n_tile, schedule.t_tile
    x_regs = np.zeros((rows, cols), dtype=np.int64)
    bank: SpikeGeneratorBank | None = None
    bank_window = None

    def emit(action: str, step: MlpStep, cycles: int, buffer: str = "", words: int = 0):
        phase_cycles[ACTION_PHASE[action]] += cycles
        records.append(TraceRecord(len(records), action, step.of, step.n,
                                   step.t, step.if_idx, cycles, buffer, words))

    def col_entries(ni: int, ti: int):
        """(column, local token, token, timestep) for live columns, in
        timestep-major order per token."""
        entries = []
        for tok_local in range(n_tile):
            token = ni * n_tile + tok_local
            if token >= n_tokens:
                continue
            for ts_local in range(t_tile):
                timestep = ti * t_tile + ts_local
                if timestep >= n_steps:
                    continue
                entries.append((tok_local * t_tile + ts_local, tok_local,
                                token, timestep))
        return entries

    for step in schedule.steps:
        of, ni, ti, ci = step.of, step.n, step.t, step.if_idx
        if step.action == "load-w":
            start, size = schedule.if_chunks[ci]
            words = transfer_words(_w_chunk_bits(rows, size, quant.b_w),
                                   w_glb, w_buf)
            mem.transfer("w_glb", "w_buf", words, chunk_key=(of, ci))
            cycles = 0 if (prefetch and seen_compute) else words
            emit("load-w", step, cycles, "w_glb", words)
        elif step.action == "load-s":
            start, size = schedule.if_chunks[ci]
            words = transfer_words(cols * size, in_spec, s_spec)
            mem.transfer(_in_glb, "s_buf", words)
            cycles = 0 if (prefetch and seen_compute) else words
            emit("load-s", step, cycles, _in_glb, words)
        elif step.action == "compute":
            if ci == 0:
                x_regs = np.zeros((rows, cols), dtype=np.int64)
            start, size = schedule.if_chunks[ci]
            rows_used = min(rows, d_out - of * rows)
            entries = col_entries(ni, ti)
            s_tile = np.zeros((cols, size), dtype=np.uint8)
            for col, _, token, timestep in entries:
                s_tile[col] = bits[token, timestep, start:start + size]
            w_tile = np.zeros((rows, size), dtype=np.int64)
            w_tile[:rows_used] = weights[start:start + size,
                                         of * rows:of * rows + rows_used].T
            cycles = stream_mlp_tile(s_tile, w_tile, x_regs,
                                     last_chunk=(ci == schedule.tiles_if - 1),
                                     array=array)
            seen_compute = True
            active_slots += rows_used * len(entries) * size
            total_slots += rows * cols * size
            emit("compute", step, cycles)
        elif step.action == "extract":
            rows_used = min(rows, d_out - of * rows)
            if bank_window != (of, ni):
                bank = SpikeGeneratorBank(n_tile, rows_used, params, quant)
                bank_window = (of, ni)
            check_range(x_regs[:rows_used], quant.b_x, quant, signed=True,
                        coords=lambda i: {"of_tile": of, "row": int(i[0]),
                                          "column": int(i[1])})
            entries = col_entries(ni, ti)
            spikes, cycles = extract_and_generate(x_regs, bank, entries, array)
            for col, _, token, timestep in entries:
                s_out[token, timestep, of * rows:of * rows + rows_used] = \
                    spikes[:rows_used, col]
            emit("extract", step, cycles)
        elif step.action == "generate":
            emit("generate", step, 1)
        elif step.action == "write-through":
            words = words_for_bits(rows * cols, out_spec.word_bits)
            mem.write_bits(_out_glb, rows * cols)
            emit("write-through", step, 0, _out_glb, words)
        else:  # pragma: no cover
            raise AssertionError(f"unknown schedule action {step.action}")

    stats = RunStats(workload="mlp", phase_cycles=phase_cycles,
                     counters=mem.counters, active_slots=active_slots,
                     total_slots=total_slots, records=records)
    return SpikeTensor(s_out), stats


def run_mlp_chain(s_in: SpikeTensor, layers: list[WeightMatrix],
                  params: NeuronParams, quant: QuantSpec, array: ArrayConfig,
                  if_tile: int, mem: MemoryHierarchy | None = None, *,
                  w_buffer_chunks: int | None = None, prefetch: bool = False,
                  ) -> tuple[SpikeTensor, list[RunStats]]:
    """Run consecutive linear layers, ping-ponging the activation GLBs so each
    layer reads the buffer its predecessor wrote."""
    mem = mem or MemoryHierarchy.for_mlp()
    cur = s_in
    parts: list[RunStats] = []
    for idx, w in enumerate(layers):
        src = "act_glb0" if idx % 2 == 0 else "act_glb1"
        dst = "act_glb1" if idx % 2 == 0 else "act_glb0"
        cur, st = run_mlp_layer(cur, w, params, quant, array, if_tile, mem,
                                w_buffer_chunks=w_buffer_chunks,
                                prefetch=prefetch, _in_glb=src, _out_glb=dst)
        parts.append(st)
    return cur, parts
