"""Cycle-level simulator for tiled spiking MLP and attention accelerators.

The golden module is the bit-exact functional reference; the array modules
execute the same workloads through tiled systolic schedules while counting
cycles and buffer traffic; presets and report turn those counts into 2d/3d
cost figures.
"""
from __future__ import annotations

from .attn_array import (AttnStep, RPEGrid, TileScheduleAttn, mode1_compute,
                         mode2_compute, mode_cycles, run_attention_layer,
                         schedule_attention)
from .config import (WorkloadConfig, load_config, parse_config,
                     synthesize_attention_inputs, synthesize_mlp_inputs)
from .errors import (BitwidthError, CapacityError, ConfigError,
                     SpiketileError, UnknownPresetError, VerificationError)
from .event_sim import event_mlp_tile, event_mode1_tile, event_mode2_tile
from .golden import (SATURATE, STRICT, BitwidthReq, HeadShape, MembraneBank,
                     NeuronParams, QuantSpec, SpikeTensor, WeightMatrix,
                     bitwidth_requirements, golden_attention_layer,
                     golden_attention_scores, golden_attention_weighted,
                     golden_mlp_layer, lif_step, lif_update)
from .memory import (AccessCounters, Buffer, BufferSpec, MemoryHierarchy,
                     transfer_words, words_for_bits)
from .mlp_array import (PARALLEL_3D, SERIAL_2D, ArrayConfig, MlpStep,
                        TileScheduleMLP, run_mlp_chain, run_mlp_layer,
                        schedule_mlp, stream_mlp_tile, tile_compute_cycles)
from .presets import CostPreset, available_presets, lookup_preset
from .report import Comparison, Report, aggregate, compare
from .spikeio import read_spikes, write_spikes
from .stats import PHASES, RunStats, TraceRecord, merge_stats
from .trace import format_trace, parse_trace, read_trace, replay_stats, write_trace

__version__ = "0.1.0"

__all__ = [
    "AccessCounters", "ArrayConfig", "AttnStep", "BitwidthError",
    "BitwidthReq", "Buffer", "BufferSpec", "CapacityError", "Comparison",
    "ConfigError", "CostPreset", "HeadShape", "MembraneBank",
    "MemoryHierarchy", "MlpStep", "NeuronParams", "PARALLEL_3D", "PHASES",
    "QuantSpec", "RPEGrid", "Report", "RunStats", "SATURATE", "SERIAL_2D",
    "STRICT", "SpikeTensor", "SpiketileError", "TileScheduleAttn",
    "TileScheduleMLP", "TraceRecord", "UnknownPresetError",
    "VerificationError", "WeightMatrix", "WorkloadConfig", "aggregate",
    "available_presets", "bitwidth_requirements", "compare",
    "event_mlp_tile", "event_mode1_tile", "event_mode2_tile", "format_trace",
    "golden_attention_layer", "golden_attention_scores",
    "golden_attention_weighted", "golden_mlp_layer", "lif_step", "lif_update",
    "load_config", "lookup_preset", "merge_stats", "mode1_compute",
    "mode2_compute", "mode_cycles", "parse_config", "parse_trace",
    "read_spikes", "read_trace", "replay_stats", "run_attention_layer",
    "run_mlp_chain", "run_mlp_layer", "schedule_attention", "schedule_mlp",
    "stream_mlp_tile", "synthesize_attention_inputs", "synthesize_mlp_inputs",
    "tile_compute_cycles", "transfer_words", "words_for_bits", "write_spikes",
    "write_trace",
]
