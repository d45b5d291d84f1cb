"""Command-line entry point.

Subcommands: run (simulate one config and emit report files), verify
(randomized systolic-vs-golden trials), compare (2d vs 3d cost deltas),
sweep (rerun a config over a list of parameter values), and trace-replay
(rebuild a report from a step trace without re-simulating).

Exit codes: 0 success; 1 verification or run failure (output mismatch,
strict-mode overflow, capacity violation); 2 configuration error; 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import configparser
import io
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .attn_array import run_attention_layer
from .config import (WorkloadConfig, load_config, parse_config,
                     synthesize_attention_inputs, synthesize_mlp_inputs)
from .errors import (BitwidthError, CapacityError, ConfigError,
                     SpiketileError, UnknownPresetError, VerificationError)
from .figures import (save_comparison_figure, save_phase_figure,
                      save_sweep_figure)
from .golden import (HeadShape, NeuronParams, QuantSpec, SpikeTensor,
                     WeightMatrix, bitwidth_requirements,
                     golden_attention_layer, golden_mlp_layer)
from .mlp_array import ArrayConfig, run_mlp_chain, run_mlp_layer
from .presets import lookup_preset
from .report import Report, aggregate, compare
from .spikeio import read_spikes, write_spikes
from .stats import RunStats, merge_stats
from .trace import read_trace, replay_stats, write_trace

_REPORT_KV = "report.kv"
_REPORT_TXT = "report.txt"
_PHASES_CSV = "phases.csv"
_PHASES_PNG = "phases.png"
_TRACE_CSV = "trace.csv"
_OUTPUT_SPK = "output.spk"


def _apply_overrides(cfg: WorkloadConfig, args) -> WorkloadConfig:
    if getattr(args, "design", None):
        cfg = cfg.with_design(args.design)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    overflow = getattr(args, "overflow", None)
    if overflow:
        cfg = replace(cfg, quant=replace(cfg.quant, overflow_mode=overflow))
    if getattr(args, "prefetch", False):
        cfg = replace(cfg, prefetch=True)
    return cfg


def _mlp_inputs(cfg: WorkloadConfig):
    if cfg.input_path:
        spikes = read_spikes(cfg.input_path)
        want = (cfg.tokens, cfg.timesteps, cfg.d_in)
        if spikes.shape != want:
            raise ConfigError(f"input tensor {cfg.input_path} has shape "
                              f"{spikes.shape}, config wants {want}")
        rng = np.random.default_rng(cfg.seed)
        weights = [WeightMatrix.random(rng, cfg.d_in, cfg.d_out, cfg.quant.b_w)
                   for _ in range(cfg.layers)]
        return spikes, weights
    return synthesize_mlp_inputs(cfg)


def _attention_inputs(cfg: WorkloadConfig):
    paths = (cfg.input_q_path, cfg.input_k_path, cfg.input_v_path)
    given = [p for p in paths if p]
    if given and len(given) != 3:
        raise ConfigError("attention inputs need all of input_q, input_k, "
                          "input_v (or none for synthetic spikes)")
    if not given:
        return synthesize_attention_inputs(cfg)
    want = (cfg.tokens, cfg.timesteps, cfg.heads * cfg.d_head)
    loaded = []
    for path in paths:
        ten = read_spikes(path)
        if ten.shape != want:
            raise ConfigError(f"input tensor {path} has shape {ten.shape}, "
                              f"config wants {want}")
        loaded.append(ten)
    return tuple(loaded)


def _execute(cfg: WorkloadConfig) -> tuple[SpikeTensor, RunStats]:
    """Simulate the configured workload on the systolic model."""
    array = cfg.array()
    if cfg.is_attention:
        q, k, v = _attention_inputs(cfg)
        return run_attention_layer(q, k, v, cfg.head_shape(), cfg.params,
                                   cfg.quant, array, cfg.nq_tile, cfg.nk_tile,
                                   prefetch=cfg.prefetch,
                                   resident_x=cfg.resident_x)
    spikes, weights = _mlp_inputs(cfg)
    if cfg.kind == "layer-chain":
        out, parts = run_mlp_chain(spikes, weights, cfg.params, cfg.quant,
                                   array, cfg.if_tile,
                                   w_buffer_chunks=cfg.w_buffer_chunks,
                                   prefetch=cfg.prefetch)
        return out, merge_stats(parts)
    return run_mlp_layer(spikes, weights[0], cfg.params, cfg.quant, array,
                         cfg.if_tile, w_buffer_chunks=cfg.w_buffer_chunks,
                         prefetch=cfg.prefetch)


def _golden_output(cfg: WorkloadConfig) -> SpikeTensor:
    if cfg.is_attention:
        q, k, v = _attention_inputs(cfg)
        return golden_attention_layer(q, k, v, cfg.head_shape(), cfg.params,
                                      cfg.quant)
    spikes, weights = _mlp_inputs(cfg)
    cur = spikes
    for w in weights:
        cur, _ = golden_mlp_layer(cur, w, cfg.params, cfg.quant)
    return cur


def _first_divergence(got: SpikeTensor, want: SpikeTensor) -> str:
    diff = np.argwhere(got.bits != want.bits)
    n, t, f = (int(x) for x in diff[0])
    return (f"first divergence at (token={n}, timestep={t}, feature={f}): "
            f"systolic={int(got.bits[n, t, f])} golden={int(want.bits[n, t, f])}")


def _cfg_preset(cfg: WorkloadConfig, design: str | None = None):
    return lookup_preset(design or cfg.design, cfg.kind, cfg.array_key,
                         cfg.bitwidth_key)


def _run_meta(cfg: WorkloadConfig) -> dict[str, str]:
    return {
        "kind": cfg.kind,
        "design": cfg.design,
        "array": cfg.array_key,
        "bitwidths": cfg.bitwidth_key or "-",
        "seed": str(cfg.seed),
    }


def _report_extras(meta: dict[str, str]) -> dict[str, str]:
    return {k: meta[k] for k in ("kind", "seed") if k in meta}


def _load_energy_table(path) -> dict[str, float]:
    table: dict[str, float] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read energy table {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, value = line.partition("=")
        if not sep:
            raise ConfigError("expected buffer=picojoules",
                              location=f"{path}:{lineno}")
        try:
            table[name.strip()] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad energy value {value!r}",
                              location=f"{path}:{lineno}") from exc
    return table


def _write_report_files(out_dir: Path, report: Report, *,
                        figures: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / _REPORT_KV).write_text(report.to_kv(), encoding="utf-8")
    (out_dir / _REPORT_TXT).write_text(report.to_text(), encoding="utf-8")
    (out_dir / _PHASES_CSV).write_text(report.phases_csv(), encoding="utf-8")
    if figures:
        save_phase_figure(report, out_dir / _PHASES_PNG)


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    preset = _cfg_preset(cfg)
    out, stats = _execute(cfg)
    if args.verify:
        golden = _golden_output(cfg)
        if not out.equals(golden):
            print(f"FAILED: {_first_divergence(out, golden)}")
            return 1
        print("VERIFIED: systolic == golden")
    meta = _run_meta(cfg)
    energy = _load_energy_table(args.energy_table) if args.energy_table else None
    report = aggregate(stats, preset, extras=_report_extras(meta),
                       energy_per_access_pj=energy)
    out_dir = Path(args.out)
    _write_report_files(out_dir, report, figures=not args.no_figures)
    write_spikes(out_dir / _OUTPUT_SPK, out)
    if args.trace:
        write_trace(out_dir / _TRACE_CSV, stats, meta)
    print(report.to_text(), end="")
    return 0


def _random_mlp_trial(rng: np.random.Generator):
    n = int(rng.integers(1, 5))
    t = int(rng.integers(1, 5))
    d_in = int(rng.integers(1, 17))
    d_out = int(rng.integers(1, 17))
    b_w = int(rng.choice((4, 8)))
    quant = QuantSpec(b_w=b_w, b_x=20, b_a=1)
    params = NeuronParams(v_th=int(rng.integers(1, 9)),
                          v_leak=int(rng.integers(0, 2)))
    array = ArrayConfig(rows=int(rng.integers(1, 7)),
                        cols=int(rng.integers(1, 7)))
    if_tile = int(rng.integers(1, d_in + 1))
    spikes = SpikeTensor.bernoulli(rng, n, t, d_in)
    w = WeightMatrix.random(rng, d_in, d_out, b_w)
    got, _ = run_mlp_layer(spikes, w, params, quant, array, if_tile)
    want, _ = golden_mlp_layer(spikes, w, params, quant)
    desc = f"mlp n={n} t={t} d_in={d_in} d_out={d_out} b_w={b_w}"
    return got, want, desc


def _random_attention_trial(rng: np.random.Generator):
    n = int(rng.integers(1, 9))
    t = int(rng.integers(1, 3))
    heads = int(rng.integers(1, 3))
    d = int(rng.integers(1, 9))
    shape = HeadShape(n, t, heads, d)
    req = bitwidth_requirements(shape)
    quant = QuantSpec(b_w=8, b_x=req.b_x, b_a=req.b_a)
    params = NeuronParams(v_th=int(rng.integers(1, 9)),
                          v_leak=int(rng.integers(0, 2)))
    nq_tile = int(rng.integers(1, n + 1))
    nk_tile = int(rng.integers(1, n + 1))
    array = ArrayConfig(rows=nq_tile, cols=nk_tile)
    dim = heads * d
    q = SpikeTensor.bernoulli(rng, n, t, dim)
    k = SpikeTensor.bernoulli(rng, n, t, dim)
    v = SpikeTensor.bernoulli(rng, n, t, dim)
    got, _ = run_attention_layer(q, k, v, shape, params, quant, array,
                                 nq_tile, nk_tile)
    want = golden_attention_layer(q, k, v, shape, params, quant)
    desc = f"attention n={n} t={t} heads={heads} d={d}"
    return got, want, desc


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    seed = args.seed if args.seed is not None else cfg.seed
    rng = np.random.default_rng(seed)
    trial = (_random_attention_trial if cfg.is_attention
             else _random_mlp_trial)
    passed = 0
    failure = None
    for i in range(args.trials):
        got, want, desc = trial(rng)
        if args.inject_bitflip and i == 0:
            flipped = got.bits.copy()
            flipped[0, 0, 0] ^= 1
            got = SpikeTensor(flipped)
        if got.equals(want):
            passed += 1
            print(f"trial {i:03d}: ok ({desc})")
        else:
            print(f"trial {i:03d}: FAIL ({desc}); {_first_divergence(got, want)}")
            if failure is None:
                failure = i
    print(f"{passed}/{args.trials} trials matched")
    return 0 if failure is None else 1


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    reports: dict[str, Report] = {}
    for design in ("2d", "3d"):
        run_cfg = cfg.with_design(design)
        preset = _cfg_preset(run_cfg)
        _, stats = _execute(run_cfg)
        reports[design] = aggregate(stats, preset,
                                    extras=_report_extras(_run_meta(run_cfg)))
    comparison = compare(reports["2d"], reports["3d"])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report_2d.kv").write_text(reports["2d"].to_kv(),
                                          encoding="utf-8")
    (out_dir / "report_3d.kv").write_text(reports["3d"].to_kv(),
                                          encoding="utf-8")
    (out_dir / "comparison.kv").write_text(comparison.to_kv(),
                                           encoding="utf-8")
    (out_dir / "comparison.txt").write_text(comparison.to_text(),
                                            encoding="utf-8")
    if not args.no_figures:
        save_comparison_figure(comparison, out_dir / "comparison.png")
    print(comparison.to_text(), end="")
    return 0


_SWEEP_COLUMNS = ("cycles_total", "wall_time_ns", "utilization",
                  "compute_utilization", "transfer_events", "transfer_words",
                  "mem_latency_ns")


def _sweep_configs(args) -> list[tuple[str, WorkloadConfig]]:
    section, _, key = args.param.partition(".")
    if not section or not key:
        raise ConfigError("--param must look like section.key, "
                          f"got {args.param!r}")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values lists no values")
    base = configparser.ConfigParser(interpolation=None)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            base.read_file(fh, source=str(args.config))
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if not base.has_section(section):
        base.add_section(section)
    out = []
    for value in values:
        base.set(section, key, value)
        buf = io.StringIO()
        base.write(buf)
        cfg = parse_config(buf.getvalue(),
                           source=f"{args.config}[{args.param}={value}]")
        out.append((value, _apply_overrides(cfg, args)))
    return out


def cmd_sweep(args) -> int:
    runs = _sweep_configs(args)
    presets = {value: _cfg_preset(cfg) for value, cfg in runs}

    def one(pair):
        value, cfg = pair
        _, stats = _execute(cfg)
        return value, aggregate(stats, presets[value],
                                extras=_report_extras(_run_meta(cfg)))

    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(one, runs))
    else:
        results = [one(pair) for pair in runs]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["param,value,design," + ",".join(_SWEEP_COLUMNS)]
    for value, report in results:
        fields = {k: v for k, v in report.items()}
        row = [args.param, value, report.design]
        row += [format(fields[c], ".6g") if isinstance(fields[c], float)
                else str(fields[c]) for c in _SWEEP_COLUMNS]
        lines.append(",".join(row))
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n",
                                       encoding="utf-8")
    for line in lines:
        print(line)
    if not args.no_figures:
        try:
            xs = [float(value) for value, _ in results]
        except ValueError:
            xs = list(range(len(results)))
        series = {
            "cycles_total": [float(r.total_cycles) for _, r in results],
            "wall_time_ns": [r.wall_time_ns for _, r in results],
        }
        save_sweep_figure(xs, series, args.param, out_dir / "sweep.png",
                          title=f"sweep over {args.param}")
    return 0


def cmd_trace_replay(args) -> int:
    records, meta = read_trace(args.trace)
    stats = replay_stats(records, meta)
    for key in ("design", "array", "bitwidths"):
        if key not in meta:
            raise ConfigError(f"trace meta lacks {key!r}; cannot pick a preset")
    preset = lookup_preset(meta["design"], stats.workload, meta["array"],
                           meta["bitwidths"])
    report = aggregate(stats, preset, extras=_report_extras(meta))
    out_dir = Path(args.out)
    _write_report_files(out_dir, report, figures=not args.no_figures)
    print(report.to_text(), end="")
    return 0


def _add_common(p: argparse.ArgumentParser, *, design: bool = True) -> None:
    p.add_argument("--config", required=True, help="workload config file")
    if design:
        p.add_argument("--design", choices=("2d", "3d"),
                       help="override the config's design style")
    p.add_argument("--seed", type=int, help="override the config's seed")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--strict", dest="overflow", action="store_const",
                     const="strict", help="fail on accumulator overflow")
    grp.add_argument("--saturate", dest="overflow", action="store_const",
                     const="saturate", help="clamp accumulator overflow")
    p.add_argument("--prefetch", action="store_true",
                   help="hide steady-state load latency behind compute")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spiketile",
        description="Cycle-level simulator for tiled spiking MLP and "
                    "attention workloads with 2d/3d cost reporting.")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate one config and write reports")
    _add_common(run_p)
    run_p.add_argument("--out", default=".", help="output directory")
    run_p.add_argument("--trace", action="store_true",
                       help="also write the step trace")
    run_p.add_argument("--verify", action="store_true",
                       help="check the systolic output against the golden model")
    run_p.add_argument("--no-figures", action="store_true")
    run_p.add_argument("--energy-table",
                       help="buffer=pJ file enabling energy totals")
    run_p.set_defaults(func=cmd_run)

    ver_p = sub.add_parser("verify",
                           help="randomized systolic-vs-golden trials")
    ver_p.add_argument("--config", required=True)
    ver_p.add_argument("--trials", type=int, default=100)
    ver_p.add_argument("--seed", type=int, default=None)
    ver_p.add_argument("--inject-bitflip", action="store_true",
                       help="corrupt one output bit to prove the checker fires")
    ver_p.set_defaults(func=cmd_verify)

    cmp_p = sub.add_parser("compare", help="2d-vs-3d cost deltas for a config")
    cmp_p.add_argument("--config", required=True)
    cmp_p.add_argument("--out", default=".")
    cmp_p.add_argument("--no-figures", action="store_true")
    cmp_p.set_defaults(func=cmd_compare)

    sweep_p = sub.add_parser("sweep",
                             help="rerun a config over parameter values")
    _add_common(sweep_p)
    sweep_p.add_argument("--param", required=True,
                         help="config key to vary, as section.key")
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated values for --param")
    sweep_p.add_argument("--out", default=".")
    sweep_p.add_argument("--jobs", type=int, default=1,
                         help="concurrent simulations")
    sweep_p.add_argument("--no-figures", action="store_true")
    sweep_p.set_defaults(func=cmd_sweep)

    replay_p = sub.add_parser("trace-replay",
                              help="rebuild a report from a step trace")
    replay_p.add_argument("--trace", required=True, help="trace file to replay")
    replay_p.add_argument("--out", default=".")
    replay_p.add_argument("--no-figures", action="store_true")
    replay_p.set_defaults(func=cmd_trace_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownPresetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (VerificationError, BitwidthError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SpiketileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - map anything else to exit 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
