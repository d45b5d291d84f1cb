"""Workload configuration files: INI sections describing one simulation run.

A config names the workload kind, tensor dims, neuron and quantization
parameters, array geometry, tile sizes, and input generation. Parsing then
re-serializing a config yields a semantically identical canonical form.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .golden import (HeadShape, NeuronParams, QuantSpec, SpikeTensor,
                     WeightMatrix, bitwidth_requirements)
from .mlp_array import PARALLEL_3D, SERIAL_2D, ArrayConfig

KINDS = ("mlp", "attention", "layer-chain")
DESIGNS = ("2d", "3d")

# extraction mode implied by each design style, unless overridden
DESIGN_EXTRACTION = {"3d": PARALLEL_3D, "2d": SERIAL_2D}

_SECTIONS = {
    "workload": ("kind", "design"),
    "dims": ("tokens", "timesteps", "d_in", "d_out", "layers", "heads",
             "d_head"),
    "neuron": ("v_th", "v_leak"),
    "quant": ("b_w", "b_x", "b_a", "overflow"),
    "array": ("rows", "cols", "extraction"),
    "tiles": ("if_tile", "nq_tile", "nk_tile", "w_buffer_chunks"),
    "run": ("seed", "rate", "input", "input_q", "input_k", "input_v",
            "prefetch", "resident_x"),
}


@dataclass(frozen=True)
class WorkloadConfig:
    """Validated contents of one config file."""

    kind: str
    design: str
    tokens: int
    timesteps: int
    d_in: int
    d_out: int
    layers: int
    heads: int
    d_head: int
    params: NeuronParams
    quant: QuantSpec
    rows: int
    cols: int
    extraction: str
    if_tile: int
    nq_tile: int
    nk_tile: int
    w_buffer_chunks: int | None
    seed: int
    rate: float
    input_path: str | None
    input_q_path: str | None
    input_k_path: str | None
    input_v_path: str | None
    prefetch: bool
    resident_x: bool

    @property
    def is_attention(self) -> bool:
        return self.kind == "attention"

    @property
    def array_key(self) -> str:
        return f"{self.rows}x{self.cols}"

    @property
    def bitwidth_key(self) -> str | None:
        if self.is_attention:
            return None
        return f"{self.quant.b_w}/{self.quant.b_x}"

    def array(self) -> ArrayConfig:
        return ArrayConfig(rows=self.rows, cols=self.cols,
                           extraction_mode=self.extraction)

    def head_shape(self) -> HeadShape:
        return HeadShape(n_tokens=self.tokens, n_steps=self.timesteps,
                         heads=self.heads, d_head=self.d_head)

    def with_design(self, design: str) -> "WorkloadConfig":
        """Copy with another design style, re-deriving the extraction mode."""
        if design not in DESIGNS:
            raise ConfigError(f"unknown design {design!r}",
                              location="workload.design")
        return replace(self, design=design,
                       extraction=DESIGN_EXTRACTION[design])

    def to_text(self) -> str:
        """Canonical serialized form listing every field."""
        cp = configparser.ConfigParser(interpolation=None)
        cp["workload"] = {"kind": self.kind, "design": self.design}
        dims = {"tokens": str(self.tokens), "timesteps": str(self.timesteps)}
        if self.is_attention:
            dims["heads"] = str(self.heads)
            dims["d_head"] = str(self.d_head)
        else:
            dims["d_in"] = str(self.d_in)
            dims["d_out"] = str(self.d_out)
            if self.kind == "layer-chain":
                dims["layers"] = str(self.layers)
        cp["dims"] = dims
        cp["neuron"] = {"v_th": str(self.params.v_th),
                        "v_leak": str(self.params.v_leak)}
        cp["quant"] = {"b_w": str(self.quant.b_w), "b_x": str(self.quant.b_x),
                       "b_a": str(self.quant.b_a),
                       "overflow": self.quant.overflow_mode}
        cp["array"] = {"rows": str(self.rows), "cols": str(self.cols),
                       "extraction": self.extraction}
        tiles = ({"nq_tile": str(self.nq_tile), "nk_tile": str(self.nk_tile)}
                 if self.is_attention else {"if_tile": str(self.if_tile)})
        if self.w_buffer_chunks is not None:
            tiles["w_buffer_chunks"] = str(self.w_buffer_chunks)
        cp["tiles"] = tiles
        run = {"seed": str(self.seed), "rate": str(self.rate),
               "prefetch": "true" if self.prefetch else "false"}
        if self.is_attention:
            run["resident_x"] = "true" if self.resident_x else "false"
        if self.input_path:
            run["input"] = self.input_path
        for key, value in (("input_q", self.input_q_path),
                           ("input_k", self.input_k_path),
                           ("input_v", self.input_v_path)):
            if value:
                run[key] = value
        cp["run"] = run
        out = io.StringIO()
        cp.write(out)
        return out.getvalue()


def _positive(value: int, location: str) -> int:
    if value < 1:
        raise ConfigError("must be a positive integer", location=location)
    return value


class _Section:
    """Typed reads with section.key locations on every diagnostic."""

    def __init__(self, cp: configparser.ConfigParser, name: str):
        self.name = name
        self.cp = cp

    def _raw(self, key: str) -> str | None:
        if not self.cp.has_option(self.name, key):
            return None
        value = self.cp.get(self.name, key).strip()
        return value or None

    def text(self, key: str, default: str | None = None,
             choices: tuple[str, ...] | None = None) -> str | None:
        value = self._raw(key)
        if value is None:
            return default
        if choices and value not in choices:
            raise ConfigError(f"expected one of {list(choices)}, got {value!r}",
                              location=f"{self.name}.{key}")
        return value

    def integer(self, key: str, default: int | None = None) -> int | None:
        value = self._raw(key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"expected an integer, got {value!r}",
                              location=f"{self.name}.{key}") from exc

    def number(self, key: str, default: float) -> float:
        value = self._raw(key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"expected a number, got {value!r}",
                              location=f"{self.name}.{key}") from exc

    def flag(self, key: str, default: bool) -> bool:
        value = self._raw(key)
        if value is None:
            return default
        lowered = value.lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}",
                          location=f"{self.name}.{key}")

    def require(self, key: str, value):
        if value is None:
            raise ConfigError("required key is missing",
                              location=f"{self.name}.{key}")
        return value


def parse_config(text: str, source: str = "<config>") -> WorkloadConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]",
                              location=f"{source}:[{section}]")
        for key in cp.options(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r}",
                                  location=f"{source}:[{section}]")
    if not cp.has_section("workload"):
        raise ConfigError("missing [workload] section", location=source)

    workload = _Section(cp, "workload")
    dims = _Section(cp, "dims")
    neuron = _Section(cp, "neuron")
    quant_s = _Section(cp, "quant")
    array_s = _Section(cp, "array")
    tiles = _Section(cp, "tiles")
    run = _Section(cp, "run")

    kind = workload.require("kind", workload.text("kind", choices=KINDS))
    design = workload.text("design", default="3d", choices=DESIGNS)

    tokens = _positive(dims.require("tokens", dims.integer("tokens")),
                       "dims.tokens")
    timesteps = _positive(dims.require("timesteps", dims.integer("timesteps")),
                          "dims.timesteps")
    if kind == "attention":
        heads = _positive(dims.require("heads", dims.integer("heads")),
                          "dims.heads")
        d_head = _positive(dims.require("d_head", dims.integer("d_head")),
                           "dims.d_head")
        d_in = d_out = heads * d_head
        layers = 1
    else:
        d_in = _positive(dims.require("d_in", dims.integer("d_in")),
                         "dims.d_in")
        d_out = _positive(dims.require("d_out", dims.integer("d_out")),
                          "dims.d_out")
        heads = d_head = 1
        layers = _positive(dims.integer("layers", 2 if kind == "layer-chain" else 1),
                           "dims.layers")
        if kind == "layer-chain" and layers > 1 and d_in != d_out:
            raise ConfigError("chained layers need d_in == d_out",
                              location="dims.layers")

    v_th = _positive(neuron.require("v_th", neuron.integer("v_th")),
                     "neuron.v_th")
    v_leak = neuron.integer("v_leak", 0)
    try:
        params = NeuronParams(v_th=v_th, v_leak=v_leak)
    except ValueError as exc:
        raise ConfigError(str(exc), location="neuron") from exc

    overflow = quant_s.text("overflow", default="strict",
                            choices=("strict", "saturate"))
    if kind == "attention":
        derived = bitwidth_requirements(
            HeadShape(tokens, timesteps, heads, d_head))
        b_a = quant_s.integer("b_a", derived.b_a)
        b_x = quant_s.integer("b_x", derived.b_x)
        b_w = quant_s.integer("b_w", 8)
    else:
        b_w = quant_s.integer("b_w", 8)
        b_x = quant_s.integer("b_x", 16)
        b_a = quant_s.integer("b_a", 1)
    try:
        quant = QuantSpec(b_w=b_w, b_x=b_x, b_a=b_a, overflow_mode=overflow)
    except ValueError as exc:
        raise ConfigError(str(exc), location="quant") from exc

    rows = _positive(array_s.require("rows", array_s.integer("rows")),
                     "array.rows")
    cols = _positive(array_s.require("cols", array_s.integer("cols")),
                     "array.cols")
    extraction = array_s.text("extraction", default=DESIGN_EXTRACTION[design],
                              choices=(PARALLEL_3D, SERIAL_2D))

    if_tile = _positive(tiles.integer("if_tile", min(d_in, 16)),
                        "tiles.if_tile")
    nq_tile = _positive(tiles.integer("nq_tile", min(tokens, rows)),
                        "tiles.nq_tile")
    nk_tile = _positive(tiles.integer("nk_tile", min(tokens, cols)),
                        "tiles.nk_tile")
    w_buffer_chunks = tiles.integer("w_buffer_chunks", None)
    if w_buffer_chunks is not None:
        _positive(w_buffer_chunks, "tiles.w_buffer_chunks")

    seed = run.integer("seed", 0)
    rate = run.number("rate", 0.5)
    if not 0.0 <= rate <= 1.0:
        raise ConfigError("spike rate must lie in [0, 1]", location="run.rate")
    prefetch = run.flag("prefetch", False)
    resident_x = run.flag("resident_x", False)
    if resident_x and kind != "attention":
        raise ConfigError("resident_x applies only to attention workloads",
                          location="run.resident_x")

    cfg = WorkloadConfig(
        kind=kind, design=design, tokens=tokens, timesteps=timesteps,
        d_in=d_in, d_out=d_out, layers=layers, heads=heads, d_head=d_head,
        params=params, quant=quant, rows=rows, cols=cols,
        extraction=extraction, if_tile=if_tile, nq_tile=nq_tile,
        nk_tile=nk_tile, w_buffer_chunks=w_buffer_chunks, seed=seed,
        rate=rate, input_path=run.text("input"),
        input_q_path=run.text("input_q"), input_k_path=run.text("input_k"),
        input_v_path=run.text("input_v"), prefetch=prefetch,
        resident_x=resident_x)

    if cfg.is_attention:
        if nq_tile > rows:
            raise ConfigError(f"nq_tile {nq_tile} exceeds array rows {rows}",
                              location="tiles.nq_tile")
        if nk_tile > cols:
            raise ConfigError(f"nk_tile {nk_tile} exceeds array cols {cols}",
                              location="tiles.nk_tile")
    elif if_tile > d_in:
        raise ConfigError(f"if_tile {if_tile} exceeds d_in {d_in}",
                          location="tiles.if_tile")
    return cfg


def load_config(path) -> WorkloadConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def synthesize_mlp_inputs(cfg: WorkloadConfig
                          ) -> tuple[SpikeTensor, list[WeightMatrix]]:
    """Seeded Bernoulli spikes and uniform random weights for mlp kinds."""
    rng = np.random.default_rng(cfg.seed)
    spikes = SpikeTensor.bernoulli(rng, cfg.tokens, cfg.timesteps, cfg.d_in,
                                   rate=cfg.rate)
    weights = [WeightMatrix.random(rng, cfg.d_in, cfg.d_out, cfg.quant.b_w)
               for _ in range(cfg.layers)]
    return spikes, weights


def synthesize_attention_inputs(cfg: WorkloadConfig
                                ) -> tuple[SpikeTensor, SpikeTensor, SpikeTensor]:
    """Seeded Bernoulli Q/K/V spike tensors over the full model dim."""
    rng = np.random.default_rng(cfg.seed)
    dim = cfg.heads * cfg.d_head
    make = lambda: SpikeTensor.bernoulli(rng, cfg.tokens, cfg.timesteps, dim,
                                         rate=cfg.rate)
    return make(), make(), make()
