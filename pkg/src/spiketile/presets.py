"""Post-layout cost presets keyed by workload, design style, and array size.

Presets are measurement metadata: per-access memory latencies, average powers,
frequency, and area. They scale report figures but never change simulated
counts. The table ships as a plain-text file; SPIKETILE_PRESETS overrides its
path.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources

from .errors import ConfigError, UnknownPresetError

ENV_PRESET_PATH = "SPIKETILE_PRESETS"

# buffers with dedicated latency/power rows in the mlp presets
PER_BUFFER_METRICS = ("act_glb", "w_glb", "act_buf", "w_buf")

_SCALAR_METRICS = (
    "effective_freq_ghz", "area_w_mm", "area_h_mm", "num_cells", "wire_length_m",
    "internal_power_mw", "switching_power_mw", "leakage_power_mw", "total_power_mw",
    "mem_access_latency_ps", "mem_access_power_mw",
)


@dataclass(frozen=True)
class CostPreset:
    """One column of the cost tables; read-only once loaded."""

    workload: str
    design: str
    array: str
    bitwidths: str
    effective_freq_ghz: float
    area_w_mm: float
    area_h_mm: float
    num_cells: int
    wire_length_m: float
    internal_power_mw: float
    switching_power_mw: float
    leakage_power_mw: float
    total_power_mw: float
    mem_access_latency_ps: float
    mem_access_power_mw: float
    buffer_latency_ps: dict = field(default_factory=dict)
    buffer_power_mw: dict = field(default_factory=dict)

    @property
    def area_mm2(self) -> float:
        return self.area_w_mm * self.area_h_mm

    @property
    def key(self) -> str:
        return preset_key(self.workload, self.design, self.array, self.bitwidths)


def preset_key(workload: str, design: str, array: str, bitwidths: str) -> str:
    return f"{workload}|{design}|{array}|{bitwidths}"


def normalize_array(array) -> str:
    if isinstance(array, str):
        return array.lower().replace(" ", "")
    h, w = array
    return f"{int(h)}x{int(w)}"


def normalize_bitwidths(bitwidths) -> str:
    if bitwidths is None:
        return "-"
    if isinstance(bitwidths, str):
        return bitwidths.replace("b", "").replace(" ", "")
    b_w, b_x = bitwidths
    return f"{int(b_w)}/{int(b_x)}"


def preset_data_path() -> str:
    override = os.environ.get(ENV_PRESET_PATH)
    if override:
        return override
    return str(resources.files("spiketile").joinpath("data/cost_presets.txt"))


def load_preset_table(path: str | None = None) -> dict[str, dict[str, float]]:
    """Parse the preset file into {key: {metric: value}}."""
    path = path or preset_data_path()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read preset data file {path}: {exc}") from exc
    table: dict[str, dict[str, float]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ConfigError(
                f"expected 6 fields, got {len(parts)}",
                location=f"{path}:{lineno}")
        workload, design, array, bitwidths, metric, value = parts
        key = preset_key(workload, design, array, bitwidths)
        try:
            table.setdefault(key, {})[metric] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad numeric value {value!r}",
                              location=f"{path}:{lineno}") from exc
    return table


def available_presets(path: str | None = None) -> list[str]:
    return sorted(load_preset_table(path))


def lookup_preset(design: str, workload: str, array, bitwidths=None,
                  path: str | None = None) -> CostPreset:
    """Fetch the preset for a (design, workload, array, bitwidths) key.

    The mlp presets are additionally keyed by weight/integration bitwidths;
    attention presets are not. Unknown keys list every available preset.
    """
    workload = workload.lower()
    if workload == "layer-chain":
        workload = "mlp"
    design = design.lower()
    array_s = normalize_array(array)
    bits_s = normalize_bitwidths(bitwidths) if workload == "mlp" else "-"
    key = preset_key(workload, design, array_s, bits_s)
    table = load_preset_table(path)
    if key not in table:
        raise UnknownPresetError(key, sorted(table))
    metrics = table[key]
    missing = [m for m in _SCALAR_METRICS if m not in metrics]
    if missing:
        raise ConfigError(f"preset {key} missing metrics: {missing}")
    buffer_latency = {}
    buffer_power = {}
    for buf in PER_BUFFER_METRICS:
        if f"{buf}_lat_ps" in metrics:
            buffer_latency[buf] = metrics[f"{buf}_lat_ps"]
        if f"{buf}_pow_mw" in metrics:
            buffer_power[buf] = metrics[f"{buf}_pow_mw"]
    return CostPreset(
        workload=workload,
        design=design,
        array=array_s,
        bitwidths=bits_s,
        effective_freq_ghz=metrics["effective_freq_ghz"],
        area_w_mm=metrics["area_w_mm"],
        area_h_mm=metrics["area_h_mm"],
        num_cells=int(metrics["num_cells"]),
        wire_length_m=metrics["wire_length_m"],
        internal_power_mw=metrics["internal_power_mw"],
        switching_power_mw=metrics["switching_power_mw"],
        leakage_power_mw=metrics["leakage_power_mw"],
        total_power_mw=metrics["total_power_mw"],
        mem_access_latency_ps=metrics["mem_access_latency_ps"],
        mem_access_power_mw=metrics["mem_access_power_mw"],
        buffer_latency_ps=buffer_latency,
        buffer_power_mw=buffer_power,
    )
