"""Bit-exact reference model for spiking MLP and spiking self-attention layers.

All arithmetic is integer: spikes are {0,1}, weights are signed fixed-point
integers, and membrane potentials are carried across timesteps. Per timestep a
neuron adds its synaptic integration, subtracts the leak, and fires on a
strictly-greater threshold comparison, resetting its membrane to zero. The
values produced here define what every dataflow simulation must reproduce
bit-for-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BitwidthError

STRICT = "strict"
SATURATE = "saturate"

_OVERFLOW_MODES = (STRICT, SATURATE)


def signed_range(bits: int) -> tuple[int, int]:
    """Representable range of a two's-complement integer of the given width."""
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


def unsigned_max(bits: int) -> int:
    return (1 << bits) - 1


@dataclass(frozen=True)
class QuantSpec:
    """Fixed-point widths for weights (b_w), synaptic integration and membrane
    potentials (b_x, signed), and attention scores (b_a, unsigned)."""

    b_w: int = 8
    b_x: int = 16
    b_a: int = 5
    overflow_mode: str = STRICT

    def __post_init__(self):
        if not 2 <= self.b_w <= 16:
            raise ValueError(f"b_w must be in [2, 16], got {self.b_w}")
        if self.b_a < 1:
            raise ValueError(f"b_a must be >= 1, got {self.b_a}")
        if not self.b_a <= self.b_x <= 48:
            raise ValueError(f"b_x must satisfy b_a <= b_x <= 48, got {self.b_x}")
        if self.overflow_mode not in _OVERFLOW_MODES:
            raise ValueError(f"overflow_mode must be one of {_OVERFLOW_MODES}")

    @property
    def strict(self) -> bool:
        return self.overflow_mode == STRICT


@dataclass(frozen=True)
class NeuronParams:
    """Threshold and leak of the LIF update; v_leak = 0 degenerates to IF."""

    v_th: int
    v_leak: int = 0

    def __post_init__(self):
        if int(self.v_th) <= 0:
            raise ValueError(f"v_th must be a positive integer, got {self.v_th}")


@dataclass(frozen=True)
class HeadShape:
    """Dimensions of one attention layer: N tokens, T timesteps, H heads of
    d features each. Head h owns the contiguous feature block [h*d, (h+1)*d)."""

    n_tokens: int
    n_steps: int
    heads: int
    d_head: int

    def __post_init__(self):
        for name in ("n_tokens", "n_steps", "heads", "d_head"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def model_dim(self) -> int:
        return self.heads * self.d_head

    @classmethod
    def from_model_dim(cls, n_tokens: int, n_steps: int, heads: int, model_dim: int) -> "HeadShape":
        if model_dim % heads != 0:
            raise ValueError(f"model_dim {model_dim} not divisible by heads {heads}")
        return cls(n_tokens, n_steps, heads, model_dim // heads)


@dataclass(frozen=True)
class BitwidthReq:
    """Accumulator widths sufficient for worst-case binary attention inputs.

    conservative is set when d or N was rounded up to a power of two.
    """

    b_a: int
    b_x: int
    conservative: bool


class SpikeTensor:
    """Dense binary activations indexed (token, timestep, feature)."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        arr = np.asarray(bits)
        if arr.ndim != 3:
            raise ValueError(f"spike tensor must be 3-d (token, timestep, feature), got shape {arr.shape}")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("spike tensor entries must be 0 or 1")
        if min(arr.shape) < 1:
            raise ValueError(f"spike tensor dimensions must all be >= 1, got {arr.shape}")
        self.bits = arr.astype(np.uint8)

    @property
    def n_tokens(self) -> int:
        return self.bits.shape[0]

    @property
    def n_steps(self) -> int:
        return self.bits.shape[1]

    @property
    def n_features(self) -> int:
        return self.bits.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.bits.shape

    @classmethod
    def zeros(cls, n_tokens: int, n_steps: int, n_features: int) -> "SpikeTensor":
        return cls(np.zeros((n_tokens, n_steps, n_features), dtype=np.uint8))

    @classmethod
    def bernoulli(cls, rng: np.random.Generator, n_tokens: int, n_steps: int,
                  n_features: int, rate: float = 0.5) -> "SpikeTensor":
        bits = (rng.random((n_tokens, n_steps, n_features)) < rate).astype(np.uint8)
        return cls(bits)

    def equals(self, other: "SpikeTensor") -> bool:
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    def __repr__(self) -> str:
        return f"SpikeTensor(n={self.n_tokens}, t={self.n_steps}, d={self.n_features})"


class WeightMatrix:
    """Signed integer weights, laid out (input feature, output feature)."""

    __slots__ = ("values", "bitwidth")

    def __init__(self, values, bitwidth: int):
        if not 2 <= int(bitwidth) <= 16:
            raise ValueError(f"weight bitwidth must be in [2, 16], got {bitwidth}")
        arr = np.asarray(values)
        if arr.ndim != 2:
            raise ValueError(f"weight matrix must be 2-d, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("weights must be integers")
        lo, hi = signed_range(int(bitwidth))
        if arr.size and (arr.min() < lo or arr.max() > hi):
            raise ValueError(f"weights out of {bitwidth}-bit signed range [{lo}, {hi}]")
        self.values = arr.astype(np.int64)
        self.bitwidth = int(bitwidth)

    @property
    def d_in(self) -> int:
        return self.values.shape[0]

    @property
    def d_out(self) -> int:
        return self.values.shape[1]

    @classmethod
    def random(cls, rng: np.random.Generator, d_in: int, d_out: int, bitwidth: int) -> "WeightMatrix":
        lo, hi = signed_range(bitwidth)
        return cls(rng.integers(lo, hi + 1, size=(d_in, d_out), dtype=np.int64), bitwidth)


class MembraneBank:
    """Membrane potentials for a (token, neuron) block, signed b_x values.

    A neuron that fired holds potential 0 entering the next timestep.
    """

    __slots__ = ("potentials",)

    def __init__(self, n_tokens: int, n_neurons: int):
        self.potentials = np.zeros((n_tokens, n_neurons), dtype=np.int64)

    @property
    def shape(self) -> tuple[int, int]:
        return self.potentials.shape


def _first_bad_coords(bad: np.ndarray) -> tuple[int, ...]:
    return tuple(int(axis[0]) for axis in np.nonzero(bad))


def check_range(values: np.ndarray, bits: int, quant: QuantSpec, *, signed: bool,
                coords=None) -> np.ndarray:
    """Enforce a fixed-point range: raise in strict mode, clip in saturate mode.

    coords maps the index tuple of the first violation to an error-context dict.
    """
    if signed:
        lo, hi = signed_range(bits)
    else:
        lo, hi = 0, unsigned_max(bits)
    bad = (values < lo) | (values > hi)
    if not bad.any():
        return values
    if not quant.strict:
        return np.clip(values, lo, hi)
    idx = _first_bad_coords(bad)
    where = coords(idx) if coords else {}
    raise BitwidthError(int(values[idx]), bits, signed=signed, where=where)


def lif_update(v_prev: int, syn_input: int, params: NeuronParams,
               quant: QuantSpec, *, where: dict | None = None) -> tuple[int, int]:
    """One-neuron, one-timestep LIF update.

    Returns (v_new, spike). The candidate potential is v_prev + syn_input -
    v_leak; a spike fires only when it is strictly greater than v_th, and a
    firing neuron resets to 0. The candidate must fit in b_x signed bits.
    """
    cand = int(v_prev) + int(syn_input) - params.v_leak
    lo, hi = signed_range(quant.b_x)
    if cand < lo or cand > hi:
        if quant.strict:
            raise BitwidthError(cand, quant.b_x, signed=True, where=where)
        cand = min(max(cand, lo), hi)
    if cand > params.v_th:
        return 0, 1
    return cand, 0


def lif_step(v_prev: np.ndarray, syn: np.ndarray, params: NeuronParams,
             quant: QuantSpec, coords=None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized lif_update over an array of neurons sharing params."""
    cand = v_prev.astype(np.int64) + syn.astype(np.int64) - params.v_leak
    cand = check_range(cand, quant.b_x, quant, signed=True, coords=coords)
    spikes = (cand > params.v_th).astype(np.uint8)
    v_new = np.where(spikes == 1, 0, cand)
    return v_new, spikes


def golden_mlp_layer(s_in: SpikeTensor, w: WeightMatrix, params: NeuronParams,
                     quant: QuantSpec) -> tuple[SpikeTensor, np.ndarray]:
    """Reference spiking linear layer.

    Per (token, timestep): X = W^T s, then the LIF update against the membrane
    carried from the previous timestep. Returns (s_out, trace) where trace holds
    the post-update membrane of every (token, timestep, neuron).
    """
    if s_in.n_features != w.d_in:
        raise ValueError(f"input features {s_in.n_features} != weight rows {w.d_in}")
    n, t_steps, _ = s_in.shape
    x_all = s_in.bits.astype(np.int64) @ w.values  # (n, t, d_out)
    check_range(x_all, quant.b_x, quant,
                signed=True,
                coords=lambda i: {"token": i[0], "timestep": i[1], "neuron": i[2]})
    v = np.zeros((n, w.d_out), dtype=np.int64)
    out = np.zeros((n, t_steps, w.d_out), dtype=np.uint8)
    trace = np.zeros((n, t_steps, w.d_out), dtype=np.int64)
    for t in range(t_steps):
        v, spikes = lif_step(
            v, x_all[:, t, :], params, quant,
            coords=lambda i, t=t: {"token": i[0], "timestep": t, "neuron": i[1]})
        out[:, t, :] = spikes
        trace[:, t, :] = v
    return SpikeTensor(out), trace


def _as_binary_2d(arr, name: str) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {a.shape}")
    if a.size and not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} entries must be 0 or 1")
    return a.astype(np.int64)


def golden_attention_scores(q, k) -> np.ndarray:
    """Binary attention scores for one head and timestep: a = q k^T.

    With {0,1} operands each entry is a popcount of ANDed feature bits, so
    a[i][j] lies in [0, d]. Width checks are the caller's responsibility.
    """
    qa = _as_binary_2d(q, "q")
    ka = _as_binary_2d(k, "k")
    if qa.shape[1] != ka.shape[1]:
        raise ValueError(f"q and k feature dims differ: {qa.shape[1]} vs {ka.shape[1]}")
    return qa @ ka.T


def golden_attention_weighted(a, v, quant: QuantSpec | None = None) -> np.ndarray:
    """Score-weighted value aggregation for one head and timestep: x = a v.

    Entries lie in [0, N*d]; checked against signed b_x when quant is given.
    """
    av = np.asarray(a).astype(np.int64)
    va = _as_binary_2d(v, "v")
    if av.ndim != 2:
        raise ValueError(f"a must be 2-d, got shape {av.shape}")
    if av.size and av.min() < 0:
        raise ValueError("attention scores must be non-negative")
    if av.shape[1] != va.shape[0]:
        raise ValueError(f"a columns {av.shape[1]} != v rows {va.shape[0]}")
    x = av @ va
    if quant is not None:
        x = check_range(x, quant.b_x, quant, signed=True,
                        coords=lambda i: {"token": i[0], "feature": i[1]})
    return x


def golden_attention_layer(q: SpikeTensor, k: SpikeTensor, v: SpikeTensor,
                           shape: HeadShape, params: NeuronParams, quant: QuantSpec,
                           *, return_trace: bool = False):
    """Reference softmax-free spiking attention layer.

    Per head and timestep: a = q k^T over that head's feature block, x = a v,
    then the LIF update with membranes carried across timesteps per (token,
    feature). Scores are checked against b_a, integrations against b_x.
    """
    for name, ten in (("q", q), ("k", k), ("v", v)):
        if ten.shape != (shape.n_tokens, shape.n_steps, shape.model_dim):
            raise ValueError(
                f"{name} shape {ten.shape} != expected "
                f"{(shape.n_tokens, shape.n_steps, shape.model_dim)}")
    n, t_steps, dim = q.shape
    d = shape.d_head
    out = np.zeros((n, t_steps, dim), dtype=np.uint8)
    trace = np.zeros((n, t_steps, dim), dtype=np.int64)
    membranes = np.zeros((n, dim), dtype=np.int64)
    for h in range(shape.heads):
        sl = slice(h * d, (h + 1) * d)
        for t in range(t_steps):
            a = golden_attention_scores(q.bits[:, t, sl], k.bits[:, t, sl])
            check_range(a, quant.b_a, quant, signed=False,
                        coords=lambda i, h=h, t=t: {"head": h, "timestep": t,
                                                    "query": i[0], "key": i[1]})
            x = golden_attention_weighted(a, v.bits[:, t, sl])
            x = check_range(x, quant.b_x, quant, signed=True,
                            coords=lambda i, h=h, t=t: {"head": h, "timestep": t,
                                                        "token": i[0], "feature": i[1]})
            v_new, spikes = lif_step(
                membranes[:, sl], x, params, quant,
                coords=lambda i, h=h, t=t: {"head": h, "timestep": t,
                                            "token": i[0], "feature": i[1]})
            membranes[:, sl] = v_new
            out[:, t, sl] = spikes
            trace[:, t, sl] = v_new
    s_out = SpikeTensor(out)
    if return_trace:
        return s_out, trace
    return s_out


def _ceil_log2(x: int) -> tuple[int, bool]:
    """Ceiling of log2 plus a flag for non-power-of-two inputs."""
    if x < 1:
        raise ValueError(f"expected positive dimension, got {x}")
    exact = x & (x - 1) == 0
    return (x - 1).bit_length(), not exact


def bitwidth_requirements(shape: HeadShape) -> BitwidthReq:
    """Accumulator widths that cover worst-case all-ones attention inputs.

    b_a = log2(d) + 1 covers scores up to d; b_x = log2(d) + log2(N) + 2 covers
    integrations up to N*d in a signed register. Non-power-of-two dimensions
    round the log up and mark the result conservative.
    """
    log_d, odd_d = _ceil_log2(shape.d_head)
    log_n, odd_n = _ceil_log2(shape.n_tokens)
    return BitwidthReq(b_a=log_d + 1, b_x=log_d + log_n + 2, conservative=odd_d or odd_n)
