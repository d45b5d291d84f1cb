"""Reference-model behavior pinned against hand-computed values and the
independent brute-force oracles in reference.py."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spiketile import (
    BitwidthError,
    HeadShape,
    NeuronParams,
    QuantSpec,
    SpikeTensor,
    WeightMatrix,
    bitwidth_requirements,
    golden_attention_layer,
    golden_attention_scores,
    golden_attention_weighted,
    golden_mlp_layer,
    lif_update,
)
from spiketile.golden import SATURATE, signed_range

import reference

Q16 = QuantSpec(b_w=8, b_x=16, b_a=5)


# ---------------------------------------------------------------- lif update

def test_lif_holds_at_threshold():
    # candidate 2 + 3 - 1 = 4 equals v_th: strictly-greater rule, no spike
    v, s = lif_update(2, 3, NeuronParams(v_th=4, v_leak=1), Q16)
    assert (v, s) == (4, 0)


def test_lif_fires_and_resets():
    # candidate 4 + 2 - 1 = 5 > 4
    v, s = lif_update(4, 2, NeuronParams(v_th=4, v_leak=1), Q16)
    assert (v, s) == (0, 1)


def test_lif_idle_neuron_stays_zero():
    v, s = lif_update(0, 0, NeuronParams(v_th=1), Q16)
    assert (v, s) == (0, 0)


def test_lif_leak_can_drive_membrane_negative():
    v, s = lif_update(0, 0, NeuronParams(v_th=4, v_leak=3), Q16)
    assert (v, s) == (-3, 0)


def test_lif_strict_overflow_raises():
    quant = QuantSpec(b_x=4, b_a=1)
    with pytest.raises(BitwidthError):
        lif_update(7, 1, NeuronParams(v_th=100), quant)


def test_lif_saturate_clamps():
    quant = QuantSpec(b_x=4, b_a=1, overflow_mode=SATURATE)
    v, s = lif_update(7, 1, NeuronParams(v_th=100), quant)
    assert (v, s) == (7, 0)  # clamped to the 4-bit signed max


# ---------------------------------------------------------------- mlp layer

def test_mlp_layer_two_timesteps_hand_example():
    # W = [[1], [2]]; t0 spikes [1,1] -> x=3 > 2 fires; t1 [1,0] -> x=1 holds
    s_in = SpikeTensor(np.array([[[1, 1], [1, 0]]], dtype=np.uint8))
    w = WeightMatrix(np.array([[1], [2]]), 8)
    out, trace = golden_mlp_layer(s_in, w, NeuronParams(v_th=2), Q16)
    assert out.bits.tolist() == [[[1], [0]]]
    assert trace.tolist() == [[[0], [1]]]


def test_mlp_membrane_carries_across_timesteps():
    # sub-threshold x=1 per step accumulates: fires on the third step (3 > 2)
    s_in = SpikeTensor(np.ones((1, 4, 1), dtype=np.uint8))
    w = WeightMatrix(np.array([[1]]), 8)
    out, trace = golden_mlp_layer(s_in, w, NeuronParams(v_th=2), Q16)
    assert out.bits[0, :, 0].tolist() == [0, 0, 1, 0]
    assert trace[0, :, 0].tolist() == [1, 2, 0, 1]


def test_mlp_strict_rejects_wide_integration():
    s_in = SpikeTensor(np.ones((1, 1, 4), dtype=np.uint8))
    w = WeightMatrix(np.full((4, 1), 1), 8)
    with pytest.raises(BitwidthError) as exc:
        golden_mlp_layer(s_in, w, NeuronParams(v_th=10), QuantSpec(b_x=3, b_a=1))
    assert exc.value.value == 4  # x = 4 exceeds the 3-bit signed max of 3


def test_mlp_saturate_clamps_integration():
    s_in = SpikeTensor(np.ones((1, 1, 4), dtype=np.uint8))
    w = WeightMatrix(np.full((4, 1), 1), 8)
    out, trace = golden_mlp_layer(
        s_in, w, NeuronParams(v_th=10),
        QuantSpec(b_x=3, b_a=1, overflow_mode=SATURATE))
    assert trace[0, 0, 0] == 3


def test_mlp_shape_mismatch_rejected():
    s_in = SpikeTensor.zeros(1, 1, 3)
    w = WeightMatrix(np.zeros((4, 2), dtype=np.int64), 8)
    with pytest.raises(ValueError):
        golden_mlp_layer(s_in, w, NeuronParams(v_th=1), Q16)


# ---------------------------------------------------------------- attention

def test_scores_hand_example():
    a = golden_attention_scores([[1, 0], [1, 1]], [[0, 1], [1, 1]])
    assert a.tolist() == [[0, 1], [1, 2]]


def test_scores_all_ones_hit_d():
    a = golden_attention_scores(np.ones((3, 16)), np.ones((3, 16)))
    assert (a == 16).all()


def test_scores_one_hot_identity():
    eye = np.eye(4, dtype=np.uint8)
    assert golden_attention_scores(eye, eye).tolist() == np.eye(4).tolist()


def test_scores_reject_non_binary():
    with pytest.raises(ValueError):
        golden_attention_scores([[2, 0]], [[1, 0]])


def test_weighted_hand_example():
    x = golden_attention_weighted([[0, 1], [1, 2]], [[1, 0], [1, 1]])
    assert x.tolist() == [[1, 1], [3, 2]]


def test_weighted_worst_case_reaches_n_times_d():
    n, d = 8, 4
    a = np.full((n, n), d)
    x = golden_attention_weighted(a, np.ones((n, d)))
    assert (x == n * d).all()


def test_weighted_rejects_negative_scores():
    with pytest.raises(ValueError):
        golden_attention_weighted([[-1]], [[1]])


def test_attention_layer_single_step_hand_example():
    # A = [[0,1],[1,2]], X = [[1,1],[3,2]]; v_th=1 fires only where X > 1
    q = SpikeTensor(np.array([[[1, 0]], [[1, 1]]], dtype=np.uint8))
    k = SpikeTensor(np.array([[[0, 1]], [[1, 1]]], dtype=np.uint8))
    v = SpikeTensor(np.array([[[1, 0]], [[1, 1]]], dtype=np.uint8))
    shape = HeadShape(n_tokens=2, n_steps=1, heads=1, d_head=2)
    out = golden_attention_layer(q, k, v, shape, NeuronParams(v_th=1),
                                 QuantSpec(b_a=3, b_x=8))
    assert out.bits[:, 0, :].tolist() == [[0, 0], [1, 1]]


def test_attention_membranes_accumulate_across_steps():
    # identical sub-threshold inputs each step: membranes reach 2x after t=1
    bits = np.ones((2, 2, 2), dtype=np.uint8)
    q, k, v = SpikeTensor(bits), SpikeTensor(bits), SpikeTensor(bits)
    shape = HeadShape(n_tokens=2, n_steps=2, heads=1, d_head=2)
    out, trace = golden_attention_layer(
        q, k, v, shape, NeuronParams(v_th=100), QuantSpec(b_a=3, b_x=8),
        return_trace=True)
    assert not out.bits.any()
    assert (trace[:, 1, :] == 2 * trace[:, 0, :]).all()
    assert (trace[:, 0, :] == 4).all()  # X = N * d = 4 per step


def test_attention_score_overflow_strict():
    bits = np.ones((2, 1, 2), dtype=np.uint8)
    q, k, v = SpikeTensor(bits), SpikeTensor(bits), SpikeTensor(bits)
    shape = HeadShape(2, 1, 1, 2)
    with pytest.raises(BitwidthError):  # a = 2 exceeds 1-bit unsigned
        golden_attention_layer(q, k, v, shape, NeuronParams(v_th=1),
                               QuantSpec(b_a=1, b_x=8))


def test_attention_heads_are_independent():
    rng = np.random.default_rng(5)
    shape = HeadShape(n_tokens=4, n_steps=2, heads=2, d_head=4)
    q = SpikeTensor.bernoulli(rng, 4, 2, 8)
    k = SpikeTensor.bernoulli(rng, 4, 2, 8)
    v = SpikeTensor.bernoulli(rng, 4, 2, 8)
    quant = QuantSpec(b_a=3, b_x=8)
    params = NeuronParams(v_th=3)
    full = golden_attention_layer(q, k, v, shape, params, quant)
    # head 0 result is unchanged when head 1's inputs are zeroed
    z = lambda t: SpikeTensor(np.concatenate(
        [t.bits[:, :, :4], np.zeros((4, 2, 4), np.uint8)], axis=2))
    masked = golden_attention_layer(z(q), z(k), z(v), shape, params, quant)
    assert (full.bits[:, :, :4] == masked.bits[:, :, :4]).all()


# ---------------------------------------------------------------- bit widths

def test_bitwidth_requirements_pinned_pairs():
    req = bitwidth_requirements(HeadShape(128, 1, 1, 16))
    assert (req.b_a, req.b_x, req.conservative) == (5, 13, False)
    req = bitwidth_requirements(HeadShape(1, 1, 1, 1))
    assert (req.b_a, req.b_x, req.conservative) == (1, 2, False)


def test_bitwidth_requirements_non_power_of_two_is_conservative():
    req = bitwidth_requirements(HeadShape(5, 1, 1, 3))
    assert (req.b_a, req.b_x, req.conservative) == (3, 7, True)


@given(d=st.integers(1, 64), n=st.integers(1, 128))
def test_bitwidth_requirements_cover_worst_case(d, n):
    req = bitwidth_requirements(HeadShape(n, 1, 1, d))
    assert (1 << req.b_a) - 1 >= d
    assert signed_range(req.b_x)[1] >= n * d


# ---------------------------------------------------------------- validation

def test_spike_tensor_rejects_non_binary():
    with pytest.raises(ValueError):
        SpikeTensor(np.full((1, 1, 1), 2))


def test_spike_tensor_rejects_wrong_rank():
    with pytest.raises(ValueError):
        SpikeTensor(np.zeros((2, 2)))


def test_weight_matrix_range_checked():
    with pytest.raises(ValueError):
        WeightMatrix(np.array([[128]]), 8)
    WeightMatrix(np.array([[127], [-128]]), 8)


def test_weight_matrix_rejects_floats():
    with pytest.raises(ValueError):
        WeightMatrix(np.array([[0.5]]), 8)


def test_quant_spec_bounds():
    for bad in (dict(b_w=1), dict(b_a=0), dict(b_x=49),
                dict(b_a=8, b_x=4), dict(overflow_mode="clip")):
        with pytest.raises(ValueError):
            QuantSpec(**bad)


def test_neuron_params_require_positive_threshold():
    with pytest.raises(ValueError):
        NeuronParams(v_th=0)


def test_head_shape_from_model_dim():
    assert HeadShape.from_model_dim(4, 2, 2, 32).d_head == 16
    with pytest.raises(ValueError):
        HeadShape.from_model_dim(4, 2, 2, 33)


# ------------------------------------------------------- oracle equivalence

_dims = st.integers(1, 8)


@settings(deadline=None)
@given(n=_dims, t=_dims, d_in=_dims, d_out=_dims,
       v_th=st.integers(1, 8), v_leak=st.integers(0, 2),
       seed=st.integers(0, 2**32 - 1))
def test_mlp_matches_brute_oracle(n, t, d_in, d_out, v_th, v_leak, seed):
    rng = np.random.default_rng(seed)
    s_in = SpikeTensor.bernoulli(rng, n, t, d_in)
    w = WeightMatrix.random(rng, d_in, d_out, 4)
    out, trace = golden_mlp_layer(s_in, w, NeuronParams(v_th, v_leak), Q16)
    want, want_v = reference.brute_mlp(s_in.bits.tolist(), w.values.tolist(),
                                       v_th, v_leak)
    assert out.bits.tolist() == want
    assert trace[:, -1, :].tolist() == want_v


@settings(deadline=None)
@given(n=_dims, t=st.integers(1, 4), heads=st.integers(1, 2),
       d=st.integers(1, 8), v_th=st.integers(1, 8), v_leak=st.integers(0, 2),
       seed=st.integers(0, 2**32 - 1))
def test_attention_matches_brute_oracle(n, t, heads, d, v_th, v_leak, seed):
    rng = np.random.default_rng(seed)
    shape = HeadShape(n, t, heads, d)
    req = bitwidth_requirements(shape)
    quant = QuantSpec(b_a=req.b_a, b_x=req.b_x + 2)  # leak headroom
    q = SpikeTensor.bernoulli(rng, n, t, shape.model_dim)
    k = SpikeTensor.bernoulli(rng, n, t, shape.model_dim)
    v = SpikeTensor.bernoulli(rng, n, t, shape.model_dim)
    out = golden_attention_layer(q, k, v, shape,
                                 NeuronParams(v_th, v_leak), quant)
    want = reference.brute_attention(q.bits.tolist(), k.bits.tolist(),
                                     v.bits.tolist(), heads, d, v_th, v_leak)
    assert out.bits.tolist() == want


@settings(deadline=None)
@given(n=_dims, d=_dims, seed=st.integers(0, 2**32 - 1))
def test_scores_match_brute_and_stay_in_range(n, d, seed):
    rng = np.random.default_rng(seed)
    q = (rng.random((n, d)) < 0.5).astype(np.uint8)
    k = (rng.random((n, d)) < 0.5).astype(np.uint8)
    a = golden_attention_scores(q, k)
    assert a.tolist() == reference.brute_scores(q.tolist(), k.tolist())
    assert a.min() >= 0 and a.max() <= d


@settings(deadline=None)
@given(n=_dims, t=st.integers(2, 4), d=_dims,
       seed=st.integers(0, 2**32 - 1))
def test_mlp_prefix_causality(n, t, d, seed):
    # outputs for the first t-1 steps are unchanged by the final step's input
    rng = np.random.default_rng(seed)
    s_in = SpikeTensor.bernoulli(rng, n, t, d)
    w = WeightMatrix.random(rng, d, d, 4)
    params = NeuronParams(v_th=4)
    full, _ = golden_mlp_layer(s_in, w, params, Q16)
    prefix, _ = golden_mlp_layer(SpikeTensor(s_in.bits[:, :t - 1]), w,
                                 params, Q16)
    assert (full.bits[:, :t - 1] == prefix.bits).all()


@settings(deadline=None)
@given(n=_dims, t=st.integers(1, 4), d=_dims,
       seed=st.integers(0, 2**32 - 1))
def test_fired_neurons_rest_at_zero(n, t, d, seed):
    rng = np.random.default_rng(seed)
    s_in = SpikeTensor.bernoulli(rng, n, t, d)
    w = WeightMatrix.random(rng, d, d, 4)
    out, trace = golden_mlp_layer(s_in, w, NeuronParams(v_th=2), Q16)
    assert (trace[out.bits == 1] == 0).all()
