"""Per-cycle register-shifting simulators checked against the closed-form
cycle counts and the reference arithmetic."""
from __future__ import annotations

import numpy as np

from spiketile import (
    event_mlp_tile,
    event_mode1_tile,
    event_mode2_tile,
    mode_cycles,
    tile_compute_cycles,
)


def test_mlp_tile_hand_example():
    rng = np.random.default_rng(0)
    w = rng.integers(-8, 8, size=(3, 4))
    s = (rng.random((5, 4)) < 0.5).astype(np.uint8)
    x, cycles = event_mlp_tile(w, s)
    assert cycles == 10 == tile_compute_cycles(4, 3, 5)
    assert (x == w @ s.T.astype(np.int64)).all()


def test_mlp_tile_zero_spikes_same_latency():
    # gated accumulation changes values, never timing
    w = np.ones((2, 3), dtype=np.int64)
    x0, c0 = event_mlp_tile(w, np.zeros((4, 3), dtype=np.uint8))
    x1, c1 = event_mlp_tile(w, np.ones((4, 3), dtype=np.uint8))
    assert c0 == c1 == tile_compute_cycles(3, 2, 4)
    assert not x0.any()
    assert (x1 == 3).all()


def test_mlp_tile_degenerate_single_pe():
    x, cycles = event_mlp_tile(np.array([[5]]), np.array([[1]], dtype=np.uint8))
    assert cycles == 1 == tile_compute_cycles(1, 1, 1)
    assert x[0, 0] == 5


def test_mode1_hand_example():
    rng = np.random.default_rng(1)
    q = (rng.random((3, 4)) < 0.5).astype(np.uint8)
    k = (rng.random((2, 4)) < 0.5).astype(np.uint8)
    a, cycles = event_mode1_tile(q, k)
    assert cycles == 7 == mode_cycles(4, 3, 2)
    assert (a == q.astype(np.int64) @ k.astype(np.int64).T).all()


def test_mode2_hand_example():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 4, size=(3, 2))
    v = (rng.random((2, 4)) < 0.5).astype(np.uint8)
    x_in = rng.integers(0, 9, size=(3, 4))
    x, cycles = event_mode2_tile(a, v, x_in)
    assert cycles == 7 == mode_cycles(4, 3, 2)
    assert (x == x_in + a @ v.astype(np.int64)).all()


def test_mode2_accumulates_onto_partials():
    a = np.array([[1, 2]])
    v = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    x, _ = event_mode2_tile(a, v, np.array([[10, 20]]))
    assert x.tolist() == [[11, 22]]


def test_event_sims_match_formulas_on_random_shapes():
    rng = np.random.default_rng(7)
    for _ in range(50):
        h, w_cols, if_total = (int(rng.integers(1, 9)) for _ in range(3))
        weights = rng.integers(-8, 8, size=(h, if_total))
        spikes = (rng.random((w_cols, if_total)) < 0.5).astype(np.uint8)
        x, cycles = event_mlp_tile(weights, spikes)
        assert cycles == tile_compute_cycles(if_total, h, w_cols)
        assert (x == weights @ spikes.T.astype(np.int64)).all()

        nq, nk, d = (int(rng.integers(1, 9)) for _ in range(3))
        q = (rng.random((nq, d)) < 0.5).astype(np.uint8)
        k = (rng.random((nk, d)) < 0.5).astype(np.uint8)
        a, c1 = event_mode1_tile(q, k)
        assert c1 == mode_cycles(d, nq, nk)
        assert (a == q.astype(np.int64) @ k.astype(np.int64).T).all()

        v = (rng.random((nk, d)) < 0.5).astype(np.uint8)
        x_in = rng.integers(0, 16, size=(nq, d))
        x2, c2 = event_mode2_tile(a, v, x_in)
        assert c2 == mode_cycles(d, nq, nk)
        assert (x2 == x_in + a @ v.astype(np.int64)).all()
