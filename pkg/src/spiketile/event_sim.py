"""Event-driven register-level simulation of the systolic tile dataflows.

Operands are injected at the array edges with the skew the hardware uses (a
value for feature f enters lane l at cycle f + l) and then shift one PE per
cycle. Cycle counts emerge from the register movement rather than from any
closed-form expression, so these functions act as an independent check on the
tile cycle formulas used by the schedulers. Timing is input-independent: a
zero spike bit suppresses the accumulation but still occupies its cycle.
"""
from __future__ import annotations

import numpy as np

from .attn_array import RPEState
from .mlp_array import PEState

_EMPTY = None


def _inject(seq_len: int, lane: int, cycle: int):
    """Feature index arriving at a lane head this cycle, or None."""
    f = cycle - lane
    return f if 0 <= f < seq_len else None


def event_mlp_tile(w_tile: np.ndarray, s_tile: np.ndarray) -> tuple[np.ndarray, int]:
    """Stream one weight/spike tile through an H x W grid of PEState registers.

    w_tile is (H, IF) signed weights, s_tile is (W, IF) spike bits. Returns
    (x grid, cycles), where cycles counts from the first operand pair landing
    in a PE to the last, inclusive.
    """
    h, if_total = w_tile.shape
    w_cols, if_s = s_tile.shape
    if if_s != if_total:
        raise ValueError(f"feature depth mismatch: {if_total} vs {if_s}")
    grid = [[PEState() for _ in range(w_cols)] for _ in range(h)]
    # parallel tag planes track which feature each register currently holds
    w_tag = [[_EMPTY] * w_cols for _ in range(h)]
    s_tag = [[_EMPTY] * w_cols for _ in range(h)]
    last_pair_cycle = -1
    horizon = if_total + h + w_cols  # all operands drained beyond this
    for cycle in range(horizon):
        # weights shift right, rightmost first
        for r in range(h):
            for c in range(w_cols - 1, 0, -1):
                grid[r][c].weight_reg = grid[r][c - 1].weight_reg
                w_tag[r][c] = w_tag[r][c - 1]
            f = _inject(if_total, r, cycle)
            grid[r][0].weight_reg = int(w_tile[r, f]) if f is not None else 0
            w_tag[r][0] = f
        # spikes shift down, bottom row first
        for c in range(w_cols):
            for r in range(h - 1, 0, -1):
                grid[r][c].spike_reg = grid[r - 1][c].spike_reg
                s_tag[r][c] = s_tag[r - 1][c]
            f = _inject(if_total, c, cycle)
            grid[0][c].spike_reg = int(s_tile[c, f]) if f is not None else 0
            s_tag[0][c] = f
        for r in range(h):
            for c in range(w_cols):
                wf, sf = w_tag[r][c], s_tag[r][c]
                if wf is None or sf is None:
                    continue
                if wf != sf:
                    raise AssertionError(
                        f"skew misalignment at PE({r},{c}): weight f={wf}, spike f={sf}")
                if grid[r][c].spike_reg:
                    grid[r][c].x_reg += grid[r][c].weight_reg
                last_pair_cycle = cycle
    x = np.array([[grid[r][c].x_reg for c in range(w_cols)] for r in range(h)],
                 dtype=np.int64)
    return x, last_pair_cycle + 1


def event_mode1_tile(q_tile: np.ndarray, k_tile: np.ndarray) -> tuple[np.ndarray, int]:
    """Mode 1: query bits stream right, key bits stream down, AND-accumulate
    into the stationary score registers. Returns (score grid, cycles)."""
    nq, d = q_tile.shape
    nk = k_tile.shape[0]
    grid = [[RPEState() for _ in range(nk)] for _ in range(nq)]
    q_tag = [[_EMPTY] * nk for _ in range(nq)]
    k_tag = [[_EMPTY] * nk for _ in range(nq)]
    last_pair_cycle = -1
    for cycle in range(d + nq + nk):
        for r in range(nq):
            for c in range(nk - 1, 0, -1):
                grid[r][c].q_reg = grid[r][c - 1].q_reg
                q_tag[r][c] = q_tag[r][c - 1]
            f = _inject(d, r, cycle)
            grid[r][0].q_reg = int(q_tile[r, f]) if f is not None else 0
            q_tag[r][0] = f
        for c in range(nk):
            for r in range(nq - 1, 0, -1):
                grid[r][c].kv_reg = grid[r - 1][c].kv_reg
                k_tag[r][c] = k_tag[r - 1][c]
            f = _inject(d, c, cycle)
            grid[0][c].kv_reg = int(k_tile[c, f]) if f is not None else 0
            k_tag[0][c] = f
        for r in range(nq):
            for c in range(nk):
                if q_tag[r][c] is None or k_tag[r][c] is None:
                    continue
                if q_tag[r][c] != k_tag[r][c]:
                    raise AssertionError(f"skew misalignment at R-PE({r},{c})")
                grid[r][c].a_reg += grid[r][c].q_reg & grid[r][c].kv_reg
                last_pair_cycle = cycle
    a = np.array([[grid[r][c].a_reg for c in range(nk)] for r in range(nq)],
                 dtype=np.int64)
    return a, last_pair_cycle + 1


def event_mode2_tile(a_tile: np.ndarray, v_tile: np.ndarray,
                     x_in: np.ndarray) -> tuple[np.ndarray, int]:
    """Mode 2: X partials stream right through rows holding stationary scores
    while value bits stream down; each hop adds a_reg * v bit. Returns the
    updated X partials and the cycle count."""
    nq, nk = a_tile.shape
    nk_v, d = v_tile.shape
    if nk_v != nk:
        raise ValueError(f"value rows {nk_v} != score cols {nk}")
    if x_in.shape != (nq, d):
        raise ValueError(f"x partial shape {x_in.shape} != ({nq}, {d})")
    grid = [[RPEState(a_reg=int(a_tile[r, c])) for c in range(nk)]
            for r in range(nq)]
    x_tag = [[_EMPTY] * nk for _ in range(nq)]
    v_tag = [[_EMPTY] * nk for _ in range(nq)]
    x_out = np.zeros((nq, d), dtype=np.int64)
    last_pair_cycle = -1
    for cycle in range(d + nq + nk):
        for r in range(nq):
            # the value leaving the last column is a finished X entry
            if x_tag[r][nk - 1] is not None:
                x_out[r, x_tag[r][nk - 1]] = grid[r][nk - 1].x_reg
            for c in range(nk - 1, 0, -1):
                grid[r][c].x_reg = grid[r][c - 1].x_reg
                x_tag[r][c] = x_tag[r][c - 1]
            f = _inject(d, r, cycle)
            grid[r][0].x_reg = int(x_in[r, f]) if f is not None else 0
            x_tag[r][0] = f
        for c in range(nk):
            for r in range(nq - 1, 0, -1):
                grid[r][c].kv_reg = grid[r - 1][c].kv_reg
                v_tag[r][c] = v_tag[r - 1][c]
            f = _inject(d, c, cycle)
            grid[0][c].kv_reg = int(v_tile[c, f]) if f is not None else 0
            v_tag[0][c] = f
        for r in range(nq):
            for c in range(nk):
                if x_tag[r][c] is None or v_tag[r][c] is None:
                    continue
                if x_tag[r][c] != v_tag[r][c]:
                    raise AssertionError(f"skew misalignment at R-PE({r},{c})")
                if grid[r][c].kv_reg:
                    grid[r][c].x_reg += grid[r][c].a_reg
                last_pair_cycle = cycle
    for r in range(nq):
        for c in range(nk):
            if x_tag[r][c] is not None:
                raise AssertionError(
                    f"X value for feature {x_tag[r][c]} still in flight at R-PE({r},{c})")
    return x_out, last_pair_cycle + 1
