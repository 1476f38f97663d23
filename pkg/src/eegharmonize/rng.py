"""Pinned deterministic random number generation.

The simulator must produce byte-identical output for a given seed, on any
machine, independent of library RNG internals. This module therefore
implements its own generators:

* splitmix64 — used to derive stream keys and to seed xoshiro state.
* xoshiro256++ — the sample generator, run as a bank of independent
  "lanes" so whole matrices can be produced with vectorized uint64 ops.

Stream-splitting discipline
---------------------------
A stream key is derived by folding the seed and a sequence of tags
(integers or strings) through splitmix64: each tag perturbs the state,
which is then advanced one splitmix64 step. Lane ``l`` of a matrix draw
is seeded from ``mix64(key + (l + 1) * GOLDEN)``, and its four xoshiro
words come from a splitmix64 sequence started at that lane key. Serial
and lane-parallel generation therefore agree by construction.

Matrices are filled row = lane, column = step. Gaussians come from
Box-Muller on consecutive uniform pairs within a lane.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def mix64(x):
    """splitmix64 output function (finalizer) on uint64 scalars or arrays."""
    with np.errstate(over="ignore"):
        z = (np.asarray(x, dtype=np.uint64) + GOLDEN) & _MASK
        z = ((z ^ (z >> _U64(30))) * _M1) & _MASK
        z = ((z ^ (z >> _U64(27))) * _M2) & _MASK
        return z ^ (z >> _U64(31))


def _fold_tag(state: np.uint64, tag) -> np.uint64:
    if isinstance(tag, str):
        for byte in tag.encode("utf-8"):
            state = mix64(state ^ _U64(byte))
        return mix64(state ^ _U64(len(tag.encode("utf-8"))))
    if isinstance(tag, (bool, np.bool_)):
        tag = int(tag)
    if isinstance(tag, (int, np.integer)):
        return mix64(state ^ (_U64(int(tag) & 0xFFFFFFFFFFFFFFFF)))
    raise TypeError(f"stream tags must be int or str, got {type(tag)!r}")


def derive_key(seed: int, *tags) -> np.uint64:
    """Derive a 64-bit stream key from a seed and a tag path."""
    state = mix64(_U64(int(seed) & 0xFFFFFFFFFFFFFFFF))
    for tag in tags:
        state = _fold_tag(state, tag)
    return _U64(state)


class XoshiroLanes:
    """Bank of independent xoshiro256++ streams stepped in lockstep."""

    def __init__(self, key: np.uint64, n_lanes: int):
        with np.errstate(over="ignore"):
            lane_keys = (
                _U64(key) + (np.arange(1, n_lanes + 1, dtype=np.uint64) * GOLDEN)
            ) & _MASK
        lane_keys = mix64(lane_keys)
        state = []
        s = lane_keys
        for _ in range(4):
            with np.errstate(over="ignore"):
                s = (s + GOLDEN) & _MASK
            state.append(mix64(s))
        self._s = state  # four uint64 arrays of shape (n_lanes,)

    @staticmethod
    def _rotl(x, k: int):
        return ((x << _U64(k)) | (x >> _U64(64 - k))) & _MASK

    def next_raw(self) -> np.ndarray:
        """One xoshiro256++ step per lane; returns uint64 of shape (n_lanes,)."""
        s0, s1, s2, s3 = self._s
        with np.errstate(over="ignore"):
            out = (self._rotl((s0 + s3) & _MASK, 23) + s0) & _MASK
            t = (s1 << _U64(17)) & _MASK
        s2 = s2 ^ s0
        s3 = s3 ^ s1
        s1 = s1 ^ s2
        s0 = s0 ^ s3
        s2 = s2 ^ t
        s3 = self._rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return out

    def uniforms(self, n_steps: int) -> np.ndarray:
        """(n_lanes, n_steps) doubles in (0, 1): top 53 bits of each word."""
        cols = [self.next_raw() >> _U64(11) for _ in range(n_steps)]
        u = np.stack(cols, axis=1).astype(np.float64) * (2.0**-53)
        return np.maximum(u, 2.0**-53)


def uniform_matrix(key: np.uint64, n_rows: int, n_cols: int) -> np.ndarray:
    return XoshiroLanes(key, n_rows).uniforms(n_cols)


def gaussian_matrix(key: np.uint64, n_rows: int, n_cols: int) -> np.ndarray:
    """Standard normal draws, Box-Muller over consecutive uniform pairs."""
    n_pairs = (n_cols + 1) // 2
    u = XoshiroLanes(key, n_rows).uniforms(2 * n_pairs)
    u1, u2 = u[:, 0::2], u[:, 1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty((n_rows, 2 * n_pairs))
    out[:, 0::2] = radius * np.cos(theta)
    out[:, 1::2] = radius * np.sin(theta)
    return out[:, :n_cols]
