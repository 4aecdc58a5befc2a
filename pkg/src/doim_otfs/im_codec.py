"""Block-wise Doppler index modulation: bits <-> delay-Doppler grid.

A frame of ``M x N`` resource units is tiled into ``g`` subframes of
``M_hat`` delay rows by ``N_hat`` Doppler columns. Each Doppler column of a
subframe is a *block*; ``k_hat`` blocks per subframe are switched on and
carry ``k_hat * M_hat`` constellation symbols, the choice of blocks carries
``p1`` index bits.
"""

from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np

from .constellation import Constellation
from .errors import CodebookError, ConfigError, DimensionError


@dataclass(frozen=True)
class FrameLayout:
    M: int
    N: int
    M_hat: int = 4
    N_hat: int = 4
    k_hat: int = 1
    Mc: int = 4

    def __post_init__(self):
        if min(self.M, self.N, self.M_hat, self.N_hat) < 1:
            raise ConfigError("all frame dimensions must be positive")
        if self.M % self.M_hat or self.N % self.N_hat:
            raise ConfigError(
                f"block size ({self.M_hat}, {self.N_hat}) must tile the frame ({self.M}, {self.N})"
            )
        if not 1 <= self.k_hat <= self.N_hat:
            raise ConfigError(f"k_hat must lie in [1, {self.N_hat}], got {self.k_hat}")
        if self.Mc < 2 or self.Mc & (self.Mc - 1):
            raise ConfigError(f"Mc must be a power of two, got {self.Mc}")

    @property
    def g(self) -> int:
        return (self.M * self.N) // (self.M_hat * self.N_hat)

    @property
    def tile_rows(self) -> int:
        return self.M // self.M_hat

    @property
    def bits_per_symbol(self) -> int:
        return self.Mc.bit_length() - 1

    @property
    def p1(self) -> int:
        return comb(self.N_hat, self.k_hat).bit_length() - 1

    @property
    def p2(self) -> int:
        return self.k_hat * self.M_hat * self.bits_per_symbol

    @property
    def p(self) -> int:
        return self.p1 + self.p2

    @property
    def n_legal(self) -> int:
        return 1 << self.p1

    @property
    def bits_per_frame(self) -> int:
        return self.p * self.g

    @cached_property
    def legal_patterns(self) -> np.ndarray:
        """``(2**p1, k_hat)`` table, row ``r`` is the rank-``r`` block subset."""
        return np.array(
            [combo_encode(r, self.N_hat, self.k_hat) for r in range(self.n_legal)],
            dtype=np.int64,
        ).reshape(self.n_legal, self.k_hat)

    def to_tiles(self, grid: np.ndarray) -> np.ndarray:
        """``(M, N)`` grid -> ``(g, M_hat, N_hat)`` stack of subframes."""
        grid = np.asarray(grid)
        if grid.shape[:2] != (self.M, self.N):
            raise DimensionError(f"expected ({self.M}, {self.N}) grid, got {grid.shape}")
        t = grid.reshape(self.tile_rows, self.M_hat, self.N // self.N_hat, self.N_hat)
        return t.transpose(2, 0, 1, 3).reshape(self.g, self.M_hat, self.N_hat)

    def from_tiles(self, tiles: np.ndarray) -> np.ndarray:
        t = np.asarray(tiles).reshape(self.N // self.N_hat, self.tile_rows, self.M_hat, self.N_hat)
        return t.transpose(1, 2, 0, 3).reshape(self.M, self.N)


def combo_encode(rank: int, N_hat: int, k_hat: int) -> tuple:
    """Return the ``rank``-th ``k_hat``-subset of ``range(N_hat)`` in lexicographic order."""
    total = comb(N_hat, k_hat)
    if not 0 <= rank < total:
        raise CodebookError(f"rank {rank} outside [0, {total})")
    out = []
    v = 0
    for j in range(k_hat):
        while True:
            # subsets starting with v at position j
            n_with_v = comb(N_hat - 1 - v, k_hat - 1 - j)
            if rank < n_with_v:
                break
            rank -= n_with_v
            v += 1
        out.append(v)
        v += 1
    return tuple(out)


def combo_decode(pattern, N_hat: int, k_hat: int) -> int:
    """Lexicographic rank of a ``k_hat``-subset; inverse of :func:`combo_encode`.

    Ranks of patterns outside the ``2**p1`` legal codebook are returned as
    well, callers check legality.
    """
    c = sorted(int(v) for v in pattern)
    if len(c) != k_hat or len(set(c)) != k_hat or (c and (c[0] < 0 or c[-1] >= N_hat)):
        raise CodebookError(f"{pattern!r} is not a {k_hat}-subset of range({N_hat})")
    rank = 0
    prev = -1
    for j, cj in enumerate(c):
        rank += comb(N_hat - prev - 1, k_hat - j) - comb(N_hat - cj, k_hat - j)
        prev = cj
    return rank


def pattern_ranks(patterns: np.ndarray, N_hat: int, k_hat: int) -> np.ndarray:
    """Vectorised :func:`combo_decode` over rows of sorted ``patterns``."""
    c = np.sort(np.asarray(patterns, dtype=np.int64), axis=-1)
    binom = np.array([[comb(a, b) for b in range(k_hat + 1)] for a in range(N_hat + 1)],
                     dtype=np.int64)
    prev = np.concatenate([np.full(c.shape[:-1] + (1,), -1), c[..., :-1]], axis=-1)
    j = np.arange(k_hat)
    return (binom[N_hat - prev - 1, k_hat - j] - binom[N_hat - c, k_hat - j]).sum(axis=-1)


def bit_split(bits, layout: FrameLayout):
    """Split one subframe's ``p`` bits into (index bits, symbol bits)."""
    bits = np.asarray(bits)
    if bits.shape != (layout.p,):
        raise DimensionError(f"expected {layout.p} bits, got shape {bits.shape}")
    return bits[: layout.p1], bits[layout.p1:]


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    n = bits.shape[-1]
    if n == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    return bits.astype(np.int64) @ (1 << np.arange(n - 1, -1, -1))


def _int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    return ((np.asarray(values)[..., None] >> shifts) & 1).astype(np.uint8)


def map_frame(bits, layout: FrameLayout, constellation: Constellation):
    """Map ``p * g`` bits to a delay-Doppler grid.

    Returns
    -------
    X : ndarray, complex, shape (M, N)
    pattern : ndarray, int, shape (g, k_hat)
        Sorted active block indices for each subframe.
    """
    bits = np.asarray(bits)
    if bits.shape != (layout.bits_per_frame,):
        raise DimensionError(f"expected {layout.bits_per_frame} bits, got shape {bits.shape}")
    per_sub = bits.reshape(layout.g, layout.p)
    ranks = _bits_to_int(per_sub[:, : layout.p1])
    pattern = layout.legal_patterns[ranks]
    labels = constellation.bits_to_labels(per_sub[:, layout.p1:].reshape(-1))
    syms = constellation.points[labels].reshape(layout.g, layout.k_hat, layout.M_hat)

    blocks = np.zeros((layout.g, layout.N_hat, layout.M_hat), dtype=complex)
    blocks[np.arange(layout.g)[:, None], pattern] = syms
    X = layout.from_tiles(blocks.transpose(0, 2, 1))
    return X, pattern


def demap_frame(labels, pattern, layout: FrameLayout, constellation: Constellation) -> np.ndarray:
    """Recover the frame's bits from per-unit symbol labels and the activation pattern.

    ``labels`` is an ``(M, N)`` integer grid; only entries on active units are read.
    """
    pattern = np.sort(np.asarray(pattern, dtype=np.int64), axis=-1)
    if pattern.shape != (layout.g, layout.k_hat):
        raise DimensionError(f"expected pattern shape {(layout.g, layout.k_hat)}, got {pattern.shape}")
    if pattern.size and (pattern.min() < 0 or pattern.max() >= layout.N_hat
                         or np.any(np.diff(pattern, axis=-1) == 0)):
        raise CodebookError("malformed activation pattern")
    ranks = pattern_ranks(pattern, layout.N_hat, layout.k_hat)
    if np.any(ranks >= layout.n_legal):
        raise CodebookError("activation pattern outside the legal codebook")

    blocks = layout.to_tiles(np.asarray(labels)).transpose(0, 2, 1)
    active = blocks[np.arange(layout.g)[:, None], pattern]
    sym_bits = constellation.labels_to_bits(active.reshape(-1)).reshape(layout.g, layout.p2)
    idx_bits = _int_to_bits(ranks, layout.p1)
    return np.concatenate([idx_bits, sym_bits], axis=1).reshape(-1)


def active_mask(pattern, layout: FrameLayout) -> np.ndarray:
    """Boolean ``(M, N)`` grid marking units in active blocks."""
    pattern = np.asarray(pattern)
    blocks = np.zeros((layout.g, layout.N_hat, layout.M_hat), dtype=bool)
    blocks[np.arange(layout.g)[:, None], pattern] = True
    return layout.from_tiles(blocks.transpose(0, 2, 1))


def spectral_efficiency(layout: FrameLayout) -> float:
    """Bits per resource unit (bps/Hz without CP overhead)."""
    return layout.p / (layout.M_hat * layout.N_hat)
