"""Gray-labelled unit-power constellations (BPSK, square QAM, PSK)."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def _gray_pam(bits_per_axis: int) -> np.ndarray:
    """PAM levels indexed by Gray label, spacing 2, label 0 on the largest level."""
    size = 1 << bits_per_axis
    levels = np.empty(size)
    # position i on the axis carries label gray(i)
    levels[_gray(np.arange(size))] = (size - 1) - 2.0 * np.arange(size)
    return levels


@dataclass(frozen=True)
class Constellation:
    """A Gray-mapped constellation.

    ``points[label]`` is the symbol carrying the integer ``label`` whose
    binary expansion (MSB first) holds ``bits_per_symbol`` bits.
    """

    points: np.ndarray

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @classmethod
    def gray(cls, order: int) -> "Constellation":
        if order < 2 or order & (order - 1):
            raise ConfigError(f"constellation order must be a power of two >= 2, got {order}")
        k = int(np.log2(order))
        labels = np.arange(order)
        if order == 2:
            pts = np.array([1.0, -1.0], dtype=complex)
        elif k % 2 == 0:
            half = k // 2
            pam = _gray_pam(half)
            i_lab = labels >> half
            q_lab = labels & ((1 << half) - 1)
            pts = pam[i_lab] + 1j * pam[q_lab]
        else:
            pos = np.empty(order, dtype=int)
            pos[_gray(labels)] = labels
            pts = np.exp(2j * np.pi * pos / order)
        pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
        return cls(points=pts.astype(complex))

    def modulate(self, labels: np.ndarray) -> np.ndarray:
        return self.points[np.asarray(labels)]

    def demodulate(self, symbols: np.ndarray) -> np.ndarray:
        """Nearest-point hard decision, returns labels."""
        symbols = np.asarray(symbols)
        d = np.abs(symbols[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)

    def bits_to_labels(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return bits.astype(np.int64) @ weights

    def labels_to_bits(self, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64).reshape(-1, 1)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((labels >> shifts) & 1).astype(np.uint8).reshape(-1)
