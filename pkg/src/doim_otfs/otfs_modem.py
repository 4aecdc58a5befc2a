"""OTFS modulator/demodulator with rectangular pulses.

All stages are unitary. Time signals are vectors of length ``M*N`` laid out
symbol by symbol: sample ``u = n*M + m'`` is sample ``m'`` of OFDM-like
symbol ``n``.
"""

import numpy as np

from .errors import ConfigError, DimensionError


def _check_grid(X):
    X = np.asarray(X)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D grid, got shape {X.shape}")
    return X


def isfft(X: np.ndarray) -> np.ndarray:
    """Delay-Doppler -> time-frequency, ``F_M X F_N^H`` with unitary DFTs."""
    X = _check_grid(X)
    return np.fft.ifft(np.fft.fft(X, axis=0, norm="ortho"), axis=1, norm="ortho")


def sfft(Y_tf: np.ndarray) -> np.ndarray:
    """Time-frequency -> delay-Doppler, ``F_M^H Y F_N``."""
    Y_tf = _check_grid(Y_tf)
    return np.fft.fft(np.fft.ifft(Y_tf, axis=0, norm="ortho"), axis=1, norm="ortho")


def heisenberg(X_tf: np.ndarray) -> np.ndarray:
    """Rectangular-pulse Heisenberg transform: per-symbol IDFT across subcarriers."""
    X_tf = _check_grid(X_tf)
    return np.fft.ifft(X_tf, axis=0, norm="ortho").reshape(-1, order="F")


def wigner(r: np.ndarray, M: int, N: int) -> np.ndarray:
    """Rectangular-pulse Wigner transform, inverse of :func:`heisenberg`."""
    r = np.asarray(r)
    if r.shape != (M * N,):
        raise DimensionError(f"expected {M * N} samples, got shape {r.shape}")
    return np.fft.fft(r.reshape(M, N, order="F"), axis=0, norm="ortho")


def add_cp(s: np.ndarray, cp_len: int) -> np.ndarray:
    s = np.asarray(s)
    if not 0 <= cp_len < len(s):
        raise ConfigError(f"CP length {cp_len} must lie in [0, {len(s)})")
    if cp_len == 0:
        return s.copy()
    return np.concatenate([s[-cp_len:], s])


def remove_cp(r: np.ndarray, cp_len: int) -> np.ndarray:
    r = np.asarray(r)
    if not 0 <= cp_len < len(r):
        raise ConfigError(f"CP length {cp_len} must lie in [0, {len(r)})")
    return r[cp_len:].copy()


def modulate(X: np.ndarray, cp_len: int = 0) -> np.ndarray:
    """ISFFT -> Heisenberg -> CP insertion (one CP per frame)."""
    return add_cp(heisenberg(isfft(X)), cp_len)


def demodulate(r: np.ndarray, M: int, N: int, cp_len: int = 0) -> np.ndarray:
    """CP removal -> Wigner -> SFFT.

    The channel in :mod:`doim_otfs.channel_model` already discards the guard
    interval, so the default ``cp_len=0`` applies to its output.
    """
    return sfft(wigner(remove_cp(r, cp_len), M, N))


def vec(X: np.ndarray) -> np.ndarray:
    """Stack a delay-Doppler grid as ``x[k*M + l] = X[l, k]``."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(x: np.ndarray, M: int, N: int) -> np.ndarray:
    return np.asarray(x).reshape(M, N, order="F")
