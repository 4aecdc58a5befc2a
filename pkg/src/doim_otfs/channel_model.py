"""Doubly-selective multipath channel with raised-cosine composite filtering."""

from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import ConfigError

RRC_SPAN = 8  # receive RRC truncated to +-8 symbol periods
_SING_TOL = 1e-9


def raised_cosine(t, rolloff: float, Ts: float = 1.0):
    """Composite transmit/receive response ``P_rc(t)`` (raised cosine).

    Unit peak, zeros at nonzero multiples of ``Ts``.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ConfigError(f"rolloff must lie in [0, 1], got {rolloff}")
    x = np.asarray(t, dtype=float) / Ts
    out = np.sinc(x)
    if rolloff == 0.0:
        return out
    den = 1.0 - (2.0 * rolloff * x) ** 2
    sing = np.abs(den) < _SING_TOL
    safe = np.where(sing, 1.0, den)
    out = np.where(
        sing,
        np.pi / 4.0 * np.sinc(1.0 / (2.0 * rolloff)),
        out * np.cos(np.pi * rolloff * x) / safe,
    )
    return out[()] if out.ndim == 0 else out


def root_raised_cosine(t, rolloff: float, Ts: float = 1.0):
    """Receive-side root-raised-cosine pulse, scaled so that ``int p(t)^2 dt = Ts``."""
    if not 0.0 <= rolloff <= 1.0:
        raise ConfigError(f"rolloff must lie in [0, 1], got {rolloff}")
    x = np.asarray(t, dtype=float) / Ts
    b = rolloff
    zero = np.abs(x) < _SING_TOL
    sing = (np.abs(np.abs(4.0 * b * x) - 1.0) < _SING_TOL) if b > 0 else np.zeros_like(zero)
    xs = np.where(zero | sing, 0.5, x)
    num = np.sin(np.pi * xs * (1 - b)) + 4 * b * xs * np.cos(np.pi * xs * (1 + b))
    den = np.pi * xs * (1 - (4 * b * xs) ** 2)
    out = num / den
    out = np.where(zero, 1.0 + b * (4.0 / np.pi - 1.0), out)
    if b > 0:
        edge = b / np.sqrt(2.0) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * b))
                                   + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b)))
        out = np.where(sing, edge, out)
    return out[()] if out.ndim == 0 else out


def rx_filter_taps(rolloff: float, span: int = RRC_SPAN) -> np.ndarray:
    """Receive RRC sampled at the symbol rate over ``[-span, span]``, unit energy."""
    taps = root_raised_cosine(np.arange(-span, span + 1), rolloff)
    return taps / np.linalg.norm(taps)


def max_doppler(carrier_hz: float, velocity_kmh: float) -> float:
    return carrier_hz * (velocity_kmh / 3.6) / SPEED_OF_LIGHT


def default_tap_count(tau_max: float, Ts: float) -> int:
    """Channel memory ``P`` covering the delay spread plus filter tails."""
    return int(np.ceil(tau_max / Ts - 1e-9)) + RRC_SPAN + 1


@dataclass(frozen=True)
class ChannelRealization:
    """``L`` propagation paths: complex gain, delay (s), Doppler (Hz)."""

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gains, dtype=complex))
        d = np.atleast_1d(np.asarray(self.delays, dtype=float))
        v = np.atleast_1d(np.asarray(self.dopplers, dtype=float))
        if not (g.shape == d.shape == v.shape) or g.ndim != 1:
            raise ConfigError("gains, delays and dopplers must be equal-length vectors")
        if np.any(d < 0):
            raise ConfigError("path delays must be non-negative")
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "dopplers", v)

    @property
    def n_paths(self) -> int:
        return len(self.gains)

    def doppler_split(self, N: int, T: float):
        """Integer Doppler index and fractional part in (-0.5, 0.5]."""
        x = self.dopplers * N * T
        k = np.ceil(x - 0.5).astype(np.int64)
        return k, x - k

    def to_dict(self) -> dict:
        return {
            "gains_re": self.gains.real.tolist(),
            "gains_im": self.gains.imag.tolist(),
            "delays": self.delays.tolist(),
            "dopplers": self.dopplers.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelRealization":
        return cls(np.array(d["gains_re"]) + 1j * np.array(d["gains_im"]),
                   np.array(d["delays"]), np.array(d["dopplers"]))


def sample_channel(n_paths: int, v_max: float, Ts: float, rng: np.random.Generator,
                   tau_max: float | None = None) -> ChannelRealization:
    """Draw a random realization.

    Gains are i.i.d. CN(0, 1/L), Dopplers ``v_max * cos(theta)`` with uniform
    ``theta``, the first delay is 0 and the others uniform on ``(0, tau_max]``
    (default ``4 * Ts``), off the sampling grid.
    """
    if n_paths < 1:
        raise ConfigError("need at least one path")
    tau_max = 4.0 * Ts if tau_max is None else tau_max
    gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2 * n_paths)
    theta = rng.uniform(-np.pi, np.pi, n_paths)
    dopplers = v_max * np.cos(theta)
    delays = np.zeros(n_paths)
    delays[1:] = tau_max - rng.uniform(0.0, tau_max, n_paths - 1)
    return ChannelRealization(gains, delays, dopplers)


def discretize(ch: ChannelRealization, M: int, N: int, delta_f: float, P: int,
               rolloff: float) -> np.ndarray:
    """Time-varying taps ``h[u, p]``, shape ``(M*N, P)``."""
    Ts = 1.0 / (M * delta_f)
    if np.any(ch.delays > (P - 1) * Ts * (1 + 1e-12)):
        raise ConfigError(f"P={P} taps do not cover max delay {ch.delays.max() / Ts:.3f} Ts")
    u = np.arange(M * N)[:, None, None]
    p = np.arange(P)[None, :, None]
    pulse = raised_cosine(p * Ts - ch.delays, rolloff, Ts)
    rot = np.exp(2j * np.pi * ch.dopplers * (u - p) * Ts)
    return np.sum(ch.gains * pulse * rot, axis=-1)


def colored_noise(n: int, noise_var: float, rolloff: float, rng: np.random.Generator) -> np.ndarray:
    """White CN(0, noise_var) passed through the unit-energy receive RRC."""
    taps = rx_filter_taps(rolloff)
    w = np.sqrt(noise_var / 2) * (rng.standard_normal(n + len(taps) - 1)
                                  + 1j * rng.standard_normal(n + len(taps) - 1))
    return np.convolve(w, taps, mode="valid")


def apply(s_cp: np.ndarray, taps: np.ndarray, cp_len: int, noise_var: float = 0.0,
          rolloff: float = 0.4, rng: np.random.Generator | None = None) -> np.ndarray:
    """Pass a CP-extended signal through the channel and discard the guard.

    Returns the ``M*N`` samples ``r[u] = sum_p h[u, p] s[[u - p]_MN] + n[u]``.
    """
    s_cp = np.asarray(s_cp)
    n_out, P = taps.shape
    if len(s_cp) != n_out + cp_len:
        raise ConfigError(f"signal length {len(s_cp)} != {n_out} + CP {cp_len}")
    if cp_len < P - 1:
        raise ConfigError(f"CP length {cp_len} shorter than channel memory {P - 1}")
    idx = cp_len + np.arange(n_out)[:, None] - np.arange(P)[None, :]
    r = np.sum(taps * s_cp[idx], axis=1)
    if noise_var > 0:
        if rng is None:
            raise ConfigError("an RNG is required when noise_var > 0")
        r = r + colored_noise(n_out, noise_var, rolloff, rng)
    return r


def perturb_csi(ch: ChannelRealization, eps: float, rng: np.random.Generator) -> ChannelRealization:
    """Imperfect CSI: bounded additive errors with ``|err| <= eps * |true|`` per parameter."""
    if eps < 0:
        raise ConfigError("eps must be non-negative")
    if eps == 0:
        return replace(ch)
    L = ch.n_paths
    dh = eps * np.abs(ch.gains) * rng.uniform(0, 1, L) * np.exp(2j * np.pi * rng.uniform(0, 1, L))
    dv = eps * np.abs(ch.dopplers) * rng.uniform(0, 1, L) * rng.choice([-1.0, 1.0], L)
    dt = eps * np.abs(ch.delays) * rng.uniform(0, 1, L) * rng.choice([-1.0, 1.0], L)
    return ChannelRealization(ch.gains + dh, np.maximum(ch.delays + dt, 0.0), ch.dopplers + dv)
