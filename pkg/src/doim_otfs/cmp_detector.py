"""Customized message passing (CMP) detection over the sparse factor graph.

Observation nodes are the entries of ``y``, variable nodes the entries of
``x``; each stored entry of ``H`` is one edge. Messages live on edges as
``(n_edges, K)`` arrays where ``K`` is the alphabet size. The alphabet is
the constellation followed by the null symbol (last column).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp, softmax

from ._kernels import mp_iteration
from .constellation import Constellation
from .effective_channel import SparseChannelMatrix
from .errors import ConfigError, DimensionError
from .im_codec import FrameLayout, pattern_ranks
from .otfs_modem import unvec

VAR_FLOOR = 1e-12
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class DetectorConfig:
    noise_var: float
    damping: float = 0.4
    rho: float = 0.1
    n_iter_max: int = 10

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ConfigError(f"damping must lie in (0, 1], got {self.damping}")
        if not 0 < self.rho < 1:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if self.n_iter_max < 1:
            raise ConfigError("n_iter_max must be >= 1")
        if self.noise_var < 0:
            raise ConfigError("noise_var must be non-negative")


def augmented_alphabet(constellation: Constellation, with_null: bool = True) -> np.ndarray:
    pts = constellation.points
    return np.concatenate([pts, [0.0]]) if with_null else pts.copy()


@dataclass
class MessageState:
    """Variable-to-observation pmfs and derived per-variable quantities."""

    p_edge: np.ndarray                 # (E, K) p_{c,d}
    log_v: np.ndarray | None = None    # (E, K) normalised log v_{d,c}
    posterior: np.ndarray | None = None
    best: np.ndarray | None = None
    best_eta: float = 0.0
    eta_trace: list = field(default_factory=list)


class FactorGraph:
    """Edge bookkeeping for one channel matrix, shared by all frames using it."""

    def __init__(self, H: SparseChannelMatrix):
        self.H = H
        self.rows = H.edge_rows
        self.cols = H.indices
        self.h = H.data
        self.n = H.size
        E = H.nnz
        # (n, E) incidence, summing edge values into their variable node
        self.col_sum = sp.csr_matrix((np.ones(E), (self.cols, np.arange(E))), shape=(self.n, E))

    @property
    def n_edges(self) -> int:
        return len(self.h)


def init_messages(graph: FactorGraph, alphabet: np.ndarray) -> MessageState:
    K = len(alphabet)
    return MessageState(p_edge=np.full((graph.n_edges, K), 1.0 / K))


def interference_stats(graph: FactorGraph, p_edge: np.ndarray, alphabet: np.ndarray,
                       noise_var: float):
    """Per-edge mean and variance of the Gaussian-approximated interference."""
    mean = p_edge @ alphabet
    second = p_edge @ np.abs(alphabet) ** 2
    hm = graph.h * mean
    var_e = second * np.abs(graph.h) ** 2 - np.abs(hm) ** 2
    mu_row = (np.bincount(graph.rows, hm.real, minlength=graph.n)
              + 1j * np.bincount(graph.rows, hm.imag, minlength=graph.n))
    var_row = np.bincount(graph.rows, var_e, minlength=graph.n)
    mu = mu_row[graph.rows] - hm
    var = np.maximum(var_row[graph.rows] - var_e + noise_var, VAR_FLOOR)
    return mu, var


def observation_update(state: MessageState, y: np.ndarray, graph: FactorGraph,
                       alphabet: np.ndarray, noise_var: float) -> MessageState:
    mu, var = interference_stats(graph, state.p_edge, alphabet, noise_var)
    z = (y[graph.rows] - mu)[:, None] - graph.h[:, None] * alphabet[None, :]
    log_v = -(z.real ** 2 + z.imag ** 2) / var[:, None]
    state.log_v = log_v - logsumexp(log_v, axis=1, keepdims=True)
    return state


def variable_update(state: MessageState, graph: FactorGraph, damping: float) -> MessageState:
    total = graph.col_sum @ state.log_v            # (n, K) log posterior, unnormalised
    extrinsic = total[graph.cols] - state.log_v
    p_new = softmax(extrinsic, axis=1)
    if damping == 1.0:
        state.p_edge = p_new
    else:
        state.p_edge = damping * p_new + (1.0 - damping) * state.p_edge
    state.posterior = softmax(total, axis=1)
    return state


def convergence_indicator(posterior: np.ndarray, rho: float) -> float:
    """Fraction of variables whose largest posterior mass is at least ``1 - rho``."""
    return float(np.mean(posterior.max(axis=1) >= 1.0 - rho))


def update_best(state: MessageState, eta: float) -> MessageState:
    """Keep the posteriors of the best iteration so far.

    The first iteration always seeds the stored solution; later iterations
    replace it only on strict improvement of ``eta``.
    """
    if state.best is None or eta > state.best_eta:
        state.best = state.posterior.copy()
        state.best_eta = eta
    state.eta_trace.append(eta)
    return state


def run_message_passing(y, H: SparseChannelMatrix, alphabet: np.ndarray, config: DetectorConfig,
                        keep_history: bool = False, graph: FactorGraph | None = None,
                        fast: bool = True):
    """Iterate the flooding schedule until ``eta == 1`` or ``n_iter_max``.

    ``fast=False`` runs the numpy step functions instead of the fused kernel.

    Returns the final :class:`MessageState` and, if requested, the list of
    best-so-far posteriors after every iteration.
    """
    y = np.asarray(y)
    if y.shape != (H.size,):
        raise DimensionError(f"y must have length {H.size}, got {y.shape}")
    graph = FactorGraph(H) if graph is None else graph
    state = init_messages(graph, alphabet)
    history = []
    if fast:
        state.log_v = np.empty_like(state.p_edge)
        state.posterior = np.empty((graph.n, len(alphabet)))
        col_edges = graph.H.col_order
        yc = y.astype(complex)
        alph = alphabet.astype(complex)
    for _ in range(config.n_iter_max):
        if fast:
            mp_iteration(yc, graph.H.indptr, graph.cols, graph.h, graph.H.col_indptr, col_edges,
                         alph, config.noise_var, config.damping, VAR_FLOOR,
                         state.p_edge, state.log_v, state.posterior)
        else:
            observation_update(state, y, graph, alphabet, config.noise_var)
            variable_update(state, graph, config.damping)
        eta = convergence_indicator(state.posterior, config.rho)
        update_best(state, eta)
        if keep_history:
            history.append(state.best.copy())
        if eta >= 1.0:
            break
    return state, history


def unit_llr(posterior: np.ndarray) -> np.ndarray:
    """Activity LLR per unit: log mass on the constellation over mass on null."""
    active = np.clip(posterior[:, :-1].sum(axis=1), PROB_FLOOR, 1.0 - PROB_FLOOR)
    null = np.clip(posterior[:, -1], PROB_FLOOR, 1.0 - PROB_FLOOR)
    return np.log(active) - np.log(null)


def block_llr(posterior: np.ndarray, layout: FrameLayout) -> np.ndarray:
    """Mean unit LLR of every block, shape ``(g, N_hat)``."""
    llr = unvec(unit_llr(posterior), layout.M, layout.N)
    return layout.to_tiles(llr).mean(axis=1)


def select_active(block_llrs: np.ndarray, layout: FrameLayout) -> np.ndarray:
    """Pick the ``k_hat`` strongest blocks per subframe, legalised to the codebook.

    Ties go to the lower block index. A top-``k_hat`` choice whose rank falls
    outside the ``2**p1`` codebook is replaced by the legal pattern with the
    largest LLR sum.
    """
    block_llrs = np.asarray(block_llrs, dtype=float)
    order = np.argsort(-block_llrs, axis=1, kind="stable")
    raw = np.sort(order[:, : layout.k_hat], axis=1)
    ranks = pattern_ranks(raw, layout.N_hat, layout.k_hat)
    illegal = ranks >= layout.n_legal
    if np.any(illegal):
        table = layout.legal_patterns
        scores = block_llrs[illegal][:, table].sum(axis=-1)
        raw[illegal] = table[np.argmax(scores, axis=1)]
    return raw


@dataclass
class DetectionResult:
    labels: np.ndarray        # (M, N) constellation labels, -1 on inactive units
    pattern: np.ndarray       # (g, k_hat), empty for plain OTFS
    block_llrs: np.ndarray
    iterations: int
    eta: float
    eta_trace: list
    posterior: np.ndarray     # best-so-far posteriors
    history: list = field(default_factory=list)


def decide(posterior: np.ndarray, layout: FrameLayout, with_null: bool = True):
    """Hard decisions from posteriors: (labels grid, pattern, block LLRs)."""
    Mc = layout.Mc
    labels = unvec(np.argmax(posterior[:, :Mc], axis=1), layout.M, layout.N)
    if not with_null:
        return labels, np.zeros((layout.g, 0), dtype=np.int64), np.zeros((layout.g, 0))
    llrs = block_llr(posterior, layout)
    pattern = select_active(llrs, layout)
    blocks = np.zeros((layout.g, layout.N_hat), dtype=bool)
    blocks[np.arange(layout.g)[:, None], pattern] = True
    mask = layout.from_tiles(np.broadcast_to(blocks[:, None, :], (layout.g, layout.M_hat, layout.N_hat)))
    return np.where(mask, labels, -1), pattern, llrs


def detect(y, H: SparseChannelMatrix, layout: FrameLayout, constellation: Constellation,
           config: DetectorConfig, with_null: bool = True, keep_history: bool = False,
           graph: FactorGraph | None = None) -> DetectionResult:
    """Full CMP receiver.

    ``with_null=False`` is the plain OTFS baseline: the null symbol is removed
    from the alphabet and every unit is decided.
    """
    alphabet = augmented_alphabet(constellation, with_null)
    state, history = run_message_passing(y, H, alphabet, config, keep_history, graph)
    labels, pattern, llrs = decide(state.best, layout, with_null)
    return DetectionResult(labels=labels, pattern=pattern, block_llrs=llrs,
                           iterations=len(state.eta_trace), eta=state.eta_trace[-1],
                           eta_trace=list(state.eta_trace), posterior=state.best,
                           history=history)
