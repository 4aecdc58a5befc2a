"""Sparse delay-Doppler effective channel ``y = H x + v``.

Vectorisation: ``x[k*M + l] = X[l, k]`` (delay index fastest).
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import otfs_modem
from .channel_model import ChannelRealization, apply, discretize, raised_cosine

_SING_TOL = 1e-12
DUST = 1e-14


def theta(q, beta, N: int):
    """Doppler leakage kernel ``sum_n exp(j 2 pi (q + beta) n / N)`` in closed form.

    ``q`` must be integer; the removable singularity at ``q + beta = 0 (mod N)``
    evaluates to ``N``.
    """
    q = np.asarray(q)
    beta = np.asarray(beta, dtype=float)
    num = np.exp(2j * np.pi * beta) - 1.0  # exp(j 2 pi q) == 1 for integer q
    den = np.exp(2j * np.pi * (q + beta) / N) - 1.0
    sing = np.abs(den) < _SING_TOL
    out = np.where(sing, N + 0j, num / np.where(sing, 1.0, den))
    return out[()] if out.ndim == 0 else out


def xi(l, p, k_nu, beta, M: int, N: int):
    return np.exp(2j * np.pi * (np.asarray(l) - p) / M * (k_nu + beta) / N)


def phi(k, q, k_nu, N: int):
    return np.exp(-2j * np.pi * np.mod(np.asarray(k) - k_nu + q, N) / N)


def gamma(k, l, p, q, k_nu, beta, M: int, N: int):
    """Delay-Doppler coupling coefficient for one path/tap/leakage index."""
    base = xi(l, p, k_nu, beta, M, N) * theta(q, beta, N) / N
    # taps longer than a symbol (p > M) reach back more than one symbol
    wraps = -np.floor_divide(np.asarray(l) - p, M)
    return base * phi(k, q, k_nu, N) ** wraps


@dataclass(frozen=True, eq=False)
class SparseChannelMatrix:
    """Square sparse matrix with row (CSR) and column adjacency.

    Edges are numbered in CSR order; ``col_order`` lists edge numbers
    grouped by column, delimited by ``col_indptr``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    M: int
    N: int

    @classmethod
    def from_scipy(cls, A, M: int, N: int) -> "SparseChannelMatrix":
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        A.sort_indices()
        return cls(A.indptr.astype(np.int64), A.indices.astype(np.int64),
                   A.data.astype(complex), M, N)

    @property
    def size(self) -> int:
        return self.M * self.N

    @property
    def nnz(self) -> int:
        return len(self.data)

    @cached_property
    def edge_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.size), np.diff(self.indptr))

    @cached_property
    def col_order(self) -> np.ndarray:
        return np.argsort(self.indices, kind="stable")

    @cached_property
    def col_indptr(self) -> np.ndarray:
        counts = np.bincount(self.indices, minlength=self.size)
        return np.concatenate([[0], np.cumsum(counts)])

    def row(self, d: int):
        sl = slice(self.indptr[d], self.indptr[d + 1])
        return self.indices[sl], self.data[sl]

    def col(self, c: int):
        e = self.col_order[self.col_indptr[c]:self.col_indptr[c + 1]]
        return self.edge_rows[e], self.data[e]

    @property
    def max_row_nnz(self) -> int:
        return int(np.diff(self.indptr).max(initial=0))

    @property
    def max_col_nnz(self) -> int:
        return int(np.diff(self.col_indptr).max(initial=0))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.size, self.size))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_scipy() @ x

    def dump_triplets(self, path) -> None:
        """Write ``row col re im`` lines, one per stored entry."""
        with open(path, "w") as fh:
            fh.write(f"# {self.M} {self.N}\n")
            for r, c, v in zip(self.edge_rows, self.indices, self.data):
                fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")

    @classmethod
    def load_triplets(cls, path) -> "SparseChannelMatrix":
        with open(path) as fh:
            M, N = (int(v) for v in fh.readline().lstrip("#").split())
            arr = np.loadtxt(fh, ndmin=2)
        if arr.size == 0:
            arr = np.zeros((0, 4))
        A = sp.coo_matrix((arr[:, 2] + 1j * arr[:, 3], (arr[:, 0].astype(int), arr[:, 1].astype(int))),
                          shape=(M * N, M * N))
        return cls.from_scipy(A, M, N)


def build_H(ch: ChannelRealization, M: int, N: int, delta_f: float, rolloff: float,
            P: int) -> SparseChannelMatrix:
    """Closed-form delay-Doppler channel matrix for a path-level realization."""
    Ts = 1.0 / (M * delta_f)
    T = M * Ts
    k_nu, beta = ch.doppler_split(N, T)
    p = np.arange(P)[:, None, None, None]
    s = np.arange(N)[None, :, None, None]   # Doppler shift of the source column
    l = np.arange(M)[None, None, :, None]
    k = np.arange(N)[None, None, None, :]
    pulse = raised_cosine(np.arange(P)[:, None] * Ts - ch.delays, rolloff, Ts)  # (P, L)

    # coef[p, s, l, k] multiplies X[[l - p]_M, [k + s]_N] in Y[l, k]
    coef = np.zeros((P, N, M, N), dtype=complex)
    for i in range(ch.n_paths):
        q = np.mod(s + k_nu[i], N)  # leakage index reaching source shift s
        g = gamma(k, l, p, q, k_nu[i], beta[i], M, N)
        coef += ch.gains[i] * pulse[:, i][:, None, None, None] * g

    rows = np.broadcast_to(k * M + l, coef.shape)
    cols = np.broadcast_to(np.mod(k + s, N) * M + np.mod(l - p, M), coef.shape)
    keep = np.abs(coef) >= DUST
    A = sp.coo_matrix((coef[keep], (rows[keep], cols[keep])), shape=(M * N, M * N))
    return SparseChannelMatrix.from_scipy(A, M, N)


def prune(H: SparseChannelMatrix, energy_keep: float = 0.9999) -> SparseChannelMatrix:
    """Per row, keep the fewest largest entries holding ``energy_keep`` of the row energy."""
    if not 0 < energy_keep <= 1:
        raise ValueError("energy_keep must lie in (0, 1]")
    if energy_keep >= 1.0 or H.nnz == 0:
        return H
    rows = H.edge_rows
    e = np.abs(H.data) ** 2
    order = np.lexsort((-e, rows))
    e_sorted = e[order]
    csum = np.cumsum(e_sorted)
    starts = H.indptr[:-1]
    row_base = np.concatenate([[0.0], csum])[starts]
    before = csum - e_sorted - row_base[rows[order]]
    row_tot = np.add.reduceat(e_sorted, starts[np.diff(H.indptr) > 0])
    tot = np.zeros(H.size)
    tot[np.diff(H.indptr) > 0] = row_tot
    needed = before < energy_keep * tot[rows[order]]
    kept = np.sort(order[needed])
    A = sp.csr_matrix((H.data[kept], H.indices[kept], np.concatenate(
        [[0], np.cumsum(np.bincount(rows[kept], minlength=H.size))])), shape=(H.size, H.size))
    return SparseChannelMatrix.from_scipy(A, H.M, H.N)


def impulse_oracle(ch: ChannelRealization, M: int, N: int, delta_f: float, rolloff: float,
                   P: int, cp_len: int | None = None) -> np.ndarray:
    """Dense end-to-end matrix of modulate -> channel -> demodulate, probed column by column."""
    cp_len = P - 1 if cp_len is None else cp_len
    taps = discretize(ch, M, N, delta_f, P, rolloff)
    out = np.empty((M * N, M * N), dtype=complex)
    for c in range(M * N):
        e = np.zeros(M * N, dtype=complex)
        e[c] = 1.0
        s = otfs_modem.modulate(otfs_modem.unvec(e, M, N), cp_len)
        r = apply(s, taps, cp_len)
        out[:, c] = otfs_modem.vec(otfs_modem.demodulate(r, M, N))
    return out
