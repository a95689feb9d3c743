"""CSR sparse matrices, RCM reordering and reusable direct factorizations.

The pressure Poisson matrix of a run is factorized once and the factors are
reused for every time step, so the cost of the factorization is amortized and
each step only pays for the (much cheaper) back substitution. Matrices are
reordered with reverse Cuthill-McKee before factorization to keep fill-in low.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class FactorizationError(RuntimeError):
    """Raised when a matrix cannot be factorized (e.g. zero pivot)."""


@dataclass
class CsrMatrix:
    """Compressed-sparse-row matrix with explicit index arrays.

    Invariants: ``row_offsets`` is monotone with ``row_offsets[0] == 0`` and
    ``row_offsets[-1] == len(values)``; column indices are sorted and unique
    within each row.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @classmethod
    def from_scipy(cls, mat) -> "CsrMatrix":
        m = sp.csr_matrix(mat)
        m.sort_indices()
        m.sum_duplicates()
        return cls(m.shape[0], m.shape[1],
                   m.indptr.copy(), m.indices.copy(), m.data.copy())

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.n_rows, self.n_cols))

    def validate(self) -> None:
        off = self.row_offsets
        if off[0] != 0 or off[-1] != len(self.values):
            raise ValueError("row_offsets do not bracket the value array")
        if np.any(np.diff(off) < 0):
            raise ValueError("row_offsets not monotone")
        for i in range(self.n_rows):
            cols = self.col_indices[off[i]:off[i + 1]]
            if cols.size and (np.any(np.diff(cols) <= 0)
                              or cols[0] < 0 or cols[-1] >= self.n_cols):
                raise ValueError(f"row {i}: column indices not sorted/unique/in range")


def _as_scipy(mat) -> sp.csr_matrix:
    if isinstance(mat, CsrMatrix):
        return mat.to_scipy()
    return sp.csr_matrix(mat)


def rcm_order(pattern, dense_row_cutoff: float = 0.2) -> np.ndarray:
    """Reverse Cuthill-McKee permutation of a (symmetrized) sparsity pattern.

    Nodes are visited per connected component starting from its lowest-degree
    node (ties to the smaller index); neighbors are enqueued sorted by
    (degree, index), and the final ordering is reversed. Rows denser than
    ``dense_row_cutoff * n`` (e.g. a Lagrange-multiplier border) are excluded
    from the BFS and appended at the end, where they cause the least fill.

    Returns ``perm`` such that ``A[perm][:, perm]`` has reduced bandwidth;
    the permutation is deterministic.
    """
    a = _as_scipy(pattern)
    if a.shape[0] != a.shape[1]:
        raise ValueError("rcm_order requires a square pattern")
    n = a.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    pat = a + a.T  # symmetrize
    pat = sp.csr_matrix(pat)
    pat.sort_indices()
    indptr, indices = pat.indptr, pat.indices
    degree = np.diff(indptr)

    dense_cut = max(32, int(dense_row_cutoff * n))
    dense = np.flatnonzero(degree > dense_cut) if n > 64 else np.empty(0, np.int64)
    skip = np.zeros(n, dtype=bool)
    skip[dense] = True

    visited = skip.copy()
    components = []
    # min-degree start node per component, smallest index on ties
    by_degree = np.lexsort((np.arange(n), degree))
    for start in by_degree:
        if visited[start]:
            continue
        visited[start] = True
        queue = [start]
        head = 0
        while head < len(queue):
            node = queue[head]
            head += 1
            nbrs = indices[indptr[node]:indptr[node + 1]]
            nbrs = nbrs[~visited[nbrs]]
            if nbrs.size:
                visited[nbrs] = True
                nbrs = nbrs[np.lexsort((nbrs, degree[nbrs]))]
                queue.extend(nbrs.tolist())
        components.append(queue)
    # Cuthill-McKee lists components back to front so the global reversal
    # leaves isolated nodes (empty pattern) in identity order.
    cm = [node for comp in reversed(components) for node in comp]
    perm = np.array(cm[::-1] + dense.tolist(), dtype=np.int64)
    return perm


def bandwidth(pattern) -> int:
    """Maximum |i - j| over stored entries (0 for diagonal/empty matrices)."""
    a = _as_scipy(pattern).tocoo()
    if a.nnz == 0:
        return 0
    return int(np.max(np.abs(a.row - a.col)))


class Factorization:
    """Reusable direct (or iterative-fallback) solver for a square matrix.

    ``solve`` may be called repeatedly and concurrently for different
    right-hand sides; the factors are immutable after construction.
    """

    def __init__(self, matrix, perm, method, handle, ilu=None):
        self.n = matrix.shape[0]
        self.perm = perm
        self.method = method
        self._matrix = matrix
        self._handle = handle
        self._ilu = ilu
        self._iperm = np.empty_like(perm)
        self._iperm[perm] = np.arange(len(perm))

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"rhs length {b.shape[0]} != matrix size {self.n}")
        if self.method == "lu":
            return self._handle.solve(b[self.perm])[self._iperm]
        x, info = spla.gmres(self._matrix, b, rtol=1e-12, atol=0.0,
                             restart=200, maxiter=2000, M=self._ilu)
        if info != 0:
            raise FactorizationError(f"GMRES did not converge (info={info})")
        return x


def _name_zero_pivot_row(a: sp.csr_matrix) -> str:
    empty = np.flatnonzero(np.diff(a.indptr) == 0)
    if empty.size:
        return f"row {empty[0]} is structurally empty"
    diag = a.diagonal()
    zero = np.flatnonzero(diag == 0.0)
    if zero.size:
        return f"zero diagonal at row {zero[0]}"
    return "pivot row not identified"


def factorize(matrix, use_rcm: bool = True, iterative_threshold: int | None = None,
              pivot_threshold: float = 1.0) -> Factorization:
    """Factorize a square sparse matrix for repeated solves.

    Direct sparse LU (threshold partial pivoting) with RCM pre-ordering by
    default; above ``iterative_threshold`` rows an ILU-preconditioned
    restarted-GMRES fallback is returned instead, which keeps very large
    cases runnable without a full factorization.
    """
    a = _as_scipy(matrix).tocsr()
    if a.shape[0] != a.shape[1]:
        raise FactorizationError("matrix must be square")
    n = a.shape[0]
    if iterative_threshold is not None and n > iterative_threshold:
        ilu = spla.spilu(a.tocsc(), drop_tol=1e-5, fill_factor=10.0)
        prec = spla.LinearOperator(a.shape, ilu.solve)
        return Factorization(a, np.arange(n), "gmres", None, ilu=prec)

    perm = rcm_order(a) if use_rcm else np.arange(n)
    pa = a[perm[:, None], perm].tocsc()
    try:
        handle = spla.splu(pa, permc_spec="NATURAL",
                           diag_pivot_thresh=pivot_threshold)
    except RuntimeError as exc:
        raise FactorizationError(
            f"sparse LU failed ({exc}); {_name_zero_pivot_row(a)}") from exc
    return Factorization(a, perm, "lu", handle)


def solve(factorization: Factorization, b: np.ndarray) -> np.ndarray:
    """Back-substitute a right-hand side against stored factors."""
    return factorization.solve(b)


def write_matrix_market(path, matrix) -> None:
    scipy.io.mmwrite(str(path), _as_scipy(matrix))


def read_matrix_market(path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))
