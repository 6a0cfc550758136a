"""Discrete bilinear form, operator and norms for the nonlocal operator on a grid.

Conventions.  With k_ij = K(node_j^-1 node_i) vol_i vol_j the form counts
ordered pairs of the region S = all pairs minus exterior-exterior pairs::

    u^T A v = sum_{(i, j) ordered in S} (u_i - u_j)(v_i - v_j) k_ij
            = sum_{i < j}                2 (u_i - u_j)(v_i - v_j) k_ij

and the discrete operator is (L u)_i = sum_j (u_j - u_i) K(node_j^-1 node_i) vol_j
at interior nodes, so that v^T A u = -2 sum_i v_i vol_i (L u)_i for v supported
inside.  Pairs closer than ``delta`` (Koranyi distance) are dropped everywhere.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import hgroup
from .errors import SingularityError, UsageError
from .kernels import KernelSpec, fractional_kernel

__all__ = [
    "StiffnessForm", "assemble_stiffness", "form_from_matrix", "apply_operator",
    "z0_norm", "gagliardo_seminorm", "lq_norm", "duality_pairing", "duality_residual",
    "default_delta", "write_matrix_coo", "critical_exponent", "quadratic_forms",
]

_BLOCK_BUDGET = 2_000_000  # offsets per row block, fixed so reductions do not depend on threads


def critical_exponent(Q, s):
    """Q* = 2Q / (Q - 2s)."""
    return 2.0 * Q / (Q - 2.0 * s)


def default_delta(grid):
    return 0.5 * grid.h if grid.h is not None else 0.0


@dataclass(frozen=True, eq=False)
class StiffnessForm:
    matrix: sp.csr_matrix
    grid: object
    kernel: Optional[KernelSpec] = None
    delta: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.matrix.shape[0]

    def apply(self, u):
        return self.matrix @ np.asarray(u, dtype=float)

    def form(self, u, v):
        return float(np.dot(np.asarray(u, dtype=float), self.apply(v)))

    def interior_block(self):
        """Dense A restricted to interior rows and columns."""
        if "B" not in self._cache:
            I = self.grid.interior_idx
            self._cache["B"] = self.matrix[I][:, I].toarray()
        return self._cache["B"]

    def coupling_block(self):
        """Dense A restricted to interior rows and exterior columns."""
        if "C" not in self._cache:
            g = self.grid
            self._cache["C"] = self.matrix[g.interior_idx][:, g.exterior_idx].toarray()
        return self._cache["C"]


def form_from_matrix(matrix, grid):
    """Wrap an explicit symmetric matrix (used for hand-built test problems)."""
    m = sp.csr_matrix(np.asarray(matrix, dtype=float) if not sp.issparse(matrix) else matrix)
    if m.shape != (grid.n, grid.n):
        raise UsageError(f"matrix shape {m.shape} does not match {grid.n} nodes")
    if (abs(m - m.T) > 0).nnz:
        raise UsageError("matrix must be symmetric")
    return StiffnessForm(m, grid)


def _block_rows(n_rows, n_cols, d):
    b = max(1, _BLOCK_BUDGET // max(1, n_cols * d))
    return [(a, min(a + b, n_rows)) for a in range(0, n_rows, b)]


def _pair_kernel(K, grid, rows, cols, delta, check_zero=True):
    """Kernel values K(node_j^-1 node_i) for i in rows, j in cols, with exclusions zeroed."""
    P = grid.nodes[rows]
    C = grid.nodes[cols]
    z = hgroup.mul(hgroup.inv(C)[None, :, :], P[:, None, :])
    r = hgroup.norm(z)
    same = rows[:, None] == cols[None, :]
    keep = ~same & (r >= delta)
    if check_zero and np.any(keep & (r == 0.0)):
        i, j = np.argwhere(keep & (r == 0.0))[0]
        raise SingularityError(f"retained pair ({rows[i]}, {cols[j]}) has zero distance")
    out = np.zeros_like(r)
    out[keep] = K.radial(r[keep])
    return out


def _check_kernel(grid, K):
    if K.N != grid.N:
        raise UsageError(f"kernel on H^{K.N} used with a grid on H^{grid.N}")


def assemble_stiffness(grid, K, delta=None, threads=1):
    """Assemble the symmetric form matrix over all retained nodes.

    Row blocks of interior nodes are processed independently (optionally on a
    thread pool); block boundaries depend only on the grid size, and block
    results are combined in block order, so the output is bit-identical for
    any thread count.
    """
    _check_kernel(grid, K)
    delta = default_delta(grid) if delta is None else float(delta)
    if delta < 0:
        raise UsageError("delta must be nonnegative")
    n = grid.n
    I = grid.interior_idx
    E = grid.exterior_idx
    cols = np.arange(n)
    vol = grid.volumes
    blocks = _block_rows(I.size, n, grid.nodes.shape[1])

    def work(span):
        rows = I[span[0]:span[1]]
        W = _pair_kernel(K, grid, rows, cols, delta) * vol[rows][:, None] * vol[None, :]
        return rows, W

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            results = list(ex.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    wmax = max((float(W.max()) for _, W in results if W.size), default=0.0)
    cut = 1e-16 * wmax
    r_idx, c_idx, vals = [], [], []
    ext_diag = np.zeros(E.size)
    for rows, W in results:
        W = np.where(W > cut, W, 0.0)
        ii, jj = np.nonzero(W)
        w = W[ii, jj]
        r_idx += [rows[ii]]
        c_idx += [jj]
        vals += [-2.0 * w]
        r_idx += [rows]
        c_idx += [rows]
        vals += [2.0 * W.sum(axis=1)]
        # mirror interior-exterior couplings into exterior rows
        WE = W[:, E]
        ie, je = np.nonzero(WE)
        r_idx += [E[je]]
        c_idx += [rows[ie]]
        vals += [-2.0 * WE[ie, je]]
        ext_diag += 2.0 * WE.sum(axis=0)
    r_idx += [E]
    c_idx += [E]
    vals += [ext_diag]
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(r_idx), np.concatenate(c_idx))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    A = ((A + A.T) * 0.5).tocsr()
    A.eliminate_zeros()
    return StiffnessForm(A, grid, K, delta)


def apply_operator(grid, K, u, delta=None):
    """(L u)_i = sum_{j != i, |node_j^-1 node_i| >= delta} (u_j - u_i) K vol_j at interior i.

    Exterior entries of the result are zero.
    """
    _check_kernel(grid, K)
    delta = default_delta(grid) if delta is None else float(delta)
    u = np.asarray(u, dtype=float)
    out = np.zeros(grid.n)
    I = grid.interior_idx
    cols = np.arange(grid.n)
    for a, b in _block_rows(I.size, grid.n, grid.nodes.shape[1]):
        rows = I[a:b]
        Kb = _pair_kernel(K, grid, rows, cols, delta)
        out[rows] = ((u[None, :] - u[rows][:, None]) * Kb * grid.volumes[None, :]).sum(axis=1)
    return out


def _require_z0(grid, u, name="u"):
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n,):
        raise UsageError(f"{name} has shape {u.shape}, expected ({grid.n},)")
    if grid.n_exterior and np.any(u[grid.exterior_idx] != 0.0):
        raise UsageError(f"{name} must vanish on exterior nodes")
    return u


def z0_norm(A, u):
    u = _require_z0(A.grid, u)
    return float(np.sqrt(max(A.form(u, u), 0.0)))


def gagliardo_seminorm(grid, u, s, delta=None):
    """Discrete W^{s,2} seminorm with weight |node_j^-1 node_i|^-(Q+2s) over ordered pairs of S."""
    u = _require_z0(grid, u)
    delta = default_delta(grid) if delta is None else float(delta)
    K = fractional_kernel(s, grid.N)
    I = grid.interior_idx
    cols = np.arange(grid.n)
    vol = grid.volumes
    ext = ~grid.interior
    total = 0.0
    for a, b in _block_rows(I.size, grid.n, grid.nodes.shape[1]):
        rows = I[a:b]
        W = _pair_kernel(K, grid, rows, cols, delta) * vol[rows][:, None] * vol[None, :]
        d2 = (u[rows][:, None] - u[None, :]) ** 2
        # interior-exterior pairs appear once here but twice as ordered pairs
        total += float((W * d2 * np.where(ext, 2.0, 1.0)[None, :]).sum())
    return float(np.sqrt(total))


def quadratic_forms(grid, K, U, delta=None):
    """u^T A u for every column u of U without assembling A.

    Streams interior row blocks; uses sum_{i in I, j} k_ij (u_i - u_j)^2 w_j
    with w_j = 2 for exterior j, which counts every ordered pair of S once.
    Columns must vanish on exterior nodes.
    """
    _check_kernel(grid, K)
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.shape[0] != grid.n:
        raise UsageError(f"fields have {U.shape[0]} rows, expected {grid.n}")
    if grid.n_exterior and np.any(U[grid.exterior_idx] != 0.0):
        raise UsageError("fields must vanish on exterior nodes")
    delta = default_delta(grid) if delta is None else float(delta)
    vol = grid.volumes
    wgt = np.where(grid.interior, 1.0, 2.0)
    I = grid.interior_idx
    cols = np.arange(grid.n)
    Uw, U2w = U * wgt[:, None], U * U * wgt[:, None]
    total = np.zeros(U.shape[1])
    for a, b in _block_rows(I.size, grid.n, grid.nodes.shape[1]):
        rows = I[a:b]
        W = _pair_kernel(K, grid, rows, cols, delta) * vol[rows][:, None] * vol[None, :]
        Ur = U[rows]
        total += np.sum(Ur * Ur * (W @ wgt)[:, None] - 2.0 * Ur * (W @ Uw) + W @ U2w, axis=0)
    return total


def lq_norm(grid, u, q):
    if not q >= 1:
        raise UsageError("q must be at least 1")
    u = np.asarray(u, dtype=float)
    I = grid.interior_idx
    return float(np.sum(np.abs(u[I]) ** q * grid.volumes[I]) ** (1.0 / q))


def duality_pairing(grid, K, u, v, delta=None):
    """sum_i u_i vol_i sum_j (2 v_i - v(xi_i xt) - v(xi_i xt^-1)) K(xt) vol_j on lattice offsets.

    The offsets xt run over node_i^-1 node_j (so xi_i xt = node_j) and over
    node_j^-1 node_i (so xi_i xt^-1 = node_j); pairs closer than delta are
    dropped.  Exterior-exterior pairs contribute nothing because v vanishes there.
    """
    _check_kernel(grid, K)
    u = np.asarray(u, dtype=float)
    v = _require_z0(grid, v, "v")
    delta = default_delta(grid) if delta is None else float(delta)
    vol = grid.volumes
    total = 0.0
    all_cols = np.arange(grid.n)
    for rows_all, cols in ((grid.interior_idx, all_cols), (grid.exterior_idx, grid.interior_idx)):
        for a, b in _block_rows(rows_all.size, cols.size, grid.nodes.shape[1]):
            rows = rows_all[a:b]
            P = grid.nodes[rows][:, None, :]
            C = grid.nodes[cols][None, :, :]
            plus = hgroup.mul(hgroup.inv(P), C)
            minus = hgroup.mul(hgroup.inv(C), P)
            r_plus, r_minus = hgroup.norm(plus), hgroup.norm(minus)
            off = rows[:, None] != cols[None, :]
            k_plus = np.where(off & (r_plus >= delta), K.radial(np.where(r_plus > 0, r_plus, 1.0)), 0.0)
            k_minus = np.where(off & (r_minus >= delta), K.radial(np.where(r_minus > 0, r_minus, 1.0)), 0.0)
            diff = v[rows][:, None] - v[cols][None, :]
            inner = (diff * (k_plus + k_minus) * vol[cols][None, :]).sum(axis=1)
            total += float(np.sum(u[rows] * vol[rows] * inner))
    return total


def duality_residual(grid, K, u, v, delta=None, form=None):
    """|a(u, v) - second-difference pairing| on identical retained pairs."""
    delta = default_delta(grid) if delta is None else float(delta)
    form = assemble_stiffness(grid, K, delta) if form is None else form
    _require_z0(grid, v, "v")
    return abs(form.form(u, v) - duality_pairing(grid, K, u, v, delta))


def write_matrix_coo(A, path):
    m = A.matrix.tocoo()
    order = np.lexsort((m.col, m.row))
    with open(path, "w", encoding="utf-8") as fh:
        for k in order:
            fh.write(f"{m.row[k]} {m.col[k]} {float(m.data[k])!r}\n")
