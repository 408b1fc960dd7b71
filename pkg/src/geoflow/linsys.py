"""Sparse saddle-point systems and their solution.

All schemes in the package produce systems of the form

    [ s K    B  ] [kappa]   [r1]
    [ B^T   -S  ] [  X  ] = [r2]

with scalar unknowns first and position components interleaved per node.
``K`` is a scalar stiffness or lumped mass, ``B`` couples the scalar field
to the weighted vertex normals and ``S`` is a (possibly anisotropic) vector
stiffness. The matrix is symmetric and indefinite.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, SingularSystem

DEFAULT_REL_TOL = 1e-12


class SparseSystem:
    """Triplet-assembled linear system ``A x = b``.

    Duplicate triplets are summed when the system is finalized.
    """

    def __init__(self, dim, rows=(), cols=(), vals=(), rhs=None):
        self.dim = int(dim)
        self._rows = [np.asarray(rows, dtype=np.int64)]
        self._cols = [np.asarray(cols, dtype=np.int64)]
        self._vals = [np.asarray(vals, dtype=float)]
        self.rhs = np.zeros(self.dim) if rhs is None else np.asarray(rhs, dtype=float)
        if self.rhs.shape != (self.dim,):
            raise DimensionMismatch(f"rhs has shape {self.rhs.shape}, expected ({self.dim},)")
        self._matrix = None

    @classmethod
    def from_matrix(cls, A, rhs):
        coo = sp.coo_matrix(A)
        if coo.shape[0] != coo.shape[1]:
            raise DimensionMismatch(f"matrix is not square: {coo.shape}")
        return cls(coo.shape[0], coo.row, coo.col, coo.data, rhs)

    def add(self, rows, cols, vals):
        if self._matrix is not None:
            raise RuntimeError("system already finalized")
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
        if rows.size and (rows.min() < 0 or rows.max() >= self.dim or cols.min() < 0 or cols.max() >= self.dim):
            raise IndexError("triplet index out of range")
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(np.atleast_1d(np.asarray(vals, dtype=float)))

    @property
    def matrix(self):
        if self._matrix is None:
            r = np.concatenate(self._rows)
            c = np.concatenate(self._cols)
            v = np.concatenate(self._vals)
            A = sp.csc_matrix((v, (r, c)), shape=(self.dim, self.dim))
            A.sum_duplicates()
            A.sort_indices()
            self._matrix = A
        return self._matrix

    def finalize(self):
        self.matrix
        return self

    def triplets(self):
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def dump(self, path):
        """Write ``dim``, the triplets and the right-hand side as plain text."""
        r, c, v = self.triplets()
        with open(path, "w") as fh:
            fh.write(f"{self.dim} {len(v)}\n")
            for i, j, a in zip(r.tolist(), c.tolist(), v.tolist()):
                fh.write(f"{i} {j} {a!r}\n")
            for b in self.rhs.tolist():
                fh.write(f"{b!r}\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            dim, nnz = map(int, fh.readline().split())
            trip = np.loadtxt(fh, max_rows=nnz, ndmin=2) if nnz else np.zeros((0, 3))
            rhs = np.loadtxt(fh, ndmin=1)
        return cls(dim, trip[:, 0].astype(int), trip[:, 1].astype(int), trip[:, 2], rhs)


def _pivot_ratio(lu):
    d = np.abs(lu.U.diagonal())
    if d.size == 0:
        return 1.0
    return float(d.min() / d.max()) if d.max() > 0 else 0.0


def solve(system, rel_tol=DEFAULT_REL_TOL, pivot_tol=1e-13):
    """Solve a finalized system with SuperLU (deterministic column ordering).

    Up to three steps of iterative refinement are applied until
    ``||Ax - b|| <= rel_tol (||A|| ||x|| + ||b||)``. Raises
    :class:`SingularSystem` when the factorization breaks down or a pivot is
    negligible relative to the largest one.
    """
    if not 0.0 < rel_tol <= 1e-6:
        raise ValueError("rel_tol must lie in (0, 1e-6]")
    A = system.matrix
    b = system.rhs
    try:
        lu = spla.splu(A, permc_spec="COLAMD", options={"SymmetricMode": False})
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    if _pivot_ratio(lu) < pivot_tol:
        raise SingularSystem(f"negligible pivot (ratio {_pivot_ratio(lu):.3e})")
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    normA = spla.norm(A, np.inf)
    for _ in range(3):
        r = b - A @ x
        if np.linalg.norm(r, np.inf) <= rel_tol * (normA * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf)):
            break
        x = x + lu.solve(r)
    else:
        r = b - A @ x
        if np.linalg.norm(r, np.inf) > rel_tol * (normA * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf)):
            raise SingularSystem("residual tolerance not met after refinement")
    return x


def saddle_system(s, K, B, S, r1, r2, extra=None):
    """Build ``[[s K, B], [B^T, -S]]`` (plus optional bordering) as a SparseSystem.

    ``extra`` is ``(c, d, r3)`` appending one row/column ``[c^T, 0, d]``
    coupled to the scalar block, used for mean-value constraints.
    """
    n = K.shape[0]
    if B.shape[0] != n or S.shape[0] != B.shape[1]:
        raise DimensionMismatch("incompatible saddle blocks")
    blocks = [[s * K if s != 0.0 else None, B], [B.T, -S]]
    rhs = [r1, r2]
    if extra is not None:
        c, d, r3 = extra
        c = sp.csr_matrix(np.asarray(c, dtype=float).reshape(-1, 1))
        blocks[0].append(c)
        blocks[1].append(None)
        blocks.append([c.T, None, sp.csr_matrix([[d]])])
        rhs.append(np.atleast_1d(r3))
    A = sp.bmat(blocks, format="coo")
    return SparseSystem.from_matrix(A, np.concatenate(rhs))
