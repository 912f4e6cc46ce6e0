"""Dense linear algebra helpers for small matrices.

Everything in this package works on matrices of size at most a few dozen
rows, so these are thin wrappers over numpy's LAPACK bindings that add the
conventions the rest of the code relies on: a sign-fixed QR factorization,
deterministically ordered eigenvalues, and solve/inverse routines that fail
loudly instead of returning garbage on (numerically) singular input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SingularMatrixError",
    "EigenSet",
    "qr",
    "eigenvalues",
    "solve",
    "inverse",
    "numerical_rank",
]


class SingularMatrixError(ValueError):
    """Raised when a solve/inverse target is singular at working tolerance."""


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


@dataclass(frozen=True)
class EigenSet:
    """Eigenvalues of a real matrix, deterministically ordered.

    Sorted by descending modulus, ties broken by descending real part and
    then descending imaginary part, so conjugate pairs sit next to each
    other and repeated runs produce identical output.
    """

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", v)

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def qr(a) -> tuple[np.ndarray, np.ndarray]:
    """QR factorization with nonnegative diagonal of R.

    Returns (q, r) with a = q r, q orthogonal and diag(r) >= 0.  The sign
    convention makes log(diag(r)) usable directly as Lyapunov increments.
    """
    a = _as_matrix(a)
    q, r = np.linalg.qr(a)
    # flip signs so every diagonal entry of R is nonnegative
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs[np.newaxis, :]
    r = r * signs[:, np.newaxis]
    scale = max(np.abs(a).max(), 1.0)
    if np.min(np.abs(np.diag(r))) <= 1e-13 * scale:
        raise SingularMatrixError("rank-deficient input to qr")
    return q, r


def eigenvalues(a) -> EigenSet:
    """All eigenvalues of a square matrix as an ordered :class:`EigenSet`."""
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("eigenvalues requires a square matrix")
    vals = np.linalg.eigvals(a)
    order = np.lexsort((-vals.imag, -vals.real, -np.abs(vals)))
    return EigenSet(values=vals[order])


def solve(a, b) -> np.ndarray:
    """Solve a x = b with a residual check.

    Raises :class:`SingularMatrixError` when the system is singular at
    working tolerance or the residual exceeds 1e-9 relative to b.
    """
    a = _as_matrix(a)
    b_arr = np.asarray(b, dtype=float)
    try:
        x = np.linalg.solve(a, b_arr)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution, matrix is singular")
    resid = np.abs(a @ x - b_arr).max()
    scale = max(np.abs(b_arr).max(), 1.0)
    if resid > 1e-9 * scale:
        raise SingularMatrixError(f"solve residual {resid:.3e} exceeds tolerance")
    return x


def inverse(a) -> np.ndarray:
    """Matrix inverse via :func:`solve` against the identity."""
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("inverse requires a square matrix")
    return solve(a, np.eye(a.shape[0]))


def numerical_rank(a, tol: float = 1e-9) -> int:
    """Rank by singular values, with tol relative to the largest one."""
    a = _as_matrix(a)
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))
