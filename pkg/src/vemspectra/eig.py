"""Smallest eigenpairs of the generalized problem A w = lambda B w."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 2000


class EigenError(RuntimeError):
    pass


@dataclass
class EigenSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # (n, m), columns B-orthogonal with w^T B w = scale
    residuals: np.ndarray

    @property
    def frequencies(self) -> np.ndarray:
        return frequencies(self.eigenvalues)


def frequencies(eigenvalues) -> np.ndarray:
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(lam < 0):
        raise EigenError(f"negative eigenvalue {lam.min():g}: assembly is not positive definite")
    return np.sqrt(lam)


def solve_smallest(a, b, m: int = 6, tol: float = 1e-9, scale: float = 1.0, dense=None):
    """The ``m`` smallest eigenpairs, ascending.

    Eigenvectors are scaled so that ``w^T B w = scale`` and signed so that
    the largest-magnitude entry is positive. Uses a dense solver below
    :data:`DENSE_LIMIT` unknowns and shift-invert Lanczos about zero above.
    """
    n = a.shape[0]
    if m < 1 or m > n:
        raise ValueError(f"cannot compute {m} eigenpairs of a {n}x{n} problem")
    if dense is None:
        dense = n <= DENSE_LIMIT or m >= n - 1
    if dense:
        ad = a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)
        bd = b.toarray() if sp.issparse(b) else np.asarray(b, dtype=float)
        try:
            lam, w = sla.eigh(ad, bd, subset_by_index=[0, m - 1])
        except sla.LinAlgError as exc:
            raise EigenError(f"dense generalized eigensolver failed: {exc}") from exc
    else:
        a = sp.csc_matrix(a)
        b = sp.csc_matrix(b)
        try:
            # fixed start vector so repeated runs give bit-identical results
            v0 = np.random.default_rng(0).standard_normal(n)
            lam, w = spla.eigsh(a, k=m, M=b, sigma=0.0, which="LM", tol=0.0, v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise EigenError(f"Lanczos did not converge: {len(exc.eigenvalues)} of {m} pairs") from exc
        except RuntimeError as exc:
            raise EigenError(f"shift-invert factorization failed: {exc}") from exc
    order = np.argsort(lam)
    lam, w = lam[order], w[:, order]
    if np.any(lam <= 0):
        raise EigenError(f"non-positive eigenvalue {lam.min():g}: stiffness is not SPD")

    bw = b @ w
    norms = np.einsum("ij,ij->j", w, bw)
    w = w * np.sqrt(scale / norms)
    idx = np.argmax(np.abs(w), axis=0)
    w = w * np.sign(w[idx, np.arange(w.shape[1])])

    aw = a @ w
    res = np.linalg.norm(aw - (b @ w) * lam, axis=0) / np.linalg.norm(aw, axis=0)
    if np.any(res > tol):
        raise EigenError(f"eigen-residuals {res.max():.2e} exceed tolerance {tol:.1e}")
    return EigenSolution(lam, w, res)
