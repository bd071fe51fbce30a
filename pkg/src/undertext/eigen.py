"""Regularized generalized symmetric eigensolver.

Solves A v = lambda M v for symmetric A and symmetric positive semidefinite
M by ridge-regularizing M, reducing to a standard symmetric problem through
a Cholesky factorization, and diagonalizing the reduced matrix (LAPACK's
tridiagonalization + implicit QR via ``numpy.linalg.eigh``). Dimensions here
are a few dozen at most, so a dense O(B^3) solve is the right tool.

Different eigensolvers return eigenvectors with arbitrary signs, which makes
otherwise-identical pipelines produce channel-flipped images. All vectors
leaving this module are sign-normalized: the entry with the largest absolute
value is made positive, ties broken by the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

DEFAULT_RIDGE = 1e-8

_SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class EigenSolution:
    """Eigenvalues in descending order; eigenvector k in column k."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)


def sign_normalize(vectors: np.ndarray) -> np.ndarray:
    """Flip column signs so each column's largest-|entry| is positive.

    np.argmax returns the first maximizer, which implements the
    lowest-index tie break.
    """
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0:
            out[:, k] = -col
    return out


def _check_symmetric(mat: np.ndarray, name: str) -> None:
    scale = float(np.abs(mat).max())
    if scale == 0.0:
        return
    if float(np.abs(mat - mat.T).max()) > _SYMMETRY_RTOL * scale:
        raise NumericError(f"matrix {name} is not symmetric within {_SYMMETRY_RTOL}")


def regularize(M: np.ndarray, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """M + ridge*(trace(M)/B)*I, falling back to ridge*I when trace(M) <= 0.

    The fallback keeps the zero matrix (and other trace-free degenerates)
    solvable with a deterministic outcome: eigenpairs of A scaled by 1/ridge.
    """
    b = M.shape[0]
    trace = float(np.trace(M))
    scale = trace / b if trace > 0.0 else 1.0
    return M + (ridge * scale) * np.eye(b)


def solve_gen_eig_sym(
    A: np.ndarray, M: np.ndarray, ridge: float = DEFAULT_RIDGE
) -> EigenSolution:
    """Solve A v = lambda M' v with M' the ridge-regularized M.

    Returns all B eigenpairs sorted by descending eigenvalue, sign-normalized,
    with columns M'-orthonormal (v_i' M' v_j = delta_ij). Raises NumericError
    if M' is not positive definite even after regularization.
    """
    A = np.asarray(A, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if A.shape != M.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NumericError(
            f"need square matrices of one size, got {A.shape} and {M.shape}"
        )
    _check_symmetric(A, "A")
    _check_symmetric(M, "M")

    Mr = regularize(M, ridge)
    try:
        L = np.linalg.cholesky(Mr)
    except np.linalg.LinAlgError:
        eigs = np.linalg.eigvalsh((Mr + Mr.T) / 2.0)
        cond = float("inf") if eigs.min() <= 0 else float(eigs.max() / eigs.min())
        raise NumericError(
            f"regularized M is not positive definite "
            f"(eigenvalue range [{eigs.min():.3e}, {eigs.max():.3e}], "
            f"condition estimate {cond:.3e}); "
            f"increase the ridge or check the training data"
        ) from None

    # C = L^-1 A L^-T, symmetrized against round-off before diagonalizing.
    half = np.linalg.solve(L, A)
    C = np.linalg.solve(L, half.T)
    C = (C + C.T) / 2.0
    eigenvalues, U = np.linalg.eigh(C)  # ascending by contract
    eigenvalues = np.ascontiguousarray(eigenvalues[::-1])
    vectors = np.linalg.solve(L.T, U[:, ::-1])
    return EigenSolution(eigenvalues, sign_normalize(vectors))
