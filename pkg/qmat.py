"""
Dense complex matrix core
=========================

Small dense matrices only (dimension <= 64). Every operator in the package is
a ``numpy`` complex128 array.

Index convention for tensor products is row-major and A-major: the basis
state |i_A, i_B> lives at index ``i_A * d_B + i_B``. The correlated channel
outputs depend on this, so it is fixed here once and nowhere else.

All entropies are in bits.
"""

import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.stats import entropy as _scipy_entropy
from scipy.stats import unitary_group

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-8
CLIP_TOL = 1e-10
SUPPORT_TOL = 1e-12

INFINITE_DIVERGENCE = math.inf


class DensecodeError(ValueError):
    """Base error for invalid numerical input"""


class DimensionError(DensecodeError):
    """Shapes do not fit together"""


class ValidationError(DensecodeError):
    """An operator violates one of its invariants"""


class PositivityError(ValidationError):
    """Eigenvalue below the clipping window"""


class ParameterRangeError(DensecodeError):
    """Scalar parameter outside its domain"""


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(obj) -> np.ndarray:
    """
    Coerce an operator-like object to a finite 2-D complex array.

    Objects carrying a ``matrix`` attribute (DensityOperator) are unwrapped.
    """
    arr = np.asarray(getattr(obj, "matrix", obj), dtype=complex)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix contains NaN or Inf entries")
    return arr


def dagger(a) -> np.ndarray:
    return as_matrix(a).conj().T


def conjugate(op, rho) -> np.ndarray:
    """op @ rho @ op^dagger"""
    op = as_matrix(op)
    return op @ as_matrix(rho) @ op.conj().T


def is_unitary(u, tol: float = 1e-9) -> bool:
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) <= tol)


def herm_eig(h, tol: float = HERMITIAN_TOL) -> EigenDecomposition:
    """
    Eigendecomposition of a Hermitian matrix.

    The input is hermitized by averaging with its adjoint before the
    factorization, so deviations up to ``tol`` are absorbed.

    Args:
        h: square matrix, Hermitian within ``tol``
        tol (float): maximum allowed entrywise deviation from Hermiticity

    Returns:
        EigenDecomposition: ascending real eigenvalues and orthonormal
        eigenvector columns
    """
    a = as_matrix(h)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"herm_eig needs a square matrix, got {a.shape}")
    deviation = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if deviation > tol:
        raise ValidationError(f"matrix is not Hermitian: max |H - H^dagger| = {deviation:.3e}")
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (a + a.conj().T))
    return EigenDecomposition(eigenvalues, eigenvectors)


def spectrum(rho) -> np.ndarray:
    """
    Eigenvalues of a density operator, clipped and renormalized.

    Values in [-CLIP_TOL, 0) become 0 and the spectrum is rescaled to sum 1.
    Rank-deficient channel outputs routinely produce such tiny negatives.
    """
    eigenvalues = herm_eig(rho).eigenvalues
    lowest = float(eigenvalues[0])
    if lowest < -CLIP_TOL:
        raise PositivityError(f"density operator has eigenvalue {lowest:.3e} < -{CLIP_TOL:g}")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    return eigenvalues / eigenvalues.sum()


def shannon_entropy(probs) -> float:
    """Shannon entropy in bits, 0 log 0 = 0"""
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    return float(_scipy_entropy(probs, base=2))


def von_neumann_entropy(rho) -> float:
    """
    Von Neumann entropy -tr(rho log2 rho) in bits.

    Args:
        rho: DensityOperator or density matrix

    Returns:
        float: entropy in [0, log2 dim]
    """
    return shannon_entropy(spectrum(rho))


def relative_entropy(rho, sigma) -> float:
    """
    Quantum relative entropy tr rho (log2 rho - log2 sigma) in bits.

    Returns ``INFINITE_DIVERGENCE`` when the support of rho is not contained
    in the support of sigma.
    """
    r = as_matrix(rho)
    s = as_matrix(sigma)
    if r.shape != s.shape:
        raise DimensionError(f"relative_entropy dimension mismatch: {r.shape} vs {s.shape}")

    rho_vals = spectrum(r)
    rho_vecs = herm_eig(r).eigenvectors
    sigma_vals = spectrum(s)
    sigma_vecs = herm_eig(s).eigenvectors

    # weight[j] = <s_j| rho |s_j>
    overlaps = np.abs(sigma_vecs.conj().T @ rho_vecs) ** 2
    weight = overlaps @ rho_vals

    null = sigma_vals < SUPPORT_TOL
    if np.any(weight[null] > SUPPORT_TOL):
        return INFINITE_DIVERGENCE

    rho_pos = rho_vals[rho_vals > 0]
    neg_entropy = float(np.sum(rho_pos * np.log2(rho_pos)))
    cross = float(np.sum(weight[~null] * np.log2(sigma_vals[~null])))
    return neg_entropy - cross


def tensor(a, b) -> np.ndarray:
    """Kronecker product, A-major"""
    return np.kron(as_matrix(a), as_matrix(b))


def partial_trace(rho, subsystem: str, dims) -> np.ndarray:
    """
    Trace out one party of a bipartite operator.

    Args:
        rho: square matrix on a d_A*d_B dimensional space
        subsystem (str): 'A' or 'B', the party that is traced out
        dims (tuple): (d_A, d_B)

    Returns:
        np.ndarray: reduced operator on the remaining party
    """
    m = as_matrix(rho)
    d_a, d_b = (int(x) for x in dims)
    if m.shape != (d_a * d_b, d_a * d_b):
        raise DimensionError(f"partial_trace: matrix {m.shape} does not match dims {(d_a, d_b)}")
    blocks = m.reshape(d_a, d_b, d_a, d_b)
    which = subsystem.upper()
    if which == "A":
        return np.einsum("ijik->jk", blocks)
    if which == "B":
        return np.einsum("ijkj->ik", blocks)
    raise ValueError(f"subsystem must be 'A' or 'B', got {subsystem!r}")


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary"""
    return np.asarray(unitary_group.rvs(d, random_state=rng), dtype=complex)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int = None) -> np.ndarray:
    """Ginibre-sampled density matrix (test fixtures and verification suites)"""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
