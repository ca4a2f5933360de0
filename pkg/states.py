"""
Resource states for super dense coding: Bell states, Werner states and the
maximally entangled state in dimension d, all as validated DensityOperator
values.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from qmat import (
    DimensionError,
    ParameterRangeError,
    ValidationError,
    as_matrix,
    herm_eig,
    partial_trace,
)

logger = logging.getLogger(__name__)

STATE_TOL = 1e-9

BELL_KINDS = ("phi+", "phi-", "psi+", "psi-")


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """
    Hermitian, positive semidefinite, unit-trace operator on d_A * d_B.

    Single-party states use dims (d, 1). The stored matrix is read-only.
    """

    matrix: np.ndarray
    dims: tuple = field(default=None)

    def __post_init__(self):
        m = as_matrix(self.matrix).copy()
        dims = self.dims if self.dims is not None else (m.shape[0], 1)
        dims = (int(dims[0]), int(dims[1]))
        if m.shape != (dims[0] * dims[1], dims[0] * dims[1]):
            raise DimensionError(f"density matrix {m.shape} does not match dims {dims}")

        herm_dev = float(np.max(np.abs(m - m.conj().T)))
        if herm_dev > STATE_TOL:
            raise ValidationError(f"density matrix not Hermitian (deviation {herm_dev:.3e})")
        trace_dev = abs(np.trace(m).real - 1.0)
        if trace_dev > STATE_TOL:
            raise ValidationError(f"density matrix trace deviates from 1 by {trace_dev:.3e}")
        lowest = float(herm_eig(m).eigenvalues[0])
        if lowest < -STATE_TOL:
            raise ValidationError(f"density matrix not positive semidefinite (eigenvalue {lowest:.3e})")

        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_bipartite(self) -> bool:
        return self.dims[1] > 1

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def marginal_b(self) -> "DensityOperator":
        """Bob's reduced state tr_a rho"""
        d_b = self.dims[1]
        return DensityOperator(partial_trace(self.matrix, "A", self.dims), (d_b, 1))

    def marginal_a(self) -> "DensityOperator":
        d_a = self.dims[0]
        return DensityOperator(partial_trace(self.matrix, "B", self.dims), (d_a, 1))

    def allclose(self, other, atol: float = 1e-12) -> bool:
        other_m = as_matrix(other)
        return other_m.shape == self.matrix.shape and bool(np.allclose(self.matrix, other_m, rtol=0.0, atol=atol))

    @classmethod
    def from_vector(cls, psi, dims=None) -> "DensityOperator":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), dims)


def _ket(d_a: int, d_b: int, amplitudes: dict) -> np.ndarray:
    psi = np.zeros(d_a * d_b, dtype=complex)
    for (i, j), amp in amplitudes.items():
        psi[i * d_b + j] = amp
    return psi


def bell_state(kind: str = "phi+") -> DensityOperator:
    """
    One of the four Bell projectors.

    Args:
        kind (str): 'phi+', 'phi-', 'psi+' or 'psi-'
    """
    s = 1.0 / np.sqrt(2.0)
    kets = {
        "phi+": {(0, 0): s, (1, 1): s},
        "phi-": {(0, 0): s, (1, 1): -s},
        "psi+": {(0, 1): s, (1, 0): s},
        "psi-": {(0, 1): s, (1, 0): -s},
    }
    if kind not in kets:
        raise ValueError(f"unknown Bell state {kind!r}, expected one of {BELL_KINDS}")
    return DensityOperator.from_vector(_ket(2, 2, kets[kind]), (2, 2))


def bell_phi_plus() -> DensityOperator:
    """|Phi+><Phi+| with |Phi+> = (|00> + |11>)/sqrt(2)"""
    return bell_state("phi+")


def maximally_mixed(d_a: int, d_b: int = 1) -> DensityOperator:
    dim = d_a * d_b
    return DensityOperator(np.eye(dim, dtype=complex) / dim, (d_a, d_b))


def werner(eta: float) -> DensityOperator:
    """
    Werner state eta |Phi+><Phi+| + (1 - eta) I/4.

    Args:
        eta (float): mixing parameter in [0, 1]

    Returns:
        DensityOperator: two-qubit state with spectrum
        {(1+3 eta)/4, (1-eta)/4 x3}
    """
    if not 0.0 <= eta <= 1.0:
        raise ParameterRangeError(f"Werner parameter eta must lie in [0, 1], got {eta}")
    rho = eta * bell_phi_plus().matrix + (1.0 - eta) * np.eye(4) / 4.0
    return DensityOperator(rho, (2, 2))


def phi_with_phase(phi: float) -> DensityOperator:
    """Projector onto (|00> + exp(i phi)|11>)/sqrt(2)"""
    s = 1.0 / np.sqrt(2.0)
    return DensityOperator.from_vector(_ket(2, 2, {(0, 0): s, (1, 1): s * np.exp(1j * phi)}), (2, 2))


def max_entangled(d: int) -> DensityOperator:
    """Projector onto (1/sqrt(d)) sum_k |kk>"""
    if d < 2:
        raise ParameterRangeError(f"max_entangled needs d >= 2, got {d}")
    amp = 1.0 / np.sqrt(d)
    return DensityOperator.from_vector(_ket(d, d, {(k, k): amp for k in range(d)}), (d, d))
