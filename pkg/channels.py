"""
Pauli channels with memory
==========================

Displacement operators V_mn, single-leg Pauli channels, the correlated
two-leg Pauli channel

    Lambda(xi) = sum q_{m n m~ n~} (V_mn (x) V_m~n~) xi (V_mn (x) V_m~n~)^dagger
    q_{m n m~ n~} = (1 - mu) q_mn q_m~n~ + mu q_mn delta_{m m~} delta_{n n~}

and Kraus maps acting on Alice's leg. Both legs share one marginal table.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from qmat import (
    DensecodeError,
    DimensionError,
    ParameterRangeError,
    ValidationError,
    as_matrix,
    is_unitary,
)
from states import DensityOperator

logger = logging.getLogger(__name__)

PROBABILITY_TOL = 1e-12
COMPLETENESS_TOL = 1e-9

CHANNEL_TYPES = ("quasi-classical", "pauli")


@lru_cache(maxsize=None)
def _displacement_cached(d: int, m: int, n: int) -> np.ndarray:
    v = np.zeros((d, d), dtype=complex)
    for k in range(d):
        v[k, (k + m) % d] = np.exp(2j * np.pi * k * n / d)
    v.setflags(write=False)
    return v


def displacement(d: int, m: int, n: int) -> np.ndarray:
    """
    Displacement operator V_mn = sum_k exp(2 pi i k n / d) |k><k+m mod d|.

    For d = 2: V_00 = I, V_10 = sigma_1, V_01 = sigma_3, V_11 = i sigma_2.
    The returned array is read-only.
    """
    if d < 1:
        raise ParameterRangeError(f"dimension must be positive, got {d}")
    if not (0 <= m < d and 0 <= n < d):
        raise ParameterRangeError(f"displacement indices ({m}, {n}) out of range for d={d}")
    return _displacement_cached(int(d), int(m), int(n))


def displacement_operators(d: int) -> list:
    """All d^2 displacements in index order i = m*d + n"""
    return [displacement(d, m, n) for m in range(d) for n in range(d)]


@dataclass(frozen=True, eq=False)
class PauliChannelSpec:
    """
    Single-leg Pauli channel: q[m][n] is the probability of V_mn.

    ``kind`` and ``p`` only record where the table came from so it can be
    written back to JSON in the same form.
    """

    d: int
    q: np.ndarray
    kind: str = "pauli"
    p: float = None

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        d = int(self.d)
        if q.shape != (d, d):
            raise DimensionError(f"probability table must be {d}x{d}, got {q.shape}")
        if np.any(q < 0.0):
            raise ValidationError(f"negative channel probability {q.min():.3e}")
        total = float(q.sum())
        if abs(total - 1.0) > PROBABILITY_TOL:
            raise ValidationError(f"channel probabilities sum to {total!r}, not 1")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "d", d)


@dataclass(frozen=True, eq=False)
class CorrelatedPauliSpec:
    """Two-leg Pauli channel with correlation degree mu"""

    marginal: PauliChannelSpec
    mu: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ParameterRangeError(f"correlation degree mu must lie in [0, 1], got {self.mu}")
        joint = self.joint_table
        if np.any(joint < 0.0) or abs(float(joint.sum()) - 1.0) > PROBABILITY_TOL:
            raise ValidationError("joint displacement table is not a probability distribution")

    @property
    def d(self) -> int:
        return self.marginal.d

    @cached_property
    def joint_table(self) -> np.ndarray:
        """q[m, n, m~, n~]"""
        q = self.marginal.q
        d = self.d
        joint = (1.0 - self.mu) * np.einsum("ab,cd->abcd", q, q)
        for m in range(d):
            for n in range(d):
                joint[m, n, m, n] += self.mu * q[m, n]
        joint.setflags(write=False)
        return joint

    @cached_property
    def _terms(self) -> tuple:
        d = self.d
        probs, ops = [], []
        for m, n, mt, nt in zip(*np.nonzero(self.joint_table)):
            probs.append(self.joint_table[m, n, mt, nt])
            ops.append(np.kron(displacement(d, m, n), displacement(d, mt, nt)))
        return np.array(probs), np.array(ops)


@dataclass(frozen=True, eq=False)
class KrausMap:
    """
    CPTP map {E_k} with sum_k E_k^dagger E_k = I.

    Every operator is d_out x d_in.
    """

    operators: tuple
    label: str = field(default="custom")

    def __post_init__(self):
        ops = tuple(as_matrix(e).copy() for e in self.operators)
        if not ops:
            raise ValidationError("a Kraus map needs at least one operator")
        shape = ops[0].shape
        if any(e.shape != shape for e in ops):
            raise DimensionError("Kraus operators must share one shape")
        completeness = sum(e.conj().T @ e for e in ops)
        deviation = float(np.max(np.abs(completeness - np.eye(shape[1]))))
        if deviation > COMPLETENESS_TOL:
            raise ValidationError(f"Kraus completeness violated: max |sum E^dagger E - I| = {deviation:.3e}")
        for e in ops:
            e.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @property
    def d_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.operators[0].shape[0]

    @property
    def rank(self) -> int:
        return len(self.operators)

    @property
    def is_unitary(self) -> bool:
        return self.rank == 1 and is_unitary(self.operators[0])

    @classmethod
    def identity(cls, d: int) -> "KrausMap":
        return cls((np.eye(d, dtype=complex),), label="identity")

    @classmethod
    def from_unitary(cls, u, label: str = "unitary") -> "KrausMap":
        u = as_matrix(u)
        if not is_unitary(u):
            raise ValidationError("encoder matrix is not unitary within 1e-9")
        return cls((u,), label=label)

    @classmethod
    def reset(cls, d: int = 2) -> "KrausMap":
        """
        Reset to |0>: E_k = |0><k|.

        For d = 2 the operators are |0><0| and |0><1|, the pre-processing that
        turns |Phi+> into |0><0| (x) I/2.
        """
        ops = []
        for k in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[0, k] = 1.0
            ops.append(e)
        return cls(tuple(ops), label="reset")

    def then(self, u) -> "KrausMap":
        """Apply this map, then the unitary u"""
        u = as_matrix(u)
        return KrausMap(tuple(u @ e for e in self.operators), label=self.label)

    def describe(self) -> dict:
        return {
            "label": self.label,
            "kraus_rank": self.rank,
            "operators": [
                [[[float(z.real), float(z.imag)] for z in row] for row in e]
                for e in self.operators
            ],
        }


def quasi_classical_spec(d: int, p: float) -> PauliChannelSpec:
    """
    Quasi-classical channel: q[0][n] = (1-p)/d, q[m][n] = p/(d(d-1)) for m != 0.

    Args:
        d (int): leg dimension, at least 2
        p (float): displacement probability in [0, 1]
    """
    if d < 2:
        raise ParameterRangeError(f"quasi-classical channel needs d >= 2, got {d}")
    if not 0.0 <= p <= 1.0:
        raise ParameterRangeError(f"noise parameter p must lie in [0, 1], got {p}")
    q = np.full((d, d), p / (d * (d - 1)))
    q[0, :] = (1.0 - p) / d
    return PauliChannelSpec(d, q, kind="quasi-classical", p=float(p))


def noiseless_spec(d: int = 2) -> CorrelatedPauliSpec:
    q = np.zeros((d, d))
    q[0, 0] = 1.0
    return CorrelatedPauliSpec(PauliChannelSpec(d, q), mu=0.0)


def fully_correlated_spec(q_m) -> CorrelatedPauliSpec:
    """
    Two-qubit fully correlated Pauli channel sum_m q_m (s_m (x) s_m) xi (s_m (x) s_m).

    Args:
        q_m: probabilities of (I, sigma_1, sigma_2, sigma_3)
    """
    q0, q1, q2, q3 = (float(x) for x in q_m)
    # V_00 = I, V_01 = sigma_3, V_10 = sigma_1, V_11 ~ sigma_2
    table = np.array([[q0, q3], [q1, q2]])
    return CorrelatedPauliSpec(PauliChannelSpec(2, table), mu=1.0)


def _single_matrix(rho, d: int) -> np.ndarray:
    m = as_matrix(rho)
    if m.shape != (d, d):
        raise DimensionError(f"expected a {d}x{d} single-party state, got {m.shape}")
    return m


def _bipartite(rho, d_a: int = None, d_b: int = None) -> tuple:
    """Matrix and dims of a bipartite state, checking leg dimensions"""
    m = as_matrix(rho)
    dims = getattr(rho, "dims", None)
    if dims is None:
        dims = (d_a, m.shape[0] // d_a) if d_a else (int(round(np.sqrt(m.shape[0]))),) * 2
    if m.shape != (dims[0] * dims[1],) * 2:
        raise DimensionError(f"state of shape {m.shape} does not match dims {dims}")
    if (d_a is not None and dims[0] != d_a) or (d_b is not None and dims[1] != d_b):
        raise DimensionError(f"state dims {dims} do not match channel legs ({d_a}, {d_b})")
    return m, tuple(dims)


def _pauli_matrix(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    d = q.shape[0]
    out = np.zeros_like(m)
    for a in range(d):
        for b in range(d):
            if q[a, b] > 0.0:
                v = displacement(d, a, b)
                out += q[a, b] * (v @ m @ v.conj().T)
    return out


def pauli_apply(spec: PauliChannelSpec, rho) -> DensityOperator:
    """Single-leg Pauli channel sum q_mn V_mn rho V_mn^dagger"""
    m = _single_matrix(rho, spec.d)
    return DensityOperator(_pauli_matrix(spec.q, m), (spec.d, 1))


def correlated_apply_matrix(spec: CorrelatedPauliSpec, m: np.ndarray) -> np.ndarray:
    """Correlated channel on a raw d^2 x d^2 matrix, no validation of the output"""
    probs, ops = spec._terms
    conjugated = ops @ m @ ops.conj().transpose(0, 2, 1)
    return np.tensordot(probs, conjugated, axes=1)


def correlated_apply(spec: CorrelatedPauliSpec, rho) -> DensityOperator:
    """
    Apply the correlated two-leg Pauli channel.

    Args:
        spec (CorrelatedPauliSpec): channel
        rho: bipartite state with both legs of dimension spec.d

    Returns:
        DensityOperator: channel output, dims (d, d)
    """
    m, dims = _bipartite(rho, spec.d, spec.d)
    return DensityOperator(correlated_apply_matrix(spec, m), dims)


def bob_marginal_apply(spec: CorrelatedPauliSpec, rho_b) -> DensityOperator:
    """
    Channel seen by Bob's leg alone.

    The leg probabilities are the joint table summed over Alice's indices,
    which sums out mu and leaves the marginal table.
    """
    m = _single_matrix(rho_b, spec.d)
    leg_probs = spec.joint_table.sum(axis=(0, 1))
    return DensityOperator(_pauli_matrix(leg_probs, m), (spec.d, 1))


def kraus_apply_matrix(kraus: KrausMap, m: np.ndarray, d_b: int) -> np.ndarray:
    eye_b = np.eye(d_b)
    out = None
    for e in kraus.operators:
        big = np.kron(e, eye_b)
        term = big @ m @ big.conj().T
        out = term if out is None else out + term
    return out


def kraus_apply(kraus: KrausMap, rho) -> DensityOperator:
    """
    Apply a Kraus map on Alice's leg: sum (E_k (x) I) rho (E_k^dagger (x) I).

    Bob's marginal is untouched: tr_a of the output equals tr_a rho.
    """
    m, dims = _bipartite(rho, kraus.d_in)
    return DensityOperator(kraus_apply_matrix(kraus, m, dims[1]), (kraus.d_out, dims[1]))


def twirl_average(tau, d: int, d_b: int = None) -> np.ndarray:
    """(1/d^2) sum_i (V_i (x) I) tau (V_i^dagger (x) I), equal to I/d (x) tr_a tau"""
    d_b = d if d_b is None else d_b
    m = as_matrix(tau)
    if m.shape != (d * d_b, d * d_b):
        raise DimensionError(f"twirl_average: matrix {m.shape} does not match dims {(d, d_b)}")
    eye_b = np.eye(d_b)
    out = np.zeros_like(m)
    for v in displacement_operators(d):
        big = np.kron(v, eye_b)
        out += big @ m @ big.conj().T
    return out / d**2


def channel_to_json(spec: CorrelatedPauliSpec) -> dict:
    marginal = spec.marginal
    if marginal.kind == "quasi-classical" and marginal.p is not None:
        return {"type": "quasi-classical", "d": marginal.d, "p": marginal.p, "mu": float(spec.mu)}
    return {"type": "pauli", "d": marginal.d, "q": marginal.q.tolist(), "mu": float(spec.mu)}


def channel_from_json(obj: dict) -> CorrelatedPauliSpec:
    """
    Build a correlated channel from {"type", "d", "p" | "q", "mu"}.
    """
    if not isinstance(obj, dict):
        raise ValidationError(f"channel JSON must be an object, got {type(obj).__name__}")
    try:
        kind = obj["type"]
        d = int(obj["d"])
        mu = float(obj["mu"])
        if kind == "quasi-classical":
            marginal = quasi_classical_spec(d, float(obj["p"]))
        elif kind == "pauli":
            marginal = PauliChannelSpec(d, np.asarray(obj["q"], dtype=float))
        else:
            raise ValidationError(f"unknown channel type {kind!r}, expected one of {CHANNEL_TYPES}")
    except KeyError as e:
        raise ValidationError(f"channel JSON is missing field {e}") from e
    except DensecodeError:
        raise
    except (TypeError, ValueError) as e:
        raise ValidationError(f"bad channel JSON value: {e}") from e
    return CorrelatedPauliSpec(marginal, mu)
