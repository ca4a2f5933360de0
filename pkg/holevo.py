"""
Holevo quantity and super dense coding capacities
=================================================

Unitary encoding over a correlated Pauli channel:

    C_un = log2 d + S(Lambda_b(rho_b)) - S(Lambda((U_min (x) I) rho (U_min^dagger (x) I)))

Non-unitary encoding replaces U_min by the pre-processing map Gamma_min.
The minimizing encoder is an argument here; searching for it is the job of
``optimize``. Closed forms for the two-qubit quasi-classical and fully
correlated channels live at the bottom of the module.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from channels import (
    CorrelatedPauliSpec,
    KrausMap,
    bob_marginal_apply,
    correlated_apply_matrix,
    displacement_operators,
    kraus_apply_matrix,
)
from qmat import (
    DimensionError,
    ParameterRangeError,
    ValidationError,
    as_matrix,
    is_unitary,
    partial_trace,
    relative_entropy,
    shannon_entropy,
    von_neumann_entropy,
)

logger = logging.getLogger(__name__)

ENSEMBLE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EncodingEnsemble:
    """Encoders on Alice's leg with their probabilities"""

    items: tuple

    def __post_init__(self):
        items = tuple((float(p), enc) for p, enc in self.items)
        if not items:
            raise ValidationError("an encoding ensemble needs at least one item")
        probs = np.array([p for p, _ in items])
        if np.any(probs < 0.0) or abs(probs.sum() - 1.0) > ENSEMBLE_TOL:
            raise ValidationError(f"ensemble probabilities must be non-negative and sum to 1, got {probs.sum()!r}")
        d = items[0][1].d_in
        for _, enc in items:
            if enc.d_in != d or enc.d_out != d:
                raise DimensionError("all encoders must act on one leg dimension d -> d")
        object.__setattr__(self, "items", items)

    @property
    def d(self) -> int:
        return self.items[0][1].d_in

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for p, _ in self.items])

    @property
    def encoders(self) -> list:
        return [enc for _, enc in self.items]

    def __len__(self):
        return len(self.items)


@dataclass(frozen=True)
class CapacityReport:
    capacity_bits: float
    bob_term_bits: float
    min_entropy_bits: float
    encoder_description: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "capacity_bits": self.capacity_bits,
            "bob_term_bits": self.bob_term_bits,
            "min_entropy_bits": self.min_entropy_bits,
            "encoder": self.encoder_description,
        }


def _check_setup(channel: CorrelatedPauliSpec, rho) -> tuple:
    m = as_matrix(rho)
    d = channel.d
    dims = getattr(rho, "dims", (d, d))
    if tuple(dims) != (d, d) or m.shape != (d * d, d * d):
        raise DimensionError(f"state dims {tuple(dims)} do not match channel legs ({d}, {d})")
    return m, d


def _channel_outputs(ensemble: EncodingEnsemble, channel: CorrelatedPauliSpec, rho) -> list:
    m, d = _check_setup(channel, rho)
    if ensemble.d != d:
        raise DimensionError(f"encoders act on dimension {ensemble.d}, channel legs are {d}")
    return [correlated_apply_matrix(channel, kraus_apply_matrix(enc, m, d)) for enc in ensemble.encoders]


def holevo_quantity(ensemble: EncodingEnsemble, channel: CorrelatedPauliSpec, rho) -> float:
    """
    chi = S(sum p_i Lambda(rho_i)) - sum p_i S(Lambda(rho_i)), rho_i = encoder_i(rho).

    Args:
        ensemble (EncodingEnsemble): encoders on Alice's leg
        channel (CorrelatedPauliSpec): two-leg channel
        rho: bipartite resource state

    Returns:
        float: Holevo quantity in bits
    """
    probs = ensemble.probabilities
    outputs = _channel_outputs(ensemble, channel, rho)
    average = sum(p * out for p, out in zip(probs, outputs))
    return von_neumann_entropy(average) - float(sum(p * von_neumann_entropy(out) for p, out in zip(probs, outputs)))


def holevo_quantity_relative(ensemble: EncodingEnsemble, channel: CorrelatedPauliSpec, rho) -> float:
    """Relative-entropy form: sum p_i S(Lambda(rho_i) || average)"""
    probs = ensemble.probabilities
    outputs = _channel_outputs(ensemble, channel, rho)
    average = sum(p * out for p, out in zip(probs, outputs))
    return float(sum(p * relative_entropy(out, average) for p, out in zip(probs, outputs) if p > 0.0))


def bob_term(channel: CorrelatedPauliSpec, rho) -> float:
    """S(Lambda_b(rho_b)) for the original, unencoded rho"""
    m, d = _check_setup(channel, rho)
    rho_b = partial_trace(m, "A", (d, d))
    return von_neumann_entropy(bob_marginal_apply(channel, rho_b))


def _report(channel, rho, encoder: KrausMap) -> CapacityReport:
    m, d = _check_setup(channel, rho)
    bob = bob_term(channel, rho)
    min_entropy = von_neumann_entropy(correlated_apply_matrix(channel, kraus_apply_matrix(encoder, m, d)))
    return CapacityReport(
        capacity_bits=math.log2(d) + bob - min_entropy,
        bob_term_bits=bob,
        min_entropy_bits=min_entropy,
        encoder_description=encoder.describe(),
    )


def capacity_unitary(channel: CorrelatedPauliSpec, rho, u_min) -> CapacityReport:
    """
    Capacity with unitary encoding for a given entropy-minimizing unitary.
    """
    if isinstance(u_min, KrausMap):
        if not u_min.is_unitary:
            raise ValidationError("capacity_unitary needs a unitary encoder")
        encoder = u_min
    else:
        if not is_unitary(u_min):
            raise ValidationError("u_min is not unitary within 1e-9")
        encoder = KrausMap.from_unitary(u_min, label="u_min")
    return _report(channel, rho, encoder)


def capacity_nonunitary(channel: CorrelatedPauliSpec, rho, gamma_min: KrausMap) -> CapacityReport:
    """
    Capacity with non-unitary encoding for a given pre-processing map.

    Bob's term uses the marginal of the original rho; the pre-processing acts
    on Alice's leg only.
    """
    if not isinstance(gamma_min, KrausMap):
        raise ValidationError("gamma_min must be a KrausMap")
    if gamma_min.d_in != channel.d or gamma_min.d_out != channel.d:
        raise DimensionError(f"pre-processing acts on {gamma_min.d_in} -> {gamma_min.d_out}, channel legs are {channel.d}")
    return _report(channel, rho, gamma_min)


def achievability_ensemble(encoder, d: int) -> EncodingEnsemble:
    """
    The d^2 equiprobable encoders V_i o encoder that reach the capacity.

    Args:
        encoder: KrausMap (U_min or Gamma_min) or a unitary matrix
        d (int): leg dimension
    """
    if not isinstance(encoder, KrausMap):
        encoder = KrausMap.from_unitary(encoder)
    if encoder.d_in != d:
        raise DimensionError(f"encoder acts on dimension {encoder.d_in}, expected {d}")
    weight = 1.0 / d**2
    return EncodingEnsemble(tuple((weight, encoder.then(v)) for v in displacement_operators(d)))


def noiseless_capacity(rho) -> float:
    """log2 d + S(rho_b) - S(rho) over an ideal channel"""
    d = rho.dims[0]
    return math.log2(d) + von_neumann_entropy(rho.marginal_b()) - von_neumann_entropy(rho)


def _check_unit(name: str, value: float):
    if not 0.0 <= value <= 1.0:
        raise ParameterRangeError(f"{name} must lie in [0, 1], got {value}")


def eig23(eta: float, mu: float, p: float, phi: float) -> np.ndarray:
    """
    Spectrum of the quasi-classical correlated channel output for the input
    eta |Phi_1><Phi_1| + (1 - eta) I/4, |Phi_1> = (|00> + e^{i phi}|11>)/sqrt(2).

    Returns:
        np.ndarray: (nu_1, nu_2, nu_3, nu_4)
    """
    for name, value in (("eta", eta), ("mu", mu), ("p", p)):
        _check_unit(name, value)
    pq = p * (1.0 - p)
    floor = (1.0 - eta) / 4.0
    nu_12 = eta * (1.0 - mu) * pq + floor
    root = math.sqrt(max(mu**2 * (1.0 - 4.0 * pq * math.sin(phi) ** 2), 0.0))
    base = 1.0 - 2.0 * (1.0 - mu) * pq
    nu_3 = 0.5 * eta * (base + root) + floor
    nu_4 = 0.5 * eta * (base - root) + floor
    return np.array([nu_12, nu_12, nu_3, nu_4])


def analytic_capacity_quasi(eta: float, mu: float, p: float) -> float:
    """Capacity of a Werner state over the two-qubit quasi-classical correlated channel"""
    return 2.0 - shannon_entropy(eig23(eta, mu, p, 0.0))


def analytic_capacity_fully_correlated(eta: float) -> float:
    """
    Capacity of a Werner state over any two-qubit fully correlated Pauli channel.

    The channel leaves the Werner state unchanged, so only its spectrum enters.
    """
    _check_unit("eta", eta)
    top = (1.0 + 3.0 * eta) / 4.0
    rest = (1.0 - eta) / 4.0
    return 2.0 - shannon_entropy([top, rest, rest, rest])


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def transferred_info_preprocessed(p: float) -> float:
    """
    Information carried with the reset pre-processing on a Bell state:
    1 + p log2 p + (1-p) log2 (1-p). Independent of mu.
    """
    _check_unit("p", p)
    return 1.0 - binary_entropy(p)
