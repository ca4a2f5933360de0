"""
Identity suites for the channel and capacity formulas.

Each suite draws random states/channels (seeded) or walks a parameter grid,
measures the largest deviation between the two sides of an identity and
compares it to the suite's tolerance.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from channels import (
    CorrelatedPauliSpec,
    KrausMap,
    PauliChannelSpec,
    bob_marginal_apply,
    correlated_apply_matrix,
    displacement,
    quasi_classical_spec,
    twirl_average,
)
from holevo import (
    EncodingEnsemble,
    achievability_ensemble,
    capacity_nonunitary,
    capacity_unitary,
    eig23,
    holevo_quantity,
    holevo_quantity_relative,
    transferred_info_preprocessed,
)
from qmat import (
    ParameterRangeError,
    partial_trace,
    random_density_matrix,
    random_unitary,
    shannon_entropy,
    von_neumann_entropy,
)
from states import DensityOperator, bell_phi_plus, phi_with_phase

logger = logging.getLogger(__name__)

SIGMA_3 = np.diag([1.0, -1.0]).astype(complex)


@dataclass
class CheckResult:
    name: str
    tolerance: float
    cases: int = 0
    max_deviation: float = 0.0

    @property
    def passed(self) -> bool:
        return self.cases > 0 and self.max_deviation <= self.tolerance

    def record(self, deviation: float):
        self.cases += 1
        self.max_deviation = max(self.max_deviation, float(deviation))


@dataclass
class VerificationReport:
    grid_density: int
    seed: int
    checks: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _random_channel(d: int, rng: np.random.Generator) -> CorrelatedPauliSpec:
    q = rng.dirichlet(np.ones(d * d)).reshape(d, d)
    return CorrelatedPauliSpec(PauliChannelSpec(d, q), float(rng.uniform()))


def _random_state(d: int, rng: np.random.Generator) -> DensityOperator:
    return DensityOperator(random_density_matrix(d * d, rng), (d, d))


def _max_dev(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _corrupted(spec: CorrelatedPauliSpec) -> CorrelatedPauliSpec:
    q = np.roll(spec.marginal.q.ravel(), 1).reshape(spec.d, spec.d)
    return CorrelatedPauliSpec(PauliChannelSpec(spec.d, q), spec.mu)


def _sample_sizes(grid_density: int) -> dict:
    return {2: 20 * grid_density, 3: 2 * grid_density}


def check_averaging_identity(grid_density, rng) -> CheckResult:
    """(1/d^2) sum_i (V_i (x) I) tau (V_i^dagger (x) I) = I/d (x) tr_a tau"""
    check = CheckResult("Averaging identity", 1e-12)
    for d, count in _sample_sizes(grid_density).items():
        for _ in range(count):
            tau = random_density_matrix(d * d, rng)
            expected = np.kron(np.eye(d) / d, partial_trace(tau, "A", (d, d)))
            check.record(_max_dev(twirl_average(tau, d), expected))
    return check


def check_bob_marginal(grid_density, rng, corrupt_channel=False) -> CheckResult:
    """tr_a Lambda(rho) = Lambda_b(tr_a rho)"""
    check = CheckResult("Bob marginal identity", 1e-12)
    for d, count in _sample_sizes(grid_density).items():
        for _ in range(count):
            spec = _random_channel(d, rng)
            rho = _random_state(d, rng)
            left = partial_trace(correlated_apply_matrix(spec, rho.matrix), "A", (d, d))
            predictor = _corrupted(spec) if corrupt_channel else spec
            right = bob_marginal_apply(predictor, rho.marginal_b()).matrix
            check.record(_max_dev(left, right))
    return check


def check_sigma3_invariance(grid_density, rng) -> CheckResult:
    """Quasi-classical correlated channel is blind to sigma_3 (x) sigma_3"""
    check = CheckResult("sigma3 x sigma3 invariance", 1e-10)
    flip = np.kron(SIGMA_3, SIGMA_3)
    for p in np.linspace(0.0, 1.0, grid_density):
        for mu in np.linspace(0.0, 1.0, grid_density):
            spec = CorrelatedPauliSpec(quasi_classical_spec(2, p), mu)
            rho = random_density_matrix(4, rng)
            check.record(_max_dev(correlated_apply_matrix(spec, rho),
                                  correlated_apply_matrix(spec, flip @ rho @ flip)))
    return check


def check_covariance(grid_density, rng) -> CheckResult:
    """Lambda commutes with displacements on Alice's leg"""
    check = CheckResult("Channel covariance", 1e-10)
    for d, count in _sample_sizes(grid_density).items():
        for _ in range(max(count // 5, 1)):
            spec = _random_channel(d, rng)
            xi = random_density_matrix(d * d, rng)
            out = correlated_apply_matrix(spec, xi)
            for j in range(d):
                for k in range(d):
                    big = np.kron(displacement(d, j, k), np.eye(d))
                    left = big @ out @ big.conj().T
                    right = correlated_apply_matrix(spec, big @ xi @ big.conj().T)
                    check.record(_max_dev(left, right))
    return check


def check_achievability(grid_density, rng) -> CheckResult:
    """Holevo quantity of {1/d^2, V_i U} equals the unitary capacity formula for any U"""
    check = CheckResult("Achievability equality", 1e-9)
    for d, count in _sample_sizes(grid_density).items():
        for _ in range(count):
            spec = _random_channel(d, rng)
            rho = _random_state(d, rng)
            u = random_unitary(d, rng)
            chi = holevo_quantity(achievability_ensemble(u, d), spec, rho)
            check.record(abs(chi - capacity_unitary(spec, rho, u).capacity_bits))
    return check


def check_analytic_spectrum(grid_density, rng=None) -> CheckResult:
    """Closed-form spectrum entropy against the numerically built channel output"""
    check = CheckResult("Analytic spectrum agreement", 1e-9)
    unit = np.linspace(0.0, 1.0, grid_density)
    for eta in unit:
        for mu in unit:
            for p in unit:
                spec = CorrelatedPauliSpec(quasi_classical_spec(2, p), mu)
                for phi in np.linspace(0.0, 2.0 * math.pi, grid_density):
                    rho = eta * phi_with_phase(phi).matrix + (1.0 - eta) * np.eye(4) / 4.0
                    numeric = von_neumann_entropy(correlated_apply_matrix(spec, rho))
                    check.record(abs(shannon_entropy(eig23(eta, mu, p, phi)) - numeric))
    return check


def check_holevo_forms(grid_density, rng) -> CheckResult:
    """Entropy-difference and relative-entropy forms of the Holevo quantity agree"""
    check = CheckResult("Holevo two-form agreement", 1e-9)
    for _ in range(4 * grid_density):
        spec = _random_channel(2, rng)
        rho = _random_state(2, rng)
        size = int(rng.integers(2, 6))
        probs = rng.dirichlet(np.ones(size))
        ensemble = EncodingEnsemble(tuple(
            (p, KrausMap.from_unitary(random_unitary(2, rng))) for p in probs
        ))
        check.record(abs(holevo_quantity(ensemble, spec, rho) - holevo_quantity_relative(ensemble, spec, rho)))
    return check


def check_reset_preprocessing(grid_density, rng=None) -> CheckResult:
    """Reset pre-processing on a Bell state gives 1 - h(p) for every mu"""
    check = CheckResult("Reset pre-processing, mu independence", 1e-9)
    bell = bell_phi_plus()
    reset = KrausMap.reset(2)
    for p in np.linspace(0.0, 1.0, grid_density):
        expected = transferred_info_preprocessed(p)
        for mu in np.linspace(0.0, 1.0, grid_density):
            spec = CorrelatedPauliSpec(quasi_classical_spec(2, p), mu)
            check.record(abs(capacity_nonunitary(spec, bell, reset).capacity_bits - expected))
    return check


def run_verification(grid_density: int = 5, seed: int = 0, corrupt_channel: bool = False) -> VerificationReport:
    """
    Run every identity suite.

    Args:
        grid_density (int): points per axis for grids; random sample sizes
            scale with it (20x for d=2, 2x for d=3)
        seed (int): seed of the random stream shared by all suites
        corrupt_channel (bool): feed a shifted channel table to the Bob
            marginal suite, which must then fail

    Returns:
        VerificationReport: one CheckResult per suite
    """
    if grid_density < 2:
        raise ParameterRangeError(f"grid density must be at least 2, got {grid_density}")
    rng = np.random.default_rng(seed)
    report = VerificationReport(grid_density, seed)
    report.checks.append(check_averaging_identity(grid_density, rng))
    report.checks.append(check_bob_marginal(grid_density, rng, corrupt_channel))
    report.checks.append(check_sigma3_invariance(grid_density, rng))
    report.checks.append(check_covariance(grid_density, rng))
    report.checks.append(check_achievability(grid_density, rng))
    report.checks.append(check_analytic_spectrum(grid_density))
    report.checks.append(check_holevo_forms(grid_density, rng))
    report.checks.append(check_reset_preprocessing(grid_density))
    for check in report.checks:
        logger.info(f"{check.name}: {check.cases} cases, max deviation {check.max_deviation:.3e}")
    return report


def print_report(report: VerificationReport):
    print("=== Super dense coding identity suites ===")
    print(f"grid density {report.grid_density}, seed {report.seed}\n")
    for check in report.checks:
        mark = "✓ PASS" if check.passed else "✗ FAIL"
        print(f"{mark}  {check.name}")
        print(f"    cases: {check.cases}, max deviation: {check.max_deviation:.3e} (tolerance {check.tolerance:.0e})")
    passed = sum(1 for c in report.checks if c.passed)
    print(f"\n=== {passed}/{len(report.checks)} suites passed ===")


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    result = run_verification()
    print_report(result)
    print(f"\nVerification: {'PASSED' if result.all_passed else 'FAILED'}")
