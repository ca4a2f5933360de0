import json
import math

import numpy as np
import pytest

import optimize
from channels import (
    CorrelatedPauliSpec,
    KrausMap,
    correlated_apply_matrix,
    fully_correlated_spec,
    noiseless_spec,
    quasi_classical_spec,
)
from holevo import capacity_nonunitary, eig23, transferred_info_preprocessed
from optimize import (
    OptimizerConfig,
    capacity_gap,
    crossover_curve,
    crossover_mu,
    isometry_from_params,
    minimize_cptp,
    minimize_unitary,
    p_crossings,
    params_from_kraus,
    serial_restarts,
    unitary_from_params,
    worker_count,
)
from qmat import ParameterRangeError, ValidationError, is_unitary, shannon_entropy, von_neumann_entropy
from states import DensityOperator, bell_phi_plus, werner

FAST = OptimizerConfig(restarts=3, max_iters=400, ftol=1e-10, seed=0)


class TestOptimizerConfig:
    def test_defaults(self):
        cfg = OptimizerConfig()
        assert (cfg.restarts, cfg.max_iters, cfg.ftol, cfg.seed) == (16, 2000, 1e-10, 0)

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            OptimizerConfig.from_dict({"restarts": 2, "temperature": 1.0})

    def test_bad_values(self):
        with pytest.raises(ParameterRangeError):
            OptimizerConfig(restarts=0)
        with pytest.raises(ParameterRangeError):
            OptimizerConfig(ftol=0.0)

    def test_json_file(self, tmp_path):
        path = tmp_path / "opt.json"
        path.write_text(json.dumps({"restarts": 4, "seed": 9}))
        cfg = OptimizerConfig.from_json_file(path)
        assert cfg.restarts == 4 and cfg.seed == 9 and cfg.max_iters == 2000

    @pytest.mark.parametrize("obj", [{"restarts": "many"}, {"ftol": "tight"}, {"seed": None}])
    def test_bad_field_values(self, obj):
        with pytest.raises(ValidationError, match="bad optimizer config value"):
            OptimizerConfig.from_dict(obj)

    def test_not_an_object(self):
        with pytest.raises(ValidationError, match="JSON object"):
            OptimizerConfig.from_dict([4, 2000])

    def test_numeric_strings_are_coerced(self):
        cfg = OptimizerConfig.from_dict({"restarts": "4", "ftol": "1e-8"})
        assert cfg.restarts == 4 and cfg.ftol == 1e-8


class TestWorkerCount:
    def test_default(self, monkeypatch):
        monkeypatch.delenv("DENSECODE_THREADS", raising=False)
        assert worker_count() == 1

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("DENSECODE_THREADS", "4")
        assert worker_count() == 4

    def test_invalid_env(self, monkeypatch):
        monkeypatch.setenv("DENSECODE_THREADS", "many")
        assert worker_count() == 1

    def test_serial_restarts_skip_the_pool(self, monkeypatch):
        def no_pool(*args, **kwargs):
            raise AssertionError("restarts ran on a second pool")

        monkeypatch.setenv("DENSECODE_THREADS", "4")
        monkeypatch.setattr(optimize, "ThreadPoolExecutor", no_pool)
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.3), 0.2)
        with serial_restarts():
            found = minimize_unitary(spec, werner(0.7), FAST)
        assert found.entropy_bits >= 0.0
        with pytest.raises(AssertionError):
            minimize_unitary(spec, werner(0.7), FAST)


class TestParametrization:
    def test_zero_is_identity(self):
        np.testing.assert_allclose(unitary_from_params(np.zeros(4), 2), np.eye(2), atol=1e-15)

    def test_random_params_are_unitary(self):
        rng = np.random.default_rng(3)
        for d in (2, 3):
            assert is_unitary(unitary_from_params(rng.uniform(-math.pi, math.pi, d * d), d))

    def test_isometry_reproduces_kraus(self):
        """An isometry already in canonical form comes back unchanged"""
        x = params_from_kraus(KrausMap.reset(2).operators, 2, 4)
        iso = isometry_from_params(x, 2, 4)
        expected = np.zeros((8, 2), dtype=complex)
        expected[0, 0] = 1.0
        expected[2, 1] = 1.0
        np.testing.assert_allclose(iso, expected, atol=1e-12)

    def test_degenerate_columns(self):
        x = np.zeros(2 * 2 * 2 * 4)
        x[0] = 1.0
        assert isometry_from_params(x, 2, 4) is None


class TestMinimizeUnitary:
    @pytest.mark.parametrize("p,mu,eta", [(0.1, 0.3, 1.0), (0.4, 0.8, 0.6), (0.25, 0.0, 0.5)])
    def test_identity_is_optimal_for_werner(self, p, mu, eta):
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, p), mu)
        found = minimize_unitary(spec, werner(eta), FAST)
        target = shannon_entropy(eig23(eta, mu, p, 0.0))
        assert found.entropy_bits <= target + 1e-6
        assert found.entropy_bits >= target - 1e-9

    def test_identity_is_optimal_on_full_grid(self):
        cfg = OptimizerConfig(restarts=3, seed=0)
        grid = np.linspace(0.0, 1.0, 5)
        for p in grid:
            for mu in grid:
                spec = CorrelatedPauliSpec(quasi_classical_spec(2, p), mu)
                for eta in grid:
                    found = minimize_unitary(spec, werner(eta), cfg)
                    target = shannon_entropy(eig23(eta, mu, p, 0.0))
                    assert target - 1e-9 <= found.entropy_bits <= target + 1e-6, (p, mu, eta)

    @pytest.mark.parametrize("spec", [
        CorrelatedPauliSpec(quasi_classical_spec(2, 0.3), 1.0),
        fully_correlated_spec([0.4, 0.3, 0.2, 0.1]),
    ])
    def test_fully_correlated_bell_is_noiseless(self, spec):
        assert minimize_unitary(spec, bell_phi_plus(), FAST).entropy_bits <= 1e-9

    def test_pure_product_through_ideal_channel(self):
        rho = DensityOperator.from_vector([1.0, 0.0, 0.0, 0.0], (2, 2))
        assert minimize_unitary(noiseless_spec(2), rho, FAST).entropy_bits <= 1e-9

    def test_more_restarts_never_hurt(self):
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.35), 0.15)
        rho = DensityOperator.from_vector([0.8, 0.0, 0.6j, 0.0], (2, 2))
        entropies = [
            minimize_unitary(spec, rho, OptimizerConfig(restarts=n, max_iters=300, seed=5)).entropy_bits
            for n in (1, 2, 4, 6)
        ]
        assert all(later <= earlier for earlier, later in zip(entropies, entropies[1:]))

    def test_result_is_consistent(self):
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.2), 0.5)
        found = minimize_unitary(spec, bell_phi_plus(), FAST)
        assert found.encoder.is_unitary
        u = unitary_from_params(found.parameters, 2)
        big = np.kron(u, np.eye(2))
        again = von_neumann_entropy(correlated_apply_matrix(spec, big @ bell_phi_plus().matrix @ big.conj().T))
        assert abs(again - found.entropy_bits) <= 1e-9

    def test_seed_reproducible(self):
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.3), 0.2)
        a = minimize_unitary(spec, werner(0.7), FAST)
        b = minimize_unitary(spec, werner(0.7), FAST)
        np.testing.assert_array_equal(a.parameters, b.parameters)
        assert a.entropy_bits == b.entropy_bits

    def test_thread_pool_gives_same_answer(self, monkeypatch):
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.3), 0.2)
        monkeypatch.setenv("DENSECODE_THREADS", "1")
        serial = minimize_unitary(spec, werner(0.7), FAST)
        monkeypatch.setenv("DENSECODE_THREADS", "3")
        pooled = minimize_unitary(spec, werner(0.7), FAST)
        np.testing.assert_array_equal(serial.parameters, pooled.parameters)


class TestMinimizeCPTP:
    def test_not_worse_than_fixed_starts(self):
        p, mu = 0.05, 0.0
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, p), mu)
        rho = bell_phi_plus()
        cfg = OptimizerConfig(restarts=3, max_iters=300, seed=1)
        found = minimize_cptp(spec, rho, cfg=cfg)
        reset_entropy = capacity_nonunitary(spec, rho, KrausMap.reset(2)).min_entropy_bits
        identity_entropy = capacity_nonunitary(spec, rho, KrausMap.identity(2)).min_entropy_bits
        unitary_entropy = minimize_unitary(spec, rho, cfg).entropy_bits
        assert found.entropy_bits <= min(reset_entropy, identity_entropy, unitary_entropy) + 1e-9

    def test_encoder_is_cptp(self):
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.3), 0.4)
        found = minimize_cptp(spec, werner(0.8), cfg=OptimizerConfig(restarts=4, max_iters=200, seed=2))
        completeness = sum(e.conj().T @ e for e in found.encoder.operators)
        np.testing.assert_allclose(completeness, np.eye(2), atol=1e-9)

    def test_beats_unitary_where_reset_wins(self):
        """At p = 0.05, mu = 0 the reset map carries more than any unitary"""
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.05), 0.0)
        cfg = OptimizerConfig(restarts=3, max_iters=300, seed=0)
        found = minimize_cptp(spec, bell_phi_plus(), cfg=cfg)
        report = capacity_nonunitary(spec, bell_phi_plus(), found.encoder)
        assert report.capacity_bits >= transferred_info_preprocessed(0.05) - 1e-9

    def test_single_kraus_operator_is_unitary_search(self):
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.2), 0.4)
        rho = werner(0.8)
        found = minimize_cptp(spec, rho, d_env=1, cfg=FAST)
        assert found.encoder.rank == 1
        assert found.encoder.is_unitary
        unitary = minimize_unitary(spec, rho, FAST)
        assert found.entropy_bits <= unitary.entropy_bits + 1e-9
        assert found.entropy_bits >= shannon_entropy(eig23(0.8, 0.4, 0.2, 0.0)) - 1e-9

    def test_no_preprocessing_beats_full_correlation(self):
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.3), 1.0)
        found = minimize_cptp(spec, bell_phi_plus(), cfg=FAST)
        assert found.entropy_bits <= 1e-9
        assert capacity_nonunitary(spec, bell_phi_plus(), found.encoder).capacity_bits == pytest.approx(2.0, abs=1e-9)

    def test_bad_environment(self):
        spec = CorrelatedPauliSpec(quasi_classical_spec(2, 0.1), 0.0)
        with pytest.raises(ParameterRangeError):
            minimize_cptp(spec, bell_phi_plus(), d_env=0, cfg=FAST)


class TestCrossover:
    def test_known_value(self):
        result = crossover_mu(0.05)
        assert result.mu_tilde == pytest.approx(0.294, abs=2e-3)
        assert abs(capacity_gap(result.mu_tilde, 0.05)) < 1e-3

    def test_half_returns_boundary(self):
        assert crossover_mu(0.5).mu_tilde == 0.0

    def test_symmetric_in_p(self):
        a = crossover_mu(0.1, tol=1e-8).mu_tilde
        b = crossover_mu(0.9, tol=1e-8).mu_tilde
        assert a == pytest.approx(b, abs=1e-6)

    def test_open_interval(self):
        with pytest.raises(ParameterRangeError):
            crossover_mu(0.0)

    def test_curve_rows(self):
        rows = [r.as_dict() for r in crossover_curve([0.05, 0.5, 0.95])]
        assert [r["p"] for r in rows] == [0.05, 0.5, 0.95]
        assert rows[1]["mu_tilde"] == 0.0

    def test_unitary_wins_above_largest_crossover(self):
        """The crossover peaks just above 0.3; from mu = 0.31 up unitary encoding never loses"""
        peak = max(crossover_mu(p, tol=1e-7).mu_tilde for p in np.linspace(0.05, 0.12, 71))
        assert peak == pytest.approx(0.3028, abs=5e-4)
        assert capacity_gap(0.30, 0.08) < 0.0
        for mu in np.linspace(0.31, 1.0, 70):
            for p in np.linspace(0.0, 1.0, 101):
                assert capacity_gap(mu, p) >= -1e-12, (mu, p)

    def test_crossings_at_fixed_mu(self):
        """Reset wins on two windows placed symmetrically around p = 1/2"""
        roots = p_crossings(0.2, np.linspace(0.001, 0.999, 999))
        assert len(roots) == 4
        np.testing.assert_allclose(roots, [0.007, 0.293, 0.707, 0.993], atol=3e-3)
        np.testing.assert_allclose(roots[:2], [1 - r for r in roots[:1:-1]], atol=1e-5)
