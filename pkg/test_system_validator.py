import numpy as np
import pytest

from qmat import ParameterRangeError
from system_validator import (
    CheckResult,
    check_analytic_spectrum,
    check_bob_marginal,
    check_reset_preprocessing,
    print_report,
    run_verification,
)


class TestCheckResult:
    def test_empty_check_does_not_pass(self):
        assert not CheckResult("empty", 1e-9).passed

    def test_records_worst_case(self):
        check = CheckResult("demo", 1e-9)
        check.record(1e-12)
        check.record(5e-10)
        check.record(2e-11)
        assert check.cases == 3
        assert check.max_deviation == 5e-10
        assert check.passed


class TestSuites:
    def test_analytic_spectrum_grid(self):
        check = check_analytic_spectrum(3)
        assert check.cases == 3 ** 4
        assert check.passed

    def test_reset_suite(self):
        assert check_reset_preprocessing(3).passed

    def test_corrupted_table_is_caught(self):
        rng = np.random.default_rng(0)
        assert not check_bob_marginal(2, rng, corrupt_channel=True).passed


class TestRunVerification:
    def test_all_suites_pass(self):
        report = run_verification(grid_density=2, seed=0)
        assert len(report.checks) == 8
        failed = [c.name for c in report.checks if not c.passed]
        assert failed == []
        assert report.all_passed

    def test_default_sample_sizes(self):
        report = run_verification()
        assert report.all_passed
        cases = {c.name: c.cases for c in report.checks}
        assert cases["Averaging identity"] == 110
        assert cases["Bob marginal identity"] == 110
        assert cases["Achievability equality"] == 110

    def test_negative_control(self):
        report = run_verification(grid_density=2, seed=0, corrupt_channel=True)
        assert not report.all_passed
        assert [c.name for c in report.checks if not c.passed] == ["Bob marginal identity"]

    def test_grid_density_floor(self):
        with pytest.raises(ParameterRangeError):
            run_verification(grid_density=1)

    def test_report_output(self, capsys):
        print_report(run_verification(grid_density=2, seed=3))
        out = capsys.readouterr().out
        assert out.count("✓ PASS") == 8
        assert "8/8 suites passed" in out
