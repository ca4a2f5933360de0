import json

import pandas as pd
import pytest

import optimize
from cli import EXIT_IO, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED, main


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


class TestCapacityCommand:
    def test_fully_correlated_two_bits(self, capsys):
        code, out = _run(capsys, "capacity", "--channel", "fully-correlated", "--state", "bell")
        assert code == EXIT_OK
        result = json.loads(out.out)
        assert result["capacity_bits"] == pytest.approx(2.0, abs=1e-9)
        assert result["analytic"] is True

    def test_preprocessed_bell(self, capsys):
        code, out = _run(capsys, "capacity", "--p", "0.05", "--mu", "0", "--state", "bell",
                         "--encoding", "preprocessed")
        assert code == EXIT_OK
        assert json.loads(out.out)["capacity_bits"] == pytest.approx(0.71360, abs=1e-4)

    def test_channel_json(self, capsys, tmp_path):
        path = tmp_path / "channel.json"
        path.write_text(json.dumps({"type": "quasi-classical", "d": 2, "p": 0.05, "mu": 0.4}))
        code, out = _run(capsys, "capacity", "--channel-json", str(path), "--state", "bell",
                         "--encoding", "preprocessed")
        assert code == EXIT_OK
        result = json.loads(out.out)
        assert result["analytic"] is False
        assert result["capacity_bits"] == pytest.approx(0.71360, abs=1e-4)

    def test_not_converged(self, capsys):
        code, out = _run(capsys, "capacity", "--p", "0.2", "--mu", "0.3", "--encoding", "optimize-unitary",
                         "--restarts", "1", "--max-iters", "1")
        assert code == EXIT_NOT_CONVERGED
        assert json.loads(out.out)["converged"] is False

    def test_out_of_range(self, capsys):
        code, out = _run(capsys, "capacity", "--p", "1.5")
        assert code == EXIT_USAGE
        assert "densecode: error" in out.err

    def test_werner_needs_qubits(self, capsys):
        code, _ = _run(capsys, "capacity", "--d", "3", "--state", "werner")
        assert code == EXIT_USAGE

    def test_unknown_command(self, capsys):
        code, _ = _run(capsys, "teleport")
        assert code == EXIT_USAGE

    def test_missing_config_file(self, capsys, tmp_path):
        code, _ = _run(capsys, "capacity", "--encoding", "optimize-unitary", "--config", str(tmp_path / "nope.json"))
        assert code == EXIT_USAGE

    @pytest.mark.parametrize("content", ['{"restarts": "many"}', "[16, 2000]", "{restarts"])
    def test_malformed_config(self, capsys, tmp_path, content):
        path = tmp_path / "opt.json"
        path.write_text(content)
        code, out = _run(capsys, "capacity", "--encoding", "optimize-unitary", "--config", str(path))
        assert code == EXIT_USAGE
        assert "densecode: error" in out.err

    @pytest.mark.parametrize("content", ['[0.05, 0.3]', '{"type": "quasi-classical", "d": 2, "p": "low", "mu": 0.3}'])
    def test_malformed_channel_json(self, capsys, tmp_path, content):
        path = tmp_path / "channel.json"
        path.write_text(content)
        code, _ = _run(capsys, "capacity", "--channel-json", str(path), "--state", "bell")
        assert code == EXIT_USAGE

    def test_channel_json_is_a_directory(self, capsys, tmp_path):
        code, _ = _run(capsys, "capacity", "--channel-json", str(tmp_path), "--state", "bell")
        assert code == EXIT_USAGE


class TestSweepCommand:
    ARGS = ("sweep", "--axis1", "p:0:1:5", "--axis2", "mu:0:1:3", "--fix", "eta=1")

    def test_csv_grid(self, capsys, tmp_path):
        path = tmp_path / "grid.csv"
        code, _ = _run(capsys, *self.ARGS, "--out", str(path))
        assert code == EXIT_OK
        table = pd.read_csv(path)
        assert list(table.columns) == ["axis1", "axis2", "capacity_bits", "encoding"]
        assert len(table) == 15
        # mu = 1 rows carry two bits regardless of p
        assert table.loc[table.axis2 == 1.0, "capacity_bits"].tolist() == pytest.approx([2.0] * 5, abs=1e-9)

    def test_byte_identical_reruns(self, capsys, tmp_path, monkeypatch):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        _run(capsys, *self.ARGS, "--out", str(first))
        monkeypatch.setenv("DENSECODE_THREADS", "4")
        _run(capsys, *self.ARGS, "--out", str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_json_output(self, capsys, tmp_path):
        path = tmp_path / "line.json"
        code, _ = _run(capsys, "sweep", "--axis1", "eta:0:1:3", "--p", "0.1", "--mu", "0.5",
                       "--format", "json", "--out", str(path))
        assert code == EXIT_OK
        rows = json.loads(path.read_text())
        assert [r["axis1"] for r in rows] == [0.0, 0.5, 1.0]
        assert rows[0]["capacity_bits"] == pytest.approx(0.0, abs=1e-12)

    def test_unwritable_output(self, capsys, tmp_path):
        code, _ = _run(capsys, *self.ARGS, "--out", str(tmp_path / "missing" / "grid.csv"))
        assert code == EXIT_IO

    def test_bad_axis(self, capsys, tmp_path):
        code, _ = _run(capsys, "sweep", "--axis1", "p:0:1", "--out", str(tmp_path / "x.csv"))
        assert code == EXIT_USAGE

    def test_overlapping_axes(self, capsys, tmp_path):
        code, _ = _run(capsys, "sweep", "--axis1", "p:0:1:3", "--fix", "p=0.2", "--out", str(tmp_path / "x.csv"))
        assert code == EXIT_USAGE

    @pytest.mark.parametrize("axis,fix", [("p:0:1:5", "mu=0"), ("mu:0:1:5", "p=0.1"), ("eta:0:1:3", "mu=0.5")])
    def test_channel_json_cannot_sweep_channel_parameters(self, capsys, tmp_path, axis, fix):
        channel = tmp_path / "channel.json"
        channel.write_text(json.dumps({"type": "quasi-classical", "d": 2, "p": 0.05, "mu": 0.3}))
        out = tmp_path / "x.csv"
        code, err = _run(capsys, "sweep", "--channel-json", str(channel), "--state", "bell",
                         "--axis1", axis, "--fix", fix, "--out", str(out))
        assert code == EXIT_USAGE
        assert "--channel-json" in err.err
        assert not out.exists()

    def test_channel_json_with_eta_axis(self, capsys, tmp_path):
        channel = tmp_path / "channel.json"
        channel.write_text(json.dumps({"type": "quasi-classical", "d": 2, "p": 0.05, "mu": 0.3}))
        out = tmp_path / "x.csv"
        code, _ = _run(capsys, "sweep", "--channel-json", str(channel), "--encoding", "preprocessed",
                       "--axis1", "eta:0:1:3", "--out", str(out))
        assert code == EXIT_OK
        assert len(pd.read_csv(out)) == 3

    def test_pooled_points_run_restarts_serially(self, capsys, tmp_path, monkeypatch):
        def no_nested_pool(*args, **kwargs):
            raise AssertionError("optimizer restarts opened a pool inside a sweep worker")

        monkeypatch.setattr(optimize, "ThreadPoolExecutor", no_nested_pool)
        monkeypatch.setenv("DENSECODE_THREADS", "3")
        out = tmp_path / "x.csv"
        code, _ = _run(capsys, "sweep", "--encoding", "optimize-unitary", "--restarts", "2", "--max-iters", "50",
                       "--axis1", "p:0:1:3", "--fix", "mu=0.2", "--fix", "eta=1", "--out", str(out))
        assert code == EXIT_OK
        assert len(pd.read_csv(out)) == 3


class TestCrossoverCommand:
    def test_stdout(self, capsys):
        code, out = _run(capsys, "crossover", "--p-start", "0.05", "--p-stop", "0.5", "--steps", "2")
        assert code == EXIT_OK
        rows = json.loads(out.out)
        assert rows[0]["mu_tilde"] == pytest.approx(0.294, abs=2e-3)
        assert rows[1] == {"p": 0.5, "mu_tilde": 0.0}

    def test_bad_range(self, capsys):
        code, _ = _run(capsys, "crossover", "--p-start", "0.6", "--p-stop", "0.4", "--steps", "3")
        assert code == EXIT_USAGE


class TestVerifyCommand:
    def test_passes(self, capsys):
        code, out = _run(capsys, "verify", "--grid-density", "2", "--seed", "0")
        assert code == EXIT_OK
        assert "✗ FAIL" not in out.out

    def test_corrupted_channel_fails(self, capsys):
        code, out = _run(capsys, "verify", "--grid-density", "2", "--corrupt-channel")
        assert code == EXIT_VERIFY_FAILED
        assert "✗ FAIL" in out.out
