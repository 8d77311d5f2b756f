"""Tests for the rare-ais command line."""

import json
from pathlib import Path

import pytest

from rare_ais.app import build_parser, main


SMOKE_CONFIG = Path(__file__).parent.parent / "configs" / "chain-smoke.cfg"


class TestParser:
    """Tests for argument parsing."""

    def test_requires_command(self):
        """A bare invocation is a usage error."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_ground_truth_arguments(self):
        """Overrides keep their config key names."""
        args = build_parser().parse_args(
            ["ground-truth", "--env", "pendulum-discrete", "--samples", "10", "--out", "gt.json", "--gamma-fail", "pi/4"]
        )
        assert args.gamma_fail == "pi/4"
        assert args.seed == 0
        assert args.out == Path("gt.json")

    def test_unknown_env(self):
        """Environment names are restricted."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["ground-truth", "--env", "cartpole", "--samples", "1", "--out", "x.json"])


class TestCommands:
    """Tests for running subcommands end to end."""

    def test_ground_truth(self, tmp_path, capsys):
        """ground-truth writes a JSON file and prints the estimate."""
        out = tmp_path / "gt" / "chain.json"
        code = main(["ground-truth", "--env", "chain", "--chain-threshold", "5", "--samples", "2000", "--out", str(out)])

        assert code == 0
        data = json.loads(out.read_text())
        assert data["env"] == "chain"
        assert data["n_samples"] == 2000
        assert capsys.readouterr().out.startswith("chain: mu = ")

    def test_run(self, tmp_path, capsys):
        """run writes the report directory and prints the error summary."""
        code = main(["run", "--config", str(SMOKE_CONFIG), "--out", str(tmp_path)])

        assert code == 0
        assert (tmp_path / "report.json").exists()
        assert "eps_abs" in capsys.readouterr().out

    def test_ablate(self, tmp_path, capsys):
        """ablate prints the comparison table."""
        code = main(["ablate", "--suite", "pretrain", "--config", str(SMOKE_CONFIG), "--out", str(tmp_path)])

        assert code == 0
        assert capsys.readouterr().out.startswith("Effect of pretrain")

    def test_config_error_exits_nonzero(self, tmp_path):
        """Library errors are logged and become exit code 1."""
        bad = tmp_path / "bad.cfg"
        bad.write_text("method = mc\nenv = pendulum-discrete\n")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "out")]) == 1

    def test_unknown_suite_exits_nonzero(self, tmp_path):
        """An unknown ablation suite is a config error."""
        assert main(["ablate", "--suite", "dropout", "--config", str(SMOKE_CONFIG), "--out", str(tmp_path)]) == 1

    def test_calibrate_chain_exits_nonzero(self, tmp_path):
        """Calibration needs a published failure rate."""
        argv = ["calibrate", "--env", "chain", "--samples", "10", "--out", str(tmp_path / "cal.json")]
        assert main(argv) == 1
