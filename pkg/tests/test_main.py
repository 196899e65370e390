"""
Unit tests for the command-line entry point and its exit codes.
"""

from pathlib import Path

import pytest

from src import cli_io
from src.cli_io import Command
from src.errors import NewtonDivergenceError
from src.main import main


class TestMain:
    """Tests for the main function."""

    def test_success(self, out_dir: Path) -> None:
        """A valid frequency check returns 0."""
        assert main(["validate-freq", "--mmax", "9", "--out", str(out_dir)]) == 0
        assert (out_dir / "validate_k1_l1.json").exists()

    def test_help(self, capsys: pytest.CaptureFixture) -> None:
        """--help prints the usage examples and returns 0."""
        assert main(["--help"]) == 0
        assert "Exit codes:" in capsys.readouterr().out

    def test_missing_subcommand(self, capsys: pytest.CaptureFixture) -> None:
        """Running without a subcommand is a usage error."""
        assert main([]) == 2
        assert "subcommand is required" in capsys.readouterr().err

    def test_bad_flag(self) -> None:
        """argparse errors map to 2."""
        assert main(["bands", "--n", "many"]) == 2

    def test_even_k(self, capsys: pytest.CaptureFixture) -> None:
        """Validation errors print a readable message and return 2."""
        assert main(["breather", "--k", "2"]) == 2
        assert "k must be odd" in capsys.readouterr().err

    def test_strict_invalid(self, out_dir: Path) -> None:
        """An invalid verdict under --strict returns 4."""
        assert main(["validate-freq", "--l", "2", "--mmax", "9", "--strict", "--out", str(out_dir)]) == 4

    def test_numerical_failure(self, out_dir: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        """Solver failures return 3."""

        def fail(cfg: cli_io.RunConfig) -> int:
            raise NewtonDivergenceError("stalled", residual=1.0, iterations=7)

        monkeypatch.setitem(cli_io.HANDLERS, Command.REPORT, fail)
        assert main(["report", "--out", str(out_dir)]) == 3

    def test_quiet_logging(self, out_dir: Path, capsys: pytest.CaptureFixture) -> None:
        """--quiet suppresses info messages on stderr."""
        assert main(["rationality", "--l", "3", "--quiet", "--out", str(out_dir)]) == 0
        captured = capsys.readouterr()
        assert "wrote" not in captured.err
        assert "l=3" in captured.out
