"""
Command-line front end: run configuration, deterministic output files and
plot-script emission.

Every float written by this module uses 17 significant digits so that equal
run configurations give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor, as_completed
from enum import Enum
from fractions import Fraction
from pathlib import Path
from string import Template
from typing import Any, NamedTuple

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.config import config
from src.coupled_modes import ModeStack, SlavingReport, odd_modes, slaving_report, solve_bvp
from src.errors import ConfigurationError
from src.graph_core import Family, Geometry, GraphGrid, GraphProfile
from src.homoclinic import find_bound_state
from src.kg_simulator import run_breather
from src.spectrum import rationality_check, scan_bands, validate_frequency

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SUMMARY_NAME = "summary.json"
PROFILE_HEADER = ["x", "u", "uprime", "cell", "segment"]
SCAN_HEADER = ["lambda", "trace", "class"]
SNAPSHOT_HEADER = ["t", "x", "u"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INVALID = 4


class Command(str, Enum):
    BANDS = "bands"
    VALIDATE_FREQ = "validate-freq"
    RATIONALITY = "rationality"
    BREATHER = "breather"
    MODES = "modes"
    SIMULATE = "simulate"
    REPORT = "report"


BREATHER_COMMANDS = {Command.BREATHER, Command.MODES, Command.SIMULATE}


class PlotKind(str, Enum):
    TRACE = "trace"
    PROFILE = "profile"
    SPACETIME = "spacetime"


# ============================================================================
# Float and JSON formatting
# ============================================================================


def format_float(x: float) -> str:
    """17 significant digits, '.' separator, independent of locale"""
    return format(float(x), ".17g")


def _encode(value: Any, indent: int, level: int) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool | np.bool_):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return _encode(value.value, indent, level)
    if isinstance(value, int | np.integer):
        return str(int(value))
    if isinstance(value, float | np.floating):
        return format_float(value) if math.isfinite(value) else "null"
    if isinstance(value, str | Fraction | Path):
        return json.dumps(str(value))
    if isinstance(value, np.ndarray):
        value = value.tolist()
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, list | tuple):
        if not value:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(payload: Any, indent: int = 2) -> str:
    return _encode(payload, indent, 0) + "\n"


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    """Write payload with a leading schema version"""
    document = {"schema": SCHEMA_VERSION, **payload}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(document), encoding="utf-8")
    logger.info(f"wrote {path}")
    return path


# ============================================================================
# CSV datasets
# ============================================================================


def _write_csv(path: Path, header: list[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float | np.floating) else v for v in row])
    logger.info(f"wrote {path}")
    return path


def write_profile_csv(path: Path, profile: GraphProfile) -> Path:
    """x,u,uprime,cell,segment; vertex rows appear twice (left side first)"""
    return _write_csv(path, PROFILE_HEADER, profile.csv_rows())


def write_scan_csv(path: Path, rows: Iterable[tuple[float, float, str]]) -> Path:
    return _write_csv(path, SCAN_HEADER, rows)


def write_snapshots_csv(path: Path, grid: GraphGrid, snapshots: list[tuple[float, np.ndarray]]) -> Path:
    x = grid.x
    rows = ((float(t), float(xi), float(ui)) for t, u in snapshots for xi, ui in zip(x, u))
    return _write_csv(path, SNAPSHOT_HEADER, rows)


class ProfileTable(NamedTuple):
    x: np.ndarray
    u: np.ndarray
    uprime: np.ndarray
    cell: np.ndarray
    segment: list[str]


def read_profile_csv(path: Path) -> ProfileTable:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PROFILE_HEADER:
            raise ConfigurationError(f"{path} is not a profile dataset (header {reader.fieldnames})")
        rows = list(reader)
    return ProfileTable(
        np.array([float(r["x"]) for r in rows]),
        np.array([float(r["u"]) for r in rows]),
        np.array([float(r["uprime"]) for r in rows]),
        np.array([int(r["cell"]) for r in rows]),
        [r["segment"] for r in rows],
    )


# ============================================================================
# Plot scripts
# ============================================================================

_TRACE_SCRIPT = Template('''"""Trace of the monodromy matrix against lambda."""
import csv

import matplotlib.pyplot as plt

DATASETS = $datasets
MARKERS = $markers

fig, ax = plt.subplots(figsize=(8, 4))
for path in DATASETS:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ax.plot([float(r["lambda"]) for r in rows], [float(r["trace"]) for r in rows], lw=1, label=path)
ax.axhline(2.0, color="red", ls="--", lw=0.8)
ax.axhline(-2.0, color="red", ls="--", lw=0.8)
for lam in MARKERS:
    ax.axvline(lam, color="green", ls=":", lw=0.8)
ax.set_xlabel("lambda")
ax.set_ylabel("tr M(lambda)")
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig($image, dpi=150)
''')

_PROFILE_SCRIPT = Template('''"""Profiles on the necklace with vertex gridlines."""
import csv

import matplotlib.pyplot as plt

DATASETS = $datasets

fig, ax = plt.subplots(figsize=(9, 4))
vertices = set()
for path in DATASETS:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    x = [float(r["x"]) for r in rows]
    ax.plot(x, [float(r["u"]) for r in rows], lw=1, label=path)
    # vertex rows are written twice
    vertices.update(a for a, b in zip(x[:-1], x[1:]) if a == b)
for xv in sorted(vertices):
    ax.axvline(xv, color="0.85", lw=0.5, zorder=0)
ax.set_xlabel("x")
ax.set_ylabel("u")
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig($image, dpi=150)
''')

_SPACETIME_SCRIPT = Template('''"""Space-time heat map of u(t, x)."""
import csv

import matplotlib.pyplot as plt
import numpy as np

DATASET = $dataset

with open(DATASET, newline="") as fh:
    rows = list(csv.DictReader(fh))
t = np.array([float(r["t"]) for r in rows])
x = np.array([float(r["x"]) for r in rows])
u = np.array([float(r["u"]) for r in rows])
times = np.unique(t)
xs = x[t == times[0]]
field = u.reshape(times.size, xs.size)

fig, ax = plt.subplots(figsize=(9, 4))
mesh = ax.pcolormesh(xs, times, field, shading="auto", cmap="RdBu_r")
fig.colorbar(mesh, ax=ax, label="u")
ax.set_xlabel("x")
ax.set_ylabel("t")
fig.tight_layout()
fig.savefig($image, dpi=150)
''')


def emit_plot_script(
    datasets: Sequence[Path],
    kind: PlotKind,
    out_path: Path,
    markers: Sequence[float] = (),
) -> Path:
    """Write a standalone matplotlib script rendering the given CSV datasets"""
    if not datasets:
        raise ConfigurationError("no datasets given for the plot script")
    missing = [str(p) for p in datasets if not Path(p).exists()]
    if missing:
        raise ConfigurationError(f"dataset(s) not found: {', '.join(missing)}")

    names = [str(p) for p in datasets]
    image = repr(str(Path(out_path).with_suffix(".png")))
    if kind is PlotKind.TRACE:
        text = _TRACE_SCRIPT.substitute(
            datasets=repr(names), markers=repr([float(m) for m in markers]), image=image
        )
    elif kind is PlotKind.PROFILE:
        text = _PROFILE_SCRIPT.substitute(datasets=repr(names), image=image)
    else:
        if len(names) != 1:
            raise ConfigurationError("a space-time plot takes exactly one snapshot dataset")
        text = _SPACETIME_SCRIPT.substitute(dataset=repr(names[0]), image=image)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(text, encoding="utf-8")
    logger.info(f"wrote {kind.value} plot script {out_path}")
    return out_path


# ============================================================================
# Run configuration
# ============================================================================


def _parse_link(text: str) -> Fraction:
    try:
        return Fraction(str(text).strip())
    except ValueError as exc:
        raise ValueError(f"l must be a number, got {text!r}") from exc


class RunConfig(BaseModel):
    """Validated parameters of one CLI invocation"""

    model_config = ConfigDict(extra="forbid")

    command: Command = Field(..., description="Subcommand to run")
    k: int = Field(1, description="Breather frequency index, omega = k/2")
    l: str = Field("1", description="Link multiplier, L = l*pi")
    eps: list[float] = Field(default_factory=lambda: [0.05], description="Amplitude parameters")
    family: Family = Field(Family.LINK_CENTERED, description="Symmetry point of the bound state")
    mmax: int | None = Field(None, description="Highest odd harmonic")
    dx: float | None = Field(None, description="Grid spacing (rounded to pi/N, N even)")
    dt: float | None = Field(None, description="Time step")
    cells: int | None = Field(None, description="Cells per side of the window")
    periods: int = Field(1, description="Simulated periods")
    lmin: float = Field(-0.5, description="Lower end of the lambda scan")
    lmax: float = Field(10.0, description="Upper end of the lambda scan")
    n: int = Field(2001, description="Lambda grid size")
    out: str = Field(default_factory=lambda: config.output.out_dir, description="Output directory")
    jobs: int = Field(default_factory=lambda: config.runner.jobs, description="Parallel workers")
    strict: bool = Field(False, description="Exit with code 4 on an invalid verdict")
    snapshots: bool = Field(False, description="Write quarter-period snapshots")
    verbose: bool = False
    quiet: bool = False

    @field_validator("eps", mode="before")
    @classmethod
    def _split_eps(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [float(v) for v in value.replace(",", " ").split()]
        if isinstance(value, int | float):
            return [float(value)]
        return value

    @field_validator("l", mode="before")
    @classmethod
    def _link_text(cls, value: Any) -> str:
        return str(value).strip()

    @model_validator(mode="after")
    def _check(self) -> RunConfig:
        cmd = self.command
        if cmd in BREATHER_COMMANDS or cmd is Command.VALIDATE_FREQ:
            if self.k < 1 or self.k % 2 == 0:
                raise ValueError(f"k must be odd, got {self.k} (breather frequencies are omega = k/2, k odd)")
        if cmd in BREATHER_COMMANDS or cmd is Command.VALIDATE_FREQ:
            link = _parse_link(self.l)
            if link.denominator != 1 or link < 1:
                raise ValueError(f"l must be a positive integer, got {self.l}")
        if cmd in BREATHER_COMMANDS:
            if int(_parse_link(self.l)) % 2 == 0:
                raise ValueError(
                    f"l must be odd, got {self.l}: even l violates the gap condition "
                    "(run `necklace validate-freq` for details)"
                )
            if not self.eps:
                raise ValueError("at least one eps is required")
            for e in self.eps:
                if not 0.0 < e <= 0.5:
                    raise ValueError(f"eps must lie in (0, 0.5], got {e}")
        if cmd is Command.BANDS:
            if _parse_link(self.l) <= 0:
                raise ValueError(f"l must be positive, got {self.l}")
            if self.n < 2:
                raise ValueError(f"n must be >= 2, got {self.n}")
            if not self.lmin < self.lmax:
                raise ValueError("lmin must be smaller than lmax")
        if self.mmax is None:
            self.mmax = 99 if cmd is Command.VALIDATE_FREQ else 3
        if self.mmax < 1 or self.mmax % 2 == 0:
            raise ValueError(f"mmax must be odd, got {self.mmax}")
        if cmd is Command.VALIDATE_FREQ and self.mmax < 3:
            raise ValueError("mmax must be >= 3 for validate-freq")
        for name in ("dx", "dt"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cells is not None and self.cells < 1:
            raise ValueError("cells must be >= 1")
        if self.periods < 1:
            raise ValueError("periods must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        return self

    @property
    def link(self) -> int:
        return int(_parse_link(self.l))

    @property
    def samples_per_pi(self) -> int:
        """Even N with pi/N closest to dx"""
        if self.dx is None:
            return config.numerics.samples_per_pi
        n = max(2, 2 * round(math.pi / (2.0 * self.dx)))
        if abs(math.pi / n - self.dx) > 1e-6 * self.dx:
            logger.info(f"dx={self.dx} rounded to pi/{n} = {math.pi / n:.6g}")
        return n

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


FILE_KEYS = set(RunConfig.model_fields) - {"command"}


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat `key = value` file; unknown keys are rejected"""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    raw = dotenv_values(path)
    values: dict[str, str] = {}
    for key, value in raw.items():
        name = key.strip().lower().replace("-", "_")
        if name not in FILE_KEYS:
            raise ConfigurationError(f"unknown config key {key!r} in {path}")
        if value is None:
            raise ConfigurationError(f"config key {key!r} in {path} has no value")
        values[name] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="Flat key = value configuration file")
    common.add_argument("--out", help="Output directory (default: $NECKLACE_OUT)")
    common.add_argument("--jobs", type=int, help="Parallel workers for --eps sweeps")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--quiet", action="store_true", help="Warnings and errors only")

    parser = argparse.ArgumentParser(
        prog="necklace",
        description="Floquet spectrum, bound states and breathers on the periodic necklace graph",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Band structure for L = pi
  necklace bands --l 1 --lmin -0.5 --lmax 10 --n 2001

  # Check the frequency omega = 1/2
  necklace validate-freq --k 1 --l 1 --strict

  # Bound state, coupled modes and time-domain check
  necklace breather --k 1 --l 1 --eps 0.05 --family circle
  necklace modes --k 1 --l 1 --eps 0.1 0.05 0.025 --mmax 5 --jobs 3
  necklace simulate --k 1 --l 1 --eps 0.1 --mmax 5 --periods 10

Exit codes:
  0 = success, 2 = usage error, 3 = numerical failure,
  4 = invalid verdict (validate-freq --strict)
        """,
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    def add_command(name: str, help: str) -> argparse.ArgumentParser:
        # options left off the command line stay out of the namespace
        return subparsers.add_parser(name, parents=[common], help=help, argument_default=argparse.SUPPRESS)

    bands = add_command("bands", help="Scan tr M over a lambda range")
    bands.add_argument("--l", help="Link multiplier (rational allowed)")
    bands.add_argument("--lmin", type=float, help="Lower lambda")
    bands.add_argument("--lmax", type=float, help="Upper lambda")
    bands.add_argument("--n", type=int, help="Grid size")
    bands.add_argument("--k", type=int, help="Mark lambda_m for omega = k/2")

    freq = add_command("validate-freq", help="Check the gap condition")
    freq.add_argument("--k", type=int, help="Odd frequency index")
    freq.add_argument("--l", help="Link multiplier")
    freq.add_argument("--mmax", type=int, help="Highest odd mode checked (default 99)")
    freq.add_argument("--strict", action="store_true", help="Exit 4 on an invalid verdict")

    rational = add_command("rationality", help="Trace periodicity in l")
    rational.add_argument("--l", help="Link multiplier: integer, p/q, decimal or sqrt(n)")

    def add_breather_options(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--k", type=int, help="Odd frequency index")
        sub.add_argument("--l", help="Odd link multiplier")
        sub.add_argument("--eps", type=float, nargs="+", help="One or more eps values")
        sub.add_argument("--family", choices=[f.value for f in Family], help="Symmetry point")
        sub.add_argument("--dx", type=float, help="Grid spacing")
        sub.add_argument("--cells", type=int, help="Cells per side")

    breather = add_command("breather", help="Homoclinic bound state")
    add_breather_options(breather)

    modes = add_command("modes", help="Coupled-mode boundary-value problem")
    add_breather_options(modes)
    modes.add_argument("--mmax", type=int, help="Highest odd harmonic")

    simulate = add_command("simulate", help="Time-domain breather check")
    add_breather_options(simulate)
    simulate.add_argument("--mmax", type=int, help="Highest odd harmonic")
    simulate.add_argument("--periods", type=int, help="Number of periods")
    simulate.add_argument("--dt", type=float, help="Time step")
    simulate.add_argument("--snapshots", action="store_true", help="Quarter-period t,x,u snapshots")

    add_command("report", help="Aggregate JSON outputs into summary.json")
    return parser


def parse_config(argv: Sequence[str] | None, config_file: str | Path | None = None) -> RunConfig:
    """
    Merge built-in defaults, the config file and CLI flags (in increasing
    precedence) into a RunConfig.
    """
    parser = build_parser()
    values = vars(parser.parse_args(argv))
    command = values.pop("command", None)
    if command is None:
        parser.print_help()
        raise ConfigurationError("a subcommand is required")

    file_path = values.pop("config", None) or config_file
    merged: dict[str, Any] = read_config_file(file_path) if file_path else {}
    merged.update({key: value for key, value in values.items() if value is not None})
    try:
        return RunConfig(command=command, **merged)
    except ValidationError as exc:
        messages = "; ".join(str(err["msg"]).removeprefix("Value error, ") for err in exc.errors())
        raise ConfigurationError(messages) from exc


# ============================================================================
# Subcommands
# ============================================================================


def _eps_tag(eps: float) -> str:
    return format(eps, "g")


def _sweep(cfg: RunConfig, job: Callable[[RunConfig, float], dict[str, Any]]) -> list[dict[str, Any]]:
    """
    Run job for every eps, in worker processes when cfg.jobs > 1.

    job must be a module-level function so it can be pickled; each call
    writes its own files. Results come back in cfg.eps order.
    """
    if cfg.jobs == 1 or len(cfg.eps) == 1:
        return [job(cfg, eps) for eps in cfg.eps]
    results: dict[float, dict[str, Any]] = {}
    with ProcessPoolExecutor(max_workers=cfg.jobs) as executor:
        future_to_eps = {executor.submit(job, cfg, eps): eps for eps in cfg.eps}
        for future in as_completed(future_to_eps):
            results[future_to_eps[future]] = future.result()
    return [results[eps] for eps in cfg.eps]


def run_bands(cfg: RunConfig) -> int:
    link = _parse_link(cfg.l)
    geometry = Geometry(float(link))
    scan = scan_bands(geometry, cfg.lmin, cfg.lmax, cfg.n)
    tag = f"bands_l{str(link).replace('/', '_')}"
    csv_path = write_scan_csv(cfg.out_dir / f"{tag}.csv", scan.csv_rows())
    write_json(
        cfg.out_dir / f"{tag}.json",
        {
            "command": cfg.command,
            "l": cfg.l,
            "range": [cfg.lmin, cfg.lmax],
            "n": cfg.n,
            "bands": scan.bands,
            "gaps": scan.gaps,
            "edges": scan.edges,
            "touchings": scan.touchings,
            "warnings": scan.warnings,
        },
    )
    omega = cfg.k / 2.0
    markers = [
        m * m * omega * omega - omega * omega
        for m in range(1, 200, 2)
        if cfg.lmin <= m * m * omega * omega - omega * omega <= cfg.lmax
    ]
    emit_plot_script([csv_path], PlotKind.TRACE, cfg.out_dir / f"plot_{tag}.py", markers)
    print(f"{len(scan.bands)} band(s), {len(scan.gaps)} gap(s) in [{cfg.lmin}, {cfg.lmax}]")
    return EXIT_OK


def run_validate_freq(cfg: RunConfig) -> int:
    report = validate_frequency(cfg.k, cfg.link, cfg.mmax or 99)
    write_json(cfg.out_dir / f"validate_k{cfg.k}_l{cfg.link}.json", report.to_dict())
    print(f"k={cfg.k} l={cfg.link}: {report.verdict}")
    for reason in report.reasons[:5]:
        print(f"  [!] {reason}")
    if cfg.strict and not report.valid:
        return EXIT_INVALID
    return EXIT_OK


def run_rationality(cfg: RunConfig) -> int:
    report = rationality_check(cfg.l)
    safe = "".join(c if c.isalnum() else "_" for c in cfg.l)
    write_json(cfg.out_dir / f"rationality_l{safe}.json", report.to_dict())
    print(f"l={cfg.l}: {report.note}")
    return EXIT_OK


def _breather_job(cfg: RunConfig, eps: float) -> dict[str, Any]:
    state = find_bound_state(eps, cfg.family, cfg.link, cfg.k, cfg.cells, cfg.samples_per_pi)
    tag = f"breather_eps{_eps_tag(eps)}_{cfg.family.value}"
    csv_path = write_profile_csv(cfg.out_dir / f"{tag}.csv", state.profile)
    write_json(cfg.out_dir / f"{tag}.json", state.to_dict())
    emit_plot_script([csv_path], PlotKind.PROFILE, cfg.out_dir / f"plot_{tag}.py")
    return state.to_dict()


def run_breather_command(cfg: RunConfig) -> int:
    for summary in _sweep(cfg, _breather_job):
        print(f"eps={summary['eps']}: amplitude={summary['amplitude']:.10g}, beta_hat={summary['beta_hat']:.5g}")
    return EXIT_OK


def _write_modes(cfg: RunConfig, stack: ModeStack) -> list[Path]:
    paths = []
    for m in odd_modes(stack.m_max):
        path = cfg.out_dir / f"modes_eps{_eps_tag(stack.eps)}_m{m}.csv"
        paths.append(write_profile_csv(path, stack.mode(m)))
    return paths


def run_modes(cfg: RunConfig) -> int:
    mmax = cfg.mmax or 3
    report: SlavingReport = slaving_report(
        cfg.eps, cfg.k, cfg.link, mmax, cfg.jobs, cfg.cells, cfg.samples_per_pi
    )
    for eps in cfg.eps:
        paths = _write_modes(cfg, report.stacks[eps])
        emit_plot_script(paths, PlotKind.PROFILE, cfg.out_dir / f"plot_modes_eps{_eps_tag(eps)}.py")
    write_json(cfg.out_dir / f"modes_k{cfg.k}_l{cfg.link}_M{mmax}.json", report.to_dict())
    for m, slope in report.slopes.items():
        print(f"slope |u_{m}| vs |u_1|: {slope:.3f}")
    return EXIT_OK


def _simulate_job(cfg: RunConfig, eps: float) -> dict[str, Any]:
    mmax = cfg.mmax or 3
    stack = solve_bvp(eps, cfg.k, cfg.link, mmax, cfg.cells, cfg.samples_per_pi, family=cfg.family)
    diagnostics = run_breather(stack, cfg.dt, cfg.periods, snapshots=cfg.snapshots)
    tag = f"simulate_eps{_eps_tag(eps)}"
    write_json(cfg.out_dir / f"{tag}.json", {"eps": eps, "m_max": mmax, **diagnostics.to_dict()})
    if cfg.snapshots:
        csv_path = write_snapshots_csv(
            cfg.out_dir / f"{tag}_snapshots.csv", diagnostics.grid, diagnostics.snapshots
        )
        emit_plot_script([csv_path], PlotKind.SPACETIME, cfg.out_dir / f"plot_{tag}.py")
    return {"eps": eps, **diagnostics.to_dict()}


def run_simulate(cfg: RunConfig) -> int:
    for summary in _sweep(cfg, _simulate_job):
        print(f"eps={summary['eps']}: rho={summary['rho']:.3e}, energy drift={summary['energy_drift']:.3e}")
    return EXIT_OK


def report(out_dir: Path) -> Path:
    """Collect every JSON output of out_dir into summary.json (sorted by name)"""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise ConfigurationError(f"output directory not found: {out_dir}")
    runs = []
    for path in sorted(out_dir.glob("*.json")):
        if path.name == SUMMARY_NAME:
            continue
        content = json.loads(path.read_text(encoding="utf-8"))
        content.pop("schema", None)
        runs.append({"file": path.name, **content})
    return write_json(out_dir / SUMMARY_NAME, {"runs": runs})


def run_report(cfg: RunConfig) -> int:
    path = report(cfg.out_dir)
    print(f"summary written to {path}")
    return EXIT_OK


HANDLERS: dict[Command, Callable[[RunConfig], int]] = {
    Command.BANDS: run_bands,
    Command.VALIDATE_FREQ: run_validate_freq,
    Command.RATIONALITY: run_rationality,
    Command.BREATHER: run_breather_command,
    Command.MODES: run_modes,
    Command.SIMULATE: run_simulate,
    Command.REPORT: run_report,
}


def run_command(cfg: RunConfig) -> int:
    issues = config.validate()
    if issues:
        raise ConfigurationError("; ".join(issues))
    logger.debug(config.summary())
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"running {cfg.command.value} into {cfg.out_dir}")
    return HANDLERS[cfg.command](cfg)
