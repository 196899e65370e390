"""
Configuration module for the necklace breather toolkit
Loads settings from environment variables and .env file
"""

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load .env file - try package directory first, then repository root
current_dir_env = Path(__file__).parent / ".env"
parent_dir_env = Path(__file__).parent.parent / ".env"

if current_dir_env.exists():
    load_dotenv(current_dir_env)
elif parent_dir_env.exists():
    load_dotenv(parent_dir_env)


@dataclass
class NumericsConfig:
    """Discretization and tolerance defaults"""

    samples_per_pi: int = int(os.getenv("NECKLACE_SAMPLES_PER_PI", "200"))
    edge_tol: float = float(os.getenv("NECKLACE_EDGE_TOL", "1e-9"))
    scan_edge_tol: float = float(os.getenv("NECKLACE_SCAN_EDGE_TOL", "1e-6"))
    newton_tol: float = float(os.getenv("NECKLACE_NEWTON_TOL", "1e-10"))
    bisection_rtol: float = float(os.getenv("NECKLACE_BISECTION_RTOL", "1e-14"))

    @property
    def dx(self) -> float:
        return math.pi / self.samples_per_pi


@dataclass
class OutputConfig:
    """Where results are written"""

    out_dir: str = os.getenv("NECKLACE_OUT", "necklace_out")


@dataclass
class RunnerConfig:
    """Parameter sweep execution"""

    jobs: int = int(os.getenv("NECKLACE_JOBS", "1"))


class Config:
    """Main configuration class"""

    def __init__(self) -> None:
        self.numerics = NumericsConfig()
        self.output = OutputConfig()
        self.runner = RunnerConfig()

    def validate(self) -> list[str]:
        """Validate configuration and return list of issues"""
        issues = []

        spp = self.numerics.samples_per_pi
        if spp < 2 or spp % 2:
            issues.append(f"NECKLACE_SAMPLES_PER_PI must be an even integer >= 2, got {spp}")
        for name in ("edge_tol", "scan_edge_tol", "newton_tol", "bisection_rtol"):
            if getattr(self.numerics, name) <= 0:
                issues.append(f"{name} must be positive")
        if self.runner.jobs < 1:
            issues.append(f"NECKLACE_JOBS must be >= 1, got {self.runner.jobs}")

        return issues

    def summary(self) -> str:
        """One-line summary of the active numerics"""
        n = self.numerics
        return f"dx=pi/{n.samples_per_pi}, newton_tol={n.newton_tol:g}, out={self.output.out_dir}"


# Global config instance
config = Config()
