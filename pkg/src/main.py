"""
necklace command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
4 invalid frequency verdict under --strict.
"""

import logging
import sys
from collections.abc import Sequence

from src.cli_io import EXIT_NUMERICAL, EXIT_USAGE, RunConfig, parse_config, run_command
from src.errors import ConfigurationError, NecklaceError

logger = logging.getLogger("necklace")


def configure_logging(cfg: RunConfig) -> None:
    level = logging.INFO
    if cfg.verbose:
        level = logging.DEBUG
    elif cfg.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigurationError as e:
        print(f"necklace: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # argparse exits 2 on bad flags and 0 after --help
        return int(e.code or 0)

    configure_logging(cfg)
    try:
        return run_command(cfg)
    except ConfigurationError as e:
        logger.error(f"configuration error: {e}")
        return EXIT_USAGE
    except NecklaceError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
