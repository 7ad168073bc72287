"""Command-line surface: run an experiment, verify a config, or serve the API"""

import argparse
import logging
import sys
from typing import List, Optional

import src
from src.config import Config
from src.exceptions import ConfigError
from src.experiments import EXIT_CONFIG, EXIT_PASS, run_experiment
from src.run_config import parse_config

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(level: str = Config.LOG_LEVEL, verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snls",
        description="Stochastic two-component NLS solvers and Ito-identity checks",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {src.__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run the experiment named in a config file")
    run.add_argument("--config", required=True, help="INI run configuration")
    run.add_argument("--seed", type=int, help="override [experiment] seed")
    run.add_argument("--out", help="override [experiment] output_dir")
    run.add_argument("--paths", type=int, help="override [experiment] n_paths")
    run.add_argument("--dt", type=float, help="override [solver] dt")
    run.add_argument("--workers", type=int, help="ensemble worker processes")

    verify = commands.add_parser("verify", help="validate a config file without running it")
    verify.add_argument("--config", required=True, help="INI run configuration")

    serve = commands.add_parser("serve", help="start the HTTP API")
    serve.add_argument("--host", default=Config.API_HOST)
    serve.add_argument("--port", type=int, default=Config.API_PORT)
    serve.add_argument("--reload", action="store_true")
    return parser


def _report_config_error(exc: ConfigError):
    where = f" ({exc.source})" if exc.source else ""
    print(f"configuration invalid{where}:", file=sys.stderr)
    for violation in exc.violations:
        print(f"  - {violation}", file=sys.stderr)


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {"seed": args.seed, "out": args.out, "paths": args.paths, "dt": args.dt}
    try:
        config = parse_config(args.config, overrides)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    outcome = run_experiment(config, workers=args.workers)
    print(f"{config.experiment}: {outcome.status} -> {outcome.output_dir}")
    return outcome.exit_code


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    print(f"{args.config}: ok (experiment={config.experiment}, hash={config.config_hash[:12]})")
    return EXIT_PASS


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("src.app:app", host=args.host, port=args.port, reload=args.reload)
    return EXIT_PASS


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "serve": cmd_serve}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(verbose=args.verbose)
    return COMMANDS[args.command](args)
