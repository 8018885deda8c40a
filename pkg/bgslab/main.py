import argparse
import logging
from pathlib import Path

from bgslab.config import settings
from bgslab.core.errors import ConfigurationError
from bgslab.schemas.run_config import KappaPlotKind
from bgslab.services.harness_service import run_heatmap, run_kappa_plot
from bgslab.services.run_config_service import PRESETS, build_run_config, preset_command_line

logger = logging.getLogger(__name__)

KAPPA_COMMANDS = {
    "kappa": KappaPlotKind.STANDARD,
    "glued-kappa": KappaPlotKind.GLUED,
    "monomial-kappa": KappaPlotKind.MONOMIAL,
}

# argparse dest -> config key
_FLAG_KEYS = (
    "dims", "mats", "skels", "muscs", "rpltol", "seed", "out", "format",
    "t_fix", "reorth_first", "auto_shift", "convert_t_form", "exps", "metrics", "workers",
)


def _add_run_flags(parser: argparse.ArgumentParser, *, sweep_help: str | None) -> None:
    parser.add_argument("--config", type=Path, help="flat KEY=value file with the same keys as the flags")
    parser.add_argument("--preset", help="start from a named configuration (see the presets command)")
    parser.add_argument("--dims", help="m,p,s")
    parser.add_argument("--mats", help="comma-separated matrix kinds")
    parser.add_argument("--skels", help="comma-separated skeletons, or 'none' for column-wise runs")
    parser.add_argument("--muscs", help="comma-separated muscles")
    parser.add_argument("--rpltol", type=float, help="replacement tolerance of the SROR variants")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--format", help="comma-separated subset of csv,json,svg")
    parser.add_argument("--t-fix", dest="t_fix", action="store_true", default=None)
    parser.add_argument("--reorth-first", dest="reorth_first", action="store_true", default=None)
    parser.add_argument("--auto-shift", dest="auto_shift", action="store_true", default=None)
    parser.add_argument(
        "--convert-t-form",
        dest="convert_t_form",
        action="store_true",
        default=None,
        help="hand T blocks to the skeleton in its own form instead of as the muscle returns them",
    )
    parser.add_argument("--workers", type=int)
    if sweep_help is not None:
        parser.add_argument("--exps", help=sweep_help)
        parser.add_argument("--metrics", help="comma-separated subset of loo,rel_res,rel_chol_res")


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="bgslab",
        description="Stability experiments for block Gram-Schmidt skeleton/muscle combinations.",
    )
    parser.add_argument("--log-level", default=None, help=f"defaults to {settings.LOG_LEVEL}")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("heatmap", help="skeleton x muscle grids per matrix kind"), sweep_help=None)
    _add_run_flags(sub.add_parser("kappa", help="sweep Sigma = logspace(0, -t, n)"), sweep_help="exponents t, e.g. 1:16")
    _add_run_flags(sub.add_parser("glued-kappa", help="sweep glued matrices"), sweep_help="exponents e with kappa ~ 10^e, e.g. 1:8")
    _add_run_flags(sub.add_parser("monomial-kappa", help="sweep monomial generator block sizes"), sweep_help="block sizes, e.g. 2:2:12")
    sub.add_parser("presets", help="list the preset configurations as command lines")
    return parser.parse_args(argv)


def _configure_logging(level: str | None) -> None:
    name = (level or settings.LOG_LEVEL).upper()
    value = logging.getLevelName(name)
    logging.basicConfig(
        level=value if isinstance(value, int) else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(argv)
    _configure_logging(args.log_level)

    if args.command == "presets":
        for preset in PRESETS.values():
            print(f"# {preset.name}: {preset.description}")
            print(preset_command_line(preset))
        return 0

    overrides = {key: getattr(args, key, None) for key in _FLAG_KEYS}
    try:
        cfg = build_run_config(args.command, preset=args.preset, config_file=args.config, overrides=overrides)
        if args.command == "heatmap":
            output = run_heatmap(cfg)
        else:
            output = run_kappa_plot(KAPPA_COMMANDS[args.command], cfg)
    except ConfigurationError as exc:
        logger.error("invalid configuration: %s", exc)
        return 2

    failed = sum(1 for record in output.records if record.reason is not None)
    logger.info(
        "%s: %s cells (%s without a result), %s files in %s",
        args.command, len(output.records), failed, len(output.files), cfg.output_dir,
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
