"""Command-line entry point ``ckduffing``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments
from .config import PRESETS, apply_overrides, parse_assignment, preset_config, iter_assignments
from .errors import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, ConfigError, NumericalError, ParameterError

COMMANDS = {
    ("classical", "poincare"): experiments.write_poincare,
    ("classical", "lyapunov"): experiments.write_lyapunov,
    ("classical", "freqresponse"): experiments.write_freqresponse,
    ("quantum", "evolve"): experiments.write_quantum_evolve,
    ("quantum", "husimi"): experiments.write_quantum_husimi,
    ("quantum", "otoc"): experiments.write_otoc,
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--out", type=Path, help="output directory (default: outputs.dir)")
    p.add_argument("--seed", type=int, help="ensemble seed (same as --set ensemble.seed=N)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ckduffing", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)
    for group in ("classical", "quantum"):
        g = groups.add_parser(group).add_subparsers(dest="command", required=True)
        for (grp, name), func in COMMANDS.items():
            if grp == group:
                _common(g.add_parser(name, help=(func.__doc__ or "").strip().split("\n")[0] or None))
    regime = groups.add_parser("regime").add_subparsers(dest="command", required=True)
    run = regime.add_parser("run", help="three-panel snapshot of one of the four regimes")
    run.add_argument("preset", choices=sorted(PRESETS))
    _common(run)
    return parser


def resolve_config(args) -> "experiments.ExperimentConfig":
    items = []
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror or exc}") from None
        items = list(iter_assignments(text))
    file_presets = [v for _, k, v in items if k == "preset"]
    if len(file_presets) > 1:
        raise ConfigError("preset given more than once", key="preset")
    name = getattr(args, "preset", None) or (file_presets[0] if file_presets else "chaotic-dissipative")
    cfg = preset_config(name)
    items = [it for it in items if it[1] != "preset"]
    items += [(None, *parse_assignment(s)) for s in args.overrides]
    if args.seed is not None:
        items.append((None, "ensemble.seed", str(args.seed)))
    if args.out is not None:
        items.append((None, "outputs.dir", str(args.out)))
    return apply_overrides(cfg, items)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(cfg.outputs.dir)
        if args.group == "regime":
            files = experiments.run_regime(cfg, out).files
        else:
            files = COMMANDS[(args.group, args.command)](cfg, out)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for f in files:
        print(f)
    print(out / "manifest.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
