"""Command-line entry point: ``nemscat {couplings,simulate,oracle,figure,sweep}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DomainError, NumericalGateError
from .params import raw_couplings, effective_model
from .scenario import (
    PLOT_COLUMNS,
    PRESET_NAMES,
    ScenarioResult,
    figure_preset,
    parse_config,
    run_scenario,
    reference_device,
    sweep,
    with_outputs,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def write_result(result: ScenarioResult, out_dir: Path, fmt: str, prefix: str = "") -> list[Path]:
    from .plotting import emit_orbits_svg, emit_svg

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, payload in result.payloads.items():
        stem = f"{prefix}{kind}"
        if fmt in ("csv", "both"):
            p = out_dir / f"{stem}.csv"
            p.write_text(payload)
            written.append(p)
        if fmt in ("svg", "both"):
            p = out_dir / f"{stem}.svg"
            title = result.manifest.get("name")
            if result.manifest.get("sweep"):
                if kind != "sweep_summary":
                    continue
                x = payload.split(",", 1)[0]
                emit_svg(payload, ["first_revival_height"], p, x=x, title=title)
            elif kind == "orbits":
                emit_orbits_svg(payload, p, title=title)
            elif kind in PLOT_COLUMNS:
                cols = list(PLOT_COLUMNS[kind])
                if kind == "decoherence":
                    header = payload.split("\n", 1)[0].split(",")
                    cols += [c for c in header if c.startswith("abs_f2_") and c not in cols]
                emit_svg(payload, cols, p, title=title)
            else:
                continue
            written.append(p)
    manifest = out_dir / f"{prefix}manifest.json"
    manifest.write_text(json.dumps(result.manifest, indent=2, sort_keys=True) + "\n")
    written.append(manifest)
    return written


def _load(args):
    if getattr(args, "preset", None):
        return figure_preset(args.preset)
    if not args.config:
        raise ConfigError("give --config FILE or --preset NAME")
    return parse_config(args.config)


def cmd_couplings(args) -> int:
    if args.config:
        cfg = parse_config(args.config)
        if cfg.device is None:
            raise ConfigError("couplings needs a device-units config")
        device = cfg.device
    else:
        device = reference_device()
    raw = raw_couplings(device)
    model = effective_model(raw.g, raw.lam, device.delta)
    rows = [
        ("x_rms", raw.x_rms), ("epsilon", raw.epsilon), ("theta", raw.theta), ("g", raw.g),
        ("lambda", raw.lam), ("chi_cross", raw.chi_cross), ("lambda_over_g", raw.lam / raw.g),
        ("chi", model.chi), ("Omega", model.Omega), ("kappa", model.kappa),
        ("omega_bar", model.omega_bar), ("Delta", model.Delta), ("R", model.R),
    ]
    text = "quantity,value\n" + "".join(f"{k},{format(v, '.17g')}\n" for k, v in rows)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "couplings.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    result = run_scenario(cfg)
    for p in write_result(result, Path(args.out_dir), args.format):
        print(p)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = with_outputs(_load(args), ["oracle_compare"])
    result = run_scenario(cfg)
    for p in write_result(result, Path(args.out_dir), args.format):
        print(p)
    return EXIT_OK


def cmd_figure(args) -> int:
    cfg = figure_preset(args.name)
    if args.dump_config:
        sys.stdout.write(cfg.to_json())
        return EXIT_OK
    result = run_scenario(cfg)
    for p in write_result(result, Path(args.out_dir), args.format, prefix=f"{args.name}_"):
        print(p)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    result = sweep(cfg, args.param, args.start, args.stop, args.steps)
    for p in write_result(result, Path(args.out_dir), args.format, prefix="sweep_"):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nemscat", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, outputs=True):
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--preset", choices=PRESET_NAMES, help="use a built-in figure preset instead of --config")
        if outputs:
            p.add_argument("--out-dir", default="out")
            p.add_argument("--format", choices=("csv", "svg", "both"), default="both")

    p = sub.add_parser("couplings", help="device parameters -> couplings (defaults to the built-in estimates)")
    p.add_argument("--config", help="device-units scenario JSON file")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_couplings)

    p = sub.add_parser("simulate", help="run the outputs listed in a scenario")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="Lindblad oracle vs closed form for a scenario")
    common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("figure", help="reproduce the data behind a figure")
    p.add_argument("name", help=f"one of: {', '.join(PRESET_NAMES)}")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--format", choices=("csv", "svg", "both"), default="both")
    p.add_argument("--dump-config", action="store_true", help="print the preset's JSON config and exit")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("sweep", help="repeat a scenario over a range of one scalar parameter")
    common(p)
    p.add_argument("--param", required=True, help="dotted config path, e.g. model.kappa")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGateError as exc:
        print(f"numerical gate: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
