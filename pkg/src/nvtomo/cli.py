"""Command line entry point: ``nvtomo <subcommand> [--config FILE] [--key value ...]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io, pipeline, physics
from .config import ConfigError, RunConfig, load_config
from .encoder import max_occupied_spread
from .phantom import EmptyMoleculeError, ParseError
from .timing import METHODS, estimate_time

log = logging.getLogger("nvtomo")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags below override it")
    group = p.add_argument_group("config overrides")
    for f in fields(RunConfig):
        group.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar=f.type.upper(),
                           help=f"default: {f.default}")


def _config_from(args) -> RunConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return load_config(args.config, overrides)


def cmd_phantom_info(args) -> int:
    cfg = _config_from(args)
    placement = pipeline.place(cfg, pipeline.load_phantom(cfg))
    pos = placement.molecule.positions
    nv = placement.nv
    print(f"input={cfg.input}")
    print(f"n_hydrogens={len(pos)}")
    print(f"extent_nm={' '.join(repr(float(v)) for v in np.ptp(pos, axis=0))}")
    print(f"centroid_nm={' '.join(repr(c) for c in placement.center)}")
    print(f"nv_position_nm={' '.join(repr(float(v)) for v in nv.position)}")
    print(f"brms_nt={physics.dipolar_brms(pos, nv.position, nv.axis) * 1e9!r}")
    print(f"min_nv_distance_nm={float(np.min(np.linalg.norm(pos - nv.position, axis=1)))!r}")
    return 0


def cmd_encode(args) -> int:
    cfg = _config_from(args)
    placement = pipeline.place(cfg, pipeline.load_phantom(cfg))
    sig = pipeline.encode(cfg, placement)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / pipeline.ARTIFACTS["spectra"]).write_text(io.spectra_to_csv(io.signal_spectra(sig)),
                                                     encoding="utf-8", newline="\n")
    io.write_signal(out / pipeline.ARTIFACTS["signal"], sig)
    spread, _ = max_occupied_spread(sig)
    print(f"n_r={sig.n_r}")
    print(f"max_spread_hz={spread!r}")
    print(f"wrote={out / pipeline.ARTIFACTS['signal']}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _config_from(args)
    out = Path(cfg.output_dir)
    sig_path = Path(args.signal) if args.signal else out / pipeline.ARTIFACTS["signal"]
    sig = io.read_signal(sig_path)
    raw, img = pipeline.reconstruct(cfg, sig)
    out.mkdir(parents=True, exist_ok=True)
    io.write_grid(out / pipeline.ARTIFACTS["raw"], raw)
    io.write_grid(out / pipeline.ARTIFACTS["filtered"], img)
    print(f"wrote={out / pipeline.ARTIFACTS['filtered']}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config_from(args)
    result = pipeline.run_pipeline(cfg)
    sys.stdout.write(pipeline.format_metrics(result.metrics))
    return 0


def cmd_estimate_time(args) -> int:
    cfg = _config_from(args)
    n_proj = args.n_projections if args.n_projections is not None else cfg.n_theta * cfg.n_phi
    est = estimate_time(n_proj, args.spread_hz, cfg.delta_f_hz, args.method or cfg.timing_method)
    print(f"total_seconds={est.total_seconds!r}")
    print(f"total_minutes={est.minutes!r}")
    print(f"breakdown={est.breakdown()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nvtomo", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom-info", help="summarize the placed hydrogen phantom")
    _add_config_flags(p)
    p.set_defaults(func=cmd_phantom_info)

    p = sub.add_parser("encode", help="write spectra CSV and signal array")
    _add_config_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("reconstruct", help="filtered back-projection of a signal array")
    _add_config_flags(p)
    p.add_argument("--signal", help="signal array file (default: OUTPUT_DIR/signal.nvs)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("pipeline", help="encode, reconstruct, score and write every artifact")
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("estimate-time", help="acquisition time from the per-point timing table")
    _add_config_flags(p)
    p.add_argument("--n-projections", type=int)
    p.add_argument("--spread-hz", type=float, default=30600.0)
    p.add_argument("--method", choices=METHODS)
    p.set_defaults(func=cmd_estimate_time)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return pipeline.EXIT_CONFIG
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        cfg = _safe_config(args)
        if cfg is not None:
            sys.stderr.write("config:\n" + cfg.to_text())
        return exc.exit_code
    except (OSError, io.FormatError, ValueError) as exc:
        # subcommands other than `pipeline` call stages directly
        input_error = isinstance(exc, (OSError, io.FormatError, ParseError, EmptyMoleculeError))
        print(f"error: {exc}", file=sys.stderr)
        return pipeline.EXIT_INPUT if input_error else pipeline.EXIT_NUMERICAL


def _safe_config(args):
    try:
        return _config_from(args)
    except ConfigError:
        return None


if __name__ == "__main__":
    sys.exit(main())
