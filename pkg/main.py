#!/usr/bin/env python3
"""
Oval Billiard Wigner-Negativity Toolkit
椭圆台球 Wigner 负性工具

Command-line entry point.
命令行入口。

Subcommands / 子命令:
- solve:   eigenpairs at one theta (求解本征对)
- wigner:  4D field and X/Y slices of one mode dump (Wigner 场与截面)
- entropy: complex entropy of a Wigner dump (复熵)
- fisher:  Fisher report for a theta triple of Wigner dumps (Fisher 报告)
- sweep:   full pipeline over the theta interval (完整扫描)
- check:   invariant suite on a dump (不变量检查)

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

import argparse
import logging
import math
import os
import sys
from typing import List, Optional, Tuple

import numpy as np

from config import (VERSION, DEFAULT_A, DEFAULT_B, DEFAULT_SOLVER_H, WIGNER_POSITIONS,
                    WIGNER_MOMENTA, SLICE_SIZE, MOMENTUM_FACTOR, WIGNER_DRIFT_LIMIT,
                    WIGNER_QUADRATURE_LIMIT, SCORE_FLOOR, MASKED_WARNING, LOG_LEVELS, RunConfig)
from errors import ValidationError, NumericalError, DegenerateChannelError
from geometry import OvalShape, covering_grid, build_mask
from helmholtz import solve_modes
from wigner import (MomentumGrid, wigner_transform, wigner_slice, default_positions,
                    normalization, purity, inversion_asymmetry)
from negativity import complex_entropy, split_channels, negative_volume, negative_volume_from_abs
from fisher import fisher_report
from sweep import SweepManager
from backend import (read_dump, write_dump, mode_to_dump, dump_to_mode, wigner_to_dump,
                     dump_to_wigner, slice_to_dump, load_config, format_number,
                     ResultExporter, GridDump)

logger = logging.getLogger("main")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


def setup_logging(level: str = "INFO"):
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[%(name)s] %(message)s"))
    root.addHandler(handler)
    root.setLevel(level.upper())
    logging.captureWarnings(True)


def emit(name: str, value):
    print(f"{name} = {format_number(value)}")


# =============================================================================
# Invariant suite
# =============================================================================
def check_dump(dump: GridDump) -> List[Tuple[str, float, bool]]:
    """(check name, measured value, passed) for a mode or Wigner dump."""
    results = []
    if dump.kind == 'mode':
        mode = dump_to_mode(dump)
        drift = abs(mode.norm() ** 2 - 1.0)
        results.append(('normalization', drift, drift < 1e-6))
        if mode.shape is not None:
            outside = ~build_mask(mode.shape, mode.grid).inside
            leak = float(np.max(np.abs(mode.psi[outside]))) if outside.any() else 0.0
            results.append(('dirichlet_zero', leak, leak == 0.0))
        return results

    if dump.kind != 'wigner':
        raise ValidationError(f"check needs a mode or wigner dump, got {dump.kind!r}")
    W = dump_to_wigner(dump)
    norm = abs(normalization(W) - 1.0)
    results.append(('normalization', norm, norm < 1e-6))
    asym = inversion_asymmetry(W)
    results.append(('inversion_symmetry', asym, asym <= 1e-12 * float(np.max(np.abs(W.values)))))
    pur = abs(purity(W) - 1.0)
    results.append(('purity', pur, pur < 0.02))
    try:
        dec = split_channels(W)
        z = abs(dec.Z_plus - dec.Z_minus - 1.0)
    except DegenerateChannelError:
        z = abs(normalization(W) - 1.0)
    results.append(('channel_masses', z, z < 1e-6))
    ent = complex_entropy(W)
    hi = abs(ent.h_i - math.pi * ent.N)
    results.append(('h_i_equals_pi_N', hi, hi <= 1e-12 * max(1.0, ent.h_i)))
    cross = abs(negative_volume(W) - negative_volume_from_abs(W))
    results.append(('abs_cross_check', cross, cross < 1e-9))
    return results


# =============================================================================
# Subcommands
# =============================================================================
def cmd_solve(args) -> int:
    shape = OvalShape(args.a, args.b, args.theta)
    grid = covering_grid(shape, args.h)
    window = (args.k_min, math.inf) if args.k_min > 0 else None
    modes = solve_modes(shape, grid, args.count, k_window=window, seed=args.seed)
    for i, m in enumerate(modes):
        emit(f"k[{i}]", m.k)
    if args.dump:
        for i, m in enumerate(modes):
            write_dump(os.path.join(args.dump, f"mode_{i}"), mode_to_dump(m))
    return EXIT_OK


def cmd_wigner(args) -> int:
    mode = dump_to_mode(read_dump(args.mode))
    momentum = MomentumGrid.for_mode(mode, args.momenta, args.factor)
    field = wigner_transform(mode, momentum, default_positions(mode, args.positions),
                             drift_limit=args.drift_limit, quadrature_limit=args.quadrature_limit,
                             workers=args.workers)
    emit("quadrature", field.quadrature)
    emit("drift", field.drift)
    emit("normalization", normalization(field))
    emit("purity", purity(field))
    if args.out:
        write_dump(args.out, wigner_to_dump(field, {'k': repr(mode.k)}))
    if args.slices:
        for axis in ('X', 'Y'):
            s = wigner_slice(mode, axis, args.slice_size, factor=args.factor)
            write_dump(f"{args.slices}_{axis}", slice_to_dump(s, {'k': repr(mode.k)}))
    return EXIT_OK


def cmd_entropy(args) -> int:
    field = dump_to_wigner(read_dump(args.dump))
    ent = complex_entropy(field)
    emit("h_r", ent.h_r)
    emit("h_i", ent.h_i)
    emit("N", ent.N)
    return EXIT_OK


def cmd_fisher(args) -> int:
    lo, mid, hi = (dump_to_wigner(read_dump(p)) for p in (args.lo, args.center, args.hi))
    rep = fisher_report(lo, mid, hi, args.delta, floor=args.floor,
                        masked_warning=args.masked_warning, theta=args.theta)
    for key, val in rep.to_dict().items():
        emit(key, val)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.manifest:
        config = ResultExporter.load_manifest(args.manifest)
    elif args.config:
        config = load_config(args.config)
    else:
        config = RunConfig()
    if args.output_dir:
        config.output_dir = args.output_dir
    if args.workers:
        config.workers = args.workers
    config.validate()
    if args.log_level is None:
        logging.getLogger().setLevel(config.log_level.upper())

    manager = SweepManager(config)
    result = manager.run()
    out = config.output_dir
    csv_path = ResultExporter.save_csv([r.csv_row() for r in result.records],
                                       os.path.join(out, config.csv_name))
    ResultExporter.save_json(result.summary, os.path.join(out, config.summary_name))
    m = result.momentum
    ResultExporter.save_manifest(config, os.path.join(out, config.manifest_name), {
        'solver_grid': [manager.grid.nx, manager.grid.ny, manager.grid.dx],
        'wigner_positions': [result.positions.nx, result.positions.ny],
        'wigner_momenta': [m.np_x, m.np_y, m.dp_x, m.dp_y],
    })

    dumps = os.path.join(out, 'dumps')
    for label, (sx, sy) in result.slices.items():
        write_dump(os.path.join(dumps, f"slice_{label}_X"), slice_to_dump(sx))
        write_dump(os.path.join(dumps, f"slice_{label}_Y"), slice_to_dump(sy))
    if config.dump_fields:
        for bi in result.pair:
            for ti, sample in enumerate(result.branches[bi].samples):
                write_dump(os.path.join(dumps, f"mode_b{bi + 1}_t{ti:03d}"), mode_to_dump(sample.mode))

    cr = result.crossing
    emit("theta_star", cr.theta_star)
    emit("gap", cr.gap)
    logger.info(f"wrote {csv_path} ({len(result.records)} records)")
    return EXIT_OK


def cmd_check(args) -> int:
    failed = 0
    for name, value, ok in check_dump(read_dump(args.dump)):
        print(f"{name} = {format_number(value)} {'PASS' if ok else 'FAIL'}")
        failed += not ok
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


# =============================================================================
# Parser
# =============================================================================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="billiard", description=__doc__.splitlines()[1])
    parser.add_argument('--version', action='version', version=VERSION)
    parser.add_argument('--log-level', choices=[l.lower() for l in LOG_LEVELS] + list(LOG_LEVELS),
                        default=None)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('solve', help="eigenpairs at one theta")
    p.add_argument('--theta', type=float, default=0.0)
    p.add_argument('--a', type=float, default=DEFAULT_A)
    p.add_argument('--b', type=float, default=DEFAULT_B)
    p.add_argument('--count', type=int, default=6)
    p.add_argument('--h', type=float, default=DEFAULT_SOLVER_H)
    p.add_argument('--k-min', type=float, default=0.0)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--dump', help="directory for mode dumps")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser('wigner', help="Wigner field and slices of one mode dump")
    p.add_argument('mode', help="mode dump (.hdr)")
    p.add_argument('--out', help="stem of the 4D field dump")
    p.add_argument('--slices', help="stem of the X/Y slice dumps")
    p.add_argument('--positions', type=int, default=WIGNER_POSITIONS)
    p.add_argument('--momenta', type=int, default=WIGNER_MOMENTA)
    p.add_argument('--slice-size', type=int, default=SLICE_SIZE)
    p.add_argument('--factor', type=float, default=MOMENTUM_FACTOR)
    p.add_argument('--drift-limit', type=float, default=WIGNER_DRIFT_LIMIT)
    p.add_argument('--quadrature-limit', type=float, default=WIGNER_QUADRATURE_LIMIT)
    p.add_argument('--workers', type=int, default=1)
    p.set_defaults(func=cmd_wigner)

    p = sub.add_parser('entropy', help="complex entropy of a Wigner dump")
    p.add_argument('dump')
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser('fisher', help="Fisher report for a theta triple of Wigner dumps")
    p.add_argument('--lo', required=True)
    p.add_argument('--center', required=True)
    p.add_argument('--hi', required=True)
    p.add_argument('--delta', type=float, required=True)
    p.add_argument('--theta', type=float, default=float('nan'))
    p.add_argument('--floor', type=float, default=SCORE_FLOOR)
    p.add_argument('--masked-warning', type=float, default=MASKED_WARNING)
    p.set_defaults(func=cmd_fisher)

    p = sub.add_parser('sweep', help="full pipeline over the theta interval")
    src = p.add_mutually_exclusive_group()
    src.add_argument('--config', help="key = value config file")
    src.add_argument('--manifest', help="run-manifest.json of an earlier run")
    p.add_argument('--output-dir')
    p.add_argument('--workers', type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('check', help="invariant suite on a mode or Wigner dump")
    p.add_argument('dump')
    p.set_defaults(func=cmd_check)
    return parser


def cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    setup_logging(args.log_level or "INFO")
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
