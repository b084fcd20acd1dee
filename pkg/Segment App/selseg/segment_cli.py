"""Command line interface: ``selseg segment | lfa | bench | tune``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from selseg import config
from selseg.core.errors import DimensionError, ParameterError, SelsegError
from selseg.core.grid import Field2D, crop_to, largest_crop
from selseg.core.image_io import load_image, load_level_set, load_markers, save_pgm
from selseg.core.lfa import frequency_grid, rate_report
from selseg.core.logger import init_logging
from selseg.core.model import (
    ModelKind,
    ModelParams,
    assemble_coefficients,
    distance_map,
    edge_detector,
    initial_phi,
)
from selseg.core.multigrid import CycleConfig, bench, segment, tune_smoothing
from selseg.core.report import write_outputs
from selseg.core.smoothers import SmootherKind, detect_jump_set

logger = logging.getLogger("selseg")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _int_list(text: str) -> list[int]:
    """Parse ``"128,256"`` or ``"1-6"`` into integers."""
    values: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                start, end = part.split("-", 1)
                values.extend(range(int(start), int(end) + 1))
            else:
                values.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer list: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty integer list")
    return values


def _add_problem_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--image", required=True, help="Greyscale PGM (or PNG) image")
    parser.add_argument("--markers", required=True, help="Marker file, one 'x y' pair per line")
    parser.add_argument("--model", default=ModelKind.RADA_CHEN.value,
                        choices=[k.value for k in ModelKind])
    parser.add_argument("--auto-crop", action="store_true",
                        help="Crop the image to the largest size the grid hierarchy accepts")
    parser.add_argument("--coarsest", type=int, default=config.COARSEST_SIZE,
                        help="Size of the coarsest grid")
    defaults = ModelParams()
    model = parser.add_argument_group("model parameters")
    model.add_argument("--mu", type=float, default=defaults.mu)
    model.add_argument("--lambda1", type=float, default=defaults.lambda1)
    model.add_argument("--lambda2", type=float, default=defaults.lambda2)
    model.add_argument("--nu", type=float, default=defaults.nu, help="Area constraint weight")
    model.add_argument("--theta", type=float, default=defaults.theta, help="Distance penalty weight")
    model.add_argument("--beta", type=float, default=defaults.beta, help="Edge detector strength")
    model.add_argument("--sigma", type=float, default=defaults.sigma,
                       help="Width of the marker distance notches")
    model.add_argument("--eps", type=float, default=defaults.eps_heaviside,
                       help="Heaviside regularisation")
    model.add_argument("--eps-grad", type=float, default=defaults.eps_grad)


def _add_cycle_arguments(parser: argparse.ArgumentParser, smoother: str) -> None:
    cycle = parser.add_argument_group("multigrid")
    cycle.add_argument("--smoother", default=smoother, choices=[k.value for k in SmootherKind])
    cycle.add_argument("--nu1", type=int, default=3, help="Pre-smoothing steps")
    cycle.add_argument("--nu2", type=int, default=3, help="Post-smoothing steps")
    cycle.add_argument("--gamma", type=int, default=1)
    cycle.add_argument("--coarse-iters", type=int, default=config.COARSE_ITERS)
    cycle.add_argument("--eta", type=float, default=config.ETA)
    cycle.add_argument("--max-cycles", type=int, default=config.MAX_CYCLES)
    cycle.add_argument("--sigma-jump", type=float, default=config.SIGMA_JUMP)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selseg", description="Selective segmentation with nonlinear multigrid"
    )
    parser.add_argument("--log", default=None, help="Log file path")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="Segment the object enclosed by the markers")
    _add_problem_arguments(seg)
    _add_cycle_arguments(seg, SmootherKind.HYBRID2.value)
    seg.add_argument("--output-dir", default=str(config.OUTPUT_DIR))
    seg.add_argument("--mask", default=None, help="Mask PGM (default: <output-dir>/mask.pgm)")
    seg.add_argument("--overlay", default=None, help="Overlay PGM (default: <output-dir>/overlay.pgm)")
    seg.add_argument("--report", default=None, help="Report (default: <output-dir>/report.txt)")
    seg.add_argument("--save-phi", default=None, help="Save the final level set as .npy")

    lfa = sub.add_parser("lfa", help="Smoothing rates of a smoother on frozen coefficients")
    _add_problem_arguments(lfa)
    lfa.add_argument("--smoother", default=SmootherKind.GSLINE_I.value,
                     choices=[k.value for k in SmootherKind])
    lfa.add_argument("--phi", default=None, help="Level set (.npy) to freeze coefficients at")
    lfa.add_argument("--sigma-jump", type=float, default=config.SIGMA_JUMP)
    lfa.add_argument("--samples", type=int, default=config.LFA_SAMPLES,
                     help="Frequency samples per axis")
    lfa.add_argument("--threshold", type=float, default=0.6,
                     help="Rate above which pixels are marked in the rate map")
    lfa.add_argument("--output-dir", default=str(config.OUTPUT_DIR))
    lfa.add_argument("--rate-map", default=None, help="Binary rate map PGM")
    lfa.add_argument("--report", default=None, help="Report path")
    lfa.add_argument("--worst-csv", default=None, help="CSV of the worst pixels")

    bn = sub.add_parser("bench", help="CPU time against image size")
    _add_problem_arguments(bn)
    _add_cycle_arguments(bn, SmootherKind.HYBRID2.value)
    bn.add_argument("--sizes", type=_int_list, default=[128, 256, 512])
    bn.add_argument("--csv", default=None, help="Write the timing table as CSV")

    tn = sub.add_parser("tune", help="Cycles to convergence against smoothing steps")
    _add_problem_arguments(tn)
    _add_cycle_arguments(tn, SmootherKind.HYBRID2.value)
    tn.add_argument("--nus", type=_int_list, default=list(range(1, 7)))
    tn.add_argument("--csv", default=None, help="Write the table as CSV")
    return parser


def _model_params(args: argparse.Namespace) -> ModelParams:
    return ModelParams(mu=args.mu, lambda1=args.lambda1, lambda2=args.lambda2, nu=args.nu,
                       theta=args.theta, beta=args.beta, sigma=args.sigma,
                       eps_heaviside=args.eps, eps_grad=args.eps_grad)


def _cycle_config(args: argparse.Namespace) -> CycleConfig:
    return CycleConfig(gamma=args.gamma, nu1=args.nu1, nu2=args.nu2,
                       coarse_iters=args.coarse_iters, smoother=args.smoother, eta=args.eta,
                       max_cycles=args.max_cycles, sigma_jump=args.sigma_jump)


def _load_problem(args: argparse.Namespace):
    image = load_image(args.image)
    if args.auto_crop:
        n, m = largest_crop(image.n, image.m, args.coarsest)
        if (n, m) != image.shape:
            logger.info("Cropping %dx%d image to %dx%d", image.n, image.m, n, m)
            image = crop_to(image, n, m)
    markers = load_markers(args.markers, image.n, image.m)
    return image, markers


def _output(path: str | None, output_dir: str, name: str) -> Path:
    return Path(path) if path else Path(output_dir) / name


def _run_segment(args: argparse.Namespace) -> int:
    image, markers = _load_problem(args)
    phi, mask, stats = segment(image, markers, _model_params(args), args.model,
                               _cycle_config(args), coarsest=args.coarsest)
    write_outputs(phi, mask, stats=stats, image=image,
                  mask_path=_output(args.mask, args.output_dir, "mask.pgm"),
                  overlay_path=_output(args.overlay, args.output_dir, "overlay.pgm"),
                  report_path=_output(args.report, args.output_dir, "report.txt"))
    if args.save_phi:
        np.save(args.save_phi, phi.values)
    status = "converged" if stats.converged else "stopped"
    print(f"{status} after {stats.cycles_run} cycles in {stats.wall_time_total:.2f} s")
    return EXIT_OK


def _run_lfa(args: argparse.Namespace) -> int:
    image, markers = _load_problem(args)
    params = _model_params(args)
    n, m = image.shape
    if args.phi:
        phi = load_level_set(args.phi, (n, m))
    else:
        phi = initial_phi(markers, n, m).values
    d = distance_map(markers, params.sigma, n, m)
    g = edge_detector(image, params.beta)
    coeffs = assemble_coefficients(phi, d, g, params, args.model)
    casemap = detect_jump_set(coeffs, args.sigma_jump)
    report = rate_report(coeffs, args.smoother, casemap, frequency_grid(args.samples))

    rate_map = _output(args.rate_map, args.output_dir, f"rates_{args.smoother}.pgm")
    save_pgm(rate_map, report.above(args.threshold).astype(float))
    write_outputs(phi, lfa=report, report_path=_output(args.report, args.output_dir, "lfa.txt"))
    if args.worst_csv:
        report.worst_table().to_csv(args.worst_csv, index=False)
    print(f"{args.smoother}: mu_max {report.mu_max:.4f}, mu_avg {report.mu_avg:.4f}, "
          f"{casemap.count} jump pixels, {int(report.above(args.threshold).sum())} above "
          f"{args.threshold:g}")
    print(report.worst_table().to_string(index=False))
    return EXIT_OK


def _run_bench(args: argparse.Namespace) -> int:
    image, markers = _load_problem(args)
    table = bench(image, markers, _model_params(args), args.model, _cycle_config(args),
                  args.sizes, coarsest=args.coarsest)
    if args.csv:
        table.to_csv(args.csv, index=False)
    print(table.to_string(index=False))
    return EXIT_OK


def _run_tune(args: argparse.Namespace) -> int:
    image, markers = _load_problem(args)
    table = tune_smoothing(image, markers, _model_params(args), args.model, _cycle_config(args),
                           args.nus, coarsest=args.coarsest)
    if args.csv:
        table.to_csv(args.csv, index=False)
    print(table.to_string(index=False))
    print(f"recommended nu: {table.attrs.get('recommended_nu')}")
    return EXIT_OK


_COMMANDS = {
    "segment": _run_segment,
    "lfa": _run_lfa,
    "bench": _run_bench,
    "tune": _run_tune,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    init_logging(args.log or config.LOG_PATH)
    logger.debug("MG_SELSEG_THREADS=%d ignored, the solver runs sequentially", config.THREADS)
    try:
        return _COMMANDS[args.command](args)
    except (ParameterError, DimensionError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_USAGE
    except (SelsegError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


def cli() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli()
