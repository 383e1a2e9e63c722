"""Command line interface.

Exit status is 0 on success, 1 on data or configuration errors and 2 on
usage errors.
"""

from __future__ import annotations

import sys
from argparse import ArgumentParser
from io import BytesIO
from json import dumps
from logging import DEBUG, ERROR, INFO, basicConfig, getLogger
from os import makedirs
from os.path import exists, join

import numpy as np

from stalemap import __comment__, __version__
from stalemap.config import dump_config, read_config
from stalemap.dataset import build_manifest, read_dataset, write_dataset
from stalemap.encoding import EncoderConfig, encode_prior
from stalemap.errors import StalemapError
from stalemap.exchange import (
    decode_json,
    encode_json,
    load_ground_truth,
    load_map,
    load_prediction,
)
from stalemap.frames import Dataset, Frame, FramePrediction, Sequence
from stalemap.map_model import validate_map
from stalemap.metrics import EvalConfig, evaluate_all
from stalemap.query import query_report
from stalemap.render import RenderStyle, render_change_map
from stalemap.report import (
    render_html,
    render_markdown,
    report_to_dict,
    validate_report,
)
from stalemap.simulator import (
    NoiseConfig,
    WorldConfig,
    build_synthetic_dataset,
    reference_stats_dataset,
)
from stalemap.synthesis import MODES, PerturbationConfig, perturb

OK = 0
DATA_ERROR = 1
USAGE_ERROR = 2

LOADERS = {
    "map": load_map,
    "gt": load_ground_truth,
    "pred": load_prediction,
}

log = getLogger(__name__)


def _read(path) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as source:
        return source.read()


def _write(path, data: bytes):
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    with open(path, "wb") as output:
        output.write(data)
    log.info("%s written", path)


def _ensure_directory(path):
    if not exists(path):
        makedirs(path)


def cmd_evaluate(args):
    """Evaluate dataset with every strategy."""
    cfg = read_config(EvalConfig, args.config)
    ds = read_dataset(args.dataset)
    report = report_to_dict(evaluate_all(ds, cfg, workers=args.workers))
    problems = validate_report(report)
    for problem in problems:
        log.error("report: %s", problem)
    _write(args.out, encode_json(report))
    if args.summary:
        _write(args.summary, render_markdown(report).encode("utf-8"))
    if args.html:
        _write(args.html, render_html(report).encode("utf-8"))
    return DATA_ERROR if problems else OK


def cmd_perturb(args):
    """Write one frame dataset perturbed from an up to date map."""
    cfg = read_config(PerturbationConfig, args.config, rng_seed=args.seed)
    world = load_map(_read(args.world), source=args.world)
    stale, gt = perturb(world, cfg, args.mode)
    # empty detector output
    frame = Frame(stale, gt, FramePrediction(gt.frame_id, fov=gt.fov))
    sequence = Sequence(args.sequence or gt.frame_id, (frame,))
    _ensure_directory(args.out)
    write_dataset(Dataset((sequence,)), args.out)
    _write(join(args.out, "perturbation.json"), dump_config(cfg))
    return OK


def cmd_simulate(args):
    """Write synthetic dataset with simulated predictions."""
    noise = read_config(NoiseConfig, args.noise, rng_seed=args.seed)
    world = read_config(WorldConfig, args.world)
    if args.preset == "paper-stats":
        ds = reference_stats_dataset(
            noise.rng_seed,
            noise=noise,
            world=world,
            frames_per_seq=args.frames,
        )
    else:
        perturbation = None
        if args.perturbation or args.seed is not None:
            perturbation = read_config(
                PerturbationConfig,
                args.perturbation,
                rng_seed=args.seed,
            )
        ds = build_synthetic_dataset(
            args.sequences,
            args.frames or 1,
            world,
            perturbation,
            noise,
            args.mode,
        )
    _ensure_directory(args.out)
    manifest = write_dataset(ds, args.out)
    log.info("totals %s", manifest["totals"])
    return OK


def cmd_render(args):
    """Draw change map of ground truth, prediction or plain map."""
    style = read_config(RenderStyle, args.style)
    frame = LOADERS[args.kind](_read(args.frame), source=args.frame)
    result = render_change_map(frame, style)
    _write(args.out, result.svg.encode("utf-8"))
    return OK


def _validate_map(args):
    local_map = load_map(_read(args.path), normalize=False, source=args.path)
    return [str(it) for it in validate_map(local_map)]


def _validate_report(args):
    return validate_report(decode_json(_read(args.path), args.path))


def _validate_frame(args):
    LOADERS[args.kind](_read(args.path), source=args.path)
    return []


def _validate_dataset(args):
    ds = read_dataset(args.path, normalize=False)
    problems = []
    for frame in ds.frames():
        problems.extend(
            f"{frame.frame_id}: {it}" for it in validate_map(frame.stale)
        )
    totals = build_manifest(ds)["totals"]
    log.info("%s: %s", args.path, totals)
    return problems


VALIDATORS = {
    "map": _validate_map,
    "gt": _validate_frame,
    "pred": _validate_frame,
    "report": _validate_report,
    "dataset": _validate_dataset,
}


def cmd_validate(args):
    """Check map, frame, report or dataset."""
    problems = VALIDATORS[args.kind](args)
    for problem in problems:
        sys.stdout.write(f"{problem}\n")
    if problems:
        log.error("%s: %d problems", args.path, len(problems))
        return DATA_ERROR
    log.info("%s: valid", args.path)
    return OK


def cmd_encode(args):
    """Write prior encoding matrix as numpy .npy file."""
    cfg = read_config(EncoderConfig, args.config)
    local_map = load_map(_read(args.map), source=args.map)
    encoding = encode_prior(local_map, cfg)
    log.info(
        "%s: %d x %d",
        args.map,
        encoding.matrix.shape[0],
        encoding.matrix.shape[1],
    )
    buffer = BytesIO()
    np.save(buffer, encoding.matrix)
    _write(args.out, buffer.getvalue())
    return OK


def cmd_query(args):
    """Print JSONPath matches of report."""
    data = decode_json(_read(args.report), args.report)
    for path, value in query_report(data, args.expression):
        text = dumps(value, ensure_ascii=False, sort_keys=False)
        sys.stdout.write(f"{path or '$'}\t{text}\n")
    return OK


def _seed(parser):
    parser.add_argument(
        "--seed",
        type=int,
        help="random seed, overrides rng_seed of configuration",
    )


def create_parser() -> ArgumentParser:
    """Return argument parser with all subcommands."""
    parser = ArgumentParser(prog="stalemap", description=__comment__)
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="show debug messages",
    )
    parser.add_argument(
        "-q",
        "--quiet",
        action="store_true",
        help="show errors only",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    cmd = commands.add_parser("evaluate", help=cmd_evaluate.__doc__)
    cmd.add_argument("--dataset", required=True, help="dataset directory")
    cmd.add_argument("--config", help="evaluation configuration JSON")
    cmd.add_argument("--out", help="report JSON, standard output default")
    cmd.add_argument("--summary", help="Markdown summary file")
    cmd.add_argument("--html", help="HTML summary file")
    cmd.add_argument("--workers", type=int, help="frame worker count")
    cmd.set_defaults(func=cmd_evaluate)

    cmd = commands.add_parser("perturb", help=cmd_perturb.__doc__)
    cmd.add_argument(
        "--world",
        "--map",
        dest="world",
        required=True,
        help="up to date map JSON",
    )
    cmd.add_argument("--sequence", help="sequence id, frame id default")
    cmd.add_argument("--config", help="perturbation configuration JSON")
    cmd.add_argument("--mode", choices=tuple(MODES), default="insertions")
    cmd.add_argument("--out", required=True, help="output directory")
    _seed(cmd)
    cmd.set_defaults(func=cmd_perturb)

    cmd = commands.add_parser("simulate", help=cmd_simulate.__doc__)
    cmd.add_argument(
        "--preset",
        choices=("paper-stats", "custom"),
        default="custom",
    )
    cmd.add_argument("--noise", help="noise configuration JSON")
    cmd.add_argument("--world", help="world configuration JSON")
    cmd.add_argument("--perturbation", help="perturbation configuration")
    cmd.add_argument("--mode", choices=tuple(MODES), default="mixed")
    cmd.add_argument("--sequences", type=int, default=1)
    cmd.add_argument("--frames", type=int, help="frames per sequence")
    cmd.add_argument("--out", required=True, help="dataset directory")
    _seed(cmd)
    cmd.set_defaults(func=cmd_simulate)

    cmd = commands.add_parser("render", help=cmd_render.__doc__)
    cmd.add_argument("frame", help="frame JSON")
    cmd.add_argument("--kind", choices=tuple(LOADERS), default="gt")
    cmd.add_argument("--style", help="render style JSON")
    cmd.add_argument("--out", help="SVG file, standard output default")
    cmd.set_defaults(func=cmd_render)

    cmd = commands.add_parser("validate", help=cmd_validate.__doc__)
    cmd.add_argument("path", help="file or dataset directory")
    cmd.add_argument("--kind", choices=tuple(VALIDATORS), default="map")
    cmd.set_defaults(func=cmd_validate)

    cmd = commands.add_parser("encode", help=cmd_encode.__doc__)
    cmd.add_argument("--map", required=True, help="prior map JSON")
    cmd.add_argument("--config", help="encoder configuration JSON")
    cmd.add_argument("--out", required=True, help=".npy output file")
    cmd.set_defaults(func=cmd_encode)

    cmd = commands.add_parser("query", help=cmd_query.__doc__)
    cmd.add_argument("--report", required=True, help="report JSON")
    cmd.add_argument("expression", help="JSONPath expression")
    cmd.set_defaults(func=cmd_query)
    return parser


def _setup_logging(args):
    level = INFO
    if args.verbose:
        level = DEBUG
    elif args.quiet:
        level = ERROR
    basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    getLogger().setLevel(level)


def run_cli(argv=None) -> int:
    """Run command line, return exit status."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return USAGE_ERROR if err.code else OK
    _setup_logging(args)

    try:
        return args.func(args)
    except (StalemapError, OSError) as err:
        log.error("%s", err)  # noqa: TRY400
    return DATA_ERROR
