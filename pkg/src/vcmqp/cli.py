"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 external-tool error.
Diagnostics go to stderr; data goes to files or stdout.  Every subcommand
accepts ``--seed`` for harness compatibility and ignores it, since all
computations here are deterministic.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .bdrate import bd_rate, read_curves_csv
from .codec import external_encode, load_template, mock_encode, read_image, write_image
from .errors import DataError, ExternalToolError
from .experiment import load_config, report_curves, report_tables, run_sweep, SweepResult
from .geometry import CtuGrid, SaliencyMask, decide_saliency
from .ingest import CITYSCAPES_CLASSES, ClassMap, load_class_map, load_detections, load_instance_dir
from .metrics import DEFAULT_IOU_THRESHOLDS, weighted_ap
from .qpmap import assign_qps, parse_qp_delta, read_qpmap, write_qpmap

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TOOL = 0, 1, 2, 3

log = logging.getLogger("vcmqp")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _image_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------- subcommands


def cmd_decide(args: argparse.Namespace) -> int:
    class_map = load_class_map(args.class_map) if args.class_map else ClassMap.cityscapes()
    records = load_detections(args.dets, class_map, args.min_score)
    if args.image_id is not None:
        records = [r for r in records if r.image_id == args.image_id]
        if not records:
            raise DataError(f"{args.dets}: no record for image {args.image_id!r}")
    if len(records) != 1:
        raise UsageError(f"{args.dets} holds {len(records)} images; choose one with --image-id")
    record = records[0]
    width, height = args.image_size or (record.width, record.height)
    grid = CtuGrid(width, height, args.ctu)
    mask = decide_saliency(grid, record.boxes(), args.theta)
    _emit(json.dumps(mask.to_dict(record.image_id)) + "\n", args.out)
    log.info("%d of %d CTUs salient", mask.salient_count, len(grid))
    return EXIT_OK


def cmd_qpmap(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.mask).read_text(encoding="utf-8"))
    mask = SaliencyMask.from_dict(data)
    qpmap = assign_qps(mask, args.qp_base, parse_qp_delta(args.qp_delta), data.get("image_id", ""))
    if args.out in (None, "-"):
        sys.stdout.write(qpmap.to_text())
    else:
        write_qpmap(qpmap, args.out)
    return EXIT_OK


def cmd_encode(args: argparse.Namespace) -> int:
    img = read_image(args.image)
    qpmap = read_qpmap(args.qpmap)
    if args.template:
        workdir = args.workdir or (Path(args.out).parent / "encode_work")
        result = external_encode(img, qpmap, load_template(args.template), workdir)
    else:
        result = mock_encode(img, qpmap)
    write_image(result.decoded, args.out)
    bits = result.bits
    sys.stdout.write(f"{bits!r}\n" if isinstance(bits, float) else f"{bits}\n")
    return EXIT_OK


def cmd_eval_ap(args: argparse.Namespace) -> int:
    preds = load_instance_dir(args.pred)
    gts = load_instance_dir(args.gt, ground_truth=True)
    classes = args.classes.split(",") if args.classes else list(CITYSCAPES_CLASSES)
    thresholds = args.iou_thresholds or list(DEFAULT_IOU_THRESHOLDS)
    report = weighted_ap(list(preds.values()), [gts[i] for i in sorted(gts)], classes, thresholds)
    if args.out:
        _emit(report.to_json(), args.out)
    if args.csv:
        _emit(report.to_csv(), args.csv)
    sys.stdout.write(f"{report.weighted_ap:.6f}\n")
    return EXIT_OK


def _single(curves: dict, path: str, name: str | None):
    if name is not None:
        if name not in curves:
            raise DataError(f"{path}: no curve named {name!r} (have {sorted(curves)})")
        return curves[name]
    if len(curves) != 1:
        raise UsageError(f"{path} holds curves {sorted(curves)}; pick one with --anchor-name")
    return next(iter(curves.values()))


def cmd_bdrate(args: argparse.Namespace) -> int:
    anchor = _single(read_curves_csv(args.anchor), args.anchor, args.anchor_name)
    tests = read_curves_csv(args.test)
    if len(tests) == 1:
        sys.stdout.write(f"{bd_rate(next(iter(tests.values())), anchor):.6f}\n")
    else:
        for name, curve in tests.items():
            sys.stdout.write(f"{name},{bd_rate(curve, anchor):.6f}\n")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    result = run_sweep(cfg, args.corpus, args.out, jobs=args.jobs)
    report_tables(result, args.out)
    report_curves(result, args.out)
    statuses = [c.status for c in result.cells.values()]
    log.info("sweep finished: %d cells, %d ok", len(statuses), statuses.count("ok"))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    result = SweepResult.load(args.result)
    out = args.out or (Path(args.result) if Path(args.result).is_dir() else Path(args.result).parent)
    report_tables(result, out, args.table2_theta)
    report_curves(result, out, args.theta, args.qp_delta, args.uncompressed_quality)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vcmqp", description="Saliency-driven per-CTU QP maps and their evaluation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--seed", type=int, default=None, help="accepted and ignored; results are deterministic")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        return p

    p = add("decide", "Derive the per-CTU saliency mask from a detection file.")
    p.add_argument("--dets", required=True, help="vcm-det/1 detection JSON")
    p.add_argument("--image-size", type=_image_size, help="WIDTHxHEIGHT; defaults to the size in the detection file")
    p.add_argument("--ctu", type=int, default=128, help="CTU size in pixels (default 128)")
    p.add_argument("--theta", type=float, default=0.0, help="relative-overlap threshold in [0, 1) (default 0)")
    p.add_argument("--image-id", help="record to use when the file holds several images")
    p.add_argument("--class-map", help="two-column 'detector_label evaluation_class' file")
    p.add_argument("--min-score", type=float, default=0.0, help="drop detections scoring below this (default 0)")
    p.add_argument("--out", help="mask JSON output (default stdout)")
    p.set_defaults(func=cmd_decide)

    p = add("qpmap", "Turn a saliency mask into a QP-map sidecar.")
    p.add_argument("--mask", required=True, help="mask JSON written by 'decide'")
    p.add_argument("--qp-base", type=int, required=True, help="QP of salient CTUs, 0..63")
    p.add_argument("--qp-delta", default="max", help="offset for non-salient CTUs, integer or 'max' (default max)")
    p.add_argument("--out", help="sidecar output (default stdout)")
    p.set_defaults(func=cmd_qpmap)

    p = add("encode", "Encode an image with a QP map (mock codec unless --template is given); prints bits.")
    p.add_argument("--image", required=True, help="8-bit PGM (or PNG) input")
    p.add_argument("--qpmap", required=True, help="QP-map sidecar")
    p.add_argument("--template", help="command template file for an external encoder/decoder")
    p.add_argument("--workdir", help="scratch directory for external tools")
    p.add_argument("--out", required=True, help="decoded image output (PGM)")
    p.set_defaults(func=cmd_encode)

    p = add("eval-ap", "Instance-weighted mask AP of predictions against ground truth; prints weighted AP.")
    p.add_argument("--pred", required=True, help="vcm-inst/1 file or directory of predictions")
    p.add_argument("--gt", required=True, help="vcm-inst/1 file or directory of ground truth")
    p.add_argument("--classes", help="comma-separated evaluation classes (default: the eight Cityscapes road users)")
    p.add_argument("--iou-thresholds", type=_float_list, help="comma-separated IoU thresholds (default 0.50:0.05:0.95)")
    p.add_argument("--out", help="ApReport JSON output")
    p.add_argument("--csv", help="ApReport CSV output")
    p.set_defaults(func=cmd_eval_ap)

    p = add("bdrate", "BD-rate in percent of test curve(s) against an anchor curve.")
    p.add_argument("--anchor", required=True, help="curve CSV: name,label,rate,quality")
    p.add_argument("--test", required=True, help="curve CSV; one output line per curve name")
    p.add_argument("--anchor-name", help="curve to use when the anchor file holds several")
    p.set_defaults(func=cmd_bdrate)

    p = add("sweep", "Run the full (detector, theta, QP offset, base QP) sweep and write tables and curves.")
    p.add_argument("--config", required=True, help="TOML sweep configuration")
    p.add_argument("--corpus", required=True, help="corpus directory (images/, gt/, detections/)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker threads (default: CPU count)")
    p.set_defaults(func=cmd_sweep)

    p = add("report", "Re-render tables and curves from a sweep's result.json.")
    p.add_argument("--result", required=True, help="result.json or the sweep output directory")
    p.add_argument("--out", help="output directory (default: next to result.json)")
    p.add_argument("--theta", type=float, help="theta of the plotted cells (default: smallest)")
    p.add_argument("--qp-delta", help="QP offset of the plotted cells (default: max)")
    p.add_argument("--table2-theta", type=float, help="theta for the detector x offset table (default: smallest)")
    p.add_argument("--uncompressed-quality", type=float, help="reference line for quality on uncompressed input")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"vcmqp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExternalToolError as exc:
        print(f"vcmqp {args.command}: external tool failed: {exc}", file=sys.stderr)
        if exc.stderr:
            print(exc.stderr.rstrip(), file=sys.stderr)
        return EXIT_TOOL
    except (DataError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"vcmqp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
