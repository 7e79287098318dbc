"""Command-line surface exposing every pipeline stage.

Every subcommand is deterministic given its inputs and ``--seed``;
``--jobs N`` only changes wall time, never output bytes.  Numeric output
uses fixed 6-decimal precision except DOTA result files (4-decimal scores,
2-decimal coordinates).

Exit codes: 0 success, 1 usage error, 2 data/parse error,
3 numerical/geometry error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio, evaluation, experiments
from .codec import PolarCode, decode_polar, encode_polar
from .errors import (
    DegenerateGeometry,
    InvalidInput,
    NonConvexInput,
    NonFiniteDiameter,
    ParseError,
    PolarboxError,
)
from .geometry import iou_quad
from .losses import total_loss
from .postprocess import Detection, fuse_center_semantic, rotated_nms
from .targets import TargetMaps, build_targets

CODE_CSV_HEADER = (
    "category,difficult,center_x,center_y,offset_x,offset_y,"
    "theta_1,theta_2,theta_3,theta_4,shorter,ratio_1,ratio_2,ratio_3,ratio_4"
)
MAP_ORDER = ("heatmap", "offset", "angles", "shorter", "ratios", "semantic")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we want exit 1
        raise _UsageError(message)


def _pmap(fn, items, jobs: int):
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def _info(args, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


# ---------------------------------------------------------------- encode

def cmd_encode(args) -> int:
    annotations = dataio.parse_dota_annotation(_read_text(args.annotations))
    lines = [CODE_CSV_HEADER]
    for ann in annotations:
        code = encode_polar(ann.quad, args.stride)
        values = [
            code.center[0], code.center[1], code.offset[0], code.offset[1],
            *code.theta, code.s, *code.r,
        ]
        rendered = ",".join(f"{v:.6f}" for v in values)
        lines.append(f"{ann.category},{int(ann.difficult)},{rendered}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_decode(args) -> int:
    text = _read_text(args.codes)
    rows = text.splitlines()
    if not rows or rows[0] != CODE_CSV_HEADER:
        raise ParseError("missing or unexpected polar-code CSV header", 1)
    out_lines = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row.strip():
            continue
        fields = row.split(",")
        if len(fields) != 15:
            raise ParseError(f"expected 15 fields, got {len(fields)}", lineno)
        try:
            nums = [float(v) for v in fields[2:]]
        except ValueError as exc:
            raise ParseError(f"bad number: {exc}", lineno) from None
        code = PolarCode(
            center=np.array(nums[0:2]),
            offset=np.array(nums[2:4]),
            theta=np.array(nums[4:8]),
            s=nums[8],
            r=np.array(nums[9:13]),
        )
        quad = decode_polar(code, args.stride)
        ann = dataio.Annotation(quad=quad, category=fields[0],
                                difficult=fields[1] == "1")
        out_lines.append(dataio.format_annotation_line(ann))
    _emit("\n".join(out_lines) + "\n" if out_lines else "", args.out)
    return 0


# ------------------------------------------------------------------- iou

def cmd_iou(args) -> int:
    a = np.array(args.coords[:8]).reshape(4, 2)
    b = np.array(args.coords[8:]).reshape(4, 2)
    sys.stdout.write(f"{iou_quad(a, b):.6f}\n")
    return 0


# ------------------------------------------------------------------- nms

def _nms_one_image(task):
    image, dets, threshold = task
    kept = rotated_nms(dets, threshold)
    return image, kept


def cmd_nms(args) -> int:
    records = dataio.parse_dota_results(_read_text(args.results))
    by_image: dict[str, list[Detection]] = {}
    for image, score, quad in records:
        by_image.setdefault(image, []).append(
            Detection(class_id=0, score=score, quad=quad))
    tasks = [(image, by_image[image], args.iou_thresh)
             for image in sorted(by_image)]
    out_lines = []
    for image, kept in _pmap(_nms_one_image, tasks, args.jobs):
        for det in kept:
            coords = " ".join(f"{v:.2f}" for v in det.quad.ravel())
            out_lines.append(f"{image} {det.score:.4f} {coords}")
    _emit("\n".join(out_lines) + "\n" if out_lines else "", args.out)
    return 0


# --------------------------------------------------------------- targets

def _dump_maps(maps: TargetMaps, classes: list[str], width: int, height: int,
               path: str) -> None:
    arrays = {name: getattr(maps, name) for name in MAP_ORDER}
    header = {
        "classes": classes,
        "height": height,
        "maps": list(MAP_ORDER),
        "shapes": {name: list(arr.shape) for name, arr in arrays.items()},
        "skipped": maps.skipped,
        "stride": maps.stride,
        "width": width,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n"
    with open(path, "wb") as fh:
        fh.write(blob.encode("utf-8"))
        for name in MAP_ORDER:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f4").tobytes())


def load_maps_dump(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a binary maps dump back into float32 arrays."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad dump header: {exc}") from None
        arrays = {}
        for name in header["maps"]:
            shape = tuple(header["shapes"][name])
            count = int(np.prod(shape))
            buf = fh.read(count * 4)
            if len(buf) != count * 4:
                raise ParseError(f"dump truncated in map {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f4").reshape(shape)
    return header, arrays


def cmd_targets(args) -> int:
    classes = [c for c in args.classes.split(",") if c]
    if not classes:
        raise _UsageError("--classes must name at least one class")
    index = {name: i for i, name in enumerate(classes)}
    annotations = dataio.parse_dota_annotation(_read_text(args.annotations))
    pairs = []
    for ann in annotations:
        if ann.category not in index:
            raise ParseError(f"category {ann.category!r} not in --classes")
        pairs.append((ann.quad, index[ann.category]))
    maps = build_targets(pairs, args.width, args.height, len(classes),
                         args.stride)
    if maps.skipped:
        _info(args, f"skipped {maps.skipped} object(s) with out-of-grid centers")
    _dump_maps(maps, classes, args.width, args.height, args.out)
    return 0


# ------------------------------------------------------------------ fuse

def cmd_fuse(args) -> int:
    header, arrays = load_maps_dump(args.maps)
    fused = fuse_center_semantic(arrays["heatmap"].astype(float),
                                 arrays["semantic"].astype(float))
    blob = json.dumps({"shape": list(fused.shape)},
                      sort_keys=True, separators=(",", ":")) + "\n"
    with open(args.out, "wb") as fh:
        fh.write(blob.encode("utf-8"))
        fh.write(np.ascontiguousarray(fused, dtype="<f4").tobytes())
    return 0


# ------------------------------------------------------------------ loss

def cmd_loss(args) -> int:
    _, pred_arrays = load_maps_dump(args.pred)
    header, tgt_arrays = load_maps_dump(args.target)
    heat = tgt_arrays["heatmap"].astype(float)
    maps = TargetMaps(
        heatmap=heat,
        offset=tgt_arrays["offset"].astype(float),
        angles=tgt_arrays["angles"].astype(float),
        shorter=tgt_arrays["shorter"].astype(float),
        ratios=tgt_arrays["ratios"].astype(float),
        semantic=tgt_arrays["semantic"].astype(float),
        valid_mask=(heat == 1.0).any(axis=0),
        stride=header.get("stride", 4),
    )
    preds = {name: pred_arrays[name].astype(float) for name in MAP_ORDER}
    total, breakdown = total_loss(preds, maps)
    payload = {"total": total, **breakdown}
    _emit(json.dumps(payload, sort_keys=True) + "\n", args.out)
    return 0


# ----------------------------------------------------------- split/merge

def cmd_split(args) -> int:
    if args.overlap < 0 or args.patch <= args.overlap:
        raise _UsageError("need --patch > --overlap >= 0")
    windows = dataio.split_windows(args.width, args.height, args.patch,
                                   args.overlap)
    lines = [f"{w.x0} {w.y0} {w.w} {w.h}" for w in windows]
    _emit("\n".join(lines) + "\n", args.out)
    if args.annotations:
        if not args.out_dir:
            raise _UsageError("--annotations requires --out-dir")
        annotations = dataio.parse_dota_annotation(_read_text(args.annotations))
        stem = Path(args.annotations).stem
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for win in windows:
            remapped = dataio.remap_annotations_to_window(annotations, win)
            body = "\n".join(dataio.format_annotation_line(a) for a in remapped)
            target = out_dir / f"{stem}__{win.x0}_{win.y0}.txt"
            target.write_text(body + "\n" if body else "", encoding="utf-8",
                              newline="\n")
    return 0


def _split_window_name(name: str) -> tuple[str, int, int]:
    base, sep, suffix = name.rpartition("__")
    if sep:
        parts = suffix.split("_")
        if len(parts) == 2:
            try:
                return base, int(parts[0]), int(parts[1])
            except ValueError:
                pass
    return name, 0, 0


def _merge_one_base(task):
    base, groups, threshold = task
    per_window = [(dataio.Window(x0, y0, 0, 0), dets)
                  for (x0, y0), dets in sorted(groups.items())]
    return base, dataio.merge_patch_detections(per_window, threshold)


def cmd_merge(args) -> int:
    records = dataio.parse_dota_results(_read_text(args.results))
    grouped: dict[str, dict[tuple[int, int], list[Detection]]] = {}
    for name, score, quad in records:
        base, x0, y0 = _split_window_name(name)
        grouped.setdefault(base, {}).setdefault((x0, y0), []).append(
            Detection(class_id=0, score=score, quad=quad))
    tasks = [(base, grouped[base], args.iou_thresh) for base in sorted(grouped)]
    out_lines = []
    for base, merged in _pmap(_merge_one_base, tasks, args.jobs):
        for det in merged:
            coords = " ".join(f"{v:.2f}" for v in det.quad.ravel())
            out_lines.append(f"{base} {det.score:.4f} {coords}")
    _emit("\n".join(out_lines) + "\n" if out_lines else "", args.out)
    return 0


# ------------------------------------------------------------------ eval

def _eval_one_class(task):
    name, dets, gts, iou_threshold, metric = task
    matches, n_positive = evaluation.match_detections(dets, gts, iou_threshold)
    ap = evaluation.average_precision(matches, n_positive, metric)
    return name, ap, n_positive


def cmd_eval(args) -> int:
    gt_dir = Path(args.gt_dir)
    det_dir = Path(args.det_dir)
    gts_by_image = {
        path.stem: dataio.parse_dota_annotation(path.read_text(encoding="utf-8"))
        for path in sorted(gt_dir.glob("*.txt"))
    }
    dets_by_class = {}
    for path in sorted(det_dir.glob("Task1_*.txt")):
        name = path.stem[len("Task1_"):]
        dets_by_class[name] = dataio.parse_dota_results(
            path.read_text(encoding="utf-8"))
    if args.classes:
        classes = [c for c in args.classes.split(",") if c]
    else:
        names = {ann.category for anns in gts_by_image.values() for ann in anns}
        names.update(dets_by_class)
        classes = sorted(names)
    if not classes:
        raise ParseError("no classes found in ground truth or detections")

    metric = evaluation.VOC07 if args.metric == "voc07" else evaluation.ALL_POINTS
    tasks = []
    for name in classes:
        gts = {
            image: [(ann.quad, ann.difficult) for ann in anns
                    if ann.category == name]
            for image, anns in gts_by_image.items()
        }
        tasks.append((name, list(dets_by_class.get(name, [])), gts,
                      args.iou, metric))
    per_class = {}
    counted = []
    for name, ap, n_positive in _pmap(_eval_one_class, tasks, args.jobs):
        per_class[name] = ap
        if n_positive > 0 or not args.skip_empty:
            counted.append(ap)
    mean_ap = float(np.mean(counted)) if counted else 0.0
    result = evaluation.EvalResult(per_class=per_class, mean_ap=mean_ap,
                                   metric=metric, iou_threshold=args.iou)
    sys.stdout.write(evaluation.ap_table_text(result))
    if args.csv:
        _emit(evaluation.ap_table_csv(result), args.csv)
    return 0


# ------------------------------------------------------------ experiments

def _curve_one_ratio(task):
    ar, bias_max, step = task
    return experiments.iou_angle_curve([ar], bias_max, step)


def cmd_curves(args) -> int:
    try:
        ratios = [float(v) for v in args.ars.split(",") if v]
    except ValueError:
        raise _UsageError("--ars must be a comma-separated list of numbers")
    tasks = [(ar, args.bias_max, args.step) for ar in ratios]
    rows = [row for chunk in _pmap(_curve_one_ratio, tasks, args.jobs)
            for row in chunk]
    _emit(experiments.curve_csv(rows), args.out)
    return 0


def cmd_fit(args) -> int:
    rows = experiments.compare_representations(
        args.samples, seed=args.seed, lr=args.lr, max_iter=args.max_iter,
        jobs=args.jobs)
    _emit(experiments.comparison_csv(rows), args.out)
    return 0


# ----------------------------------------------------------------- parser

def _build_parser() -> _Parser:
    parser = _Parser(prog="polarbox", description=__doc__)
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized commands (fit)")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes; output bytes never change")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress informational stderr output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="annotation file -> polar-code CSV")
    p.add_argument("annotations")
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="polar-code CSV -> annotation file")
    p.add_argument("codes")
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("iou", help="IoU of two quads given as 8 reals each")
    p.add_argument("coords", type=float, nargs=16, metavar="COORD")
    p.set_defaults(func=cmd_iou)

    p = sub.add_parser("nms", help="filter a result file with rotated NMS")
    p.add_argument("results")
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_nms)

    p = sub.add_parser("targets", help="annotation file -> binary target maps")
    p.add_argument("annotations")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--classes", required=True,
                   help="comma-separated class names (plane order)")
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_targets)

    p = sub.add_parser("fuse", help="multiply heatmap by semantic map from a dump")
    p.add_argument("maps")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("loss", help="head losses of a prediction dump vs a target dump")
    p.add_argument("pred")
    p.add_argument("target")
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("split", help="tile an image extent into windows")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--patch", type=int, default=dataio.DEFAULT_PATCH)
    p.add_argument("--overlap", type=int, default=dataio.DEFAULT_OVERLAP)
    p.add_argument("--annotations")
    p.add_argument("--out-dir")
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("merge", help="merge per-window detections back")
    p.add_argument("results",
                   help="result file whose image names carry __x0_y0 offsets")
    p.add_argument("--iou-thresh", type=float, default=dataio.DEFAULT_MERGE_IOU)
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("eval", help="AP table from gt dir + result dir")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--det-dir", required=True)
    p.add_argument("--classes")
    p.add_argument("--metric", choices=["voc07", "all"], default="voc07")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--skip-empty", action="store_true")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curves", help="IoU vs angle-bias table as CSV")
    p.add_argument("--ars", default="1,3,5,8")
    p.add_argument("--bias-max", type=float, default=45.0)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("fit", help="representation comparison table as CSV")
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--lr", type=float, default=experiments.DEFAULT_LR)
    p.add_argument("--max-iter", type=int, default=experiments.DEFAULT_MAX_ITER)
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_fit)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InvalidInput as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateGeometry, NonConvexInput, NonFiniteDiameter) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return 3
    except PolarboxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
