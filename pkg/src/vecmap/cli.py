"""Command-line entry point: ``vecmap {eval,loss,bench-attention,render}``.

Exit codes:

====  ==================================================
0     success
2     usage error (bad flags or arguments)
3     parse error (file is not valid JSON lines / schema)
4     validation error (unknown class, degenerate geometry, domain violation)
5     no predictions in any input scene (``eval``, ``loss``)
6     I/O error
====  ==================================================
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .assignment import GroundTruthSet, PredictionSet, instance_matching
from .attention import KERNELS, count_macs, fit_exponent
from .errors import DomainError, SchemaError
from .evaluation import EvalConfig, evaluate
from .geometry import normalize_points
from .io import parse_scene, score_vector
from .losses import LossWeights, gradient_check, random_instance, total_edge_count, total_loss
from .raster import emit_plot, rasterize

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NO_PREDICTIONS = 5
EXIT_IO = 6


class NoPredictionsError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _size_list(text: str) -> list[tuple[int, int]]:
    sizes = []
    for item in text.split(","):
        try:
            a, b = item.lower().split("x")
            sizes.append((int(a), int(b)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected sizes like 10x10,20x20, got {text!r}") from None
    return sizes


def _kernel_list(text: str) -> list[str]:
    names = [k.strip().replace("-", "_") for k in text.split(",") if k.strip()]
    bad = [k for k in names if k not in KERNELS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"kernels must be from {', '.join(KERNELS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vecmap", description="Vector-map evaluation, losses, attention benchmarks and rendering.",
        epilog="exit codes: 0 ok, 2 usage, 3 parse, 4 validation, 5 no predictions, 6 I/O")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="chamfer-distance AP over scene files")
    p.add_argument("scenes", nargs="+", type=Path)
    p.add_argument("--thresholds", type=_float_list, default=[0.2, 0.5, 1.0],
                   help="chamfer thresholds in metres (default 0.2,0.5,1.0)")
    p.add_argument("--samples", type=int, default=100, help="points per element for chamfer")
    p.add_argument("--out", type=Path, default=Path("vecmap_out"))
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("loss", help="matching and loss breakdown for one scene")
    p.add_argument("scene", type=Path)
    p.add_argument("--lambda-c", type=float, default=10.0)
    p.add_argument("--lambda-p", type=float, default=5.0)
    p.add_argument("--lambda-d", type=float, default=1.0)
    p.add_argument("--focal-alpha", type=float, default=0.25)
    p.add_argument("--focal-gamma", type=float, default=2.0)
    p.add_argument("--units", choices=("normalized", "meters"), default="normalized",
                   help="coordinates the losses are computed in (default normalized)")
    p.add_argument("--gradcheck", action="store_true",
                   help="also run the finite-difference gradient check")
    p.add_argument("--trials", type=int, default=100, help="random instances for --gradcheck")
    p.add_argument("--out", type=Path, default=Path("vecmap_out"))
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench-attention", help="MAC counts and timings of attention kernels")
    p.add_argument("--kernels", type=_kernel_list, default=list(KERNELS))
    p.add_argument("--sizes", type=_size_list, default=[(10, 10), (20, 20), (40, 40)],
                   help="square grids NxN_v (default 10x10,20x20,40x40)")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--out", type=Path, default=Path("vecmap_out"))
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("render", help="draw ground truth and predictions as PPM images")
    p.add_argument("scene", type=Path)
    p.add_argument("--out", type=Path, default=Path("vecmap_out"))
    p.add_argument("--seed", type=int, default=0)
    return parser


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def cmd_eval(args) -> int:
    cfg = EvalConfig(thresholds=tuple(args.thresholds), n_samples=args.samples)
    scenes = [parse_scene(path) for path in args.scenes]
    if not any(s.has_predictions for s in scenes):
        raise NoPredictionsError("none of the input scenes contains predictions")
    report = evaluate(scenes, cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    text = report.to_text()
    (args.out / "eval_report.txt").write_text(text, encoding="utf-8")
    (args.out / "eval_report.json").write_text(report.to_json(), encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _loss_inputs(scene, units: str):
    if not scene.has_predictions:
        raise NoPredictionsError(f"{scene.scene_id}: scene has no predictions")
    convert = (lambda p: normalize_points(p, scene.frame)) if units == "normalized" else np.asarray
    gts = GroundTruthSet([e.with_points(convert(e.points)) for e in scene.ground_truth])
    points = np.stack([convert(p.element.points) for p in scene.predictions])
    scores = np.stack([score_vector(p) for p in scene.predictions])
    return PredictionSet.from_scores(points, scores), gts


def cmd_loss(args) -> int:
    weights = LossWeights(args.lambda_c, args.lambda_p, args.lambda_d,
                          args.focal_alpha, args.focal_gamma)
    scene = parse_scene(args.scene)
    preds, gts = _loss_inputs(scene, args.units)
    match = instance_matching(preds, gts, weights.lambda_c, weights.lambda_p)
    lb = total_loss(preds, gts, match, weights)
    result = {
        "scene": scene.scene_id,
        "units": args.units,
        "weights": vars(weights),
        "matching": [
            {"pred": p.pred, "gt": p.gt, "gamma_index": p.gamma_index,
             "gamma": [int(x) for x in p.gamma], "point_cost": p.point_cost}
            for p in match.pairs
        ],
        "unmatched": list(match.unmatched),
        "edge_count": total_edge_count(gts),
        "loss": {"cls": lb.cls, "p2p": lb.p2p, "dir": lb.dir, "total": lb.total},
        "grad_max_abs": {
            "points": float(np.max(np.abs(lb.grad_points))) if lb.grad_points.size else 0.0,
            "logits": float(np.max(np.abs(lb.grad_logits))) if lb.grad_logits.size else 0.0,
        },
    }
    lines = [f"scene {scene.scene_id} ({args.units} coordinates)"]
    for p in match.pairs:
        lines.append(f"  gt {p.gt} <- pred {p.pred}  gamma #{p.gamma_index}  point cost {p.point_cost!r}")
    lines.append(f"  unmatched predictions: {list(match.unmatched)}")
    lines.append(f"cls   {lb.cls!r}")
    lines.append(f"p2p   {lb.p2p!r}")
    lines.append(f"dir   {lb.dir!r}")
    lines.append(f"total {lb.total!r}")
    if args.gradcheck:
        scene_err = gradient_check(preds, gts, match, weights)
        rng = np.random.default_rng(args.seed)
        worst = 0.0
        for _ in range(args.trials):
            p, g = random_instance(rng)
            worst = max(worst, gradient_check(p, g, instance_matching(p, g), weights))
        result["gradcheck"] = {"scene_max_rel_error": scene_err, "trials": args.trials,
                               "random_max_rel_error": worst, "seed": args.seed}
        lines.append(f"gradcheck scene max rel error {scene_err:.3e}")
        lines.append(f"gradcheck {args.trials} random instances max rel error {worst:.3e}")
    args.out.mkdir(parents=True, exist_ok=True)
    _write_json(args.out / "loss_report.json", result)
    print("\n".join(lines))
    return EXIT_OK


def cmd_bench_attention(args) -> int:
    if len(args.sizes) < 3:
        print("vecmap bench-attention: error: need at least 3 sizes", file=sys.stderr)
        return EXIT_USAGE
    if any(a != b or a < 1 for a, b in args.sizes):
        print("vecmap bench-attention: error: sizes must be square grids", file=sys.stderr)
        return EXIT_USAGE
    rows, timings, fits = [], [], {}
    for kernel in args.kernels:
        lengths, counts = [], []
        for n, nv in args.sizes:
            start = time.perf_counter()
            c = count_macs(kernel, n, nv, args.dim, args.seed)
            elapsed = time.perf_counter() - start
            rows.append({"kernel": kernel, "n": n, "n_points": nv, "tokens": n * nv,
                         "interaction_macs": c.interaction, "projection_macs": c.projection})
            timings.append(elapsed)
            lengths.append(n * nv)
            counts.append(c.interaction)
        fits[kernel] = fit_exponent(lengths, counts)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_json(args.out / "bench_macs.json",
                {"dim": args.dim, "seed": args.seed, "rows": rows, "exponents": fits})
    _write_json(args.out / "bench_timings.json",
                [dict(kernel=r["kernel"], tokens=r["tokens"], seconds=t) for r, t in zip(rows, timings)])
    print(f"{'kernel':<12}{'N x N_v':>10}{'L':>8}{'interaction MACs':>20}{'projection MACs':>18}{'seconds':>10}")
    for r, t in zip(rows, timings):
        print(f"{r['kernel']:<12}{r['n']:>5} x{r['n_points']:<3}{r['tokens']:>8}"
              f"{r['interaction_macs']:>20}{r['projection_macs']:>18}{t:>10.4f}")
    for kernel, slope in fits.items():
        print(f"exponent {kernel}: {slope:.4f}")
    return EXIT_OK


def cmd_render(args) -> int:
    scene = parse_scene(args.scene)
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    path = args.out / f"{scene.scene_id}_gt.ppm"
    emit_plot(rasterize(scene.ground_truth, scene.frame), path)
    written.append(path)
    if scene.has_predictions:
        path = args.out / f"{scene.scene_id}_pred.ppm"
        emit_plot(rasterize([p.element for p in scene.predictions], scene.frame), path)
        written.append(path)
    for path in written:
        print(path)
    return EXIT_OK


_COMMANDS = {
    "eval": cmd_eval,
    "loss": cmd_loss,
    "bench-attention": cmd_bench_attention,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    np.random.seed(args.seed)
    try:
        return _COMMANDS[args.command](args)
    except SchemaError as exc:
        print(f"vecmap {args.command}: {exc.category} error: {exc}", file=sys.stderr)
        return EXIT_PARSE if exc.category in ("syntax", "schema") else EXIT_VALIDATION
    except DomainError as exc:
        print(f"vecmap {args.command}: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NoPredictionsError as exc:
        print(f"vecmap {args.command}: {exc}", file=sys.stderr)
        return EXIT_NO_PREDICTIONS
    except OSError as exc:
        print(f"vecmap {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
