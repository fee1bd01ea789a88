"""Command-line pipeline: fit, predict, labelmap, centers, report, synth.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure. Diagnostics go to stderr; machine-readable output goes only to
the requested files.
"""

import argparse
import sys

import numpy as np

from . import analysis, dpgmm, labelmap
from .errors import DataError, NumericalError
from .points import as_vector_points, flatten_spatial, scale_to_range, unflatten_labels
from .tensor_io import load_meta, load_npy, save_npy


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage failures exit 1, not 2."""

    def error(self, message):
        raise _UsageError(message)


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _add_scale_flags(sub):
    sub.add_argument("--scale-lo", type=float, default=0.0, help="target range lower bound")
    sub.add_argument("--scale-hi", type=float, default=10.0, help="target range upper bound")
    sub.add_argument(
        "--no-scale", action="store_true", help="cluster the raw values without rescaling"
    )


def _add_input_flags(sub):
    sub.add_argument("--input", required=True, help="activation tensor (.npy)")
    sub.add_argument(
        "--mode",
        required=True,
        choices=("spatial", "vector"),
        help="one point per feature-map pixel (rank-4) or per image (rank-2)",
    )
    _add_scale_flags(sub)
    sub.add_argument("--threads", type=_positive_int, default=1)


def build_parser():
    parser = _Parser(prog="convclust", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", help="fit a mixture to an activation tensor")
    _add_input_flags(fit)
    fit.add_argument("--alpha", type=_positive_float, default=0.2)
    fit.add_argument("--max-components", type=_positive_int, default=50)
    fit.add_argument("--tol", type=_positive_float, default=1e-4)
    fit.add_argument("--max-iter", type=_positive_int, default=500)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", required=True, help="model JSON destination")
    fit.set_defaults(func=_cmd_fit)

    predict = commands.add_parser("predict", help="hard cluster ids for a tensor")
    predict.add_argument("--model", required=True, help="model JSON from fit")
    _add_input_flags(predict)
    predict.add_argument("--out", required=True, help="labels .npy destination (n_points, 1)")
    predict.set_defaults(func=_cmd_predict)

    lmap = commands.add_parser("labelmap", help="render one image's cluster map as PPM")
    lmap.add_argument("--model", required=True)
    lmap.add_argument("--input", required=True, help="rank-4 activation tensor (.npy)")
    _add_scale_flags(lmap)
    lmap.add_argument("--image-index", type=int, required=True)
    lmap.add_argument(
        "--background",
        default="auto",
        help="'auto' (most populous id), an explicit id, or 'none'",
    )
    lmap.add_argument("--out", required=True, help="PPM destination")
    lmap.set_defaults(func=_cmd_labelmap)

    centers = commands.add_parser(
        "centers", help="project non-background cluster centroids to input space"
    )
    centers.add_argument("--model", required=True)
    centers.add_argument("--input", required=True, help="rank-4 activation tensor (.npy)")
    _add_scale_flags(centers)
    centers.add_argument("--subsample-factor", type=_positive_int, required=True)
    centers.add_argument("--background", default="auto", help="'auto' or an explicit id")
    centers.add_argument("--out", required=True, help="CSV destination")
    centers.set_defaults(func=_cmd_centers)

    report = commands.add_parser("report", help="per-cluster class composition")
    report.add_argument("--labels", required=True, help="labels .npy from predict")
    report.add_argument("--meta", required=True, help="metadata CSV")
    report.add_argument("--model", default=None, help="optional model JSON for weights")
    report.add_argument("--out", required=True, help="report JSON destination")
    report.set_defaults(func=_cmd_report)

    synth = commands.add_parser("synth", help="generate a labeled synthetic mixture")
    synth.add_argument("--k", type=_positive_int, required=True)
    synth.add_argument("--dim", type=_positive_int, required=True)
    synth.add_argument("--n", type=_positive_int, required=True)
    synth.add_argument("--sep", type=float, required=True)
    synth.add_argument("--sigma", type=_positive_float, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, help="points .npy destination")
    synth.add_argument("--truth", required=True, help="truth labels CSV destination")
    synth.set_defaults(func=_cmd_synth)

    return parser


def _load_points(args, mode=None):
    tensor = load_npy(args.input)
    mode = mode or args.mode
    pm = flatten_spatial(tensor) if mode == "spatial" else as_vector_points(tensor)
    if not args.no_scale:
        pm = scale_to_range(pm, lo=args.scale_lo, hi=args.scale_hi)
    return pm


def _cmd_fit(args):
    pm = _load_points(args)
    cfg = dpgmm.DpgmmConfig(
        alpha=args.alpha,
        truncation=args.max_components,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
    )
    result = dpgmm.fit(pm, cfg, threads=args.threads)
    dpgmm.save_model(result, args.out)
    print(
        f"fit: {pm.n_points} points (dim {pm.dim}), "
        f"{result.iterations} iterations, converged={result.converged}, "
        f"{result.effective_components} effective components",
        file=sys.stderr,
    )
    return 0


def _cmd_predict(args):
    model = dpgmm.load_model(args.model).model
    pm = _load_points(args)
    labels = dpgmm.predict(model, pm)
    save_npy(labels.astype(np.float64).reshape(-1, 1), args.out)
    return 0


def _resolve_background(spec, label_map):
    if spec == "none":
        return None
    if spec == "auto":
        return labelmap.select_background(label_map)
    try:
        return int(spec)
    except ValueError:
        raise DataError(f"--background must be 'auto', 'none', or an id, got {spec!r}")


def _spatial_label_maps(args, model):
    pm = _load_points(args, mode="spatial")
    labels = dpgmm.predict(model, pm)
    return unflatten_labels(pm, labels)


def _cmd_labelmap(args):
    model = dpgmm.load_model(args.model).model
    maps = _spatial_label_maps(args, model)
    if not 0 <= args.image_index < len(maps):
        raise DataError(
            f"--image-index {args.image_index} out of range for {len(maps)} images"
        )
    lmap = maps[args.image_index]
    lmap = lmap.with_background(_resolve_background(args.background, lmap))
    n_colors = max(model.truncation, int(lmap.labels.max()) + 1)
    image = labelmap.render(lmap, labelmap.make_palette(n_colors))
    labelmap.write_ppm(image, args.out)
    return 0


def _cmd_centers(args):
    model = dpgmm.load_model(args.model).model
    if args.background == "none":
        raise DataError("centers requires a background cluster ('auto' or an id)")
    all_centers = []
    for lmap in _spatial_label_maps(args, model):
        background = _resolve_background(args.background, lmap)
        if np.all(lmap.labels == background):
            print(
                f"centers: image {lmap.image_index} is entirely background, skipping",
                file=sys.stderr,
            )
            continue
        all_centers.extend(
            labelmap.cluster_centers(
                lmap.with_background(background), args.subsample_factor
            )
        )
    labelmap.write_centers_csv(all_centers, args.out)
    return 0


def _cmd_report(args):
    raw = load_npy(args.labels)
    if raw.ndim != 2 or 1 not in raw.shape:
        raise DataError(f"labels file must be a single row/column, got shape {raw.shape}")
    flat = raw.ravel()
    ids = np.rint(flat)
    if np.any(ids != flat):
        raise DataError("labels file holds non-integer values")
    meta = load_meta(args.meta)
    report = analysis.composition(ids.astype(np.int64), meta)
    if args.model is not None:
        report = analysis.attach_model_info(report, dpgmm.load_model(args.model).model)
    analysis.write_report_json(report, args.out)
    return 0


def _cmd_synth(args):
    spec = analysis.SynthSpec(
        k_true=args.k,
        dim=args.dim,
        n_points=args.n,
        separation=args.sep,
        sigma=args.sigma,
        seed=args.seed,
    )
    pm, truth = analysis.synth_generate(spec)
    save_npy(pm.values, args.out)
    with open(args.truth, "w", encoding="utf-8") as fh:
        fh.write("label\n")
        for value in truth:
            fh.write(f"{int(value)}\n")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
