"""Command line entry point: ``mlgpi {train,classify,crossval,synth,fieldviz}``."""
import argparse
import logging
import sys

import numpy as np

from . import __version__
from .classify import FUSION_KINDS, cross_validate, fit_model
from .data import (DEFAULT_ROTATION, Standardizer, StripeLayout,
                   load_dataset, save_dataset, shear_atlas, synth_rotation_atlas,
                   synth_stripes)
from .errors import MlgpiError
from .export import MODES, GridSpec, export_field, render_grid_svg
from .lmnn import LmnnConfig
from .modelfile import load_model, save_model

log = logging.getLogger("mlgpi")


def _clusters(text):
    if text == "class":
        return "class", None
    if text.startswith("kmeans:"):
        try:
            n = int(text.split(":", 1)[1])
        except ValueError:
            n = 0
        if n >= 1:
            return "kmeans", n
    raise argparse.ArgumentTypeError("expected 'class' or 'kmeans:N'")


def _sigma(text):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        value = -1.0
    if value <= 0:
        raise argparse.ArgumentTypeError("sigma must be 'auto' or > 0")
    return value


def _pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated values")
    return tuple(float(p) for p in parts)


def _add_training(p):
    p.add_argument("--data", required=True, help="comma-separated, label last")
    p.add_argument("--header", action="store_true",
                   help="skip the first line of the data file")
    p.add_argument("--k", type=int, default=3, help="k-NN neighbours")
    p.add_argument("--targets", type=int, default=3,
                   help="LMNN target neighbours per point")
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--learning-rate", type=float, default=1e-2)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--clusters", type=_clusters, default=("class", None),
                   help="class | kmeans:N")
    p.add_argument("--steps", type=int, default=32, help="RK4 steps")
    p.add_argument("--sigma", type=_sigma, default="auto")
    p.add_argument("--fusion", choices=FUSION_KINDS, default="velocity")
    p.add_argument("--no-glplus", action="store_true",
                   help="do not keep component maps in GL+")
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--seed", type=int, default=0)


def _config(args):
    clustering, n_clusters = args.clusters
    return LmnnConfig(k=args.targets, mu=args.mu,
                      learning_rate=args.learning_rate,
                      max_iters=args.max_iters,
                      enforce_glplus=not args.no_glplus,
                      clustering=clustering, n_clusters=n_clusters,
                      seed=args.seed)


def _fit(args, raw, config):
    if args.no_standardize:
        scaler = Standardizer.identity(raw.dim)
    else:
        scaler = Standardizer.fit(raw.points)
    model = fit_model(scaler.apply(raw), args.fusion, config, k=args.k,
                      sigma=args.sigma, steps=args.steps)
    return model, scaler


def cmd_train(args):
    raw, _ = load_dataset(args.data, header=args.header)
    config = _config(args)
    model, scaler = _fit(args, raw, config)
    save_model(args.model, model, scaler, config)
    print(f"saved {args.fusion} model with "
          f"{0 if model.atlas is None else model.atlas.q} components "
          f"to {args.model}")
    return 0


def _read_queries(args, dim):
    if args.unlabeled:
        X = np.loadtxt(args.data, delimiter=",", ndmin=2,
                       skiprows=1 if args.header else 0)
        if X.shape[1] != dim:
            raise MlgpiError(f"queries have {X.shape[1]} features, model "
                             f"expects {dim}")
        return X, None
    data, _ = load_dataset(args.data, header=args.header)
    if data.dim != dim:
        raise MlgpiError(f"queries have {data.dim} features, model "
                         f"expects {dim}")
    return data.points, data.labels


def cmd_classify(args):
    model, scaler, _ = load_model(args.model)
    X, y = _read_queries(args, model.train.dim)
    pred = model.predict(scaler.transform(X))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("index,label\n")
            for i, p in enumerate(pred):
                fh.write(f"{i},{int(p)}\n")
    else:
        for p in pred:
            print(int(p))
    if y is not None:
        print(f"accuracy: {float(np.mean(pred == y)):.4f}", file=sys.stderr)
    return 0


def cmd_crossval(args):
    raw, _ = load_dataset(args.data, header=args.header)
    config = _config(args)

    def pipeline(train):
        model, scaler = _fit(args, train, config)
        return lambda X: model.predict(scaler.transform(X))

    report = cross_validate(raw, args.folds, pipeline, seed=args.seed,
                            workers=args.workers)
    print(report.as_text())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.as_csv())
    return 0


def cmd_synth(args):
    if args.kind != "stripes":
        raise MlgpiError(f"unknown synthetic kind {args.kind!r}")
    layout = StripeLayout(stripes=args.stripes, width=args.width,
                          gap=args.gap, row_spacing=args.row_spacing,
                          densities=args.densities,
                          base_count=args.base_count)
    data = synth_stripes(layout, noise=args.noise, seed=args.seed)
    save_dataset(data, args.out)
    counts = np.bincount(data.labels)
    print(f"wrote {data.n} points ({', '.join(map(str, counts))} per class)"
          f" to {args.out}")
    return 0


def cmd_fieldviz(args):
    if args.model:
        model, _, _ = load_model(args.model)
        if model.atlas is None:
            raise MlgpiError("model has no fusion components")
        atlas = model.atlas.with_steps(args.steps or model.atlas.steps)
    elif args.shear is not None:
        atlas = shear_atlas(args.shear, steps=args.steps or 32)
    else:
        atlas = synth_rotation_atlas(args.rotation, steps=args.steps or 32)
    grid = GridSpec.parse(args.grid)
    rows = export_field(atlas, grid, args.out, args.mode)
    if args.svg:
        render_grid_svg(atlas, grid, args.svg,
                        "displacement_fusion"
                        if args.mode == "displacement_fusion" else "flow")
    msg = f"wrote {len(rows)} rows to {args.out}"
    if args.mode == "jacobian":
        msg += f"; min detJ {rows[:, 4].min():.6g}"
    print(msg)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mlgpi",
        description="Nonlinear metric learning by velocity fusion of local "
                    "linear metrics.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn component metrics, save model")
    _add_training(p)
    p.add_argument("--model", required=True, help="output model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="k-NN labels from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--unlabeled", action="store_true",
                   help="every column is a feature")
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("crossval", help="stratified k-fold evaluation")
    _add_training(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="machine-readable report (csv)")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser(
        "synth", help="generate the two-class stripes set",
        description="Two vertical class bands split at x=0, each drawn as "
                    "horizontal stripes. The defaults are conventions of "
                    "this tool, not values from any reference experiment.")
    p.add_argument("--kind", default="stripes", choices=["stripes"])
    p.add_argument("--out", required=True)
    p.add_argument("--stripes", type=int, default=4)
    p.add_argument("--width", type=float, default=4.0)
    p.add_argument("--gap", type=float, default=1.0)
    p.add_argument("--row-spacing", type=float, default=1.0)
    p.add_argument("--densities", type=_pair, default=(1.0, 2.0),
                   help="class 0,class 1 relative densities")
    p.add_argument("--base-count", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fieldviz", help="export a deformation field table")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="model file (grid in model units)")
    src.add_argument("--rotation", type=float, default=DEFAULT_ROTATION,
                     help="two opposed rotations of this angle (default)")
    src.add_argument("--shear", type=float,
                     help="two opposed shears of this strength")
    p.add_argument("--grid", default="-5,5,50,-5,5,50",
                   help="xmin,xmax,nx,ymin,ymax,ny; write --grid=-2,2,... "
                        "when xmin is negative")
    p.add_argument("--mode", choices=MODES, default="flow")
    p.add_argument("--steps", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", help="also render warped grid lines")
    p.set_defaults(func=cmd_fieldviz)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else
                        logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (MlgpiError, OSError, ValueError) as exc:
        print(f"mlgpi {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
