"""Command-line entry point: ``ou-diffuse <subcommand> ...``.

Every run writes ``<primary output>.manifest.json`` holding the exact
argument vector; ``ou-diffuse replay <manifest>`` re-executes it.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (DataError, SampleMatrix, apply_scaler, atomic_write_text, augment, csv_text,
                   fit_scaler, load_csv, split, write_csv)
from .forward import simulate_paths
from .model import ModelFileError, TrainConfig, load_model, save_model
from .rng import NormalStreams, thread_count
from .sampler import GenerationConfig, generate_batch, reverse_chain
from .schedule import DEFAULT_BETA_MAX, DEFAULT_BETA_MIN, DEFAULT_STEPS, build_schedule
from .stats import classification_metrics, energy_distance, energy_threshold, kde_1d
from .svg import timeline_figure, trajectory_figure
from .trainer import train

log = logging.getLogger("ou_diffuse")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=_nonneg_int, default=0, help="random seed (default 0)")
    p.add_argument("--output-dir", default=".", help="directory for relative output paths")
    p.add_argument("--quiet", action="store_true", help="suppress progress messages")


def _schedule_flags(p: argparse.ArgumentParser):
    p.add_argument("--steps", type=_positive_int, default=DEFAULT_STEPS)
    p.add_argument("--beta-min", type=float, default=DEFAULT_BETA_MIN)
    p.add_argument("--beta-max", type=float, default=DEFAULT_BETA_MAX)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ou-diffuse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="forward OU trajectories (CSV, optional SVG)")
    _common(p)
    _schedule_flags(p)
    p.add_argument("--x0", required=True, help="start point: comma list (e.g. 3 or 2,-1) or a CSV file")
    p.add_argument("--trajectories", type=_positive_int, required=True)
    p.add_argument("--output", default="trajectories.csv")
    p.add_argument("--svg", default=None, help="also write a trajectory/KDE figure here")
    p.add_argument("--kde-steps", type=_int_list, default=None,
                   help="grid indices for the density panel (default: 0 excluded, a few spread out)")
    p.add_argument("--plot-trajectories", type=_positive_int, default=10,
                   help="how many paths to draw in the figure")

    p = sub.add_parser("timeline", help="forward/reverse scatter timeline for 2-d data (SVG)")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--snapshots", type=_int_list, default=None,
                   help="grid indices to show (default 0,N/8,N/4,N/2,N)")
    p.add_argument("--count", type=_positive_int, default=None,
                   help="reverse samples (default: number of data rows)")
    p.add_argument("--output", default="timeline.svg")

    p = sub.add_parser("train", help="fit a noise model to a CSV")
    _common(p)
    _schedule_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--class", dest="class_value", type=int, default=None,
                   help="train only on rows with this label")
    p.add_argument("--target", choices=("epsilon", "x0", "mu"), default="epsilon")
    p.add_argument("--epochs", type=_positive_int, default=200)
    p.add_argument("--batch", type=_positive_int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--timestep-sampling", choices=("one_random_step_per_point", "all_steps_per_point"),
                   default="one_random_step_per_point")
    p.add_argument("--literal-trajectories", action="store_true",
                   help="simulate full recursive paths instead of the closed form")
    p.add_argument("--width", type=_positive_int, default=128)
    p.add_argument("--depth", type=_positive_int, default=3)
    p.add_argument("--activation", choices=("silu", "tanh", "softplus"), default="silu")
    p.add_argument("--plateau-patience", type=_positive_int, default=None)
    p.add_argument("--no-eps-skip", dest="eps_skip", action="store_false",
                   help="predict epsilon with the plain network output")
    p.add_argument("--ema-decay", type=float, default=0.999,
                   help="weight-average decay for the saved model (0 keeps the last step)")
    p.add_argument("--output", default="model.json")

    p = sub.add_parser("generate", help="sample from a trained model")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--method", choices=("epsilon", "x0", "mu"), default=None)
    p.add_argument("--output", default="generated.csv")

    p = sub.add_parser("split", help="stratified train/test split of a labelled CSV")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--train-output", default="train.csv")
    p.add_argument("--test-output", default="test.csv")

    p = sub.add_parser("augment", help="append synthetic rows to a training CSV")
    _common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--synthetic", required=True)
    p.add_argument("--label", type=int, required=True, help="label given to synthetic rows")
    p.add_argument("--label-column", default=None,
                   help="label column of --train (default: the one column --synthetic lacks)")
    p.add_argument("--output", default="augmented.csv")

    p = sub.add_parser("evaluate", help="precision/recall/F1 from prediction files")
    _common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--actual", required=True)
    p.add_argument("--positive", type=int, default=1)
    p.add_argument("--column", default=None, help="column to read in both files (default: last)")
    p.add_argument("--output", default="evaluation.csv")

    p = sub.add_parser("distance", help="energy distance between two sample CSVs")
    _common(p)
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--pool", default=None, help="reference sample for the null threshold")
    p.add_argument("--null-splits", type=_positive_int, default=200)
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--output", default="distance.csv")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    return parser


def _out(args, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else Path(args.output_dir) / p


def _schedule(args):
    return build_schedule(args.steps, args.beta_min, args.beta_max)


def _parse_x0(text: str) -> np.ndarray:
    path = Path(text)
    if path.is_file():
        return load_csv(path).features
    try:
        return np.array([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError:
        raise UsageError(f"--x0 must be a number list or an existing CSV file, got {text!r}") from None


def cmd_simulate(args) -> list[Path]:
    s = _schedule(args)
    x0 = _parse_x0(args.x0)
    m = args.trajectories
    if x0.ndim == 2:
        if x0.shape[0] == 1:
            x0 = x0[0]
        elif x0.shape[0] != m:
            raise UsageError(f"--x0 file has {x0.shape[0]} rows; need 1 or --trajectories ({m})")
    rng = NormalStreams(args.seed)
    paths = simulate_paths(x0, s, rng, m, workers=thread_count())
    d = paths.shape[2]
    header = ["trajectory_id", "n", "t"] + [f"x_{j + 1}" for j in range(d)]
    n_idx = np.arange(s.n_steps + 1)
    rows = []
    for k in range(m):
        for n in n_idx:
            rows.append([str(k), str(n), float(s.t[n])] + [float(v) for v in paths[k, n]])
    out = _out(args, args.output)
    atomic_write_text(out, csv_text(header, rows))
    written = [out]

    if args.svg:
        coord = paths[:, :, 0]
        steps = args.kde_steps or sorted({s.n_steps // 20, s.n_steps // 8, s.n_steps // 3, s.n_steps})
        curves = []
        if m >= 2:
            lo, hi = float(coord.min()), float(coord.max())
            grid = np.linspace(min(lo, -4.0) - 0.5, max(hi, 4.0) + 0.5, 400)
            for n in steps:
                if not 0 <= n <= s.n_steps:
                    raise UsageError(f"--kde-steps index {n} outside [0, {s.n_steps}]")
                col = coord[:, n]
                if np.ptp(col) > 0:
                    curves.append((f"t = {s.t[n]:.2f}", kde_1d(col, grid)))
            ref = ("N(0,1)", grid, np.exp(-0.5 * grid ** 2) / np.sqrt(2 * np.pi))
        else:
            ref = None
        shown = coord[: args.plot_trajectories]
        doc = trajectory_figure(s.t, shown, curves, ref if curves else None,
                                title=f"Forward OU process, x0 = {_fmt_point(paths[0, 0])}")
        svg_path = _out(args, args.svg)
        atomic_write_text(svg_path, doc)
        written.append(svg_path)
    log.info("wrote %d trajectories of %d steps to %s", m, s.n_steps, out)
    return written


def _fmt_point(p) -> str:
    return ", ".join(f"{v:g}" for v in p)


def cmd_timeline(args) -> list[Path]:
    model = load_model(args.model)
    if model.dim != 2:
        raise UsageError(f"timeline needs a 2-d model, got dimension {model.dim}")
    data = load_csv(args.data, args.label_column)
    if data.dim != 2:
        raise UsageError(f"timeline needs 2-d data, got {data.dim} features")
    s = model.schedule
    N = s.n_steps
    snaps = args.snapshots or sorted({0, N // 8, N // 4, N // 2, N})
    for n in snaps:
        if not 0 <= n <= N:
            raise UsageError(f"snapshot index {n} outside [0, {N}]")
    z0 = apply_scaler(data.features, model.scaler)
    rng = NormalStreams(args.seed)
    fwd = simulate_paths(z0, s, rng, z0.shape[0], workers=thread_count())
    count = args.count or data.n_rows
    rev_rng = NormalStreams(args.seed + 1)
    _, saved = reverse_chain(model, rev_rng, np.arange(count), snapshots=snaps)

    top = [(f"forward n={n}", fwd[:, n]) for n in snaps]
    bottom = [(f"reverse n={n}", saved[n]) for n in reversed(snaps)]
    doc = timeline_figure(top, bottom, title="forward (top) and reverse (bottom), standardized")
    out = _out(args, args.output)
    atomic_write_text(out, doc)

    rows = []
    for label, group in (("forward", top), ("reverse", bottom)):
        for (_, pts), n in zip(group, snaps if label == "forward" else list(reversed(snaps))):
            for i, p in enumerate(pts):
                rows.append([label, str(n), str(i), float(p[0]), float(p[1])])
    csv_path = out.with_suffix(".csv")
    atomic_write_text(csv_path, csv_text(["process", "n", "row", "z_1", "z_2"], rows))
    log.info("wrote %s and %s", out, csv_path)
    return [out, csv_path]


def cmd_train(args) -> list[Path]:
    data = load_csv(args.input, args.label_column)
    if args.class_value is not None:
        if data.labels is None:
            raise UsageError("--class needs --label-column")
        data = data.select_class(args.class_value)
        if data.n_rows == 0:
            raise DataError(f"no rows with label {args.class_value}")
    s = _schedule(args)
    scaler = fit_scaler(data)
    cfg = TrainConfig(
        prediction_target=args.target, epochs=args.epochs, batch_size=args.batch,
        learning_rate=args.lr, seed=args.seed, timestep_sampling=args.timestep_sampling,
        optimizer=args.optimizer, literal_trajectories=args.literal_trajectories,
        hidden_width=args.width, hidden_layers=args.depth, activation=args.activation,
        plateau_patience=args.plateau_patience, eps_skip=args.eps_skip,
        ema_decay=args.ema_decay,
    )
    every = max(1, args.epochs // 10)

    def progress(epoch, loss):
        if epoch % every == 0 or epoch == args.epochs:
            log.info("epoch %d/%d  loss %.5f", epoch, args.epochs, loss)

    model, report = train(apply_scaler(data, scaler), s, cfg, scaler=scaler, progress=progress)
    out = _out(args, args.output)
    save_model(model, out)
    curve = out.with_name(out.stem + ".loss.csv")
    atomic_write_text(curve, csv_text(["epoch", "loss"],
                                      [[str(i + 1), v] for i, v in enumerate(report.epoch_losses)]))
    log.info("trained %d steps in %.1fs, final loss %.5f -> %s",
             report.steps, report.wall_time, report.final_loss, out)
    return [out, curve]


def cmd_generate(args) -> list[Path]:
    model = load_model(args.model)
    cfg = GenerationConfig(n_samples=args.count, seed=args.seed, method=args.method)
    samples = generate_batch(model, cfg, workers=thread_count())
    out = _out(args, args.output)
    write_csv(samples, out)
    log.info("wrote %d samples to %s", args.count, out)
    return [out]


def cmd_split(args) -> list[Path]:
    data = load_csv(args.input, args.label_column)
    tr, te = split(data, args.test_fraction, args.seed, stratify_by_label=not args.no_stratify)
    a, b = _out(args, args.train_output), _out(args, args.test_output)
    write_csv(tr, a)
    write_csv(te, b)
    log.info("train %d rows -> %s, test %d rows -> %s", tr.n_rows, a, te.n_rows, b)
    return [a, b]


def _guess_label_column(train_path, synthetic_path) -> str:
    with open(train_path, encoding="utf-8") as fh:
        th = [h.strip() for h in fh.readline().strip().split(",")]
    with open(synthetic_path, encoding="utf-8") as fh:
        sh = {h.strip() for h in fh.readline().strip().split(",")}
    extra = [h for h in th if h not in sh and h != "is_synthetic"]
    if len(extra) != 1:
        raise UsageError(f"cannot infer the label column (candidates {extra}); pass --label-column")
    return extra[0]


def cmd_augment(args) -> list[Path]:
    label_col = args.label_column or _guess_label_column(args.train, args.synthetic)
    tr = load_csv(args.train, label_col)
    syn = load_csv(args.synthetic)
    out_data = augment(tr, syn, args.label)
    out = _out(args, args.output)
    write_csv(out_data, out)
    log.info("appended %d synthetic rows to %d training rows -> %s", syn.n_rows, tr.n_rows, out)
    return [out]


def _label_vector(path, column):
    data = load_csv(path, provenance_column=None)
    names = list(data.columns)
    col = column or names[-1]
    if col not in names:
        raise DataError(f"{path}: no column {col!r}")
    v = data.features[:, names.index(col)]
    if np.any(v != np.round(v)):
        raise DataError(f"{path}: column {col!r} holds non-integer labels")
    return v.astype(np.int64)


def cmd_evaluate(args) -> list[Path]:
    pred = _label_vector(args.predictions, args.column)
    act = _label_vector(args.actual, args.column)
    rep = classification_metrics(pred, act, args.positive)
    vals = rep.as_dict()
    rows = [[k, "" if v is None else (str(v) if isinstance(v, int) else v)] for k, v in vals.items()]
    out = _out(args, args.output)
    atomic_write_text(out, csv_text(["metric", "value"], rows))
    fmt = {k: ("undefined" if v is None else f"{v:.4f}") for k, v in vals.items()
           if k in ("precision", "recall", "f1")}
    print(f"tp={rep.tp} fp={rep.fp} fn={rep.fn} tn={rep.tn}  "
          f"precision={fmt['precision']} recall={fmt['recall']} f1={fmt['f1']}")
    return [out]


def cmd_distance(args) -> list[Path]:
    a = load_csv(args.a)
    b = load_csv(args.b)
    ed = energy_distance(a, b)
    rows = [["energy_distance", ed]]
    msg = f"energy_distance={ed:.6g}"
    if args.pool:
        pool = load_csv(args.pool)
        thr = energy_threshold(pool, a.n_rows, b.n_rows, args.quantile, args.null_splits, args.seed)
        rows += [["null_quantile", args.quantile], ["threshold", thr], ["below_threshold", str(int(ed < thr))]]
        msg += f" threshold={thr:.6g} ({'below' if ed < thr else 'above'})"
    out = _out(args, args.output)
    atomic_write_text(out, csv_text(["quantity", "value"], rows))
    print(msg)
    return [out]


COMMANDS = {
    "simulate": cmd_simulate,
    "timeline": cmd_timeline,
    "train": cmd_train,
    "generate": cmd_generate,
    "split": cmd_split,
    "augment": cmd_augment,
    "evaluate": cmd_evaluate,
    "distance": cmd_distance,
}


def _write_manifest(args, argv, outputs, wall):
    config = {k: v for k, v in vars(args).items() if k != "command"}
    doc = {
        "tool": "ou-diffuse",
        "tool_version": __version__,
        "subcommand": args.command,
        "argv": list(argv),
        "config": config,
        "seed": getattr(args, "seed", None),
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(wall, 3),
    }
    path = Path(str(outputs[0]) + ".manifest.json")
    atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n")
    return path


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        try:
            doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            replay_argv = doc["argv"]
        except (OSError, ValueError, KeyError) as exc:
            print(f"ou-diffuse: error: cannot read manifest: {exc}", file=sys.stderr)
            return 1
        return run(replay_argv)

    logging.basicConfig(format="%(message)s", force=True,
                        level=logging.WARNING if args.quiet else logging.INFO)
    t0 = time.perf_counter()
    try:
        outputs = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ou-diffuse: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ModelFileError, ValueError, OSError, FloatingPointError) as exc:
        print(f"ou-diffuse: error: {exc}", file=sys.stderr)
        return 1
    _write_manifest(args, argv, outputs, time.perf_counter() - t0)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except SystemExit as exc:  # argparse usage errors
        return exc.code if isinstance(exc.code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
