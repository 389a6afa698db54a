"""Command-line interface.

Subcommands::

    gen       write a synthetic dataset (CSV)
    train     fit a model on a CSV dataset and save it
    classify  label the samples of a CSV dataset with a saved model
    eval      replicated group-split evaluation of DL-ROC against SRC(OMP)
    cv        grid search over alpha, gamma and eta
    bench     per-sample classification latency

Any flag may also be given in a ``--config`` file of ``key = value`` lines
(``#`` starts a comment); flags on the command line win. Exit status is 0
on success, 2 for data errors and 3 for configuration errors.
"""

import argparse
import json
import sys

from . import __version__
from .classifier import classify_batch, fit_model, load_model, save_model
from .coding import CoderStop
from .data import SynthSpec, generate_synthetic, load_csv, save_csv, write_csv
from .evaluation import (
    MethodConfig,
    Protocol,
    benchmark_timing,
    cross_validate,
    default_methods,
    report_records,
    report_table,
    run_replicates,
)
from .exceptions import ConfigError, DataError
from .learning import LearnParams

EXIT_DATA = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def read_config(path):
    """Parse a ``key = value`` file into a dict of strings."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _learning_flags(p):
    p.add_argument("--alpha", type=float, default=0.7, help="squared-error weight of the hybrid loss")
    p.add_argument("--gamma", type=float, default=0.5, help="sparsity weight")
    p.add_argument("--eta", type=float, default=1.0, help="incoherence weight")
    p.add_argument("--tmax", type=int, default=20, help="maximum learning iterations")
    p.add_argument("--lk", type=int, default=8, help="atoms per label")
    p.add_argument("--coder", choices=("hybrid", "omp"), default="hybrid")
    p.add_argument("--residual-tol", type=float, default=0.01, help="coding stops at this residual norm")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="dlroc", description="Robust sparse-representation classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value file providing defaults")
        return p

    p = add("gen", "write a synthetic dataset")
    p.add_argument("--m", type=int, default=32, help="channels")
    p.add_argument("--labels", type=int, default=4)
    p.add_argument("--atoms-per-label", type=int, default=8)
    p.add_argument("--samples-per-label", type=int, default=1000)
    p.add_argument("--sparsity", type=int, default=3)
    p.add_argument("--sigma", type=float, default=0.01, help="Gaussian noise std")
    p.add_argument("--outlier-fraction", type=float, default=0.1)
    p.add_argument("--outlier-magnitude", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="CSV path (.gz compresses); '-' for stdout")

    p = add("train", "fit and save a model")
    p.add_argument("data", help="training CSV")
    _learning_flags(p)
    p.add_argument("--out", required=True, help="model file")

    p = add("classify", "label a dataset with a saved model")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", default="-", help="labels CSV; '-' for stdout")

    p = add("eval", "replicated evaluation of DL-ROC and SRC(OMP)")
    p.add_argument("data", nargs="?", help="dataset CSV; default: synthetic data from --seed")
    _learning_flags(p)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--train-groups", type=int, default=7)
    p.add_argument("--per-label-train", type=int, default=400)
    p.add_argument("--per-label-test", type=int, default=200)
    p.add_argument("--timing", action="store_true", help="include per-sample timings (not reproducible)")
    p.add_argument("--out", help="write JSON records here instead of stdout")

    p = add("cv", "grid search over alpha, gamma and eta")
    p.add_argument("data")
    _learning_flags(p)
    p.add_argument("--alphas", type=_floats, default="0.7")
    p.add_argument("--gammas", type=_floats, default="0.1,0.3,1.0")
    p.add_argument("--etas", type=_floats, default="1.0")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", help="write JSON records here instead of stdout")

    p = add("bench", "per-sample classification latency")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--warmup", type=int, default=10)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        cfg = read_config(args.config)
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _params(args):
    return LearnParams(
        alpha=args.alpha, gamma=args.gamma, eta=args.eta, t_max=args.tmax, seed=args.seed,
        stop=CoderStop(residual_threshold=args.residual_tol),
    )


def _open_out(path, out):
    if path in (None, "-"):
        return out, False
    return open(path, "w", encoding="utf-8", newline=""), True


def cmd_gen(args, out):
    spec = SynthSpec(
        m=args.m, K=args.labels, atoms_per_label=args.atoms_per_label,
        samples_per_label=args.samples_per_label, sparsity=args.sparsity,
        gaussian_sigma=args.sigma, outlier_fraction=args.outlier_fraction,
        outlier_magnitude=args.outlier_magnitude, seed=args.seed,
    )
    data = generate_synthetic(spec)
    if args.out == "-":
        write_csv(data, out)
    else:
        save_csv(data, args.out)


def cmd_train(args, out):
    data = load_csv(args.data)
    model, trace = fit_model(data, args.lk, _params(args), args.coder)
    save_model(model, args.out)
    if trace is not None:
        for line in trace.to_lines():
            print(line.rsplit(" ", 1)[0], file=out)


def cmd_classify(args, out):
    model = load_model(args.model)
    data = load_csv(args.data)
    results = classify_batch(data.samples, model)
    K = model.n_labels
    fh, close = _open_out(args.out, out)
    try:
        fh.write(",".join(["index", "label"] + [f"ratio_{k + 1}" for k in range(K)] + ["residual"]) + "\n")
        for j, res in enumerate(results):
            if res.label is None:
                cells = ["", *(["nan"] * K)]
            else:
                cells = [model.label_names[res.label], *(f"{v:.17g}" for v in res.energy_ratios)]
            fh.write(",".join([str(j), *cells, f"{res.residual_norm:.17g}"]) + "\n")
    finally:
        if close:
            fh.close()


def _dataset(args):
    if args.data:
        return load_csv(args.data)
    return generate_synthetic(SynthSpec(seed=args.seed))


def _emit(records, args, out):
    fh, close = _open_out(args.out, out)
    try:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    finally:
        if close:
            fh.close()


def cmd_eval(args, out):
    data = _dataset(args)
    methods = default_methods(args.alpha, args.gamma, args.eta, args.tmax, args.lk, args.residual_tol)
    if args.coder == "omp":
        methods = methods[1:]
    protocol = Protocol(args.replicates, args.train_groups, args.per_label_train, args.per_label_test, methods)
    reports = run_replicates(data, protocol, args.seed)
    print(report_table(reports, args.timing), file=out)
    _emit(report_records(reports, args.timing), args, out)


def cmd_cv(args, out):
    data = load_csv(args.data)
    grid = [{"alpha": a, "gamma": g, "eta": e} for a in args.alphas for g in args.gammas for e in args.etas]
    method = MethodConfig("DL-ROC", args.coder, args.lk, _params(args))
    res = cross_validate(data, grid, args.folds, args.seed, method)
    means = res.mean_scores
    print(f"{'#':>3}  {'alpha':>8}  {'gamma':>8}  {'eta':>8}  {'macro-F':>8}", file=out)
    for i, point in enumerate(res.grid):
        mark = " *" if i == res.best_index else ""
        print(f"{i:>3}  {point['alpha']:>8g}  {point['gamma']:>8g}  {point['eta']:>8g}  {means[i]:>8.4f}{mark}", file=out)
    records = [
        {"index": i, **point, "mean_macro_f": float(means[i]), "fold_macro_f": res.scores[i].tolist(),
         "best": i == res.best_index}
        for i, point in enumerate(res.grid)
    ]
    _emit(records, args, out)


def cmd_bench(args, out):
    model = load_model(args.model)
    data = load_csv(args.data)
    stats = benchmark_timing(model, data, args.warmup)
    print(f"samples {stats.n}  mean {stats.mean:.6f}s  median {stats.median:.6f}s  p95 {stats.p95:.6f}s", file=out)
    print(json.dumps({"n": stats.n, "mean": stats.mean, "median": stats.median, "p95": stats.p95}), file=out)


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "classify": cmd_classify,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "bench": cmd_bench,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"dlroc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        return 0
    except (DataError, OSError) as exc:
        print(f"dlroc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
