"""Command-line entry point: ``recipdelay <subcommand> [options]``.

Every subcommand writes CSV tables or JSON model files, echoes its resolved
configuration to standard error, and is deterministic given its flags.
Exit status is 0 on success, 1 on user error and 2 on internal failure.

Output tables (one header row each, floats to 6 significant digits):

  analyze      growth.csv            t,nodes,edges,reciprocal
               reciprocity_rate.csv  t,rate
               densification.csv     slope,intercept,t_min,t_max,residual_rms,points
               delay_histogram.csv   delay,count  (last row "overflow")
               join_time.csv         role,bucket_start,mean_delay,count
               weekly.csv            weekday,name,mean_delay,completions
               pk_error.csv          k,mae,rmse,n
               degrees.csv           degree,role,bucket,mean_delay,count
               common_neighbors.csv  kind,range,mean_delay,count
  features     dataset CSV           u,v,t1,group,f1..f14,y  (+ .scaler sidecar)
  predict      predictions CSV       u,v,t1,prediction[,y]
  evaluate     eval_trials.csv       test_ratio,trial,method,mae,rmse,ok,params,error
               eval_summary.csv      test_ratio,method,mae,rmse,trials_ok,trials_failed,p_mae_vs_dprr,p_rmse_vs_dprr
  sweep-beta   beta_sweep.csv        beta,mae,rmse
  synth        edges.tsv, truth.csv  u,v,t1,t2,planted_delay,offset_v
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .analytics import (
    DEFAULT_ANCHOR_WEEKDAY,
    DEFAULT_DELAY_CUTOFF,
    WEEKDAYS,
    FitError,
    avg_delay_by_common_neighbors,
    avg_delay_by_degree_bucket,
    avg_delay_by_join_time,
    delay_histogram,
    densification_fit,
    extract_reciprocal_relations,
    format_value,
    growth_series,
    reciprocity_rate_series,
    sequential_pk_error,
    weekly_patterns,
    write_table,
)
from .baselines import REG_GRID, LinearModel, fit_lasso, fit_ridge
from .dprr import MODEL_FORMAT, DprrConfig, ModelFormatError, NumericalError, fit, load_model, save_model
from .evaluation import METHODS, BETA_SWEEP_GRID, BenchmarkSettings, SplitError, beta_sweep, run_benchmark
from .features import DEFAULT_K, SCALER_FORMAT, DatasetError, build_dataset, read_dataset, write_dataset
from .synth import SynthConfig, generate, plant_power_law_growth, write_truth
from .temporal_graph import EdgeListError, load_graph, write_edge_list

OUTPUT_DIR_ENV = "RECIPDELAY_OUTPUT_DIR"

log = logging.getLogger("recipdelay")


class UserError(Exception):
    """Bad input from the command line; reported with exit status 1."""


USER_ERRORS = (UserError, EdgeListError, DatasetError, ModelFormatError, SplitError, FitError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UserError(f"{self.prog}: {message}")


# -- argument helpers ------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _method_list(text: str) -> list[str]:
    vals = [x.strip() for x in text.split(",") if x.strip()]
    bad = [m for m in vals if m not in METHODS]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(METHODS)}")
    return vals


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _default_out_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, ".")


def _add_common(p: argparse.ArgumentParser, *, graph=False, model=False, split=False, out_dir=False) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--quiet", action="store_true", help="suppress the config echo and progress logs")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker threads (default: available cores); 1 gives reference runs")
    if out_dir:
        p.add_argument("--out-dir", default=None, help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    if graph:
        p.add_argument("--k", type=_positive_int, default=DEFAULT_K, help=f"history window for avg_prev_k (default {DEFAULT_K})")
        p.add_argument("--cutoff", type=_positive_int, default=DEFAULT_DELAY_CUTOFF,
                       help=f"delay cutoff in days (default {DEFAULT_DELAY_CUTOFF})")
        p.add_argument("--anchor-weekday", type=int, choices=range(7), default=DEFAULT_ANCHOR_WEEKDAY,
                       help="weekday of day 0, 0=Monday (default 2, Wednesday)")
    if model:
        d = DprrConfig()
        p.add_argument("--alpha", type=float, default=d.alpha, help=f"ridge weight on w (default {d.alpha})")
        p.add_argument("--beta", type=float, default=d.beta, help=f"network-lasso weight (default {d.beta})")
        p.add_argument("--rho", type=float, default=d.rho, help=f"ADMM penalty (default {d.rho})")
        p.add_argument("--max-iter", type=_positive_int, default=d.max_iterations,
                       help=f"ADMM iteration cap (default {d.max_iterations})")
        p.add_argument("--group-cap", type=_positive_int, default=d.group_cap,
                       help=f"largest same-target group before pair subsampling (default {d.group_cap})")
    if split:
        p.add_argument("--train-size", type=_positive_int, default=2000, help="training rows per split (default 2000)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="recipdelay", description="Reciprocity-delay analytics and prediction.")
    parser.add_argument("--version", action="version",
                        version=f"recipdelay {__version__} (model {MODEL_FORMAT}, scaler {SCALER_FORMAT})")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest-check", help="validate an edge list and write its summary")
    p.add_argument("edges", help="tab-separated src, dst, day file")
    p.add_argument("--out", default=None, help="summary CSV (default <out-dir>/ingest.csv)")
    _add_common(p, out_dir=True)

    p = sub.add_parser("analyze", help="write the descriptive analysis tables")
    p.add_argument("edges")
    p.add_argument("--bucket-width", type=_positive_int, default=30, help="join-time bucket width in days (default 30)")
    p.add_argument("--max-k", type=_positive_int, default=8, help="largest k for the Pk error table (default 8)")
    _add_common(p, graph=True, out_dir=True)

    p = sub.add_parser("features", help="extract the feature dataset")
    p.add_argument("edges")
    p.add_argument("--out", default=None, help="dataset CSV (default <out-dir>/dataset.csv)")
    p.add_argument("--standardize", action="store_true", help="write standardized features")
    p.add_argument("--fill", type=float, default=None, help="cold-start history fill (default: mean delay)")
    _add_common(p, graph=True, out_dir=True)

    p = sub.add_parser("train", help="fit a model on a dataset CSV")
    p.add_argument("data", help="dataset CSV written by `features`")
    p.add_argument("--method", choices=("dprr", "pd", "rg", "ls"), default="dprr")
    p.add_argument("--lam", type=float, default=1.0, help="lasso weight for --method ls (default 1)")
    p.add_argument("--model", default=None, help="model JSON (default <out-dir>/model.json)")
    _add_common(p, model=True, out_dir=True)

    p = sub.add_parser("predict", help="predict delays for a dataset CSV")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", default=None, help="predictions CSV (default <out-dir>/predictions.csv)")
    _add_common(p, out_dir=True)

    p = sub.add_parser("evaluate", help="repeated-split benchmark of the predictors")
    p.add_argument("edges")
    p.add_argument("--methods", type=_method_list, default=list(METHODS), help="comma list (default all)")
    p.add_argument("--test-ratio", type=_float_list, default=[50.0, 70.0, 90.0],
                   help="test size as %% of train size, comma list (default 50,70,90)")
    p.add_argument("--trials", type=_positive_int, default=10, help="splits per ratio (default 10)")
    p.add_argument("--reg-grid", type=_float_list, default=list(REG_GRID), help="CV grid for ridge/lasso")
    p.add_argument("--beta-grid", type=_float_list, default=None,
                   help="CV grid for the DPRR/PD beta (default: use --beta without tuning)")
    _add_common(p, graph=True, model=True, split=True, out_dir=True)

    p = sub.add_parser("sweep-beta", help="DPRR test error across beta values")
    p.add_argument("edges")
    p.add_argument("--betas", type=_float_list, default=list(BETA_SWEEP_GRID))
    p.add_argument("--test-ratio", type=float, default=50.0)
    _add_common(p, graph=True, model=True, split=True, out_dir=True)

    p = sub.add_parser("synth", help="generate a synthetic follow network")
    s = SynthConfig()
    p.add_argument("--users", type=_positive_int, default=s.n_users)
    p.add_argument("--horizon", type=_positive_int, default=s.horizon)
    p.add_argument("--growth", type=float, default=s.growth)
    p.add_argument("--follow-rate", type=float, default=s.follow_rate)
    p.add_argument("--pa-strength", type=float, default=s.pa_strength)
    p.add_argument("--p-reciprocate", type=float, default=s.p_reciprocate)
    p.add_argument("--sigma-user", type=float, default=s.sigma_user)
    p.add_argument("--sigma-noise", type=float, default=s.sigma_noise)
    p.add_argument("--power-law", type=float, default=None, metavar="A",
                   help="instead emit a densifying stream with e(t) ~ n(t)^A")
    _add_common(p, graph=True, out_dir=True)
    return parser


# -- subcommands -----------------------------------------------------------------

def _out_dir(args) -> Path:
    d = Path(args.out_dir if args.out_dir is not None else _default_out_dir())
    d.mkdir(parents=True, exist_ok=True)
    return d


def _out_path(args, value, default_name) -> Path:
    if value is not None:
        Path(value).parent.mkdir(parents=True, exist_ok=True)
        return Path(value)
    return _out_dir(args) / default_name


def _load(path):
    if not Path(path).is_file():
        raise UserError(f"input file not found: {path}")
    return load_graph(path)


def _dprr_config(args) -> DprrConfig:
    try:
        return DprrConfig(alpha=args.alpha, beta=args.beta, rho=args.rho, max_iterations=args.max_iter,
                          group_cap=args.group_cap, seed=args.seed)
    except ValueError as exc:
        raise UserError(str(exc)) from None


def _dataset_from_graph(args):
    g = _load(args.edges)
    rels = extract_reciprocal_relations(g)
    try:
        ds = build_dataset(g, rels, k=args.k, delay_cutoff=args.cutoff, standardize=False,
                           anchor_weekday=args.anchor_weekday)
    except DatasetError as exc:
        raise UserError(f"{args.edges}: {exc}") from None
    return g, rels, ds


def cmd_ingest_check(args) -> list[Path]:
    g = _load(args.edges)
    n_lines = sum(1 for _ in open(args.edges, encoding="utf-8"))
    rels = extract_reciprocal_relations(g)
    out = _out_path(args, args.out, "ingest.csv")
    write_table(out, ("nodes", "edges", "max_day", "reciprocal_relations", "lines"),
                [(len(g), g.num_edges, g.max_day, len(rels), n_lines)])
    print(f"{args.edges}: {len(g)} nodes, {g.num_edges} edges, days 0..{g.max_day}, {len(rels)} reciprocal relations")
    return [out]


def cmd_analyze(args) -> list[Path]:
    g = _load(args.edges)
    rels = extract_reciprocal_relations(g)
    kept = [r for r in rels if r.delay <= args.cutoff]
    d = _out_dir(args)
    written = []

    def table(name, header, rows):
        path = d / name
        write_table(path, header, rows)
        written.append(path)

    growth = growth_series(g, rels)
    table("growth.csv", ("t", "nodes", "edges", "reciprocal"), growth)
    table("reciprocity_rate.csv", ("t", "rate"), reciprocity_rate_series(g, rels))
    try:
        fitd = densification_fit(g)
        dens = [(fitd.slope, fitd.intercept, fitd.t_min, fitd.t_max, fitd.residual_rms, fitd.points)]
    except FitError as exc:
        log.warning("densification fit skipped: %s", exc)
        dens = []
    table("densification.csv", ("slope", "intercept", "t_min", "t_max", "residual_rms", "points"), dens)
    hist = delay_histogram(rels, args.cutoff)
    table("delay_histogram.csv", ("delay", "count"),
          [(i, int(c)) for i, c in enumerate(hist.counts)] + [("overflow", hist.overflow)])
    join = [("source", *row) for row in avg_delay_by_join_time(kept, g, "source", args.bucket_width)]
    join += [("target", *row) for row in avg_delay_by_join_time(kept, g, "target", args.bucket_width)]
    table("join_time.csv", ("role", "bucket_start", "mean_delay", "count"), join)
    means, completions = weekly_patterns(kept, args.anchor_weekday)
    table("weekly.csv", ("weekday", "name", "mean_delay", "completions"),
          [(i, WEEKDAYS[i], means[i], completions[i]) for i in range(7)])
    table("pk_error.csv", ("k", "mae", "rmse", "n"), sequential_pk_error(rels, range(1, args.max_k + 1), args.cutoff))
    deg = []
    for kind in ("in", "out"):
        for role in ("source", "target"):
            deg += [(kind, role, *row) for row in avg_delay_by_degree_bucket(kept, g, kind, role)]
    table("degrees.csv", ("degree", "role", "bucket", "mean_delay", "count"), deg)
    cn = [("followees", *row) for row in avg_delay_by_common_neighbors(kept, g, "followees")]
    cn += [("followers", *row) for row in avg_delay_by_common_neighbors(kept, g, "followers")]
    table("common_neighbors.csv", ("kind", "range", "mean_delay", "count"), cn)
    print(f"wrote {len(written)} tables to {d}")
    return written


def cmd_features(args) -> list[Path]:
    g = _load(args.edges)
    rels = extract_reciprocal_relations(g)
    try:
        ds = build_dataset(g, rels, k=args.k, delay_cutoff=args.cutoff, standardize=args.standardize,
                           fill_value=args.fill, anchor_weekday=args.anchor_weekday)
    except DatasetError as exc:
        raise UserError(f"{args.edges}: {exc}") from None
    out = _out_path(args, args.out, "dataset.csv")
    write_dataset(out, ds)
    print(f"{len(ds)} rows, {ds.d} features, {ds.n_groups} target users -> {out}")
    return [out, out.with_name(out.name + ".scaler")]


def _read_data(path):
    if not Path(path).is_file():
        raise UserError(f"input file not found: {path}")
    return read_dataset(path)


def cmd_train(args) -> list[Path]:
    ds = _read_data(args.data)
    if ds.y is None:
        raise UserError(f"{args.data}: dataset has no y column")
    train = ds.raw().standardized()
    if args.method == "rg":
        model = fit_ridge(train, args.alpha)
    elif args.method == "ls":
        model = fit_lasso(train, args.lam)
    else:
        model = fit(train, config=_dprr_config(args), pin_w=args.method == "pd")
        status = "converged" if model.converged else "stopped at the iteration cap"
        print(f"ADMM {status} after {model.iterations} iterations, objective {format_value(model.objective)}")
    out = _out_path(args, args.model, "model.json")
    save_model(out, model)
    print(f"{args.method} model -> {out}")
    return [out]


def cmd_predict(args) -> list[Path]:
    if not Path(args.model).is_file():
        raise UserError(f"model file not found: {args.model}")
    try:
        model = load_model(args.model)
    except (ValueError, KeyError) as exc:
        raise UserError(f"{args.model}: not a readable model file ({exc})") from None
    ds = _read_data(args.data)
    expected = len(model.coef) if isinstance(model, LinearModel) else model.d
    if ds.d != expected:
        raise UserError(f"schema mismatch: dataset has {ds.d} features, model expects {expected}")
    X = ds.raw().X
    if model.scaler is not None:
        X = model.scaler.transform(X)
    pred = model.predict(X, ds.v)
    out = _out_path(args, args.out, "predictions.csv")
    header = ("u", "v", "t1", "prediction") + (("y",) if ds.y is not None else ())
    rows = []
    for i in range(len(ds)):
        row = [ds.u[i], ds.v[i], int(ds.t1[i]), float(pred[i])]
        if ds.y is not None:
            row.append(float(ds.y[i]))
        rows.append(row)
    write_table(out, header, rows)
    print(f"{len(ds)} predictions -> {out}")
    return [out]


def cmd_evaluate(args) -> list[Path]:
    _, _, ds = _dataset_from_graph(args)
    cfg = _dprr_config(args)
    settings = BenchmarkSettings(
        train_size=args.train_size,
        ratios=tuple(args.test_ratio),
        trials=args.trials,
        seed=args.seed,
        dprr=cfg,
        tune_dprr_beta=args.beta_grid is not None,
        dprr_beta_grid=tuple(args.beta_grid or (cfg.beta,)),
        reg_grid=tuple(args.reg_grid),
        threads=args.threads,
    )
    report = run_benchmark(ds, args.methods, settings)
    d = _out_dir(args)
    trials_path, summary_path = d / "eval_trials.csv", d / "eval_summary.csv"
    report.write(trials_path, summary_path)
    print(summary_path.read_text(encoding="utf-8"), end="")
    return [trials_path, summary_path]


def cmd_sweep_beta(args) -> list[Path]:
    _, _, ds = _dataset_from_graph(args)
    rows = beta_sweep(ds, _dprr_config(args), args.betas, args.train_size, args.test_ratio, args.seed)
    out = _out_dir(args) / "beta_sweep.csv"
    write_table(out, ("beta", "mae", "rmse"), rows)
    print(out.read_text(encoding="utf-8"), end="")
    return [out]


def cmd_synth(args) -> list[Path]:
    d = _out_dir(args)
    edges_path = d / "edges.tsv"
    if args.power_law is not None:
        try:
            edges = plant_power_law_growth(args.power_law, n_final=args.users, days=args.horizon, seed=args.seed)
        except ValueError as exc:
            raise UserError(str(exc)) from None
        write_edge_list(edges_path, edges, header=f"power-law growth exponent {args.power_law} seed {args.seed}")
        print(f"{len(edges)} edges -> {edges_path}")
        return [edges_path]
    try:
        cfg = SynthConfig(
            n_users=args.users, horizon=args.horizon, growth=args.growth, follow_rate=args.follow_rate,
            pa_strength=args.pa_strength, p_reciprocate=args.p_reciprocate, sigma_user=args.sigma_user,
            sigma_noise=args.sigma_noise, k=args.k, history_cutoff=args.cutoff,
            anchor_weekday=args.anchor_weekday, seed=args.seed,
        )
    except ValueError as exc:
        raise UserError(str(exc)) from None
    res = generate(cfg)
    write_edge_list(edges_path, res.edges, header=f"synthetic follow network seed {args.seed}")
    truth_path = d / "truth.csv"
    write_truth(truth_path, res.truth)
    print(f"{len(res.edges)} edges, {len(res.truth)} planted reciprocations -> {d}")
    return [edges_path, truth_path]


COMMANDS = {
    "ingest-check": cmd_ingest_check,
    "analyze": cmd_analyze,
    "features": cmd_features,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "sweep-beta": cmd_sweep_beta,
    "synth": cmd_synth,
}


def _echo_config(args) -> None:
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("quiet",)}
    if args.command in ("train", "evaluate", "sweep-beta"):
        items.update({f"dprr.{k}": v for k, v in asdict(_dprr_config(args)).items()})
    if "out_dir" in items and items["out_dir"] is None:
        items["out_dir"] = _default_out_dir()
    for k, v in items.items():
        print(f"# {k} = {v}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UserError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        if not args.quiet:
            _echo_config(args)
        COMMANDS[args.command](args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: cannot access {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything else is a bug, not a usage problem
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
