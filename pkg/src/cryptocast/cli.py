"""Batch command-line harness.

Subcommands: synth, ingest, fgi, train, predict, evaluate, run, compare,
report. Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import os
import sys

import numpy as np

from . import data as dataio
from .bundle import ModelBundle, load_bundle, save_bundle
from .config import load_config_file
from .errors import (
    AlignmentError,
    ConfigError,
    CryptocastError,
    DataError,
    DomainError,
    NumericalError,
    SchemaError,
)
from .jsonio import dumps_canonical
from .pipeline import (
    MODEL_ORDER,
    comparison_csv,
    emit_artifacts,
    hyper_dict,
    loss_csv,
    model_bundle,
    predict_windows,
    prepare_data,
    report_json_dict,
    run_experiment,
    train_model,
)
from .rng import Rng
from .stats import compare_models, compute_metrics

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _read_predictions_csv(path):
    """Load a predictions CSV; returns (dates, {column: array})."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open predictions file {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "date" not in reader.fieldnames:
            raise SchemaError(f"{path} has no 'date' column")
        names = [c for c in reader.fieldnames if c != "date"]
        dates, rows = [], []
        for row_number, row in enumerate(reader, start=2):
            try:
                dates.append(dt.date.fromisoformat(row["date"]))
                rows.append([float(row[c]) for c in names])
            except (ValueError, TypeError):
                raise DataError(f"{path} row {row_number}: unparseable cell") from None
    if not rows:
        raise DataError(f"{path} contains no prediction rows")
    matrix = np.array(rows, dtype=np.float64)
    return dates, {c: matrix[:, j] for j, c in enumerate(names)}


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    params = dataio.SynthParams(
        start_price=args.start_price, drift=args.drift, volatility=args.volatility,
        cycle_period=args.cycle_period, cycle_amplitude=args.fgi_amplitude,
        price_cycle=args.price_cycle, fgi_lead=args.fgi_lead,
    )
    frame = dataio.synthesize_series(args.seed, args.n, params)
    dataio.write_series_csv(frame, args.out)
    print(f"wrote {len(frame)} rows to {args.out}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    frame = dataio.load_series(args.data)
    print(f"{args.data}: {len(frame)} rows, "
          f"{frame.dates[0].isoformat()}..{frame.dates[-1].isoformat()}, "
          f"columns {frame.columns}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(frame.to_json_dict()) + "\n")
        print(f"wrote frame artifact to {args.json}")
    if args.windows_out:
        stats = dataio.fit_minmax(frame)
        normalized = dataio.apply_minmax(frame, stats)
        ws = dataio.make_windows(normalized, args.window, args.target)
        with open(args.windows_out, "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(ws.to_json_dict()) + "\n")
        print(f"wrote {len(ws)} windows to {args.windows_out}")
    return EXIT_OK


def _cmd_fgi(args) -> int:
    frame = dataio.load_series(args.data)
    enriched = dataio.add_fgi_column(frame, args.sentiment_column, args.trends_column,
                                     args.w1, args.w2)
    dataio.write_series_csv(enriched, args.out)
    bands = dataio.classify_fgi_array(enriched.column("fgi"))
    counts = {band: bands.count(band) for band in dataio.FGI_BANDS}
    print(f"wrote {args.out}; band counts: " +
          ", ".join(f"{b}={c}" for b, c in counts.items()))
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = load_config_file(args.config)
    if args.model not in MODEL_ORDER:
        raise ConfigError(f"--model must be one of {MODEL_ORDER}, got {args.model!r}")
    if args.seed is not None:
        cfg.seed = args.seed
    prepared = prepare_data(cfg)
    model, trace = train_model(args.model, cfg, prepared, Rng(cfg.seed))
    bundle = ModelBundle(
        kind=args.model, model=model,
        hyperparameters=hyper_dict(args.model, cfg,
                                    prepared.train_windows.X.shape[2]),
        window=cfg.window,
        feature_columns=list(cfg.feature_columns),
        target_column=cfg.target_column, stats=prepared.stats,
    )
    save_bundle(bundle, args.out)
    print(f"trained {args.model} on {len(prepared.train_windows)} windows; "
          f"bundle written to {args.out}")
    if trace is not None and args.loss_out:
        with open(args.loss_out, "w", encoding="utf-8") as fh:
            fh.write(loss_csv(trace))
        print(f"loss trace written to {args.loss_out}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    bundle = load_bundle(args.bundle)
    frame = dataio.load_series(args.data)
    if "fgi" in bundle.feature_columns and "fgi" not in frame.columns \
            and "sentiment" in frame.columns and "trends" in frame.columns:
        frame = dataio.add_fgi_column(frame)
    frame = frame.select(bundle.feature_columns)
    normalized = dataio.apply_minmax(frame, bundle.stats)
    ws = dataio.make_windows(normalized, bundle.window, bundle.target_column)
    raw = predict_windows(bundle.kind, bundle.model, ws)
    predicted = dataio.invert_minmax(raw, bundle.target_column, bundle.stats)
    actual = dataio.invert_minmax(ws.y, bundle.target_column, bundle.stats)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,actual,predicted\n")
        for date, act, pred in zip(ws.target_dates, actual, predicted):
            fh.write(f"{date.isoformat()},{float(act)!r},{float(pred)!r}\n")
    print(f"wrote {len(ws)} predictions to {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    _, columns = _read_predictions_csv(args.predictions)
    if "actual" not in columns or "predicted" not in columns:
        raise SchemaError(f"{args.predictions} needs 'actual' and 'predicted' columns")
    m = compute_metrics(columns["actual"], columns["predicted"])
    doc = {"mse": m.mse, "rmse": m.rmse, "mae": m.mae,
           "mape_percent": m.mape_percent, "n": m.n}
    text = dumps_canonical(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote metrics to {args.out}")
    else:
        print(text)
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = load_config_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    result = run_experiment(cfg)
    manifest = emit_artifacts(result, cfg.output_dir)
    if args.save_models:
        for kind in MODEL_ORDER:
            save_bundle(model_bundle(result, kind),
                        os.path.join(cfg.output_dir, f"model_{kind}.json"))
    print(f"run complete: {len(manifest['files'])} artifacts in {cfg.output_dir}")
    for kind in MODEL_ORDER:
        m = result.runs[kind].metrics
        print(f"  {kind:8s} rmse={m.rmse:.6g} mae={m.mae:.6g} mape={m.mape_percent:.4g}%")
    fr = result.report.friedman
    print(f"  friedman chi2={fr.chi2:.4f} df={fr.df} p={fr.p_value:.4g}")
    return EXIT_OK


def _infer_name(path: str) -> str:
    base = os.path.basename(path)
    if base.startswith("predictions_"):
        base = base[len("predictions_"):]
    return base.rsplit(".", 1)[0]


def cmd_compare(paths: list[str], names: list[str] | None = None, alpha: float = 0.05):
    """Build a comparison report from >= 2 aligned prediction files."""
    if len(paths) < 2:
        raise ConfigError(f"compare needs at least 2 prediction files, got {len(paths)}")
    names = names or [_infer_name(p) for p in paths]
    if len(names) != len(paths):
        raise ConfigError("--names must list one name per input file")
    if len(set(names)) != len(names):
        raise ConfigError(f"model names must be unique, got {names}")
    loaded = []
    for path in paths:
        dates, columns = _read_predictions_csv(path)
        if "actual" not in columns or "predicted" not in columns:
            raise SchemaError(f"{path} needs 'actual' and 'predicted' columns")
        loaded.append((dates, columns))
    ref_dates = loaded[0][0]
    for path, (dates, _) in zip(paths[1:], loaded[1:]):
        if dates != ref_dates:
            first_bad = next(
                (f"{a.isoformat()} vs {b.isoformat()}"
                 for a, b in zip(ref_dates, dates) if a != b),
                f"lengths {len(ref_dates)} vs {len(dates)}",
            )
            raise AlignmentError(
                f"{path} dates do not align with {paths[0]}: first mismatch {first_bad}"
            )
    abs_errors = {
        name: np.abs(columns["actual"] - columns["predicted"])
        for name, (_, columns) in zip(names, loaded)
    }
    try:
        return compare_models(abs_errors, alpha=alpha)
    except DomainError as exc:
        raise DomainError(f"comparison degenerate: {exc}") from exc


def _cmd_compare(args) -> int:
    report = cmd_compare(args.inputs, args.names, args.alpha)
    doc = report_json_dict(report)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(doc) + "\n")
    print(f"wrote comparison report to {args.out}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(comparison_csv(report))
        print(f"wrote pairwise table to {args.csv}")
    fr = report.friedman
    print(f"friedman chi2={fr.chi2:.4f} df={fr.df} p={fr.p_value:.4g}")
    return EXIT_OK


def _cmd_report(args) -> int:
    config_path = os.path.join(args.run_dir, "config.resolved.json")
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            resolved = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {config_path}: {exc}") from exc
    data_path = resolved["data"]["path"]
    frame = dataio.load_series(data_path)
    if "fgi" not in frame.columns and "sentiment" in frame.columns \
            and "trends" in frame.columns:
        frame = dataio.add_fgi_column(frame)
    fgi_by_date = {}
    if "fgi" in frame.columns:
        fgi = frame.column("fgi")
        fgi_by_date = {d: dataio.classify_fgi(float(v))
                       for d, v in zip(frame.dates, fgi)}

    rows = []
    wrote_actual = False
    for kind in MODEL_ORDER:
        path = os.path.join(args.run_dir, f"predictions_{kind}.csv")
        if not os.path.exists(path):
            continue
        dates, columns = _read_predictions_csv(path)
        if not wrote_actual:
            for i, date in enumerate(dates):
                rows.append((date, "actual", columns["actual"][i], "", "",
                             fgi_by_date.get(date, "")))
            wrote_actual = True
        for i, date in enumerate(dates):
            rows.append((date, kind, columns["predicted"][i],
                         repr(float(columns["lower"][i])),
                         repr(float(columns["upper"][i])),
                         fgi_by_date.get(date, "")))
    if not rows:
        raise DataError(f"no predictions_*.csv files found in {args.run_dir}")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,series,value,band_lo,band_hi,fgi_category\n")
        for date, series, value, lo, hi, band in rows:
            fh.write(f"{date.isoformat()},{series},{float(value)!r},{lo},{hi},{band}\n")
    print(f"wrote {len(rows)} plot rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cryptocast",
        description="Train and compare five window-based price forecasters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic fixture CSV")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--start-price", type=float, default=100.0)
    p.add_argument("--drift", type=float, default=0.0005)
    p.add_argument("--volatility", type=float, default=0.01)
    p.add_argument("--cycle-period", type=float, default=60.0)
    p.add_argument("--fgi-amplitude", type=float, default=40.0)
    p.add_argument("--price-cycle", type=float, default=0.0)
    p.add_argument("--fgi-lead", type=float, default=15.0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="validate a data CSV and optionally export JSON artifacts")
    p.add_argument("--data", required=True)
    p.add_argument("--json", help="write the frame as a JSON artifact")
    p.add_argument("--windows-out", help="write a normalized window-set JSON artifact")
    p.add_argument("--window", type=int, default=30)
    p.add_argument("--target", default="close")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("fgi", help="compose the fear/greed column from sentiment and trends")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sentiment-column", default="sentiment")
    p.add_argument("--trends-column", default="trends")
    p.add_argument("--w1", type=float, default=0.5)
    p.add_argument("--w2", type=float, default=0.5)
    p.set_defaults(func=_cmd_fgi)

    p = sub.add_parser("train", help="train one model and save its bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True, choices=list(MODEL_ORDER))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--loss-out")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="run a saved bundle over a data CSV")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="compute metrics from a predictions CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="full experiment: train all five models and emit artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the config output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--save-models", action="store_true",
                   help="also write model_<kind>.json bundles")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="Friedman + pairwise signed-rank over prediction files")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write the pairwise table as CSV")
    p.add_argument("--names", nargs="+")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="tidy plot-ready CSV from a run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CryptocastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
