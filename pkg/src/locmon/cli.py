"""``locmon`` command-line tool.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__, synth
from .classifiers import CLASSIFIERS, feature_importances, make_classifier, model_summary
from .dataset import (
    build_feature_dataset,
    build_time_dataset,
    dump_records,
    handle_missing,
    load_records,
    parse_timestamp,
    read_records,
    timestamp_to_epoch,
)
from .errors import InputError, InsufficientDataError, LocmonError, NumericalError
from .evaluation import cross_validate, holdout_split, stratified_kfold
from .monitor import (
    AlertLog,
    CsvFileSink,
    EndpointConfig,
    HttpCloudSink,
    ThresholdConfig,
    derive_thresholds,
    events_from_records,
    five_number_summary,
    run_pipeline,
    MONITORED,
)
from .reports import digest_bytes, digest_file, write_json, write_report
from .timeseries import (
    FORECAST_MODES,
    TimeSeriesFrame,
    adf_test,
    chrono_split,
    fit_var,
    forecast,
    granger_test,
    min_rows_for_var,
    select_order,
)

log = logging.getLogger("locmon")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
TIME_CLASSIFIERS = ("dt", "knn", "nb", "rf")

# per-command defaults; a --config file overrides these, explicit flags override both
DEFAULTS = {
    "validate": {},
    "generate": {"profile": "separable", "size": 500, "order": 2, "noise": 1.0,
                 "coefficients": None, "output": None},
    "evaluate": {"classifier": "dt", "folds": 5, "scale": True, "params": {}, "missing": "drop_row"},
    "importance": {"model": "dt", "test_fraction": 0.2, "params": {}, "missing": "drop_row"},
    "predict-time": {"classifier": "dt", "query": None, "test_fraction": 0.2, "tz": "UTC",
                     "params": {}, "missing": "drop_row"},
    "forecast": {"order": 3, "select": None, "n_test": 5, "mode": "one_step_with_actuals",
                 "adf_max_lag": None, "granger_lags": None, "level": 0.05, "difference": False},
    "simulate": {"generate": None, "detection_rate": 0.3, "thresholds": None, "derive": False,
                 "bounds": [], "endpoint": None, "offline": False, "interval": 4.0},
}
COMMON = {"input": None, "output_dir": "locmon-out", "seed": 0}


class UsageError(InputError):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _parse_param(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _effective_config(command, args):
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[command])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(from_file) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(sorted(unknown))}")
        cfg.update(from_file)
    for key in cfg:
        value = getattr(args, key, None)
        if value is None:
            continue
        if key == "params":
            value = {**cfg["params"], **dict(value)}
        cfg[key] = value
    cfg["command"] = command
    return cfg


def _echo_config(cfg):
    os.makedirs(cfg["output_dir"], exist_ok=True)
    name = cfg["command"].replace("-", "_") + "_config.json"
    echoed = {k: v for k, v in cfg.items() if k != "output_dir_given"}
    write_json(os.path.join(cfg["output_dir"], name),
               {"toolkit_version": __version__, "effective_config": echoed})


def _require_input(cfg):
    path = cfg["input"]
    if not path:
        raise UsageError("--input is required")
    if not os.path.isfile(path):
        raise UsageError(f"input file not found: {path}")
    return path


def _load_complete(cfg):
    path = _require_input(cfg)
    records = handle_missing(load_records(path), cfg.get("missing", "drop_row"))
    if not records:
        raise InputError(f"{path}: no usable records")
    return path, records


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate(cfg, out):
    path = _require_input(cfg)
    with open(path, newline="", encoding="utf-8") as fh:
        records, errors = read_records(fh, collect_errors=True)
    print(f"rows: {len(records) + len(errors)}, errors: {len(errors)}", file=out)
    for err in errors:
        print(f"  row {err.row}, column {err.column}: {err.reason}", file=out)
    if not records and not errors:
        print("warning: file has no data rows", file=sys.stderr)
    if cfg.get("output_dir_given"):
        write_report(cfg["output_dir"], "validation.json", "validate", digest_file(path), None, {
            "rows": len(records) + len(errors),
            "errors": [{"row": e.row, "column": e.column, "message": e.reason} for e in errors],
        })
    return EXIT_INPUT if errors else EXIT_OK


def cmd_generate(cfg, out):
    target = cfg["output"]
    if not target:
        raise UsageError("--output is required")
    profile, size, seed = cfg["profile"], int(cfg["size"]), cfg["seed"]
    truth = None
    if profile == "separable":
        records = synth.separable(size, seed)
        truth = {"profile": "separable", "ldr_bands": "150/200/250/300 lux +-10 per person",
                 "persons": list(synth.PERSONS)}
    elif profile == "schedule":
        records, truth = synth.schedule(size, seed)
    elif profile == "var_system":
        coefs = None
        if cfg["coefficients"]:
            with open(cfg["coefficients"], encoding="utf-8") as fh:
                coefs = json.load(fh)
            if isinstance(coefs, dict):
                coefs = coefs["coefs"]
        records, truth = synth.var_system(size, seed, order=int(cfg["order"]),
                                          noise=float(cfg["noise"]), coefs=coefs)
    else:
        raise UsageError(f"unknown profile {profile!r}; choose from {', '.join(synth.PROFILES)}")
    os.makedirs(os.path.dirname(os.path.abspath(target)), exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as fh:
        fh.write(dump_records(records))
    write_json(target + ".truth.json", truth)
    print(f"wrote {len(records)} rows to {target}", file=out)
    return EXIT_OK


def cmd_evaluate(cfg, out):
    path, records = _load_complete(cfg)
    data = build_feature_dataset(records)
    estimator = make_classifier(cfg["classifier"], seed=cfg["seed"], **cfg["params"])
    folds = stratified_kfold(data.labels, int(cfg["folds"]), cfg["seed"])
    result = cross_validate(estimator, data, folds, scale=bool(cfg["scale"]))
    body = {
        "classifier": cfg["classifier"],
        "params": estimator.get_params(),
        "labels": list(data.label_names),
        "n_rows": data.n_rows,
        "macro_precision": result.mean["macro_precision"],
        "macro_recall": result.mean["macro_recall"],
        "macro_f1": result.mean["macro_f1"],
    }
    body.update(result.to_dict())
    write_report(cfg["output_dir"], "metrics.json", "evaluate", digest_file(path), cfg["seed"], body)
    print(f"{cfg['classifier']}: macro P {body['macro_precision']:.4f}  "
          f"R {body['macro_recall']:.4f}  F1 {body['macro_f1']:.4f}", file=out)
    return EXIT_OK


def cmd_importance(cfg, out):
    if cfg["model"] not in ("dt", "rf"):
        raise UsageError(f"importances need a tree model (dt or rf), got {cfg['model']!r}")
    path, records = _load_complete(cfg)
    data = build_feature_dataset(records)
    train, _ = holdout_split(data, float(cfg["test_fraction"]), cfg["seed"], stratified=True)
    model = make_classifier(cfg["model"], seed=cfg["seed"], **cfg["params"])
    model.fit(train.features, train.labels)
    scores = feature_importances(model)
    ranked = sorted(zip(data.feature_names, scores), key=lambda kv: (-kv[1], data.feature_names.index(kv[0])))
    summary = model_summary(model, list(data.feature_names))
    summary.pop("importances", None)
    body = {
        "model": cfg["model"],
        "features": [{"name": n, "score": float(s)} for n, s in ranked],
        "sum": float(np.sum(scores)),
        "summary": summary,
    }
    write_report(cfg["output_dir"], "importance.json", "importance", digest_file(path), cfg["seed"], body)
    for n, s in ranked:
        print(f"{n:8s} {s:.4f}", file=out)
    return EXIT_OK


def cmd_predict_time(cfg, out):
    if cfg["classifier"] not in TIME_CLASSIFIERS:
        raise UsageError(f"classifier must be one of {', '.join(TIME_CLASSIFIERS)}")
    if not cfg["query"]:
        raise UsageError("--query is required")
    try:
        query_ts = parse_timestamp(cfg["query"])
    except ValueError:
        raise UsageError(f"query {cfg['query']!r} is not YYYY-MM-DD HH:MM:SS.ffffff") from None
    query = timestamp_to_epoch(query_ts, cfg["tz"])
    path, records = _load_complete(cfg)
    data = build_time_dataset(records, cfg["tz"])
    train, test = holdout_split(data, float(cfg["test_fraction"]), cfg["seed"], stratified=True)
    model = make_classifier(cfg["classifier"], seed=cfg["seed"], **cfg["params"])
    model.fit(train.features, train.labels)
    accuracy = float(np.mean(model.predict(test.features) == test.labels))
    person = data.label_names[int(model.predict([[query]])[0])]
    body = {
        "classifier": cfg["classifier"],
        "holdout_accuracy": accuracy,
        "n_train": train.n_rows,
        "n_test": test.n_rows,
        "query": cfg["query"],
        "query_epoch": query,
        "predicted_person": person,
        "labels": list(data.label_names),
    }
    write_report(cfg["output_dir"], "predict_time.json", "predict-time", digest_file(path),
                 cfg["seed"], body)
    print(f"holdout accuracy ({cfg['classifier']}): {accuracy:.4f}", file=out)
    print(f"predicted person at {cfg['query']}: {person}", file=out)
    return EXIT_OK


def cmd_forecast(cfg, out):
    path, records = _load_complete(cfg)
    frame = TimeSeriesFrame.from_records(records)
    if cfg["difference"]:
        frame = frame.difference()
    if cfg["mode"] not in FORECAST_MODES:
        raise UsageError(f"mode must be one of {', '.join(FORECAST_MODES)}")
    n_test = int(cfg["n_test"])
    train, test = chrono_split(frame, n_test)
    p_need = int(cfg["select"] or cfg["order"])
    if p_need < 1:
        raise UsageError("VAR order must be >= 1")
    need = min_rows_for_var(train.n_series, p_need)
    if train.n_obs < need:
        raise InsufficientDataError(
            f"VAR({p_need}) needs at least {need} training rows ({need + n_test} with the "
            f"{n_test} test rows), got {train.n_obs}")

    adf = {n: adf_test(train.column(n), cfg["adf_max_lag"]).to_dict() for n in train.names}
    if cfg["select"]:
        selection = select_order(train, int(cfg["select"]))
        order = selection.chosen
    else:
        selection = None
        order = int(cfg["order"])
    g_lags = int(cfg["granger_lags"] or order)
    granger = []
    for cause in train.names:
        for effect in train.names:
            if cause == effect:
                continue
            try:
                granger.append(granger_test(train, cause, effect, g_lags, float(cfg["level"])).to_dict())
            except NumericalError as exc:
                granger.append({"cause": cause, "effect": effect, "lags": g_lags,
                                "degenerate": True, "message": str(exc)})

    model = fit_var(train, order)
    result = forecast(model, train, mode=cfg["mode"], actuals=test)

    digest = digest_file(path)
    write_report(cfg["output_dir"], "diagnostics.json", "forecast", digest, cfg["seed"], {
        "adf": adf,
        "granger": granger,
        "lag_selection": selection.to_dict() if selection else None,
    })
    write_report(cfg["output_dir"], "forecast_report.json", "forecast", digest, cfg["seed"], {
        "order": order,
        "mode": cfg["mode"],
        "n_train": train.n_obs,
        "n_test": n_test,
        "rmse": result.rmse,
        "model": model.to_dict(),
    })
    with open(os.path.join(cfg["output_dir"], "forecast.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step_index", "series", "actual", "predicted"])
        for step, name, actual, pred in result.rows():
            writer.writerow([step, name, repr(actual), repr(pred)])
    if selection:
        print(f"AIC selected order {order} from 1..{cfg['select']}", file=out)
    for name, value in result.rmse.items():
        print(f"RMSE {name}: {value:.6g}", file=out)
    return EXIT_OK


def _parse_bound(text):
    try:
        sensor, rng = text.split("=", 1)
        low, high = rng.split(":", 1)
        return sensor.strip(), float(low), float(high)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected SENSOR=LOW:HIGH, got {text!r}") from None


def cmd_simulate(cfg, out):
    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    if cfg["generate"]:
        records = synth.detection_stream(int(cfg["generate"]), cfg["seed"], float(cfg["detection_rate"]))
        text = dump_records(records)
        digest = digest_bytes(text.encode("utf-8"))
        with open(os.path.join(out_dir, "stream.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        path = _require_input(cfg)
        records = handle_missing(load_records(path), "drop_row")
        digest = digest_file(path)

    if cfg["thresholds"]:
        config = ThresholdConfig.load(cfg["thresholds"])
    elif records:
        summaries = {s: five_number_summary([r.value(s) for r in records]) for s in MONITORED}
        config = derive_thresholds(summaries)
    else:
        config = ThresholdConfig()
    for sensor, low, high in cfg["bounds"]:
        config = config.override(sensor, low, high)

    local = CsvFileSink(os.path.join(out_dir, "local.csv"))
    if cfg["endpoint"] and not cfg["offline"]:
        cloud = HttpCloudSink(EndpointConfig.load(cfg["endpoint"]))
    else:
        cloud = CsvFileSink(os.path.join(out_dir, "cloud.csv"))
    alerts = AlertLog(path=os.path.join(out_dir, "alerts.jsonl"))
    try:
        stats = run_pipeline(events_from_records(records), config, local, cloud, alerts,
                             float(cfg["interval"]))
    finally:
        local.close()
        cloud.close()
        alerts.close()

    write_json(os.path.join(out_dir, "thresholds.json"), config.to_dict())
    write_report(out_dir, "stats.json", "simulate", digest, cfg["seed"], {
        "stats": stats.to_dict(),
        "cloud_sink": "http" if isinstance(cloud, HttpCloudSink) else "file",
        "thresholds": config.to_dict(),
    })
    print(f"local rows {stats.local_rows}, cloud rows {stats.cloud_rows}, "
          f"reduction {stats.reduction_ratio:.4f}, alerts {stats.alert_count}", file=out)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "importance": cmd_importance,
    "predict-time": cmd_predict_time,
    "forecast": cmd_forecast,
    "simulate": cmd_simulate,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="sensor CSV file")
    common.add_argument("--output-dir", dest="output_dir", help="where reports go (default locmon-out)")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--config", help="JSON file of flat option keys; flags override it")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="locmon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"locmon {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a sensor CSV file")

    p = sub.add_parser("generate", parents=[common], help="write synthetic sensor data")
    p.add_argument("--profile", choices=synth.PROFILES)
    p.add_argument("--size", type=int)
    p.add_argument("--output", help="CSV path; ground truth goes to <output>.truth.json")
    p.add_argument("--order", type=int, help="VAR order for var_system (default 2)")
    p.add_argument("--noise", type=float, help="innovation sd for var_system (default 1.0)")
    p.add_argument("--coefficients", help="JSON file with standardized VAR coefficients")

    p = sub.add_parser("evaluate", parents=[common], help="stratified k-fold evaluation")
    p.add_argument("--classifier", help=f"one of {', '.join(CLASSIFIERS)}")
    p.add_argument("--folds", type=int)
    p.add_argument("--scale", dest="scale", action="store_true", default=None)
    p.add_argument("--no-scale", dest="scale", action="store_false")
    p.add_argument("--param", dest="params", action="append", type=_parse_param,
                   help="classifier hyperparameter key=value (repeatable)")

    p = sub.add_parser("importance", parents=[common], help="tree feature importances")
    p.add_argument("--model", help="dt or rf")
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--param", dest="params", action="append", type=_parse_param)

    p = sub.add_parser("predict-time", parents=[common], help="predict the person from a timestamp")
    p.add_argument("--classifier", help=f"one of {', '.join(TIME_CLASSIFIERS)}")
    p.add_argument("--query", help="timestamp YYYY-MM-DD HH:MM:SS.ffffff")
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--tz", help="reference timezone for naive timestamps (default UTC)")
    p.add_argument("--param", dest="params", action="append", type=_parse_param)

    p = sub.add_parser("forecast", parents=[common], help="VAR diagnostics and forecast")
    p.add_argument("--order", type=int, help="VAR order when --select is not given (default 3)")
    p.add_argument("--select", type=int, metavar="P_MAX", help="choose the order by AIC over 1..P_MAX")
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--mode", choices=FORECAST_MODES)
    p.add_argument("--adf-max-lag", dest="adf_max_lag", type=int)
    p.add_argument("--granger-lags", dest="granger_lags", type=int)
    p.add_argument("--level", type=float)
    p.add_argument("--difference", action="store_true", default=None)

    p = sub.add_parser("simulate", parents=[common], help="replay a stream through the edge pipeline")
    p.add_argument("--generate", type=int, metavar="N", help="generate an N-event stream instead of --input")
    p.add_argument("--detection-rate", dest="detection_rate", type=float)
    p.add_argument("--thresholds", help="JSON threshold file")
    p.add_argument("--derive", action="store_true", default=None,
                   help="derive thresholds from the stream's box-whisker fences (default)")
    p.add_argument("--bound", dest="bounds", action="append", type=_parse_bound,
                   help="manual bound SENSOR=LOW:HIGH (repeatable)")
    p.add_argument("--endpoint", help="JSON endpoint config for cloud pushes")
    p.add_argument("--offline", action="store_true", default=None,
                   help="write cloud rows to cloud.csv instead of POSTing")
    p.add_argument("--interval", type=float, help="minimum seconds between accepted events")
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _effective_config(args.command, args)
        cfg["output_dir_given"] = args.output_dir is not None
        if args.command in ("validate", "generate"):
            if cfg["output_dir_given"]:
                _echo_config(cfg)
        else:
            _echo_config(cfg)
        return COMMANDS[args.command](cfg, out)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LocmonError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
