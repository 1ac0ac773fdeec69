"""Command-line entry point: ``seizure-acs <command> ...``.

Commands follow the pipeline order::

    synth -> select-channels -> train / evaluate / benchmark

``run`` chains select-channels, evaluate and (optionally) benchmark from one
JSON run config. Every command takes ``--seed``; stage seeds are derived
from it with :func:`seizure_acs.evaluation.stage_seed`.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .acs import ChannelRanking, load_channels, optimize_m, save_channels, select_top
from .dataset import SynthConfig, generate_synthetic, load_dataset
from .evaluation import (
    _FOREST2,
    _FOREST3,
    PipelineConfig,
    benchmark,
    rank_subject,
    select_threshold,
    stage_seed,
    two_fold_cv,
)
from .exceptions import ConfigError, DataError, NumericalError
from .features import EpochFeatures, write_feature_csv
from .forest import RandomForest, to_binary_labels

log = logging.getLogger("seizure_acs")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _channels_arg(value):
    if value == "auto":
        return value
    try:
        m = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {value!r}") from None
    if m < 1:
        raise argparse.ArgumentTypeError("channel count must be >= 1")
    return m


def _paths(out, subject):
    out = Path(out)
    return {
        "ranking": out / f"{subject}.ranking.json",
        "channels": out / f"{subject}.channels.json",
        "model3": out / f"{subject}.model3.json",
        "model2": out / f"{subject}.model2.json",
        "detector": out / f"{subject}.detector.json",
        "report": out / f"{subject}.report.json",
        "roc": out / f"{subject}.roc.csv",
        "timing": out / f"{subject}.timing.json",
        "features": out / f"{subject}.features.csv",
    }


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_json_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot open config ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc.msg} at column {exc.colno}", line=exc.lineno) from None


def _pipeline_config(args, n_channels):
    return PipelineConfig(
        n_channels=n_channels,
        trees=args.trees,
        acs_trees=args.acs_trees,
        seed=args.seed,
        n_jobs=args.threads,
    )


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    doc = _load_json_config(args.config)
    if args.seed is not None:
        doc["rng_seed"] = args.seed
    try:
        config = SynthConfig.from_dict(doc)
    except TypeError as exc:
        raise ConfigError(args.config, str(exc)) from None
    manifest_path, _ = generate_synthetic(config, args.out)
    print(manifest_path)
    return EXIT_OK


def cmd_select_channels(args):
    dataset = load_dataset(args.dataset)
    paths = _paths(args.out, dataset.subject_id)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    if paths["ranking"].exists() and paths["channels"].exists() and not args.force:
        stored = json.loads(paths["channels"].read_text(encoding="utf-8"))
        if args.channels in (stored.get("M"), stored.get("requested")):
            print(f"cached: {paths['channels']} (use --force to recompute)")
            return EXIT_OK
    if paths["ranking"].exists() and not args.force:
        ranking = ChannelRanking.load(paths["ranking"])
        print(f"cached: {paths['ranking']}")
    else:
        ranking = rank_subject(dataset, args.seed, acs_trees=args.acs_trees, n_jobs=args.threads)
        ranking.save(paths["ranking"])
    sweep = None
    if args.channels == "auto":
        config = _pipeline_config(args, None)
        m, sweep = optimize_m(dataset, ranking, config)
        print("M\tAUC")
        for k in sorted(sweep):
            print(f"{k}\t{sweep[k]:.4f}")
        print(f"chosen M = {m}")
    else:
        m = args.channels
        if m > ranking.n_channels:
            raise UsageError(f"--channels {m} exceeds the {ranking.n_channels} channels of the dataset")
    channels = select_top(ranking, m)
    save_channels(
        paths["channels"],
        channels,
        subject_id=dataset.subject_id,
        sweep=sweep,
        requested="auto" if sweep is not None else None,
    )
    print(paths["channels"])
    return EXIT_OK


def _selected_channels(args, dataset):
    if args.all_channels:
        return list(range(dataset.n_channels))
    path = _paths(args.out, dataset.subject_id)["channels"]
    if not path.exists():
        raise UsageError(
            f"no channel file at {path}; run `seizure-acs select-channels --dataset {args.dataset} "
            f"--out {args.out}` first, or pass --all-channels"
        )
    return load_channels(path)


def cmd_train(args):
    dataset = load_dataset(args.dataset)
    channels = _selected_channels(args, dataset)
    paths = _paths(args.out, dataset.subject_id)
    feats = EpochFeatures(fs=dataset.fs, channels=channels).fit_transform(dataset.X)
    y3 = dataset.labels3
    y2 = to_binary_labels(y3)
    model3 = RandomForest(n_estimators=args.trees, random_state=stage_seed(args.seed, _FOREST3), n_jobs=args.threads)
    model3.fit(feats, y3)
    model2 = RandomForest(
        n_estimators=args.trees, random_state=stage_seed(args.seed, _FOREST2), oob_score=True, n_jobs=args.threads
    )
    model2.fit(feats, y2)
    scores = model2.oob_decision_function_[:, model2.classes_.tolist().index(1)]
    seen = ~np.isnan(scores)
    threshold = select_threshold(scores[seen], y2[seen] == 1)
    model3.save(paths["model3"])
    model2.save(paths["model2"])
    _write_json(
        paths["detector"],
        {
            "subject_id": dataset.subject_id,
            "channels": channels,
            "threshold": threshold,
            "trees": args.trees,
            "seed": args.seed,
            "models": {"three_class": paths["model3"].name, "binary": paths["model2"].name},
        },
    )
    print(paths["detector"])
    return EXIT_OK


def cmd_evaluate(args):
    dataset = load_dataset(args.dataset)
    n_channels = None if args.all_channels else len(_selected_channels(args, dataset))
    if not args.all_channels:
        stored = json.loads(_paths(args.out, dataset.subject_id)["channels"].read_text(encoding="utf-8"))
        if stored.get("requested") == "auto":
            n_channels = "auto"
    config = _pipeline_config(args, n_channels)
    report, details = two_fold_cv(dataset, config, return_details=True)
    paths = _paths(args.out, dataset.subject_id)
    report.save(paths["report"])
    if args.format == "csv":
        with open(paths["roc"], "w", encoding="utf-8") as fh:
            fh.write("fold,threshold,fpr,tpr\n")
            for k, d in enumerate(details):
                roc = d["roc_s"]
                for t, f, p in zip(roc.thresholds, roc.fpr, roc.tpr):
                    fh.write(f"{k},{t!r},{f!r},{p!r}\n")
    print(
        f"AUC={report.auc:.4f} (S={report.auc_s:.4f}, E={report.auc_e:.4f}) "
        f"SEN={report.sensitivity:.4f} SPE={report.specificity:.4f} "
        f"delay={report.mean_delay_s:.2f}s missed={report.missed_seizures}"
    )
    print(paths["report"])
    return EXIT_OK


def cmd_features(args):
    dataset = load_dataset(args.dataset)
    channels = _selected_channels(args, dataset)
    extractor = EpochFeatures(fs=dataset.fs, channels=channels)
    rows = extractor.fit_transform(dataset.X)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    path = _paths(args.out, dataset.subject_id)["features"]
    write_feature_csv(path, rows, extractor.get_feature_names_out(), labels=dataset.labels3)
    print(path)
    return EXIT_OK


def cmd_benchmark(args):
    dataset = load_dataset(args.dataset)
    m = len(_selected_channels(args, dataset))
    timing = benchmark(dataset, m, seed=args.seed, trees=args.trees, repeats=args.repeats, acs_trees=args.acs_trees)
    path = _paths(args.out, dataset.subject_id)["timing"]
    timing.save(path)
    print(f"improvement={timing.improvement:.1%} (M={m} of {dataset.n_channels}, ACS {timing.acs_time_s:.1f}s)")
    print(path)
    return EXIT_OK


def cmd_run(args):
    doc = _load_json_config(args.config)
    known = {"dataset", "out", "channels", "trees", "acs_trees", "seed", "benchmark", "threads", "force"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    for required in ("dataset", "out"):
        if required not in doc:
            raise ConfigError(required, "missing required field")
    base = vars(args).copy()
    base.update(
        dataset=doc["dataset"],
        out=doc["out"],
        channels=doc.get("channels", 16),
        trees=doc.get("trees", 300),
        acs_trees=doc.get("acs_trees", 300),
        seed=doc.get("seed", 0),
        force=doc.get("force", False),
        threads=doc.get("threads", args.threads),
        all_channels=False,
        format="json",
        repeats=3,
    )
    ns = argparse.Namespace(**base)
    try:
        ns.channels = _channels_arg(str(ns.channels))
    except argparse.ArgumentTypeError as exc:
        raise ConfigError("channels", str(exc)) from None
    cmd_select_channels(ns)
    cmd_evaluate(ns)
    if doc.get("benchmark", False):
        cmd_benchmark(ns)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser():
    parser = _Parser(prog="seizure-acs", description="iEEG seizure detection with automatic channel selection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, trees=300):
        p.add_argument("--dataset", required=True, help="subject manifest JSON")
        p.add_argument("--out", required=True, help="output directory for artifacts")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trees", type=int, default=trees, help="trees per forest")
        p.add_argument("--acs-trees", type=int, default=300, help="trees in the channel-selection forest")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("synth", help="generate a synthetic subject")
    p.add_argument("--config", required=True, help="SynthConfig JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override rng_seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select-channels", help="rank channels and store the top M")
    common(p)
    p.add_argument("--channels", type=_channels_arg, default=16, help="M or 'auto'")
    p.add_argument("--force", action="store_true", help="recompute even if cached")
    p.set_defaults(func=cmd_select_channels)

    p = sub.add_parser("train", help="train 3-class and binary forests on all labeled epochs")
    common(p)
    p.add_argument("--all-channels", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="2-fold cross-validation report")
    common(p)
    p.add_argument("--all-channels", action="store_true")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="csv also writes ROC points")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("features", help="dump the feature matrix of the selected channels to CSV")
    p.add_argument("--dataset", required=True, help="subject manifest JSON")
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.add_argument("--all-channels", action="store_true")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("benchmark", help="time all channels against the selected ones")
    common(p, trees=100)
    p.add_argument("--all-channels", action="store_true")
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("run", help="select-channels + evaluate (+ benchmark) from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
