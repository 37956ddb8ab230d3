"""Command-line workflow: simulate -> prepare -> tune -> train -> predict.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import gbdt, sim, tune
from .classes import BehaviorClass
from .label import overspeed_band, rules_document, steering_count_band, steering_impulse_band
from .metrics import evaluate
from .pipeline import (FEATURE_HASH, FEATURE_NAMES, TRAIN_STRIDE, WINDOW_FRAMES,
                       NormalizationParams, apply_normalizer, concat_tables,
                       fit_normalizer, group_split, process_trip, read_features_csv,
                       stratified_split, write_features_csv)

SEED_ENV = "DRIVE_PROFILER_SEED"


class InputError(Exception):
    """Bad user input: missing files, malformed data, impossible settings."""


class InvariantError(Exception):
    """An internal consistency check failed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        raise InputError(f"directory {path.parent} does not exist")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fp:
            fp.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def _load_features(path):
    if path is None:
        raise InputError("--features is required")
    try:
        with open(path, newline="") as fp:
            table = read_features_csv(fp)
    except OSError as exc:
        raise InputError(f"cannot read features: {exc}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if len(table) == 0:
        raise InputError(f"{path}: no windows")
    return table


def _split(table, train_fraction: float, seed: int, by_trip: bool):
    if not 0 < train_fraction < 1:
        raise InputError("--split must lie strictly between 0 and 1")
    if by_trip:
        tr, te = group_split(table.trip_ids, 1 - train_fraction, seed)
    else:
        tr, te = stratified_split(table.labels, 1 - train_fraction, seed)
    missing = sorted(set(range(4)) - set(table.labels[tr].tolist()))
    if missing:
        raise InputError(f"classes {missing} absent from the training split")
    if np.intersect1d(tr, te).size:
        raise InvariantError("train and test splits overlap")
    return tr, te


def _histogram(labels) -> str:
    counts = np.bincount(np.asarray(labels, dtype=int), minlength=4)
    return ", ".join(f"{BehaviorClass(i).label}={c}" for i, c in enumerate(counts))


# --- commands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    if args.n_trips < 1:
        raise InputError("--n-trips must be >= 1")
    out = Path(args.trips_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc}") from None
    try:
        trips = sim.generate_dataset(sim.balanced_configs(args.n_trips, args.minutes, seed))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    for trip in trips:
        buf = io.StringIO()
        sim.write_trip(trip, buf)
        atomic_write(out / f"{trip.trip_id}.jsonl", buf.getvalue())
    hist = sim.intended_class_histogram(trips)
    share = hist / hist.sum()
    print(f"wrote {len(trips)} trips to {out}")
    print(f"total minutes: {sim.total_minutes(trips):.1f}")
    print("intended class balance: " + ", ".join(
        f"{BehaviorClass(i).label}={s:.1%}" for i, s in enumerate(share)))
    return 0


def cmd_prepare(args) -> int:
    src = Path(args.trips_dir)
    files = sorted(src.glob("*.jsonl")) if src.is_dir() else []
    if not files:
        raise InputError(f"no trip files (*.jsonl) in {src}")
    if args.features is None:
        raise InputError("--features is required")
    stride = TRAIN_STRIDE if args.overlap == "train" else WINDOW_FRAMES
    tables, minutes = [], 0.0
    for f in files:
        try:
            trip = sim.load_trip(f)
            _, table = process_trip(trip, stride)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        minutes += trip.duration / 60
        tables.append(table)
    table = concat_tables(tables)
    buf = io.StringIO()
    write_features_csv(table, buf)
    atomic_write(args.features, buf.getvalue())
    print(f"{len(files)} trips, {minutes:.1f} raw minutes -> {len(table)} windows")
    print("label histogram: " + _histogram(table.labels))
    return 0


def _prepared_split(args, seed):
    table = _load_features(args.features)
    tr, te = _split(table, args.split, seed, args.group_by_trip)
    norm = fit_normalizer(table.X[tr])
    return table, tr, te, norm


def cmd_tune(args) -> int:
    seed = _resolve_seed(args)
    if args.trials < 1:
        raise InputError("--trials must be >= 1")
    table, tr, _, norm = _prepared_split(args, seed)
    part = tune.TrainingPartition(apply_normalizer(norm, table.X[tr]), table.labels[tr])

    def progress(t):
        hp = t.hyperparameters
        print(f"trial {t.index:3d}  lr={hp.learning_rate:.3f} depth={hp.max_depth:2d} "
              f"trees={hp.n_estimators:3d}  val macro F1={t.f1:.4f}  ({t.seconds:.1f}s)")

    try:
        best, trials = tune.random_search(part, tune.SearchSpace(), args.trials, seed, progress)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if best.f1 != max(t.f1 for t in trials):
        raise InvariantError("best trial is not the maximum")
    atomic_write(args.params, json.dumps(tune.best_params_document(best), indent=2) + "\n")
    if args.trial_log:
        buf = io.StringIO()
        tune.write_trial_log(trials, buf, include_seconds=args.record_times)
        atomic_write(args.trial_log, buf.getvalue())
    hp = best.hyperparameters
    print(f"best trial {best.index}: lr={hp.learning_rate:.4f} depth={hp.max_depth} "
          f"trees={hp.n_estimators} val macro F1={best.f1:.4f} -> {args.params}")
    return 0


def _load_params(path, seed) -> gbdt.Hyperparameters:
    if path is None:
        return gbdt.Hyperparameters(random_state=seed)
    try:
        doc = json.loads(Path(path).read_text())
        return gbdt.Hyperparameters.from_dict(doc.get("hyperparameters", doc))
    except (OSError, json.JSONDecodeError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"cannot read hyperparameters from {path}: {exc}") from None


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    if args.model is None:
        raise InputError("--model is required")
    hp = _load_params(args.params, seed)
    table, tr, te, norm = _prepared_split(args, seed)
    model = gbdt.fit(apply_normalizer(norm, table.X[tr]), table.labels[tr], hp,
                     feature_names=FEATURE_NAMES, normalizer=norm.to_dict())
    if model.feature_hash != FEATURE_HASH:
        raise InvariantError("model feature hash differs from the pipeline's")
    pred = gbdt.predict(model, apply_normalizer(norm, table.X[te]), FEATURE_HASH)
    report = evaluate(table.labels[te], pred)
    atomic_write(args.model, gbdt.dumps(model) + "\n")
    doc = report.to_dict()
    doc["hyperparameters"] = gbdt.serialize(model)["hyperparameters"]
    doc["split"] = {"train": int(tr.size), "test": int(te.size),
                    "by_trip": bool(args.group_by_trip), "seed": seed}
    if args.report:
        atomic_write(args.report, json.dumps(doc, indent=2) + "\n")
    print(f"trained {model.rounds} rounds on {tr.size} windows, tested on {te.size}")
    print(report.render_table())
    return 0


def _triggers(raw: np.ndarray) -> str:
    ix = {n: i for i, n in enumerate(FEATURE_NAMES)}
    over, weaves, impulse = (raw[ix["overspeed_p95_pct"]], int(raw[ix["weave_count"]]),
                             raw[ix["max_impulse"]])
    found = [
        (overspeed_band(over), f"overspeed {over:+.0f}%"),
        (steering_count_band(weaves), f"weaves {weaves}/min"),
        (steering_impulse_band(impulse) if weaves else BehaviorClass.NORMAL, f"impulse {impulse:.2f}"),
    ]
    found = [(sev, text) for sev, text in found if sev > BehaviorClass.NORMAL]
    found.sort(key=lambda item: -item[0])
    return "; ".join(text for _, text in found) or "-"


def cmd_predict(args) -> int:
    if args.model is None:
        raise InputError("--model is required")
    try:
        model = gbdt.loads(Path(args.model).read_text())
    except OSError as exc:
        raise InputError(f"cannot read model: {exc}") from None
    except gbdt.ModelFormatError as exc:
        raise InputError(f"{args.model}: {exc}") from None
    if model.feature_hash != FEATURE_HASH:
        raise InputError(f"model feature hash {model.feature_hash} does not match "
                         f"this pipeline's feature ordering ({FEATURE_HASH})")
    if model.normalizer is None:
        raise InputError("model carries no normalization parameters")
    try:
        trip = sim.load_trip(args.trip)
        stride = WINDOW_FRAMES if args.overlap == "none" else TRAIN_STRIDE
        windows, table = process_trip(trip, stride)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from None
    if not windows:
        raise InputError(f"{args.trip}: shorter than one window")
    norm = NormalizationParams.from_dict(model.normalizer)
    pred = gbdt.predict(model, apply_normalizer(norm, table.X), FEATURE_HASH)

    lines = [f"{'window':<7}{'start_s':>8}  P.C  {'class':<13}{'rule':<13}triggers"]
    for j, (w, p, raw) in enumerate(zip(windows, pred, table.X), start=1):
        lines.append(f"{'W' + str(j):<7}{w.start_t:8.1f}  {int(p):>3}  "
                     f"{BehaviorClass(int(p)).label:<13}{w.label.label:<13}{_triggers(raw)}")
    text = "\n".join(lines) + "\n"
    if args.report:
        atomic_write(args.report, text)
    sys.stdout.write(text)
    return 0


def cmd_rules(args) -> int:
    print(json.dumps(rules_document(), indent=2))
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"random seed (falls back to ${SEED_ENV}, then 0)")
    common.add_argument("--config", default=None, help="key = value file mirroring the flags")

    split = _Parser(add_help=False)
    split.add_argument("--features", default=None, help="window features CSV")
    split.add_argument("--split", type=float, default=0.7, help="training fraction")
    split.add_argument("--group-by-trip", action="store_true",
                       help="split whole trips instead of windows")

    parser = _Parser(prog="drive-profiler", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate synthetic trips")
    p.add_argument("--trips-dir", default="trips")
    p.add_argument("--n-trips", type=int, default=125)
    p.add_argument("--minutes", type=float, default=4.0, help="minutes per trip")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prepare", parents=[common], help="trips -> window features CSV")
    p.add_argument("--trips-dir", default="trips")
    p.add_argument("--features", default=None)
    p.add_argument("--overlap", choices=("train", "none"), default="train")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("tune", parents=[common, split], help="random hyperparameter search")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--params", default="best_params.json", help="output JSON with the best parameters")
    p.add_argument("--trial-log", default=None, help="CSV log of every trial")
    p.add_argument("--record-times", action="store_true",
                   help="add wall-clock seconds to the trial log (makes it non-reproducible)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("train", parents=[common, split], help="fit and evaluate the classifier")
    p.add_argument("--params", default=None, help="hyperparameter JSON, e.g. from 'tune'")
    p.add_argument("--model", default=None)
    p.add_argument("--report", default=None, help="evaluation report JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="per-window predictions for one trip")
    p.add_argument("trip", help="trip .jsonl file")
    p.add_argument("--model", default=None)
    p.add_argument("--report", default=None, help="also write the table here")
    p.add_argument("--overlap", choices=("train", "none"), default="none")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("rules", parents=[common], help="print the labeling rule tables")
    p.set_defaults(func=cmd_rules)
    return parser


def _coerce(parser, command: str, values: dict) -> dict:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[command]
    actions = {a.dest: a for a in sp._actions}
    out = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None:
            continue  # keys for other commands
        if isinstance(action, argparse._StoreTrueAction):
            out[key] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                out[key] = action.type(raw)
            except ValueError:
                raise InputError(f"config value {key} = {raw!r} is invalid") from None
        else:
            out[key] = raw
        if action.choices is not None and out[key] not in action.choices:
            raise InputError(f"config value {key} = {raw!r} not in {sorted(action.choices)}")
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.config:
            # flags given on the command line take precedence over the file
            defaults = _coerce(parser, args.command, read_config_file(args.config))
            sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
            sub.choices[args.command].set_defaults(**defaults)
            args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvariantError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
