"""Command-line entry points: simulate | train | crossval | evaluate | shapes.

Exit codes: 0 success, 2 usage or config problem, 3 data or domain
problem, 4 numeric failure.  Every command is deterministic given its
flags, so rerunning one reproduces its output files byte for byte.
"""

import argparse
import json
import sys

import numpy as np

from . import data, families, metrics, model as model_mod, svgplot
from .errors import (ConfigError, ContractError, DataError, FormatError,
                     NumericError, ShapeError, SupportError)
from .jsonio import dumps
from .training import PRESETS, TrainConfig, get_preset, train as fit

_PRESET_NAMES = ", ".join(sorted(PRESETS))
_METRIC_CHOICES = ("loglik", "nll", "mse", "gamma-deviance", "auc")


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def _read_text(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _parse_hidden(text):
    try:
        widths = tuple(int(w) for w in text.split(",") if w.strip())
    except ValueError:
        raise ConfigError(f"bad hidden stack {text!r}; expected e.g. 64,32") from None
    if not widths or any(w < 1 for w in widths):
        raise ConfigError(f"bad hidden stack {text!r}; widths must be >= 1")
    return widths


def _parse_set(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"--set needs key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _build_train_config(args):
    """Preset values, then --config file, then --set pairs, then flags."""
    settings = {}
    preset = None
    if getattr(args, "preset", None):
        preset = get_preset(args.preset)
        settings.update(preset["config"])
    if getattr(args, "config", None):
        loaded = json.loads(_read_text(args.config))
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        settings.update(loaded)
    settings.update(_parse_set(getattr(args, "set", None)))
    if args.seed is not None:
        settings["seed"] = args.seed
    if getattr(args, "canonical", False):
        settings["canonical"] = True
    return TrainConfig.from_dict(settings), preset


def _select_columns(header, rows, target, features_flag):
    """Reduced (header, rows) with the wanted feature columns + target last.

    Without --features, every non-target column is used except the true
    parameter columns a simulated CSV carries.
    """
    if target not in header:
        raise ConfigError(f"target column {target!r} not in header")
    if features_flag:
        keep = [c.strip() for c in features_flag.split(",") if c.strip()]
        missing = [c for c in keep if c not in header]
        if missing:
            raise ConfigError(f"feature column(s) not in header: {missing}")
    else:
        keep = [h for h in header if h != target and not h.startswith("true_theta")]
    if not keep:
        raise DataError("no feature columns selected")
    cols = keep + [target]
    idx = [header.index(c) for c in cols]
    return cols, [[r[i] for i in idx] for r in rows]


def _load_xy(args, target_transform):
    header, rows, n_dropped = data.read_csv(args.data)
    header, rows = _select_columns(header, rows, args.target, getattr(args, "features", None))
    ds, spec = data.preprocess(header, rows, args.target, target_transform)
    return ds, spec, n_dropped


def _resolve_structure(args, preset):
    hidden = None
    param_hidden = None
    if preset is not None:
        hidden = tuple(preset["hidden"])
        ph = preset.get("param_hidden")
        param_hidden = None if ph is None else [None if h is None else tuple(h) for h in ph]
    if getattr(args, "hidden", None):
        hidden = _parse_hidden(args.hidden)
        param_hidden = None
    if hidden is None:
        hidden = (64, 32)
    return hidden, param_hidden


def _resolve_family(args, preset):
    fam = getattr(args, "family", None)
    if fam is None and preset is not None:
        fam = preset["family"]
    if fam is None:
        raise ConfigError("no family given; pass --family or a preset that sets one")
    return families.get_family(fam)


def _resolve_transform(args, preset):
    tt = getattr(args, "target_transform", None)
    if tt is None:
        tt = preset["target_transform"] if preset is not None else "none"
    return tt


def _fit_one(ds, spec, fam, args, cfg, hidden, param_hidden, seed):
    trials = ds.trials if fam.family_id == "binomial" else None
    m = model_mod.build(fam, args.arch, ds.x.shape[1], hidden, seed,
                        param_hidden=param_hidden if args.arch == "per-parameter" else None,
                        intercepts_trainable=args.intercepts, trials=trials)
    m.preprocess = spec
    return fit(m, ds.x, ds.y, cfg)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    fam = families.get_family(args.family)
    trials = args.trials if fam.family_id == "binomial" else None
    ds = data.synth_dataset(data.SynthConfig(family=args.family, n=args.n,
                                             seed=args.seed, trials=trials))
    _write_text(args.out, data.dataset_to_csv(ds))
    print(f"wrote {ds.n} rows to {args.out}")
    return 0


def cmd_train(args):
    cfg, preset = _build_train_config(args)
    fam = _resolve_family(args, preset)
    tt = _resolve_transform(args, preset)
    hidden, param_hidden = _resolve_structure(args, preset)
    ds, spec, n_dropped = _load_xy(args, tt)
    if n_dropped:
        print(f"dropped {n_dropped} malformed row(s)", file=sys.stderr)

    m, history = _fit_one(ds, spec, fam, args, cfg, hidden, param_hidden, cfg.seed)

    _write_text(args.out, model_mod.serialize(m))
    if args.history:
        _write_text(args.history, dumps(history.to_dict()))
    n = ds.n
    n_val = int(round(n * cfg.validation_fraction)) or (1 if cfg.validation_fraction > 0 else 0)
    n_tr = n - n_val
    best = history.best_epoch - 1
    print(f"trained {history.stopped_epoch} epoch(s), best epoch {history.best_epoch} "
          f"({history.stop_reason})")
    print(f"train loglik {-n_tr * history.train_nll[best]:.4f}  "
          f"val loglik {-max(n_val, 1) * history.best_val_nll:.4f}")
    return 0


def cmd_crossval(args):
    cfg, preset = _build_train_config(args)
    fam = _resolve_family(args, preset)
    tt = _resolve_transform(args, preset)
    hidden, param_hidden = _resolve_structure(args, preset)
    wanted = _parse_metrics(args.metrics, default="loglik,mse")

    header, rows, n_dropped = data.read_csv(args.data)
    header, rows = _select_columns(header, rows, args.target, args.features)
    if n_dropped:
        print(f"dropped {n_dropped} malformed row(s)", file=sys.stderr)
    plan = data.kfold(len(rows), args.folds, args.fold_seed)

    fold_reports = []
    for f in range(plan.k):
        tr_rows = [rows[i] for i in plan.train_indices(f)]
        te_rows = [rows[i] for i in plan.test_indices(f)]
        ds_tr, spec = data.preprocess(header, tr_rows, args.target, tt)
        fold_cfg = cfg.replace(seed=cfg.seed + f)
        m, _ = _fit_one(ds_tr, spec, fam, args, fold_cfg, hidden, param_hidden,
                        fold_cfg.seed)
        x_te = spec.transform_features(header, te_rows)
        pos = header.index(args.target)
        y_te = spec.transform_target(np.array([float(r[pos]) for r in te_rows]))
        fold_reports.append(_score(m, x_te, y_te, wanted, canonical=cfg.canonical))
        print(f"fold {f + 1}/{plan.k}: " +
              "  ".join(f"{k} {v:.6g}" for k, v in fold_reports[-1].items()),
              file=sys.stderr)

    report = metrics.aggregate_folds(fold_reports)
    if args.out:
        _write_text(args.out, report.to_json())
    if args.text:
        _write_text(args.text, report.to_text())
    print(report.to_text(), end="")
    return 0


def cmd_evaluate(args):
    m = model_mod.deserialize(_read_text(args.model))
    wanted = _parse_metrics(args.metrics, default="loglik,mse")
    spec = m.preprocess
    if spec is None:
        raise ConfigError("model carries no preprocessing spec; cannot ingest raw CSV")
    header, rows, n_dropped = data.read_csv(args.data)
    if n_dropped:
        print(f"dropped {n_dropped} malformed row(s)", file=sys.stderr)
    x = spec.transform_features(header, rows)
    if spec.target_name not in header:
        raise DataError(f"target column {spec.target_name!r} not in header")
    pos = header.index(spec.target_name)
    y = spec.transform_target(np.array([float(r[pos]) for r in rows]))
    values = _score(m, x, y, wanted, canonical=args.canonical)
    text = "\n".join(f"{k}  {v:.6g}" for k, v in values.items()) + "\n"
    if args.out:
        _write_text(args.out, dumps(values))
    print(text, end="")
    return 0


def cmd_shapes(args):
    if args.grid < 2:
        raise ConfigError("--grid must be at least 2")
    m = model_mod.deserialize(_read_text(args.model))
    spec = m.preprocess
    if spec is None:
        raise ConfigError("model carries no preprocessing spec; cannot ingest raw CSV")
    header, rows, _ = data.read_csv(args.data)
    x = spec.transform_features(header, rows)
    table = model_mod.shape_functions(m, x, grid_size=args.grid)
    _write_text(args.out, table.to_csv())
    n_rows = sum(len(f["grid"]) for f in table.features) * len(table.param_names)
    print(f"wrote {n_rows} shape rows to {args.out}")
    if args.plot:
        import os

        os.makedirs(args.plot, exist_ok=True)
        for feat in table.features:
            series = [(p, feat["grid"], feat["values"][:, k])
                      for k, p in enumerate(table.param_names)]
            svg = svgplot.line_plot(series, title=feat["name"],
                                    xlabel=feat["name"], ylabel="contribution")
            path = os.path.join(args.plot, f"shape_{feat['name']}.svg")
            _write_text(path, svg)
        print(f"wrote {len(table.features)} plot(s) to {args.plot}")
    return 0


# ---------------------------------------------------------------------------
# scoring shared by evaluate/crossval


def _parse_metrics(text, default):
    tokens = [t.strip() for t in (text or default).split(",") if t.strip()]
    bad = [t for t in tokens if t not in _METRIC_CHOICES]
    if bad:
        raise ConfigError(f"unknown metric(s) {bad}; choose from {list(_METRIC_CHOICES)}")
    return tokens


def _score(m, x, y, wanted, canonical=False):
    out = {}
    params = m.predict_params(x) if m.kind in ("namlss", "dnn") else None
    for name in wanted:
        if name in ("loglik", "nll"):
            if params is not None:
                ll = metrics.heldout_loglik(m.family, y, params=params,
                                            trials=m.trials, canonical=canonical)
            else:
                fam = m.family if m.family is not None else "normal"
                ll = metrics.heldout_loglik(fam, y, mean_preds=m.predict_mean(x))
            out[name] = ll if name == "loglik" else -ll / y.size
        elif name == "mse":
            out[name] = metrics.mse(y, m.predict_mean(x))
        elif name == "gamma-deviance":
            out[name] = metrics.mean_gamma_deviance(y, m.predict_mean(x))
        elif name == "auc":
            out[name] = metrics.auc_riemann(y, m.predict_mean(x))
    return out


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="namlss",
        description="Additive per-feature networks fitting every parameter "
                    "of a response distribution.",
        epilog=f"presets: {_PRESET_NAMES}",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated dataset as CSV",
                       epilog=f"families: {', '.join(sorted(families.FAMILIES))}")
    p.add_argument("--family", required=True)
    p.add_argument("--n", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=None,
                   help="binomial trial count (default 1)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    def add_fit_flags(q):
        q.add_argument("--data", required=True, help="CSV with header row")
        q.add_argument("--target", required=True, help="response column name")
        q.add_argument("--features",
                       help="comma-separated feature columns (default: all except "
                            "target and true_theta*)")
        q.add_argument("--family", help="response distribution id")
        q.add_argument("--arch", choices=(model_mod.PER_PARAMETER, model_mod.SHARED),
                       default=model_mod.PER_PARAMETER)
        q.add_argument("--preset", help=f"one of: {_PRESET_NAMES}")
        q.add_argument("--config", help="JSON file of training settings")
        q.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one training setting (repeatable)")
        q.add_argument("--hidden", help="hidden widths, e.g. 64,32")
        q.add_argument("--seed", type=int, default=None)
        q.add_argument("--target-transform", dest="target_transform",
                       choices=data.TARGET_TRANSFORMS, default=None)
        q.add_argument("--intercepts", action="store_true",
                       help="train additive intercepts (default: fixed at 0)")
        q.add_argument("--canonical", action="store_true",
                       help="use the constant-complete likelihood variants")

    p = sub.add_parser("train", help="fit one model on a CSV",
                       epilog=f"presets: {_PRESET_NAMES}")
    add_fit_flags(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--history", help="training history JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("crossval", help="k-fold fit/score loop",
                       epilog=f"presets: {_PRESET_NAMES}")
    add_fit_flags(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--fold-seed", dest="fold_seed", type=int, default=101)
    p.add_argument("--metrics", help=f"comma list from: {', '.join(_METRIC_CHOICES)}")
    p.add_argument("--out", help="aggregate report JSON path")
    p.add_argument("--text", help="aggregate report text-table path")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("evaluate", help="score a saved model on a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--metrics", help=f"comma list from: {', '.join(_METRIC_CHOICES)}")
    p.add_argument("--canonical", action="store_true")
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("shapes", help="export per-feature shape functions")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True,
                   help="CSV used to pick grid ranges and centering")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--out", required=True, help="shape table CSV path")
    p.add_argument("--plot", help="directory for one SVG per feature")
    p.set_defaults(func=cmd_shapes)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContractError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, SupportError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
