"""Held-out scoring: log-likelihood, MSE, gamma deviance, AUC, fold rollups.

All functions are pure.  The log-likelihood convention here is the summed
(not mean) version: larger is better, and the value for a test fold is
-n times the mean per-observation negative log-likelihood the training
loop minimizes.
"""

import numpy as np

from . import families
from .errors import ContractError, DataError, ShapeError, SupportError
from .jsonio import dumps


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.size == 0:
        raise DataError("empty input")
    if y.shape != yhat.shape:
        raise ShapeError(f"length mismatch: {y.size} vs {yhat.size}")
    return y, yhat


def mse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    d = y - yhat
    return float(np.mean(d * d))


def mean_gamma_deviance(y, yhat) -> float:
    """(2/n) * sum(log(yhat/y) + y/yhat - 1); both arguments must be positive."""
    y, yhat = _pair(y, yhat)
    if (y <= 0).any() or (yhat <= 0).any():
        raise SupportError("gamma deviance needs strictly positive values")
    return float(2.0 * np.mean(np.log(yhat / y) + y / yhat - 1.0))


def auc_riemann(y_binary, scores) -> float:
    """Area under the ROC curve via the threshold sweep.

    Each distinct score is a threshold; the area is accumulated over the
    resulting step curve.  Observations sharing a score move the curve
    diagonally and contribute half credit, which makes the result equal
    to the pairwise Mann-Whitney statistic.
    """
    y, s = _pair(y_binary, scores)
    classes = np.unique(y)
    if not np.isin(classes, (0.0, 1.0)).all():
        raise DataError("labels must be 0/1")
    n_pos = float(np.sum(y))
    n_neg = float(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")

    order = np.argsort(-s, kind="mergesort")
    y_sorted = y[order]
    s_sorted = s[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1.0 - y_sorted)
    group_end = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tpr = np.r_[0.0, tp[group_end] / n_pos]
    fpr = np.r_[0.0, fp[group_end] / n_neg]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))


def heldout_loglik(family, y, params=None, mean_preds=None, trials=None,
                   canonical=False) -> float:
    """Summed test log-likelihood, larger is better.

    Pass either the full parameter matrix or mean predictions; mean-only
    models get their remaining parameters back-filled from the data via
    ``families.approx_params_from_mean``.
    """
    if (params is None) == (mean_preds is None):
        raise ContractError("pass exactly one of params / mean_preds")
    y = np.asarray(y, dtype=np.float64).ravel()
    if params is None:
        params = families.approx_params_from_mean(family, mean_preds, y)
    n = y.size
    return float(-n * families.nll(family, params, y, trials=trials, canonical=canonical))


class MetricReport:
    """Per-fold metric values plus their mean and sample sd (ddof=1)."""

    def __init__(self, folds, mean, sd):
        self.folds = [dict(f) for f in folds]
        self.mean = dict(mean)
        self.sd = dict(sd)

    @property
    def metrics(self):
        return list(self.mean)

    def to_dict(self):
        return {"folds": self.folds, "mean": self.mean, "sd": self.sd}

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_text(self) -> str:
        """Aligned table: one row per metric, one column per fold, then mean ± sd."""
        headers = ["metric"] + [f"fold{i + 1}" for i in range(len(self.folds))] + ["mean ± sd"]
        rows = []
        for name in self.metrics:
            cells = [name]
            cells += [f"{f[name]:.6g}" for f in self.folds]
            cells.append(f"{self.mean[name]:.6g} ± {self.sd[name]:.4g}")
            rows.append(cells)
        widths = [max(len(r[c]) for r in [headers] + rows) for c in range(len(headers))]
        lines = []
        for r in [headers] + rows:
            lines.append("  ".join(
                r[c].ljust(widths[c]) if c == 0 else r[c].rjust(widths[c])
                for c in range(len(headers))))
        return "\n".join(lines) + "\n"


def aggregate_folds(fold_reports) -> MetricReport:
    """Roll per-fold {metric: value} dicts into mean and sample sd."""
    folds = [dict(f) for f in fold_reports]
    if len(folds) < 2:
        raise ContractError("sd over folds needs at least 2 folds")
    names = list(folds[0])
    for f in folds[1:]:
        if list(f) != names:
            raise ContractError("folds report different metric sets")
    mean, sd = {}, {}
    for name in names:
        vals = np.array([f[name] for f in folds], dtype=np.float64)
        mean[name] = float(np.mean(vals))
        sd[name] = float(np.std(vals, ddof=1))
    return MetricReport(folds, mean, sd)
