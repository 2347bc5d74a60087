"""Mini-batch training: Adam, plateau LR decay, early stopping, dropout.

The loop owns one model exclusively and mutates its parameter tensors in
place.  All randomness (validation split, per-epoch shuffles, dropout
masks, feature dropout) is drawn from tagged streams derived from the
config seed, so two runs with the same seed produce identical histories
bit for bit.  The learning rate after d decays is recomputed fresh as
lr0 * factor**d rather than multiplied incrementally.
"""

import logging
import time

import numpy as np

from . import families, kernels
from .errors import ConfigError, NumericError, ShapeError
from .numerics import make_dropout_masks, mlp_backward, mlp_forward
from .rng import stream

log = logging.getLogger("namlss.train")

_IMPROVEMENT = 1e-6  # required absolute decrease for either patience counter


class TrainConfig:
    """Knobs for one training run; validated on construction."""

    FIELDS = (
        "learning_rate", "batch_size", "max_epochs", "early_stop_patience",
        "lr_decay_factor", "lr_decay_patience", "dropout", "dropout_layer",
        "dropout_params", "feature_dropout", "validation_fraction", "seed",
        "adam_beta1", "adam_beta2", "adam_eps", "grad_clip", "canonical",
    )

    def __init__(self, learning_rate=1e-4, batch_size=256, max_epochs=2000,
                 early_stop_patience=150, lr_decay_factor=0.95,
                 lr_decay_patience=10, dropout=0.0, dropout_layer=0,
                 dropout_params=None, feature_dropout=0.0,
                 validation_fraction=0.2, seed=0, adam_beta1=0.9,
                 adam_beta2=0.999, adam_eps=1e-8, grad_clip=10.0,
                 canonical=False):
        self.learning_rate = float(learning_rate)
        self.batch_size = int(batch_size)
        self.max_epochs = int(max_epochs)
        self.early_stop_patience = int(early_stop_patience)
        self.lr_decay_factor = float(lr_decay_factor)
        self.lr_decay_patience = int(lr_decay_patience)
        self.dropout = float(dropout)
        self.dropout_layer = int(dropout_layer)
        self.dropout_params = None if dropout_params is None else [int(p) for p in dropout_params]
        self.feature_dropout = float(feature_dropout)
        self.validation_fraction = float(validation_fraction)
        self.seed = int(seed)
        self.adam_beta1 = float(adam_beta1)
        self.adam_beta2 = float(adam_beta2)
        self.adam_eps = float(adam_eps)
        self.grad_clip = float(grad_clip)
        self.canonical = bool(canonical)
        self._validate()

    def _validate(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0 < self.lr_decay_factor < 1:
            raise ConfigError("lr_decay_factor must lie in (0, 1)")
        if self.early_stop_patience < 1 or self.lr_decay_patience < 1:
            raise ConfigError("patience values must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and max_epochs >= 0")
        for name in ("dropout", "feature_dropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in [0, 1)")

    def to_dict(self):
        return {f: getattr(self, f) for f in self.FIELDS}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return TrainConfig.from_dict(d)


class TrainHistory:
    """Per-epoch losses and schedule; wall time is kept in memory only and
    deliberately excluded from the serialized form."""

    def __init__(self):
        self.train_nll = []
        self.val_nll = []
        self.lr = []
        self.best_epoch = 0
        self.best_val_nll = float("inf")
        self.stopped_epoch = 0
        self.stop_reason = "max-epochs"
        self.n_clip_events = 0
        self.wall_time = 0.0  # not serialized

    def to_dict(self):
        return {
            "train_nll": [float(v) for v in self.train_nll],
            "val_nll": [float(v) for v in self.val_nll],
            "lr": [float(v) for v in self.lr],
            "best_epoch": self.best_epoch,
            "best_val_nll": self.best_val_nll,
            "stopped_epoch": self.stopped_epoch,
            "stop_reason": self.stop_reason,
            "n_clip_events": self.n_clip_events,
        }


class AdamState:
    __slots__ = ("m", "v", "t")

    def __init__(self, tensors):
        self.m = [np.zeros_like(p) for p in tensors]
        self.v = [np.zeros_like(p) for p in tensors]
        self.t = 0


def adam_step(tensors, grads, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Adam update with bias correction over aligned tensor lists."""
    if len(tensors) != len(grads) or len(tensors) != len(state.m):
        raise ShapeError("params/grads/state length mismatch")
    state.t += 1
    t = float(state.t)
    for p, g, m, v in zip(tensors, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"grad shape {g.shape} does not match param {p.shape}")
        if not p.flags["C_CONTIGUOUS"]:
            raise ShapeError("parameter tensors must be contiguous")
        kernels.adam_update(p.ravel(), np.ascontiguousarray(g).ravel(),
                            m.ravel(), v.ravel(), t, lr, beta1, beta2, eps)


def feature_dropout_mask(j, rate, rng):
    """Boolean keep-mask over features; False drops the whole subnetwork
    contribution for the batch (survivors get scaled by 1/(1-rate))."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError("feature dropout rate must lie in [0, 1)")
    if rate == 0.0:
        return np.ones(j, dtype=bool)
    return rng.random(j) >= rate


# ---------------------------------------------------------------------------
# objective adapters


def _batch_loss_grad(model, eta, y, canonical):
    """Mean loss over the batch and d(loss)/d(eta)."""
    b = eta.shape[0]
    if model.kind in ("namlss", "dnn"):
        fam = model.family
        params = families.activate(fam, eta)
        terms = families.nll_terms(fam, params, y, trials=model.trials, canonical=canonical)
        dp = families.nll_grad(fam, params, y, trials=model.trials, canonical=canonical)
        g_eta = dp * families.activation_grad(fam, eta) / b
        return float(np.mean(terms)), g_eta
    pred = eta[:, 0]
    if model.loss == "bce":
        p = kernels.sigmoid(np.ascontiguousarray(pred))
        loss = float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))
        g = ((p - y) / b).reshape(-1, 1)
        return loss, g
    r = pred - y
    return float(np.mean(r * r)), (2.0 * r / b).reshape(-1, 1)


def _eval_loss(model, x, y, canonical):
    eta, _ = model.ensemble.forward(x)
    loss, _ = _batch_loss_grad(model, eta, y, canonical)
    return loss


def _subnet_masks(model, config, batch, epoch, step):
    """Per-subnet dropout mask lists for one batch, or None when disabled."""
    if config.dropout == 0.0:
        return None
    ens = model.ensemble
    masks = []
    for s, net in enumerate(ens.subnets):
        group = ens.dropout_group[s]
        if config.dropout_params is not None and group not in config.dropout_params:
            masks.append(None)
            continue
        n_hidden = len(net.weights) - 1
        if config.dropout_layer >= n_hidden:
            masks.append(None)
            continue
        rates = [0.0] * len(net.weights)
        rates[config.dropout_layer] = config.dropout
        gen = stream(config.seed, "dropout", epoch, step, group, ens.inputs[s][0])
        masks.append(make_dropout_masks(net, batch, rates, gen))
    return masks


def _nonfinite_diagnostics(model, eta, epoch, step):
    cols = np.flatnonzero(~np.isfinite(eta).all(axis=0))
    names = None
    fam = getattr(model, "family", None)
    if fam is not None and model.kind in ("namlss", "dnn"):
        names = [fam.param_names[c] for c in cols if c < fam.k]
    return (f"non-finite loss at epoch {epoch}, batch {step}; "
            f"offending parameter column(s): {names or cols.tolist()}")


def train(model, x, y, config: TrainConfig):
    """Fit the model in place; returns (model, TrainHistory).

    The parameters achieving the best validation loss are restored at
    the end.  With validation_fraction = 0 the patience counters monitor
    the training loss instead.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeError(f"X {x.shape} / y {y.shape} mismatch")
    n = x.shape[0]

    n_val = int(round(n * config.validation_fraction))
    if config.validation_fraction > 0 and n_val == 0:
        n_val = 1
    if n - n_val < 1:
        raise ConfigError("validation split leaves no training rows")
    perm = stream(config.seed, "val-split").permutation(n)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    x_tr, y_tr = x[tr_idx], y[tr_idx]
    x_val, y_val = (x[val_idx], y[val_idx]) if n_val else (x_tr, y_tr)

    ens = model.ensemble
    tensors = ens.param_tensors()
    state = AdamState(tensors)
    history = TrainHistory()
    t0 = time.perf_counter()
    lr0 = config.learning_rate
    n_decays = 0
    lr = lr0
    best_state = ens.copy_state()
    stagnant_stop = 0
    stagnant_decay = 0
    n_tr = x_tr.shape[0]

    single_feature = [len(t) == 1 for t in ens.inputs]

    for epoch in range(1, config.max_epochs + 1):
        order = stream(config.seed, "shuffle", epoch).permutation(n_tr)
        epoch_loss = 0.0
        for step, start in enumerate(range(0, n_tr, config.batch_size)):
            idx = order[start:start + config.batch_size]
            xb, yb = x_tr[idx], y_tr[idx]
            b = xb.shape[0]

            masks = _subnet_masks(model, config, b, epoch, step)
            if config.feature_dropout > 0.0:
                keep = feature_dropout_mask(
                    model.j, config.feature_dropout,
                    stream(config.seed, "feature-dropout", epoch, step))
                fscale = keep.astype(np.float64) / (1.0 - config.feature_dropout)
            else:
                fscale = None

            # forward
            eta = np.tile(ens.intercepts, (b, 1))
            caches = []
            xb_in = xb
            if fscale is not None and not all(single_feature):
                xb_in = xb * fscale  # input-column dropout for dense nets
            for s, net in enumerate(ens.subnets):
                xin = (ens.subnet_input(xb, s) if single_feature[s]
                       else ens.subnet_input(xb_in, s))
                out, cache = mlp_forward(net, xin, None if masks is None else masks[s])
                if fscale is not None and single_feature[s]:
                    out = out * fscale[ens.inputs[s][0]]
                eta[:, ens.out_cols[s]] += out
                caches.append(cache)

            loss, g_eta = _batch_loss_grad(model, eta, yb, config.canonical)
            if not np.isfinite(loss):
                raise NumericError(_nonfinite_diagnostics(model, eta, epoch, step))
            epoch_loss += loss * b

            # backward
            grads = []
            for s, net in enumerate(ens.subnets):
                up = np.ascontiguousarray(g_eta[:, ens.out_cols[s]])
                if fscale is not None and single_feature[s]:
                    up = up * fscale[ens.inputs[s][0]]
                bundle = mlp_backward(net, caches[s], up)
                for dw, db in zip(bundle.weights, bundle.biases):
                    grads.append(dw)
                    grads.append(db)
            if ens.intercepts_trainable:
                grads.append(g_eta.sum(axis=0))

            # global-norm clip
            sq = 0.0
            for g in grads:
                sq += float(np.sum(g * g))
            gnorm = np.sqrt(sq)
            if not np.isfinite(gnorm):
                raise NumericError(_nonfinite_diagnostics(model, eta, epoch, step))
            if gnorm > config.grad_clip:
                factor = config.grad_clip / gnorm
                for g in grads:
                    g *= factor
                history.n_clip_events += 1
                log.debug("gradient clipped at epoch %d step %d (norm %.3g)",
                          epoch, step, gnorm)

            adam_step(tensors, grads, state, lr,
                      config.adam_beta1, config.adam_beta2, config.adam_eps)

        train_loss = epoch_loss / n_tr
        val_loss = _eval_loss(model, x_val, y_val, config.canonical)
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        history.train_nll.append(train_loss)
        history.val_nll.append(val_loss)
        history.lr.append(lr)
        history.stopped_epoch = epoch

        if history.best_val_nll - val_loss >= _IMPROVEMENT:
            history.best_val_nll = val_loss
            history.best_epoch = epoch
            best_state = ens.copy_state()
            stagnant_stop = 0
            stagnant_decay = 0
        else:
            stagnant_stop += 1
            stagnant_decay += 1
            if stagnant_stop >= config.early_stop_patience:
                history.stop_reason = "early-stop"
                break
            if stagnant_decay >= config.lr_decay_patience:
                n_decays += 1
                lr = lr0 * config.lr_decay_factor ** n_decays
                stagnant_decay = 0
                log.debug("lr decayed to %.6g at epoch %d", lr, epoch)

    ens.restore_state(best_state)
    history.wall_time = time.perf_counter() - t0
    return model, history


# ---------------------------------------------------------------------------
# presets


PRESETS = {
    "ca-housing": {
        "family": "normal",
        "hidden": [1000, 500, 100, 50, 25],
        "param_hidden": [None, [50, 25]],
        "target_transform": "standardize",
        "config": {"batch_size": 1024, "dropout": 0.25, "dropout_layer": 1,
                   "dropout_params": [0]},
    },
    "insurance": {
        "family": "normal",
        "hidden": [250, 50, 25],
        "param_hidden": [None, [50]],
        "target_transform": "standardize",
        "config": {"batch_size": 256, "dropout": 0.5, "dropout_layer": 0,
                   "dropout_params": [0]},
    },
    "fico": {
        "family": "logistic",
        "hidden": [250, 50, 25],
        "param_hidden": [None, [50]],
        "target_transform": "none",
        "config": {"batch_size": 1024, "dropout": 0.5, "dropout_layer": 0,
                   "dropout_params": [0]},
    },
    "airbnb": {
        "family": "inverse-gamma",
        "hidden": [512, 256, 50],
        "param_hidden": None,
        "target_transform": "log",
        "config": {"batch_size": 512, "dropout": 0.5, "dropout_layer": 0},
    },
    # small stacks tuned for the n=3000 unit-cube generator; not paper-derived
    "synthetic": {
        "family": None,  # caller chooses
        "hidden": [64, 32],
        "param_hidden": None,
        "target_transform": "none",
        "config": {"batch_size": 256, "learning_rate": 1e-3, "max_epochs": 400,
                   "early_stop_patience": 40, "dropout": 0.0},
    },
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
