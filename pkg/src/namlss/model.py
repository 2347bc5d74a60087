"""Model assembly and inference.

Every model variant here is an *additive ensemble*: a list of subnets,
each reading a fixed tuple of feature columns and adding its output into
fixed columns of the raw predictor eta.  The two NAMLSS architectures,
the fully connected DNN/MLP baselines and the mean-only NAM baseline all
share that machinery and differ only in wiring:

* ``per-parameter``: K x J subnets, scalar output, subnet (k, j) feeds
  column k.  Stored k-major; accumulation runs left-to-right over j
  within k so sums are bit-reproducible.
* ``shared``: J subnets with K-dimensional output feeding all columns.
  For K = 1 the wiring, seeding and arithmetic coincide exactly with
  ``per-parameter``.
* ``dnn`` / ``mlp``: one subnet over all features (K outputs / 1 output).
* ``nam``: J single-output subnets, mean-only.

Output activations are applied *after* summation, by the families
module; ``predict_raw`` returns the pre-activation eta.
"""

import numpy as np

from . import families, jsonio
from .data import PreprocessSpec
from .errors import ConfigError, ContractError, FormatError, ShapeError
from .numerics import (
    LayerSpec,
    MlpParams,
    init_mlp,
    mlp_backward,
    mlp_forward,
    stack_specs,
)
from .rng import stream

PER_PARAMETER = "per-parameter"
SHARED = "shared"

MODEL_FORMAT = "namlss-model"
MODEL_VERSION = 1


class AdditiveEnsemble:
    """Subnets + wiring + intercepts; the shared guts of every model kind."""

    __slots__ = ("subnets", "inputs", "out_cols", "dropout_group",
                 "n_outputs", "intercepts", "intercepts_trainable")

    def __init__(self, subnets, inputs, out_cols, dropout_group, n_outputs,
                 intercepts=None, intercepts_trainable=False):
        self.subnets = list(subnets)
        self.inputs = [tuple(t) for t in inputs]
        self.out_cols = [np.asarray(c, dtype=np.int64) for c in out_cols]
        self.dropout_group = list(dropout_group)
        self.n_outputs = int(n_outputs)
        self.intercepts = (np.zeros(n_outputs) if intercepts is None
                           else np.asarray(intercepts, dtype=np.float64).copy())
        self.intercepts_trainable = bool(intercepts_trainable)

    def subnet_input(self, x, s):
        cols = self.inputs[s]
        if len(cols) == 1:
            return x[:, cols[0]].reshape(-1, 1)
        return x[:, list(cols)]

    def forward(self, x, masks=None):
        """Returns (eta, caches); ``masks[s]`` is the per-layer dropout
        mask list for subnet s (or None)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        eta = np.tile(self.intercepts, (x.shape[0], 1))
        caches = []
        for s, net in enumerate(self.subnets):
            out, cache = mlp_forward(net, self.subnet_input(x, s),
                                     None if masks is None else masks[s])
            eta[:, self.out_cols[s]] += out
            caches.append(cache)
        return eta, caches

    def backward(self, caches, g_eta):
        """Returns (per-subnet GradientBundles, intercept gradient)."""
        bundles = []
        for s, net in enumerate(self.subnets):
            upstream = np.ascontiguousarray(g_eta[:, self.out_cols[s]])
            bundles.append(mlp_backward(net, caches[s], upstream))
        g_int = g_eta.sum(axis=0) if self.intercepts_trainable else None
        return bundles, g_int

    def param_tensors(self):
        """Flat tensor list in deterministic order (Adam state aligns to it)."""
        out = []
        for net in self.subnets:
            for w, b in zip(net.weights, net.biases):
                out.append(w)
                out.append(b)
        if self.intercepts_trainable:
            out.append(self.intercepts)
        return out

    def grad_tensors(self, bundles, g_int):
        out = []
        for bundle in bundles:
            for dw, db in zip(bundle.weights, bundle.biases):
                out.append(dw)
                out.append(db)
        if self.intercepts_trainable:
            out.append(g_int)
        return out

    def copy_state(self):
        return ([net.copy() for net in self.subnets], self.intercepts.copy())

    def restore_state(self, state):
        nets, intercepts = state
        self.subnets = [net.copy() for net in nets]
        self.intercepts = intercepts.copy()


def _check_features(x, j):
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != j:
        raise ShapeError(f"expected (batch, {j}) features, got {x.shape}")


class NamlssModel:
    kind = "namlss"

    def __init__(self, family, arch, j, ensemble, trials=None, preprocess=None):
        self.family = families.get_family(family) if isinstance(family, str) else family
        if arch not in (PER_PARAMETER, SHARED):
            raise ConfigError(f"unknown architecture {arch!r}")
        self.arch = arch
        self.j = int(j)
        self.ensemble = ensemble
        self.trials = trials
        self.preprocess = preprocess

    @property
    def k(self):
        return self.family.k

    def predict_raw(self, x):
        _check_features(x, self.j)
        eta, _ = self.ensemble.forward(x)
        return eta

    def predict_params(self, x):
        return families.activate(self.family, self.predict_raw(x))

    def predict_mean(self, x):
        return families.mean(self.family, self.predict_params(x), trials=self.trials)

    def feature_contributions(self, x):
        """contribution[i, j, k] = f_j^(k)(x[i, j]); no intercept included."""
        _check_features(x, self.j)
        x = np.ascontiguousarray(x, dtype=np.float64)
        contrib = np.zeros((x.shape[0], self.j, self.k))
        ens = self.ensemble
        for s, net in enumerate(ens.subnets):
            out, _ = mlp_forward(net, ens.subnet_input(x, s))
            contrib[:, ens.inputs[s][0], ens.out_cols[s]] += out
        return contrib


class BaselineModel:
    """DNN (full NLL), MLP (mean loss) and NAM (additive mean loss)."""

    def __init__(self, kind, ensemble, j, family=None, loss=None, trials=None,
                 preprocess=None):
        if kind not in ("dnn", "mlp", "nam"):
            raise ConfigError(f"unknown baseline kind {kind!r}")
        self.kind = kind
        self.ensemble = ensemble
        self.j = int(j)
        self.family = families.get_family(family) if isinstance(family, str) else family
        self.loss = loss  # "mse" | "bce" for mlp/nam; None for dnn
        self.trials = trials
        self.preprocess = preprocess

    def predict_raw(self, x):
        _check_features(x, self.j)
        eta, _ = self.ensemble.forward(x)
        return eta

    def predict_params(self, x):
        if self.kind != "dnn":
            raise ContractError(f"{self.kind} predicts a mean, not distribution parameters")
        return families.activate(self.family, self.predict_raw(x))

    def predict_mean(self, x):
        if self.kind == "dnn":
            return families.mean(self.family, self.predict_params(x), trials=self.trials)
        raw = self.predict_raw(x)[:, 0]
        if self.loss == "bce":
            from . import kernels

            return kernels.sigmoid(np.ascontiguousarray(raw))
        return raw


def build(family, arch, j, hidden, seed, *, param_hidden=None,
          intercepts_trainable=False, trials=None) -> NamlssModel:
    """Assemble an initialized NAMLSS model.

    ``hidden`` is the hidden-width stack of every subnet; ``param_hidden``
    (per-parameter architecture only) overrides it per distribution
    parameter, e.g. a smaller stack for the scale subnets.
    """
    fam = families.get_family(family) if isinstance(family, str) else family
    if j < 1:
        raise ConfigError("need at least one feature")
    hidden = list(hidden)
    if not hidden:
        raise ConfigError("hidden stack must be non-empty")
    k = fam.k

    if param_hidden is not None and arch != PER_PARAMETER:
        raise ConfigError("per-parameter hidden overrides require the per-parameter architecture")
    stacks = [hidden] * k
    if param_hidden is not None:
        if len(param_hidden) != k:
            raise ConfigError(f"param_hidden needs {k} entries for {fam.family_id}")
        stacks = [list(h) if h is not None else hidden for h in param_hidden]

    subnets, inputs, out_cols, groups = [], [], [], []
    if arch == PER_PARAMETER:
        for ki in range(k):
            for ji in range(j):
                net = init_mlp(stack_specs(1, stacks[ki], 1), stream(seed, "subnet", ki, ji))
                subnets.append(net)
                inputs.append((ji,))
                out_cols.append([ki])
                groups.append(ki)
    elif arch == SHARED:
        for ji in range(j):
            net = init_mlp(stack_specs(1, hidden, k), stream(seed, "subnet", 0, ji))
            subnets.append(net)
            inputs.append((ji,))
            out_cols.append(list(range(k)))
            groups.append(0)
    else:
        raise ConfigError(f"unknown architecture {arch!r}")

    ens = AdditiveEnsemble(subnets, inputs, out_cols, groups, k,
                           intercepts_trainable=intercepts_trainable)
    return NamlssModel(fam, arch, j, ens, trials=trials)


def build_dnn(family, j, hidden, seed, *, intercepts_trainable=False, trials=None):
    fam = families.get_family(family) if isinstance(family, str) else family
    net = init_mlp(stack_specs(j, list(hidden), fam.k), stream(seed, "dnn"))
    ens = AdditiveEnsemble([net], [tuple(range(j))], [list(range(fam.k))], [0], fam.k,
                           intercepts_trainable=intercepts_trainable)
    return BaselineModel("dnn", ens, j, family=fam, trials=trials)


def build_mlp(j, hidden, seed, loss="mse"):
    if loss not in ("mse", "bce"):
        raise ConfigError(f"mlp loss must be mse or bce, got {loss!r}")
    net = init_mlp(stack_specs(j, list(hidden), 1), stream(seed, "mlp"))
    ens = AdditiveEnsemble([net], [tuple(range(j))], [[0]], [0], 1)
    return BaselineModel("mlp", ens, j, loss=loss)


def build_nam(j, hidden, seed, loss="mse"):
    if loss not in ("mse", "bce"):
        raise ConfigError(f"nam loss must be mse or bce, got {loss!r}")
    subnets = [init_mlp(stack_specs(1, list(hidden), 1), stream(seed, "nam", ji))
               for ji in range(j)]
    ens = AdditiveEnsemble(subnets, [(ji,) for ji in range(j)], [[0]] * j, [0] * j, 1)
    return BaselineModel("nam", ens, j, loss=loss)


# ---------------------------------------------------------------------------
# shape functions


class ShapeFunctionTable:
    """Centered per-feature curves on the raw additive (pre-activation) scale.

    Curves are centered by their mean over the training distribution;
    the subtracted constants plus intercepts are reported as per-parameter
    offsets, so eta = offset[k] + sum_j curve_j^(k).
    """

    def __init__(self, param_names, offsets, features):
        self.param_names = list(param_names)
        self.offsets = np.asarray(offsets, dtype=np.float64)
        self.features = features  # list of dicts: name, grid, values (G, K)

    def to_dict(self):
        return {
            "scale": "pre-activation additive contributions, mean-centered",
            "param_names": self.param_names,
            "offsets": self.offsets,
            "features": [
                {"name": f["name"], "grid": f["grid"], "values": f["values"]}
                for f in self.features
            ],
        }

    def to_csv(self) -> str:
        import csv as _csv
        import io as _io

        buf = _io.StringIO()
        writer = _csv.writer(buf, lineterminator="\n")
        writer.writerow(["feature", "grid_value", "param_index", "contribution", "offset"])
        for f in self.features:
            for gi, gv in enumerate(f["grid"]):
                for k in range(len(self.param_names)):
                    writer.writerow([
                        f["name"], repr(float(gv)), k,
                        repr(float(f["values"][gi, k])),
                        repr(float(self.offsets[k])),
                    ])
        return buf.getvalue()


def shape_functions(model, train_x, grid_size=256) -> ShapeFunctionTable:
    """Evaluate each learned curve on an equispaced grid over the observed
    range of its feature, reporting grid values in original units when the
    model carries a preprocessing spec."""
    if model.kind not in ("namlss", "nam"):
        raise ContractError(f"{model.kind} has no per-feature shape functions")
    if grid_size < 2:
        raise ConfigError("grid_size must be >= 2")
    train_x = np.asarray(train_x, dtype=np.float64)
    _check_features(train_x, model.j)
    if train_x.shape[0] == 0:
        raise ContractError("empty training data")

    fam = getattr(model, "family", None)
    k = fam.k if (model.kind == "namlss") else 1
    param_names = list(fam.param_names) if model.kind == "namlss" else ["mean"]
    ens = model.ensemble

    # per-subnet curves and training-mean centering constants
    curves = [np.zeros((grid_size, k)) for _ in range(model.j)]
    centers = np.zeros((model.j, k))
    grids = []
    for ji in range(model.j):
        lo = float(train_x[:, ji].min())
        hi = float(train_x[:, ji].max())
        grids.append(np.linspace(lo, hi, grid_size))
    for s, net in enumerate(ens.subnets):
        ji = ens.inputs[s][0]
        cols = ens.out_cols[s]
        out, _ = mlp_forward(net, grids[ji].reshape(-1, 1))
        curves[ji][:, cols] += out
        tr_out, _ = mlp_forward(net, train_x[:, ji].reshape(-1, 1))
        centers[ji, cols] += tr_out.mean(axis=0)

    offsets = ens.intercepts[:k] + centers.sum(axis=0)
    features = []
    spec = getattr(model, "preprocess", None)
    numeric = set()
    if spec is not None:
        numeric = {name for name, kind, _ in spec.columns if kind == "numeric"}
    names = spec.feature_names if spec is not None else [f"x{i+1}" for i in range(model.j)]
    for ji in range(model.j):
        grid = grids[ji]
        name = names[ji] if ji < len(names) else f"x{ji+1}"
        if name in numeric:
            grid = spec.invert_numeric(name, grid)
        features.append({
            "name": name,
            "grid": grid,
            "values": curves[ji] - centers[ji],
        })
    return ShapeFunctionTable(param_names, offsets, features)


# ---------------------------------------------------------------------------
# residual interactions


class InteractionModel:
    """Optional fully connected net fitted to base-model residuals.

    Never alters the base model; combined predictions add its mean
    adjustment to the base mean.
    """

    def __init__(self, net_model, base):
        self.net_model = net_model  # a dnn BaselineModel over residuals
        self.base = base

    def mean_adjustment(self, x):
        return self.net_model.predict_mean(x)

    def combined_mean(self, x):
        return self.base.predict_mean(x) + self.mean_adjustment(x)


def fit_interactions(model, x, y, config, hidden=(64, 32)) -> InteractionModel:
    """Train a fully connected net on residuals e = y - mean(theta_hat)
    under the same family NLL; the base model is left untouched."""
    from . import training as _train

    fam = model.family
    if fam is None:
        raise ContractError("interactions need a distribution family")
    residuals = np.asarray(y, dtype=np.float64) - model.predict_mean(x)
    net = build_dnn(fam, model.j, hidden, config.seed, trials=model.trials)
    _train.train(net, x, residuals, config)
    return InteractionModel(net, model)


# ---------------------------------------------------------------------------
# serialization


def _net_to_doc(net: MlpParams):
    return {
        "weights": [w for w in net.weights],
        "biases": [b for b in net.biases],
        "activations": list(net.activations),
    }


def _net_from_doc(doc) -> MlpParams:
    try:
        weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        acts = list(doc["activations"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed subnet document: {exc}") from None
    return MlpParams(weights, biases, acts)


def serialize(model) -> str:
    """Model -> versioned JSON text; exact round trip via 17-digit floats."""
    ens = model.ensemble
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "j": model.j,
        "n_outputs": ens.n_outputs,
        "family": model.family.family_id if getattr(model, "family", None) else None,
        "arch": getattr(model, "arch", None),
        "loss": getattr(model, "loss", None),
        "trials": getattr(model, "trials", None),
        "intercepts": ens.intercepts,
        "intercepts_trainable": ens.intercepts_trainable,
        "subnets": [_net_to_doc(net) for net in ens.subnets],
        "inputs": [list(t) for t in ens.inputs],
        "out_cols": [c.tolist() for c in ens.out_cols],
        "dropout_group": list(ens.dropout_group),
        "preprocess": model.preprocess.to_dict() if getattr(model, "preprocess", None) else None,
    }
    return jsonio.dumps(doc)


def deserialize(text: str):
    doc = jsonio.loads(text)
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError("not a model document")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(
            f"unsupported model document version {doc.get('version')!r}; "
            f"this build reads version {MODEL_VERSION}"
        )
    try:
        ens = AdditiveEnsemble(
            [_net_from_doc(d) for d in doc["subnets"]],
            [tuple(t) for t in doc["inputs"]],
            doc["out_cols"],
            doc["dropout_group"],
            doc["n_outputs"],
            intercepts=np.asarray(doc["intercepts"], dtype=np.float64),
            intercepts_trainable=doc["intercepts_trainable"],
        )
        pp = PreprocessSpec.from_dict(doc["preprocess"]) if doc["preprocess"] else None
        kind = doc["kind"]
        if kind == "namlss":
            return NamlssModel(doc["family"], doc["arch"], doc["j"], ens,
                               trials=doc["trials"], preprocess=pp)
        return BaselineModel(kind, ens, doc["j"], family=doc["family"],
                             loss=doc["loss"], trials=doc["trials"], preprocess=pp)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model document: {exc}") from None
