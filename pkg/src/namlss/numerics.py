"""Dense feed-forward engine used by every subnetwork.

A network is a chain of affine layers with ReLU between hidden layers
and a linear output; the distribution-parameter activation is applied by
the caller.  Weights are stored (input_width, output_width) so a layer
computes ``x @ W + b``.  Everything is float64.
"""

import numpy as np

from . import kernels
from .errors import ContractError, NumericError, ShapeError

RELU = "relu"
LINEAR = "linear"


class LayerSpec:
    """Width/activation description of one dense layer."""

    __slots__ = ("input_width", "output_width", "activation")

    def __init__(self, input_width: int, output_width: int, activation: str = RELU):
        if input_width < 1 or output_width < 1:
            raise ShapeError("layer widths must be >= 1")
        if activation not in (RELU, LINEAR):
            raise ContractError(f"unknown activation {activation!r}")
        self.input_width = int(input_width)
        self.output_width = int(output_width)
        self.activation = activation

    def __repr__(self):
        return f"LayerSpec({self.input_width}, {self.output_width}, {self.activation!r})"


def stack_specs(input_width, hidden, output_width):
    """Build the usual spec chain: ReLU hidden layers, linear output."""
    widths = [int(input_width)] + [int(h) for h in hidden] + [int(output_width)]
    specs = []
    for i in range(len(widths) - 1):
        act = RELU if i < len(widths) - 2 else LINEAR
        specs.append(LayerSpec(widths[i], widths[i + 1], act))
    return specs


class MlpParams:
    """Weights, biases and activations of one network, in layer order."""

    __slots__ = ("weights", "biases", "activations")

    def __init__(self, weights, biases, activations):
        self.weights = list(weights)
        self.biases = list(biases)
        self.activations = list(activations)
        self.validate()

    def validate(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ShapeError("ragged parameter lists")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"layer {i}: width chain broken")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NumericError(f"layer {i}: non-finite parameters")

    @property
    def input_width(self):
        return self.weights[0].shape[0]

    @property
    def output_width(self):
        return self.weights[-1].shape[1]

    def copy(self):
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activations,
        )

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


class ForwardCache:
    """Mini-batch intermediates needed to run the backward pass."""

    __slots__ = ("inputs", "pres", "masks", "batch")

    def __init__(self, inputs, pres, masks, batch):
        self.inputs = inputs      # input to each layer (post-dropout of previous)
        self.pres = pres          # pre-activation of each layer
        self.masks = masks        # dropout mask per layer or None
        self.batch = batch


class GradientBundle:
    """Per-layer (d_weight, d_bias), shape-congruent with its MlpParams."""

    __slots__ = ("weights", "biases")

    def __init__(self, weights, biases):
        self.weights = list(weights)
        self.biases = list(biases)


def init_mlp(specs, rng) -> MlpParams:
    """Glorot-uniform weights, zero biases; draws consumed in layer order."""
    weights, biases, acts = [], [], []
    for spec in specs:
        limit = np.sqrt(6.0 / (spec.input_width + spec.output_width))
        w = rng.uniform(-limit, limit, size=(spec.input_width, spec.output_width))
        weights.append(np.ascontiguousarray(w))
        biases.append(np.zeros(spec.output_width))
        acts.append(spec.activation)
    return MlpParams(weights, biases, acts)


def make_dropout_masks(params: MlpParams, batch: int, rates, rng):
    """Inverted-dropout masks (0 or 1/(1-rate)) per layer; None where rate is 0.

    ``rates`` aligns with the layers of ``params``; the output layer rate
    must be 0.  Draws are consumed in layer order, only for nonzero rates.
    """
    rates = list(rates)
    if len(rates) != len(params.weights):
        raise ShapeError("one dropout rate per layer required")
    if rates[-1] != 0:
        raise ContractError("dropout after the output layer is not supported")
    masks = []
    for rate, w in zip(rates, params.weights):
        if rate == 0:
            masks.append(None)
            continue
        if not 0 < rate < 1:
            raise ContractError(f"dropout rate {rate} outside [0, 1)")
        keep = rng.random((batch, w.shape[1])) >= rate
        masks.append(keep.astype(np.float64) / (1.0 - rate))
    return masks


def mlp_forward(params: MlpParams, x, dropout_masks=None):
    """Run the network; returns (output, cache) with cache usable by backward."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.input_width:
        raise ShapeError(
            f"input {x.shape} does not feed a net of input width {params.input_width}"
        )
    if not np.isfinite(x).all():
        raise NumericError("non-finite network input")
    masks = dropout_masks if dropout_masks is not None else [None] * len(params.weights)
    if len(masks) != len(params.weights):
        raise ShapeError("one dropout mask slot per layer required")

    inputs, pres = [], []
    h = x
    for w, b, act, mask in zip(params.weights, params.biases, params.activations, masks):
        inputs.append(h)
        pre = kernels.dense_forward(h, w, b)
        pres.append(pre)
        h = kernels.relu(pre) if act == RELU else pre
        if mask is not None:
            if mask.shape != h.shape:
                raise ShapeError(f"dropout mask {mask.shape} does not match layer output {h.shape}")
            h = h * mask
    return h, ForwardCache(inputs, pres, masks, x.shape[0])


def mlp_backward(params: MlpParams, cache: ForwardCache, upstream_grad) -> GradientBundle:
    """Accumulate d(loss)/d(weights, biases) given d(loss)/d(output)."""
    g = np.ascontiguousarray(upstream_grad, dtype=np.float64)
    if len(cache.pres) != len(params.weights):
        raise ContractError("cache does not match this network")
    if g.shape != (cache.batch, params.output_width):
        raise ShapeError(f"upstream grad {g.shape} does not match output")

    d_w = [None] * len(params.weights)
    d_b = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        if cache.masks[i] is not None:
            g = g * cache.masks[i]
        if params.activations[i] == RELU:
            g = kernels.relu_backward(g, cache.pres[i])
        g, d_w[i], d_b[i] = kernels.dense_backward(cache.inputs[i], params.weights[i], g)
    return GradientBundle(d_w, d_b)


def gradient_check(params: MlpParams, loss_fn, tolerance: float = 1e-4, step: float = 1e-5):
    """Compare analytic gradients with central finite differences.

    ``loss_fn(params) -> (loss, GradientBundle)`` must be deterministic
    (no fresh dropout draws inside).  Relative error uses the denominator
    max(|analytic| + |numeric|, 1e-6) so true-zero gradients do not
    divide FD noise by zero.  Returns a report dict.
    """
    _, bundle = loss_fn(params)
    worst = 0.0
    checked = 0
    for li in range(len(params.weights)):
        for kind, analytic in (("w", bundle.weights[li]), ("b", bundle.biases[li])):
            store = params.weights[li] if kind == "w" else params.biases[li]
            flat = store.ravel()
            aflat = np.asarray(analytic).ravel()
            for idx in range(flat.size):
                keep = flat[idx]
                flat[idx] = keep + step
                hi, _ = loss_fn(params)
                flat[idx] = keep - step
                lo, _ = loss_fn(params)
                flat[idx] = keep
                fd = (hi - lo) / (2.0 * step)
                rel = abs(aflat[idx] - fd) / max(abs(aflat[idx]) + abs(fd), 1e-6)
                worst = max(worst, rel)
                checked += 1
    return {
        "max_rel_error": worst,
        "tolerance": tolerance,
        "checked": checked,
        "passed": bool(worst < tolerance) if checked else True,
    }
