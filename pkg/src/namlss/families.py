"""Response-distribution catalog.

Each family knows its parameter names, the output activation that maps a
raw network column onto the parameter's legal range, its per-observation
negative log-likelihood and the analytic gradient of that NLL w.r.t. the
(post-activation) parameters.  The likelihood formulas follow one fixed
printed convention; families whose printed form drops constants or
deviates from the textbook density also accept ``canonical=True``.

Two validity notions exist deliberately.  The *activation closure*
predicate is what :func:`activate` guarantees for any finite raw input
(e.g. inverse-gamma alpha >= 1).  The *NLL domain* is what :func:`nll`
demands of caller-supplied parameters, and is wider where the likelihood
itself is defined more broadly (e.g. any alpha > 0): parameter back-fill
for mean-only baselines legitimately produces alpha < 1.
"""

import numpy as np

from . import kernels
from .errors import ContractError, NumericError, SupportError

LINEAR = "linear"
SOFTPLUS = "softplus"
SIGMOID = "sigmoid"
INVERSE_GAMMA_ALPHA = "inverse-gamma-alpha"


class FamilyDescriptor:
    __slots__ = ("family_id", "k", "param_names", "activations", "support", "has_canonical")

    def __init__(self, family_id, param_names, activations, support, has_canonical=False):
        self.family_id = family_id
        self.k = len(param_names)
        self.param_names = tuple(param_names)
        self.activations = tuple(activations)
        self.support = support
        self.has_canonical = has_canonical

    def __repr__(self):
        return f"FamilyDescriptor({self.family_id!r}, K={self.k})"


FAMILIES = {
    d.family_id: d
    for d in (
        FamilyDescriptor("normal", ("mu", "sigma2"), (LINEAR, SOFTPLUS), "any real"),
        FamilyDescriptor("logistic", ("mu", "s"), (SIGMOID, SOFTPLUS), "y in {0, 1}"),
        FamilyDescriptor("binomial", ("p",), (SIGMOID,), "integer 0 <= y <= trials"),
        FamilyDescriptor("poisson", ("lambda_rate",), (SOFTPLUS,), "integer y >= 0"),
        FamilyDescriptor(
            "inverse-gaussian", ("mu", "sigma"), (SOFTPLUS, SOFTPLUS), "y > 0", has_canonical=True
        ),
        FamilyDescriptor("weibull", ("lambda", "beta_shape"), (SOFTPLUS, SOFTPLUS), "y > 0"),
        FamilyDescriptor(
            "johnsons-su",
            ("mu", "sigma", "omega", "beta_skew"),
            (LINEAR, SOFTPLUS, SOFTPLUS, SOFTPLUS),
            "any real",
            has_canonical=True,
        ),
        FamilyDescriptor("inverse-gamma", ("alpha", "beta"), (INVERSE_GAMMA_ALPHA, SOFTPLUS), "y > 0"),
    )
}


def get_family(family_id: str) -> FamilyDescriptor:
    try:
        return FAMILIES[family_id]
    except KeyError:
        raise ContractError(
            f"unknown family {family_id!r}; choose from {sorted(FAMILIES)}"
        ) from None


def log_gamma(x):
    """log Gamma(x) for x > 0; accepts scalars or arrays."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr <= 0.0) or not np.all(np.isfinite(arr)):
        raise SupportError("log_gamma requires x > 0")
    out = kernels.log_gamma(np.ascontiguousarray(np.atleast_1d(arr)))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


_ACTIVATE = {
    LINEAR: lambda x: x,
    SOFTPLUS: kernels.softplus,
    SIGMOID: kernels.sigmoid,
    INVERSE_GAMMA_ALPHA: kernels.alpha_activation,
}

_ACTIVATE_GRAD = {
    LINEAR: np.ones_like,
    SOFTPLUS: kernels.sigmoid,
    SIGMOID: lambda x: kernels.sigmoid(x) * (1.0 - kernels.sigmoid(x)),
    INVERSE_GAMMA_ALPHA: kernels.alpha_activation_grad,
}


def _raw_columns(family: FamilyDescriptor, raw_eta) -> list:
    raw = np.asarray(raw_eta, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != family.k:
        raise ContractError(
            f"{family.family_id} expects raw shape (batch, {family.k}), got {raw.shape}"
        )
    if not np.isfinite(raw).all():
        raise NumericError("non-finite raw parameter values")
    return [np.ascontiguousarray(raw[:, i]) for i in range(family.k)]


def activate(family, raw_eta):
    """Map raw network outputs columnwise onto the family's parameter ranges."""
    fam = get_family(family) if isinstance(family, str) else family
    cols = _raw_columns(fam, raw_eta)
    return np.stack([_ACTIVATE[a](c) for a, c in zip(fam.activations, cols)], axis=1)


def activation_grad(family, raw_eta):
    """Columnwise derivative of :func:`activate` at the given raw values."""
    fam = get_family(family) if isinstance(family, str) else family
    cols = _raw_columns(fam, raw_eta)
    return np.stack([_ACTIVATE_GRAD[a](c) for a, c in zip(fam.activations, cols)], axis=1)


def constraint_ok(family, params) -> bool:
    """Activation-closure predicate: does every row lie in activate()'s range?"""
    fam = get_family(family) if isinstance(family, str) else family
    p = np.asarray(params, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != fam.k or not np.isfinite(p).all():
        return False
    ok = True
    for i, a in enumerate(fam.activations):
        col = p[:, i]
        if a == SOFTPLUS:
            ok = ok and bool(np.all(col > 0.0))
        elif a == SIGMOID:
            ok = ok and bool(np.all((col > 0.0) & (col < 1.0)))
        elif a == INVERSE_GAMMA_ALPHA:
            ok = ok and bool(np.all(col >= 1.0))
    return ok


def _check_support(fam: FamilyDescriptor, y, trials):
    bad = ~np.isfinite(y)
    if fam.family_id == "logistic":
        bad |= (y != 0.0) & (y != 1.0)
    elif fam.family_id == "binomial":
        bad |= (y != np.round(y)) | (y < 0.0) | (y > trials)
    elif fam.family_id == "poisson":
        bad |= (y != np.round(y)) | (y < 0.0)
    elif fam.family_id in ("inverse-gaussian", "weibull", "inverse-gamma"):
        bad |= y <= 0.0
    if bad.any():
        i = int(np.argmax(bad))
        raise SupportError(
            f"observation {i}: y={y[i]!r} outside {fam.family_id} support ({fam.support})"
        )


def _nll_domain_check(fam: FamilyDescriptor, params):
    if params.ndim != 2 or params.shape[1] != fam.k:
        raise ContractError(
            f"{fam.family_id} expects params shape (batch, {fam.k}), got {params.shape}"
        )
    if not np.isfinite(params).all():
        raise NumericError("non-finite parameter values")
    positive = {
        "normal": [1], "logistic": [1], "poisson": [0],
        "inverse-gaussian": [0, 1], "weibull": [0, 1],
        "johnsons-su": [1, 2, 3], "inverse-gamma": [0, 1],
    }.get(fam.family_id, [])
    for i in positive:
        if np.any(params[:, i] <= 0.0):
            raise SupportError(f"{fam.family_id}: parameter {fam.param_names[i]} must be > 0")
    if fam.family_id == "binomial" and (np.any(params[:, 0] <= 0.0) or np.any(params[:, 0] >= 1.0)):
        raise SupportError("binomial: parameter p must lie strictly in (0, 1)")


def _prep(family, params, y, trials):
    fam = get_family(family) if isinstance(family, str) else family
    p = np.asarray(params, dtype=np.float64)
    yv = np.ascontiguousarray(y, dtype=np.float64)
    if yv.ndim != 1 or yv.shape[0] != p.shape[0]:
        raise ContractError(f"y shape {yv.shape} does not match params batch {p.shape[0]}")
    if trials is not None and fam.family_id != "binomial":
        raise ContractError("trials is only meaningful for the binomial family")
    if isinstance(trials, np.ndarray):
        raise ContractError("trials must be a scalar integer, not an array")
    try:
        n_trials = float(trials if trials is not None else 1)
    except TypeError:
        raise ContractError(f"trials must be a scalar integer, got {type(trials).__name__}") from None
    if fam.family_id == "binomial" and (n_trials < 1 or n_trials != int(n_trials)):
        raise ContractError(f"trials must be a positive integer, got {trials!r}")
    _nll_domain_check(fam, p)
    _check_support(fam, yv, n_trials)
    cols = [np.ascontiguousarray(p[:, i]) for i in range(fam.k)]
    return fam, cols, yv, n_trials


def nll_terms(family, params, y, trials=None, canonical=False):
    """Per-observation negative log-likelihood, one value per row."""
    fam, c, yv, n = _prep(family, params, y, trials)
    fid = fam.family_id
    if fid == "normal":
        return kernels.normal_nll(yv, c[0], c[1])
    if fid == "logistic":
        return kernels.logistic_nll(yv, c[0], c[1])
    if fid == "binomial":
        return kernels.binomial_nll(yv, c[0], n)
    if fid == "poisson":
        return kernels.poisson_nll(yv, c[0])
    if fid == "inverse-gaussian":
        return kernels.invgauss_nll(yv, c[0], c[1], canonical)
    if fid == "weibull":
        return kernels.weibull_nll(yv, c[0], c[1])
    if fid == "johnsons-su":
        fn = kernels.jsu_canonical_nll if canonical else kernels.jsu_nll
        return fn(yv, c[0], c[1], c[2], c[3])
    return kernels.invgamma_nll(yv, c[0], c[1])


def nll(family, params, y, trials=None, canonical=False) -> float:
    """Mean over observations of the per-observation NLL."""
    return float(np.mean(nll_terms(family, params, y, trials, canonical)))


def nll_grad(family, params, y, trials=None, canonical=False):
    """Per-observation d(NLL)/d(parameter), shape (batch, K).

    Gradients are taken w.r.t. the post-activation parameters; the chain
    rule through the output activation is the caller's job.
    """
    fam, c, yv, n = _prep(family, params, y, trials)
    fid = fam.family_id
    if fid == "normal":
        grads = kernels.normal_nll_grad(yv, c[0], c[1])
    elif fid == "logistic":
        grads = kernels.logistic_nll_grad(yv, c[0], c[1])
    elif fid == "binomial":
        grads = kernels.binomial_nll_grad(yv, c[0], n)
    elif fid == "poisson":
        grads = kernels.poisson_nll_grad(yv, c[0])
    elif fid == "inverse-gaussian":
        grads = kernels.invgauss_nll_grad(yv, c[0], c[1])
    elif fid == "weibull":
        grads = kernels.weibull_nll_grad(yv, c[0], c[1])
    elif fid == "johnsons-su":
        fn = kernels.jsu_canonical_nll_grad if canonical else kernels.jsu_nll_grad
        grads = fn(yv, c[0], c[1], c[2], c[3])
    else:
        grads = kernels.invgamma_nll_grad(yv, c[0], c[1])
    return np.stack(grads, axis=1)


_ALPHA_FLOOR = 1.0 + 1e-9


def mean(family, params, trials=None):
    """Distribution mean per observation.

    Johnson's S_U has no closed-form mean under the printed likelihood;
    here it deliberately returns the location parameter.  Inverse-gamma
    alphas in [1, 1 + 1e-9] (the activation can reach exactly 1) are
    lifted to 1 + 1e-9 so every activated parameter has a defined mean;
    alpha below 1 is an error.
    """
    fam = get_family(family) if isinstance(family, str) else family
    p = np.asarray(params, dtype=np.float64)
    _nll_domain_check(fam, p)
    fid = fam.family_id
    if fid in ("normal", "logistic", "inverse-gaussian", "johnsons-su"):
        return p[:, 0].copy()
    if fid == "binomial":
        n = float(trials if trials is not None else 1)
        return n * p[:, 0]
    if fid == "poisson":
        return p[:, 0].copy()
    if fid == "weibull":
        lam, beta = p[:, 0], p[:, 1]
        return lam * np.exp(log_gamma(1.0 + 1.0 / beta))
    alpha, beta = p[:, 0], p[:, 1]
    if np.any(alpha < 1.0):
        raise SupportError("inverse-gamma mean is undefined for alpha < 1")
    return beta / (np.maximum(alpha, _ALPHA_FLOOR) - 1.0)


def approx_params_from_mean(family, mean_preds, y):
    """Back-fill non-mean parameters so mean-only baselines score an NLL.

    Normal and logistic take scale from the sample standard deviation of
    ``y``; inverse-gamma converts (mean, variance-of-means) into (alpha,
    beta) via alpha = m^2/(v+2), beta = m^3/(v+1).
    """
    fam = get_family(family) if isinstance(family, str) else family
    m = np.asarray(mean_preds, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if m.ndim != 1:
        raise ContractError("mean_preds must be a vector")
    if fam.family_id == "normal":
        sd = float(np.std(yv, ddof=1))
        return np.stack([m, np.full_like(m, sd * sd)], axis=1)
    if fam.family_id == "logistic":
        sd = float(np.std(yv, ddof=1))
        return np.stack([m, np.full_like(m, sd)], axis=1)
    if fam.family_id == "inverse-gamma":
        v = float(np.var(m))
        alpha = m * m / (v + 2.0)
        beta = m * m * m / (v + 1.0)
        return np.stack([alpha, beta], axis=1)
    raise ContractError(
        f"approx_params_from_mean supports normal/logistic/inverse-gamma, not {fam.family_id}"
    )
