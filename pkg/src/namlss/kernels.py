"""Hot numeric kernels, written once in numba-compatible numpy.

Every function here is decorated with :func:`namlss.backend.kernel`: on
the numba lane it is ``@njit``-compiled (and may call other kernels); on
the numpy lane it runs as plain vectorized numpy.  Inputs are contiguous
float64 arrays unless noted.  Per-observation negative log-likelihood
kernels return one value per row; their gradient twins return one array
per distribution parameter, differentiated w.r.t. that (post-activation)
parameter.
"""

import numpy as np

from .backend import kernel

_TINY = 2.2250738585072014e-308  # smallest normal float64
_ONE_MINUS_EPS = 0.9999999999999999
_HALF_LOG_2PI = 0.9189385332046727

# Lanczos approximation, g=7, 9 coefficients, refit by high-precision least
# squares on [0, 30]; float64 absolute error stays below 2e-11 on [1e-3, 1e4].
_LANCZOS_COEF = np.array(
    [
        0.9999999999999802,
        676.5203681218901,
        -1259.1392167226911,
        771.3234287815791,
        -176.61502918409298,
        12.507343339562519,
        -0.13857118390760886,
        1.0049273714343276e-05,
        1.3172214817004552e-07,
    ]
)


@kernel
def log_gamma(x):
    """log Gamma(x) for x > 0 via the Lanczos series.

    Arguments below 0.5 are shifted up by the recurrence
    Gamma(x) = Gamma(x+1)/x before evaluating the series.
    """
    shift = x < 0.5
    xs = np.where(shift, x + 1.0, x)
    z = xs - 1.0
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for i in range(1, 9):
        acc = acc + _LANCZOS_COEF[i] / (z + i)
    t = z + 7.5
    out = _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)
    return np.where(shift, out - np.log(x), out)


@kernel
def digamma(x):
    """Gamma'(x)/Gamma(x) for x > 0.

    Shifts the argument above 10 with psi(x) = psi(x+1) - 1/x, then
    applies the asymptotic expansion through the x^-12 term.
    """
    acc = np.zeros_like(x)
    xs = x + 0.0
    for _ in range(10):
        low = xs < 10.0
        acc = acc - np.where(low, 1.0 / xs, 0.0)
        xs = np.where(low, xs + 1.0, xs)
    inv2 = 1.0 / (xs * xs)
    series = (
        np.log(xs)
        - 0.5 / xs
        - inv2
        * (
            1.0 / 12.0
            - inv2
            * (
                1.0 / 120.0
                - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))
            )
        )
    )
    return acc + series


@kernel
def softplus(x):
    """Overflow-safe log(1 + exp(x)), floored at the smallest normal float."""
    sp = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return np.maximum(sp, _TINY)


@kernel
def sigmoid(x):
    """Overflow-safe logistic function, clipped into the open unit interval."""
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.minimum(np.maximum(s, _TINY), _ONE_MINUS_EPS)


@kernel
def alpha_activation(x):
    """Piecewise map softplus(x) if > 1 else its reciprocal; output >= 1."""
    sp = softplus(x)
    return np.where(sp > 1.0, sp, 1.0 / sp)


@kernel
def alpha_activation_grad(x):
    """Derivative of :func:`alpha_activation` (softplus branch convention at the kink)."""
    sp = softplus(x)
    sg = sigmoid(x)
    return np.where(sp > 1.0, sg, -sg / (sp * sp))


# ---------------------------------------------------------------------------
# dense layer primitives


@kernel
def dense_forward(x, w, b):
    """Affine map x @ w + b with w of shape (in, out)."""
    return np.dot(x, w) + b


@kernel
def relu(pre):
    return np.maximum(pre, 0.0)


@kernel
def relu_backward(grad, pre):
    return np.where(pre > 0.0, grad, 0.0)


@kernel
def dense_backward(x, w, grad):
    """Gradients of an affine layer: returns (d_input, d_w, d_b)."""
    dx = np.dot(grad, w.T)
    dw = np.dot(x.T, grad)
    db = np.sum(grad, axis=0)
    return dx, dw, db


# ---------------------------------------------------------------------------
# per-observation negative log-likelihoods and their parameter gradients


@kernel
def normal_nll(y, mu, s2):
    """0.5 log(2 pi s2) + (y - mu)^2 / (2 s2), one value per observation."""
    r = y - mu
    return 0.5 * np.log(2.0 * np.pi * s2) + r * r / (2.0 * s2)


@kernel
def normal_nll_grad(y, mu, s2):
    r = y - mu
    gmu = -r / s2
    gs2 = 0.5 / s2 - r * r / (2.0 * s2 * s2)
    return gmu, gs2


@kernel
def logistic_nll(y, mu, s):
    """Bernoulli cross-entropy of the logistic cdf evaluated at (y - mu)/s."""
    f = sigmoid((y - mu) / s)
    return -(y * np.log(f) + (1.0 - y) * np.log(1.0 - f))


@kernel
def logistic_nll_grad(y, mu, s):
    z = (y - mu) / s
    f = sigmoid(z)
    gmu = (y - f) / s
    gs = (y - f) * z / s
    return gmu, gs


@kernel
def binomial_nll(y, p, trials):
    """-[y log p + (n-y) log(1-p) + log C(n, y)] with n = trials."""
    log_comb = (
        log_gamma(np.full_like(y, trials + 1.0))
        - log_gamma(y + 1.0)
        - log_gamma(trials - y + 1.0)
    )
    return -(y * np.log(p) + (trials - y) * np.log(1.0 - p) + log_comb)


@kernel
def binomial_nll_grad(y, p, trials):
    return (-y / p + (trials - y) / (1.0 - p),)


@kernel
def poisson_nll(y, lam):
    return lam - y * np.log(lam) + log_gamma(y + 1.0)


@kernel
def poisson_nll_grad(y, lam):
    return (1.0 - y / lam,)


@kernel
def invgauss_nll(y, mu, sig, canonical):
    """-0.5 log(sig) + sig (y - mu)^2 / (2 mu^2 y); canonical adds the dropped constants."""
    r = y - mu
    out = -0.5 * np.log(sig) + sig * r * r / (2.0 * mu * mu * y)
    if canonical:
        out = out + _HALF_LOG_2PI + 1.5 * np.log(y)
    return out


@kernel
def invgauss_nll_grad(y, mu, sig):
    r = y - mu
    gmu = -sig * r / (mu * mu * mu)
    gsig = -0.5 / sig + r * r / (2.0 * mu * mu * y)
    return gmu, gsig


@kernel
def weibull_nll(y, lam, beta):
    pw = (y / lam) ** beta
    return -np.log(beta) + beta * np.log(lam) + pw - (beta - 1.0) * np.log(y)


@kernel
def weibull_nll_grad(y, lam, beta):
    pw = (y / lam) ** beta
    glam = (beta / lam) * (1.0 - pw)
    gbeta = -1.0 / beta + np.log(lam) + pw * np.log(y / lam) - np.log(y)
    return glam, gbeta


@kernel
def jsu_nll(y, mu, sig, om, bs):
    """As-printed form: -log(bs/om) + 0.5 log(2 pi) + A (u + v) with A = bs^2/(2 om^2)."""
    r = y - mu
    a = bs * bs / (2.0 * om * om)
    u = r * r / (sig * sig)
    v = np.log1p(r * r / (om * om * sig * sig))
    return -np.log(bs) + np.log(om) + _HALF_LOG_2PI + a * (u + v)


@kernel
def jsu_nll_grad(y, mu, sig, om, bs):
    r = y - mu
    a = bs * bs / (2.0 * om * om)
    u = r * r / (sig * sig)
    v = np.log1p(r * r / (om * om * sig * sig))
    denom = om * om * sig * sig + r * r
    gmu = a * (-2.0 * r / (sig * sig) - 2.0 * r / denom)
    gsig = a * (-2.0 * r * r / (sig * sig * sig) - 2.0 * r * r / (sig * denom))
    gom = 1.0 / om - (2.0 * a / om) * (u + v) - 2.0 * a * r * r / (om * denom)
    gbs = -1.0 / bs + (bs / (om * om)) * (u + v)
    return gmu, gsig, gom, gbs


@kernel
def jsu_canonical_nll(y, mu, sig, om, bs):
    """Textbook density: z = (y - mu)/sig, t = bs + om asinh(z)."""
    z = (y - mu) / sig
    t = bs + om * np.arcsinh(z)
    return -np.log(om) + np.log(sig) + _HALF_LOG_2PI + 0.5 * np.log1p(z * z) + 0.5 * t * t


@kernel
def jsu_canonical_nll_grad(y, mu, sig, om, bs):
    z = (y - mu) / sig
    az = np.arcsinh(z)
    t = bs + om * az
    dz = z / (1.0 + z * z) + t * om / np.sqrt(1.0 + z * z)
    gmu = -dz / sig
    gsig = 1.0 / sig - dz * z / sig
    gom = -1.0 / om + t * az
    gbs = t
    return gmu, gsig, gom, gbs


@kernel
def invgamma_nll(y, a, b):
    return (a + 1.0) * np.log(y) + log_gamma(a) - a * np.log(b) + b / y


@kernel
def invgamma_nll_grad(y, a, b):
    ga = np.log(y) + digamma(a) - np.log(b)
    gb = -a / b + 1.0 / y
    return ga, gb


# ---------------------------------------------------------------------------
# optimizer


@kernel
def adam_update(p, g, m, v, t, lr, b1, b2, eps):
    """One Adam step with bias correction, in place on flat float64 views."""
    m[:] = b1 * m + (1.0 - b1) * g
    v[:] = b2 * v + (1.0 - b2) * g * g
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    p[:] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
