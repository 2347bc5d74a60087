import numpy as np
import pytest

from namlss import kernels

# (criterion number, "PASS"/"FAIL", detail) tuples recorded by test_acceptance
ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger jit compilation once so individual test timings stay honest."""
    x = np.array([0.3, -1.2, 2.0])
    pos = np.array([0.5, 1.5, 9.0])
    y = np.array([0.7, 1.1, 2.0])
    kernels.softplus(x)
    kernels.sigmoid(x)
    kernels.alpha_activation(x)
    kernels.alpha_activation_grad(x)
    kernels.log_gamma(pos)
    kernels.digamma(pos)
    kernels.relu(x)
    kernels.relu_backward(x, x)
    w = np.ones((3, 2))
    kernels.dense_forward(x.reshape(1, 3), w, np.zeros(2))
    kernels.dense_backward(x.reshape(1, 3), w, np.ones((1, 2)))
    kernels.normal_nll(y, y, pos)
    kernels.normal_nll_grad(y, y, pos)
    kernels.logistic_nll(np.array([0.0, 1.0, 1.0]), x, pos)
    kernels.logistic_nll_grad(np.array([0.0, 1.0, 1.0]), x, pos)
    kernels.binomial_nll(y, np.array([0.2, 0.5, 0.8]), 7.0)
    kernels.binomial_nll_grad(y, np.array([0.2, 0.5, 0.8]), 7.0)
    kernels.poisson_nll(np.round(y), pos)
    kernels.poisson_nll_grad(np.round(y), pos)
    kernels.invgauss_nll(y, pos, pos, False)
    kernels.invgauss_nll_grad(y, pos, pos)
    kernels.weibull_nll(y, pos, pos)
    kernels.weibull_nll_grad(y, pos, pos)
    kernels.jsu_nll(y, x, pos, pos, pos)
    kernels.jsu_nll_grad(y, x, pos, pos, pos)
    kernels.jsu_canonical_nll(y, x, pos, pos, pos)
    kernels.jsu_canonical_nll_grad(y, x, pos, pos, pos)
    kernels.invgamma_nll(y, pos + 1, pos)
    kernels.invgamma_nll_grad(y, pos + 1, pos)
    p = np.zeros(4)
    kernels.adam_update(p, np.ones(4), np.zeros(4), np.zeros(4),
                        1.0, 1e-3, 0.9, 0.999, 1e-8)
    yield


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number}: {status} — {detail}")
