import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, settings
from hypothesis import strategies as st

from namlss import families
from namlss.errors import ContractError, SupportError
from namlss.rng import stream

ALL_FAMILIES = sorted(families.FAMILIES)

# frozen single-point values, precomputed with mpmath at 50 decimal digits
FROZEN_NLL = {
    # family: (params row, y, trials, canonical, value-hex)
    "normal": ([1.1, 0.49], 0.9, None, False, "0x1.34c6e40670f61p-1"),
    "logistic-y0": ([0.2, 0.7], 0.0, None, False, "0x1.1ef48f836dc4fp-1"),
    "logistic-y1": ([0.2, 0.7], 1.0, None, False, "0x1.1b7240bcc3f65p-2"),
    "binomial": ([0.35], 3.0, 7, False, "0x1.51374b61318dap+0"),
    "poisson": ([2.6], 4.0, None, False, "0x1.f4bcf18e7c5d1p+0"),
    "inverse-gaussian": ([2.2, 0.9], 1.7, None, False, "0x1.0fc83fe994a00p-4"),
    "inverse-gaussian-c": ([2.2, 0.9], 1.7, None, True, "0x1.c7fef36eb7327p+0"),
    "weibull": ([1.4, 2.3], 1.9, None, False, "0x1.200772f333613p+0"),
    "johnsons-su": ([-0.4, 1.3, 0.8, 1.1], 0.3, None, False, "0x1.3a5052c817beap+0"),
    "johnsons-su-c": ([-0.4, 1.3, 0.8, 1.1], 0.3, None, True, "0x1.566e174036bd0p+1"),
    "inverse-gamma": ([2.4, 1.3], 0.8, None, False, "0x1.d06185631dd9ap-2"),
}


def _rand_valid(fam, n, seed):
    """Random post-activation parameters + in-support responses."""
    gen = stream(seed, "valid", fam.family_id)
    raw = gen.normal(0.0, 1.0, (n, fam.k))
    params = families.activate(fam, raw)
    if fam.family_id == "normal":
        y = gen.normal(0, 2, n)
    elif fam.family_id == "logistic":
        y = (gen.random(n) < 0.5).astype(float)
    elif fam.family_id == "binomial":
        y = np.floor(gen.random(n) * 8)  # trials=7 -> y in 0..7
    elif fam.family_id == "poisson":
        y = np.floor(gen.random(n) * 6)
    else:
        y = gen.random(n) * 3 + 0.05
    trials = 7 if fam.family_id == "binomial" else None
    return params, y, trials


class TestDescriptors:
    def test_catalog(self):
        assert ALL_FAMILIES == ["binomial", "inverse-gamma", "inverse-gaussian",
                                "johnsons-su", "logistic", "normal", "poisson",
                                "weibull"]

    def test_param_counts(self):
        k = {f: families.get_family(f).k for f in ALL_FAMILIES}
        assert k == {"normal": 2, "logistic": 2, "binomial": 1, "poisson": 1,
                     "inverse-gaussian": 2, "weibull": 2, "johnsons-su": 4,
                     "inverse-gamma": 2}

    def test_unknown_family_lists_choices(self):
        with pytest.raises(ContractError, match="binomial"):
            families.get_family("nosuch")


class TestFrozenValues:
    @pytest.mark.parametrize("key", sorted(FROZEN_NLL))
    def test_single_point(self, key):
        row, y, trials, canonical, want_hex = FROZEN_NLL[key]
        fam = key.replace("-y0", "").replace("-y1", "").replace("-c", "")
        got = families.nll_terms(fam, np.array([row]), np.array([y]),
                                 trials=trials, canonical=canonical)[0]
        assert abs(got - float.fromhex(want_hex)) < 1e-13


class TestAgainstScipy:
    """Canonically normalized forms must equal -logpdf of the references."""

    def test_normal(self):
        params, y, _ = _rand_valid(families.get_family("normal"), 50, 1)
        want = -sps.norm.logpdf(y, loc=params[:, 0], scale=np.sqrt(params[:, 1]))
        got = families.nll_terms("normal", params, y)
        assert np.abs(got - want).max() < 1e-10

    def test_poisson(self):
        params, y, _ = _rand_valid(families.get_family("poisson"), 50, 2)
        want = -sps.poisson.logpmf(y, mu=params[:, 0])
        got = families.nll_terms("poisson", params, y)
        assert np.abs(got - want).max() < 1e-10

    def test_binomial(self):
        params, y, trials = _rand_valid(families.get_family("binomial"), 50, 3)
        want = -sps.binom.logpmf(y, n=trials, p=params[:, 0])
        got = families.nll_terms("binomial", params, y, trials=trials)
        assert np.abs(got - want).max() < 1e-10

    def test_weibull(self):
        params, y, _ = _rand_valid(families.get_family("weibull"), 50, 4)
        want = -sps.weibull_min.logpdf(y, params[:, 1], scale=params[:, 0])
        got = families.nll_terms("weibull", params, y)
        assert np.abs(got - want).max() < 1e-9

    def test_inverse_gaussian_canonical(self):
        params, y, _ = _rand_valid(families.get_family("inverse-gaussian"), 50, 5)
        mu, sig = params[:, 0], params[:, 1]
        want = -sps.invgauss.logpdf(y, mu / sig, scale=sig)
        got = families.nll_terms("inverse-gaussian", params, y, canonical=True)
        assert np.abs(got - want).max() < 1e-9

    def test_johnsons_su_canonical(self):
        params, y, _ = _rand_valid(families.get_family("johnsons-su"), 50, 6)
        mu, sig, om, bs = params.T
        want = -sps.johnsonsu.logpdf(y, a=bs, b=om, loc=mu, scale=sig)
        got = families.nll_terms("johnsons-su", params, y, canonical=True)
        assert np.abs(got - want).max() < 1e-9

    def test_inverse_gamma(self):
        params, y, _ = _rand_valid(families.get_family("inverse-gamma"), 50, 7)
        want = -sps.invgamma.logpdf(y, params[:, 0], scale=params[:, 1])
        got = families.nll_terms("inverse-gamma", params, y)
        assert np.abs(got - want).max() < 1e-9

    def test_logistic_is_bernoulli_of_logistic_cdf(self):
        params, y, _ = _rand_valid(families.get_family("logistic"), 50, 8)
        mu, s = params[:, 0], params[:, 1]
        f = sps.logistic.cdf(y, loc=mu, scale=s)
        want = -(y * np.log(f) + (1 - y) * np.log(1 - f))
        got = families.nll_terms("logistic", params, y)
        assert np.abs(got - want).max() < 1e-10


class TestGradients:
    @pytest.mark.parametrize("fam_id", ALL_FAMILIES)
    def test_param_gradients_match_fd(self, fam_id):
        fam = families.get_family(fam_id)
        params, y, trials = _rand_valid(fam, 25, 11)
        grads = families.nll_grad(fam, params, y, trials=trials)
        h = 1e-5
        for k in range(fam.k):
            shift = np.zeros_like(params)
            shift[:, k] = h
            up = families.nll_terms(fam, params + shift, y, trials=trials)
            dn = families.nll_terms(fam, params - shift, y, trials=trials)
            fd = (up - dn) / (2 * h)
            rel = np.abs(grads[:, k] - fd) / np.maximum(np.abs(grads[:, k]) + np.abs(fd), 1e-6)
            assert rel.max() < 1e-4, (fam_id, k, rel.max())

    @pytest.mark.parametrize("fam_id", ["inverse-gaussian", "johnsons-su"])
    def test_canonical_gradients_match_fd(self, fam_id):
        fam = families.get_family(fam_id)
        params, y, _ = _rand_valid(fam, 25, 12)
        grads = families.nll_grad(fam, params, y, canonical=True)
        h = 1e-5
        for k in range(fam.k):
            shift = np.zeros_like(params)
            shift[:, k] = h
            up = families.nll_terms(fam, params + shift, y, canonical=True)
            dn = families.nll_terms(fam, params - shift, y, canonical=True)
            fd = (up - dn) / (2 * h)
            rel = np.abs(grads[:, k] - fd) / np.maximum(np.abs(grads[:, k]) + np.abs(fd), 1e-6)
            assert rel.max() < 1e-4, (fam_id, k, rel.max())

    def test_activation_grad_matches_fd(self):
        for fam_id in ALL_FAMILIES:
            fam = families.get_family(fam_id)
            eta = stream(5, "eta", fam_id).normal(0, 1.5, (40, fam.k))
            grad = families.activation_grad(fam, eta)
            h = 1e-6
            fd = (families.activate(fam, eta + h) - families.activate(fam, eta - h)) / (2 * h)
            rel = np.abs(grad - fd) / np.maximum(np.abs(grad) + np.abs(fd), 1e-6)
            assert rel.max() < 1e-5, fam_id


class TestActivations:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_activated_params_always_valid(self, seed):
        gen = np.random.default_rng(seed)
        for fam_id in ALL_FAMILIES:
            fam = families.get_family(fam_id)
            raw = gen.normal(0, 5, (8, fam.k))
            params = families.activate(fam, raw)
            assert families.constraint_ok(fam, params), fam_id

    def test_canonical_flag_shifts_by_constant_only(self):
        # the inverse-gaussian canonical form differs from the compact one
        # by terms free of the parameters
        fam = families.get_family("inverse-gaussian")
        params, y, _ = _rand_valid(fam, 30, 13)
        base = families.nll_terms(fam, params, y, canonical=False)
        full = families.nll_terms(fam, params, y, canonical=True)
        want = 0.5 * np.log(2 * np.pi) + 1.5 * np.log(y)
        assert np.abs((full - base) - want).max() < 1e-12


class TestSupport:
    def test_weibull_rejects_nonpositive_named_row(self):
        params = np.array([[1.0, 2.0], [1.0, 2.0]])
        y = np.array([1.0, -0.5])
        with pytest.raises(SupportError, match="observation 1"):
            families.nll_terms("weibull", params, y)

    def test_logistic_rejects_nonbinary(self):
        params = np.array([[0.0, 1.0]])
        with pytest.raises(SupportError):
            families.nll_terms("logistic", params, np.array([0.37]))

    def test_binomial_rejects_y_above_trials(self):
        params = np.array([[0.5]])
        with pytest.raises(SupportError):
            families.nll_terms("binomial", params, np.array([4.0]), trials=3)

    def test_poisson_rejects_negative_counts(self):
        params = np.array([[2.0]])
        with pytest.raises(SupportError):
            families.nll_terms("poisson", params, np.array([-1.0]))

    def test_trials_on_wrong_family_rejected(self):
        with pytest.raises(ContractError):
            families.nll_terms("normal", np.array([[0.0, 1.0]]), np.array([0.0]), trials=5)

    def test_array_trials_rejected_with_clear_message(self):
        with pytest.raises(ContractError, match="scalar"):
            families.nll_terms("binomial", np.array([[0.5]]), np.array([1.0]),
                               trials=np.array([2.0]))


class TestMean:
    def test_normal_and_poisson_location(self):
        assert families.mean("normal", np.array([[3.0, 2.0]]))[0] == 3.0
        assert families.mean("poisson", np.array([[2.7]]))[0] == 2.7

    def test_binomial_scales_by_trials(self):
        got = families.mean("binomial", np.array([[0.25]]), trials=8)
        assert got[0] == 2.0

    def test_weibull_matches_scipy(self):
        params = np.array([[1.4, 2.3], [0.8, 0.9]])
        want = [sps.weibull_min.mean(b, scale=a) for a, b in params]
        got = families.mean("weibull", params)
        assert np.abs(got - np.array(want)).max() < 1e-10

    def test_inverse_gamma_floor_engaged_near_one(self):
        # the output activation can reach alpha exactly 1; the mean must
        # still be defined there
        params = np.array([[1.0, 2.0]])
        got = families.mean("inverse-gamma", params)
        assert np.isfinite(got[0]) and got[0] > 0

    def test_inverse_gamma_below_one_rejected(self):
        with pytest.raises(SupportError):
            families.mean("inverse-gamma", np.array([[0.5, 2.0]]))

    def test_inverse_gamma_regular_value(self):
        got = families.mean("inverse-gamma", np.array([[3.0, 4.0]]))
        assert abs(got[0] - 2.0) < 1e-15


class TestApproxParams:
    def test_normal_uses_sample_sd(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        preds = np.array([2.0, 2.2, 2.8, 3.0])
        params = families.approx_params_from_mean("normal", preds, y)
        assert np.array_equal(params[:, 0], preds)
        assert np.allclose(params[:, 1], np.std(y, ddof=1) ** 2)

    def test_unsupported_family_rejected(self):
        with pytest.raises(ContractError):
            families.approx_params_from_mean("weibull", np.ones(3), np.ones(3))

    def test_inverse_gamma_mapping(self):
        y = np.abs(np.random.default_rng(2).normal(2, 0.5, 40)) + 0.1
        preds = y * 1.05
        params = families.approx_params_from_mean("inverse-gamma", preds, y)
        v = np.var(preds)
        assert np.allclose(params[:, 0], preds ** 2 / (v + 2))
        assert np.allclose(params[:, 1], preds ** 3 / (v + 1))


class TestLogGammaWrapper:
    def test_scalar_and_array(self):
        assert families.log_gamma(1.0) == 0.0
        got = families.log_gamma(np.array([1.0, 2.0]))
        assert np.array_equal(got, [0.0, 0.0])

    def test_domain_error(self):
        with pytest.raises(SupportError):
            families.log_gamma(-1.0)
        with pytest.raises(SupportError):
            families.log_gamma(np.array([2.0, 0.0]))
