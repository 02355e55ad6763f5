"""Smoothing-core tests: confidence bounds, radius formulas, pipelines.

Clopper-Pearson is checked against an independent bisection of the
regularized incomplete beta function, and the radius formulas against the
normal quantile from scipy.  Pipeline tests use degenerate classifiers whose
vote counts are known exactly, so certificates have closed forms.
"""

import numpy as np
import pytest
from scipy.special import betainc, ndtri

from geosmooth.errorbound import ErrorBoundConfig, ErrorBoundEstimate
from geosmooth.errors import DomainError
from geosmooth.geometry import ParamBox
from geosmooth.imageops import Image, PreprocessConfig
from geosmooth.smoothing import (
    ABSTAIN,
    Certificate,
    SmoothingConfig,
    basespt,
    certify_l2_robust,
    clopper_pearson_lower,
    distspt,
    indivspt,
    norm_ppf,
    radius_l2,
    radius_param,
    smooth_predict_certify,
    smoothed_predict,
)


def cp_lower_bisect(k: int, n: int, alpha: float) -> float:
    """Oracle: alpha-quantile of Beta(k, n-k+1) by bisecting its CDF."""
    if k == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if betainc(k, n - k + 1, mid) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestClopperPearson:
    def test_all_success_closed_form(self):
        for n in (1, 7, 500, 10_000):
            for alpha in (0.001, 0.05, 0.5):
                assert clopper_pearson_lower(n, n, alpha) == pytest.approx(
                    alpha ** (1.0 / n), abs=1e-12
                )

    def test_zero_successes(self):
        assert clopper_pearson_lower(0, 50, 0.05) == 0.0

    def test_matches_beta_cdf_bisection(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 2000))
            k = int(rng.integers(1, n))
            alpha = float(rng.uniform(0.001, 0.2))
            assert clopper_pearson_lower(k, n, alpha) == pytest.approx(
                cp_lower_bisect(k, n, alpha), abs=1e-9
            )

    def test_monotone_in_k(self):
        vals = [clopper_pearson_lower(k, 100, 0.05) for k in range(0, 101, 10)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            clopper_pearson_lower(5, 10, 0.0)
        with pytest.raises(DomainError):
            clopper_pearson_lower(11, 10, 0.05)
        with pytest.raises(DomainError):
            clopper_pearson_lower(0, 0, 0.05)


class TestRadii:
    def test_l2_closed_form(self):
        expected = 0.5 * 0.3 * (ndtri(0.99) - ndtri(0.01))
        assert radius_l2(0.99, 0.01, 0.3) == pytest.approx(expected, abs=1e-12)

    def test_symmetric_probabilities_give_zero(self):
        for p in (0.3, 0.5, 0.8):
            assert radius_l2(p, p, 1.7) == 0.0

    def test_param_with_zero_rho_equals_l2(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            pa = float(rng.uniform(0.5, 0.999))
            pb = float(rng.uniform(0.0, 1.0 - pa))
            sigma = float(rng.uniform(0.01, 40.0))
            assert radius_param(pa, pb, sigma, 0.0) == pytest.approx(
                radius_l2(pa, pb, sigma), abs=1e-12
            )

    def test_rho_shrinks_and_exhausts(self):
        base = radius_param(0.9, 0.1, 1.0, 0.0)
        shrunk = radius_param(0.9, 0.1, 1.0, 0.05)
        assert 0.0 < shrunk < base
        # rho moves both bounds past each other: no radius left
        assert radius_param(0.9, 0.1, 1.0, 0.4) == 0.0
        assert radius_param(0.6, 0.4, 1.0, 0.61) == 0.0

    def test_diagonal_uses_smallest_std(self):
        # sigma_diag entries are variances; the inscribed ball of the
        # certified ellipsoid has radius min(sqrt(v)) * half_gap
        got = radius_param(0.95, 0.05, 999.0, 0.01, sigma_diag=(900.0, 400.0))
        want = radius_param(0.95, 0.05, 20.0, 0.01)
        assert got == pytest.approx(want, abs=1e-12)

    def test_norm_ppf_matches_scipy(self):
        rng = np.random.default_rng(2)
        for p in rng.uniform(1e-6, 1 - 1e-6, size=20):
            assert norm_ppf(float(p)) == pytest.approx(float(ndtri(p)), abs=1e-12)


class FixedVoteClassifier:
    """Labels a fixed periodic pattern, independent of the input batch."""

    def __init__(self, pattern):
        self.pattern = list(pattern)
        self.pos = 0
        self.num_classes = max(self.pattern) + 1

    def classify_batch(self, batch) -> np.ndarray:
        n = len(batch)
        out = [self.pattern[(self.pos + i) % len(self.pattern)] for i in range(n)]
        self.pos += n
        return np.array(out, dtype=np.int64)


class ConstantClassifier:
    def __init__(self, label: int, num_classes: int = 4):
        self.label = label
        self.num_classes = num_classes

    def classify_batch(self, batch) -> np.ndarray:
        return np.full(len(batch), self.label, dtype=np.int64)


def null_sampler(k):
    return np.zeros((k, 1, 2, 2))


class TestVoteCore:
    def test_exact_vote_counts(self):
        # 9-of-10 pattern: candidate from the first phase, then exactly
        # 90 of 100 fresh votes agree
        base = FixedVoteClassifier([1] * 9 + [0])
        pred, p = smooth_predict_certify(null_sampler, base, 10, 100, 0.05)
        assert pred == 1
        assert p == pytest.approx(clopper_pearson_lower(90, 100, 0.05), abs=1e-12)

    def test_abstains_on_split_votes(self):
        base = FixedVoteClassifier([0, 1])
        pred, p = smooth_predict_certify(null_sampler, base, 10, 100, 0.05)
        assert pred == ABSTAIN
        assert p <= 0.5

    def test_sample_count_validation(self):
        base = ConstantClassifier(0)
        with pytest.raises(DomainError):
            smooth_predict_certify(null_sampler, base, 0, 10, 0.05)

    def test_certify_l2_constant_classifier_closed_form(self):
        rng = np.random.default_rng(3)
        cfg = SmoothingConfig(
            sigma_gamma=1.0, n_gamma=10, alpha_gamma=0.05,
            sigma_delta=0.3, n_delta=200, alpha_delta=0.01,
        )
        x = Image(np.full((1, 2, 2), 0.5))
        pred, r = certify_l2_robust(x, ConstantClassifier(2), cfg, rng)
        assert pred == 2
        p = clopper_pearson_lower(200, 200, 0.01)
        assert r == pytest.approx(radius_l2(p, 1.0 - p, 0.3), abs=1e-12)


class TestCertificateInvariants:
    def test_abstention_carries_no_radius(self):
        with pytest.raises(DomainError):
            Certificate(ABSTAIN, 0.4, 1.0, "parameter", "heuristic")

    def test_describe_serializes(self):
        import json

        cfg = SmoothingConfig(sigma_gamma=30.0, n_gamma=100, alpha_gamma=0.01)
        cert = Certificate(3, 0.93, 12.0, "parameter", "distributional",
                           q_E=0.98, confidence=0.999, E_used=0.5, config=cfg)
        doc = cert.describe()
        assert doc["prediction"] == 3
        assert not doc["abstained"]
        assert doc["config"]["sigma_gamma"] == 30.0
        assert json.dumps(doc)

    def test_config_validation(self):
        with pytest.raises(DomainError):
            SmoothingConfig(sigma_gamma=0.0, n_gamma=10, alpha_gamma=0.05)
        with pytest.raises(DomainError):
            SmoothingConfig(sigma_gamma=1.0, n_gamma=0, alpha_gamma=0.05)
        with pytest.raises(DomainError):
            SmoothingConfig(sigma_gamma=1.0, n_gamma=10, alpha_gamma=1.0)
        with pytest.raises(DomainError):
            SmoothingConfig(sigma_gamma=1.0, n_gamma=10, alpha_gamma=0.05,
                            rho=1.0)
        with pytest.raises(DomainError):
            SmoothingConfig(sigma_gamma=1.0, n_gamma=10, alpha_gamma=0.05,
                            sigma_diag=(1.0, 0.0))


def tiny_image() -> Image:
    rng = np.random.default_rng(4)
    return Image(rng.uniform(0.2, 0.8, size=(1, 8, 8)))


class TestBaseSpt:
    def test_constant_classifier_covers_box(self):
        rng = np.random.default_rng(5)
        cfg = SmoothingConfig(sigma_gamma=10.0, n_gamma=50, alpha_gamma=0.01)
        box = ParamBox((-0.5,), (0.5,))
        cert = basespt(tiny_image(), ConstantClassifier(1), "rotation", cfg,
                       box, rng)
        assert cert.prediction == 1
        assert cert.guarantee == "heuristic"
        assert cert.clipped and cert.covers_box
        assert cert.radius == pytest.approx(box.circumradius(), abs=1e-12)

    def test_split_votes_abstain(self):
        rng = np.random.default_rng(6)
        cfg = SmoothingConfig(sigma_gamma=10.0, n_gamma=40, alpha_gamma=0.01)
        box = ParamBox((-5.0,), (5.0,))
        cert = basespt(tiny_image(), FixedVoteClassifier([0, 1]), "rotation",
                       cfg, box, rng)
        assert cert.prediction == ABSTAIN
        assert cert.radius == 0.0

    def test_smoothed_predict_matches_constant(self):
        rng = np.random.default_rng(7)
        cfg = SmoothingConfig(sigma_gamma=5.0, n_gamma=20, alpha_gamma=0.05)
        assert smoothed_predict(tiny_image(), ConstantClassifier(3),
                                "rotation", cfg, rng) == 3


def passing_estimate(E: float = 0.2, alpha_E: float = 0.01) -> ErrorBoundEstimate:
    return ErrorBoundEstimate(
        E=E, alpha_E=alpha_E, q_E_lower=0.995, confidence=0.999,
        eps_max_observed=E / 2, samples_used=(100, 100),
    )


class TestDistSpt:
    def test_degenerate_success_closed_form(self):
        # constant base: every inner certificate is the full-confidence
        # closed form, so the outer certificate is one too
        rng = np.random.default_rng(8)
        cfg = SmoothingConfig(
            sigma_gamma=20.0, n_gamma=50, alpha_gamma=0.01,
            sigma_delta=0.5, n_delta=60, alpha_delta=0.01,
        )
        est = passing_estimate(E=0.2, alpha_E=0.01)
        box = ParamBox((-30.0,), (30.0,))
        inner_p = clopper_pearson_lower(60, 60, 0.01)
        assert radius_l2(inner_p, 1.0 - inner_p, 0.5) >= est.E

        cert = distspt(tiny_image(), ConstantClassifier(2), "rotation", cfg,
                       box, est, rng, pre=PreprocessConfig())
        assert cert.prediction == 2
        assert cert.guarantee == "distributional"
        assert cert.q_E == pytest.approx(0.995)
        assert cert.E_used == pytest.approx(0.2)
        p = clopper_pearson_lower(50, 50, 0.01)
        rho = cfg.alpha_delta + est.alpha_E
        want = radius_param(p, 1.0 - p, 20.0, rho)
        assert cert.radius == pytest.approx(min(want, box.circumradius()),
                                            abs=1e-12)

    def test_short_inner_radius_abstains(self):
        # E larger than any attainable inner radius: every inner vote is the
        # sentinel, the outer candidate is invalid
        rng = np.random.default_rng(9)
        cfg = SmoothingConfig(
            sigma_gamma=20.0, n_gamma=30, alpha_gamma=0.01,
            sigma_delta=0.5, n_delta=40, alpha_delta=0.01,
        )
        est = passing_estimate(E=50.0)
        box = ParamBox((-30.0,), (30.0,))
        cert = distspt(tiny_image(), ConstantClassifier(2), "rotation", cfg,
                       box, est, rng)
        assert cert.prediction == ABSTAIN
        assert cert.reason == "insufficient vote confidence"

    def test_large_rho_exhausts_radius(self):
        rng = np.random.default_rng(10)
        cfg = SmoothingConfig(
            sigma_gamma=20.0, n_gamma=30, alpha_gamma=0.01,
            sigma_delta=0.5, n_delta=60, alpha_delta=0.01, rho=0.6,
        )
        est = passing_estimate(E=0.2)
        box = ParamBox((-30.0,), (30.0,))
        cert = distspt(tiny_image(), ConstantClassifier(2), "rotation", cfg,
                       box, est, rng)
        assert cert.prediction == ABSTAIN
        assert cert.reason == "proxy correction exhausted the probability gap"

    def test_random_attack_only_propagates(self):
        rng = np.random.default_rng(11)
        cfg = SmoothingConfig(
            sigma_gamma=20.0, n_gamma=30, alpha_gamma=0.01,
            sigma_delta=0.5, n_delta=60, alpha_delta=0.01,
        )
        est = ErrorBoundEstimate(
            E=0.2, alpha_E=0.01, q_E_lower=0.995, confidence=0.999,
            eps_max_observed=0.1, samples_used=(100, 100),
            random_attack_only=True,
        )
        box = ParamBox((-30.0,), (30.0,))
        cert = distspt(tiny_image(), ConstantClassifier(2), "rotation", cfg,
                       box, est, rng)
        assert cert.random_attack_only


class TestIndivSpt:
    def test_impossible_E_is_rejected_before_voting(self):
        rng = np.random.default_rng(12)
        cfg = SmoothingConfig(
            sigma_gamma=10.0, n_gamma=20, alpha_gamma=0.01,
            sigma_delta=0.4, n_delta=30, alpha_delta=0.01,
        )
        err_cfg = ErrorBoundConfig(
            kind="rotation",
            box=ParamBox((-5.0,), (5.0,)),
            sigma_gamma=10.0,
            n_splits=2,
            n_beta=20,
            alpha_E=0.05,
            refinements=1,
            preprocess=PreprocessConfig(quantize=True),
        )
        from geosmooth.imageops import apply_transform, quantize

        xp = quantize(apply_transform(tiny_image(), "rotation",
                                      np.array([2.0])))
        cert = indivspt(xp, ConstantClassifier(0), "rotation", cfg, err_cfg,
                        1e-9, rng)
        assert cert.prediction == ABSTAIN
        assert "E validation failed" in cert.reason
        assert cert.E_used == pytest.approx(1e-9)
        assert cert.guarantee == "individual"
