"""Randomized-smoothing certification over pixels and transform parameters.

A smoothed classifier takes the majority vote of a base classifier under
random perturbations; when the top vote's lower confidence bound is large
enough, the prediction provably cannot change within a radius.  Pixel-space
smoothing (Gaussian noise, l2 radius) and parameter-space smoothing (noise on
the transform parameter) share the same machinery; the parameter variant
additionally shrinks both class-probability bounds by a proxy-error
allowance rho because the evaluated classifier only matches the ideal
composed classifier up to the interpolation-error event.

Three certification pipelines build on this:

* ``basespt``   smooths directly through the transform; fast but the radius
                is heuristic for non-composable transforms (it is sound for
                exactly composable families such as volume scaling).
* ``distspt``   pairs an inner pixel-space certificate of radius E with outer
                parameter smoothing; sound for inputs from the distribution
                the error bound E was verified on.
* ``indivspt``  validates E for one specific observed input via the inverse
                over-approximation, then certifies that input itself.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._stats import clopper_pearson_lower, norm_ppf
from .errorbound import (
    ErrorBoundConfig,
    ErrorBoundEstimate,
    compute_inverses,
    estimate_E_individual,
)
from .errors import DomainError
from .geometry import PARAM_DIM, ParamBox
from .imageops import Image, PreprocessConfig, apply_preprocess, apply_transform, volume_scale

ABSTAIN = -1

_PIPELINE_BATCH = 256


@dataclass(frozen=True)
class SmoothingConfig:
    sigma_gamma: float
    n_gamma: int
    alpha_gamma: float
    sigma_delta: float = 0.3
    n_delta: int = 200
    alpha_delta: float = 0.001
    rho: float | None = None  # None: derived as alpha_delta + alpha_E
    sigma_diag: tuple | None = None  # per-dimension parameter variances

    def __post_init__(self):
        if self.sigma_gamma <= 0 or self.sigma_delta <= 0:
            raise DomainError("smoothing noise levels must be positive")
        if self.n_gamma < 1 or self.n_delta < 1:
            raise DomainError("sample counts must be >= 1")
        for a in (self.alpha_gamma, self.alpha_delta):
            if not 0 < a < 1:
                raise DomainError("alpha levels must be in (0, 1)")
        if self.rho is not None and not 0 <= self.rho < 1:
            raise DomainError("rho must be in [0, 1)")
        if self.sigma_diag is not None and any(v <= 0 for v in self.sigma_diag):
            raise DomainError("sigma_diag entries must be positive")

    def describe(self) -> dict:
        return {
            "sigma_gamma": self.sigma_gamma,
            "n_gamma": self.n_gamma,
            "alpha_gamma": self.alpha_gamma,
            "sigma_delta": self.sigma_delta,
            "n_delta": self.n_delta,
            "alpha_delta": self.alpha_delta,
            "rho": self.rho,
            "sigma_diag": list(self.sigma_diag) if self.sigma_diag else None,
        }


@dataclass(frozen=True)
class Certificate:
    prediction: int
    p_A_lower: float
    radius: float
    level: str  # pixel_l2 | parameter
    guarantee: str  # heuristic | distributional | individual
    random_attack_only: bool = False
    clipped: bool = False  # radius reduced to the parameter-box cover
    covers_box: bool = False
    q_E: float | None = None
    confidence: float | None = None
    E_used: float | None = None
    reason: str | None = None
    config: SmoothingConfig | None = None
    seed: int | None = None
    elapsed_s: float | None = None

    def __post_init__(self):
        if self.prediction == ABSTAIN and self.radius > 0:
            raise DomainError("abstentions carry no radius")

    def describe(self) -> dict:
        return {
            "prediction": self.prediction,
            "abstained": self.prediction == ABSTAIN,
            "p_A_lower": self.p_A_lower,
            "radius": self.radius,
            "level": self.level,
            "guarantee": self.guarantee,
            "random_attack_only": self.random_attack_only,
            "clipped": self.clipped,
            "covers_box": self.covers_box,
            "q_E": self.q_E,
            "confidence": self.confidence,
            "E_used": self.E_used,
            "reason": self.reason,
            "config": self.config.describe() if self.config else None,
            "seed": self.seed,
            "elapsed_s": self.elapsed_s,
        }


# ---------------------------------------------------------------------------
# radius formulas


def radius_l2(p_a_lower: float, p_b_upper: float, sigma: float) -> float:
    """Certified l2 radius; may be <= 0, in which case the caller abstains."""
    return 0.5 * sigma * (norm_ppf(p_a_lower) - norm_ppf(p_b_upper))


def radius_param(
    p_a_lower: float,
    p_b_upper: float,
    sigma: float,
    rho: float,
    sigma_diag=None,
) -> float:
    """Parameter-space radius with the proxy-error correction rho.

    Both probability bounds move toward 1/2 by rho before the Gaussian
    quantiles are taken.  With per-dimension variances the certified set is
    an ellipsoid; the returned value is the radius of its inscribed Euclidean
    ball (the smallest axis), so callers can keep comparing a single number
    against parameter norms.
    """
    pa = p_a_lower - rho
    pb = p_b_upper + rho
    if pa <= 0.0 or pb >= 1.0 or pa <= pb:
        return 0.0
    half_gap = 0.5 * (norm_ppf(pa) - norm_ppf(pb))
    if sigma_diag is not None:
        # entries are variances; the smallest axis uses the smallest std
        return min(float(v) ** 0.5 for v in sigma_diag) * half_gap
    return sigma * half_gap


# ---------------------------------------------------------------------------
# Monte-Carlo smoothing core


def _majority(labels: np.ndarray) -> int:
    counts = np.bincount(labels[labels >= 0])
    if counts.size == 0:
        return 0
    return int(np.argmax(counts))


def _batched_labels(sampler, base, n: int) -> np.ndarray:
    out = np.empty(n, dtype=np.int64)
    done = 0
    while done < n:
        m = min(_PIPELINE_BATCH, n - done)
        batch = sampler(m)
        out[done : done + m] = base.classify_batch(batch)
        done += m
    return out


def smooth_predict_certify(sampler, base, n0: int, n: int, alpha: float):
    """Two-phase Monte-Carlo smoothing.

    ``sampler(k)`` returns k independently perturbed copies of the input.
    The first n0 draws pick the candidate class; n fresh draws feed the
    Clopper-Pearson bound, keeping it unbiased.  Returns
    (class or ABSTAIN, p_A_lower); abstains when p_A_lower <= 1/2.
    """
    if n0 < 1 or n < 1:
        raise DomainError("sample counts must be >= 1")
    candidate = _majority(_batched_labels(sampler, base, n0))
    labels = _batched_labels(sampler, base, n)
    k = int(np.sum(labels == candidate))
    p_lower = clopper_pearson_lower(k, n, alpha)
    if p_lower <= 0.5:
        return ABSTAIN, p_lower
    return candidate, p_lower


def certify_l2_robust(x, base, cfg: SmoothingConfig, rng):
    """Pixel-space smoothing: returns (class or ABSTAIN, r_delta)."""
    px = x.pixels if isinstance(x, Image) else np.asarray(x, dtype=np.float64)

    def sampler(k):
        noise = rng.normal(0.0, cfg.sigma_delta, size=(k,) + px.shape)
        return px[None] + noise

    n0 = min(100, cfg.n_delta)
    pred, p_lower = smooth_predict_certify(
        sampler, base, n0, cfg.n_delta, cfg.alpha_delta
    )
    if pred == ABSTAIN:
        return ABSTAIN, 0.0
    r = radius_l2(p_lower, 1.0 - p_lower, cfg.sigma_delta)
    if r <= 0.0:
        return ABSTAIN, 0.0
    return pred, r


# ---------------------------------------------------------------------------
# parameter-space samplers and pipelines


def _draw_param(cfg: SmoothingConfig, dim: int, rng) -> np.ndarray:
    if cfg.sigma_diag is not None:
        if len(cfg.sigma_diag) != dim:
            raise DomainError("sigma_diag dimension mismatch")
        return rng.normal(0.0, np.sqrt(np.asarray(cfg.sigma_diag, dtype=np.float64)))
    return rng.normal(0.0, cfg.sigma_gamma, size=dim)


def _transform_once(x, kind: str, beta):
    if kind == "volume_scale":
        return volume_scale(x, float(np.atleast_1d(beta)[0]))
    img = x if isinstance(x, Image) else Image(x)
    return apply_transform(img, kind, beta).pixels


def _cover_radius(raw: float, box: ParamBox):
    """Clip a parameter radius to the smallest ball covering the box."""
    cover = box.circumradius()
    if raw > cover:
        return cover, True, True
    return raw, False, raw >= cover


def basespt(x, base, kind: str, cfg: SmoothingConfig, box: ParamBox, rng,
            seed=None) -> Certificate:
    """Parameter smoothing straight through the transform.

    The radius ignores interpolation error, so for rotation/translation it is
    heuristic; for exactly composable transforms it is a true certificate.
    """
    dim = PARAM_DIM[kind]
    t0 = time.perf_counter()

    def sampler(k):
        return np.stack(
            [_transform_once(x, kind, _draw_param(cfg, dim, rng)) for _ in range(k)]
        )

    n0 = min(100, cfg.n_gamma)
    pred, p_lower = smooth_predict_certify(
        sampler, base, n0, cfg.n_gamma, cfg.alpha_gamma
    )
    elapsed = time.perf_counter() - t0
    if pred == ABSTAIN:
        return Certificate(
            ABSTAIN, p_lower, 0.0, "parameter", "heuristic",
            config=cfg, seed=seed, elapsed_s=elapsed,
        )
    raw = radius_param(p_lower, 1.0 - p_lower, cfg.sigma_gamma, 0.0, cfg.sigma_diag)
    if raw <= 0.0:
        return Certificate(
            ABSTAIN, p_lower, 0.0, "parameter", "heuristic",
            config=cfg, seed=seed, elapsed_s=elapsed,
        )
    r, clipped, covers = _cover_radius(raw, box)
    return Certificate(
        pred, p_lower, r, "parameter", "heuristic",
        clipped=clipped, covers_box=covers, config=cfg, seed=seed,
        elapsed_s=elapsed,
    )


def _certified_inner_label(y, base, cfg: SmoothingConfig, E: float, rng) -> int:
    """Label of the inner pixel-space certificate, or a sentinel when it is
    not certified to at least radius E (abstention or a short radius)."""
    pred, r = certify_l2_robust(y, base, cfg, rng)
    if pred == ABSTAIN or r < E:
        return -2
    return pred


def _param_pipeline(
    x: Image,
    base,
    kind: str,
    cfg: SmoothingConfig,
    box: ParamBox,
    est: ErrorBoundEstimate,
    pre: PreprocessConfig,
    guarantee: str,
    rng,
    seed,
) -> Certificate:
    """Shared outer loop: parameter smoothing whose inner vote is the
    E-certified pixel-space classifier."""
    dim = PARAM_DIM[kind]
    t0 = time.perf_counter()

    def inner_label():
        beta = _draw_param(cfg, dim, rng)
        y = apply_preprocess(apply_transform(x, kind, beta), pre)
        return _certified_inner_label(y, base, cfg, est.E, rng)

    n0 = min(100, cfg.n_gamma)
    first = np.array([inner_label() for _ in range(n0)], dtype=np.int64)
    candidate = _majority(first)
    votes = np.array(
        [inner_label() for _ in range(cfg.n_gamma)], dtype=np.int64
    )
    k = int(np.sum(votes == candidate))
    p_lower = clopper_pearson_lower(k, cfg.n_gamma, cfg.alpha_gamma)
    elapsed = time.perf_counter() - t0
    rho = cfg.rho if cfg.rho is not None else cfg.alpha_delta + est.alpha_E

    def abstain(reason):
        return Certificate(
            ABSTAIN, p_lower, 0.0, "parameter", guarantee,
            random_attack_only=est.random_attack_only,
            q_E=est.q_E_lower, confidence=est.confidence, E_used=est.E,
            reason=reason, config=cfg, seed=seed, elapsed_s=elapsed,
        )

    if candidate < 0 or p_lower <= 0.5:
        return abstain("insufficient vote confidence")
    raw = radius_param(p_lower, 1.0 - p_lower, cfg.sigma_gamma, rho, cfg.sigma_diag)
    if raw <= 0.0:
        return abstain("proxy correction exhausted the probability gap")
    r, clipped, covers = _cover_radius(raw, box)
    return Certificate(
        candidate, p_lower, r, "parameter", guarantee,
        random_attack_only=est.random_attack_only,
        clipped=clipped, covers_box=covers,
        q_E=est.q_E_lower, confidence=est.confidence, E_used=est.E,
        config=cfg, seed=seed, elapsed_s=elapsed,
    )


def distspt(
    x: Image,
    base,
    kind: str,
    cfg: SmoothingConfig,
    box: ParamBox,
    est: ErrorBoundEstimate,
    rng,
    pre: PreprocessConfig | None = None,
    seed=None,
) -> Certificate:
    """Distribution-level certification: valid for inputs drawn from the
    distribution ``est`` was verified on (fraction >= q_E of it)."""
    pre = pre if pre is not None else PreprocessConfig()
    return _param_pipeline(
        x, base, kind, cfg, box, est, pre, "distributional", rng, seed
    )


def smoothed_predict(x, base, kind: str, cfg: SmoothingConfig,
                     rng, n: int | None = None) -> int:
    """Majority vote of the parameter-smoothed classifier, no certification.

    Used by evaluation harnesses to compare predictions on original vs
    attacked inputs.
    """
    dim = PARAM_DIM[kind]
    count = n if n is not None else cfg.n_gamma

    def sampler(k):
        return np.stack(
            [_transform_once(x, kind, _draw_param(cfg, dim, rng)) for _ in range(k)]
        )

    return _majority(_batched_labels(sampler, base, count))


def indivspt(
    xp: Image,
    base,
    kind: str,
    cfg: SmoothingConfig,
    err_cfg: ErrorBoundConfig,
    E: float,
    rng,
    seed=None,
) -> Certificate:
    """Per-input certification of one observed (possibly attacked) image.

    Validates E for this very input through the inverse over-approximation,
    then runs the distributional pipeline on it.  The certificate transfers
    to the unknown original exactly when the radius covers the whole
    parameter box (``covers_box``).
    """
    t0 = time.perf_counter()
    inverses = compute_inverses(xp, err_cfg)
    est = estimate_E_individual(xp, err_cfg, E, inverses, rng)
    if not est.passed:
        return Certificate(
            ABSTAIN, 0.0, 0.0, "parameter", "individual",
            random_attack_only=est.random_attack_only,
            q_E=est.q_E_lower, confidence=est.confidence, E_used=E,
            reason=(
                f"E validation failed: beta-success lower bound "
                f"{est.q_E_lower:.4f} < {1.0 - est.alpha_E:.4f}"
            ),
            config=cfg, seed=seed, elapsed_s=time.perf_counter() - t0,
        )
    cert = _param_pipeline(
        xp, base, kind, cfg, err_cfg.box, est, err_cfg.preprocess,
        "individual", rng, seed,
    )
    return replace(cert, elapsed_s=time.perf_counter() - t0)
