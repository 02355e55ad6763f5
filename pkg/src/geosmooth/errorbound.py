"""Interpolation-error bounds: per-sample, distributional, and per-input.

Interpolated transforms do not compose exactly: applying T_beta after
T_gamma differs from T_(beta+gamma) by a residual image epsilon.  Everything
here bounds the l2 norm of that residual.

* ``epsilon_concrete`` evaluates one residual exactly.
* ``epsilon_interval_max`` soundly bounds the worst residual over a whole
  parameter box by splitting it and propagating interval images.
* ``estimate_E_distributional`` certifies, with a confidence bound, how often
  a candidate E dominates the residual for data drawn from a corpus.
* ``estimate_E_individual`` bounds the residual for one observed image whose
  original is unknown, using the inverse over-approximation; boxes whose
  inverse is infeasible are skipped, since the true parameter provably lies
  elsewhere.

Preprocessing (vignette, blur) is applied identically to both branches of
every residual, and the attacker-side intermediate image is widened by the
8-bit rounding step when quantization is configured.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._stats import clopper_pearson_lower
from .errors import DomainError, InfeasibleInput
from .geometry import ParamBox
from .imageops import (
    Image,
    IntervalImage,
    PreprocessConfig,
    apply_preprocess,
    apply_transform,
    apply_transform_interval,
    quantize,
    quantize_widen,
    volume_scale,
    QUANT_STEP,
)
from .inverse import InverseResult, invert_image

GAMMA_MODES = ("interval_max", "sampled")


@dataclass(frozen=True)
class ErrorBoundConfig:
    kind: str
    box: ParamBox
    sigma_gamma: float
    n_splits: int = 4
    alpha_E: float = 0.01
    n_beta: int = 100
    n_x: int = 100
    confidence: float = 0.999
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    gamma_mode: str = "interval_max"
    gamma_samples: int = 10  # draws per (x, beta) under sampled mode
    refinements: int = 10  # inverse refinement passes for per-input bounds

    def __post_init__(self):
        if self.n_splits < 1:
            raise DomainError("n_splits must be >= 1")
        if not 0 < self.alpha_E < 1 or not 0 < self.confidence < 1:
            raise DomainError("probabilities must be in (0, 1)")
        if self.sigma_gamma <= 0:
            raise DomainError("sigma_gamma must be positive")
        if self.gamma_mode not in GAMMA_MODES:
            raise DomainError(f"gamma_mode must be one of {GAMMA_MODES}")

    @property
    def random_attack_only(self) -> bool:
        # sampling gamma instead of bounding over all of it restricts any
        # downstream certificate to random (non-adaptive) attacks
        return self.gamma_mode == "sampled"

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "box_lo": list(self.box.lo),
            "box_hi": list(self.box.hi),
            "sigma_gamma": self.sigma_gamma,
            "n_splits": self.n_splits,
            "alpha_E": self.alpha_E,
            "n_beta": self.n_beta,
            "n_x": self.n_x,
            "confidence": self.confidence,
            "preprocess": self.preprocess.describe(),
            "gamma_mode": self.gamma_mode,
            "gamma_samples": self.gamma_samples,
            "refinements": self.refinements,
        }


@dataclass(frozen=True)
class ErrorBoundEstimate:
    E: float
    alpha_E: float
    q_E_lower: float
    confidence: float
    eps_max_observed: float
    samples_used: tuple
    random_attack_only: bool = False

    @property
    def passed(self) -> bool:
        return self.q_E_lower >= 1.0 - self.alpha_E

    def describe(self) -> dict:
        return {
            "E": self.E,
            "alpha_E": self.alpha_E,
            "q_E_lower": self.q_E_lower,
            "confidence": self.confidence,
            "eps_max_observed": self.eps_max_observed,
            "samples_used": list(self.samples_used),
            "random_attack_only": self.random_attack_only,
        }


def _draw_beta(cfg: ErrorBoundConfig, rng) -> np.ndarray:
    return rng.normal(0.0, cfg.sigma_gamma, size=cfg.box.dim)


def _require_no_preprocess(kind: str, pre: PreprocessConfig):
    if pre.vignette is not None or pre.blur_sigma is not None or pre.quantize:
        raise DomainError(
            f"{kind!r} residuals take no image preprocessing"
        )


def epsilon_concrete(
    x: Image, beta, gamma, kind: str, pre: PreprocessConfig | None = None
) -> float:
    """l2 norm of the composition residual for one (beta, gamma) pair."""
    pre = pre if pre is not None else PreprocessConfig()
    b = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    g = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
    if kind == "volume_scale":
        _require_no_preprocess(kind, pre)
        sig = x.pixels if isinstance(x, Image) else np.asarray(x, dtype=np.float64)
        seq = volume_scale(volume_scale(sig, float(g[0])), float(b[0]))
        direct = volume_scale(sig, float(b[0] + g[0]))
        return float(np.linalg.norm(seq - direct))
    inner = apply_transform(x, kind, g)
    if pre.quantize:
        inner = quantize(inner)
    seq = apply_preprocess(apply_transform(inner, kind, b), pre)
    direct = apply_preprocess(apply_transform(x, kind, b + g), pre)
    return float(np.linalg.norm(seq.pixels - direct.pixels))


def _interval_norm_upper(a: IntervalImage, b: IntervalImage) -> float:
    dlo = a.lo - b.hi
    dhi = a.hi - b.lo
    return float(np.sqrt(np.sum(np.maximum(dlo * dlo, dhi * dhi))))


def epsilon_interval_split(
    x: Image, beta, split: ParamBox, kind: str, pre: PreprocessConfig | None = None
) -> float:
    """Sound residual bound over one parameter sub-box."""
    pre = pre if pre is not None else PreprocessConfig()
    b = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if kind == "volume_scale":
        _require_no_preprocess(kind, pre)
        sig = x.pixels if isinstance(x, Image) else np.asarray(x, dtype=np.float64)
        # gain is monotone in dB, so the factor range comes from the box ends
        f_lo = 10.0 ** ((split.lo[0] + b[0]) / 20.0)
        f_hi = 10.0 ** ((split.hi[0] + b[0]) / 20.0)
        ends = np.stack((f_lo * sig, f_hi * sig))
        width = ends.max(axis=0) - ends.min(axis=0)
        return float(np.linalg.norm(width))
    inner = apply_transform_interval(x, kind, split)
    if pre.quantize:
        inner = quantize_widen(inner)
    seq = apply_preprocess(
        apply_transform_interval(inner, kind, ParamBox.point(b)), pre
    )
    direct = apply_preprocess(
        apply_transform_interval(x, kind, split.shift(b)), pre
    )
    return _interval_norm_upper(seq, direct)


def epsilon_interval_max(
    x: Image,
    beta,
    box: ParamBox,
    n_splits: int,
    kind: str,
    pre: PreprocessConfig | None = None,
) -> float:
    """Upper bound on max over gamma in ``box`` of the residual norm."""
    pre = pre if pre is not None else PreprocessConfig()
    return max(
        epsilon_interval_split(x, beta, s, kind, pre)
        for s in box.split(n_splits)
    )


def _bound_for(x: Image, beta, cfg: ErrorBoundConfig, rng) -> float:
    if cfg.gamma_mode == "interval_max":
        return epsilon_interval_max(
            x, beta, cfg.box, cfg.n_splits, cfg.kind, cfg.preprocess
        )
    gammas = cfg.box.sample_uniform(rng, cfg.gamma_samples)
    return max(
        epsilon_concrete(x, beta, g, cfg.kind, cfg.preprocess) for g in gammas
    )


def scan_epsilon(data, cfg: ErrorBoundConfig, rng, records_path=None):
    """Residual bounds over sampled (x, beta); returns the per-pair list.

    Records are {image_id, beta, bound}; optionally persisted as JSON lines.
    """
    n = min(cfg.n_x, len(data))
    records = []
    for i in range(n):
        x = data.get(i)
        for _ in range(cfg.n_beta):
            beta = _draw_beta(cfg, rng)
            bound = _bound_for(x, beta, cfg, rng)
            records.append({"image_id": i, "beta": beta.tolist(), "bound": bound})
    if records_path is not None:
        with open(records_path, "w") as f:
            for rec in records:
                f.write(json.dumps(rec) + "\n")
    return records


def propose_E(data, cfg: ErrorBoundConfig, rng) -> float:
    """Candidate E: 1.5x the largest bound seen in a scan of the corpus."""
    if len(data) == 0:
        raise DomainError("cannot scan an empty dataset")
    records = scan_epsilon(data, cfg, rng)
    return 1.5 * max(r["bound"] for r in records)


def estimate_E_distributional(
    data, cfg: ErrorBoundConfig, E: float, rng
) -> ErrorBoundEstimate:
    """Verify a candidate E against the data distribution.

    Per image: Clopper-Pearson over n_beta draws decides whether the residual
    stays under E with probability >= 1 - alpha_E.  The per-image tests and
    the outer bound share the total failure budget (1 - confidence): half for
    the outer bound, half split evenly across the inner tests, so the
    reported q_E_lower holds with the configured confidence.
    """
    if E <= 0:
        raise DomainError("E must be positive")
    if len(data) == 0:
        raise DomainError("cannot estimate on an empty dataset")
    n_x = min(cfg.n_x, len(data))
    if n_x < 30 or cfg.n_beta < 30:
        warnings.warn(
            "fewer than 30 samples gives a weak Clopper-Pearson bound",
            stacklevel=2,
        )
    alpha_total = 1.0 - cfg.confidence
    alpha_outer = alpha_total / 2.0
    alpha_inner = alpha_total / (2.0 * n_x)
    positives = 0
    eps_max = 0.0
    for i in range(n_x):
        x = data.get(i)
        ok = 0
        for _ in range(cfg.n_beta):
            beta = _draw_beta(cfg, rng)
            bound = _bound_for(x, beta, cfg, rng)
            eps_max = max(eps_max, bound)
            if bound <= E:
                ok += 1
        inner_lower = clopper_pearson_lower(ok, cfg.n_beta, alpha_inner)
        if inner_lower >= 1.0 - cfg.alpha_E:
            positives += 1
    q_lower = clopper_pearson_lower(positives, n_x, alpha_outer)
    return ErrorBoundEstimate(
        E=float(E),
        alpha_E=cfg.alpha_E,
        q_E_lower=q_lower,
        confidence=cfg.confidence,
        eps_max_observed=eps_max,
        samples_used=(n_x, cfg.n_beta),
        random_attack_only=cfg.random_attack_only,
    )


# ---------------------------------------------------------------------------
# per-input bounds through the inverse


def compute_inverses(xp: Image, cfg: ErrorBoundConfig):
    """Inverse over-approximation per sub-box of the parameter range.

    The observed image is treated as 8-bit data when quantization is
    configured, which both keeps the inverse sound and lets genuinely
    impossible sub-boxes be proven infeasible.
    """
    slack = QUANT_STEP if cfg.preprocess.quantize else 0.0
    return [
        invert_image(xp, cfg.kind, split, cfg.refinements, value_slack=slack)
        for split in cfg.box.split(cfg.n_splits)
    ]


def individual_bound_for_beta(
    xp: Image, beta, cfg: ErrorBoundConfig, inverses
) -> float:
    """Sound residual bound for one beta, maximized over feasible sub-boxes."""
    b = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    direct = apply_preprocess(
        apply_transform_interval(xp, cfg.kind, ParamBox.point(b)),
        cfg.preprocess,
    )
    splits = cfg.box.split(cfg.n_splits)
    worst = None
    for split, inv in zip(splits, inverses):
        if not inv.feasible:
            continue
        seq = apply_preprocess(
            apply_transform_interval(inv.image, cfg.kind, split.shift(b)),
            cfg.preprocess,
        )
        bound = _interval_norm_upper(seq, direct)
        worst = bound if worst is None else max(worst, bound)
    if worst is None:
        raise InfeasibleInput(
            "no sub-box admits a pre-image; the input is not a transform "
            "of any image under the configured parameter range"
        )
    return worst


def estimate_E_individual(
    xp: Image, cfg: ErrorBoundConfig, E: float, inverses, rng
) -> ErrorBoundEstimate:
    """Check P_beta(residual bound <= E) >= 1 - alpha_E for one input.

    ``inverses`` comes from ``compute_inverses`` and is reused across all
    beta draws.  q_E_lower here is the Clopper-Pearson lower bound on the
    beta-success probability; ``passed`` compares it against 1 - alpha_E.
    """
    if E <= 0:
        raise DomainError("E must be positive")
    if not any(inv.feasible for inv in inverses):
        raise InfeasibleInput("every sub-box inverse is infeasible")
    ok = 0
    eps_max = 0.0
    for _ in range(cfg.n_beta):
        beta = _draw_beta(cfg, rng)
        bound = individual_bound_for_beta(xp, beta, cfg, inverses)
        eps_max = max(eps_max, bound)
        if bound <= E:
            ok += 1
    q_lower = clopper_pearson_lower(ok, cfg.n_beta, 1.0 - cfg.confidence)
    return ErrorBoundEstimate(
        E=float(E),
        alpha_E=cfg.alpha_E,
        q_E_lower=q_lower,
        confidence=cfg.confidence,
        eps_max_observed=eps_max,
        samples_used=(1, cfg.n_beta),
        random_attack_only=cfg.random_attack_only,
    )
