"""Command-line interface.

Subcommands cover the full workflow: scan a corpus for an error-bound
candidate (``estimate-error``), verify it distributionally (``verify-e``),
dump inverse bounds as images (``invert``), attack a corpus (``attack``),
certify inputs with any pipeline (``certify``), run the full evaluation
harness (``eval``), and run the built-in oracle checks (``selftest``).

Every run is reproducible: randomness derives from ``--seed`` (falling back
to the GEOSMOOTH_SEED environment variable), per-image streams are seeded by
index so ``--threads`` never changes results, and every output document
embeds the resolved configuration and version.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import (
    CentroidClassifier,
    ExternalClassifier,
    MlpClassifier,
    load_centroid,
    load_mlp_weights,
    load_mnist_idx,
)
from .datasets import Dataset, synthetic_glyphs
from .errorbound import (
    ErrorBoundConfig,
    ErrorBoundEstimate,
    estimate_E_distributional,
    propose_E,
    scan_epsilon,
)
from .errors import BackendError, DomainError, FormatError, GeosmoothError, InfeasibleInput
from .geometry import PARAM_DIM, GridGeometry, ParamBox
from .imageops import Image, PreprocessConfig, read_png, write_png
from .inverse import invert_image
from .smoothing import SmoothingConfig, basespt, distspt, indivspt
from .attacks import evaluate_defense, worst_of_k, write_records_jsonl, write_summary_csv

SEED_ENV = "GEOSMOOTH_SEED"


def version_string() -> str:
    """git-describe when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).parent,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"geosmooth {__version__} ({out.stdout.strip()})"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"geosmooth {__version__}"


# ---------------------------------------------------------------------------
# config plumbing


def _merge_config(args: argparse.Namespace, parser_dests) -> dict:
    """File values first, command-line values override; unknown keys fail."""
    merged = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        with open(cfg_path) as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise FormatError(f"config is not valid JSON: {e}", cfg_path) from e
        if not isinstance(doc, dict):
            raise FormatError("config must be a flat JSON object", cfg_path)
        for key, val in doc.items():
            dest = key.replace("-", "_")
            if dest not in parser_dests:
                raise FormatError(f"unknown config key {key!r}", cfg_path)
            merged[dest] = val
    for key, val in vars(args).items():
        if key in ("func", "config") or val is None:
            continue
        merged[key] = val
    return merged


def _resolve_seed(cfg: dict) -> int:
    if cfg.get("seed") is not None:
        return int(cfg["seed"])
    env = os.environ.get(SEED_ENV)
    return int(env) if env else 0


def _box_from(cfg: dict) -> ParamBox:
    kind = cfg["transform"]
    dim = PARAM_DIM[kind]
    if cfg.get("gamma_pm") is not None:
        return ParamBox.symmetric(float(cfg["gamma_pm"]), dim)
    if cfg.get("gamma_lo") is None or cfg.get("gamma_hi") is None:
        raise DomainError("need --gamma-pm or both --gamma-lo and --gamma-hi")
    lo = [float(v) for v in str(cfg["gamma_lo"]).split(",")]
    hi = [float(v) for v in str(cfg["gamma_hi"]).split(",")]
    if len(lo) != dim or len(hi) != dim:
        raise DomainError(f"{kind} takes {dim} parameter(s)")
    return ParamBox(tuple(lo), tuple(hi))


def _preprocess_from(cfg: dict) -> PreprocessConfig:
    return PreprocessConfig(
        vignette=cfg.get("vignette"),
        vignette_margin=float(cfg.get("vignette_margin", 0.0)),
        blur_sigma=(
            float(cfg["blur_sigma"]) if cfg.get("blur_sigma") is not None else None
        ),
        blur_size=int(cfg.get("blur_size", 5)),
        quantize=bool(cfg.get("quantize", True)),
    )


def _dataset_from(cfg: dict) -> Dataset:
    spec = cfg.get("dataset")
    if spec is None:
        mnist_dir = os.environ.get("GEOSMOOTH_MNIST_DIR")
        spec = f"mnist:{mnist_dir}" if mnist_dir else "synthetic:200"
    if spec.startswith("synthetic"):
        n = int(spec.split(":", 1)[1]) if ":" in spec else 200
        return synthetic_glyphs(n, seed=int(cfg.get("dataset_seed", 0)))
    if spec.startswith("idx:"):
        _, images, labels = spec.split(":", 2)
        return load_mnist_idx(images, labels)
    if spec.startswith("mnist:"):
        root = Path(spec.split(":", 1)[1])
        for imgs, labs in (
            ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"),
        ):
            if (root / imgs).exists():
                return load_mnist_idx(root / imgs, root / labs)
        raise FormatError("no IDX files found", str(root))
    raise DomainError(f"unknown dataset spec {spec!r}")


def _data_file(name: str) -> Path:
    return Path(__file__).parent / "data" / name


def _classifier_from(cfg: dict, geom: GridGeometry):
    spec = cfg.get("model", "demo-centroid")
    if spec == "demo-centroid":
        return load_centroid(_data_file("centroid_demo.json"))
    if spec == "demo-mlp":
        return MlpClassifier(load_mlp_weights(_data_file("mlp_demo.json")), geom)
    if spec.startswith("centroid:"):
        return load_centroid(spec.split(":", 1)[1])
    if spec.startswith("mlp:"):
        return MlpClassifier(load_mlp_weights(spec.split(":", 1)[1]), geom)
    if spec.startswith("external:"):
        if cfg.get("num_classes") is None:
            raise DomainError("external model needs --num-classes")
        return ExternalClassifier(
            spec.split(":", 1)[1], int(cfg["num_classes"]), geom
        )
    raise DomainError(f"unknown model spec {spec!r}")


def _smoothing_from(cfg: dict) -> SmoothingConfig:
    sigma_diag = cfg.get("sigma_diag")
    if isinstance(sigma_diag, str):
        sigma_diag = tuple(float(v) for v in sigma_diag.split(","))
    elif sigma_diag is not None:
        sigma_diag = tuple(float(v) for v in sigma_diag)
    return SmoothingConfig(
        sigma_gamma=float(cfg.get("sigma_gamma", 30.0)),
        n_gamma=int(cfg.get("n_gamma", 200)),
        alpha_gamma=float(cfg.get("alpha_gamma", 0.01)),
        sigma_delta=float(cfg.get("sigma_delta", 0.3)),
        n_delta=int(cfg.get("n_delta", 200)),
        alpha_delta=float(cfg.get("alpha_delta", 0.001)),
        rho=(float(cfg["rho"]) if cfg.get("rho") is not None else None),
        sigma_diag=sigma_diag,
    )


def _errorbound_from(cfg: dict, box: ParamBox) -> ErrorBoundConfig:
    return ErrorBoundConfig(
        kind=cfg["transform"],
        box=box,
        sigma_gamma=float(cfg.get("sigma_gamma", 30.0)),
        n_splits=int(cfg.get("n_splits", 4)),
        alpha_E=float(cfg.get("alpha_e", 0.01)),
        n_beta=int(cfg.get("n_beta", 100)),
        n_x=int(cfg.get("n_x", 100)),
        confidence=float(cfg.get("confidence", 0.999)),
        preprocess=_preprocess_from(cfg),
        gamma_mode=cfg.get("gamma_mode", "interval_max"),
        gamma_samples=int(cfg.get("gamma_samples", 10)),
        refinements=int(cfg.get("refinements", 10)),
    )


def _emit(doc: dict, out_path):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def _provenance(cfg: dict, seed: int) -> dict:
    clean = {k: v for k, v in sorted(cfg.items())}
    clean["seed"] = seed
    return {"version": version_string(), "config": clean}


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_estimate_error(cfg: dict) -> int:
    seed = _resolve_seed(cfg)
    rng = np.random.default_rng(seed)
    box = _box_from(cfg)
    data = _dataset_from(cfg)
    ecfg = _errorbound_from(cfg, box)
    records = scan_epsilon(data, ecfg, rng, records_path=cfg.get("records"))
    eps_max = max(r["bound"] for r in records) if records else 0.0
    doc = _provenance(cfg, seed)
    doc.update(
        {
            "eps_max": eps_max,
            "proposed_E": 1.5 * eps_max,
            "n_records": len(records),
            "random_attack_only": ecfg.random_attack_only,
        }
    )
    _emit(doc, cfg.get("out"))
    return 0


def cmd_verify_e(cfg: dict) -> int:
    seed = _resolve_seed(cfg)
    rng = np.random.default_rng(seed)
    box = _box_from(cfg)
    data = _dataset_from(cfg)
    ecfg = _errorbound_from(cfg, box)
    est = estimate_E_distributional(data, ecfg, float(cfg["e"]), rng)
    doc = _provenance(cfg, seed)
    doc["estimate"] = est.describe()
    _emit(doc, cfg.get("out"))
    return 0


def cmd_invert(cfg: dict) -> int:
    seed = _resolve_seed(cfg)
    box = _box_from(cfg)
    if cfg.get("input"):
        img = read_png(cfg["input"])
    else:
        data = _dataset_from(cfg)
        img = data.get(int(cfg.get("index", 0)))
    slack = 1.0 / 510.0 if cfg.get("quantize", True) else 0.0
    res = invert_image(
        img, cfg["transform"], box,
        refinements=int(cfg.get("refinements", 10)),
        value_slack=slack,
    )
    out_lower = cfg.get("out_lower", "inverse_lower.png")
    out_upper = cfg.get("out_upper", "inverse_upper.png")
    if res.feasible:
        write_png(out_lower, Image(res.image.lo))
        write_png(out_upper, Image(res.image.hi))
    doc = _provenance(cfg, seed)
    doc.update(
        {
            "feasible": res.feasible,
            "refinements_applied": res.refinements_applied,
            "offending_pixel": res.offending_pixel,
            "mean_width": float(res.image.widths().mean()),
            "out_lower": out_lower if res.feasible else None,
            "out_upper": out_upper if res.feasible else None,
        }
    )
    _emit(doc, cfg.get("out"))
    return 0


def cmd_attack(cfg: dict) -> int:
    seed = _resolve_seed(cfg)
    box = _box_from(cfg)
    data = _dataset_from(cfg)
    base = _classifier_from(cfg, data.get(0).geometry if len(data) else None)
    limit = min(int(cfg.get("limit", len(data))), len(data))
    out_dir = Path(cfg.get("out_dir", "attacked"))
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(limit):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        res = worst_of_k(
            data.get(i), int(data.labels[i]), base, box,
            int(cfg.get("k", 100)), cfg["transform"], rng, original_id=i,
        )
        png = out_dir / f"attacked_{i:05d}.png"
        write_png(png, res.attacked)
        records.append(
            {
                "image_id": i,
                "label": int(data.labels[i]),
                "gamma_star": res.gamma_star.tolist(),
                "loss": res.loss,
                "path": str(png),
            }
        )
    write_records_jsonl(out_dir / "attacks.jsonl", records)
    doc = _provenance(cfg, seed)
    doc.update({"n_attacked": len(records), "out_dir": str(out_dir)})
    _emit(doc, cfg.get("out"))
    return 0


def _load_estimate(path) -> ErrorBoundEstimate:
    with open(path) as f:
        doc = json.load(f)
    est = doc.get("estimate", doc)
    try:
        return ErrorBoundEstimate(
            E=float(est["E"]),
            alpha_E=float(est["alpha_E"]),
            q_E_lower=float(est["q_E_lower"]),
            confidence=float(est["confidence"]),
            eps_max_observed=float(est["eps_max_observed"]),
            samples_used=tuple(est["samples_used"]),
            random_attack_only=bool(est.get("random_attack_only", False)),
        )
    except KeyError as e:
        raise FormatError(f"estimate file missing {e}", str(path)) from e


def cmd_certify(cfg: dict) -> int:
    seed = _resolve_seed(cfg)
    box = _box_from(cfg)
    method = cfg.get("method", "distspt")
    if cfg.get("input"):
        images = [read_png(cfg["input"])]
        labels = [None]
    else:
        data = _dataset_from(cfg)
        limit = min(int(cfg.get("limit", len(data))), len(data))
        images = [data.get(i) for i in range(limit)]
        labels = [int(v) for v in data.labels[:limit]]
    if not images:
        _emit(_provenance(cfg, seed), cfg.get("out"))
        return 0
    base = _classifier_from(cfg, images[0].geometry)
    scfg = _smoothing_from(cfg)
    pre = _preprocess_from(cfg)
    certs = []
    for i, img in enumerate(images):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        if method == "basespt":
            cert = basespt(
                img.pixels, base, cfg["transform"], scfg, box, rng, seed=seed
            )
        elif method == "distspt":
            if not cfg.get("est"):
                raise DomainError("distspt needs --est from verify-e")
            est = _load_estimate(cfg["est"])
            cert = distspt(
                img, base, cfg["transform"], scfg, box, est, rng,
                pre=pre, seed=seed,
            )
        elif method == "indivspt":
            if cfg.get("e") is None:
                raise DomainError("indivspt needs --e")
            ecfg = _errorbound_from(cfg, box)
            try:
                cert = indivspt(
                    img, base, cfg["transform"], scfg, ecfg,
                    float(cfg["e"]), rng, seed=seed,
                )
            except InfeasibleInput as e:
                certs.append({"input_index": i, "infeasible": True, "detail": str(e)})
                continue
        else:
            raise DomainError(f"unknown method {method!r}")
        entry = cert.describe()
        entry["input_index"] = i
        if labels[i] is not None:
            entry["label"] = labels[i]
        certs.append(entry)
    doc = _provenance(cfg, seed)
    doc["certificates"] = certs
    _emit(doc, cfg.get("out"))
    return 0


def cmd_eval(cfg: dict) -> int:
    seed = _resolve_seed(cfg)
    box = _box_from(cfg)
    data = _dataset_from(cfg)
    limit = min(int(cfg.get("limit", len(data))), len(data))
    data = data.subset(range(limit))
    base = _classifier_from(cfg, data.get(0).geometry if len(data) else None)
    scfg = _smoothing_from(cfg)
    pre = _preprocess_from(cfg)
    pipeline = cfg.get("pipeline", "distspt")
    est = _load_estimate(cfg["est"]) if cfg.get("est") else None
    ecfg = _errorbound_from(cfg, box) if pipeline == "indivspt" else None
    records, summary = evaluate_defense(
        pipeline, data, base, cfg["transform"], box, scfg, seed,
        err_cfg=ecfg, est=est,
        E=(float(cfg["e"]) if cfg.get("e") is not None else None),
        pre=pre,
        attack_k=int(cfg.get("k", 100)),
        attacks_per_image=int(cfg.get("attacks_per_image", 3)),
        threads=int(cfg.get("threads", 1)),
    )
    if cfg.get("records"):
        write_records_jsonl(cfg["records"], records)
    if cfg.get("summary"):
        write_summary_csv(cfg["summary"], summary)
    doc = _provenance(cfg, seed)
    doc["summary"] = summary
    _emit(doc, cfg.get("out"))
    return 0


def cmd_selftest(cfg: dict) -> int:
    from . import _selftest

    seed = _resolve_seed(cfg)
    failures = _selftest.run_all(seed=seed, verbose=True)
    if failures:
        print(f"selftest: {failures} check(s) FAILED", file=sys.stderr)
        raise GeosmoothError("selftest failed")
    print("selftest: all checks passed")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p):
    p.add_argument("--config", help="flat JSON config file; flags override it")
    p.add_argument("--seed", type=int, help=f"RNG seed (default ${SEED_ENV} or 0)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--transform", choices=("rotation", "translation"))
    p.add_argument("--gamma-pm", type=float, help="symmetric parameter range")
    p.add_argument("--gamma-lo", help="lower corner, comma-separated")
    p.add_argument("--gamma-hi", help="upper corner, comma-separated")


def _add_data_model(p):
    p.add_argument("--dataset", help="synthetic[:N] | idx:IMG:LAB | mnist:DIR")
    p.add_argument("--dataset-seed", type=int)
    p.add_argument("--model", help="demo-centroid | demo-mlp | mlp:F | centroid:F | external:CMD")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--limit", type=int, help="use only the first N images")


def _add_preprocess(p):
    p.add_argument("--vignette", choices=("circular", "rectangular"))
    p.add_argument("--vignette-margin", type=float)
    p.add_argument("--blur-sigma", type=float)
    p.add_argument("--blur-size", type=int)
    p.add_argument("--quantize", type=lambda s: s.lower() in ("1", "true", "yes"))


def _add_errorbound(p):
    p.add_argument("--sigma-gamma", type=float)
    p.add_argument("--n-splits", type=int)
    p.add_argument("--alpha-e", type=float)
    p.add_argument("--n-beta", type=int)
    p.add_argument("--n-x", type=int)
    p.add_argument("--confidence", type=float)
    p.add_argument("--gamma-mode", choices=("interval_max", "sampled"))
    p.add_argument("--gamma-samples", type=int)
    p.add_argument("--refinements", type=int)


def _add_smoothing(p):
    p.add_argument("--n-gamma", type=int)
    p.add_argument("--alpha-gamma", type=float)
    p.add_argument("--sigma-delta", type=float)
    p.add_argument("--n-delta", type=int)
    p.add_argument("--alpha-delta", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--sigma-diag", help="comma-separated per-dim variances")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="geosmooth",
        description="certified robustness to parameterized image transforms",
    )
    ap.add_argument("--version", action="version", version=version_string())
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-error", help="scan a corpus and propose E")
    _add_common(p); _add_data_model(p); _add_preprocess(p); _add_errorbound(p)
    p.add_argument("--records", help="write per-pair bounds as JSON lines")
    p.set_defaults(func=cmd_estimate_error)

    p = sub.add_parser("verify-e", help="verify a candidate E distributionally")
    _add_common(p); _add_data_model(p); _add_preprocess(p); _add_errorbound(p)
    p.add_argument("--e", type=float, required=True)
    p.set_defaults(func=cmd_verify_e)

    p = sub.add_parser("invert", help="dump inverse bounds as a PNG pair")
    _add_common(p); _add_data_model(p)
    p.add_argument("--input", help="PNG input (otherwise --dataset + --index)")
    p.add_argument("--index", type=int)
    p.add_argument("--refinements", type=int)
    p.add_argument("--quantize", type=lambda s: s.lower() in ("1", "true", "yes"))
    p.add_argument("--out-lower")
    p.add_argument("--out-upper")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("attack", help="build a worst-of-k attacked corpus")
    _add_common(p); _add_data_model(p)
    p.add_argument("--k", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("certify", help="certify inputs with one pipeline")
    _add_common(p); _add_data_model(p); _add_preprocess(p)
    _add_errorbound(p); _add_smoothing(p)
    p.add_argument("--method", choices=("basespt", "distspt", "indivspt"))
    p.add_argument("--input", help="single PNG input")
    p.add_argument("--est", help="estimate JSON from verify-e (distspt)")
    p.add_argument("--e", type=float, help="error bound E (indivspt)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("eval", help="attack + defend a corpus, emit a report")
    _add_common(p); _add_data_model(p); _add_preprocess(p)
    _add_errorbound(p); _add_smoothing(p)
    p.add_argument("--pipeline", choices=("basespt", "distspt", "indivspt"))
    p.add_argument("--est")
    p.add_argument("--e", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--attacks-per-image", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--records", help="per-record JSON lines output")
    p.add_argument("--summary", help="summary CSV output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_selftest)

    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse prints usage itself; map its exit to the config-error code
        return 0 if e.code in (0, None) else 1
    dests = set(vars(args).keys())
    try:
        cfg = _merge_config(args, dests)
        return args.func(cfg)
    except (DomainError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (GeosmoothError, BackendError, InfeasibleInput, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
