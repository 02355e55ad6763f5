"""Regenerate the demo model artifacts shipped in geosmooth/data/.

Two models, two purposes:

* centroid_demo.json: class centroids fit on rotation-augmented,
  preprocessed (circular vignette + Gaussian blur + 8-bit) glyphs.  This
  is the defended base classifier the certified pipelines expect.
* mlp_demo.json: a random-feature network with a least-squares readout,
  fit on raw un-augmented glyphs.  Deliberately undefended; its smoothed
  heuristic radii are there to be broken by grid search.

Both fits are deterministic, so the checked-in artifacts are
reproducible byte-for-byte.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from geosmooth.classifier import (  # noqa: E402
    MlpLayer,
    MlpWeights,
    fit_centroid,
    save_centroid,
    save_mlp_weights,
)
from geosmooth.datasets import Dataset, synthetic_glyphs  # noqa: E402
from geosmooth.imageops import PreprocessConfig, apply_preprocess, apply_transform  # noqa: E402

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "geosmooth" / "data"

N_TRAIN = 200
AUGS_PER_IMAGE = 8
SIGMA_AUG = 30.0
PRE = PreprocessConfig(vignette="circular", blur_sigma=2.0, blur_size=5, quantize=True)


def make_centroid(data: Dataset) -> None:
    rng = np.random.default_rng(42)
    images, labels = [], []
    for i in range(len(data)):
        x = data.get(i)
        images.append(apply_preprocess(x, PRE).pixels)
        labels.append(data.labels[i])
        for _ in range(AUGS_PER_IMAGE):
            gamma = rng.normal(0.0, SIGMA_AUG, size=1)
            warped = apply_transform(x, "rotation", gamma)
            images.append(apply_preprocess(warped, PRE).pixels)
            labels.append(data.labels[i])
    aug = Dataset(np.stack(images), np.asarray(labels, dtype=np.int64))
    protos = fit_centroid(aug, data.num_classes)
    save_centroid(OUT_DIR / "centroid_demo.json", protos, data.get(0).geometry)
    print(f"centroid_demo.json: {len(aug)} fit samples, {data.num_classes} classes")


def make_mlp(data: Dataset) -> None:
    # random hidden layer, ridge least-squares readout: deterministic and
    # intentionally fragile under rotation
    rng = np.random.default_rng(7)
    flat = data.images.reshape(len(data), -1)
    d = flat.shape[1]
    hidden = 96
    w1 = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, hidden))
    b1 = rng.normal(0.0, 0.1, size=hidden)
    h = np.maximum(flat @ w1 + b1, 0.0)
    onehot = np.eye(data.num_classes)[data.labels]
    reg = 1e-3 * np.eye(hidden)
    w2 = np.linalg.solve(h.T @ h + reg, h.T @ (2.0 * onehot - 1.0))
    b2 = np.zeros(data.num_classes)
    # 6 decimals keeps the checked-in artifact small without moving argmaxes
    model = MlpWeights(
        layers=(
            MlpLayer(weights=np.round(w1.T, 6), bias=np.round(b1, 6), activation="relu"),
            MlpLayer(weights=np.round(w2.T, 6), bias=np.round(b2, 6), activation="none"),
        ),
        num_classes=data.num_classes,
    )
    save_mlp_weights(OUT_DIR / "mlp_demo.json", model)
    acc = float((np.argmax(h @ w2 + b2, axis=1) == data.labels).mean())
    print(f"mlp_demo.json: hidden={hidden}, train accuracy {acc:.3f}")


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    data = synthetic_glyphs(N_TRAIN, seed=0)
    make_centroid(data)
    make_mlp(data)


if __name__ == "__main__":
    main()
