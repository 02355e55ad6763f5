"""Search for BaseSPT heuristic-radius violations on the synthetic corpus.

Exploration helper, not part of the package: scans (classifier, sigma,
image, attack) combinations, certifies the attacked input with BaseSPT,
then grid-searches the claimed radius with large fresh vote counts.  A
violation is only recorded when the flip is decisive (vote fraction for
the certified class at most 0.44).
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from geosmooth import (  # noqa: E402
    ABSTAIN,
    CentroidClassifier,
    MlpClassifier,
    SmoothingConfig,
    basespt,
    fit_centroid,
    load_mlp_weights,
    synthetic_glyphs,
    worst_of_k,
)
from geosmooth.geometry import ParamBox  # noqa: E402
from geosmooth.imageops import apply_transform, quantize  # noqa: E402
from geosmooth.smoothing import _majority, _transform_once  # noqa: E402

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "geosmooth" / "data"


def vote_fraction(xp, base, kind, sigma, pred, n, rng):
    labels = []
    for start in range(0, n, 256):
        k = min(256, n - start)
        betas = rng.normal(0.0, sigma, size=(k, 1))
        batch = np.stack([_transform_once(xp, kind, b) for b in betas])
        labels.append(base.classify_batch(batch))
    labels = np.concatenate(labels)
    return float((labels == pred).mean())


def main():
    data = synthetic_glyphs(200, seed=0)
    geom = data.get(0).geometry
    mlp = MlpClassifier(load_mlp_weights(DATA_DIR / "mlp_demo.json"), geom)
    cen = CentroidClassifier(fit_centroid(data, data.num_classes), geom)
    box = ParamBox.symmetric(30.0, 1)
    out = []
    t0 = time.time()
    for cname, base in (("mlp_demo", mlp), ("centroid_raw", cen)):
        for sigma in (10.0, 30.0):
            cfg = SmoothingConfig(sigma_gamma=sigma, n_gamma=1000, alpha_gamma=0.01,
                                  sigma_delta=0.3, n_delta=10, alpha_delta=0.01)
            for i in range(len(data)):
                for a in range(2):
                    rng = np.random.default_rng(np.random.SeedSequence([17, i, a]))
                    att = worst_of_k(data.get(i), int(data.labels[i]), base, box,
                                     100, "rotation", rng, original_id=i)
                    xp = att.attacked
                    cert = basespt(xp.pixels, base, "rotation", cfg, box,
                                   np.random.default_rng(np.random.SeedSequence([23, i, a])))
                    if cert.prediction == ABSTAIN or cert.radius <= 0.05:
                        continue
                    grid = np.linspace(-cert.radius, cert.radius, 25)
                    worst = (1.0, None)
                    for g in grid:
                        xg = quantize(apply_transform(xp, "rotation", np.array([g])))
                        frac = vote_fraction(
                            xg, base, "rotation", sigma, cert.prediction, 900,
                            np.random.default_rng(np.random.SeedSequence([29, i, a, int(g * 100) & 0xFFFF])),
                        )
                        if frac < worst[0]:
                            worst = (frac, float(g))
                    if worst[0] <= 0.44:
                        rec = dict(classifier=cname, sigma=sigma, image=i, attack=a,
                                   gamma_star=float(att.gamma_star[0]),
                                   pred=int(cert.prediction), label=int(data.labels[i]),
                                   radius=float(cert.radius),
                                   flip_gamma=worst[1], flip_frac=worst[0])
                        out.append(rec)
                        print("VIOLATION", json.dumps(rec), flush=True)
            print(f"done {cname} sigma={sigma}  ({time.time()-t0:.0f}s, {len(out)} hits)", flush=True)
    Path("/tmp/violations.json").write_text(json.dumps(out, indent=2))
    print(f"total {len(out)} violations, {time.time()-t0:.0f}s")


if __name__ == "__main__":
    main()
