"""Regenerate the small fixture cohort under tests/data/cohort/.

    python tests/data/make_fixture.py

Volumes are synthetic lesion blobs; predictions perturb the ground truth
with shifts, misses and spurious blobs so every metric is exercised.
"""
from pathlib import Path

import numpy as np

from lesionbench.volume import BinaryMask, save_mask

OUT = Path(__file__).parent / "cohort"
SHAPE = (16, 24, 24)  # z, y, x
SPACING = (2.0, 2.0, 3.0)  # dx, dy, dz in mm

STUDIES = [
    ("mel_01", "melanoma", 3),
    ("mel_02", "melanoma", 1),
    ("lung_01", "lung_cancer", 2),
    ("lym_01", "lymphoma", 4),
    ("neg_01", "negative", 0),
    ("neg_02", "negative", 0),
]


def blob(mask, centre, radius):
    z, y, x = np.ogrid[: SHAPE[0], : SHAPE[1], : SHAPE[2]]
    cz, cy, cx = centre
    mask |= ((z - cz) ** 2 + (y - cy) ** 2 + (x - cx) ** 2) <= radius**2


def main():
    rng = np.random.default_rng(1234)
    (OUT / "gt").mkdir(parents=True, exist_ok=True)
    rows = ["study_id,disease,lesion_count,gt_path,joint,baseline"]
    for model in ("joint", "baseline"):
        (OUT / model).mkdir(exist_ok=True)
    for sid, disease, n_lesions in STUDIES:
        gt = np.zeros(SHAPE, bool)
        centres = []
        for _ in range(n_lesions):
            c = (int(rng.integers(4, 13)), int(rng.integers(4, 20)), int(rng.integers(4, 20)))
            r = float(rng.uniform(1.2, 3.0))
            blob(gt, c, r)
            centres.append((c, r))
        preds = {}
        for model, shift, miss_p, n_fp in (("joint", 1, 0.2, 1), ("baseline", 2, 0.5, 3)):
            pred = np.zeros(SHAPE, bool)
            for c, r in centres:
                if rng.random() < miss_p:
                    continue
                blob(pred, (c[0], c[1] + int(rng.integers(-shift, shift + 1)), c[2]), r)
            for _ in range(n_fp):
                blob(pred, (int(rng.integers(0, 16)), int(rng.integers(0, 24)), int(rng.integers(0, 24))),
                     float(rng.uniform(0.5, 1.8)))
            preds[model] = pred
        save_mask(BinaryMask(gt, SPACING), OUT / "gt" / f"{sid}.lbv")
        for model, pred in preds.items():
            save_mask(BinaryMask(pred, SPACING), OUT / model / f"{sid}.lbv")
        rows.append(f"{sid},{disease},{n_lesions},gt/{sid}.lbv,joint/{sid}.lbv,baseline/{sid}.lbv")
    (OUT / "manifest.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
