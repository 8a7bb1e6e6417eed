import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


def random_mask(rng, max_side=16, density=None, min_side=1):
    shape = tuple(int(s) for s in rng.integers(min_side, max_side + 1, size=3))
    if density is None:
        density = rng.choice([0.1, 0.3, 0.5])
    return (rng.random(shape) < density).astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(20221015)


# reference cohort totals (DSC, FPV, FNV) per model and their expected ranking
REFERENCE_TOTALS = {
    "Baseline": (0.67, 11.07, 9.93),
    "2D UNet": (0.72, 1.63, 4.60),
    "3D L-Res": (0.71, 0.87, 6.05),
    "3D F-Res": (0.77, 5.97, 1.93),
    "Cas-Res": (0.74, 5.48, 3.61),
    "Joint": (0.79, 2.36, 2.50),
}
REFERENCE_RANKING = {"Baseline": 6, "2D UNet": 3, "3D L-Res": 4, "3D F-Res": 2, "Cas-Res": 5, "Joint": 1}


def reference_totals():
    return {m: dict(zip(("dsc", "fpv", "fnv"), v)) for m, v in REFERENCE_TOTALS.items()}


def synthetic_cohort(seed=7, n=1014):
    """Cohort shaped like the public whole-body FDG cohort: four disease groups."""
    from lesionbench.cohort import Disease, StudyRecord

    rng = np.random.default_rng(seed)
    shares = {Disease.NEGATIVE: 513, Disease.MELANOMA: 188, Disease.LUNG_CANCER: 168, Disease.LYMPHOMA: 145}
    diseases = [d for d, k in shares.items() for _ in range(k)][:n]
    records = []
    for i, d in enumerate(diseases):
        count = 0 if d is Disease.NEGATIVE else int(rng.geometric(0.12))
        records.append(StudyRecord(f"study_{i:04d}", d, count))
    return records


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
