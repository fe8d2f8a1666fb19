import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from mortcast.hmd import N_AGES, MortalityMatrix, Sex


def make_matrix(country="tst", sex=Sex.TOTAL, n_years=40, start_year=1960, seed=0):
    """Random but valid mortality matrix with plausible rate magnitudes."""
    rng = np.random.default_rng(seed)
    ages = np.arange(N_AGES)
    level = np.exp(-6.0 + 0.05 * ages)
    rates = level[:, None] * np.exp(rng.normal(0, 0.1, size=(N_AGES, n_years)))
    return MortalityMatrix(
        country=country,
        sex=sex,
        years=list(range(start_year, start_year + n_years)),
        rates=rates,
    )


def rank1_matrix(country="gen", n_years=50, start_year=1950, drift=-0.4, seed=5):
    """Noiseless log-bilinear generator: returns (matrix, ax, bx, kt_full).

    kt is linear with the given drift and centered over the TRAINING years
    (all but the last 10), so a fit on the training part recovers the
    generator exactly.
    """
    rng = np.random.default_rng(seed)
    ages = np.arange(N_AGES)
    ax = -6.5 + 0.045 * ages + rng.normal(0, 0.05, N_AGES)
    weights = rng.uniform(0.5, 1.5, N_AGES)
    bx = weights / weights.sum()
    t = np.arange(n_years, dtype=float)
    kt = drift * t
    kt = kt - kt[: n_years - 10].mean()
    rates = np.exp(ax[:, None] + np.outer(bx, kt))
    matrix = MortalityMatrix(
        country=country,
        sex=Sex.TOTAL,
        years=list(range(start_year, start_year + n_years)),
        rates=rates,
    )
    return matrix, ax, bx, kt
