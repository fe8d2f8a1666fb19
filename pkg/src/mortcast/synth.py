"""Seeded synthetic mortality data from a low-rank log-bilinear generator.

Ships with the package so the whole pipeline (ingestion, models, reports)
runs with zero external data. Each country draws an age profile shaped
like observed mortality (infant bump, adult plateau, exponential old-age
rise) and up to three normalized age-response components. The leading
index path is a drifting random walk; the higher ones are curved
(quadratic/cubic) paths with a little wobble, whose time shapes stay
linearly independent of the leading drift so the decomposition can
separate them. Log rates are the bilinear sum plus Gaussian noise;
female/male variants scale the total rates by smooth sex factors so the
coed regime has real inputs.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .hmd import N_AGES, DatasetRegistry, MortalityMatrix, Sex


def _age_profile(rng: np.random.Generator) -> np.ndarray:
    ages = np.arange(N_AGES, dtype=float)
    base = 0.0003 * np.exp(0.075 * ages) + 0.008 * np.exp(-0.8 * ages) + 1e-4
    return np.log(base) + rng.uniform(-0.3, 0.3)


def _smooth_component(rng: np.random.Generator) -> np.ndarray:
    """Random smooth age response normalized to sum exactly to 1."""
    raw = rng.normal(size=N_AGES)
    kernel = np.ones(9) / 9.0
    smooth = np.convolve(raw, kernel, mode="same")
    smooth *= (1.0 / N_AGES) / max(np.std(smooth), 1e-12)
    return smooth + (1.0 - smooth.sum()) / N_AGES


def _curved_path(
    rng: np.random.Generator, n_years: int, degree: int, scale: float
) -> np.ndarray:
    """Smooth polynomial index path plus a little random-walk wobble.

    Degrees 2 and 3 give time shapes that are linearly independent of the
    leading drifting walk (and of each other), so the SVD can separate the
    components; being smooth, they stay forecastable at short horizons.
    """
    t = np.linspace(0.0, 1.0, n_years)
    pivot = rng.uniform(0.25, 0.75)
    shape = np.sign(rng.standard_normal()) * (t - pivot) ** degree
    shape = shape - shape.mean()
    shape = shape / max(np.std(shape), 1e-12) * scale
    wobble = np.cumsum(rng.normal(0.0, 0.02 * scale, size=n_years))
    wobble -= wobble.mean()
    return shape + wobble


def generate_matrix(
    country: str,
    n_years: int,
    rng: np.random.Generator,
    order: int = 3,
    noise: float = 0.02,
    start_year: int = 1950,
) -> dict[Sex, MortalityMatrix]:
    """One country's female/male/total matrices from the rank-``order`` model."""
    ax = _age_profile(rng)

    # leading component: positive weights, strong downward index drift
    weights = rng.uniform(0.5, 1.5, size=N_AGES)
    components = [weights / weights.sum()]
    lead = np.cumsum(-rng.uniform(0.5, 1.0) + rng.normal(0.0, 0.25, size=n_years))
    paths = [lead - lead.mean()]
    # higher components: curved paths strong enough to clear the cell noise
    for degree, scale in [(2, 2.5), (3, 1.2)][: max(order - 1, 0)]:
        components.append(_smooth_component(rng))
        paths.append(_curved_path(rng, n_years, degree=degree, scale=scale))

    log_total = ax[:, None] + sum(
        np.outer(b, k) for b, k in zip(components, paths)
    ) + rng.normal(0.0, noise, size=(N_AGES, n_years))

    sex_gap = rng.uniform(0.1, 0.3)
    smooth_f = np.convolve(rng.normal(0, 0.02, N_AGES), np.ones(9) / 9.0, mode="same")
    smooth_m = np.convolve(rng.normal(0, 0.02, N_AGES), np.ones(9) / 9.0, mode="same")
    surfaces = {
        Sex.TOTAL: log_total,
        Sex.FEMALE: log_total - sex_gap + smooth_f[:, None],
        Sex.MALE: log_total + sex_gap + smooth_m[:, None],
    }
    years = list(range(start_year, start_year + n_years))
    return {
        sex: MortalityMatrix(country=country, sex=sex, years=years, rates=np.exp(surface))
        for sex, surface in surfaces.items()
    }


def generate_registry(
    n_countries: int = 20,
    n_years: int = 60,
    order: int = 3,
    noise: float = 0.02,
    seed: int = 0,
    start_year: int = 1950,
) -> DatasetRegistry:
    """Registry of ``n_countries`` synthetic countries named c00, c01, ..."""
    rng = np.random.default_rng(seed)
    registry = DatasetRegistry()
    for index in range(n_countries):
        for matrix in generate_matrix(
            f"c{index:02d}", n_years, rng, order=order, noise=noise, start_year=start_year
        ).values():
            registry.add(matrix)
    return registry


def write_hmd_files(registry: DatasetRegistry, output_dir: str | Path) -> list[Path]:
    """Write each country as an HMD-style Mx 1x1 text file (round-trippable)."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for country in registry.countries():
        female = registry.get(country, Sex.FEMALE)
        male = registry.get(country, Sex.MALE)
        total = registry.get(country, Sex.TOTAL)
        lines = [
            f"{country}, Death rates (period 1x1), synthetic data",
            "",
            "  Year          Age             Female            Male           Total",
        ]
        for j, year in enumerate(total.years):
            for age in range(N_AGES):
                label = f"{age}" if age < N_AGES - 1 else f"{age}+"
                lines.append(
                    f"  {year}  {label:>5s}  {float(female.rates[age, j])!r}  "
                    f"{float(male.rates[age, j])!r}  {float(total.rates[age, j])!r}"
                )
        path = output_dir / f"{country}.Mx_1x1.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(path)
    return paths
