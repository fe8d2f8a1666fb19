"""Human Mortality Database life-table ingestion.

Parses HMD period death-rate files ("Mx 1x1" layout: preamble, a header
row, then whitespace-delimited ``Year Age Female Male Total`` rows) into
validated age-by-year mortality matrices, applies the inclusion rules for
the benchmark, and manages a registry of datasets keyed by country and sex.

Ages run 0..110 where 110 stands for the open "110+" bucket, so every
matrix has exactly 111 age rows. Missing values are written as "." in the
source files; matrices are only constructed from fully populated tables.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    DuplicateCellError,
    IncompleteTableError,
    LifeTableParseError,
    YearGapError,
)

N_AGES = 111
OPEN_AGE = 110


class Sex(enum.Enum):
    FEMALE = "female"
    MALE = "male"
    TOTAL = "total"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class LifeTableRecord:
    """One data row of an HMD 1x1 life table.

    Rates are death rates (proportions); ``None`` marks a missing value.
    Rates above 1 are legal: HMD open-age buckets can exceed 1.
    """

    year: int
    age: int
    female: float | None
    male: float | None
    total: float | None

    def rate(self, sex: Sex) -> float | None:
        if sex is Sex.FEMALE:
            return self.female
        if sex is Sex.MALE:
            return self.male
        return self.total


@dataclass
class MortalityMatrix:
    """Ages x years grid of death rates for one (country, sex) pair.

    Invariants (checked on construction): years strictly increasing with
    step 1, 111 age rows labelled 0..110, all entries finite and >= 0.
    """

    country: str
    sex: Sex
    years: list[int]
    rates: np.ndarray  # shape (111, T)

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        t = len(self.years)
        if self.rates.shape != (N_AGES, t):
            raise ValueError(
                f"rates must have shape ({N_AGES}, {t}), got {self.rates.shape}"
            )
        if t == 0:
            raise ValueError("matrix must cover at least one year")
        diffs = np.diff(self.years)
        if t > 1 and not np.all(diffs == 1):
            raise YearGapError(
                f"{self.country}/{self.sex}: years must be contiguous and increasing"
            )
        if not np.all(np.isfinite(self.rates)):
            raise ValueError(f"{self.country}/{self.sex}: rates contain non-finite values")
        if np.any(self.rates < 0):
            raise ValueError(f"{self.country}/{self.sex}: rates must be non-negative")

    @property
    def ages(self) -> list[int]:
        return list(range(N_AGES))

    @property
    def n_years(self) -> int:
        return len(self.years)


@dataclass
class DatasetRegistry:
    """Mortality matrices keyed by (country, sex), with an inclusion threshold."""

    entries: dict[tuple[str, Sex], MortalityMatrix] = field(default_factory=dict)
    min_years: int = 1

    def add(self, matrix: MortalityMatrix) -> None:
        self.entries[(matrix.country, matrix.sex)] = matrix

    def get(self, country: str, sex: Sex = Sex.TOTAL) -> MortalityMatrix:
        return self.entries[(country, sex)]

    def countries(self) -> list[str]:
        return sorted({country for country, _ in self.entries})

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: tuple[str, Sex]) -> bool:
        return key in self.entries


def parse_life_table(text: str | Iterable[str], country: str) -> list[LifeTableRecord]:
    """Parse an HMD "Mx 1x1" file body into one record per data row.

    The preamble (anything before the ``Year Age Female Male Total`` header
    row) is skipped. "110+" maps to age 110 and "." to a missing value.
    Row order is preserved; no data row is ever silently dropped.

    Raises
    ------
    LifeTableParseError
        On a malformed row (wrong column count, unparseable year/age/rate),
        naming the 1-based line number, or when the file has no data rows.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = [line.rstrip("\n") for line in text]

    header_idx = None
    for i, line in enumerate(lines):
        tokens = line.split()
        if len(tokens) >= 2 and tokens[0].lower() == "year" and tokens[1].lower() == "age":
            header_idx = i
            break
    if header_idx is None:
        raise LifeTableParseError(f"{country}: no 'Year Age ...' header row found")

    records: list[LifeTableRecord] = []
    for lineno, line in enumerate(lines[header_idx + 1 :], start=header_idx + 2):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise LifeTableParseError(
                f"{country}: expected 5 columns, got {len(tokens)}", lineno
            )
        records.append(
            LifeTableRecord(
                year=_parse_year(tokens[0], country, lineno),
                age=_parse_age(tokens[1], country, lineno),
                female=_parse_rate(tokens[2], country, lineno),
                male=_parse_rate(tokens[3], country, lineno),
                total=_parse_rate(tokens[4], country, lineno),
            )
        )
    if not records:
        raise LifeTableParseError(f"{country}: file contains no data rows")
    return records


def _parse_year(token: str, country: str, lineno: int) -> int:
    try:
        year = int(token)
    except ValueError:
        raise LifeTableParseError(f"{country}: bad year {token!r}", lineno) from None
    if year <= 0:
        raise LifeTableParseError(f"{country}: bad year {token!r}", lineno)
    return year


def _parse_age(token: str, country: str, lineno: int) -> int:
    if token == f"{OPEN_AGE}+":
        return OPEN_AGE
    try:
        age = int(token)
    except ValueError:
        raise LifeTableParseError(f"{country}: bad age {token!r}", lineno) from None
    if not 0 <= age <= OPEN_AGE:
        raise LifeTableParseError(f"{country}: age {age} out of range 0..{OPEN_AGE}", lineno)
    return age


def _parse_rate(token: str, country: str, lineno: int) -> float | None:
    if token == ".":
        return None
    try:
        rate = float(token)
    except ValueError:
        raise LifeTableParseError(f"{country}: bad rate {token!r}", lineno) from None
    if not np.isfinite(rate) or rate < 0:
        raise LifeTableParseError(f"{country}: bad rate {token!r}", lineno)
    return rate


def build_matrix(
    records: list[LifeTableRecord], country: str, sex: Sex
) -> MortalityMatrix:
    """Assemble records into a complete 111 x T matrix for one sex.

    Raises
    ------
    IncompleteTableError
        When a (year, age) cell is absent or holds a missing value; cites
        the first offending cell in (year, age) order.
    DuplicateCellError
        When the same (year, age) appears twice.
    YearGapError
        When the covered years are not contiguous.
    """
    if not records:
        raise IncompleteTableError(country, str(sex), 0, 0)

    cells: dict[tuple[int, int], float | None] = {}
    for rec in records:
        key = (rec.year, rec.age)
        if key in cells:
            raise DuplicateCellError(
                f"{country}/{sex}: duplicate entry for (year={rec.year}, age={rec.age})"
            )
        cells[key] = rec.rate(sex)

    years_present = sorted({year for year, _ in cells})
    first, last = years_present[0], years_present[-1]
    if years_present != list(range(first, last + 1)):
        missing_years = sorted(set(range(first, last + 1)) - set(years_present))
        raise YearGapError(
            f"{country}/{sex}: year range {first}-{last} has gaps at {missing_years}"
        )

    n_years = last - first + 1
    grid = np.empty((N_AGES, n_years))
    for j, year in enumerate(range(first, last + 1)):
        for age in range(N_AGES):
            value = cells.get((year, age), None)
            if value is None:
                raise IncompleteTableError(country, str(sex), year, age)
            grid[age, j] = value
    return MortalityMatrix(country=country, sex=sex, years=list(range(first, last + 1)), rates=grid)


def apply_exclusions(registry: DatasetRegistry, min_years: int) -> DatasetRegistry:
    """Keep only the entries with at least ``min_years`` years of data.

    Countries whose tables had missing cells never entered the registry
    (build_matrix rejects them), so this realizes both exclusion rules.
    Idempotent; an empty result is legal.
    """
    if min_years < 1:
        raise ValueError("min_years must be >= 1")
    kept = {
        key: matrix
        for key, matrix in registry.entries.items()
        if matrix.n_years >= min_years
    }
    return DatasetRegistry(entries=kept, min_years=min_years)


def dump_matrix_csv(matrix: MortalityMatrix) -> str:
    """Serialize a matrix to the canonical ``country,sex,age,year,rate`` rows.

    Rates are written with shortest round-trip precision, so parsing the
    output back yields bit-identical values.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["country", "sex", "age", "year", "rate"])
    for i in range(N_AGES):
        for j, year in enumerate(matrix.years):
            writer.writerow(
                [matrix.country, matrix.sex.value, i, year, repr(float(matrix.rates[i, j]))]
            )
    return out.getvalue()


def load_matrix_csv(text: str) -> list[MortalityMatrix]:
    """Parse canonical matrix CSV back into matrices (one per country/sex)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["country", "sex", "age", "year", "rate"]:
        raise LifeTableParseError(f"unexpected matrix CSV header: {header!r}")
    cells: dict[tuple[str, Sex], dict[tuple[int, int], float]] = {}
    for row in reader:
        if not row:
            continue
        country, sex_label, age, year, rate = row
        key = (country, Sex(sex_label))
        cells.setdefault(key, {})[(int(year), int(age))] = float(rate)

    matrices = []
    for (country, sex), grid_cells in cells.items():
        years = sorted({year for year, _ in grid_cells})
        grid = np.empty((N_AGES, len(years)))
        for j, year in enumerate(years):
            for age in range(N_AGES):
                grid[age, j] = grid_cells[(year, age)]
        matrices.append(MortalityMatrix(country=country, sex=sex, years=years, rates=grid))
    return matrices


def country_code_from_filename(path: str | Path) -> str:
    """Derive the registry key from an HMD filename, e.g. HUN.Mx_1x1.txt -> hun."""
    return Path(path).name.split(".")[0].lower()


def load_hmd_directory(
    data_dir: str | Path, countries: list[str] | None = None
) -> tuple[DatasetRegistry, list[tuple[str, str]]]:
    """Parse every life-table file in a directory into a registry.

    Returns the registry plus a list of (country, reason) pairs for files
    that failed to parse or build. Files are matched by the ``*.txt``
    suffix; the country code comes from the filename.
    """
    data_dir = Path(data_dir)
    registry = DatasetRegistry()
    failures: list[tuple[str, str]] = []
    wanted = {c.lower() for c in countries} if countries else None
    for path in sorted(data_dir.glob("*.txt")):
        country = country_code_from_filename(path)
        if wanted is not None and country not in wanted:
            continue
        try:
            records = parse_life_table(path.read_text(encoding="utf-8"), country)
            for sex in Sex:
                registry.add(build_matrix(records, country, sex))
        except Exception as exc:  # noqa: BLE001 - per-file isolation is the contract
            failures.append((country, str(exc)))
            # drop any partially added sexes for this country
            for sex in Sex:
                registry.entries.pop((country, sex), None)
    return registry, failures
