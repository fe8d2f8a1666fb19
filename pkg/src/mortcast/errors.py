"""Exception types shared across the package."""


class MortcastError(Exception):
    """Base class for all package-specific errors."""


class LifeTableParseError(MortcastError):
    """A life-table file could not be parsed.

    Carries the 1-based line number of the first offending line when known.
    """

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class IncompleteTableError(MortcastError):
    """A mortality matrix could not be built because a cell is missing."""

    def __init__(self, country: str, sex: str, year: int, age: int):
        super().__init__(
            f"{country}/{sex}: incomplete table, first missing cell at "
            f"(year={year}, age={age})"
        )
        self.country = country
        self.sex = sex
        self.year = year
        self.age = age


class DuplicateCellError(MortcastError):
    """The same (year, age) appears more than once in the input records."""


class YearGapError(MortcastError):
    """The input records do not cover a contiguous range of years."""


class DegenerateComponentError(MortcastError):
    """A singular vector sums to zero, so the bx normalization is undefined."""


class InsufficientDataError(MortcastError):
    """A series is too short for the requested operation."""


class NonConvergenceError(MortcastError):
    """Parameter estimation failed to produce a usable model."""


class SelectionError(MortcastError):
    """No candidate model could be fitted during order selection."""


class NumericError(MortcastError):
    """A non-finite value appeared during network evaluation or training.

    ``step`` is the unroll step index at which the value was produced,
    when applicable.
    """

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"{message} (unroll step {step})"
        super().__init__(message)
        self.step = step


class EmptyDatasetError(MortcastError):
    """No training windows could be produced from the given data."""


class AggregationError(MortcastError):
    """The metric grid is ragged: some model is missing (country, age) cells."""
