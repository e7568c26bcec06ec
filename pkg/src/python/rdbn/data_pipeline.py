"""
rdbn Data Pipeline

Ingests the country-year indicator panel and the national assessment scores,
derives expenditure per researcher, log-transforms it and merges both sources
into the analysis matrix ``D = [Y, X_1997 ... X_2014]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from rdbn.config import OUTCOME, SUBJECTS, YEARS, predictor_labels
from rdbn.exceptions import PipelineError, SchemaError, ValidationError

logger = logging.getLogger(__name__)

Number = Union[float, np.ndarray]
CellIndex = Tuple[int, int]

RAW_COLUMNS = ("Expend", "NumbRD", "GDP", "Pop")
DERIVED_COLUMNS = ("TotExp", "TotRD", "ExpOneRD")

INDICATOR_HEADER = ("country", "year", "expend", "numbrd", "gdp", "pop")
SCORE_HEADER = ("country", "subject", "score")
MARK_HEADER = ("country", "subject", "mark")

SUBJECT_ALIASES = {
    "math": "math",
    "maths": "math",
    "mathematics": "math",
    "read": "reading",
    "reading": "reading",
    "science": "science",
    "sci": "science",
}


def normalize_subject(subject: str) -> str:
    """Map a subject tag or alias onto ``math``, ``reading`` or ``science``."""
    tag = SUBJECT_ALIASES.get(str(subject).strip().lower())
    if tag is None:
        raise ValidationError(f"Unknown subject '{subject}'. Must be one of: {SUBJECTS}")
    return tag


def _as_array(value: Optional[Number]) -> np.ndarray:
    if value is None:
        return np.array(np.nan)
    return np.asarray(value, dtype=float)


def _unwrap(result: np.ndarray) -> Number:
    return float(result) if result.ndim == 0 else result


def _reject_negative(name: str, values: np.ndarray) -> None:
    if np.any(values[~np.isnan(values)] < 0):
        raise ValidationError(f"{name} must be nonnegative")


# ----------------------------------------------------------------------
# Derivations
# ----------------------------------------------------------------------


def compute_total_expenditure(expend: Optional[Number], gdp: Optional[Number]) -> Number:
    """
    Total R&D expenditure in dollars: ``expend * gdp * 1e-2``.

    Args:
        expend: R&D expenditure as percent of GDP (0-100)
        gdp: GDP in current US dollars

    Returns:
        Dollars; NaN wherever an input is missing.

    Raises:
        ValidationError: On negative inputs or a percentage above 100
    """
    e, g = _as_array(expend), _as_array(gdp)
    _reject_negative("expend", e)
    _reject_negative("gdp", g)
    if np.any(e[~np.isnan(e)] > 100):
        raise ValidationError("expend is a percentage and must be <= 100")
    return _unwrap(e * g * 1e-2)


def compute_total_researchers(numbrd: Optional[Number], pop: Optional[Number]) -> Number:
    """Total researchers: ``numbrd * pop * 1e-6`` (numbrd is per million people)."""
    r, p = _as_array(numbrd), _as_array(pop)
    _reject_negative("numbrd", r)
    _reject_negative("pop", p)
    return _unwrap(r * p * 1e-6)


def compute_exp_per_researcher(tot_exp: Optional[Number], tot_rd: Optional[Number]) -> Number:
    """
    Expenditure per researcher: ``tot_exp / tot_rd``.

    A zero researcher count leaves the cell missing and logs a warning.
    """
    e, r = _as_array(tot_exp), _as_array(tot_rd)
    zero = r == 0
    if np.any(zero):
        logger.warning(
            "Expenditure per researcher undefined for %d cell(s) with zero researchers",
            int(np.sum(zero)),
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(zero, np.nan, e / np.where(zero, 1.0, r))
    return _unwrap(out)


def log_transform(x: Optional[Number]) -> Number:
    """Natural logarithm; non-positive cells become missing with a warning."""
    v = _as_array(x)
    bad = ~np.isnan(v) & (v <= 0)
    if np.any(bad):
        logger.warning("Log transform undefined for %d non-positive cell(s)", int(np.sum(bad)))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, np.nan, np.log(np.where(bad, 1.0, v)))
    return _unwrap(out)


# ----------------------------------------------------------------------
# Tables
# ----------------------------------------------------------------------


@dataclass
class IndicatorTable:
    """
    Country x year panel of raw and derived indicators.

    ``frame`` is indexed by (country, year) and holds the raw columns
    Expend, NumbRD, GDP, Pop and, once derived, TotExp, TotRD, ExpOneRD.
    Missing cells are NaN.
    """

    frame: pd.DataFrame

    def __post_init__(self) -> None:
        missing = [c for c in RAW_COLUMNS if c not in self.frame.columns]
        if missing:
            raise ValidationError(f"Indicator table lacks columns: {missing}")
        if list(self.frame.index.names) != ["country", "year"]:
            raise ValidationError("Indicator table must be indexed by (country, year)")
        if not self.frame.index.is_unique:
            raise ValidationError("Indicator table has duplicate (country, year) rows")

    @classmethod
    def from_records(cls, records: Iterable[Dict[str, object]]) -> "IndicatorTable":
        """Build from dicts with keys country, year, expend, numbrd, gdp, pop."""
        frame = pd.DataFrame.from_records(list(records), columns=list(INDICATOR_HEADER))
        return cls(_indicator_frame(frame))

    @property
    def countries(self) -> List[str]:
        return sorted(self.frame.index.get_level_values("country").unique())

    @property
    def is_derived(self) -> bool:
        return all(c in self.frame.columns for c in DERIVED_COLUMNS)

    def __len__(self) -> int:
        return len(self.frame)


def _indicator_frame(frame: pd.DataFrame) -> pd.DataFrame:
    out = pd.DataFrame(
        {
            "country": frame["country"].astype(str),
            "year": frame["year"].astype(int),
            "Expend": pd.to_numeric(frame["expend"]).astype(float),
            "NumbRD": pd.to_numeric(frame["numbrd"]).astype(float),
            "GDP": pd.to_numeric(frame["gdp"]).astype(float),
            "Pop": pd.to_numeric(frame["pop"]).astype(float),
        }
    )
    return out.set_index(["country", "year"]).sort_index()


def derive_indicators(table: IndicatorTable) -> IndicatorTable:
    """
    Fill TotExp, TotRD and ExpOneRD for every row.

    A derived cell is present only when all of its inputs are present.
    """
    frame = table.frame.copy()
    frame["TotExp"] = compute_total_expenditure(frame["Expend"].to_numpy(), frame["GDP"].to_numpy())
    frame["TotRD"] = compute_total_researchers(frame["NumbRD"].to_numpy(), frame["Pop"].to_numpy())
    zero = (frame["TotRD"] == 0).to_numpy()
    for country, year in frame.index[zero]:
        logger.warning("No researchers recorded for %s in %d; ExpOneRD left missing", country, year)
    frame["ExpOneRD"] = compute_exp_per_researcher(
        frame["TotExp"].to_numpy(), frame["TotRD"].to_numpy()
    )
    return IndicatorTable(frame)


@dataclass
class ScoreTable:
    """National scores: one row per country, one column per subject."""

    frame: pd.DataFrame

    def __post_init__(self) -> None:
        if not self.frame.index.is_unique:
            raise ValidationError("Score table has more than one row per country")
        values = self.frame.to_numpy(dtype=float)
        if np.any(np.isinf(values)):
            raise ValidationError("Scores must be finite")

    @property
    def subjects(self) -> List[str]:
        return [s for s in SUBJECTS if s in self.frame.columns and self.frame[s].notna().any()]

    @property
    def countries(self) -> List[str]:
        return sorted(self.frame.index)

    def for_subject(self, subject: str) -> pd.Series:
        """Scores of one subject, countries lacking it dropped."""
        tag = normalize_subject(subject)
        if tag not in self.frame.columns:
            return pd.Series(dtype=float, name=tag)
        return self.frame[tag].dropna()

    def get(self, country: str, subject: str) -> Optional[float]:
        series = self.for_subject(subject)
        return float(series[country]) if country in series.index else None


def aggregate_national_scores(
    records: Union[pd.DataFrame, Iterable[Tuple[str, str, float]]]
) -> ScoreTable:
    """
    Average individual marks per (country, subject).

    Args:
        records: (country, subject, mark) triples or a frame with those columns

    Returns:
        ScoreTable holding the unweighted arithmetic means

    Raises:
        ValidationError: If a mark is not finite or a subject is unknown
    """
    if isinstance(records, pd.DataFrame):
        frame = records.loc[:, ["country", "subject", "mark"]].copy()
    else:
        frame = pd.DataFrame(list(records), columns=["country", "subject", "mark"])
    frame["mark"] = pd.to_numeric(frame["mark"]).astype(float)
    if not np.all(np.isfinite(frame["mark"].to_numpy())):
        raise ValidationError("Individual marks must be finite")
    frame["country"] = frame["country"].astype(str)
    frame["subject"] = [normalize_subject(s) for s in frame["subject"]]
    means = frame.groupby(["country", "subject"])["mark"].mean().unstack("subject")
    means.columns.name = None
    return ScoreTable(means.sort_index())


# ----------------------------------------------------------------------
# CSV ingestion
# ----------------------------------------------------------------------


def _read_csv(path: Union[str, Path], accepted: Sequence[Tuple[str, ...]]) -> Tuple[pd.DataFrame, Tuple[str, ...]]:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise PipelineError(f"File not found: {path}")
    except pd.errors.EmptyDataError:
        raise SchemaError(f"Empty CSV file: {path}", line=1)
    header = tuple(c.strip() for c in frame.columns)
    frame.columns = list(header)
    for expected in accepted:
        if set(expected) <= set(header):
            return frame, expected
    expected = accepted[0]
    unknown = [c for c in header if c not in {c for h in accepted for c in h}]
    missing = [c for c in expected if c not in header]
    column = unknown[0] if unknown else (missing[0] if missing else None)
    raise SchemaError(
        f"Unexpected header in {path}; expected {','.join(expected)}", line=1, column=column
    )


def _parse_number(raw: str, line: int, column: str) -> float:
    raw = raw.strip()
    if raw == "":
        return np.nan
    try:
        value = float(raw)
    except ValueError:
        raise SchemaError(f"Not a number: '{raw}'", line=line, column=column)
    if not np.isfinite(value):
        raise SchemaError(f"Not a finite number: '{raw}'", line=line, column=column)
    return value


def read_indicator_csv(path: Union[str, Path]) -> IndicatorTable:
    """
    Read ``country,year,expend,numbrd,gdp,pop``; empty fields are missing.

    Raises:
        SchemaError: With the 1-based line number of the offending row
    """
    frame, _ = _read_csv(path, [INDICATOR_HEADER])
    rows = []
    seen = set()
    for offset, record in enumerate(frame.to_dict("records")):
        line = offset + 2
        country = record["country"].strip()
        if not country:
            raise SchemaError("Empty country code", line=line, column="country")
        try:
            year = int(record["year"].strip())
        except ValueError:
            raise SchemaError(f"Not a year: '{record['year']}'", line=line, column="year")
        if year not in YEARS:
            raise SchemaError(f"Year {year} outside {YEARS[0]}-{YEARS[-1]}", line=line, column="year")
        if (country, year) in seen:
            raise SchemaError(f"Duplicate row for {country} {year}", line=line)
        seen.add((country, year))
        row = {"country": country, "year": year}
        for column in INDICATOR_HEADER[2:]:
            row[column] = _parse_number(record[column], line, column)
            if row[column] < 0:
                raise SchemaError(f"{column} must be nonnegative, got {row[column]}", line=line, column=column)
        if row["expend"] > 100:
            raise SchemaError(f"expend is a percentage, got {row['expend']}", line=line, column="expend")
        rows.append(row)
    try:
        return IndicatorTable.from_records(rows)
    except ValidationError as e:
        raise SchemaError(str(e))


def read_score_csv(path: Union[str, Path]) -> ScoreTable:
    """
    Read aggregated (``country,subject,score``) or individual-level
    (``country,subject,mark``) scores; the latter is averaged per country.
    """
    frame, header = _read_csv(path, [SCORE_HEADER, MARK_HEADER])
    value_column = header[2]
    records = []
    seen = set()
    for offset, record in enumerate(frame.to_dict("records")):
        line = offset + 2
        country = record["country"].strip()
        if not country:
            raise SchemaError("Empty country code", line=line, column="country")
        try:
            subject = normalize_subject(record["subject"])
        except ValidationError as e:
            raise SchemaError(e.message, line=line, column="subject")
        value = _parse_number(record[value_column], line, value_column)
        if np.isnan(value):
            raise SchemaError("Missing score", line=line, column=value_column)
        if value_column == "score":
            if (country, subject) in seen:
                raise SchemaError(f"Duplicate score for {country} {subject}", line=line)
            seen.add((country, subject))
        records.append((country, subject, value))
    if not records:
        raise SchemaError(f"No score rows in {path}", line=2)
    return aggregate_national_scores(records)


# ----------------------------------------------------------------------
# Merged dataset
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MergedDataset:
    """
    The analysis matrix ``[Y, X_1997 ... X_2014]`` with its missingness mask.

    Column 0 is the outcome; the remaining ``p`` columns are predictors.
    Cell indexes such as S_T and S_NA are expressed in predictor coordinates
    ``(row, j)`` with ``0 <= j < p``.
    """

    countries: Tuple[str, ...]
    columns: Tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray
    subject: str = "reading"

    def __post_init__(self) -> None:
        shape = (len(self.countries), len(self.columns))
        if self.values.shape != shape or self.mask.shape != shape:
            raise ValidationError(
                f"Dataset shape mismatch: values {self.values.shape}, mask {self.mask.shape}, expected {shape}"
            )
        if self.columns[0] != OUTCOME:
            raise ValidationError(f"First column must be the outcome '{OUTCOME}'")
        if np.any(self.mask[:, 0]):
            raise ValidationError("Outcome column may not have missing cells")
        if not np.array_equal(np.isnan(self.values), self.mask):
            raise ValidationError("Mask must mark exactly the NaN cells")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, subject: str = "reading") -> "MergedDataset":
        """Build from a frame indexed by country with Y first; NaN = missing."""
        values = frame.to_numpy(dtype=float)
        return cls(
            countries=tuple(str(c) for c in frame.index),
            columns=tuple(str(c) for c in frame.columns),
            values=values,
            mask=np.isnan(values),
            subject=subject,
        )

    @property
    def n(self) -> int:
        return len(self.countries)

    @property
    def p(self) -> int:
        return len(self.columns) - 1

    @property
    def predictor_columns(self) -> Tuple[str, ...]:
        return self.columns[1:]

    @property
    def s_t_size(self) -> int:
        """|S_T| = n * p."""
        return self.n * self.p

    @property
    def n_missing(self) -> int:
        """|S_NA|."""
        return int(self.mask[:, 1:].sum())

    @property
    def is_complete(self) -> bool:
        return self.n_missing == 0

    def outcome(self) -> np.ndarray:
        return self.values[:, 0].copy()

    def predictor_matrix(self) -> np.ndarray:
        return self.values[:, 1:].copy()

    def predictor_mask(self) -> np.ndarray:
        return self.mask[:, 1:].copy()

    def missing_indexes(self) -> List[CellIndex]:
        """S_NA in row-major order."""
        rows, cols = np.nonzero(self.mask[:, 1:])
        return list(zip(rows.tolist(), cols.tolist()))

    def observed_indexes(self) -> List[CellIndex]:
        """S_T minus S_NA in row-major order."""
        rows, cols = np.nonzero(~self.mask[:, 1:])
        return list(zip(rows.tolist(), cols.tolist()))

    def with_predictors(self, matrix: np.ndarray) -> "MergedDataset":
        """Copy with the predictor block replaced; the mask follows NaNs."""
        if matrix.shape != (self.n, self.p):
            raise ValidationError(f"Predictor block must be {(self.n, self.p)}, got {matrix.shape}")
        values = np.column_stack([self.values[:, 0], matrix]).astype(float)
        return MergedDataset(self.countries, self.columns, values, np.isnan(values), self.subject)

    def to_frame(self) -> pd.DataFrame:
        """Frame indexed by country with one column per variable."""
        frame = pd.DataFrame(self.values, index=list(self.countries), columns=list(self.columns))
        frame.index.name = "country"
        return frame


def merge(scores: ScoreTable, indicators: IndicatorTable, subject: str) -> MergedDataset:
    """
    Inner-join scores and log expenditure per researcher on country code.

    Countries lacking the chosen score are dropped. Predictor columns run
    chronologically from 1997 to 2014; cells without a positive
    expenditure per researcher are marked missing.

    Raises:
        PipelineError: If the subject is absent or no country is shared
    """
    tag = normalize_subject(subject)
    if tag not in scores.subjects:
        raise PipelineError(f"Subject '{tag}' not present in the score table")
    if not indicators.is_derived:
        indicators = derive_indicators(indicators)

    outcome = scores.for_subject(tag)
    shared = sorted(set(outcome.index) & set(indicators.countries))
    if not shared:
        raise PipelineError("Scores and indicators share no country")
    dropped = sorted(set(indicators.countries) - set(outcome.index))
    if dropped:
        logger.info("Dropping %d indicator countries without a %s score", len(dropped), tag)

    per_researcher = indicators.frame["ExpOneRD"].unstack("year")
    per_researcher = per_researcher.reindex(index=shared, columns=list(YEARS))
    logged = log_transform(per_researcher.to_numpy(dtype=float))

    values = np.column_stack([outcome.reindex(shared).to_numpy(dtype=float), logged])
    dataset = MergedDataset(
        countries=tuple(shared),
        columns=(OUTCOME,) + predictor_labels(),
        values=values,
        mask=np.isnan(values),
        subject=tag,
    )
    logger.info(
        "Merged %s: n=%d p=%d missing=%d of %d",
        tag, dataset.n, dataset.p, dataset.n_missing, dataset.s_t_size,
    )
    return dataset


@dataclass(frozen=True)
class MissingnessSummary:
    """Missing predictor counts per column and per country."""

    per_column: Dict[str, int]
    per_country: Dict[str, int]
    total: int
    s_t_size: int
    worst_countries: List[Tuple[str, int]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"column": list(self.per_column), "missing": list(self.per_column.values())}
        )


def missingness_summary(d: MergedDataset, top: int = 3) -> MissingnessSummary:
    """Count missing predictor cells per year column and per country."""
    block = d.mask[:, 1:]
    per_column = {c: int(v) for c, v in zip(d.predictor_columns, block.sum(axis=0))}
    per_country = {c: int(v) for c, v in zip(d.countries, block.sum(axis=1))}
    ranked = sorted(per_country.items(), key=lambda kv: (-kv[1], kv[0]))
    worst = [(c, k) for c, k in ranked[:top] if k > 0]
    return MissingnessSummary(per_column, per_country, int(block.sum()), d.s_t_size, worst)


def score_correlations(scores: ScoreTable) -> pd.DataFrame:
    """Pearson correlations between subjects over countries scored in all."""
    subjects = scores.subjects
    complete = scores.frame.loc[:, subjects].dropna()
    return complete.corr(method="pearson")
