"""Manual rubric scores: storage and box-plot-style summaries.

Grading itself is a human activity; this module only keeps the 0-5
scores (per location, system, criterion, and run) and computes five-
number summaries. Quartiles use Tukey hinges - medians of the lower and
upper halves, excluding the overall median element when the count is
odd - pinned here so summaries are reproducible.

Scores persist as a flat CSV (one record per line) so the data stays
human-auditable and diff-able.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ecoscapes.errors import (
    DuplicateKeyError,
    EmptyInputError,
    NoDataError,
    OutOfRangeError,
)

SCORE_MIN = 0
SCORE_MAX = 5

SYSTEM_CC = "CC"
SYSTEM_CC_ECOSCAPES = "CC+EcoScapes"
SYSTEM_ECOSCAPES = "EcoScapes"
KNOWN_SYSTEMS = (SYSTEM_CC, SYSTEM_CC_ECOSCAPES, SYSTEM_ECOSCAPES)

# Grading targets and their criteria; report scores grade this pipeline's
# own output, strategy scores grade the downstream assistant's advice.
RUBRIC_CRITERIA = {
    "EcoScapesReport": ("Correctness", "DepthCoverage"),
    "AdaptationStrategy": ("Usability", "Correctness", "Relevancy"),
}

# Scale anchors per criterion, index = score value.
RUBRIC_LEVELS = {
    ("EcoScapesReport", "Correctness"): (
        "Massive mistakes",
        "Major mistakes in one part of the analysis",
        "Medium mistakes",
        "Many smaller mistakes",
        "Few smaller mistakes",
        "No mistakes",
    ),
    ("EcoScapesReport", "DepthCoverage"): (
        "Skips most sections or gives too vague info",
        "Skips a major section",
        "Covers all important sections, but omits key details",
        "Covers all important sections, medium depth",
        "Covers all important sections, some vagueness",
        "Detailed coverage of all important sections",
    ),
    ("AdaptationStrategy", "Usability"): (
        "Output is too vague or generic to be helpful",
        "Output presents general suggestions with little detail",
        "Output gives basic, practical suggestions but lacks creativity",
        "Output is detailed but lacks practical aspects",
        "Output is detailed with some alterations needed",
        "Output is detailed, creative, and practical",
    ),
    ("AdaptationStrategy", "Correctness"): (
        "Output contains misinformation",
        "Major factual errors",
        "Several significant factual inaccuracies",
        "Some minor inaccuracies",
        "Mostly factually correct, with only small details wrong",
        "Fully accurate",
    ),
    ("AdaptationStrategy", "Relevancy"): (
        "Entirely ignores the local context",
        "Mostly irrelevant to the local context",
        "Partially relevant or vague answers",
        "Generally relevant, but hard to implement",
        "Mostly relevant with only minor mismatches",
        "Perfectly aligned with the local context",
    ),
}

CSV_HEADER = ("location", "system", "criterion", "run_index", "value")


@dataclass(frozen=True)
class ScoreRecord:
    location: str
    system: str
    criterion: str
    run_index: int
    value: int

    def __post_init__(self):
        if not isinstance(self.value, int) or isinstance(self.value, bool):
            raise OutOfRangeError(f"score must be an integer, got {self.value!r}")
        if not SCORE_MIN <= self.value <= SCORE_MAX:
            raise OutOfRangeError(
                f"score must be in [{SCORE_MIN}, {SCORE_MAX}], got {self.value}"
            )
        if self.run_index < 1:
            raise ValueError(f"run_index is 1-based, got {self.run_index}")

    @property
    def key(self) -> tuple[str, str, str, int]:
        return (self.location, self.system, self.criterion, self.run_index)


@dataclass(frozen=True)
class FiveNumberSummary:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def __post_init__(self):
        ordered = (self.minimum, self.q1, self.median, self.q3, self.maximum)
        if any(a > b for a, b in zip(ordered, ordered[1:])):
            raise ValueError(f"summary values out of order: {ordered}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.minimum, self.q1, self.median, self.q3, self.maximum)


def _median(sorted_values) -> float:
    n = len(sorted_values)
    mid = n // 2
    if n % 2:
        return float(sorted_values[mid])
    return (sorted_values[mid - 1] + sorted_values[mid]) / 2.0


def summarize(values) -> FiveNumberSummary:
    """Five-number summary with Tukey hinges.

    The median splits the sorted list; q1 and q3 are medians of the
    lower and upper halves, which exclude the middle element when the
    count is odd. A singleton collapses to five equal values.
    """
    data = sorted(values)
    if not data:
        raise EmptyInputError("cannot summarize an empty score list")
    n = len(data)
    if n == 1:
        v = float(data[0])
        return FiveNumberSummary(v, v, v, v, v)
    half = n // 2
    lower = data[:half]
    upper = data[half + 1:] if n % 2 else data[half:]
    return FiveNumberSummary(
        minimum=float(data[0]),
        q1=_median(lower),
        median=_median(data),
        q3=_median(upper),
        maximum=float(data[-1]),
    )


class ScoreStore:
    """Single-writer collection of score records, persisted as CSV."""

    def __init__(self):
        self._records: dict[tuple, ScoreRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def record(self, rec: ScoreRecord) -> None:
        """Insert one record; re-inserting an identical one is a no-op."""
        existing = self._records.get(rec.key)
        if existing is not None:
            if existing.value != rec.value:
                raise DuplicateKeyError(
                    f"{rec.key} already recorded with value {existing.value}, "
                    f"refusing {rec.value}"
                )
            return
        self._records[rec.key] = rec

    def records(self) -> list[ScoreRecord]:
        return sorted(self._records.values(), key=lambda r: r.key)

    def values_for(self, location: str, system: str,
                   criterion: str) -> list[int]:
        return [
            r.value for r in self.records()
            if (r.location, r.system, r.criterion) == (location, system, criterion)
        ]

    def systems_for(self, location: str, criterion: str) -> list[str]:
        present = {
            r.system for r in self._records.values()
            if (r.location, r.criterion) == (location, criterion)
        }
        # Stable, presentation-friendly order: known systems first.
        ordered = [s for s in KNOWN_SYSTEMS if s in present]
        return ordered + sorted(present - set(ordered))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_HEADER)
            for r in self.records():
                writer.writerow([r.location, r.system, r.criterion,
                                 r.run_index, r.value])

    @classmethod
    def load(cls, path) -> "ScoreStore":
        store = cls()
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_HEADER:
                raise ValueError(f"unexpected score file header: {header}")
            for row in reader:
                if not row:
                    continue
                location, system, criterion, run_index, value = row
                store.record(ScoreRecord(location, system, criterion,
                                         int(run_index), int(value)))
        return store


def compare_systems(store: ScoreStore, location: str, criterion: str,
                    systems=None) -> dict[str, FiveNumberSummary]:
    """Per-system summaries for one location and criterion, side by side.

    With ``systems=None`` every system holding data for the slice is
    included; naming systems explicitly makes a missing one an error.
    """
    if systems is None:
        systems = store.systems_for(location, criterion)
        if not systems:
            raise NoDataError(f"no scores for {location!r} / {criterion!r}")
    out: dict[str, FiveNumberSummary] = {}
    for system in systems:
        values = store.values_for(location, system, criterion)
        if not values:
            raise NoDataError(
                f"no scores for system {system!r} at {location!r} / {criterion!r}"
            )
        out[system] = summarize(values)
    return out


def bundled_scores_path() -> Path:
    """Path of the evaluation scores shipped with the package."""
    return Path(str(resources.files("ecoscapes"))) / "data" / "evaluation_scores.csv"


def format_comparison(table: dict[str, FiveNumberSummary], location: str,
                      criterion: str) -> str:
    """Aligned text table of per-system five-number summaries."""
    width = max(len("system"), *(len(s) for s in table))
    lines = [
        f"{location} / {criterion}",
        f"{'system'.ljust(width)}  min   q1    med   q3    max",
    ]
    for system, s in table.items():
        nums = "  ".join(f"{v:<4.4g}" for v in s.as_tuple())
        lines.append(f"{system.ljust(width)}  {nums}")
    return "\n".join(lines)
