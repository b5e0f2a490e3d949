"""Record types, mortality windows and outcome labelling.

Ages are completed months: ``death_age_months == 0`` means the child died
before completing its first month. A window ``(start, end]`` in the verbal
sense is therefore the half-open range ``start <= death_age < end`` on
completed months, which makes NN, PNN and CH partition the first five years.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DataError

SEXES = ("male", "female")
SOCIETIES = ("ND", "D")
EDUCATION_LEVELS = ("none", "primary", "secondary+")
MARITAL_STATUSES = (
    "married",
    "single",
    "widowed",
    "partner",
    "not_living_with_partner",
    "divorced",
)
ASSETS = ("electricity", "radio", "tv", "car")
PAIR_TYPES = ("MF", "MM", "FF")


@dataclass(frozen=True)
class MortalityWindow:
    """An age interval in completed months with its survival condition.

    A child is at risk in the window only after surviving ``start_month``
    completed months; it counts as a death when ``start_month <= death_age <
    end_month``.
    """

    kind: str
    start_month: int
    end_month: int
    label: str = field(default="", compare=False)

    @property
    def requires_survival_to(self) -> int:
        return self.start_month

    @property
    def is_conditional(self) -> bool:
        return self.start_month > 0


WINDOWS = {
    "I": MortalityWindow("I", 0, 12, "Infant mortality"),
    "NN": MortalityWindow("NN", 0, 1, "Neonatal mortality"),
    "PNN": MortalityWindow("PNN", 1, 12, "Postneonatal mortality"),
    "CH": MortalityWindow("CH", 12, 60, "Child mortality"),
}
WINDOW_ORDER = ("I", "NN", "PNN", "CH")


def get_window(window) -> MortalityWindow:
    """Resolve a window kind (``"NN"``) or pass a MortalityWindow through."""
    if isinstance(window, MortalityWindow):
        if WINDOWS.get(window.kind) != window:
            raise ConfigurationError(f"unknown mortality window {window!r}")
        return window
    try:
        return WINDOWS[str(window).upper()]
    except KeyError:
        raise ConfigurationError(
            f"unknown mortality window {window!r}; expected one of {', '.join(WINDOW_ORDER)}"
        ) from None


def parse_windows(windows) -> tuple:
    """Normalise a window list (names or objects, or a comma string) to kinds in canonical order."""
    if windows is None:
        return WINDOW_ORDER
    if isinstance(windows, str):
        windows = [w for w in windows.split(",") if w.strip()]
    kinds = {get_window(w.strip() if isinstance(w, str) else w).kind for w in windows}
    if not kinds:
        raise ConfigurationError("no mortality windows selected")
    return tuple(k for k in WINDOW_ORDER if k in kinds)


@dataclass(frozen=True)
class BirthRecord:
    """One live birth."""

    child_id: str
    mother_id: str
    country_code: str
    society: str
    sex: str
    birth_year: int
    birth_month: int
    multiplicity: int
    survey_year: int
    death_age_months: Optional[int] = None
    age_at_survey_months: Optional[int] = None
    mother_age_years: Optional[int] = None
    mother_education: Optional[str] = None
    mother_marital: Optional[str] = None
    father_education: Optional[str] = None
    household_size: Optional[int] = None
    electricity: Optional[int] = None
    radio: Optional[int] = None
    tv: Optional[int] = None
    car: Optional[int] = None

    def __post_init__(self):
        if self.sex not in SEXES:
            raise DataError(f"child {self.child_id}: sex must be male or female, got {self.sex!r}")
        if self.society not in SOCIETIES:
            raise DataError(f"child {self.child_id}: society must be ND or D, got {self.society!r}")
        if self.multiplicity < 1:
            raise DataError(f"child {self.child_id}: multiplicity must be >= 1")
        if not 1 <= self.birth_month <= 12:
            raise DataError(f"child {self.child_id}: birth_month must be in 1..12")
        if self.death_age_months is None and self.age_at_survey_months is None:
            raise DataError(
                f"child {self.child_id}: death_age_months and age_at_survey_months are both missing"
            )
        if self.death_age_months is not None and self.death_age_months < 0:
            raise DataError(f"child {self.child_id}: negative death_age_months")
        if (
            self.death_age_months is not None
            and self.age_at_survey_months is not None
            and self.death_age_months > self.age_at_survey_months
        ):
            raise DataError(f"child {self.child_id}: death_age_months exceeds age_at_survey_months")

    @property
    def is_male(self) -> bool:
        return self.sex == "male"

    @property
    def alive(self) -> bool:
        return self.death_age_months is None


def classify_window(record: BirthRecord, window) -> Optional[int]:
    """Outcome of ``record`` in ``window``: 1 (died in it), 0 (survived it) or None (ineligible).

    A child is ineligible when it died before reaching the window, or when it
    is alive but younger than the window's end at the survey.

    >>> r = BirthRecord("c1", "m1", "X", "ND", "male", 2000, 1, 1, 2006, death_age_months=0)
    >>> classify_window(r, "NN"), classify_window(r, "PNN")
    (1, None)
    """
    w = get_window(window)
    death = record.death_age_months
    if death is None and record.age_at_survey_months is None:
        raise DataError(f"child {record.child_id}: no death age and no age at survey")
    if death is not None:
        if death < w.start_month:
            return None
        return 1 if death < w.end_month else 0
    return 0 if record.age_at_survey_months >= w.end_month else None


def window_outcomes(death_age, age_at_survey, window):
    """Vectorised :func:`classify_window`.

    Parameters
    ----------
    death_age, age_at_survey : array_like of float
        Completed months; NaN marks an absent value.
    window : str or MortalityWindow

    Returns
    -------
    eligible : ndarray of bool
    outcome : ndarray of int8
        Zero wherever ``eligible`` is False.
    """
    w = get_window(window)
    death = np.asarray(death_age, dtype=float)
    age = np.asarray(age_at_survey, dtype=float)
    dead = ~np.isnan(death)
    if np.any(~dead & np.isnan(age)):
        raise DataError("records with neither death age nor age at survey")
    with np.errstate(invalid="ignore"):
        died_in = dead & (death >= w.start_month) & (death < w.end_month)
        survived_dead = dead & (death >= w.end_month)
        survived_alive = ~dead & (age >= w.end_month)
    eligible = died_in | survived_dead | survived_alive
    return eligible, died_in.astype(np.int8)


@dataclass(frozen=True)
class TwinPair:
    """Two co-twins matched on mother and month of birth."""

    pair_id: int
    mother_id: str
    member_a: str
    member_b: str
    sex_a: str
    sex_b: str

    def __post_init__(self):
        if self.sex_a not in SEXES or self.sex_b not in SEXES:
            raise DataError(f"pair {self.pair_id}: invalid member sex")

    @property
    def pair_type(self) -> str:
        return pair_type(self)


def pair_type(pair: TwinPair) -> str:
    """``"MF"`` for a mixed-sex pair, else ``"MM"`` or ``"FF"``."""
    if pair.sex_a != pair.sex_b:
        return "MF"
    return "MM" if pair.sex_a == "male" else "FF"
