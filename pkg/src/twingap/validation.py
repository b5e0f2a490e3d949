"""Input coercion shared by the estimator classes and the CLI."""

from __future__ import annotations

import os

import numpy as np
import pandas as pd
from sklearn.utils.validation import check_array, check_consistent_length

from .domain import MortalityWindow, get_window
from .errors import ConfigurationError, DataError
from .ingest import BirthTable, parse_births


def check_birth_table(obj) -> BirthTable:
    """Return a BirthTable from a table, a DataFrame or a CSV path."""
    if isinstance(obj, BirthTable):
        return obj
    if isinstance(obj, pd.DataFrame):
        return BirthTable(obj)
    if isinstance(obj, (str, os.PathLike)):
        return parse_births(obj)
    raise DataError(f"expected a BirthTable, DataFrame or CSV path, got {type(obj).__name__}")


def check_window(window) -> MortalityWindow:
    return window if isinstance(window, MortalityWindow) else get_window(window)


def check_xy(X, y, groups=None):
    """Validate a numeric regression problem.

    Returns float arrays ``X`` (2-D), ``y`` (1-D) and ``groups`` (one id per
    row; each row its own group when omitted).
    """
    X = check_array(X, dtype=float, ensure_2d=True)
    y = check_array(y, dtype=float, ensure_2d=False)
    if y.ndim != 1:
        raise DataError(f"y must be one-dimensional, got shape {y.shape}")
    groups = np.arange(len(y)) if groups is None else np.asarray(groups)
    check_consistent_length(X, y, groups)
    if groups.ndim != 1:
        raise DataError("groups must be one-dimensional")
    return X, y, groups


def check_positive_int(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
