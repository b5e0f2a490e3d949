import os

import numpy as np
import pandas as pd
import pytest
from hypothesis import HealthCheck, settings

from twingap.ingest import COLUMNS, BirthTable
from twingap.synth import SynthConfig

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DEFAULTS = {
    "country": "AA",
    "society": "ND",
    "sex": "M",
    "birth_year": 2000,
    "birth_month": 1,
    "multiplicity": 1,
    "death_age_months": None,
    "age_at_survey_months": 60,
    "survey_year": 2005,
    "mother_age": 30,
    "mother_edu": "none",
    "mother_marital": "married",
    "father_edu": "none",
    "household_size": 5,
    "electricity": 0,
    "radio": 1,
    "tv": 0,
    "car": 0,
}


def make_table(rows, **common) -> BirthTable:
    """BirthTable from partial row dicts; ``child_id``/``mother_id`` default to the row index."""
    full = []
    for i, r in enumerate(rows):
        row = {"child_id": f"c{i}", "mother_id": f"m{i}", **DEFAULTS, **common, **r}
        full.append(row)
    frame = pd.DataFrame(full, columns=list(COLUMNS))
    for col in ("death_age_months", "age_at_survey_months", "mother_age", "household_size",
                "electricity", "radio", "tv", "car"):
        frame[col] = pd.array(frame[col].astype("float").to_numpy(), dtype="Float64").astype("Int64")
    return BirthTable(frame)


def twin(mother, sex_a, sex_b, death_a=None, death_b=None, **kw):
    """Two rows forming one twin delivery of ``mother``."""
    base = {"mother_id": mother, "multiplicity": 2, **kw}
    return [
        {**base, "child_id": f"{mother}-a", "sex": sex_a, "death_age_months": death_a,
         "age_at_survey_months": None if death_a is not None else 60},
        {**base, "child_id": f"{mother}-b", "sex": sex_b, "death_age_months": death_b,
         "age_at_survey_months": None if death_b is not None else 60},
    ]


def planted_config(**overrides) -> SynthConfig:
    """Config whose NN components are (0.010, 0.025, -0.035)."""
    base = dict(
        n_mothers={"ND": 2000, "D": 2000},
        twin_rate=1.0,
        deliveries_per_mother=2,
        prenatal_prevalence=0.5,
        sex_shift=0.1,
        base_hazard={"NN": 0.02, "PNN": 0.015, "CH": 0.015},
        biology_effect={"NN": 0.025, "PNN": 0.01, "CH": -0.005},
        prenatal_mortality_effect={"NN": 0.05, "PNN": 0.02, "CH": 0.01},
        discrimination_effect={"NN": 0.035, "PNN": 0.02, "CH": 0.015},
        seed=20240501,
    )
    base.update(overrides)
    return SynthConfig(**base)


@pytest.fixture(scope="session")
def small_config():
    return planted_config(n_mothers={"ND": 1500, "D": 1500}, twin_rate=0.4, deliveries_per_mother=3, seed=7)


@pytest.fixture(scope="session")
def small_table(small_config):
    from twingap.synth import generate

    return generate(small_config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria outcomes, printed at the end of the run
ACCEPTANCE: dict = {}


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
