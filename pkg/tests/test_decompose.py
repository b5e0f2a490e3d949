import json
import math
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import planted_config
from published import COEFFICIENTS, DECOMPOSITION
from twingap.decompose import (
    INPUTS,
    OUTPUTS,
    DecompositionTable,
    bootstrap_decomposition,
    decompose_all,
    decompose_coefficients,
    decompose_period,
    load_coefficients,
    resample_mothers,
)
from twingap.errors import ConfigurationError, DataError, EstimationError, MissingFitError
from twingap.estimate import ModelSpec
from twingap.pipeline import estimate_fits
from twingap.synth import generate, planted_thetas, shaped_table

finite = st.floats(-1, 1, allow_nan=False, allow_infinity=False)


def fits_from(coeffs):
    out = {}
    for w, c in coeffs.items():
        out[("ND", w, "all_twins")] = c["theta_nd"]
        out[("ND", w, "mf_pairs")] = c["theta_tfe_nd"]
        out[("D", w, "all_twins")] = c["theta_d"]
        out[("D", w, "mf_pairs")] = c["theta_tfe_d"]
    return out


class TestPeriod:
    @pytest.mark.parametrize(
        "inputs, expected",
        [
            ((0.045, 0.027, 0.027, -0.010), (0.018, 0.027, 0, 0.037, 0.027, -0.037)),
            ((0.036, 0.022, 0.045, 0.009), (0.014, 0.022, 0, 0.036, 0.022, -0.013)),
            ((0.004, -0.008, -0.016, -0.031), (0.012, -0.008, 0, 0.015, -0.008, -0.023)),
            ((0, 0, 0, 0), (0, 0, 0, 0, 0, 0)),
        ],
    )
    def test_examples(self, inputs, expected):
        p = decompose_period(*inputs, "I")
        got = [getattr(p, k) for k in OUTPUTS]
        np.testing.assert_allclose(got, expected, atol=1e-12, rtol=0)
        assert p.theta3_nd == 0.0

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(DataError):
            decompose_period(0.1, bad, 0.0, 0.0, "NN")

    @given(finite, finite, finite, finite)
    def test_identities(self, a, b, c, d):
        p = decompose_period(a, b, c, d, "CH")
        assert p.theta1_nd + p.theta2_nd + p.theta3_nd - a == pytest.approx(0, abs=4e-16)
        assert p.theta1_d + p.theta2_d + p.theta3_d - c == pytest.approx(0, abs=8e-16)
        assert p.theta3_nd == 0
        assert p.theta2_d == p.theta2_nd

    @given(finite, finite, finite, finite, st.floats(-5, 5))
    def test_linear(self, a, b, c, d, k):
        p = decompose_period(a, b, c, d, "I")
        q = decompose_period(k * a, k * b, k * c, k * d, "I")
        for name in OUTPUTS:
            assert getattr(q, name) == pytest.approx(k * getattr(p, name), abs=1e-14)

    @given(finite, finite, finite, finite)
    def test_relabel(self, a, b, c, d):
        p = decompose_period(a, b, c, d, "PNN")
        swapped = decompose_period(c, d, a, b, "PNN")
        # swapping regions: the new D is the old ND, so the excess gap flips sign
        assert swapped.theta3_d == pytest.approx(-p.theta3_d, abs=1e-15)
        assert swapped.theta3_d == b - d
        assert swapped.theta1_d == p.theta1_nd and swapped.theta1_nd == p.theta1_d

    def test_dict_round_trip(self):
        p = decompose_period(0.1, 0.2, 0.3, 0.4, "NN")
        assert type(p).from_dict(json.loads(json.dumps(p.to_dict()))) == p


class TestAll:
    def test_published_table(self):
        dec = decompose_all(fits_from(COEFFICIENTS))
        assert dec.windows == ("I", "NN", "PNN", "CH")
        for w, cells in DECOMPOSITION.items():
            for k, v in cells.items():
                assert abs(getattr(dec[w], k) - v) <= 1e-12, (w, k)
            assert dec[w].theta3_nd == 0

    def test_duplicate_regions(self):
        fits = {}
        for (s, w, m), v in fits_from(COEFFICIENTS).items():
            if s == "ND":
                fits[("ND", w, m)] = fits[("D", w, m)] = v
        dec = decompose_all(fits)
        for p in dec:
            assert p.theta3_d == 0 and p.theta1_d == p.theta1_nd

    def test_missing_fit_named(self):
        fits = fits_from(COEFFICIENTS)
        del fits[("D", "PNN", "mf_pairs")]
        with pytest.raises(MissingFitError, match="society=D, window=PNN, mode=mf_pairs"):
            decompose_all(fits)

    def test_coefficients_entry(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(COEFFICIENTS))
        dec = load_coefficients(p)
        assert dec == decompose_all(fits_from(COEFFICIENTS)) or all(
            getattr(dec[w], k) == getattr(decompose_all(fits_from(COEFFICIENTS))[w], k)
            for w in dec.windows for k in OUTPUTS
        )

    @pytest.mark.parametrize(
        "payload, match",
        [({}, "non-empty"), ({"XX": {}}, "unknown"), ({"I": {"theta_nd": 1}}, "missing"),
         ({"I": dict(COEFFICIENTS["I"], extra=1)}, "unexpected")],
    )
    def test_bad_coefficients(self, payload, match):
        with pytest.raises((DataError, ConfigurationError), match=match):
            decompose_coefficients(payload)

    def test_json_round_trip(self):
        dec = decompose_all(fits_from(COEFFICIENTS))
        assert DecompositionTable.from_dict(json.loads(json.dumps(dec.to_dict()))) == dec

    def test_planted_fits(self):
        cfg = planted_config(n_mothers={"ND": 40_000, "D": 40_000})
        fits = estimate_fits(generate(cfg), ["NN", "I"], ModelSpec("none"))
        dec = decompose_all(fits)
        pe = planted_thetas(cfg)
        for w in ("NN", "I"):
            for s, key in (("ND", "theta1_nd"), ("ND", "theta2_nd"), ("D", "theta1_d"), ("D", "theta3_d")):
                name = key.split("_")[0]
                assert abs(getattr(dec[w], key) - pe.get(s, w, name)) < 0.012, (w, key)


def boot_tables(seed=1, n=1500):
    cfg = planted_config(n_mothers={"ND": n, "D": n}, seed=seed)
    t = generate(cfg)
    return t.subset(society="ND"), t.subset(society="D")


class TestBootstrap:
    def test_no_replicates(self):
        nd, d = boot_tables()
        dec = bootstrap_decomposition(nd, d, ["NN"], B=0, spec=ModelSpec("none"))
        assert not dec.has_se and dec["NN"].se is None
        assert "se_theta1_nd" not in dec.to_frame().columns

    def test_deterministic_and_worker_free(self):
        nd, d = boot_tables()
        a = bootstrap_decomposition(nd, d, ["NN", "CH"], B=8, seed=5, spec=ModelSpec("none"))
        b = bootstrap_decomposition(nd, d, ["NN", "CH"], B=8, seed=5, spec=ModelSpec("none"), workers=3)
        assert a == b and a.has_se
        c = bootstrap_decomposition(nd, d, ["NN", "CH"], B=8, seed=6, spec=ModelSpec("none"))
        assert c["NN"].se != a["NN"].se
        # point estimates are the full-sample values
        assert a["NN"].theta1_nd == decompose_all(estimate_fits(nd, ["NN"], ModelSpec("none"))
                                                  | estimate_fits(d, ["NN"], ModelSpec("none")))["NN"].theta1_nd

    def test_negative_b(self):
        nd, d = boot_tables()
        with pytest.raises(ConfigurationError):
            bootstrap_decomposition(nd, d, ["NN"], B=-1)

    def test_wrong_society(self):
        nd, d = boot_tables()
        with pytest.raises(DataError):
            bootstrap_decomposition(d, nd, ["NN"], B=2)

    def test_too_many_discarded(self):
        # D has one mixed-sex pair among mostly singletons: most resamples lose it
        nd = shaped_table("ND", mf_pairs=50, singletons_male=20, singletons_female=20, deaths={"mf_male": 10})
        d = shaped_table("D", mf_pairs=1, mm_pairs=1, singletons_male=30, singletons_female=30,
                         deaths={"mf_female": 1, "mm": 1})
        with pytest.raises(EstimationError, match="bootstrap replicates"):
            bootstrap_decomposition(nd, d, ["I"], B=20, seed=0, spec=ModelSpec("none"))

    def test_resample_keeps_mothers_whole(self):
        nd, _ = boot_tables()
        rng = np.random.default_rng(0)
        r = resample_mothers(nd, rng, "ND")
        assert r.n_mothers == nd.n_mothers
        assert r.frame["child_id"].is_unique
        sizes = r.frame.groupby("mother_id").size().to_numpy()
        assert sorted(set(sizes)) == sorted(set(nd.frame.groupby("mother_id").size().to_numpy()))

    def test_calibration(self):
        """Bootstrap SE of theta2(NN) against the spread over fresh simulations."""
        cfg = planted_config(n_mothers={"ND": 1500, "D": 1500}, deliveries_per_mother=2)
        draws = []
        for rep in range(50):
            t = generate(cfg.replace(seed=1000 + rep, n_mothers={"ND": 1500}))
            draws.append(estimate_fits(t, ["NN"], ModelSpec("none"))[("ND", "NN", "mf_pairs")].theta)
        mc_sd = np.std(draws, ddof=1)
        nd, d = (generate(cfg.replace(seed=1)).subset(society=s) for s in ("ND", "D"))
        t0 = time.perf_counter()
        dec = bootstrap_decomposition(nd, d, ["NN"], B=200, seed=11, spec=ModelSpec("none"))
        print(f"bootstrap SE {dec['NN'].se['theta2_nd']:.5f} vs MC SD {mc_sd:.5f} "
              f"({time.perf_counter() - t0:.1f}s)")
        assert abs(dec["NN"].se["theta2_nd"] / mc_sd - 1) <= 0.30
