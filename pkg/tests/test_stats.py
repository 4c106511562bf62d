# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Tests for regression, correlation and distribution-shape statistics."""

import logging
from contextlib import nullcontext

import numpy as np
import pandas as pd
import pytest
from scipy import stats as sps
from scipy.optimize import linprog

from aesthetics.stats import (
    INTERCEPT,
    DesignMatrix,
    LengthMismatchError,
    NotNestedError,
    RankDeficientError,
    SampleSizeOutOfRangeError,
    TooFewPointsError,
    TooFewRowsError,
    ZeroVarianceError,
    dip_statistic,
    dip_test,
    distribution_tests,
    nested_f_test,
    ols_fit,
    pearson_corr_matrix,
    shapiro_wilk,
)

# Weights (lb) of 11 men from the worked example accompanying the W test.
MEN_WEIGHTS = [148, 154, 158, 160, 161, 162, 166, 170, 182, 195, 236]


def _design(columns, intercept=True, drop_constant=True):
    frame = pd.DataFrame(columns)
    frame.index = [f"r{i}" for i in range(len(frame))]
    return DesignMatrix.from_frame(frame, list(columns), intercept, drop_constant)


def _planted(rng, n=80):
    f1, f2 = rng.normal(size=n), rng.normal(size=n)
    y = 0.5 * f1 - 0.3 * f2 + rng.normal(0.0, 0.1, size=n)
    return {"f1": f1, "f2": f2}, y


def test_ols_noiseless_line():
    result = ols_fit(_design({"x": [0.0, 1.0, 2.0]}), [1.0, 3.0, 5.0])

    assert result.coefficient(INTERCEPT).beta == pytest.approx(1.0)
    assert result.coefficient("x").beta == pytest.approx(2.0)
    assert result.r2 == pytest.approx(1.0)
    assert result.rss == pytest.approx(0.0, abs=1e-20)
    assert result.df_resid == 1


def test_ols_matches_normal_equations(rng):
    columns, y = _planted(rng)
    design = _design(columns)

    result = ols_fit(design, y, style="sporty")

    x = design.values
    xtx_inv = np.linalg.inv(x.T @ x)
    beta = xtx_inv @ x.T @ y
    residuals = y - x @ beta
    sigma2 = residuals @ residuals / (len(y) - 3)
    se = np.sqrt(np.diag(xtx_inv) * sigma2)
    frame = result.to_frame()
    np.testing.assert_allclose(frame["beta"], beta, atol=1e-8)
    np.testing.assert_allclose(frame["std_err"], se, atol=1e-8)
    assert list(frame["style"]) == ["sporty"] * 3
    for name, truth in (("f1", 0.5), ("f2", -0.3)):
        record = result.coefficient(name)
        assert abs(record.beta - truth) < 3 * record.std_err
        assert record.ci_lo < record.beta < record.ci_hi
        assert record.p < 1e-6


def test_ols_matches_normal_equations_on_random_designs():
    rng = np.random.default_rng(29)
    for _ in range(100):
        n_features = int(rng.integers(1, 11))
        columns = {f"f{i}": rng.normal(size=80) for i in range(n_features)}
        y = rng.normal(size=80) + sum(rng.normal() * column for column in columns.values())
        design = _design(columns)

        frame = ols_fit(design, y).to_frame()

        x = design.values
        xtx_inv = np.linalg.inv(x.T @ x)
        beta = xtx_inv @ x.T @ y
        residuals = y - x @ beta
        df_resid = len(y) - x.shape[1]
        se = np.sqrt(np.diag(xtx_inv) * (residuals @ residuals) / df_resid)
        t = beta / se
        p = 2.0 * sps.t.sf(np.abs(t), df_resid)
        np.testing.assert_allclose(frame["beta"], beta, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(frame["std_err"], se, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(frame["t"], t, rtol=1e-8, atol=1e-8)
        np.testing.assert_allclose(frame["p"], p, rtol=1e-8, atol=1e-10)


def test_ols_residuals_orthogonal_to_design(rng):
    columns, y = _planted(rng)
    design = _design(columns)

    result = ols_fit(design, y)

    residuals = result.response - result.fitted
    assert np.max(np.abs(design.values.T @ residuals)) <= 1e-8 * np.linalg.norm(y)


def test_ols_shift_moves_only_intercept(rng):
    columns, y = _planted(rng)
    design = _design(columns)

    base = ols_fit(design, y).to_frame().set_index("feature")
    shifted = ols_fit(design, y + 7.0).to_frame().set_index("feature")

    assert shifted.loc[INTERCEPT, "beta"] == pytest.approx(base.loc[INTERCEPT, "beta"] + 7.0)
    for column in ("beta", "std_err", "t", "p"):
        np.testing.assert_allclose(
            shifted.loc[["f1", "f2"], column], base.loc[["f1", "f2"], column], atol=1e-10
        )


@pytest.mark.parametrize(
    "columns, y, context_raised",
    (
        ({"a": [1.0, 2.0, 3.0, 4.0], "b": [2.0, 4.0, 6.0, 8.0]}, [1, 2, 3, 5], RankDeficientError),
        ({"a": [1.0, 2.0], "b": [0.0, 1.0]}, [1, 2], TooFewRowsError),
        ({"a": [1.0, 2.0, 3.0]}, [1, 2], LengthMismatchError),
    ),
)
def test_ols_fit_errors(columns, y, context_raised):
    with pytest.raises(context_raised):
        ols_fit(_design(columns, drop_constant=False), y)


def test_design_matrix_excludes_rows_and_drops_constants(caplog):
    caplog.set_level(logging.INFO)
    frame = pd.DataFrame(
        {"a": [1.0, np.nan, 3.0, 4.0], "b": [5.0, 5.0, 5.0, 5.0], "c": [0.0, 1.0, 0.0, 2.0]},
        index=["s1", "s2", "s3", "s4"],
    )

    design = DesignMatrix.from_frame(frame, ["a", "b", "c"])

    assert design.column_names == (INTERCEPT, "a", "c")
    assert design.row_ids == ("s1", "s3", "s4")
    assert design.excluded_rows == ("s2",)
    assert design.dropped_columns == ("b",)
    assert design.shape == (3, 3)
    assert "Dropping zero-variance columns: b" in caplog.text
    assert "Excluding 1 rows" in caplog.text


def test_r2_of_full_model_at_least_restricted(rng):
    columns, y = _planted(rng)
    restricted = ols_fit(_design({"f1": columns["f1"]}), y)
    full = ols_fit(_design(columns), y)
    assert full.r2 >= restricted.r2


def test_nested_f_test_identical_models(rng):
    columns, y = _planted(rng)
    result = ols_fit(_design(columns), y)

    test = nested_f_test(result, result)

    assert test.to_dict() == {"F": 0.0, "df1": 0, "df2": result.df_resid, "p": 1.0}


def test_nested_f_test_hand_computed():
    x1 = np.arange(10.0)
    x2 = np.array([0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0])
    noise = np.array([0.1, -0.2, 0.05, 0.0, 0.3, -0.1, 0.2, -0.3, 0.1, 0.0])
    y = 1.0 + 0.5 * x1 + 2.0 * x2 + noise

    restricted = ols_fit(_design({"x1": x1}), y)
    full = ols_fit(_design({"x1": x1, "x2": x2}), y)
    test = nested_f_test(restricted, full)

    def rss(x):
        x = np.column_stack([np.ones(10), x])
        residuals = y - x @ np.linalg.lstsq(x, y, rcond=None)[0]
        return residuals @ residuals

    rss_r, rss_f = rss(x1), rss(np.column_stack([x1, x2]))
    assert (test.df1, test.df2) == (1, 7)
    assert test.f == pytest.approx(((rss_r - rss_f) / 1) / (rss_f / 7), rel=1e-10)
    assert test.p < 1e-3


def test_nested_f_test_rejects_non_nested(rng):
    columns, y = _planted(rng)
    first = ols_fit(_design({"f1": columns["f1"]}), y)
    second = ols_fit(_design({"f2": columns["f2"]}), y)
    with pytest.raises(NotNestedError):
        nested_f_test(first, second)


def test_pooled_interaction_degrees_of_freedom(rng):
    styles = [f"s{i}" for i in range(9)]
    n_stimuli = 80
    style = np.repeat(np.arange(9), n_stimuli)
    cosine = rng.uniform(size=len(style))
    y = rng.normal(size=len(style))
    additive = {"cosine": cosine}
    for k in range(1, 9):
        additive[f"style[{styles[k]}]"] = (style == k).astype(float)
    full = dict(additive)
    for k in range(1, 9):
        full[f"cosine:style[{styles[k]}]"] = cosine * (style == k)

    test = nested_f_test(ols_fit(_design(additive), y), ols_fit(_design(full), y))

    assert (test.df1, test.df2) == (8, 702)


def test_pearson_corr_matrix(rng):
    x = rng.normal(size=20)
    y = rng.normal(size=20)

    matrix = pearson_corr_matrix({"x": x, "neg": -x, "y": y})

    assert matrix.loc["x", "neg"] == pytest.approx(-1.0)
    assert np.all(np.diag(matrix.to_numpy()) == 1.0)
    np.testing.assert_array_equal(matrix.to_numpy(), matrix.to_numpy().T)
    assert np.linalg.eigvalsh(matrix.to_numpy()).min() >= -1e-8


@pytest.mark.parametrize(
    "columns, context_raised",
    (
        ({"a": [1, 2, 3], "b": [3, 1, 2]}, nullcontext()),
        ({"a": [1, 2], "b": [2, 1]}, pytest.raises(TooFewPointsError)),
        ({"a": [1, 2, 3], "b": [1, 2]}, pytest.raises(LengthMismatchError)),
        ({"a": [1, 2, 3], "b": [4, 4, 4]}, pytest.raises(ZeroVarianceError)),
    ),
)
def test_pearson_corr_matrix_errors(columns, context_raised):
    with context_raised:
        assert pearson_corr_matrix(columns).loc["a", "b"] == pytest.approx(-0.5)


@pytest.mark.parametrize("n", (4, 5, 10, 50))
def test_dip_of_equally_spaced_sample_is_minimal(n):
    assert dip_statistic(np.arange(n, dtype=float)) == pytest.approx(1 / (2 * n))


def _closest_unimodal_distance(sample):
    """Smallest sup distance to a unimodal CDF, by one linear program per mode segment.

    Unknowns are the CDF values at the sorted points plus the distance t. The CDF is linear
    between points, so unimodality means chord slopes rise up to the mode segment and fall
    after it.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = len(x)
    gaps = np.diff(x)
    best = np.inf
    for mode in range(n - 1):
        rows, bounds = [], []
        for i in range(n):
            for level in (i / n, (i + 1) / n):
                above, below = np.zeros(n + 1), np.zeros(n + 1)
                above[i], above[n] = 1.0, -1.0
                below[i], below[n] = -1.0, -1.0
                rows += [above, below]
                bounds += [level, -level]
        for i in range(n - 1):
            row = np.zeros(n + 1)
            row[i], row[i + 1] = 1.0, -1.0
            rows.append(row)
            bounds.append(0.0)
        for i in range(n - 2):
            row = np.zeros(n + 1)
            row[i] += 1.0 / gaps[i]
            row[i + 1] -= 1.0 / gaps[i] + 1.0 / gaps[i + 1]
            row[i + 2] += 1.0 / gaps[i + 1]
            # rows encode slope[i] - slope[i + 1] <= 0 before the mode, the reverse after
            rows.append(-row if i < mode else row)
            bounds.append(0.0)
        objective = np.zeros(n + 1)
        objective[n] = 1.0
        solution = linprog(
            objective,
            A_ub=np.array(rows),
            b_ub=np.array(bounds),
            bounds=[(0.0, 1.0)] * n + [(0.0, None)],
            method="highs",
        )
        best = min(best, solution.fun)
    return best


def test_dip_matches_closest_unimodal_distance_on_five_points():
    rng = np.random.default_rng(17)
    for _ in range(100):
        sample = np.sort(rng.normal(size=5))
        assert dip_statistic(sample) == pytest.approx(
            _closest_unimodal_distance(sample), abs=1e-6
        )


def test_dip_invariant_under_affine_transform(rng):
    sample = rng.normal(size=60)
    assert dip_statistic(3.0 * sample - 2.0) == pytest.approx(dip_statistic(sample), abs=1e-12)


def test_dip_detects_bimodality(rng):
    sample = np.concatenate([rng.normal(0.0, 0.1, 50), rng.normal(10.0, 0.1, 50)])

    result = dip_test(sample, reps=500, seed=3)

    assert 0.2 < result.statistic <= 0.25
    assert result.p_value < 0.01


def test_dip_test_rejects_well_separated_mixtures():
    rejected = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        sample = np.concatenate([rng.normal(0.0, 1.0, 100), rng.normal(6.0, 1.0, 100)])
        rejected += dip_test(sample, reps=500, seed=11).p_value < 0.01
    assert rejected >= 95


def test_dip_test_accepts_normal_samples():
    accepted = sum(
        dip_test(np.random.default_rng(seed).normal(size=80), reps=200, seed=11).p_value > 0.05
        for seed in range(100)
    )
    assert accepted >= 90


def test_dip_needs_four_points():
    with pytest.raises(TooFewPointsError):
        dip_statistic([1.0, 2.0, 3.0])


def test_dip_test_is_seeded(rng):
    sample = rng.normal(size=30)
    assert dip_test(sample, reps=300, seed=5) == dip_test(sample, reps=300, seed=5)


def test_shapiro_wilk_worked_example():
    result = shapiro_wilk(MEN_WEIGHTS)

    assert result.w == pytest.approx(0.79, abs=0.005)
    assert result.p_value < 0.01
    assert result.to_dict()["n"] == 11


@pytest.mark.parametrize(
    "sample, context_raised",
    (
        ([1.0, 2.0], pytest.raises(SampleSizeOutOfRangeError)),
        ([2.0, 2.0, 2.0], nullcontext()),
    ),
)
def test_shapiro_wilk_edges(sample, context_raised):
    with context_raised:
        assert shapiro_wilk(sample).to_dict() == {"W": 1.0, "p": 1.0, "n": 3}


def test_distribution_tests_skip_small_samples(caplog):
    summary = distribution_tests([0.1, 0.5, 0.2], reps=50, seed=0)

    assert summary["dip"] is None
    assert summary["shapiro"]["n"] == 3
    assert "Skipping dip test" in caplog.text
