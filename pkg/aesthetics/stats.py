# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Statistical core: OLS with nested F-tests, the dip test, Shapiro-Wilk and correlation."""

import functools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg
from scipy import stats as sps

logger = logging.getLogger(__name__)

INTERCEPT = "intercept"
RANK_TOLERANCE = 1e-10
SHAPIRO_MIN, SHAPIRO_MAX = 3, 5000
DIP_MIN = 4


class StatsError(Exception):
    """Base class for statistical failures."""


class RankDeficientError(StatsError):
    """Raised if the design matrix is (numerically) rank deficient."""

    def __init__(self, msg: str, columns: Sequence[str] = ()):
        super().__init__(msg)
        self.columns = list(columns)


class TooFewRowsError(StatsError):
    """Raised if there are not more observations than coefficients."""


class NotNestedError(StatsError):
    """Raised if two models cannot be compared with a nested F-test."""


class TooFewPointsError(StatsError):
    """Raised if a sample is too small for the requested test."""


class SampleSizeOutOfRangeError(StatsError):
    """Raised if a Shapiro-Wilk sample has fewer than 3 or more than 5000 values."""


class ZeroVarianceError(StatsError):
    """Raised if a correlation input column is constant."""

    def __init__(self, msg: str, column: str):
        super().__init__(msg)
        self.column = column


class LengthMismatchError(StatsError):
    """Raised if columns or vectors that must align have different lengths."""


@dataclass
class DesignMatrix:
    """Named regressors for one model. The intercept, when present, is the first column."""

    row_ids: Tuple[str, ...]
    column_names: Tuple[str, ...]
    values: np.ndarray
    dropped_columns: Tuple[str, ...] = ()
    excluded_rows: Tuple[str, ...] = ()

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        columns: Sequence[str],
        intercept: bool = True,
        drop_constant: bool = True,
    ) -> "DesignMatrix":
        """Builds a design matrix from numeric frame columns.

        Rows with a missing value in any selected column are excluded. Constant columns are
        dropped when drop_constant is set, since they are collinear with the intercept.
        """
        selected = frame.loc[:, list(columns)].apply(pd.to_numeric, errors="coerce")
        complete = selected.notna().all(axis=1)
        excluded = tuple(str(i) for i in selected.index[~complete])
        selected = selected[complete]

        dropped = []
        if drop_constant:
            for column in columns:
                if selected[column].nunique() <= 1:
                    dropped.append(column)
            selected = selected.drop(columns=dropped)
        if dropped:
            logger.info(f"Dropping zero-variance columns: {', '.join(dropped)}")
        if excluded:
            logger.info(f"Excluding {len(excluded)} rows with missing values")

        values = selected.to_numpy(dtype=float)
        names = tuple(selected.columns)
        if intercept:
            values = np.column_stack([np.ones(len(selected)), values])
            names = (INTERCEPT,) + names
        return cls(
            row_ids=tuple(str(i) for i in selected.index),
            column_names=names,
            values=values,
            dropped_columns=tuple(dropped),
            excluded_rows=excluded,
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class CoefficientRecord:
    """One fitted coefficient with its inference."""

    name: str
    beta: float
    std_err: float
    t: float
    p: float
    ci_lo: float
    ci_hi: float


COEFFICIENT_COLUMNS = ("feature", "beta", "std_err", "t", "p", "ci_lo", "ci_hi")


@dataclass
class RegressionResult:
    """A fitted OLS model with per-coefficient inference."""

    style: str
    coefficients: List[CoefficientRecord]
    r2: float
    adj_r2: float
    rss: float
    df_resid: int
    n: int
    dropped_columns: Tuple[str, ...] = ()
    excluded_rows: Tuple[str, ...] = ()
    response: np.ndarray = field(default=None, repr=False, compare=False)
    fitted: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def column_names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.coefficients)

    def coefficient(self, name: str) -> CoefficientRecord:
        for record in self.coefficients:
            if record.name == name:
                return record
        raise KeyError(name)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            (c.name, c.beta, c.std_err, c.t, c.p, c.ci_lo, c.ci_hi) for c in self.coefficients
        ]
        frame = pd.DataFrame(rows, columns=COEFFICIENT_COLUMNS)
        frame.insert(0, "style", self.style)
        return frame

    def summary(self) -> dict:
        return {
            "r2": self.r2,
            "adj_r2": self.adj_r2,
            "rss": self.rss,
            "df_resid": self.df_resid,
            "n": self.n,
            "dropped_columns": list(self.dropped_columns),
            "excluded_rows": list(self.excluded_rows),
        }


def ols_fit(design: DesignMatrix, y: Sequence[float], style: str = "") -> RegressionResult:
    """Fits y ~ X by QR decomposition.

    Args:
        design: regressors, intercept first when present.
        y: response aligned with design.row_ids.
        style: label carried into the result.

    Returns:
        RegressionResult with two-sided t-test p-values and 95% confidence intervals.
    """
    x = np.asarray(design.values, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = x.shape
    if len(y) != n:
        raise LengthMismatchError(f"Response has {len(y)} rows, design has {n}")
    if n <= k:
        raise TooFewRowsError(f"Need more than {k} rows to fit {k} coefficients, got {n}")

    singular = linalg.svdvals(x)
    if singular[-1] <= RANK_TOLERANCE * singular[0]:
        raise RankDeficientError(
            f"Design matrix for '{style}' is rank deficient "
            f"(condition {singular[0] / max(singular[-1], 1e-300):.3g})",
            design.column_names,
        )

    q, r = linalg.qr(x, mode="economic")
    beta = linalg.solve_triangular(r, q.T @ y)
    fitted = x @ beta
    residuals = y - fitted
    rss = float(residuals @ residuals)
    df_resid = n - k
    sigma2 = rss / df_resid

    r_inv = linalg.solve_triangular(r, np.eye(k))
    std_err = np.sqrt(sigma2 * np.sum(r_inv**2, axis=1))

    with np.errstate(divide="ignore", invalid="ignore"):
        t_values = np.where(std_err > 0, beta / std_err, np.sign(beta) * np.inf)
    t_values = np.nan_to_num(t_values, nan=0.0, posinf=np.inf, neginf=-np.inf)
    p_values = 2.0 * sps.t.sf(np.abs(t_values), df_resid)
    critical = sps.t.ppf(0.975, df_resid)

    intercept = INTERCEPT in design.column_names
    centred = y - y.mean() if intercept else y
    tss = float(centred @ centred)
    if tss > 0:
        r2 = 1.0 - rss / tss
    else:
        r2 = 1.0 if rss == 0 else 0.0
    df_total = n - 1 if intercept else n
    adj_r2 = 1.0 - (1.0 - r2) * df_total / df_resid

    coefficients = [
        CoefficientRecord(
            name=name,
            beta=float(b),
            std_err=float(se),
            t=float(t),
            p=float(min(max(p, 0.0), 1.0)),
            ci_lo=float(b - critical * se),
            ci_hi=float(b + critical * se),
        )
        for name, b, se, t, p in zip(design.column_names, beta, std_err, t_values, p_values)
    ]
    return RegressionResult(
        style=style,
        coefficients=coefficients,
        r2=float(r2),
        adj_r2=float(adj_r2),
        rss=rss,
        df_resid=df_resid,
        n=n,
        dropped_columns=design.dropped_columns,
        excluded_rows=design.excluded_rows,
        response=y,
        fitted=fitted,
    )


@dataclass(frozen=True)
class FTestResult:
    """Result of nested_f_test."""

    f: float
    df1: int
    df2: int
    p: float

    def to_dict(self) -> dict:
        return {"F": self.f, "df1": self.df1, "df2": self.df2, "p": self.p}


def nested_f_test(restricted: RegressionResult, full: RegressionResult) -> FTestResult:
    """Compares a restricted model against a full model fitted to the same response."""
    if not set(restricted.column_names) <= set(full.column_names):
        extra = sorted(set(restricted.column_names) - set(full.column_names))
        raise NotNestedError(f"Restricted model has predictors missing from full model: {extra}")
    if restricted.n != full.n or (
        restricted.response is not None
        and full.response is not None
        and not np.array_equal(restricted.response, full.response)
    ):
        raise NotNestedError("Models were fitted to different responses")

    df1 = len(full.coefficients) - len(restricted.coefficients)
    df2 = full.df_resid
    if df1 == 0:
        return FTestResult(0.0, 0, df2, 1.0)
    numerator = max(restricted.rss - full.rss, 0.0) / df1
    denominator = full.rss / df2
    if denominator == 0:
        f = np.inf if numerator > 0 else 0.0
    else:
        f = numerator / denominator
    p = float(sps.f.sf(f, df1, df2)) if np.isfinite(f) else 0.0
    return FTestResult(float(f), df1, df2, p)


def pearson_corr_matrix(columns: Mapping[str, Sequence[float]]) -> pd.DataFrame:
    """Pairwise Pearson correlations. The result is symmetric with a unit diagonal."""
    names = list(columns)
    lengths = {len(columns[name]) for name in names}
    if len(lengths) > 1:
        raise LengthMismatchError(f"Correlation inputs have differing lengths {sorted(lengths)}")
    if not names or lengths.pop() < 3:
        raise TooFewPointsError("Correlation needs at least 3 observations per column")

    data = np.vstack([np.asarray(columns[name], dtype=float) for name in names])
    for name, row in zip(names, data):
        if np.ptp(row) == 0:
            raise ZeroVarianceError(f"Column '{name}' has zero variance", name)

    matrix = np.clip(np.corrcoef(data), -1.0, 1.0)
    matrix = (matrix + matrix.T) / 2.0
    np.fill_diagonal(matrix, 1.0)
    return pd.DataFrame(matrix, index=names, columns=names)


def dip_statistic(sample: Sequence[float]) -> float:  # noqa: C901
    """Hartigan's dip: max distance between the empirical CDF and the closest unimodal CDF.

    Walks the greatest convex minorant and least concave majorant of the sorted sample,
    narrowing the modal interval until the dip stops growing. The result lies in
    [1/(2n), 1/4].
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = len(x)
    if n < DIP_MIN:
        raise TooFewPointsError(f"Dip test needs at least {DIP_MIN} points, got {n}")
    dip = 1.0
    if x[0] == x[-1]:
        return dip / (2 * n)

    low, high = 0, n - 1

    # index chains for the convex minorant and the concave majorant
    mn = np.zeros(n, dtype=int)
    for j in range(1, n):
        mn[j] = j - 1
        while True:
            mnj = mn[j]
            mnmnj = mn[mnj]
            if mnj == 0 or (x[j] - x[mnj]) * (mnj - mnmnj) < (x[mnj] - x[mnmnj]) * (j - mnj):
                break
            mn[j] = mnmnj
    mj = np.zeros(n, dtype=int)
    mj[n - 1] = n - 1
    for k in range(n - 2, -1, -1):
        mj[k] = k + 1
        while True:
            mjk = mj[k]
            mjmjk = mj[mjk]
            if mjk == n - 1 or (x[k] - x[mjk]) * (mjk - mjmjk) < (x[mjk] - x[mjmjk]) * (k - mjk):
                break
            mj[k] = mjmjk

    gcm = np.zeros(n + 1, dtype=int)
    lcm = np.zeros(n + 1, dtype=int)
    while True:
        gcm[0] = high
        i = 0
        while gcm[i] > low:
            gcm[i + 1] = mn[gcm[i]]
            i += 1
        ig = l_gcm = i
        ix = ig - 1

        lcm[0] = low
        i = 0
        while lcm[i] < high:
            lcm[i + 1] = mj[lcm[i]]
            i += 1
        ih = l_lcm = i
        iv = 1

        d = 0.0
        if l_gcm != 1 or l_lcm != 1:
            while True:
                gcmix = gcm[ix]
                lcmiv = lcm[iv]
                if gcmix > lcmiv:
                    gcmil = gcm[ix + 1]
                    dx = (lcmiv - gcmil + 1) - (x[lcmiv] - x[gcmil]) * (gcmix - gcmil) / (
                        x[gcmix] - x[gcmil]
                    )
                    iv += 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv - 1
                else:
                    lcmivl = lcm[iv - 1]
                    dx = (x[gcmix] - x[lcmivl]) * (lcmiv - lcmivl) / (x[lcmiv] - x[lcmivl]) - (
                        gcmix - lcmivl - 1
                    )
                    ix -= 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv
                ix = max(ix, 0)
                iv = min(iv, l_lcm)
                if gcm[ix] == lcm[iv]:
                    break
        if d < dip:
            break

        dip_l = 0.0
        for j in range(ig, l_gcm):
            max_t = 1.0
            jb, je = gcm[j + 1], gcm[j]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    max_t = max(max_t, (jj - jb + 1) - (x[jj] - x[jb]) * c)
            dip_l = max(dip_l, max_t)

        dip_u = 0.0
        for j in range(ih, l_lcm):
            max_t = 1.0
            jb, je = lcm[j], lcm[j + 1]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    max_t = max(max_t, (x[jj] - x[jb]) * c - (jj - jb - 1))
            dip_u = max(dip_u, max_t)

        dip = max(dip, dip_u, dip_l)
        if low == gcm[ig] and high == lcm[ih]:
            break
        low, high = gcm[ig], lcm[ih]

    return dip / (2 * n)


@functools.lru_cache(maxsize=32)
def _uniform_null(n: int, reps: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    null = np.array([dip_statistic(rng.uniform(size=n)) for _ in range(reps)])
    null.setflags(write=False)
    return null


@dataclass(frozen=True)
class DipResult:
    """Dip statistic with its Monte Carlo p-value."""

    statistic: float
    p_value: float
    n: int
    reps: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "dip": self.statistic,
            "p": self.p_value,
            "n": self.n,
            "reps": self.reps,
            "seed": self.seed,
        }


def dip_test(sample: Sequence[float], reps: int = 10000, seed: int = 0) -> DipResult:
    """Tests unimodality.

    The p-value is the share of uniform samples of the same size whose dip is at least the
    observed one, estimated by seeded Monte Carlo.
    """
    values = np.asarray(sample, dtype=float)
    statistic = dip_statistic(values)
    null = _uniform_null(len(values), reps, seed)
    p_value = float(np.count_nonzero(null >= statistic) / reps)
    return DipResult(statistic, p_value, len(values), reps, seed)


@dataclass(frozen=True)
class ShapiroResult:
    """Shapiro-Wilk W with its p-value."""

    w: float
    p_value: float
    n: int

    def to_dict(self) -> dict:
        return {"W": self.w, "p": self.p_value, "n": self.n}


def shapiro_wilk(sample: Sequence[float]) -> ShapiroResult:
    """Shapiro-Wilk normality test, Royston's approximation for 3 <= n <= 5000."""
    values = np.asarray(sample, dtype=float)
    n = len(values)
    if not SHAPIRO_MIN <= n <= SHAPIRO_MAX:
        raise SampleSizeOutOfRangeError(
            f"Shapiro-Wilk needs between {SHAPIRO_MIN} and {SHAPIRO_MAX} values, got {n}"
        )
    if np.ptp(values) == 0:
        return ShapiroResult(1.0, 1.0, n)
    w, p = sps.shapiro(values)
    return ShapiroResult(float(min(w, 1.0)), float(min(max(p, 0.0), 1.0)), n)


def distribution_tests(
    sample: Sequence[float], reps: int, seed: int, run_dip: bool = True, run_shapiro: bool = True
) -> Dict[str, Optional[dict]]:
    """Runs the configured distribution-shape tests, skipping any whose size limits fail."""
    summary: Dict[str, Optional[dict]] = {"dip": None, "shapiro": None}
    if run_dip:
        try:
            summary["dip"] = dip_test(sample, reps=reps, seed=seed).to_dict()
        except TooFewPointsError as e:
            logger.warning(f"Skipping dip test: {e}")
    if run_shapiro:
        try:
            summary["shapiro"] = shapiro_wilk(sample).to_dict()
        except SampleSizeOutOfRangeError as e:
            logger.warning(f"Skipping Shapiro-Wilk test: {e}")
    return summary
