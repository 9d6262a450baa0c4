"""Forecast evaluation: daytime masking, nRMSE, persistence baseline and the
monthly forecast-skill score S.

Evaluation records are held in a pandas DataFrame with one row per
(AOI, issue time, step); see :data:`RECORD_COLUMNS`.  All metrics work on
raw physical units (KJ/m^2), never on transformed values.  Hourly-integrated
irradiance is bridged to mean power by dividing by 3.6 before it is put in
ratio with clear-sky W/m^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

#: KJ/m^2 per hour -> mean W/m^2.
KJ_TO_W = 1.0 / 3.6

RECORD_COLUMNS = [
    "aoi_id",      # site id
    "issue_time",  # epoch seconds of t0
    "step",        # 1..6
    "valid_time",  # epoch seconds of t0 + step hours
    "y",           # observed irradiance, KJ/m^2
    "y_hat",       # predicted irradiance, KJ/m^2
    "ghi",         # clear-sky W/m^2 at valid_time
    "ghi_prev",    # clear-sky W/m^2 at issue_time
    "i_prev",      # observed irradiance at issue_time, KJ/m^2
]

GROUP_KEY_COLUMNS = {"aoi", "step", "month", "scheme", "learner", "combo"}


class EmptyAfterMask(ValueError):
    pass


class ZeroMean(ValueError):
    pass


class NightIssue(ValueError):
    pass


class NoValidPeriods(ValueError):
    pass


@dataclass(frozen=True)
class EvalRecord:
    """One (AOI, issue-time, step) tuple; the atom of all metrics."""

    aoi_id: str
    issue_time: int
    step: int
    y: float
    y_hat: float
    ghi: float
    ghi_prev: float
    i_prev: float

    def __post_init__(self):
        if not 1 <= self.step <= 6:
            raise ValueError(f"step {self.step} out of range 1..6")
        if self.ghi < 0:
            raise ValueError("clear-sky GHI must be >= 0")

    @property
    def valid_time(self) -> int:
        return self.issue_time + 3600 * self.step


def records_frame(records) -> pd.DataFrame:
    """Build the evaluation DataFrame from EvalRecord objects."""
    if isinstance(records, pd.DataFrame):
        return records
    df = pd.DataFrame(
        {
            "aoi_id": [r.aoi_id for r in records],
            "issue_time": np.array([r.issue_time for r in records], dtype=np.int64),
            "step": np.array([r.step for r in records], dtype=np.int64),
            "y": [r.y for r in records],
            "y_hat": [r.y_hat for r in records],
            "ghi": [r.ghi for r in records],
            "ghi_prev": [r.ghi_prev for r in records],
            "i_prev": [r.i_prev for r in records],
        }
    )
    df["valid_time"] = df["issue_time"] + 3600 * df["step"]
    return df[RECORD_COLUMNS]


def daytime_mask(records) -> pd.Series:
    """True where the record counts as daytime: y > 20 and clear-sky > 1."""
    df = records_frame(records)
    return (df["y"] > 20.0) & (df["ghi"] > 1.0)


def nrmse(records) -> float:
    """sqrt(mean((y - y_hat)^2)) / mean(y) over daytime records."""
    df = records_frame(records)
    df = df[daytime_mask(df)]
    if df.empty:
        raise EmptyAfterMask("no records left after the daytime mask")
    mean_y = float(df["y"].mean())
    if mean_y <= 0.0:
        raise ZeroMean("mean observed irradiance is not positive")
    rmse = float(np.sqrt(np.mean((df["y"].to_numpy() - df["y_hat"].to_numpy()) ** 2)))
    return rmse / mean_y


def persistence_forecast(i_prev: float, ghi_prev: float, ghi_future) -> np.ndarray:
    """Carry the last observed irradiance-to-clear-sky ratio forward.

    y_hat_s = (i_prev / ghi_prev) * ghi_future[s]; the KJ->W bridge cancels
    in the ratio so inputs/outputs stay in KJ/m^2.
    """
    if ghi_prev <= 1.0:
        raise NightIssue("persistence undefined: clear-sky at issue time <= 1 W/m^2")
    return i_prev / ghi_prev * np.asarray(ghi_future, dtype=np.float64)


def _month_key(valid_time: pd.Series) -> pd.Series:
    dt = pd.to_datetime(valid_time, unit="s", utc=True)
    return dt.dt.year * 100 + dt.dt.month


def skill_s_detail(records):
    """Forecast skill S with monthly periods.

    Per month w over daytime records: U_w is the clear-sky-scaled RMS
    forecast error; V_w is the RMS change of the irradiance/clear-sky ratio
    between each record's issue time and valid time (the variability a
    persistence forecast faces), over records with a usable issue-time
    reference (ghi_prev > 1).  S = mean over months of (1 - U_w / V_w);
    months with V_w = 0 or fewer than 2 reference pairs are skipped.

    Returns (S, n_months_used, n_months_skipped).
    """
    df = records_frame(records)
    df = df[daytime_mask(df)]
    if df.empty:
        raise NoValidPeriods("no daytime records")

    ratio = df["y"].to_numpy() * KJ_TO_W / df["ghi"].to_numpy()
    err = (df["y"].to_numpy() - df["y_hat"].to_numpy()) * KJ_TO_W / df["ghi"].to_numpy()
    has_prev = (df["ghi_prev"].to_numpy() > 1.0) & np.isfinite(df["i_prev"].to_numpy())
    prev_ratio = np.where(
        has_prev,
        df["i_prev"].to_numpy() * KJ_TO_W / np.where(has_prev, df["ghi_prev"].to_numpy(), 1.0),
        np.nan,
    )
    delta = prev_ratio - ratio

    month = _month_key(df["valid_time"]).to_numpy()
    used, skipped, total = 0, 0, 0.0
    for m in np.unique(month):
        sel = month == m
        v_terms = delta[sel & has_prev]
        if len(v_terms) < 2:
            skipped += 1
            continue
        v_w = float(np.sqrt(np.mean(v_terms**2)))
        if v_w == 0.0:
            skipped += 1
            continue
        u_w = float(np.sqrt(np.mean(err[sel] ** 2)))
        total += 1.0 - u_w / v_w
        used += 1
    if used == 0:
        raise NoValidPeriods("every month was skipped")
    return total / used, used, skipped


def skill_s(records) -> float:
    return skill_s_detail(records)[0]


def _resolve_keys(df: pd.DataFrame, group_by: list[str]) -> tuple[pd.DataFrame, list[str]]:
    unknown = [k for k in group_by if k not in GROUP_KEY_COLUMNS]
    if unknown:
        raise KeyError(f"unknown grouping keys {unknown}")
    df = df.copy()
    keys = []
    for key in group_by:
        if key == "aoi":
            keys.append("aoi_id")
        elif key == "month":
            df["month"] = _month_key(df["valid_time"])
            keys.append("month")
        else:
            keys.append(key)
    return df, keys


def aggregate(records, group_by: list[str]) -> pd.DataFrame:
    """Per-group nRMSE and skill S.

    Returns a long-form report with columns ``group keys..., metric, mean,
    std, n`` where mean/std are taken across AOIs whenever the grouping
    marginalizes the AOI (sample standard deviation, ddof=1).  Groups that
    are empty after the daytime mask are omitted.
    """
    df = records_frame(records)
    df, keys = _resolve_keys(df, group_by)
    if df.empty:
        return pd.DataFrame(columns=[*group_by, "metric", "mean", "std", "n"])

    inner = list(keys)
    if "aoi_id" not in inner:
        inner.append("aoi_id")

    cells = []
    for gv, gdf in df.groupby(inner, sort=True):
        gv = gv if isinstance(gv, tuple) else (gv,)
        n = int(daytime_mask(gdf).sum())
        if n == 0:
            continue
        try:
            cell_nrmse = nrmse(gdf)
        except (EmptyAfterMask, ZeroMean):
            cell_nrmse = np.nan
        try:
            cell_skill = skill_s(gdf)
        except NoValidPeriods:
            cell_skill = np.nan
        cells.append((*gv, cell_nrmse, cell_skill, n))
    if not cells:
        return pd.DataFrame(columns=[*group_by, "metric", "mean", "std", "n"])
    per_aoi = pd.DataFrame(cells, columns=[*inner, "nrmse", "skill_s", "n"])

    rows = []
    grouped = per_aoi.groupby(keys, sort=True) if keys else [((), per_aoi)]
    for gv, gdf in grouped:
        gv = gv if isinstance(gv, tuple) else (gv,)
        for metric in ("nrmse", "skill_s"):
            vals = gdf[metric].dropna()
            if vals.empty:
                continue
            rows.append(
                (
                    *gv,
                    metric,
                    float(vals.mean()),
                    float(vals.std(ddof=1)) if len(vals) > 1 else np.nan,
                    int(gdf["n"].sum()),
                )
            )
    report = pd.DataFrame(rows, columns=[*keys, "metric", "mean", "std", "n"])
    return report.rename(columns={"aoi_id": "aoi"})
