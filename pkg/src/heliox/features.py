"""Per-row feature transforms: irradiance scaling, weather normalization,
cyclic time encoding, solar geometry and the Haurwitz clear-sky model.

All functions accept scalars or numpy arrays and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ObservationRow

#: Mean Gregorian year (365.2425 days) in seconds.
YEAR_SECONDS = 31_556_952.0
DAY_SECONDS = 86_400.0

#: Names of calculated features, in layout order.
CALC_FEATURES = (
    "year_sin", "year_cos", "day_sin", "day_cos",
    "solar_altitude", "azimuth_sin", "azimuth_cos",
)

#: Names of normalized weather features, in layout order.
WEATHER_FEATURES = (
    "cloud_z", "precip_z", "pressure_z", "humidity_z",
    "temp_z", "clearsky_ln", "wind_ns", "wind_ew",
)


class NegativeInput(ValueError):
    pass


class BelowFloor(ValueError):
    pass


class MissingField(ValueError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing weather field {name!r}")


@dataclass(frozen=True)
class CalculatedFeatures:
    year_sin: float
    year_cos: float
    day_sin: float
    day_cos: float
    solar_altitude: float
    azimuth_sin: float
    azimuth_cos: float


@dataclass(frozen=True)
class NormalizedWeather:
    cloud_z: float
    precip_z: float
    pressure_z: float
    humidity_z: float
    temp_z: float
    clearsky_ln: float
    wind_ns: float
    wind_ew: float


def transform_irradiance(raw):
    """max(3, ln(raw + 1)) - 4; floor -1 for raw below ~19 KJ/m^2."""
    raw = np.asarray(raw, dtype=np.float64)
    if np.any(raw < 0):
        raise NegativeInput("irradiance must be >= 0")
    out = np.maximum(3.0, np.log(raw + 1.0)) - 4.0
    return float(out) if out.ndim == 0 else out


def inverse_transform_irradiance(t):
    """Inverse of transform_irradiance; the -1 floor maps to 0 KJ/m^2."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < -1.0 - 1e-9):
        raise BelowFloor("transformed irradiance below the -1 floor")
    out = np.where(t <= -1.0, 0.0, np.exp(t + 4.0) - 1.0)
    return float(out) if out.ndim == 0 else out


def wind_components(speed, direction_deg):
    """Signed N/S and E/W wind components; direction is clockwise from north."""
    rad = np.deg2rad(direction_deg)
    return speed * np.cos(rad), speed * np.sin(rad)


def normalize_weather(row: ObservationRow, clearsky_ghi: float) -> NormalizedWeather:
    """Z-score / log scaling of one observation's weather fields.

    `clearsky_ghi` is the clear-sky GHI (W/m^2) at the row's site and time.
    Raises MissingField when any weather field is absent.
    """
    for name in (
        "cloud_pct", "precip_mm_hr", "pressure_mb", "rel_humidity_pct",
        "temp_k", "wind_speed_ms", "wind_dir_deg",
    ):
        if getattr(row, name) is None:
            raise MissingField(name)
    ns, ew = wind_components(row.wind_speed_ms, row.wind_dir_deg)
    return NormalizedWeather(
        cloud_z=(row.cloud_pct - 60.0) / 30.0,
        precip_z=(row.precip_mm_hr - 0.1) / 0.33,
        pressure_z=(row.pressure_mb - 1000.0) / 15.5,
        humidity_z=(row.rel_humidity_pct - 82.0) / 13.0,
        temp_z=(row.temp_k - 283.0) / 5.5,
        clearsky_ln=float(np.log(clearsky_ghi + 1.0)),
        wind_ns=float(ns),
        wind_ew=float(ew),
    )


def cyclic_time_features(ts):
    """(year_sin, year_cos, day_sin, day_cos) from epoch seconds."""
    s = np.asarray(ts, dtype=np.float64)
    ya = 2.0 * np.pi * s / YEAR_SECONDS
    da = 2.0 * np.pi * s / DAY_SECONDS
    return np.sin(ya), np.cos(ya), np.sin(da), np.cos(da)


def solar_position(lat: float, lon: float, ts):
    """Approximate solar (elevation, azimuth) in degrees.

    Declination and equation of time use the truncated Fourier series of
    Spencer (1971); good to about half a degree of elevation, well within
    the +-1 degree target.  Azimuth is clockwise from north.
    """
    ts = np.asarray(ts, dtype=np.int64)
    dt = ts.astype("datetime64[s]")
    year_start = dt.astype("datetime64[Y]").astype("datetime64[s]")
    frac_days = (ts - year_start.astype(np.int64)) / DAY_SECONDS
    gamma = 2.0 * np.pi / 365.0 * (frac_days - 0.5)

    decl = (
        0.006918
        - 0.399912 * np.cos(gamma) + 0.070257 * np.sin(gamma)
        - 0.006758 * np.cos(2 * gamma) + 0.000907 * np.sin(2 * gamma)
        - 0.002697 * np.cos(3 * gamma) + 0.00148 * np.sin(3 * gamma)
    )
    eqtime_min = 229.18 * (
        0.000075
        + 0.001868 * np.cos(gamma) - 0.032077 * np.sin(gamma)
        - 0.014615 * np.cos(2 * gamma) - 0.040849 * np.sin(2 * gamma)
    )

    utc_min = (ts % 86400) / 60.0
    true_solar_min = utc_min + eqtime_min + 4.0 * lon
    hour_angle = np.deg2rad(true_solar_min / 4.0 - 180.0)

    lat_r = np.deg2rad(lat)
    cos_zen = np.sin(lat_r) * np.sin(decl) + np.cos(lat_r) * np.cos(decl) * np.cos(hour_angle)
    cos_zen = np.clip(cos_zen, -1.0, 1.0)
    elevation = 90.0 - np.rad2deg(np.arccos(cos_zen))

    # Azimuth from south (westward positive), shifted to clockwise-from-north.
    az_south = np.arctan2(
        np.sin(hour_angle),
        np.cos(hour_angle) * np.sin(lat_r) - np.tan(decl) * np.cos(lat_r),
    )
    azimuth = (np.rad2deg(az_south) + 180.0) % 360.0

    if np.ndim(elevation) == 0:
        return float(elevation), float(azimuth)
    return elevation, azimuth


def solar_features(lat: float, lon: float, ts):
    """(sin(elevation), azimuth_sin, azimuth_cos)."""
    elevation, azimuth = solar_position(lat, lon, ts)
    az = np.deg2rad(azimuth)
    return np.sin(np.deg2rad(elevation)), np.sin(az), np.cos(az)


def clear_sky_ghi(lat: float, lon: float, ts):
    """Haurwitz clear-sky GHI in W/m^2: 1098 sin(e) exp(-0.057 / sin(e))."""
    elevation, _ = solar_position(lat, lon, ts)
    return clear_sky_from_elevation(elevation)


def clear_sky_from_elevation(elevation_deg):
    sin_e = np.sin(np.deg2rad(np.asarray(elevation_deg, dtype=np.float64)))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ghi = 1098.0 * sin_e * np.exp(-0.057 / sin_e)
    out = np.where(sin_e > 0.0, ghi, 0.0)
    return float(out) if out.ndim == 0 else out


def calculated_features_matrix(lat: float, lon: float, ts: np.ndarray) -> np.ndarray:
    """(L, 7) calculated-feature matrix in CALC_FEATURES order."""
    ys, yc, ds, dc = cyclic_time_features(ts)
    alt, azs, azc = solar_features(lat, lon, ts)
    return np.column_stack([ys, yc, ds, dc, alt, azs, azc])


def normalized_weather_matrix(weather: np.ndarray, clearsky_w: np.ndarray) -> np.ndarray:
    """(L, 8) normalized-weather matrix in WEATHER_FEATURES order.

    `weather` is the raw (L, 7) column block from an AoiSeries; NaNs (missing
    cells) propagate into the output.
    """
    cloud, precip, pressure, humidity, temp, speed, direction = weather.T
    ns, ew = wind_components(speed, direction)
    return np.column_stack([
        (cloud - 60.0) / 30.0,
        (precip - 0.1) / 0.33,
        (pressure - 1000.0) / 15.5,
        (humidity - 82.0) / 13.0,
        (temp - 283.0) / 5.5,
        np.log(np.asarray(clearsky_w, dtype=np.float64) + 1.0),
        ns,
        ew,
    ])
