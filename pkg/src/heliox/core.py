"""Site registry, observation ingestion, cleaning and the temporal train/test split.

Observations are stored column-wise per AOI (numpy arrays) for speed; the
row-level :class:`ObservationRow` view is reconstructed on demand.  All
timestamps are UTC epoch seconds, aligned to whole hours.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

HOUR_S = 3600

#: Weather columns of observations.csv, in file order.  An empty cell means
#: the value is missing for that hour.
WEATHER_FIELDS = (
    "cloud_pct",
    "precip_mm_hr",
    "pressure_mb",
    "rel_humidity_pct",
    "temp_k",
    "wind_speed_ms",
    "wind_dir_deg",
)

SITES_HEADER = ["aoi_id", "name", "lat", "lon"]
OBS_HEADER = ["aoi_id", "timestamp_utc", "irradiance_kj_m2"] + list(WEATHER_FIELDS)

#: Default train/test boundary: 1st May 2019, 00:00 UTC.
DEFAULT_SPLIT_INSTANT = 1556668800


class MalformedRow(ValueError):
    def __init__(self, line: int, reason: str = ""):
        self.line = line
        super().__init__(f"malformed row at line {line}: {reason}")


class DuplicateId(ValueError):
    def __init__(self, aoi_id: str):
        self.aoi_id = aoi_id
        super().__init__(f"duplicate AOI id {aoi_id!r}")


class CoordinateOutOfRange(ValueError):
    def __init__(self, aoi_id: str):
        self.aoi_id = aoi_id
        super().__init__(f"coordinates out of range for AOI {aoi_id!r}")


class UnknownAoi(KeyError):
    def __init__(self, aoi_id: str):
        self.aoi_id = aoi_id
        super().__init__(f"unknown AOI id {aoi_id!r}")


class DuplicateTimestamp(ValueError):
    def __init__(self, aoi_id: str, timestamp: int):
        self.aoi_id = aoi_id
        self.timestamp = timestamp
        super().__init__(
            f"duplicate timestamp {format_instant(timestamp)} for AOI {aoi_id!r}"
        )


def parse_instant(text: str) -> int:
    """Parse an ISO-8601 UTC instant to epoch seconds.

    Naive timestamps are taken as UTC.  Raises ValueError when the instant
    is not aligned to a whole hour.
    """
    cleaned = text.strip()
    if cleaned.endswith("Z"):
        cleaned = cleaned[:-1] + "+00:00"
    dt = datetime.fromisoformat(cleaned)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    ts = int(dt.timestamp())
    if ts % HOUR_S != 0:
        raise ValueError(f"timestamp {text!r} is not hourly aligned")
    return ts


def format_instant(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class AoiSite:
    """A site for which forecasts are produced."""

    id: str
    name: str
    latitude: float
    longitude: float

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0 and -180.0 <= self.longitude <= 180.0):
            raise CoordinateOutOfRange(self.id)


@dataclass(frozen=True)
class ObservationRow:
    """One hourly observation; weather fields are None when missing."""

    timestamp: int
    irradiance: float
    cloud_pct: float | None = None
    precip_mm_hr: float | None = None
    pressure_mb: float | None = None
    rel_humidity_pct: float | None = None
    temp_k: float | None = None
    wind_speed_ms: float | None = None
    wind_dir_deg: float | None = None


class AoiSeries:
    """Time-sorted columnar observations for a single AOI."""

    __slots__ = ("timestamps", "irradiance", "weather")

    def __init__(self, timestamps: np.ndarray, irradiance: np.ndarray, weather: np.ndarray):
        self.timestamps = timestamps  # (L,) int64 epoch seconds, strictly increasing
        self.irradiance = irradiance  # (L,) float64
        self.weather = weather        # (L, 7) float64, NaN = missing

    def __len__(self) -> int:
        return len(self.timestamps)

    def row(self, i: int) -> ObservationRow:
        w = self.weather[i]
        fields = {
            name: (None if np.isnan(w[j]) else float(w[j]))
            for j, name in enumerate(WEATHER_FIELDS)
        }
        return ObservationRow(
            timestamp=int(self.timestamps[i]),
            irradiance=float(self.irradiance[i]),
            **fields,
        )

    def rows(self) -> list[ObservationRow]:
        return [self.row(i) for i in range(len(self))]


class SeriesStore:
    """Immutable map of AOI id -> AoiSeries plus the site registry."""

    def __init__(self, registry: list[AoiSite], series: dict[str, AoiSeries]):
        ids = {s.id for s in registry}
        for aoi_id in series:
            if aoi_id not in ids:
                raise UnknownAoi(aoi_id)
        self.registry = list(registry)
        self.sites = {s.id: s for s in registry}
        self.series = dict(series)

    def __contains__(self, aoi_id: str) -> bool:
        return aoi_id in self.series

    def aoi_ids(self) -> list[str]:
        return sorted(self.series)

    def n_rows(self) -> int:
        return sum(len(s) for s in self.series.values())


def load_registry(path) -> list[AoiSite]:
    """Load sites.csv; rejects duplicate ids and out-of-range coordinates."""
    sites: list[AoiSite] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SITES_HEADER:
            raise MalformedRow(1, f"expected header {SITES_HEADER}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedRow(line_no, f"expected 4 cells, got {len(row)}")
            aoi_id, name, lat_s, lon_s = row
            try:
                lat, lon = float(lat_s), float(lon_s)
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from exc
            if aoi_id in seen:
                raise DuplicateId(aoi_id)
            seen.add(aoi_id)
            sites.append(AoiSite(id=aoi_id, name=name, latitude=lat, longitude=lon))
    return sites


def load_observations(path, registry: list[AoiSite]) -> SeriesStore:
    """Load observations.csv into a SeriesStore, grouped by AOI and time-sorted."""
    known = {s.id for s in registry}
    per_aoi: dict[str, list[tuple]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != OBS_HEADER:
            raise MalformedRow(1, f"expected header {OBS_HEADER}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(OBS_HEADER):
                raise MalformedRow(line_no, f"expected {len(OBS_HEADER)} cells")
            aoi_id = row[0]
            if aoi_id not in known:
                raise UnknownAoi(aoi_id)
            try:
                ts = parse_instant(row[1])
                irr = float(row[2])
                weather = [float(c) if c != "" else np.nan for c in row[3:]]
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from exc
            per_aoi.setdefault(aoi_id, []).append((ts, irr, weather))

    series: dict[str, AoiSeries] = {}
    for aoi_id, rows in per_aoi.items():
        rows.sort(key=lambda r: r[0])
        ts = np.array([r[0] for r in rows], dtype=np.int64)
        dup = np.nonzero(np.diff(ts) == 0)[0]
        if dup.size:
            raise DuplicateTimestamp(aoi_id, int(ts[dup[0]]))
        irr = np.array([r[1] for r in rows], dtype=np.float64)
        weather = np.array([r[2] for r in rows], dtype=np.float64).reshape(len(rows), 7)
        series[aoi_id] = AoiSeries(ts, irr, weather)
    return SeriesStore(registry, series)


def save_registry(sites: list[AoiSite], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SITES_HEADER)
        for s in sites:
            writer.writerow([s.id, s.name, repr(s.latitude), repr(s.longitude)])


def save_observations(store: SeriesStore, path) -> None:
    """Write observations.csv; floats use shortest round-trip repr so that
    load(save(store)) reproduces the store exactly."""

    def cell(v: float) -> str:
        return "" if np.isnan(v) else repr(float(v))

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OBS_HEADER)
        for aoi_id in store.aoi_ids():
            s = store.series[aoi_id]
            for i in range(len(s)):
                writer.writerow(
                    [aoi_id, format_instant(int(s.timestamps[i])), repr(float(s.irradiance[i]))]
                    + [cell(v) for v in s.weather[i]]
                )


def clean_irradiance(store: SeriesStore) -> SeriesStore:
    """Clamp negative irradiance to 0; all other fields untouched. Idempotent."""
    series = {
        aoi_id: AoiSeries(s.timestamps, np.maximum(s.irradiance, 0.0), s.weather)
        for aoi_id, s in store.series.items()
    }
    return SeriesStore(store.registry, series)


@dataclass(frozen=True)
class DatasetSplit:
    train: SeriesStore
    test: SeriesStore
    split_instant: int
    train_empty: bool = False
    test_empty: bool = False


def split_train_test(store: SeriesStore, split_instant: int = DEFAULT_SPLIT_INSTANT) -> DatasetSplit:
    """Partition by timestamp: train strictly before the split instant, test at or after."""
    if split_instant % HOUR_S != 0:
        raise ValueError("split instant must be hourly aligned")
    train: dict[str, AoiSeries] = {}
    test: dict[str, AoiSeries] = {}
    for aoi_id, s in store.series.items():
        cut = int(np.searchsorted(s.timestamps, split_instant, side="left"))
        if cut > 0:
            train[aoi_id] = AoiSeries(s.timestamps[:cut], s.irradiance[:cut], s.weather[:cut])
        if cut < len(s):
            test[aoi_id] = AoiSeries(s.timestamps[cut:], s.irradiance[cut:], s.weather[cut:])
    train_store = SeriesStore(store.registry, train)
    test_store = SeriesStore(store.registry, test)
    return DatasetSplit(
        train=train_store,
        test=test_store,
        split_instant=split_instant,
        train_empty=train_store.n_rows() == 0,
        test_empty=test_store.n_rows() == 0,
    )
