"""Assembly of 12-past / 6-future sample windows with input-combination masking.

Windows are stored column-wise per AOI (a ``Block``); a :class:`WindowSet`
is a sequence of :class:`SampleWindow` views over one or more blocks and
can materialize flat feature matrices for the learners.

Flat feature layout (width depends only on the input combo):
past steps t-11..t0, each ``[calculated(7), weather(8)?, irradiance(1)?]``,
then future steps t+1..t+6, each ``[calculated(7), weather(8)?]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import HOUR_S, AoiSeries, AoiSite
from .features import (
    calculated_features_matrix,
    clear_sky_ghi,
    normalized_weather_matrix,
    transform_irradiance,
)

N_PAST = 12
N_FUTURE = 6
SPAN = N_PAST + N_FUTURE
N_CALC = 7
N_WEATHER = 8


class InputCombo(Enum):
    ALL = "all"
    IRRADIANCE = "irradiance"
    STATIC = "static"
    WEATHER = "weather"

    @property
    def has_weather(self) -> bool:
        return self in (InputCombo.ALL, InputCombo.WEATHER)

    @property
    def has_irradiance(self) -> bool:
        return self in (InputCombo.ALL, InputCombo.IRRADIANCE)

    @classmethod
    def parse(cls, text: str) -> "InputCombo":
        return cls(text.strip().lower())


def feature_width(combo: InputCombo) -> int:
    width = SPAN * N_CALC
    if combo.has_weather:
        width += SPAN * N_WEATHER
    if combo.has_irradiance:
        width += N_PAST
    return width


@dataclass(frozen=True)
class SampleWindow:
    """One training/inference example at a single issue time."""

    aoi_id: str
    issue_time: int
    combo: InputCombo
    past_calc: np.ndarray                 # (12, 7)
    future_calc: np.ndarray               # (6, 7)
    past_weather: np.ndarray | None       # (12, 8)
    future_weather: np.ndarray | None     # (6, 8)
    past_irradiance: np.ndarray | None    # (12,) transformed
    target_transformed: np.ndarray        # (6,)
    target_raw: np.ndarray                # (6,) KJ/m^2
    clearsky_future: np.ndarray           # (6,) W/m^2 at valid times
    clearsky_issue: float                 # W/m^2 at t0
    irradiance_raw_issue: float           # KJ/m^2 observed at t0

    def features(self) -> np.ndarray:
        """Flat feature vector in the documented layout order."""
        past = [self.past_calc]
        if self.past_weather is not None:
            past.append(self.past_weather)
        if self.past_irradiance is not None:
            past.append(self.past_irradiance[:, None])
        future = [self.future_calc]
        if self.future_weather is not None:
            future.append(self.future_weather)
        return np.concatenate(
            [np.concatenate(past, axis=1).ravel(), np.concatenate(future, axis=1).ravel()]
        )


class Block:
    """Per-AOI precomputed feature columns plus valid issue-time indices."""

    __slots__ = (
        "aoi_id", "timestamps", "calc", "weather", "irr_t", "irr_raw",
        "clearsky", "t0_idx", "donor_irr_t",
    )

    def __init__(self, aoi_id, timestamps, calc, weather, irr_t, irr_raw, clearsky, t0_idx):
        self.aoi_id = aoi_id
        self.timestamps = timestamps
        self.calc = calc            # (L, 7)
        self.weather = weather      # (L, 8) normalized, NaN = missing
        self.irr_t = irr_t          # (L,) transformed irradiance
        self.irr_raw = irr_raw      # (L,)
        self.clearsky = clearsky    # (L,) W/m^2
        self.t0_idx = t0_idx        # (n,) valid issue row indices
        self.donor_irr_t = None     # (L,) donor transformed irradiance (KN mode)

    def __len__(self) -> int:
        return len(self.t0_idx)

    def gather_rows(self) -> np.ndarray:
        """(n, 18) row indices covering t-11..t+6 for each window."""
        offsets = np.arange(-N_PAST + 1, N_FUTURE + 1)
        return self.t0_idx[:, None] + offsets[None, :]

    def past_irradiance_source(self) -> np.ndarray:
        return self.irr_t if self.donor_irr_t is None else self.donor_irr_t


def build_block(series: AoiSeries, combo: InputCombo, site: AoiSite, stride: int = 1):
    """Compute one AOI's feature columns and valid windows.

    Returns (block, n_skipped) where n_skipped counts issue times whose
    18-hour span exists but a required field is missing.
    """
    ts = series.timestamps
    L = len(ts)
    clearsky = clear_sky_ghi(site.latitude, site.longitude, ts) if L else np.zeros(0)
    calc = (
        calculated_features_matrix(site.latitude, site.longitude, ts)
        if L else np.zeros((0, N_CALC))
    )
    weather = (
        normalized_weather_matrix(series.weather, clearsky)
        if L else np.zeros((0, N_WEATHER))
    )
    irr_t = transform_irradiance(series.irradiance) if L else np.zeros(0)

    if L < SPAN:
        block = Block(site.id, ts, calc, weather, irr_t,
                      series.irradiance, clearsky, np.zeros(0, dtype=np.int64))
        return block, 0

    hourly = np.diff(ts) == HOUR_S
    hc = np.concatenate([[0], np.cumsum(hourly)])
    starts = np.arange(L - SPAN + 1)
    contiguous = (hc[starts + SPAN - 1] - hc[starts]) == SPAN - 1

    row_ok = np.isfinite(series.irradiance)
    if combo.has_weather:
        row_ok &= np.isfinite(series.weather).all(axis=1)
    rc = np.concatenate([[0], np.cumsum(row_ok.astype(np.int64))])
    complete = (rc[starts + SPAN] - rc[starts]) == SPAN

    candidates = starts[contiguous]
    emitted = starts[contiguous & complete]
    n_skipped = len(candidates) - len(emitted)
    t0_idx = (emitted + N_PAST - 1).astype(np.int64)
    if stride > 1:
        t0_idx = t0_idx[::stride]

    block = Block(site.id, ts, calc, weather, irr_t, series.irradiance, clearsky, t0_idx)
    return block, n_skipped


class DonorGap(ValueError):
    def __init__(self, timestamp: int):
        self.timestamp = timestamp
        super().__init__(f"donor has no observation at {timestamp}")


def apply_donor(block: Block, donor: AoiSeries):
    """Substitute the donor's transformed irradiance for the past channel.

    Windows whose 12 past hours are not all covered by donor observations
    are dropped.  Returns the number of windows dropped.
    """
    pos = np.searchsorted(donor.timestamps, block.timestamps)
    pos_c = np.clip(pos, 0, max(len(donor.timestamps) - 1, 0))
    matched = (
        (donor.timestamps[pos_c] == block.timestamps)
        if len(donor.timestamps)
        else np.zeros(len(block.timestamps), dtype=bool)
    )
    aligned = np.full(len(block.timestamps), np.nan)
    aligned[matched] = transform_irradiance(donor.irradiance[pos_c[matched]])

    offsets = np.arange(-N_PAST + 1, 1)
    past_rows = block.t0_idx[:, None] + offsets[None, :]
    ok = np.isfinite(aligned[past_rows]).all(axis=1) if len(block) else np.zeros(0, bool)
    dropped = int(len(block) - ok.sum())
    block.t0_idx = block.t0_idx[ok]
    block.donor_irr_t = aligned
    return dropped


class WindowSet:
    """A sequence of sample windows over one or more per-AOI blocks."""

    def __init__(self, combo: InputCombo, blocks: list[Block]):
        self.combo = combo
        self.blocks = [b for b in blocks if len(b)]
        counts = [len(b) for b in self.blocks]
        self._offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    def __len__(self) -> int:
        return int(self._offsets[-1])

    def _locate(self, i: int):
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        bi = int(np.searchsorted(self._offsets, i, side="right")) - 1
        return self.blocks[bi], i - int(self._offsets[bi])

    def __getitem__(self, i: int) -> SampleWindow:
        block, j = self._locate(i)
        t0 = int(block.t0_idx[j])
        past = slice(t0 - N_PAST + 1, t0 + 1)
        future = slice(t0 + 1, t0 + N_FUTURE + 1)
        has_w, has_i = self.combo.has_weather, self.combo.has_irradiance
        return SampleWindow(
            aoi_id=block.aoi_id,
            issue_time=int(block.timestamps[t0]),
            combo=self.combo,
            past_calc=block.calc[past],
            future_calc=block.calc[future],
            past_weather=block.weather[past] if has_w else None,
            future_weather=block.weather[future] if has_w else None,
            past_irradiance=block.past_irradiance_source()[past] if has_i else None,
            target_transformed=block.irr_t[future],
            target_raw=block.irr_raw[future],
            clearsky_future=block.clearsky[future],
            clearsky_issue=float(block.clearsky[t0]),
            irradiance_raw_issue=float(block.irr_raw[t0]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    # -- batch views ------------------------------------------------------

    def _per_block(self, fn) -> np.ndarray:
        parts = [fn(b) for b in self.blocks]
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts, axis=0)

    def features(self) -> np.ndarray:
        """(n, d) flat feature matrix in the documented layout."""

        def block_features(b: Block) -> np.ndarray:
            rows = b.gather_rows()
            past_parts = [b.calc[rows[:, :N_PAST]]]
            future_parts = [b.calc[rows[:, N_PAST:]]]
            if self.combo.has_weather:
                past_parts.append(b.weather[rows[:, :N_PAST]])
                future_parts.append(b.weather[rows[:, N_PAST:]])
            if self.combo.has_irradiance:
                past_parts.append(b.past_irradiance_source()[rows[:, :N_PAST], None])
            n = len(b)
            past = np.concatenate(past_parts, axis=2).reshape(n, -1)
            future = np.concatenate(future_parts, axis=2).reshape(n, -1)
            return np.hstack([past, future])

        if not self.blocks:
            return np.zeros((0, feature_width(self.combo)))
        return self._per_block(block_features)

    def sequences(self) -> dict:
        """Per-step views for the recurrent learner.

        Returns calc (n,18,7), weather (n,18,8) or None, past_irr (n,12)
        or None.
        """
        calc = self._per_block(lambda b: b.calc[b.gather_rows()]) if self.blocks else np.zeros((0, SPAN, N_CALC))
        weather = (
            self._per_block(lambda b: b.weather[b.gather_rows()])
            if self.combo.has_weather and self.blocks else None
        )
        past_irr = (
            self._per_block(
                lambda b: b.past_irradiance_source()[b.gather_rows()[:, :N_PAST]]
            )
            if self.combo.has_irradiance and self.blocks else None
        )
        return {"calc": calc, "weather": weather, "past_irr": past_irr}

    def targets_transformed(self) -> np.ndarray:
        return self._per_block(lambda b: b.irr_t[b.gather_rows()[:, N_PAST:]]).reshape(len(self), N_FUTURE)

    def targets_raw(self) -> np.ndarray:
        return self._per_block(lambda b: b.irr_raw[b.gather_rows()[:, N_PAST:]]).reshape(len(self), N_FUTURE)

    def clearsky_future(self) -> np.ndarray:
        return self._per_block(lambda b: b.clearsky[b.gather_rows()[:, N_PAST:]]).reshape(len(self), N_FUTURE)

    def clearsky_issue(self) -> np.ndarray:
        return self._per_block(lambda b: b.clearsky[b.t0_idx])

    def irradiance_raw_issue(self) -> np.ndarray:
        return self._per_block(lambda b: b.irr_raw[b.t0_idx])

    def issue_times(self) -> np.ndarray:
        return self._per_block(lambda b: b.timestamps[b.t0_idx])

    def aoi_ids(self) -> np.ndarray:
        return self._per_block(lambda b: np.full(len(b), b.aoi_id, dtype=object))


def build_windows(series: AoiSeries, combo: InputCombo, site: AoiSite, stride: int = 1):
    """One AOI's sample windows, sorted by issue time.

    Returns (window_set, n_skipped); gap windows are silently skipped and
    counted.
    """
    block, n_skipped = build_block(series, combo, site, stride=stride)
    return WindowSet(combo, [block]), n_skipped
