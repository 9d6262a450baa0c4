"""The four training data models: Local, Global, CV-mode and KN-mode.

A scheme turns a site registry into a list of :class:`TrainingPlan` values
saying which AOIs feed training, which are evaluated, and (KN only) which
donor supplies real-time irradiance for each evaluated AOI.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import HOUR_S, AoiSeries, AoiSite
from .features import transform_irradiance
from .windows import N_PAST, DonorGap, SampleWindow

EARTH_RADIUS_KM = 6371.0


class TooManyFolds(ValueError):
    pass


class NoCandidates(ValueError):
    pass


class SchemeKind(Enum):
    LOCAL = "local"
    GLOBAL = "global"
    CV = "cv"
    KN = "kn"

    @classmethod
    def parse(cls, text: str) -> "SchemeKind":
        return cls(text.strip().lower())


@dataclass(frozen=True)
class SchemeConfig:
    kind: SchemeKind
    folds: int = 5
    seed: int = 0
    #: KN only: donors closer than this are excluded (0 = no constraint).
    min_donor_km: float = 0.0

    def __post_init__(self):
        if self.kind in (SchemeKind.CV, SchemeKind.KN) and self.folds < 2:
            raise ValueError("folds must be >= 2")


@dataclass(frozen=True)
class FoldAssignment:
    folds: dict  # AOI id -> fold index

    def members(self, fold: int) -> list[str]:
        return sorted(a for a, f in self.folds.items() if f == fold)


@dataclass(frozen=True)
class TrainingPlan:
    plan_id: str
    train_aois: frozenset
    eval_aois: frozenset
    donor_map: dict | None = None  # eval AOI id -> donor AOI id (KN only)


def assign_folds(aois: list[AoiSite], folds: int, seed: int) -> FoldAssignment:
    """Seeded shuffle of sorted ids, then round-robin; stable under input order."""
    ids = sorted(s.id for s in aois)
    if folds > len(ids):
        raise TooManyFolds(f"{folds} folds for {len(ids)} AOIs")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    return FoldAssignment({ids[j]: i % folds for i, j in enumerate(order)})


def haversine_km(a, b) -> float:
    """Great-circle distance in km between (lat, lon) pairs in degrees."""
    lat1, lon1 = np.deg2rad(a[0]), np.deg2rad(a[1])
    lat2, lon2 = np.deg2rad(b[0]), np.deg2rad(b[1])
    h = (
        np.sin((lat2 - lat1) / 2.0) ** 2
        + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    )
    return float(2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0))))


def nearest_donor(target: AoiSite, candidates: list[AoiSite], min_km: float = 0.0) -> AoiSite:
    """Closest candidate by haversine distance; ties broken by smallest id.

    With min_km > 0, candidates nearer than min_km are excluded first.
    """
    pool = [
        c for c in candidates
        if haversine_km((target.latitude, target.longitude), (c.latitude, c.longitude)) >= min_km
    ]
    if not pool:
        raise NoCandidates(f"no donor candidates for {target.id!r}")
    return min(
        pool,
        key=lambda c: (
            haversine_km((target.latitude, target.longitude), (c.latitude, c.longitude)),
            c.id,
        ),
    )


def plan(config: SchemeConfig, registry: list[AoiSite]) -> list[TrainingPlan]:
    """Expand a scheme into concrete training plans over the registry."""
    if not registry:
        raise ValueError("empty registry")
    sites = {s.id: s for s in registry}
    all_ids = frozenset(sites)

    if config.kind is SchemeKind.LOCAL:
        return [
            TrainingPlan(f"local-{aoi}", frozenset([aoi]), frozenset([aoi]))
            for aoi in sorted(all_ids)
        ]
    if config.kind is SchemeKind.GLOBAL:
        return [TrainingPlan("global", all_ids, all_ids)]

    assignment = assign_folds(registry, config.folds, config.seed)
    plans = []
    for k in range(config.folds):
        eval_ids = frozenset(assignment.members(k))
        train_ids = all_ids - eval_ids
        if config.kind is SchemeKind.CV:
            plans.append(TrainingPlan(f"cv-fold{k}", train_ids, eval_ids))
        else:
            donors = {
                aoi: nearest_donor(
                    sites[aoi], [sites[t] for t in sorted(train_ids)], config.min_donor_km
                ).id
                for aoi in sorted(eval_ids)
            }
            plans.append(TrainingPlan(f"kn-fold{k}", train_ids, eval_ids, donor_map=donors))
    return plans


def substitute_realtime(window: SampleWindow, donor_series: AoiSeries) -> SampleWindow:
    """Replace the window's past irradiance channel with the donor's values
    at identical timestamps; everything else is the target AOI's own."""
    if window.past_irradiance is None:
        raise ValueError("window has no irradiance channel to substitute")
    past_ts = window.issue_time + HOUR_S * np.arange(-N_PAST + 1, 1)
    pos = np.searchsorted(donor_series.timestamps, past_ts)
    for k, ts in enumerate(past_ts):
        if pos[k] >= len(donor_series.timestamps) or donor_series.timestamps[pos[k]] != ts:
            raise DonorGap(int(ts))
    donor_irr = transform_irradiance(donor_series.irradiance[pos])
    return dataclasses.replace(window, past_irradiance=donor_irr)


def plans_to_json(plans: list[TrainingPlan]) -> str:
    doc = [
        {
            "plan_id": p.plan_id,
            "train_aois": sorted(p.train_aois),
            "eval_aois": sorted(p.eval_aois),
            "donor_map": p.donor_map,
        }
        for p in plans
    ]
    return json.dumps(doc, indent=2, sort_keys=True)


def plans_from_json(text: str) -> list[TrainingPlan]:
    return [
        TrainingPlan(
            d["plan_id"],
            frozenset(d["train_aois"]),
            frozenset(d["eval_aois"]),
            d.get("donor_map"),
        )
        for d in json.loads(text)
    ]
