"""The three-level hierarchical chain model and its baseline.

Training is bottom-up: consumption patterns are clustered independently
per scale, then each daily pattern gets a quantizer plus a 95-table
value chain, each weekly pattern a 6-table chain over daily pattern ids,
and each yearly pattern a 51-table chain over weekly pattern ids.
Synthesis runs top-down (year pattern -> weekly ids -> daily ids ->
values) and concatenates 364 days in chronological order.

The baseline trains one pooled first-order chain per yearly pattern on
the full-year quantized state sequences; it is the reference model the
hierarchy is evaluated against.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timezone

import numpy as np

from .clustering import PatternCatalog, adaptive_kmeans, assign_to_nearest, derive_seed
from .config import RunConfig
from .errors import DataShapeError, TrainingError, UsageError
from .markov import (
    ClassicMarkovModel,
    MmcModel,
    Quantizer,
    fit_quantizer,
    sample_classic,
    sample_mmc,
    train_classic,
    train_mmc,
)
from .profiles import (
    DAYS_PER_WEEK,
    DAYS_PER_YEAR,
    LoadProfile,
    Scale,
    segment_profiles,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = 2

WEEKS_PER_YEAR = DAYS_PER_YEAR // DAYS_PER_WEEK  # 52


@dataclass
class DailyValueModel:
    quantizer: Quantizer
    chain: MmcModel  # L = points per day, states = quantizer bins


@dataclass
class HmmcModel:
    day_catalog: PatternCatalog
    week_catalog: PatternCatalog
    year_catalog: PatternCatalog
    daily_models: dict[int, DailyValueModel]
    weekly_models: dict[int, MmcModel]
    yearly_models: dict[int, MmcModel]
    prior: dict[int, float]
    points_per_day: int = 96
    interval_minutes: int = 15
    format_version: int = FORMAT_VERSION
    provenance: dict = field(default_factory=dict)

    def validate(self):
        """Check the structural invariants of the hierarchy."""
        for pid, daily in self.daily_models.items():
            if daily.chain.length_L != self.points_per_day:
                raise DataShapeError(
                    f"daily pattern {pid}: value chain length {daily.chain.length_L}"
                )
            daily.chain.validate()
        day_ids = set(self.daily_models)
        for pid, chain in self.weekly_models.items():
            if chain.length_L != DAYS_PER_WEEK:
                raise DataShapeError(f"weekly pattern {pid}: chain length {chain.length_L}")
            chain.validate()
            if not _chain_states(chain) <= day_ids:
                raise DataShapeError(f"weekly pattern {pid}: unknown daily pattern id")
        week_ids = set(self.weekly_models)
        for pid, chain in self.yearly_models.items():
            if chain.length_L != WEEKS_PER_YEAR:
                raise DataShapeError(f"yearly pattern {pid}: chain length {chain.length_L}")
            chain.validate()
            if not _chain_states(chain) <= week_ids:
                raise DataShapeError(f"yearly pattern {pid}: unknown weekly pattern id")
        if abs(sum(self.prior.values()) - 1.0) > 1e-9:
            raise DataShapeError("yearly pattern prior does not sum to 1")
        if set(self.prior) != set(self.yearly_models):
            raise DataShapeError("prior and yearly chains disagree on pattern ids")


def _chain_states(chain: MmcModel) -> set[int]:
    states = {int(s) for s in chain.initial_dist.states}
    for table in chain.position_tables:
        for row in table.values():
            states.update(int(s) for s in row.states)
    return states


@dataclass
class SynthesisRequest:
    count: int
    seed: int
    yearly_pattern_id: int | None = None
    start_date: date = date(2015, 1, 1)

    def __post_init__(self):
        if self.count < 1:
            raise UsageError(f"count must be >= 1, got {self.count}")
        if isinstance(self.start_date, str):
            self.start_date = date.fromisoformat(self.start_date)


def profile_seed(seed: int, index: int) -> int:
    """Documented per-profile sub-seed: sha256 of '<seed>:profile:<index>'."""
    return derive_seed(seed, "profile", index)


def _split_points(segment_values: np.ndarray, n_parts: int) -> list[np.ndarray]:
    return np.split(segment_values, n_parts)


def train_hmmc(profiles: list[LoadProfile], config: RunConfig) -> HmmcModel:
    """Cluster at all three scales and train every per-pattern chain."""
    if not profiles:
        raise TrainingError("no profiles to train on")
    ppd = profiles[0].points_per_day
    segs = segment_profiles(profiles, config.anchor_weekday)
    if not segs.years:
        raise TrainingError(
            "training requires at least one complete 364-day year; "
            "no profile spans a whole year after alignment"
        )

    catalogs = {}
    for scale, pool in ((Scale.DAY, segs.days), (Scale.WEEK, segs.weeks), (Scale.YEAR, segs.years)):
        catalogs[scale] = adaptive_kmeans(
            pool,
            k_initial=min(config.k_initial_for(scale), len(pool)),
            k_max=config.k_max,
            gamma=config.gamma,
            seed=derive_seed(config.seed, "cluster", scale.value),
            scale=scale,
        )
        log.info("%s scale: %d patterns from %d segments", scale.value, len(catalogs[scale]), len(pool))

    day_catalog = catalogs[Scale.DAY]
    week_catalog = catalogs[Scale.WEEK]
    year_catalog = catalogs[Scale.YEAR]

    daily_models = {}
    for pattern in day_catalog.patterns:
        member_values = np.stack([segs.days[i].values for i in pattern.member_indices])
        quantizer = fit_quantizer(member_values, config.n_bins)
        state_seqs = [quantizer.quantize(v) for v in member_values]
        daily_models[pattern.pattern_id] = DailyValueModel(
            quantizer=quantizer, chain=train_mmc(state_seqs, config.order_l)
        )

    weekly_models = {}
    for pattern in week_catalog.patterns:
        id_seqs = []
        for i in pattern.member_indices:
            days = _split_points(segs.weeks[i].values, DAYS_PER_WEEK)
            id_seqs.append([assign_to_nearest(d, day_catalog) for d in days])
        weekly_models[pattern.pattern_id] = train_mmc(id_seqs, config.order_l)

    yearly_models = {}
    for pattern in year_catalog.patterns:
        id_seqs = []
        for i in pattern.member_indices:
            weeks = _split_points(segs.years[i].values, WEEKS_PER_YEAR)
            id_seqs.append([assign_to_nearest(w, week_catalog) for w in weeks])
        yearly_models[pattern.pattern_id] = train_mmc(id_seqs, config.order_l)

    n_years = len(segs.years)
    prior = {
        p.pattern_id: p.size / n_years for p in year_catalog.patterns
    }

    model = HmmcModel(
        day_catalog=day_catalog,
        week_catalog=week_catalog,
        year_catalog=year_catalog,
        daily_models=daily_models,
        weekly_models=weekly_models,
        yearly_models=yearly_models,
        prior=prior,
        points_per_day=ppd,
        interval_minutes=profiles[0].interval_minutes,
        provenance={
            "config": config.to_dict(),
            "n_profiles": len(profiles),
            "n_segments": {
                "year": len(segs.years),
                "week": len(segs.weeks),
                "day": len(segs.days),
            },
        },
    )
    model.validate()
    return model


def _sample_prior(prior: dict[int, float], rng: np.random.Generator) -> int:
    ids = sorted(prior)
    cum = np.cumsum([prior[i] for i in ids])
    u = rng.random()
    return ids[min(int(np.searchsorted(cum, u, side="right")), len(ids) - 1)]


def _synthesize_one(model: HmmcModel, pattern_id: int | None, sub_seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(sub_seed))
    if pattern_id is None:
        pattern_id = _sample_prior(model.prior, rng)
    week_ids = sample_mmc(model.yearly_models[pattern_id], rng)
    days = []
    for week_id in week_ids:
        day_ids = sample_mmc(model.weekly_models[int(week_id)], rng)
        for day_id in day_ids:
            daily = model.daily_models[int(day_id)]
            states = sample_mmc(daily.chain, rng)
            days.append(daily.quantizer.dequantize(states))
    return np.concatenate(days)


def synthesize_with_patterns(
    model: HmmcModel,
    pattern_ids: list[int | None],
    seed: int,
    start_date: date,
    threads: int = 1,
) -> list[LoadProfile]:
    """One yearly profile per entry; ``None`` entries sample the prior."""
    for pid in pattern_ids:
        if pid is not None and pid not in model.yearly_models:
            raise UsageError(
                f"yearly pattern {pid} not in model (has {sorted(model.yearly_models)})"
            )
    start = datetime.combine(start_date, datetime.min.time(), tzinfo=timezone.utc)
    jobs = [(i, pid, profile_seed(seed, i)) for i, pid in enumerate(pattern_ids)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda j: _synthesize_one(model, j[1], j[2]), jobs))
    else:
        values = [_synthesize_one(model, pid, sub) for _, pid, sub in jobs]
    return [
        LoadProfile(
            user_id=f"synth-{i:05d}",
            start=start,
            values=v,
            interval_minutes=model.interval_minutes,
        )
        for (i, _, _), v in zip(jobs, values)
    ]


def synthesize_year(
    model: HmmcModel, request: SynthesisRequest, threads: int = 1
) -> list[LoadProfile]:
    """Generate ``request.count`` yearly profiles, one derived seed each."""
    return synthesize_with_patterns(
        model,
        [request.yearly_pattern_id] * request.count,
        request.seed,
        request.start_date,
        threads=threads,
    )


@dataclass
class BaselinePatternModel:
    quantizer: Quantizer
    chain: ClassicMarkovModel


@dataclass
class BaselineModel:
    """One pooled first-order chain per yearly pattern, over whole years."""

    year_catalog: PatternCatalog
    pattern_models: dict[int, BaselinePatternModel]
    prior: dict[int, float]
    length: int
    points_per_day: int = 96
    interval_minutes: int = 15
    format_version: int = FORMAT_VERSION
    provenance: dict = field(default_factory=dict)

    def validate(self):
        for pid, entry in self.pattern_models.items():
            entry.chain.validate()
        if abs(sum(self.prior.values()) - 1.0) > 1e-9:
            raise DataShapeError("yearly pattern prior does not sum to 1")


def train_baseline(profiles: list[LoadProfile], config: RunConfig) -> BaselineModel:
    """Quantize whole years per yearly pattern and pool first-order counts."""
    if not profiles:
        raise TrainingError("no profiles to train on")
    ppd = profiles[0].points_per_day
    segs = segment_profiles(profiles, config.anchor_weekday)
    if not segs.years:
        raise TrainingError(
            "baseline training requires at least one complete 364-day year"
        )
    year_catalog = adaptive_kmeans(
        segs.years,
        k_initial=min(config.k_initial_for(Scale.YEAR), len(segs.years)),
        k_max=config.k_max,
        gamma=config.gamma,
        seed=derive_seed(config.seed, "cluster", Scale.YEAR.value),
        scale=Scale.YEAR,
    )
    pattern_models = {}
    for pattern in year_catalog.patterns:
        member_values = np.stack([segs.years[i].values for i in pattern.member_indices])
        quantizer = fit_quantizer(member_values, config.n_bins)
        state_seqs = [quantizer.quantize(v) for v in member_values]
        pattern_models[pattern.pattern_id] = BaselinePatternModel(
            quantizer=quantizer, chain=train_classic(state_seqs)
        )
    prior = {p.pattern_id: p.size / len(segs.years) for p in year_catalog.patterns}
    model = BaselineModel(
        year_catalog=year_catalog,
        pattern_models=pattern_models,
        prior=prior,
        length=DAYS_PER_YEAR * ppd,
        points_per_day=ppd,
        interval_minutes=profiles[0].interval_minutes,
        provenance={"config": config.to_dict(), "n_profiles": len(profiles)},
    )
    model.validate()
    return model


def synthesize_baseline_year(
    model: BaselineModel, request: SynthesisRequest
) -> list[LoadProfile]:
    """Sample whole-year state walks from the pooled chains and dequantize."""
    if request.yearly_pattern_id is not None and request.yearly_pattern_id not in model.pattern_models:
        raise UsageError(
            f"yearly pattern {request.yearly_pattern_id} not in model "
            f"(has {sorted(model.pattern_models)})"
        )
    start = datetime.combine(request.start_date, datetime.min.time(), tzinfo=timezone.utc)
    out = []
    for i in range(request.count):
        rng = np.random.Generator(np.random.PCG64(profile_seed(request.seed, i)))
        pattern_id = request.yearly_pattern_id
        if pattern_id is None:
            pattern_id = _sample_prior(model.prior, rng)
        entry = model.pattern_models[pattern_id]
        states = sample_classic(entry.chain, model.length, rng)
        out.append(
            LoadProfile(
                user_id=f"synth-{i:05d}",
                start=start,
                values=entry.quantizer.dequantize(states),
                interval_minutes=model.interval_minutes,
            )
        )
    return out
