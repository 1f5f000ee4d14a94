"""End-to-end operations shared by the HTTP service and the CLI.

Each operation reads/writes files on the local filesystem, raises the
package's typed errors, and returns a small summary object that both
front-ends can render.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from datetime import date

import numpy as np

from . import model_io
from .clustering import assign_to_nearest, derive_seed
from .config import RunConfig
from .errors import DataShapeError, InputError, TrainingError
from .hmmc import (
    SynthesisRequest,
    synthesize_baseline_year,
    synthesize_with_patterns,
    train_baseline,
    train_hmmc,
)
from .metrics import ComparisonRow, compare_reports, compute_metrics, render_comparison
from .profiles import (
    LoadProfile,
    Scale,
    parse_csv,
    segment_profiles,
    write_csv,
    write_exclusions,
)
from .users import assign_pattern, fit_logit, load_schema, load_users_csv, sample_user

log = logging.getLogger(__name__)

DEFAULT_START_DATE = date(2015, 1, 1)


@dataclass
class TrainSummary:
    model_path: str
    n_profiles: int
    n_excluded: int
    pattern_counts: dict[str, int]
    user_model_path: str | None = None
    exclusions_path: str | None = None


@dataclass
class SynthSummary:
    out_csv: str
    n_profiles: int
    rows_written: int
    users_out: str | None = None


@dataclass
class EvalSummary:
    group_by: str
    d: int
    n_raw: int
    n_synth: int
    rows: list[ComparisonRow]
    rendered: str


def _require_file(path, what: str) -> None:
    if not os.path.exists(path):
        raise InputError(f"{what} not found: {path}")


def _ingest(path, config: RunConfig):
    _require_file(path, "input CSV")
    return parse_csv(path, interval_minutes=config.interval_minutes, max_gap=config.max_gap)


def year_pattern_labels(model, profiles: list[LoadProfile], config: RunConfig) -> dict[str, int]:
    """Yearly pattern id per user, from the user's first complete year."""
    labels = {}
    for profile in profiles:
        segs = segment_profiles([profile], config.anchor_weekday)
        if segs.years:
            labels[profile.user_id] = assign_to_nearest(segs.years[0], model.year_catalog)
    return labels


def train_op(
    config: RunConfig,
    input_csv: str,
    model_out: str,
    users_csv: str | None = None,
    users_schema: str | None = None,
    user_model_out: str | None = None,
    exclusions_out: str | None = None,
) -> TrainSummary:
    ingest = _ingest(input_csv, config)
    if not ingest.profiles:
        raise TrainingError(f"no usable profiles in {input_csv}")
    if exclusions_out:
        write_exclusions(exclusions_out, ingest.exclusions)
    model = train_hmmc(ingest.profiles, config)
    model_io.save_model(model, model_out)

    user_model_path = None
    if users_csv is not None:
        if users_schema is None:
            raise InputError("users_csv given without users_schema")
        _require_file(users_csv, "users CSV")
        _require_file(users_schema, "users schema")
        schema = load_schema(users_schema)
        ids, records = load_users_csv(users_csv, schema)
        labels = year_pattern_labels(model, ingest.profiles, config)
        paired = [(r, labels[i]) for i, r in zip(ids, records) if i in labels]
        if not paired:
            raise TrainingError(
                "none of the users in the attribute CSV have a trainable year of load data"
            )
        logit = fit_logit(
            [p[0] for p in paired],
            [p[1] for p in paired],
            schema,
            lam=config.logit_lambda,
        )
        user_model_path = user_model_out or model_out + ".users.json"
        model_io.save_logit(logit, user_model_path)

    return TrainSummary(
        model_path=model_out,
        n_profiles=len(ingest.profiles),
        n_excluded=len(ingest.exclusions),
        pattern_counts={
            "day": len(model.day_catalog),
            "week": len(model.week_catalog),
            "year": len(model.year_catalog),
        },
        user_model_path=user_model_path,
        exclusions_path=exclusions_out,
    )


def synth_op(
    model_path: str,
    count: int,
    seed: int,
    out_csv: str,
    yearly_pattern_id: int | None = None,
    start_date: date | str = DEFAULT_START_DATE,
    user_model_path: str | None = None,
    users_csv: str | None = None,
    users_schema: str | None = None,
    users_out: str | None = None,
    assign_mode: str = "sample",
    threads: int = 1,
) -> SynthSummary:
    _require_file(model_path, "model file")
    model = model_io.load_model(model_path)
    request = SynthesisRequest(
        count=count, seed=seed, yearly_pattern_id=yearly_pattern_id, start_date=start_date
    )

    users_out_path = None
    if user_model_path is not None:
        if users_csv is None or users_schema is None:
            raise InputError("user-model synthesis needs users_csv and users_schema")
        _require_file(user_model_path, "user model file")
        _require_file(users_csv, "users CSV")
        _require_file(users_schema, "users schema")
        logit = model_io.load_logit(user_model_path)
        schema = load_schema(users_schema)
        _, pool = load_users_csv(users_csv, schema)
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "users")))
        generated = [sample_user(pool, rng, schema=schema) for _ in range(count)]
        pattern_ids = [assign_pattern(u, logit, mode=assign_mode, seed=rng) for u in generated]
        profiles = synthesize_with_patterns(
            model, pattern_ids, seed, request.start_date, threads=threads
        )
        users_out_path = users_out or out_csv + ".users.csv"
        _write_users_csv(users_out_path, profiles, generated, pattern_ids, schema)
    else:
        profiles = synthesize_with_patterns(
            model,
            [request.yearly_pattern_id] * count,
            seed,
            request.start_date,
            threads=threads,
        )

    rows = write_csv(out_csv, profiles)
    return SynthSummary(
        out_csv=out_csv, n_profiles=len(profiles), rows_written=rows, users_out=users_out_path
    )


def _write_users_csv(path, profiles, records, pattern_ids, schema) -> None:
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = _csv.writer(handle)
        writer.writerow(["user_id", *schema.names, "yearly_pattern_id"])
        for profile, record, pid in zip(profiles, records, pattern_ids):
            writer.writerow(
                [profile.user_id]
                + [record.attributes[n] for n in schema.names]
                + [pid]
            )


_SCALES = {"year": Scale.YEAR, "week": Scale.WEEK, "day": Scale.DAY}


def _segments_at(path, group_by: str, config: RunConfig):
    ingest = _ingest(path, config)
    segs = segment_profiles(ingest.profiles, config.anchor_weekday)
    pool = {"year": segs.years, "week": segs.weeks, "day": segs.days}[group_by]
    if not pool:
        raise DataShapeError(
            f"{path} yields no complete {group_by} segments; cannot evaluate at that scale"
        )
    return [s.values for s in pool]


def eval_op(
    raw_csv: str,
    synth_csv: str,
    group_by: str = "year",
    fmt: str = "table",
    config: RunConfig | None = None,
) -> EvalSummary:
    if group_by not in _SCALES:
        raise DataShapeError(f"group_by must be one of {sorted(_SCALES)}, got {group_by!r}")
    config = config or RunConfig()
    raw_values = _segments_at(raw_csv, group_by, config)
    synth_values = _segments_at(synth_csv, group_by, config)
    raw_report = compute_metrics(raw_values)
    synth_report = compute_metrics(synth_values)
    rows = compare_reports(raw_report, synth_report)
    return EvalSummary(
        group_by=group_by,
        d=raw_report.d,
        n_raw=raw_report.n_profiles,
        n_synth=synth_report.n_profiles,
        rows=rows,
        rendered=render_comparison(rows, fmt),
    )


def baseline_train_op(config: RunConfig, input_csv: str, model_out: str) -> TrainSummary:
    ingest = _ingest(input_csv, config)
    if not ingest.profiles:
        raise TrainingError(f"no usable profiles in {input_csv}")
    model = train_baseline(ingest.profiles, config)
    model_io.save_baseline(model, model_out)
    return TrainSummary(
        model_path=model_out,
        n_profiles=len(ingest.profiles),
        n_excluded=len(ingest.exclusions),
        pattern_counts={"year": len(model.year_catalog)},
    )


def baseline_synth_op(
    model_path: str,
    count: int,
    seed: int,
    out_csv: str,
    yearly_pattern_id: int | None = None,
    start_date: date | str = DEFAULT_START_DATE,
) -> SynthSummary:
    _require_file(model_path, "model file")
    model = model_io.load_baseline(model_path)
    request = SynthesisRequest(
        count=count, seed=seed, yearly_pattern_id=yearly_pattern_id, start_date=start_date
    )
    profiles = synthesize_baseline_year(model, request)
    rows = write_csv(out_csv, profiles)
    return SynthSummary(out_csv=out_csv, n_profiles=len(profiles), rows_written=rows)
