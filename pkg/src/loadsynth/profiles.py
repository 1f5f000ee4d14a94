"""Load-profile ingestion and multi-scale segmentation.

A load profile is one user's evenly sampled consumption series (kWh per
interval).  Profiles are cut into daily, weekly and yearly segments; a
"year" is exactly 52 weeks (364 days) so that the week level always has
52 elements.  Trailing days beyond the last whole 364-day block are
dropped.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
DAYS_PER_WEEK = 7
DAYS_PER_YEAR = 364  # 52 whole weeks

CSV_HEADER = ["user_id", "timestamp", "kwh"]


class Scale(enum.Enum):
    DAY = "day"
    WEEK = "week"
    YEAR = "year"

    @property
    def days(self) -> int:
        return {Scale.DAY: 1, Scale.WEEK: DAYS_PER_WEEK, Scale.YEAR: DAYS_PER_YEAR}[self]


@dataclass
class LoadProfile:
    """One user's consumption series, kWh per interval."""

    user_id: str
    start: datetime
    values: np.ndarray
    interval_minutes: int = 15

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.validate()

    def validate(self):
        if self.values.ndim != 1 or len(self.values) < 1:
            raise ValidationError(f"user {self.user_id}: profile must hold at least one value")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError(f"user {self.user_id}: non-finite reading")
        if np.any(self.values < 0):
            raise ValidationError(f"user {self.user_id}: negative reading")
        if self.interval_minutes < 1 or MINUTES_PER_DAY % self.interval_minutes != 0:
            raise ValidationError(
                f"interval_minutes={self.interval_minutes} must divide a day"
            )
        minute = self.start.hour * 60 + self.start.minute
        if (
            minute % self.interval_minutes != 0
            or self.start.second != 0
            or self.start.microsecond != 0
        ):
            raise ValidationError(
                f"user {self.user_id}: start {self.start.isoformat()} not aligned "
                f"to the {self.interval_minutes}-minute grid"
            )

    @property
    def points_per_day(self) -> int:
        return MINUTES_PER_DAY // self.interval_minutes

    def timestamp_at(self, index: int) -> datetime:
        return self.start + timedelta(minutes=index * self.interval_minutes)


@dataclass
class Segment:
    """A fixed-length slice of one profile at one time scale."""

    scale: Scale
    source_user: str
    ordinal: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass
class SegmentationResult:
    years: list[Segment] = field(default_factory=list)
    weeks: list[Segment] = field(default_factory=list)
    days: list[Segment] = field(default_factory=list)


@dataclass
class IngestResult:
    profiles: list[LoadProfile]
    exclusions: list[tuple[str, str]] = field(default_factory=list)  # (user_id, reason)


def _parse_timestamp(raw: str, line_number: int) -> datetime:
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ParseError(f"bad timestamp {raw!r}: {exc}", line_number) from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_csv(path, interval_minutes: int = 15, max_gap: int = 4) -> IngestResult:
    """Parse a ``user_id,timestamp,kwh`` CSV into validated load profiles.

    Rows are grouped per user and sorted by timestamp.  Runs of up to
    ``max_gap`` missing readings are filled by linear interpolation;
    users with a longer gap are excluded and reported instead of raising.
    Negative readings and malformed rows raise.
    """
    per_user: dict[str, list[tuple[datetime, float]]] = {}
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from None
    with handle:
        reader = csv.reader(handle)
        for line_number, row in enumerate(reader, start=1):
            if line_number == 1 and row and row[0].strip().lower() == "user_id":
                continue  # header
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", line_number)
            user_id, ts_raw, kwh_raw = (f.strip() for f in row)
            if not user_id:
                raise ParseError("empty user_id", line_number)
            ts = _parse_timestamp(ts_raw, line_number)
            try:
                kwh = float(kwh_raw)
            except ValueError:
                raise ParseError(f"bad reading {kwh_raw!r}", line_number) from None
            if not np.isfinite(kwh):
                raise ParseError(f"non-finite reading {kwh_raw!r}", line_number)
            if kwh < 0:
                raise ValidationError(
                    f"negative reading for user {user_id} at {ts.isoformat()}"
                )
            per_user.setdefault(user_id, []).append((ts, kwh))

    step = timedelta(minutes=interval_minutes)
    profiles: list[LoadProfile] = []
    exclusions: list[tuple[str, str]] = []
    for user_id, rows in per_user.items():
        rows.sort(key=lambda r: r[0])
        start = rows[0][0]
        minute = start.hour * 60 + start.minute
        if minute % interval_minutes != 0 or start.second or start.microsecond:
            raise ValidationError(
                f"user {user_id}: timestamp {start.isoformat()} off the "
                f"{interval_minutes}-minute grid"
            )
        values: list[float] = []
        excluded = None
        prev_ts, prev_kwh = rows[0]
        values.append(prev_kwh)
        for ts, kwh in rows[1:]:
            delta = ts - prev_ts
            if delta <= timedelta(0):
                raise ValidationError(
                    f"user {user_id}: duplicate or out-of-order timestamp {ts.isoformat()}"
                )
            n_steps, rem = divmod(delta, step)
            if rem:
                raise ValidationError(
                    f"user {user_id}: timestamp {ts.isoformat()} off the "
                    f"{interval_minutes}-minute grid"
                )
            missing = n_steps - 1
            if missing > max_gap:
                excluded = f"gap of {missing} intervals before {ts.isoformat()} exceeds max_gap={max_gap}"
                break
            for j in range(1, n_steps):
                values.append(prev_kwh + (kwh - prev_kwh) * j / n_steps)
            values.append(kwh)
            prev_ts, prev_kwh = ts, kwh
        if excluded is not None:
            exclusions.append((user_id, excluded))
            log.warning("excluding user %s: %s", user_id, excluded)
            continue
        profiles.append(
            LoadProfile(
                user_id=user_id,
                start=start,
                values=np.asarray(values),
                interval_minutes=interval_minutes,
            )
        )
    return IngestResult(profiles=profiles, exclusions=exclusions)


def write_csv(path, profiles: list[LoadProfile]) -> int:
    """Write profiles in the ingestion schema; returns rows written."""
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for profile in profiles:
            for i, value in enumerate(profile.values):
                writer.writerow(
                    [profile.user_id, profile.timestamp_at(i).isoformat(), repr(float(value))]
                )
                rows += 1
    return rows


def write_exclusions(path, exclusions: list[tuple[str, str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_id", "reason"])
        writer.writerows(exclusions)


def _alignment_offset(profile: LoadProfile, anchor_weekday: int | None) -> int:
    """Index of the first value that starts an aligned day (or anchor weekday)."""
    minute = profile.start.hour * 60 + profile.start.minute
    offset = ((MINUTES_PER_DAY - minute) % MINUTES_PER_DAY) // profile.interval_minutes
    if anchor_weekday is not None:
        first_midnight = profile.start + timedelta(minutes=offset * profile.interval_minutes)
        shift_days = (anchor_weekday - first_midnight.weekday()) % 7
        offset += shift_days * profile.points_per_day
    return offset


def segment_profile(
    profile: LoadProfile, anchor_weekday: int | None = None
) -> SegmentationResult:
    """Cut one profile into yearly, weekly and daily segments.

    The profile is aligned to its first midnight (or the first midnight
    falling on ``anchor_weekday``).  When at least one whole 364-day year
    fits, the span is truncated to whole years and weeks/days are emitted
    within it; otherwise all complete weeks/days are emitted.  Profiles
    with less than one aligned day produce an empty result and a warning.
    """
    ppd = profile.points_per_day
    offset = _alignment_offset(profile, anchor_weekday)
    aligned = profile.values[offset:]
    result = SegmentationResult()
    if len(aligned) < ppd:
        log.warning(
            "user %s: fewer than one aligned day of data (%d values); nothing to segment",
            profile.user_id,
            len(aligned),
        )
        return result

    complete_days = len(aligned) // ppd
    n_years = complete_days // DAYS_PER_YEAR
    retained_days = n_years * DAYS_PER_YEAR if n_years >= 1 else complete_days
    retained = aligned[: retained_days * ppd]

    user = profile.user_id
    for y in range(n_years):
        block = retained[y * DAYS_PER_YEAR * ppd : (y + 1) * DAYS_PER_YEAR * ppd]
        result.years.append(Segment(Scale.YEAR, user, y, block))
    for w in range(retained_days // DAYS_PER_WEEK):
        block = retained[w * DAYS_PER_WEEK * ppd : (w + 1) * DAYS_PER_WEEK * ppd]
        result.weeks.append(Segment(Scale.WEEK, user, w, block))
    for d in range(retained_days):
        result.days.append(Segment(Scale.DAY, user, d, aligned[d * ppd : (d + 1) * ppd]))
    return result


def segment_profiles(
    profiles: list[LoadProfile], anchor_weekday: int | None = None
) -> SegmentationResult:
    """Segment many profiles, pooling segments per scale in input order."""
    pooled = SegmentationResult()
    for profile in profiles:
        one = segment_profile(profile, anchor_weekday)
        pooled.years.extend(one.years)
        pooled.weeks.extend(one.weeks)
        pooled.days.extend(one.days)
    return pooled
