"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class ConfigOverrides(BaseModel):
    gamma: Optional[float] = None
    k_initial: Optional[int] = None
    k_max: Optional[int] = None
    k_initial_day: Optional[int] = None
    k_initial_week: Optional[int] = None
    k_initial_year: Optional[int] = None
    order_l: Optional[int] = None
    n_bins: Optional[int] = None
    seed: Optional[int] = None
    interval_minutes: Optional[int] = None
    max_gap: Optional[int] = None
    logit_lambda: Optional[float] = None
    anchor_weekday: Optional[int] = None


class TrainRequest(BaseModel):
    input_csv: str
    model_out: str
    config_path: Optional[str] = None
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)
    users_csv: Optional[str] = None
    users_schema: Optional[str] = None
    user_model_out: Optional[str] = None
    exclusions_out: Optional[str] = None


class TrainResponse(BaseModel):
    model_path: str
    n_profiles: int
    n_excluded: int
    pattern_counts: dict[str, int]
    user_model_path: Optional[str] = None
    exclusions_path: Optional[str] = None


class SynthRequest(BaseModel):
    model_path: str
    count: int = Field(ge=1)
    seed: int = Field(ge=0)
    out_csv: str
    yearly_pattern_id: Optional[int] = None
    start_date: str = "2015-01-01"
    user_model_path: Optional[str] = None
    users_csv: Optional[str] = None
    users_schema: Optional[str] = None
    users_out: Optional[str] = None
    assign_mode: Literal["argmax", "sample"] = "sample"
    threads: int = Field(default=1, ge=1)


class SynthResponse(BaseModel):
    out_csv: str
    n_profiles: int
    rows_written: int
    users_out: Optional[str] = None


class EvalRequest(BaseModel):
    raw_csv: str
    synth_csv: str
    group_by: Literal["year", "week", "day"] = "year"
    format: Literal["csv", "table"] = "table"
    config_path: Optional[str] = None
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class MetricDelta(BaseModel):
    metric: str
    raw: float
    synth: float
    delta: float
    rel_delta: Optional[float] = None


class EvalResponse(BaseModel):
    group_by: str
    d: int
    n_raw: int
    n_synth: int
    rows: list[MetricDelta]
    rendered: str


class BaselineTrainRequest(BaseModel):
    input_csv: str
    model_out: str
    config_path: Optional[str] = None
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class BaselineSynthRequest(BaseModel):
    model_path: str
    count: int = Field(ge=1)
    seed: int = Field(ge=0)
    out_csv: str
    yearly_pattern_id: Optional[int] = None
    start_date: str = "2015-01-01"


class HealthResponse(BaseModel):
    status: str
    version: str


class ConfigResponse(BaseModel):
    config_version: int
    values: dict
    text: str


class ErrorBody(BaseModel):
    kind: str
    detail: str
