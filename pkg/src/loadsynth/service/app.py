"""FastAPI service exposing the training/synthesis/evaluation pipeline.

The service works on the server's filesystem: requests name input and
output paths, responses carry summaries.  A long-lived process keeps
nothing in memory between calls; determinism comes entirely from the
(config, seed) pair, so repeated identical requests rewrite identical
files.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import CONFIG_VERSION, RunConfig, load_config
from ..errors import (
    DataShapeError,
    InputError,
    LoadSynthError,
    ModelError,
    UsageError,
)
from ..pipeline import (
    baseline_synth_op,
    baseline_train_op,
    eval_op,
    synth_op,
    train_op,
)
from .schemas import (
    BaselineSynthRequest,
    BaselineTrainRequest,
    ConfigOverrides,
    ConfigResponse,
    EvalRequest,
    EvalResponse,
    HealthResponse,
    MetricDelta,
    SynthRequest,
    SynthResponse,
    TrainRequest,
    TrainResponse,
)

app = FastAPI(
    title="loadsynth",
    description="Hierarchical Markov-chain synthesis of electricity load profiles",
    version=__version__,
)

_STATUS = {
    UsageError: 400,
    InputError: 404,
    DataShapeError: 409,
    ModelError: 422,
}


@app.exception_handler(LoadSynthError)
async def loadsynth_error_handler(request: Request, exc: LoadSynthError):
    status = 500
    for klass, code in _STATUS.items():
        if isinstance(exc, klass):
            status = code
            break
    return JSONResponse(
        status_code=status,
        content={"kind": type(exc).__name__, "detail": str(exc)},
    )


def _resolve_config(config_path: str | None, overrides: ConfigOverrides) -> RunConfig:
    values = {k: v for k, v in overrides.model_dump().items() if v is not None}
    if config_path:
        return load_config(config_path, values)
    return RunConfig(**values)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.get("/config/defaults", response_model=ConfigResponse)
def config_defaults() -> ConfigResponse:
    config = RunConfig()
    return ConfigResponse(
        config_version=CONFIG_VERSION, values=config.to_dict(), text=config.dump_text()
    )


@app.post("/train", response_model=TrainResponse)
def train(request: TrainRequest) -> TrainResponse:
    config = _resolve_config(request.config_path, request.config)
    summary = train_op(
        config,
        input_csv=request.input_csv,
        model_out=request.model_out,
        users_csv=request.users_csv,
        users_schema=request.users_schema,
        user_model_out=request.user_model_out,
        exclusions_out=request.exclusions_out,
    )
    return TrainResponse(
        model_path=summary.model_path,
        n_profiles=summary.n_profiles,
        n_excluded=summary.n_excluded,
        pattern_counts=summary.pattern_counts,
        user_model_path=summary.user_model_path,
        exclusions_path=summary.exclusions_path,
    )


@app.post("/synth", response_model=SynthResponse)
def synth(request: SynthRequest) -> SynthResponse:
    summary = synth_op(
        model_path=request.model_path,
        count=request.count,
        seed=request.seed,
        out_csv=request.out_csv,
        yearly_pattern_id=request.yearly_pattern_id,
        start_date=request.start_date,
        user_model_path=request.user_model_path,
        users_csv=request.users_csv,
        users_schema=request.users_schema,
        users_out=request.users_out,
        assign_mode=request.assign_mode,
        threads=request.threads,
    )
    return SynthResponse(
        out_csv=summary.out_csv,
        n_profiles=summary.n_profiles,
        rows_written=summary.rows_written,
        users_out=summary.users_out,
    )


@app.post("/eval", response_model=EvalResponse)
def evaluate(request: EvalRequest) -> EvalResponse:
    config = _resolve_config(request.config_path, request.config)
    summary = eval_op(
        raw_csv=request.raw_csv,
        synth_csv=request.synth_csv,
        group_by=request.group_by,
        fmt=request.format,
        config=config,
    )
    return EvalResponse(
        group_by=summary.group_by,
        d=summary.d,
        n_raw=summary.n_raw,
        n_synth=summary.n_synth,
        rows=[
            MetricDelta(
                metric=r.metric, raw=r.raw, synth=r.synth, delta=r.delta, rel_delta=r.rel_delta
            )
            for r in summary.rows
        ],
        rendered=summary.rendered,
    )


@app.post("/baseline/train", response_model=TrainResponse)
def baseline_train(request: BaselineTrainRequest) -> TrainResponse:
    config = _resolve_config(request.config_path, request.config)
    summary = baseline_train_op(config, request.input_csv, request.model_out)
    return TrainResponse(
        model_path=summary.model_path,
        n_profiles=summary.n_profiles,
        n_excluded=summary.n_excluded,
        pattern_counts=summary.pattern_counts,
    )


@app.post("/baseline/synth", response_model=SynthResponse)
def baseline_synth(request: BaselineSynthRequest) -> SynthResponse:
    summary = baseline_synth_op(
        model_path=request.model_path,
        count=request.count,
        seed=request.seed,
        out_csv=request.out_csv,
        yearly_pattern_id=request.yearly_pattern_id,
        start_date=request.start_date,
    )
    return SynthResponse(
        out_csv=summary.out_csv,
        n_profiles=summary.n_profiles,
        rows_written=summary.rows_written,
    )
