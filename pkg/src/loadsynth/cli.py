"""Command-line front-end.

Subcommands: ``train``, ``synth``, ``eval``, ``baseline train|synth``,
``config show``, ``serve``.  By default commands run the pipeline
in-process; with ``--server URL`` they become thin HTTP clients of a
running service and the work happens on the server's filesystem.

Exit codes: 0 ok, 1 usage, 2 input/IO, 3 model, 4 data shape.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import RunConfig, load_config
from .errors import (
    DataShapeError,
    InputError,
    LoadSynthError,
    ModelError,
    UsageError,
)
from .pipeline import (
    baseline_synth_op,
    baseline_train_op,
    eval_op,
    synth_op,
    train_op,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_MODEL = 3
EXIT_DATA = 4

_EXIT_BY_KIND = {
    "UsageError": EXIT_USAGE,
    "InputError": EXIT_INPUT,
    "ParseError": EXIT_INPUT,
    "ValidationError": EXIT_INPUT,
    "ModelError": EXIT_MODEL,
    "ModelLoadError": EXIT_MODEL,
    "TrainingError": EXIT_MODEL,
    "ClosureViolation": EXIT_MODEL,
    "DataShapeError": EXIT_DATA,
}


def _exit_code(exc: LoadSynthError) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, InputError):
        return EXIT_INPUT
    if isinstance(exc, ModelError):
        return EXIT_MODEL
    if isinstance(exc, DataShapeError):
        return EXIT_DATA
    return EXIT_USAGE


class Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad arguments; the documented usage code is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_options(parser):
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", help="config file (key = value, versioned)")
    group.add_argument("--gamma", type=float, help="cluster spread threshold")
    group.add_argument("--k-initial", type=int, dest="k_initial")
    group.add_argument("--k-max", type=int, dest="k_max")
    group.add_argument("--k-initial-day", type=int, dest="k_initial_day")
    group.add_argument("--k-initial-week", type=int, dest="k_initial_week")
    group.add_argument("--k-initial-year", type=int, dest="k_initial_year")
    group.add_argument("--order-l", type=int, dest="order_l")
    group.add_argument("--n-bins", type=int, dest="n_bins")
    group.add_argument("--seed", type=int)
    group.add_argument("--interval-minutes", type=int, dest="interval_minutes")
    group.add_argument("--max-gap", type=int, dest="max_gap")
    group.add_argument("--logit-lambda", type=float, dest="logit_lambda")
    group.add_argument("--anchor-weekday", type=int, dest="anchor_weekday")


_CONFIG_KEYS = [
    "gamma", "k_initial", "k_max", "k_initial_day", "k_initial_week",
    "k_initial_year", "order_l", "n_bins", "seed", "interval_minutes",
    "max_gap", "logit_lambda", "anchor_weekday",
]


def _overrides(args) -> dict:
    return {k: getattr(args, k) for k in _CONFIG_KEYS if getattr(args, k, None) is not None}


def _resolve_config(args) -> RunConfig:
    overrides = _overrides(args)
    if args.config:
        return load_config(args.config, overrides)
    return RunConfig(**overrides)


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("LOADSYNTH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"LOADSYNTH_THREADS={env!r} is not an integer") from None
    return 1


def build_parser() -> Parser:
    parser = Parser(prog="loadsynth", description=__doc__)
    parser.add_argument("--server", help="base URL of a running service; run remotely")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the hierarchical model")
    p_train.add_argument("--input", required=True, help="raw load CSV (user_id,timestamp,kwh)")
    p_train.add_argument("--model-out", required=True)
    p_train.add_argument("--users-csv", help="user attribute CSV; trains the user model too")
    p_train.add_argument("--users-schema", help="sidecar schema JSON for the user CSV")
    p_train.add_argument("--user-model-out")
    p_train.add_argument("--exclusions-out", help="where to write the user exclusion report")
    _add_config_options(p_train)

    p_synth = sub.add_parser("synth", help="synthesize yearly profiles from a trained model")
    p_synth.add_argument("--model", required=True)
    p_synth.add_argument("--count", type=int, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--pattern-id", type=int, help="fix the yearly pattern")
    p_synth.add_argument("--start-date", default="2015-01-01")
    p_synth.add_argument("--user-model", help="fitted user model; assigns patterns per user")
    p_synth.add_argument("--users-csv", help="pool of real user rows to resample")
    p_synth.add_argument("--users-schema")
    p_synth.add_argument("--users-out", help="where to write generated user attributes")
    p_synth.add_argument("--assign-mode", choices=["argmax", "sample"], default="sample")
    p_synth.add_argument("--threads", type=int)

    p_eval = sub.add_parser("eval", help="compare raw vs synthesized statistics")
    p_eval.add_argument("--raw", required=True)
    p_eval.add_argument("--synth", required=True)
    p_eval.add_argument("--group-by", choices=["year", "week", "day"], default="year")
    p_eval.add_argument("--format", choices=["csv", "table"], default="table")
    _add_config_options(p_eval)

    p_base = sub.add_parser("baseline", help="first-order baseline model")
    base_sub = p_base.add_subparsers(dest="baseline_command", required=True)
    p_bt = base_sub.add_parser("train")
    p_bt.add_argument("--input", required=True)
    p_bt.add_argument("--model-out", required=True)
    _add_config_options(p_bt)
    p_bs = base_sub.add_parser("synth")
    p_bs.add_argument("--model", required=True)
    p_bs.add_argument("--count", type=int, required=True)
    p_bs.add_argument("--seed", type=int, default=0)
    p_bs.add_argument("--out", required=True)
    p_bs.add_argument("--pattern-id", type=int)
    p_bs.add_argument("--start-date", default="2015-01-01")

    p_config = sub.add_parser("config", help="configuration inspection")
    config_sub = p_config.add_subparsers(dest="config_command", required=True)
    p_show = config_sub.add_parser("show", help="print the effective configuration")
    _add_config_options(p_show)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


# ---------------------------------------------------------------------------
# remote mode: the CLI as a thin HTTP client


def _post(server: str, route: str, body: dict) -> dict:
    import httpx

    url = server.rstrip("/") + route
    try:
        response = httpx.post(url, json=body, timeout=600.0)
    except httpx.HTTPError as exc:
        raise InputError(f"cannot reach {url}: {exc}") from None
    if response.status_code >= 400:
        try:
            payload = response.json()
        except ValueError:
            payload = {}
        kind = payload.get("kind", "UsageError")
        detail = payload.get("detail", response.text)
        if isinstance(detail, list):  # pydantic validation errors
            detail = "; ".join(str(e.get("msg", e)) for e in detail)
            kind = "UsageError"
        sys.stderr.write(f"error: {detail}\n")
        sys.exit(_EXIT_BY_KIND.get(kind, EXIT_USAGE))
    return response.json()


def _remote_config(args) -> dict:
    body = {"config": _overrides(args)}
    if getattr(args, "config", None):
        body["config_path"] = args.config
    return body


def _run_remote(args) -> int:
    server = args.server
    if args.command == "train":
        body = _remote_config(args)
        body.update(
            input_csv=args.input,
            model_out=args.model_out,
            users_csv=args.users_csv,
            users_schema=args.users_schema,
            user_model_out=args.user_model_out,
            exclusions_out=args.exclusions_out,
        )
        data = _post(server, "/train", body)
        _print_train_summary(data)
    elif args.command == "synth":
        data = _post(
            server,
            "/synth",
            dict(
                model_path=args.model,
                count=args.count,
                seed=args.seed,
                out_csv=args.out,
                yearly_pattern_id=args.pattern_id,
                start_date=args.start_date,
                user_model_path=args.user_model,
                users_csv=args.users_csv,
                users_schema=args.users_schema,
                users_out=args.users_out,
                assign_mode=args.assign_mode,
                threads=_threads(args),
            ),
        )
        print(f"wrote {data['rows_written']} rows for {data['n_profiles']} profiles to {data['out_csv']}")
    elif args.command == "eval":
        body = _remote_config(args)
        body.update(
            raw_csv=args.raw, synth_csv=args.synth, group_by=args.group_by, format=args.format
        )
        data = _post(server, "/eval", body)
        sys.stdout.write(data["rendered"])
    elif args.command == "baseline" and args.baseline_command == "train":
        body = _remote_config(args)
        body.update(input_csv=args.input, model_out=args.model_out)
        data = _post(server, "/baseline/train", body)
        _print_train_summary(data)
    elif args.command == "baseline" and args.baseline_command == "synth":
        data = _post(
            server,
            "/baseline/synth",
            dict(
                model_path=args.model,
                count=args.count,
                seed=args.seed,
                out_csv=args.out,
                yearly_pattern_id=args.pattern_id,
                start_date=args.start_date,
            ),
        )
        print(f"wrote {data['rows_written']} rows for {data['n_profiles']} profiles to {data['out_csv']}")
    else:
        raise UsageError(f"command {args.command!r} cannot run remotely")
    return EXIT_OK


# ---------------------------------------------------------------------------
# local mode


def _print_train_summary(data) -> None:
    counts = data["pattern_counts"] if isinstance(data, dict) else data.pattern_counts
    path = data["model_path"] if isinstance(data, dict) else data.model_path
    n = data["n_profiles"] if isinstance(data, dict) else data.n_profiles
    excluded = data["n_excluded"] if isinstance(data, dict) else data.n_excluded
    print(f"trained on {n} profiles ({excluded} excluded)")
    for scale in ("day", "week", "year"):
        if scale in counts:
            print(f"  {scale} patterns: {counts[scale]}")
    print(f"model written to {path}")
    user_model = data.get("user_model_path") if isinstance(data, dict) else data.user_model_path
    if user_model:
        print(f"user model written to {user_model}")


def _run_local(args) -> int:
    if args.command == "train":
        config = _resolve_config(args)
        summary = train_op(
            config,
            input_csv=args.input,
            model_out=args.model_out,
            users_csv=args.users_csv,
            users_schema=args.users_schema,
            user_model_out=args.user_model_out,
            exclusions_out=args.exclusions_out,
        )
        _print_train_summary(summary)
    elif args.command == "synth":
        summary = synth_op(
            model_path=args.model,
            count=args.count,
            seed=args.seed,
            out_csv=args.out,
            yearly_pattern_id=args.pattern_id,
            start_date=args.start_date,
            user_model_path=args.user_model,
            users_csv=args.users_csv,
            users_schema=args.users_schema,
            users_out=args.users_out,
            assign_mode=args.assign_mode,
            threads=_threads(args),
        )
        print(f"wrote {summary.rows_written} rows for {summary.n_profiles} profiles to {summary.out_csv}")
        if summary.users_out:
            print(f"generated users written to {summary.users_out}")
    elif args.command == "eval":
        config = _resolve_config(args)
        summary = eval_op(
            raw_csv=args.raw,
            synth_csv=args.synth,
            group_by=args.group_by,
            fmt=args.format,
            config=config,
        )
        sys.stdout.write(summary.rendered)
    elif args.command == "baseline" and args.baseline_command == "train":
        config = _resolve_config(args)
        summary = baseline_train_op(config, args.input, args.model_out)
        _print_train_summary(summary)
    elif args.command == "baseline" and args.baseline_command == "synth":
        summary = baseline_synth_op(
            model_path=args.model,
            count=args.count,
            seed=args.seed,
            out_csv=args.out,
            yearly_pattern_id=args.pattern_id,
            start_date=args.start_date,
        )
        print(f"wrote {summary.rows_written} rows for {summary.n_profiles} profiles to {summary.out_csv}")
    elif args.command == "config" and args.config_command == "show":
        config = _resolve_config(args)
        sys.stdout.write(config.dump_text())
    elif args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.server and args.command not in ("config", "serve"):
            return _run_remote(args)
        return _run_local(args)
    except LoadSynthError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
