"""Versioned, checksummed JSON persistence for trained models.

Every float is stored as its shortest-round-trip decimal string so that
a saved model re-loads bit-exactly and re-saves byte-identically.  The
checksum is the SHA-256 of the canonicalized payload (sorted keys,
compact separators) without the checksum field itself.  Format version
1 lacked the provenance block; a loader-side migration fills it in.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .clustering import Pattern, PatternCatalog
from .errors import ModelLoadError
from .hmmc import (
    FORMAT_VERSION,
    BaselineModel,
    BaselinePatternModel,
    DailyValueModel,
    HmmcModel,
)
from .markov import ClassicMarkovModel, MmcModel, Quantizer, Row
from .profiles import Scale
from .users import AttributeSpec, LogitModel, UserSchema

KIND_HMMC = "hmmc"
KIND_BASELINE = "baseline"
KIND_LOGIT = "logit"


def _f(x) -> str:
    return repr(float(x))


def _floats(xs) -> list[str]:
    return [_f(x) for x in np.asarray(xs, dtype=np.float64).ravel()]


def _parse_floats(xs) -> np.ndarray:
    return np.array([float(x) for x in xs], dtype=np.float64)


def canonical_dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def payload_checksum(payload: dict) -> str:
    body = {k: v for k, v in payload.items() if k != "checksum"}
    return hashlib.sha256(canonical_dumps(body).encode("utf-8")).hexdigest()


def _row_to_json(row: Row) -> dict:
    return {"states": [int(s) for s in row.states], "probs": _floats(row.probs)}


def _row_from_json(raw: dict) -> Row:
    return Row(np.asarray(raw["states"], dtype=np.int64), _parse_floats(raw["probs"]))


def _mmc_to_json(chain: MmcModel) -> dict:
    return {
        "order_l": chain.order_l,
        "length_L": chain.length_L,
        "n_states": chain.n_states,
        "initial": _row_to_json(chain.initial_dist),
        "tables": [
            {",".join(str(s) for s in ctx): _row_to_json(row) for ctx, row in table.items()}
            for table in chain.position_tables
        ],
    }


def _mmc_from_json(raw: dict) -> MmcModel:
    tables = []
    for table in raw["tables"]:
        parsed = {}
        for key, row in table.items():
            ctx = tuple(int(s) for s in key.split(",")) if key else ()
            parsed[ctx] = _row_from_json(row)
        tables.append(parsed)
    return MmcModel(
        order_l=raw["order_l"],
        length_L=raw["length_L"],
        n_states=raw["n_states"],
        initial_dist=_row_from_json(raw["initial"]),
        position_tables=tables,
    )


def _classic_to_json(chain: ClassicMarkovModel) -> dict:
    return {
        "n_states": chain.n_states,
        "initial": _row_to_json(chain.initial_dist),
        "transitions": {str(s): _row_to_json(r) for s, r in chain.transitions.items()},
    }


def _classic_from_json(raw: dict) -> ClassicMarkovModel:
    return ClassicMarkovModel(
        n_states=raw["n_states"],
        initial_dist=_row_from_json(raw["initial"]),
        transitions={int(s): _row_from_json(r) for s, r in raw["transitions"].items()},
    )


def _quantizer_to_json(q: Quantizer) -> dict:
    return {"edges": _floats(q.bin_edges), "representatives": _floats(q.bin_representatives)}


def _quantizer_from_json(raw: dict) -> Quantizer:
    return Quantizer(_parse_floats(raw["edges"]), _parse_floats(raw["representatives"]))


def _catalog_to_json(catalog: PatternCatalog) -> dict:
    return {
        "scale": catalog.scale.value,
        "gamma": _f(catalog.gamma),
        "hit_k_max": catalog.hit_k_max,
        "patterns": [
            {
                "pattern_id": p.pattern_id,
                "centroid": _floats(p.centroid),
                "member_indices": list(p.member_indices),
                "member_totals": _floats(p.member_totals),
            }
            for p in catalog.patterns
        ],
    }


def _catalog_from_json(raw: dict) -> PatternCatalog:
    scale = Scale(raw["scale"])
    patterns = [
        Pattern(
            pattern_id=p["pattern_id"],
            scale=scale,
            centroid=_parse_floats(p["centroid"]),
            member_indices=list(p["member_indices"]),
            member_totals=_parse_floats(p["member_totals"]),
        )
        for p in raw["patterns"]
    ]
    return PatternCatalog(
        scale=scale, patterns=patterns, gamma=float(raw["gamma"]), hit_k_max=raw["hit_k_max"]
    )


def hmmc_to_payload(model: HmmcModel) -> dict:
    return {
        "format_version": model.format_version,
        "kind": KIND_HMMC,
        "points_per_day": model.points_per_day,
        "interval_minutes": model.interval_minutes,
        "catalogs": {
            "day": _catalog_to_json(model.day_catalog),
            "week": _catalog_to_json(model.week_catalog),
            "year": _catalog_to_json(model.year_catalog),
        },
        "daily_models": {
            str(pid): {
                "quantizer": _quantizer_to_json(m.quantizer),
                "chain": _mmc_to_json(m.chain),
            }
            for pid, m in model.daily_models.items()
        },
        "weekly_models": {str(pid): _mmc_to_json(m) for pid, m in model.weekly_models.items()},
        "yearly_models": {str(pid): _mmc_to_json(m) for pid, m in model.yearly_models.items()},
        "prior": {str(pid): _f(p) for pid, p in model.prior.items()},
        "provenance": model.provenance,
    }


def _hmmc_from_payload(payload: dict) -> HmmcModel:
    return HmmcModel(
        day_catalog=_catalog_from_json(payload["catalogs"]["day"]),
        week_catalog=_catalog_from_json(payload["catalogs"]["week"]),
        year_catalog=_catalog_from_json(payload["catalogs"]["year"]),
        daily_models={
            int(pid): DailyValueModel(
                quantizer=_quantizer_from_json(m["quantizer"]),
                chain=_mmc_from_json(m["chain"]),
            )
            for pid, m in payload["daily_models"].items()
        },
        weekly_models={int(pid): _mmc_from_json(m) for pid, m in payload["weekly_models"].items()},
        yearly_models={int(pid): _mmc_from_json(m) for pid, m in payload["yearly_models"].items()},
        prior={int(pid): float(p) for pid, p in payload["prior"].items()},
        points_per_day=payload["points_per_day"],
        interval_minutes=payload["interval_minutes"],
        format_version=FORMAT_VERSION,
        provenance=payload["provenance"],
    )


def baseline_to_payload(model: BaselineModel) -> dict:
    return {
        "format_version": model.format_version,
        "kind": KIND_BASELINE,
        "points_per_day": model.points_per_day,
        "interval_minutes": model.interval_minutes,
        "length": model.length,
        "catalogs": {"year": _catalog_to_json(model.year_catalog)},
        "baseline_models": {
            str(pid): {
                "quantizer": _quantizer_to_json(m.quantizer),
                "chain": _classic_to_json(m.chain),
            }
            for pid, m in model.pattern_models.items()
        },
        "prior": {str(pid): _f(p) for pid, p in model.prior.items()},
        "provenance": model.provenance,
    }


def _baseline_from_payload(payload: dict) -> BaselineModel:
    return BaselineModel(
        year_catalog=_catalog_from_json(payload["catalogs"]["year"]),
        pattern_models={
            int(pid): BaselinePatternModel(
                quantizer=_quantizer_from_json(m["quantizer"]),
                chain=_classic_from_json(m["chain"]),
            )
            for pid, m in payload["baseline_models"].items()
        },
        prior={int(pid): float(p) for pid, p in payload["prior"].items()},
        length=payload["length"],
        points_per_day=payload["points_per_day"],
        interval_minutes=payload["interval_minutes"],
        format_version=FORMAT_VERSION,
        provenance=payload["provenance"],
    )


def logit_to_payload(model: LogitModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": KIND_LOGIT,
        "schema": {
            "schema_id": model.schema.schema_id,
            "attributes": [
                {
                    "name": a.name,
                    "type": a.kind,
                    "levels": a.levels,
                    "integer_like": a.integer_like,
                }
                for a in model.schema.attributes
            ],
        },
        "classes": list(model.classes),
        "intercepts": _floats(model.intercepts),
        "coefficients": [_floats(row) for row in model.coefficients],
        "lambda": _f(model.lam),
        "provenance": {},
    }


def _logit_from_payload(payload: dict) -> LogitModel:
    schema = UserSchema(
        schema_id=payload["schema"]["schema_id"],
        attributes=[
            AttributeSpec(
                name=a["name"],
                kind=a["type"],
                levels=a["levels"],
                integer_like=a["integer_like"],
            )
            for a in payload["schema"]["attributes"]
        ],
    )
    coefficients = np.array([[float(v) for v in row] for row in payload["coefficients"]])
    return LogitModel(
        schema=schema,
        classes=[int(c) for c in payload["classes"]],
        intercepts=_parse_floats(payload["intercepts"]),
        coefficients=coefficients,
        lam=float(payload["lambda"]),
    )


def _migrate_v1(payload: dict) -> dict:
    # v1 files predate embedded provenance
    payload = dict(payload)
    payload["format_version"] = 2
    payload.setdefault("provenance", {})
    return payload


_MIGRATIONS = {1: _migrate_v1}


def _write(path, payload: dict) -> None:
    payload = dict(payload)
    payload["checksum"] = payload_checksum(payload)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(canonical_dumps(payload))


def _read(path, expected_kind: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise ModelLoadError(f"cannot read model {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"model {path} is truncated or not JSON: {exc}") from None
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ModelLoadError(f"model {path} has no format_version")
    stored = payload.pop("checksum", None)
    if stored is None:
        raise ModelLoadError(f"model {path} carries no checksum")
    actual = payload_checksum(payload)
    if stored != actual:
        raise ModelLoadError(
            f"model {path} failed its checksum (stored {stored[:12]}..., "
            f"recomputed {actual[:12]}...); file is corrupted"
        )
    version = payload["format_version"]
    while version in _MIGRATIONS:
        payload = _MIGRATIONS[version](payload)
        version = payload["format_version"]
    if version != FORMAT_VERSION:
        raise ModelLoadError(
            f"model {path} has format_version {version}; this build reads "
            f"{sorted(_MIGRATIONS)} + [{FORMAT_VERSION}]"
        )
    kind = payload.get("kind")
    if kind != expected_kind:
        raise ModelLoadError(f"model {path} is a {kind!r} file, expected {expected_kind!r}")
    return payload


def save_model(model: HmmcModel, path) -> None:
    _write(path, hmmc_to_payload(model))


def load_model(path) -> HmmcModel:
    model = _hmmc_from_payload(_read(path, KIND_HMMC))
    model.validate()
    return model


def save_baseline(model: BaselineModel, path) -> None:
    _write(path, baseline_to_payload(model))


def load_baseline(path) -> BaselineModel:
    model = _baseline_from_payload(_read(path, KIND_BASELINE))
    model.validate()
    return model


def save_logit(model: LogitModel, path) -> None:
    _write(path, logit_to_payload(model))


def load_logit(path) -> LogitModel:
    return _logit_from_payload(_read(path, KIND_LOGIT))
