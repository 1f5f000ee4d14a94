"""Synthetic user attributes and yearly-pattern assignment.

User generation resamples whole attribute rows (keeping cross-attribute
correlations) with optional +/-1-step noise on integer-like fields.
Pattern assignment uses one binary logistic regression per yearly
pattern (log-odds linear in the encoded attributes), fit by full-batch
gradient descent with an L2 penalty on the non-intercept coefficients,
combined with an argmax or softmax draw over the per-pattern scores.
A schema sidecar declares attribute types, categorical levels and the
allowlist of attributes that may leave the raw data at all.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataShapeError, InputError, TrainingError, UsageError, ValidationError

log = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass
class AttributeSpec:
    name: str
    kind: str
    levels: list[str] | None = None
    integer_like: bool = False

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise UsageError(f"attribute {self.name}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL and not self.levels:
            raise UsageError(f"attribute {self.name}: categorical needs declared levels")


@dataclass
class UserSchema:
    schema_id: str
    attributes: list[AttributeSpec]

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def attribute(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise UsageError(f"schema {self.schema_id} has no attribute {name!r}")

    @property
    def encoded_width(self) -> int:
        return sum(1 if a.kind == NUMERIC else len(a.levels) for a in self.attributes)

    def encoded_names(self) -> list[str]:
        names = []
        for a in self.attributes:
            if a.kind == NUMERIC:
                names.append(a.name)
            else:
                names.extend(f"{a.name}={level}" for level in a.levels)
        return names


@dataclass
class UserRecord:
    attributes: dict[str, float | str]
    schema_id: str


def load_schema(path) -> UserSchema:
    """Read the sidecar schema and apply its sensitive-attribute allowlist."""
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise InputError(f"cannot read schema {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"schema {path} is not valid JSON: {exc}") from None
    try:
        specs = [
            AttributeSpec(
                name=a["name"],
                kind=a["type"],
                levels=a.get("levels"),
                integer_like=a.get("integer_like", False),
            )
            for a in raw["attributes"]
        ]
        schema_id = raw["schema_id"]
    except KeyError as exc:
        raise InputError(f"schema {path} missing key {exc}") from None
    allowlist = raw.get("allowlist")
    if allowlist is not None:
        dropped = [a.name for a in specs if a.name not in allowlist]
        if dropped:
            log.warning("schema %s: dropping non-allowlisted attributes %s", schema_id, dropped)
        specs = [a for a in specs if a.name in allowlist]
    if not specs:
        raise InputError(f"schema {path}: no usable attributes after allowlist filtering")
    return UserSchema(schema_id=schema_id, attributes=specs)


def load_users_csv(path, schema: UserSchema) -> tuple[list[str], list[UserRecord]]:
    """Read user attribute rows; returns (user_ids, records) in file order."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from None
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or "user_id" not in reader.fieldnames:
            raise InputError(f"{path}: expected a header with a user_id column")
        missing = [n for n in schema.names if n not in reader.fieldnames]
        if missing:
            raise InputError(f"{path}: columns {missing} declared in schema but absent")
        ids, records = [], []
        for line_number, row in enumerate(reader, start=2):
            attributes: dict[str, float | str] = {}
            for spec in schema.attributes:
                raw = (row[spec.name] or "").strip()
                if spec.kind == NUMERIC:
                    try:
                        attributes[spec.name] = float(raw)
                    except ValueError:
                        raise ValidationError(
                            f"{path} line {line_number}: {spec.name}={raw!r} is not numeric"
                        ) from None
                else:
                    if raw not in spec.levels:
                        raise ValidationError(
                            f"{path} line {line_number}: {spec.name}={raw!r} "
                            f"not among declared levels {spec.levels}"
                        )
                    attributes[spec.name] = raw
            ids.append(row["user_id"])
            records.append(UserRecord(attributes=attributes, schema_id=schema.schema_id))
    return ids, records


def validate_record(record: UserRecord, schema: UserSchema) -> None:
    if record.schema_id != schema.schema_id:
        raise ValidationError(
            f"record schema {record.schema_id!r} != expected {schema.schema_id!r}"
        )
    for spec in schema.attributes:
        if spec.name not in record.attributes:
            raise ValidationError(f"record missing attribute {spec.name!r}")
        value = record.attributes[spec.name]
        if spec.kind == CATEGORICAL and value not in spec.levels:
            raise ValidationError(f"{spec.name}={value!r} not among declared levels")


def sample_user(
    pool: list[UserRecord],
    seed,
    schema: UserSchema | None = None,
    integer_noise_step: int = 1,
) -> UserRecord:
    """Resample one whole attribute row, nudging integer-like fields.

    Whole-row resampling preserves cross-attribute correlations.  Each
    integer-like numeric field is shifted by a uniform draw from
    {-step, ..., +step}; ``integer_noise_step=0`` (or omitting the
    schema) disables the noise.
    """
    if not pool:
        raise DataShapeError("user pool is empty")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))
    base = pool[int(rng.integers(len(pool)))]
    attributes = dict(base.attributes)
    if integer_noise_step > 0 and schema is not None:
        for spec in schema.attributes:
            if spec.kind == NUMERIC and spec.integer_like:
                delta = int(rng.integers(-integer_noise_step, integer_noise_step + 1))
                attributes[spec.name] = float(attributes[spec.name]) + delta
    return UserRecord(attributes=attributes, schema_id=base.schema_id)


def encode_records(records: list[UserRecord], schema: UserSchema) -> np.ndarray:
    """Numeric columns pass through; categoricals one-hot over declared levels."""
    X = np.zeros((len(records), schema.encoded_width))
    for r, record in enumerate(records):
        validate_record(record, schema)
        col = 0
        for spec in schema.attributes:
            value = record.attributes[spec.name]
            if spec.kind == NUMERIC:
                X[r, col] = float(value)
                col += 1
            else:
                X[r, col + spec.levels.index(value)] = 1.0
                col += len(spec.levels)
    return X


def decode_row(x: np.ndarray, schema: UserSchema) -> UserRecord:
    attributes: dict[str, float | str] = {}
    col = 0
    for spec in schema.attributes:
        if spec.kind == NUMERIC:
            attributes[spec.name] = float(x[col])
            col += 1
        else:
            block = x[col : col + len(spec.levels)]
            attributes[spec.name] = spec.levels[int(np.argmax(block))]
            col += len(spec.levels)
    return UserRecord(attributes=attributes, schema_id=schema.schema_id)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logit_loss(beta: np.ndarray, Z: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Mean negative log-likelihood plus L2 on the non-intercept weights."""
    z = Z @ beta
    nll = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return nll + 0.5 * lam * float(beta[1:] @ beta[1:])


def logit_gradient(beta: np.ndarray, Z: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    residual = _sigmoid(Z @ beta) - y
    g = Z.T @ residual / len(y)
    g[1:] += lam * beta[1:]
    return g


@dataclass
class LogitModel:
    schema: UserSchema
    classes: list[int]
    intercepts: np.ndarray  # (K,)
    coefficients: np.ndarray  # (K, width)
    lam: float
    loss_histories: dict[int, list[float]] = field(default_factory=dict, repr=False)

    def scores(self, records: list[UserRecord]) -> np.ndarray:
        X = encode_records(records, self.schema)
        return self.intercepts[None, :] + X @ self.coefficients.T


def fit_logit(
    records: list[UserRecord],
    labels: list[int],
    schema: UserSchema,
    lam: float = 1e-3,
    max_iters: int = 10_000,
    tol: float = 1e-6,
) -> LogitModel:
    """One-vs-rest logistic fit by deterministic full-batch gradient descent.

    Zero initialization, constant step 1/L with L an upper bound on the
    objective's curvature, stop when the gradient max-norm drops below
    ``tol`` or after ``max_iters`` steps.  The intercept is unpenalized.
    """
    if len(records) != len(labels):
        raise DataShapeError("records and labels differ in length")
    classes = sorted(set(int(l) for l in labels))
    if len(classes) < 2:
        raise TrainingError("need at least two distinct yearly pattern labels")
    X = encode_records(records, schema)
    n = len(X)
    Z = np.hstack([np.ones((n, 1)), X])
    # 1/4 bounds the logistic curvature; the top singular value bounds Z'Z
    sigma_max = float(np.linalg.svd(Z, compute_uv=False)[0])
    step = 1.0 / (sigma_max**2 / (4.0 * n) + (lam if lam > 0 else 1e-12))

    y_all = np.asarray(labels, dtype=np.int64)
    intercepts = np.zeros(len(classes))
    coefficients = np.zeros((len(classes), X.shape[1]))
    histories: dict[int, list[float]] = {}
    for k, cls in enumerate(classes):
        y = (y_all == cls).astype(np.float64)
        beta = np.zeros(Z.shape[1])
        history = [logit_loss(beta, Z, y, lam)]
        converged = False
        for _ in range(max_iters):
            g = logit_gradient(beta, Z, y, lam)
            if float(np.max(np.abs(g))) < tol:
                converged = True
                break
            beta = beta - step * g
            history.append(logit_loss(beta, Z, y, lam))
        if not converged and lam == 0.0:
            log.warning(
                "class %s: gradient still %.2e after %d iterations; data may be "
                "perfectly separable with no regularization",
                cls,
                float(np.max(np.abs(logit_gradient(beta, Z, y, lam)))),
                max_iters,
            )
        intercepts[k] = beta[0]
        coefficients[k] = beta[1:]
        histories[cls] = history
    return LogitModel(
        schema=schema,
        classes=classes,
        intercepts=intercepts,
        coefficients=coefficients,
        lam=lam,
        loss_histories=histories,
    )


def assign_pattern(
    user: UserRecord, model: LogitModel, mode: str = "argmax", seed=0
) -> int:
    """Pick a yearly pattern from the per-pattern scores.

    ``argmax`` breaks ties toward the lowest pattern id; ``sample`` draws
    from the softmax of the scores.
    """
    scores = model.scores([user])[0]
    if mode == "argmax":
        return model.classes[int(np.argmax(scores))]
    if mode == "sample":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))
        shifted = scores - scores.max()
        p = np.exp(shifted)
        p /= p.sum()
        u = rng.random()
        idx = min(int(np.searchsorted(np.cumsum(p), u, side="right")), len(p) - 1)
        return model.classes[idx]
    raise UsageError(f"mode must be 'argmax' or 'sample', got {mode!r}")
