import json
import math

import numpy as np
import pytest

from loadsynth.errors import InputError, TrainingError, UsageError, ValidationError
from loadsynth.users import (
    AttributeSpec,
    LogitModel,
    UserRecord,
    UserSchema,
    assign_pattern,
    decode_row,
    encode_records,
    fit_logit,
    load_schema,
    load_users_csv,
    logit_gradient,
    logit_loss,
    sample_user,
)

import oracles


def make_schema():
    return UserSchema(
        schema_id="test-v1",
        attributes=[
            AttributeSpec("building_type", "categorical", levels=["apartment", "house"]),
            AttributeSpec("house_year", "numeric", integer_like=True),
            AttributeSpec("square_feet", "numeric"),
        ],
    )


def record(building="house", year=1990.0, sqft=1200.0):
    return UserRecord(
        attributes={"building_type": building, "house_year": year, "square_feet": sqft},
        schema_id="test-v1",
    )


class TestSampleUser:
    def test_pool_of_one_noise_off(self):
        base = record()
        out = sample_user([base], seed=3, integer_noise_step=0)
        assert out.attributes == base.attributes

    def test_uniform_row_frequencies(self, rng):
        pool = [record(year=1990.0), record(year=2000.0)]
        hits = sum(
            sample_user(pool, rng, integer_noise_step=0).attributes["house_year"] == 1990.0
            for _ in range(10_000)
        )
        assert 0.48 <= hits / 10_000 <= 0.52

    def test_integer_noise_stays_within_one_step(self, rng):
        schema = make_schema()
        pool = [record(year=1990.0)]
        seen = set()
        for _ in range(200):
            out = sample_user(pool, rng, schema=schema, integer_noise_step=1)
            seen.add(out.attributes["house_year"])
            # non integer-like numeric and categoricals stay untouched
            assert out.attributes["square_feet"] == 1200.0
            assert out.attributes["building_type"] in ("apartment", "house")
        assert seen == {1989.0, 1990.0, 1991.0}

    def test_categorical_always_among_levels(self, rng):
        schema = make_schema()
        pool = [record(building="apartment"), record(building="house")]
        for _ in range(50):
            out = sample_user(pool, rng, schema=schema)
            assert out.attributes["building_type"] in ("apartment", "house")


class TestEncoding:
    def test_encode_decode_round_trip(self):
        schema = make_schema()
        records = [record(), record(building="apartment", year=2001.0, sqft=800.5)]
        X = encode_records(records, schema)
        assert X.shape == (2, 4)  # 2 one-hot + 2 numeric
        for row, original in zip(X, records):
            assert decode_row(row, schema).attributes == original.attributes
        # encode(decode(x)) = x for conformant encodings
        assert np.array_equal(encode_records([decode_row(X[1], schema)], schema)[0], X[1])

    def test_schema_mismatch_rejected(self):
        schema = make_schema()
        bad = UserRecord(attributes={"building_type": "castle"}, schema_id="other")
        with pytest.raises(ValidationError):
            encode_records([bad], schema)
        wrong_level = record(building="castle")
        with pytest.raises(ValidationError):
            encode_records([wrong_level], schema)


def simple_schema():
    return UserSchema("x-v1", [AttributeSpec("x", "numeric")])


def xrecord(x):
    return UserRecord(attributes={"x": float(x)}, schema_id="x-v1")


class TestFitLogit:
    def test_separated_one_dimensional_classes(self):
        schema = simple_schema()
        xs = [-3.0, -2.5, -2.0, -1.5, 2.0, 2.5, 3.0, 3.5]
        records = [xrecord(x) for x in xs]
        labels = [0, 0, 0, 0, 1, 1, 1, 1]
        model = fit_logit(records, labels, schema, lam=1e-3)
        scores = model.scores(records)
        predicted = [model.classes[int(np.argmax(s))] for s in scores]
        assert predicted == labels

    def test_loss_matches_convex_optimizer_oracle(self):
        from scipy import optimize

        schema = simple_schema()
        rng = np.random.Generator(np.random.PCG64(7))
        xs = rng.normal(size=24)
        labels = (xs + rng.normal(scale=0.6, size=24) > 0).astype(int).tolist()
        records = [xrecord(x) for x in xs]
        lam = 1e-2
        model = fit_logit(records, labels, schema, lam=lam)
        Z = np.hstack([np.ones((24, 1)), xs[:, None]])
        y = np.asarray(labels, dtype=float)
        beta_hat = np.concatenate([[model.intercepts[1]], model.coefficients[1]])
        result = optimize.minimize(
            lambda b: logit_loss(b, Z, y, lam), np.zeros(2), method="L-BFGS-B"
        )
        assert logit_loss(beta_hat, Z, y, lam) <= result.fun + 1e-6

    def test_balanced_intercept_only_is_exact(self):
        # constant feature, balanced labels: the optimum is beta = 0 and
        # the intercept equals log(p/(1-p)) = 0 exactly
        schema = simple_schema()
        records = [xrecord(2.0) for _ in range(8)]
        labels = [0, 1] * 4
        model = fit_logit(records, labels, schema, lam=1e-3)
        assert model.intercepts.tolist() == [0.0, 0.0]
        assert model.coefficients.ravel().tolist() == [0.0, 0.0]

    def test_uninformative_feature_four_classes(self):
        # the constant column makes intercept/coefficient identifiable only
        # through the penalty, so the landing point sits within tol/lambda
        # of the analytic optimum; tighten tol accordingly
        schema = simple_schema()
        records = [xrecord(1.0) for _ in range(8)]
        labels = [0, 1, 2, 3] * 2
        model = fit_logit(records, labels, schema, lam=1e-3, tol=1e-8, max_iters=200_000)
        analytic = math.log((1 / 4) / (3 / 4))
        for k in range(4):
            assert model.coefficients[k, 0] == pytest.approx(0.0, abs=1e-4)
            assert model.intercepts[k] == pytest.approx(analytic, abs=1e-4)

    def test_gradient_below_tolerance_at_optimum(self):
        schema = simple_schema()
        xs = [-1.0, -0.5, 0.5, 1.0, -0.8, 0.9]
        records = [xrecord(x) for x in xs]
        labels = [0, 0, 1, 1, 0, 1]
        lam = 1e-2
        model = fit_logit(records, labels, schema, lam=lam)
        Z = np.hstack([np.ones((len(xs), 1)), np.asarray(xs)[:, None]])
        for k, cls in enumerate(model.classes):
            y = (np.asarray(labels) == cls).astype(float)
            beta = np.concatenate([[model.intercepts[k]], model.coefficients[k]])
            assert np.max(np.abs(logit_gradient(beta, Z, y, lam))) < 1e-6

    def test_objective_non_increasing(self):
        schema = simple_schema()
        rng = np.random.Generator(np.random.PCG64(21))
        xs = rng.normal(size=30)
        labels = (xs > 0.2).astype(int).tolist()
        model = fit_logit(records=[xrecord(x) for x in xs], labels=labels, schema=schema)
        for history in model.loss_histories.values():
            diffs = np.diff(history)
            assert np.all(diffs <= 1e-15)

    def test_gradient_matches_central_differences(self, rng):
        Z = np.hstack([np.ones((15, 1)), rng.normal(size=(15, 3))])
        y = rng.integers(0, 2, size=15).astype(float)
        lam = 1e-3
        for _ in range(5):
            beta = rng.normal(size=4)
            analytic = logit_gradient(beta, Z, y, lam)
            numeric = oracles.central_diff_gradient(
                lambda b: logit_loss(b, Z, y, lam), beta
            )
            denom = max(1.0, float(np.linalg.norm(analytic)))
            assert np.linalg.norm(analytic - numeric) / denom < 1e-5

    def test_single_label_rejected(self):
        schema = simple_schema()
        with pytest.raises(TrainingError):
            fit_logit([xrecord(1.0), xrecord(2.0)], [3, 3], schema)

    def test_separable_without_penalty_warns(self, caplog):
        schema = simple_schema()
        records = [xrecord(x) for x in (-2.0, -1.0, 1.0, 2.0)]
        with caplog.at_level("WARNING"):
            fit_logit(records, [0, 0, 1, 1], schema, lam=0.0, max_iters=200)
        assert any("separable" in r.message for r in caplog.records)


class TestAssign:
    def _model(self, intercepts, coefs=None):
        schema = simple_schema()
        k = len(intercepts)
        coefs = np.zeros((k, 1)) if coefs is None else np.asarray(coefs, dtype=float)
        return LogitModel(
            schema=schema,
            classes=list(range(k)),
            intercepts=np.asarray(intercepts, dtype=float),
            coefficients=coefs,
            lam=0.0,
        )

    def test_argmax_picks_highest_score(self):
        model = self._model([2.0, -1.0])
        assert assign_pattern(xrecord(0.0), model, mode="argmax") == 0

    def test_argmax_tie_breaks_to_lowest_id(self):
        model = self._model([1.5, 1.5, 0.0])
        assert assign_pattern(xrecord(0.0), model, mode="argmax") == 0

    def test_sample_frequencies_on_equal_scores(self, rng):
        model = self._model([0.7, 0.7])
        hits = sum(
            assign_pattern(xrecord(0.0), model, mode="sample", seed=rng) == 0
            for _ in range(10_000)
        )
        assert 0.48 <= hits / 10_000 <= 0.52

    def test_constant_shift_leaves_choice_unchanged(self, rng):
        base = self._model([0.4, -0.3, 1.1], coefs=[[0.5], [-0.2], [0.1]])
        shifted = self._model(
            base.intercepts + 7.0, coefs=base.coefficients
        )
        for _ in range(20):
            user = xrecord(rng.normal())
            assert assign_pattern(user, base, "argmax") == assign_pattern(user, shifted, "argmax")
            seed = int(rng.integers(2**31))
            assert assign_pattern(user, base, "sample", seed) == assign_pattern(
                user, shifted, "sample", seed
            )

    def test_schema_mismatch_and_bad_mode(self):
        model = self._model([0.0, 1.0])
        with pytest.raises(ValidationError):
            assign_pattern(record(), model, "argmax")
        with pytest.raises(UsageError):
            assign_pattern(xrecord(1.0), model, "best")


class TestSchemaFiles:
    def test_allowlist_drops_sensitive_attributes(self, tmp_path, caplog):
        raw = {
            "schema_id": "residential-lite",
            "attributes": [
                {"name": "building_type", "type": "categorical", "levels": ["a", "b"]},
                {"name": "ssn", "type": "numeric"},
            ],
            "allowlist": ["building_type"],
        }
        path = tmp_path / "schema.json"
        path.write_text(json.dumps(raw))
        with caplog.at_level("WARNING"):
            schema = load_schema(path)
        assert schema.names == ["building_type"]
        assert any("ssn" in r.message for r in caplog.records)

    def test_users_csv_round_trip(self, tmp_path):
        schema_path = tmp_path / "schema.json"
        schema_path.write_text(
            json.dumps(
                {
                    "schema_id": "s1",
                    "attributes": [
                        {"name": "kind", "type": "categorical", "levels": ["x", "y"]},
                        {"name": "year", "type": "numeric", "integer_like": True},
                    ],
                }
            )
        )
        schema = load_schema(schema_path)
        users = tmp_path / "users.csv"
        users.write_text("user_id,kind,year\nu1,x,1999\nu2,y,2004\n")
        ids, records = load_users_csv(users, schema)
        assert ids == ["u1", "u2"]
        assert records[0].attributes == {"kind": "x", "year": 1999.0}

    def test_users_csv_errors(self, tmp_path):
        schema_path = tmp_path / "schema.json"
        schema_path.write_text(
            json.dumps(
                {
                    "schema_id": "s1",
                    "attributes": [
                        {"name": "kind", "type": "categorical", "levels": ["x"]}
                    ],
                }
            )
        )
        schema = load_schema(schema_path)
        bad_level = tmp_path / "u1.csv"
        bad_level.write_text("user_id,kind\nu1,zebra\n")
        with pytest.raises(ValidationError):
            load_users_csv(bad_level, schema)
        missing_col = tmp_path / "u2.csv"
        missing_col.write_text("user_id,other\nu1,1\n")
        with pytest.raises(InputError):
            load_users_csv(missing_col, schema)
