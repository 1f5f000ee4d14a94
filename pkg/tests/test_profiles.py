import numpy as np
import pytest
from datetime import datetime, timezone

from loadsynth.errors import ParseError, ValidationError
from loadsynth.profiles import (
    LoadProfile,
    Scale,
    parse_csv,
    segment_profile,
    write_csv,
)

UTC = timezone.utc


def _write(tmp_path, text, name="in.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


HEADER = "user_id,timestamp,kwh\n"


class TestParse:
    def test_three_rows_one_profile(self, tmp_path):
        path = _write(
            tmp_path,
            HEADER
            + "u1,2015-01-01T00:00:00+00:00,1.0\n"
            + "u1,2015-01-01T00:15:00+00:00,2.0\n"
            + "u1,2015-01-01T00:30:00+00:00,0.5\n",
        )
        result = parse_csv(path)
        assert len(result.profiles) == 1
        profile = result.profiles[0]
        assert profile.user_id == "u1"
        assert len(profile.values) == 3
        assert profile.values.tolist() == [1.0, 2.0, 0.5]

    def test_rows_sorted_by_timestamp(self, tmp_path):
        path = _write(
            tmp_path,
            HEADER
            + "u1,2015-01-01T00:30:00Z,0.5\n"
            + "u1,2015-01-01T00:00:00Z,1.0\n"
            + "u1,2015-01-01T00:15:00Z,2.0\n",
        )
        profile = parse_csv(path).profiles[0]
        assert profile.values.tolist() == [1.0, 2.0, 0.5]
        assert profile.start == datetime(2015, 1, 1, tzinfo=UTC)

    def test_gap_filled_by_linear_interpolation(self, tmp_path):
        path = _write(
            tmp_path,
            HEADER
            + "u1,2015-01-01T00:00:00Z,1.0\n"
            + "u1,2015-01-01T00:45:00Z,3.0\n",
        )
        profile = parse_csv(path).profiles[0]
        assert profile.values == pytest.approx([1.0, 5 / 3, 7 / 3, 3.0], abs=1e-12)

    def test_negative_reading_names_user_and_timestamp(self, tmp_path):
        path = _write(tmp_path, HEADER + "u7,2015-01-01T00:00:00Z,-0.5\n")
        with pytest.raises(ValidationError) as err:
            parse_csv(path)
        assert "u7" in str(err.value)
        assert "2015-01-01" in str(err.value)

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = _write(
            tmp_path,
            HEADER + "u1,2015-01-01T00:00:00Z,1.0\n" + "u1,not-enough-fields\n",
        )
        with pytest.raises(ParseError) as err:
            parse_csv(path)
        assert "line 3" in str(err.value)

    def test_bad_reading_and_bad_timestamp(self, tmp_path):
        with pytest.raises(ParseError):
            parse_csv(_write(tmp_path, HEADER + "u1,2015-01-01T00:00:00Z,abc\n"))
        with pytest.raises(ParseError):
            parse_csv(_write(tmp_path, HEADER + "u1,yesterday,1.0\n", "b.csv"))

    def test_gap_beyond_max_excludes_user(self, tmp_path):
        rows = [
            "ok,2015-01-01T00:00:00Z,1.0",
            "ok,2015-01-01T00:15:00Z,1.0",
            "gappy,2015-01-01T00:00:00Z,1.0",
            "gappy,2015-01-01T01:30:00Z,1.0",  # 5 missing readings
        ]
        result = parse_csv(_write(tmp_path, HEADER + "\n".join(rows) + "\n"))
        assert [p.user_id for p in result.profiles] == ["ok"]
        assert len(result.exclusions) == 1
        user, reason = result.exclusions[0]
        assert user == "gappy"
        assert "max_gap" in reason

    def test_gap_at_max_is_interpolated(self, tmp_path):
        path = _write(
            tmp_path,
            HEADER
            + "u1,2015-01-01T00:00:00Z,0.0\n"
            + "u1,2015-01-01T01:15:00Z,5.0\n",  # exactly 4 missing
        )
        result = parse_csv(path, max_gap=4)
        assert result.exclusions == []
        assert result.profiles[0].values == pytest.approx([0, 1, 2, 3, 4, 5])

    def test_duplicate_timestamp_rejected(self, tmp_path):
        path = _write(
            tmp_path,
            HEADER
            + "u1,2015-01-01T00:00:00Z,1.0\n"
            + "u1,2015-01-01T00:00:00Z,2.0\n",
        )
        with pytest.raises(ValidationError):
            parse_csv(path)

    def test_off_grid_timestamp_rejected(self, tmp_path):
        path = _write(tmp_path, HEADER + "u1,2015-01-01T00:07:00Z,1.0\n")
        with pytest.raises(ValidationError):
            parse_csv(path)

    def test_round_trip_lossless_for_clean_input(self, tmp_path):
        values = np.array([0.0, 1.25, 2.5, 0.125, 3.0625, 0.4, 1.7081])
        original = LoadProfile("u1", datetime(2015, 3, 2, tzinfo=UTC), values)
        out = tmp_path / "out.csv"
        write_csv(out, [original])
        reparsed = parse_csv(out).profiles
        assert len(reparsed) == 1
        assert reparsed[0].user_id == original.user_id
        assert reparsed[0].start == original.start
        assert np.array_equal(reparsed[0].values, original.values)


class TestProfileInvariants:
    def test_negative_value_rejected(self):
        with pytest.raises(ValidationError):
            LoadProfile("u", datetime(2015, 1, 1, tzinfo=UTC), np.array([1.0, -0.1]))

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            LoadProfile("u", datetime(2015, 1, 1, tzinfo=UTC), np.array([np.nan]))

    def test_unaligned_start_rejected(self):
        with pytest.raises(ValidationError):
            LoadProfile("u", datetime(2015, 1, 1, 0, 7, tzinfo=UTC), np.ones(4))

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            LoadProfile("u", datetime(2015, 1, 1, tzinfo=UTC), np.array([]))


def _profile(n_values, start=datetime(2015, 1, 1, tzinfo=UTC), seed=1):
    rng = np.random.Generator(np.random.PCG64(seed))
    return LoadProfile("u", start, rng.uniform(0, 2, n_values))


class TestSegmentation:
    def test_full_year_plus_one_day(self):
        result = segment_profile(_profile(35040))  # 365 days
        assert len(result.years) == 1
        assert len(result.years[0].values) == 34944
        assert len(result.weeks) == 52
        assert len(result.days) == 364

    def test_exact_week(self):
        result = segment_profile(_profile(672))
        assert (len(result.years), len(result.weeks), len(result.days)) == (0, 1, 7)

    def test_exact_day(self):
        result = segment_profile(_profile(96))
        assert (len(result.years), len(result.weeks), len(result.days)) == (0, 0, 1)

    def test_too_short_is_empty_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            result = segment_profile(_profile(95))
        assert not result.years and not result.weeks and not result.days
        assert any("fewer than one aligned day" in r.message for r in caplog.records)

    @pytest.mark.parametrize(
        "days,expected",
        [(10, (0, 1, 10)), (363, (0, 51, 363)), (364, (1, 52, 364)), (730, (2, 104, 728))],
    )
    def test_segment_counts(self, days, expected):
        result = segment_profile(_profile(days * 96))
        assert (len(result.years), len(result.weeks), len(result.days)) == expected

    def test_reassembly_nesting(self):
        result = segment_profile(_profile(35040, seed=9))
        for w, week in enumerate(result.weeks):
            day_block = np.concatenate(
                [result.days[w * 7 + i].values for i in range(7)]
            )
            assert np.array_equal(day_block, week.values)
        year_block = np.concatenate([result.weeks[i].values for i in range(52)])
        assert np.array_equal(year_block, result.years[0].values)

    def test_alignment_to_first_midnight(self):
        profile = _profile(97, start=datetime(2015, 1, 1, 23, 45, tzinfo=UTC))
        result = segment_profile(profile)
        assert len(result.days) == 1
        assert np.array_equal(result.days[0].values, profile.values[1:])

    def test_anchor_weekday(self):
        # 2015-01-01 is a Thursday; anchoring to Monday drops 4 days
        profile = _profile(96 * 12)
        result = segment_profile(profile, anchor_weekday=0)
        assert len(result.days) == 8
        assert np.array_equal(result.days[0].values, profile.values[4 * 96 : 5 * 96])

    def test_ordinals_and_scales(self):
        result = segment_profile(_profile(672))
        assert [d.ordinal for d in result.days] == list(range(7))
        assert result.weeks[0].scale is Scale.WEEK
        assert all(d.source_user == "u" for d in result.days)

    def test_half_hour_interval(self):
        profile = LoadProfile(
            "u", datetime(2015, 1, 1, tzinfo=UTC), np.ones(48 * 8), interval_minutes=30
        )
        result = segment_profile(profile)
        assert (len(result.years), len(result.weeks), len(result.days)) == (0, 1, 8)
        assert len(result.weeks[0].values) == 336
