import math
import warnings

import pytest

from mess.curves import CurveFamily
from mess.errors import EmptyInputError, FormatError, MessWarning
from mess.fixtures import table1_family
from mess.profiler import (GREEN, OUTPUT_COLUMNS, RED, YELLOW, ProfileSample, StressScorer, bucket_of,
                           parse_samples, profile, profile_csv, stress_score)


@pytest.fixture(scope="module")
def ramp():
    # unloaded 100, top 150; slopes 4 then 5 ns per GB/s
    return CurveFamily.from_points({100: [(0, 100), (10, 140), (12, 150)]})


# -- stress score --------------------------------------------------------------

def test_unloaded_point_scores_zero(skylake):
    assert stress_score(skylake, 100, 0.0) == 0.0


def test_right_most_extreme_scores_one(skylake):
    top = max(skylake.curves.values(), key=lambda c: c.envelope[-1].latency)
    assert stress_score(skylake, top.read_ratio, top.max_bandwidth) == pytest.approx(1.0)


def test_weighted_sum(ramp):
    scorer = StressScorer(ramp)
    # at 7.5 GB/s: latency 130 -> lat_norm 0.6; segment slope 4 of max 5 -> slope_norm 0.8
    assert scorer.lat_norm(ramp.lookup(100, 7.5)[0]) == pytest.approx(0.6)
    assert scorer.slope_norm(100, 7.5) == pytest.approx(0.8)
    assert stress_score(ramp, 100, 7.5) == pytest.approx(0.7)


def test_weights_shift_the_score(ramp):
    assert stress_score(ramp, 100, 7.5, (1.0, 0.0)) == pytest.approx(0.6)
    assert stress_score(ramp, 100, 7.5, (0.0, 1.0)) == pytest.approx(0.8)


@pytest.mark.parametrize("weights", [(0.5, 0.6), (-0.1, 1.1), (0.2, 0.2)])
def test_bad_weights(ramp, weights):
    with pytest.raises(ValueError):
        StressScorer(ramp, weights)


def test_slope_uses_running_maximum():
    # the middle segment is flatter than the first, the score must not dip there
    fam = CurveFamily.from_points({100: [(0, 100), (10, 150), (20, 155), (30, 255)]})
    scorer = StressScorer(fam)
    assert scorer.slope_norm(100, 15) == pytest.approx(scorer.slope_norm(100, 5))
    scores = [stress_score(fam, 100, b) for b in range(0, 31)]
    assert scores == sorted(scores)


def test_slope_interpolates_between_ratios():
    fam = CurveFamily.from_points({50: [(0, 100), (10, 110), (20, 210)], 100: [(0, 100), (20, 300)]})
    scorer = StressScorer(fam)
    # ratio 50 sits on its flat first segment (0.1), ratio 100 on its only segment (1.0)
    assert scorer.slope_norm(75, 5) == pytest.approx(0.5 * 0.1 + 0.5 * 1.0)


def test_degenerate_family_scores_zero_with_warning():
    fam = CurveFamily.from_points({100: [(0, 90), (50, 90)]})
    with pytest.warns(MessWarning, match="degenerate"):
        assert stress_score(fam, 100, 50) == 0.0


def test_buckets():
    assert [bucket_of(x) for x in (0.0, 0.3299, 0.33, 0.6599, 0.66, 1.0)] == \
        [GREEN, GREEN, YELLOW, YELLOW, RED, RED]


# -- profile -------------------------------------------------------------------

def test_empty_samples(skylake):
    assert profile(skylake, []) == []


def test_idle_sample_is_green(skylake):
    (p,) = profile(skylake, [ProfileSample(0, 0.0, 100)])
    assert (p.latency_ns, p.stress_score, p.bucket, p.saturated) == (89, 0.0, GREEN, False)


def test_hpcg_like_samples_on_cascadelake():
    fam = table1_family("cascadelake")
    samples = [ProfileSample(10_000 * i, bw, ratio)
               for i, (bw, ratio) in enumerate([(20.0, 95), (76.0, 100), (106.0, 90), (110.3, 100), (5.0, 80)])]
    points = profile(fam, samples)
    assert [p.sample for p in points] == samples
    peaks = [p for p in points if p.sample.total_bw >= 100]
    assert peaks and all(260 <= p.latency_ns <= 290 for p in peaks)
    assert all(p.bucket == RED for p in peaks)
    assert points[0].bucket == GREEN and points[-1].bucket == GREEN


def test_saturated_flag_is_carried(skylake):
    (p,) = profile(skylake, [ProfileSample(0, 500.0, 100)])
    assert p.saturated and p.latency_ns == skylake.curves[100].envelope[-1].latency
    assert p.stress_score == pytest.approx(1.0)


def test_profile_is_pure(skylake):
    samples = [ProfileSample(i, 1.1 * i, 50 + i % 51) for i in range(100)]
    assert profile(skylake, samples) == profile(skylake, samples)


def test_sample_validation():
    with pytest.raises(ValueError):
        ProfileSample(0, -1.0, 100)
    with pytest.raises(ValueError):
        ProfileSample(0, 1.0, 101)
    with pytest.raises(ValueError):
        ProfileSample(0, math.inf, 50)


# -- sample CSV ----------------------------------------------------------------

def test_total_header_round_trip(skylake):
    text = profile_csv(skylake, ["timestamp_us,total_bw_gbps,read_ratio_pct", "0,0,100", "10000,100.5,70"])
    lines = text.splitlines()
    assert lines[0] == "timestamp_us,total_bw_gbps,read_ratio_pct," + ",".join(OUTPUT_COLUMNS)
    assert lines[1] == "0,0,100,89.0,0.0,green,0"
    assert lines[2].startswith("10000,100.5,70,")


def test_split_header_derives_ratio():
    header, samples = parse_samples(["timestamp_us,read_bw_gbps,write_bw_gbps", "0,30,10", "5,0,0"])
    assert header[1] == "read_bw_gbps"
    assert (samples[0].total_bw, samples[0].read_ratio) == (40, 75)
    assert samples[1].read_ratio == 100


def test_blank_lines_are_skipped():
    _, samples = parse_samples(["", "timestamp_us,total_bw_gbps,read_ratio_pct", "", "0,1,100"])
    assert len(samples) == 1


def test_header_only_gives_header_only_output(skylake):
    assert profile_csv(skylake, ["timestamp_us,total_bw_gbps,read_ratio_pct"]).count("\n") == 1


def test_empty_sample_file():
    with pytest.raises(EmptyInputError):
        parse_samples([])


def test_unknown_header():
    with pytest.raises(FormatError):
        parse_samples(["time,bw,ratio", "0,1,2"])


@pytest.mark.parametrize("row, what", [
    ("0,abc,100", "not a number"),
    ("0,1", "columns"),
    ("0,-1,100", "bandwidth"),
    ("0,1,150", "read ratio"),
    ("0,nan,100", "finite"),
])
def test_bad_rows_name_the_row(row, what):
    with pytest.raises(ValueError, match=f"row 3: .*{what}"):
        parse_samples(["timestamp_us,total_bw_gbps,read_ratio_pct", "0,1,100", row])


def test_timestamps_must_not_go_backwards():
    with pytest.raises(ValueError, match="row 3"):
        parse_samples(["timestamp_us,total_bw_gbps,read_ratio_pct", "10,1,100", "5,1,100"])


def test_no_warning_on_normal_profile(skylake):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        profile(skylake, [ProfileSample(0, 50, 70)])
