from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from timebin.fockcore import PhotonDistribution, output_distribution
from timebin.netcompile import ReflectivitySchedule, compile_schedule
from timebin.protocol import FIVE_PHOTON_REFLECTIVITIES, ExperimentSpec, standard_experiment
from timebin.timetags import (SequenceRecord, TagStream, bin_tags, event_frequencies, extract_events, read_tags,
                              read_tags_csv, stream_statistics, synthesize_stream, write_tags, write_tags_csv)

SPEC4 = ExperimentSpec(ReflectivitySchedule(4, [0.5, 0.5, 0.5]), (1, 0, 1, 0))  # tau 100 ns, T 500 ns


def point_mass(pattern):
    return PhotonDistribution(np.array([pattern]), np.array([1.0]), "collision_free", "indistinguishable")


def test_point_mass_stream():
    s = synthesize_stream(point_mass((1, 0, 1, 0)), SPEC4, 1.0, 0.0, 3, seed=0)
    assert s.timestamps_ps.tolist() == [0, 200_000, 500_000, 700_000, 1_000_000, 1_200_000]
    assert s.channels.tolist() == [0] * 6
    records = bin_tags(s, SPEC4)
    assert [r.occupied_bins for r in records] == [frozenset({1, 3})] * 3
    assert all(r.stray_count == 0 and r.duplicate_count == 0 for r in records)


def test_efficiency_thinning():
    n_frames = 200_000
    s = synthesize_stream(point_mass((1, 0, 1, 0)), SPEC4, 0.85, 0.0, n_frames, seed=11)
    expected = 2 * n_frames
    sigma = np.sqrt(expected * 0.85 * 0.15)
    assert abs(len(s) - 0.85 * expected) <= 3 * sigma


def test_jitter_stays_near_bin_centres():
    s = synthesize_stream(point_mass((1, 1, 1, 1)), SPEC4, 1.0, 50.0, 50_000, seed=2)
    offset = np.mod(s.timestamps_ps + 50_000, 100_000) - 50_000
    assert np.all(np.abs(offset) <= 500)
    assert np.std(offset) == pytest.approx(50, rel=0.02)
    assert all(r.occupied_bins == frozenset({1, 2, 3, 4}) for r in bin_tags(s, SPEC4))


def test_midpoint_tag_is_stray():
    s = TagStream([150_000], [0])
    (rec,) = bin_tags(s, SPEC4, window_ns=3.0)
    assert rec.occupied_bins == frozenset() and rec.stray_count == 1


def test_window_edges():
    inside = TagStream([101_500], [0])
    outside = TagStream([101_501], [0])
    assert bin_tags(inside, SPEC4)[0].occupied_bins == frozenset({2})
    assert bin_tags(outside, SPEC4)[0].stray_count == 1


def test_hand_built_ten_tags():
    ts = [0, 200_000, 299_000, 500_000, 600_400, 800_000, 1_000_000, 1_100_000, 1_250_000, 1_300_000]
    records = bin_tags(TagStream(ts, [0] * 10), SPEC4)
    assert [sorted(r.occupied_bins) for r in records] == [[1, 3, 4], [1, 2, 4], [1, 2, 4]]
    assert sum(r.stray_count for r in records) == 1
    assert sum(len(r.occupied_bins) for r in records) == 9


def test_duplicates_counted_once():
    records = bin_tags(TagStream([0, 100, 200_000], [0, 0, 0]), SPEC4)
    assert records[0].occupied_bins == frozenset({1, 3})
    assert records[0].duplicate_count == 1


def test_other_channel_ignored():
    records = bin_tags(TagStream([0, 200_000], [0, 1]), SPEC4)
    assert records[0].occupied_bins == frozenset({1})


def test_bin_tags_preconditions():
    with pytest.raises(ValueError):
        bin_tags(TagStream([0], [0]), SPEC4, window_ns=150.0)
    with pytest.raises(ValueError):
        bin_tags(TagStream([5, 0], [0, 0]), SPEC4)
    with pytest.raises(ValueError):
        TagStream([0], [2])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 50), st.integers(0, 2**16))
def test_translation_invariance(k, seed):
    e = standard_experiment(2, "odd")
    d = output_distribution(compile_schedule(e.schedule), e.input)
    s = synthesize_stream(d, e, 0.9, 40.0, 200, seed=seed)
    T = int(e.sequence_period_ns * 1000)
    a = bin_tags(s, e, n_frames=200)
    b = bin_tags(TagStream(s.timestamps_ps + k * T, s.channels), e, n_frames=200 + k)
    assert all(r.occupied_bins == frozenset() for r in b[:k])
    for ra, rb in zip(a, b[k:]):
        assert rb.frame_index == ra.frame_index + k
        assert (ra.occupied_bins, ra.stray_count, ra.duplicate_count) == (
            rb.occupied_bins, rb.stray_count, rb.duplicate_count)


def test_extract_events():
    recs = [SequenceRecord(i, frozenset({1, 3})) for i in range(4)]
    events, census = extract_events(recs, 2, 4)
    assert events == Counter({(1, 0, 1, 0): 4})
    mixed = [SequenceRecord(0, frozenset({1})), SequenceRecord(1, frozenset({1, 3})),
             SequenceRecord(2, frozenset({1, 3, 5}))]
    events, census = extract_events(mixed, 2, 6)
    assert events == Counter({(1, 0, 1, 0, 0, 0): 1})
    assert census == Counter({1: 1, 2: 1, 3: 1})
    with pytest.raises(ValueError):
        extract_events(recs, 0, 4)


def test_roundtrip_reproduces_drawn_outcomes():
    e = standard_experiment(3, "even")
    d = output_distribution(compile_schedule(e.schedule), e.input)
    s, drawn = synthesize_stream(d, e, 1.0, 0.0, 5000, seed=8, return_outcomes=True)
    records = bin_tags(s, e, n_frames=5000)
    got = np.array([[1 if b + 1 in r.occupied_bins else 0 for b in range(e.m)] for r in records])
    assert np.array_equal(got, d.patterns[drawn])


def test_file_roundtrip(tmp_path):
    s = TagStream([0, 5, 2**40], [0, 1, 0])
    write_tags(tmp_path / "t.bin", s)
    raw = (tmp_path / "t.bin").read_bytes()
    assert len(raw) == 16 + 3 * 9
    back = read_tags(tmp_path / "t.bin")
    assert np.array_equal(back.timestamps_ps, s.timestamps_ps) and np.array_equal(back.channels, s.channels)
    assert back.origin == "file"
    write_tags_csv(tmp_path / "t.csv", s, header="h")
    back = read_tags_csv(tmp_path / "t.csv")
    assert np.array_equal(back.timestamps_ps, s.timestamps_ps)


def test_corrupt_files(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOTTAGS!" + bytes(8))
    with pytest.raises(ValueError, match="not a time-tag"):
        read_tags(p)
    write_tags(p, TagStream([1], [0]))
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(ValueError, match="truncated"):
        read_tags(p)


def test_stream_statistics():
    s = TagStream([0, 200_000, 250_000], [0, 0, 0])
    recs = bin_tags(s, SPEC4)
    st_ = stream_statistics(s, recs, 2, 4)
    assert st_["tags"] == 3 and st_["stray_tags"] == 1 and st_["collision_free_events"] == 1


@pytest.mark.slow
def test_five_photon_statistical_roundtrip():
    e = standard_experiment(5, "even", FIVE_PHOTON_REFLECTIVITIES)
    d = output_distribution(compile_schedule(e.schedule), e.input)
    n_frames = 1_000_000
    s = synthesize_stream(d, e, 0.9, 30.0, n_frames, seed=5)
    events, census = extract_events(bin_tags(s, e, n_frames=n_frames), 5, e.m)
    total = sum(events.values())
    assert total == census[5]
    observed = event_frequencies(events, d) * total
    expected = d.probabilities * total
    # pool sparse bins so the chi-squared approximation holds
    small = expected < 5
    obs = np.r_[observed[~small], observed[small].sum()]
    exp = np.r_[expected[~small], expected[small].sum()]
    assert stats.chisquare(obs, exp).pvalue > 0.01
