import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import staircase_product
from timebin.netcompile import (ModeMatrix, ReflectivitySchedule, beamsplitter_block, compile_schedule,
                                preview_intensity, staircase_reflectivities)

reflectivity = st.floats(0.0, 1.0, allow_nan=False)
schedules = st.integers(1, 12).flatmap(
    lambda m: st.lists(reflectivity, min_size=m - 1, max_size=m - 1).map(lambda rs: (m, rs)))


def test_block_full_reflection():
    assert np.array_equal(beamsplitter_block(1.0), [[1, 0], [0, -1]])


def test_block_full_transmission():
    assert np.array_equal(beamsplitter_block(0.0), [[0, 1], [1, 0]])


def test_block_balanced():
    b = beamsplitter_block(0.5)
    assert np.allclose(np.abs(b), 1 / math.sqrt(2), atol=1e-15)
    assert np.max(np.abs(b.T @ b - np.eye(2))) <= 1e-15


@pytest.mark.parametrize("R", [-0.1, 1.0000001, float("nan")])
def test_block_domain(R):
    with pytest.raises(ValueError):
        beamsplitter_block(R)


def test_schedule_invariants():
    with pytest.raises(ValueError, match="reflectivities"):
        ReflectivitySchedule(3, [0.5])
    with pytest.raises(ValueError):
        ReflectivitySchedule(3, [0.5, 1.5])
    with pytest.raises(ValueError):
        ReflectivitySchedule(3, [0.5, 0.5], bin_period_ns=0)
    with pytest.raises(ValueError):
        ReflectivitySchedule(3, [0.5, 0.5], loop_transmission=0)


def test_two_modes_balanced_is_unitary_and_flat():
    M = compile_schedule(ReflectivitySchedule(2, [0.5])).entries
    assert np.allclose(np.abs(M) ** 2, 0.5)
    assert ModeMatrix(M).is_unitary()


def test_all_reflecting_passes_bins_straight_through():
    # R = 1 loads each fresh bin into the loop and releases the previous one,
    # so every bin leaves in its own slot.
    for m in (2, 3, 6):
        M = compile_schedule(ReflectivitySchedule(m, [1.0] * (m - 1))).entries
        assert np.array_equal(np.abs(M), np.eye(m))


def test_all_transmitting_is_cyclic_shift():
    # R = 0: fresh bin k+1 leaves straight away as output k, bin 1 circulates to the end.
    m = 5
    M = compile_schedule(ReflectivitySchedule(m, [0.0] * (m - 1))).entries
    expected = np.zeros((m, m))
    for k in range(m - 1):
        expected[k, k + 1] = 1
    expected[m - 1, 0] = 1
    assert np.array_equal(np.abs(M), expected)


def test_loss_factor_per_traversal():
    eta = 0.94
    lossless = compile_schedule(ReflectivitySchedule(3, [0.5, 0.5])).entries
    lossy = compile_schedule(ReflectivitySchedule(3, [0.5, 0.5], loop_transmission=eta)).entries
    for j in range(3):
        for i in range(3):
            if j >= i - 1:
                assert lossy[j, i] == pytest.approx(lossless[j, i] * eta ** ((j - i + 1) / 2), abs=1e-15)
    assert np.all(np.linalg.norm(lossy, axis=0) <= 1 + 1e-12)
    assert np.allclose(lossy, staircase_product([0.5, 0.5], eta), atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(schedules, st.floats(0.05, 1.0))
def test_matches_staircase_product(sched, eta):
    m, rs = sched
    M = compile_schedule(ReflectivitySchedule(m, rs, loop_transmission=eta)).entries
    assert np.allclose(M, staircase_product(rs, eta), atol=1e-13)


@settings(max_examples=200, deadline=None)
@given(schedules)
def test_unitary_and_banded(sched):
    m, rs = sched
    M = compile_schedule(ReflectivitySchedule(m, rs)).entries
    assert np.max(np.abs(M.conj().T @ M - np.eye(m))) <= 1e-12
    for j in range(m):
        for i in range(j + 2, m):
            assert M[j, i] == 0


@settings(max_examples=100, deadline=None)
@given(schedules, st.floats(0.05, 0.999))
def test_loss_is_subunitary_and_monotone(sched, eta):
    m, rs = sched
    lossless = compile_schedule(ReflectivitySchedule(m, rs)).entries
    lossy = compile_schedule(ReflectivitySchedule(m, rs, loop_transmission=eta)).entries
    assert np.linalg.svd(lossy, compute_uv=False).max() <= 1 + 1e-12
    assert np.all(np.abs(lossy) <= np.abs(lossless) + 1e-15)


@given(reflectivity, st.floats(0.05, 1.0))
def test_two_modes_reproduce_block(R, eta):
    M = compile_schedule(ReflectivitySchedule(2, [R], loop_transmission=eta)).entries
    b = beamsplitter_block(R)
    att = np.array([[math.sqrt(eta), 1.0], [eta, math.sqrt(eta)]])
    assert np.allclose(M, b * att, atol=1e-15)


def test_preview_staircase():
    s = ReflectivitySchedule(16, staircase_reflectivities(16))
    t = preview_intensity(s)
    assert len(t) == 15
    assert t == pytest.approx([1 / (k + 1) for k in range(1, 16)], abs=1e-15)
    assert all(a > b for a, b in zip(t, t[1:]))


def test_preview_extremes():
    assert preview_intensity(ReflectivitySchedule(4, [1, 1, 1])) == [0, 0, 0]
    assert preview_intensity(ReflectivitySchedule(4, [0, 0, 0])) == [1, 1, 1]


def test_json_roundtrip(tmp_path):
    s = ReflectivitySchedule(3, [0.25, 0.75], 100.0, 0.94)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(s.to_dict()))
    assert ReflectivitySchedule.load(path) == s
    M = compile_schedule(s)
    back = ModeMatrix.from_json(json.loads(json.dumps(M.to_json())))
    assert np.array_equal(back.entries, M.entries)
