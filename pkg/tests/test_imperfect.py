import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from timebin.fockcore import output_distribution
from timebin.imperfect import SourceModel, estimate_rates, frame_duty, mix_distinguishability
from timebin.netcompile import compile_schedule
from timebin.protocol import hom_bin_state, standard_experiment


def _pair(n=3, eta=1.0):
    e = standard_experiment(n, "odd", loop_transmission=eta)
    M = compile_schedule(e.schedule)
    return (output_distribution(M, e.input), output_distribution(M, e.input, model="distinguishable"))


def test_source_defaults_and_validation():
    s = SourceModel()
    assert s.indistinguishability == 0.9421
    assert s.repetition_rate_hz == 80e6
    with pytest.raises(ValueError):
        SourceModel(indistinguishability=1.2)
    with pytest.raises(ValueError):
        SourceModel(end_to_end_efficiency=0)
    assert SourceModel.from_dict({**s.to_dict(), "unknown": 1}) == s


def test_mixture_endpoints():
    ind, dist = _pair()
    assert np.allclose(mix_distinguishability(ind, dist, 1.0).probabilities, ind.probabilities)
    assert np.allclose(mix_distinguishability(ind, dist, 0.0).probabilities, dist.probabilities)
    with pytest.raises(ValueError):
        mix_distinguishability(ind, dist, 1.5)


@given(st.floats(0.0, 1.0))
def test_mixture_is_normalised_and_linear(x):
    ind, dist = _pair(2)
    mix = mix_distinguishability(ind, dist, x)
    assert mix.probabilities.sum() == pytest.approx(1, abs=1e-12)
    w = x * ind.mass * ind.probabilities + (1 - x) * dist.mass * dist.probabilities
    assert np.allclose(mix.probabilities, w / w.sum(), atol=1e-12)
    assert mix.mass == pytest.approx(x * ind.mass + (1 - x) * dist.mass)


def test_mixture_equal_masses_is_plain_average():
    ind, dist = _pair(2)
    # with equal subspace masses the mixture reduces to the plain average
    ind.mass = dist.mass = 0.4
    mix = mix_distinguishability(ind, dist, 0.3)
    assert np.allclose(mix.probabilities, 0.3 * ind.probabilities + 0.7 * dist.probabilities, atol=1e-14)


def test_mixture_matches_output_distribution():
    ind, dist = _pair(3, eta=0.94)
    e = standard_experiment(3, "odd", loop_transmission=0.94)
    direct = output_distribution(compile_schedule(e.schedule), e.input, model="mixture", x=0.9421)
    assert np.allclose(direct.probabilities, mix_distinguishability(ind, dist, 0.9421).probabilities, atol=1e-14)


def test_mixture_needs_shared_support():
    ind, _ = _pair(2)
    other, _ = _pair(3)
    with pytest.raises(ValueError):
        mix_distinguishability(ind, other, 0.5)


def test_hom_coincidence_under_partial_distinguishability():
    # (1,1) carries only the distinguishable share: (1 - x) / 2
    p = hom_bin_state(0.5, "mixture", x=0.9421)
    assert p[(1, 1)] == pytest.approx(0.02895, abs=1e-12)
    assert sum(p.values()) == pytest.approx(1)


def test_rates_identities():
    model = SourceModel(end_to_end_efficiency=0.5)
    cf, total = estimate_rates(model, 3, 0.25)
    assert total == pytest.approx(80e6 * 0.125)
    assert cf == pytest.approx(total * 0.25)
    with pytest.raises(ValueError):
        estimate_rates(model, 0, 0.5)
    with pytest.raises(ValueError):
        estimate_rates(model, 2, 0.0)


@given(st.floats(0.01, 1.0), st.integers(1, 10))
def test_rates_power_law(eff, n):
    m = SourceModel(end_to_end_efficiency=eff)
    _, t1 = estimate_rates(m, n, 1.0)
    _, t2 = estimate_rates(m, n + 1, 1.0)
    assert t2 == pytest.approx(t1 * eff, rel=1e-12)


def test_frame_duty():
    assert frame_duty(1600.0, 80e6) == pytest.approx(1e9 / 1600 / 80e6)
    assert frame_duty(1.0, 80e6) == 1.0


def test_eight_photon_rate_is_millihertz_scale():
    e = standard_experiment(8, "odd")
    p_cf = output_distribution(compile_schedule(e.schedule), e.input).mass
    duty = frame_duty(1600.0, 80e6)
    for eff in (0.10, 0.15):
        cf, _ = estimate_rates(SourceModel(end_to_end_efficiency=eff), 8, p_cf, duty)
        assert 1e-3 <= cf <= 1e-1
