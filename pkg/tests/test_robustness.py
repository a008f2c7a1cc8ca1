import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakqpt import robustness
from weakqpt.process import default_bases, standard_channel


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.floats(0.0, 0.5))
def test_tilt_keeps_norm_and_sets_angle(seed, d, delta):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    w = robustness.tilt(v, delta, rng)
    assert np.isclose(np.linalg.norm(w), 1)
    assert np.isclose(abs(np.vdot(v, w)), np.cos(delta))


def test_zero_tilt_leaves_quartet_unchanged():
    b = default_bases(3)
    got = robustness.perturb_quartet(b, 0.0, np.random.default_rng(1))
    for m, want in zip(got, (b.psi, b.alpha, b.beta, b.phi)):
        assert np.allclose(m, want)


def test_zero_misalignment_gives_zero_error():
    acc = robustness.error_accumulation(dims=(2, 3), delta=0.0, trials=2)
    for r in acc.per_dim.values():
        assert r.mean_max_over_delta <= 1e-10
    assert np.isnan(acc.slope)


def test_error_is_first_order_in_angle():
    acc = robustness.error_accumulation(dims=(2,), delta=1e-3, trials=4, seed=3)
    assert 0.9 <= acc.slope <= 1.1
    assert len(acc.slope_points) == 3


def test_summaries_are_deterministic():
    ch = lambda d: standard_channel("amplitude_damping", gamma=0.2) if d == 2 else standard_channel("identity", d=d)
    a = robustness.error_accumulation(ch, dims=(2, 3), delta=2e-3, trials=3, seed=5, slope_factors=())
    b = robustness.error_accumulation(ch, dims=(2, 3), delta=2e-3, trials=3, seed=5, slope_factors=())
    assert a.per_dim[3].trial_means == b.per_dim[3].trial_means
    assert a.ratio("mean_abs_over_delta") == b.ratio("mean_abs_over_delta") >= 1


@pytest.mark.parametrize("delta", [-1e-4, 0.02])
def test_invalid_delta_rejected(delta):
    with pytest.raises(ValueError):
        robustness.error_accumulation(delta=delta, trials=1)


def test_invalid_trials_rejected():
    with pytest.raises(ValueError):
        robustness.error_accumulation(trials=0)
