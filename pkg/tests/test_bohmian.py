import math

import numpy as np
import pytest

from qscatter.bohmian import (DECILES, EnsembleSpec, crossing_free, free_gaussian_velocity,
                              gaussian_trajectory, initial_velocity_nr, launch_positions,
                              quantile_drift, run_ensemble, trajectory_from, velocity)
from qscatter.errors import NodeProximity
from qscatter.model import DEFAULT_PARAMS
from qscatter.numerics import fd_derivative
from qscatter.observables import current_closed, rho_closed


@pytest.fixture(scope="module")
def nr_ensemble(fields):
    return run_ensemble(fields["i,nr"], EnsembleSpec(t_final=20.0))


def test_gaussian_trajectory_examples(params):
    assert gaussian_trajectory(-9.0, 0.0, params) == -9.0
    assert abs(gaussian_trajectory(-9.0, 4.0, params) - (-6 + math.sqrt(5))) < 1e-14
    t = np.linspace(0, 20, 11)
    assert np.allclose(gaussian_trajectory(params.xc_bar, t, params), params.xc_bar + t)


def test_free_gaussian_velocity(fields, params):
    x = np.linspace(-14, -6, 9)
    assert np.allclose(velocity(fields["f,G"], x, 0.0), params.u_bar, atol=1e-15)
    t = 3.0
    phase = lambda xx: np.unwrap(np.angle(fields["f,G"].psi(xx, t)))  # noqa: E731
    grid = np.linspace(-15, 5, 4001)
    d, _ = fd_derivative((grid, phase(grid)), x + t, 1, 1e-2)
    assert np.allclose(free_gaussian_velocity(x + t, t, params), d, atol=1e-8)


def test_free_gaussian_ensemble_matches_closed_form(fields, params):
    trajs = run_ensemble(fields["f,G"], EnsembleSpec(t_final=20.0))
    assert len(trajs) == 9
    for tr in trajs:
        assert abs(tr.x_final - gaussian_trajectory(tr.x0, 20.0, params)) < 1e-5
        assert np.allclose(tr.x, gaussian_trajectory(tr.x0, tr.t, params), atol=1e-5)


def test_launch_positions_are_quantiles(fields):
    from scipy.stats import norm
    x0 = launch_positions(fields["f,G"], DECILES)
    assert np.allclose(x0, -10 + norm.ppf(DECILES), atol=1e-9)


def test_initial_velocity(fields, params):
    assert abs(initial_velocity_nr(params.xc_bar, params) - 1.25) < 1e-6
    x = np.linspace(-13, -7, 61)
    v = initial_velocity_nr(x, params)
    assert v.min() > 1.0
    assert np.ptp(v) > 0.1
    assert np.allclose(velocity(fields["i,nr"], x, 0.0), v, rtol=1e-12)
    n2 = fields["i,nr"].norm_constant ** 2
    assert np.allclose(current_closed(x, 0.0, params, n2) / rho_closed(x, 0.0, params, n2), v,
                       rtol=1e-12)


def test_non_crossing_and_equivariance(fields, nr_ensemble):
    assert crossing_free(nr_ensemble)
    for tr in nr_ensemble:
        for t in (4.0, 8.0, 16.0):
            assert quantile_drift(fields["i,nr"], tr, t) < 5e-3


def test_median_trajectory(fields, nr_ensemble):
    med = [tr for tr in nr_ensemble if tr.quantile == 0.5][0]
    for t in (4.0, 8.0, 16.0):
        assert quantile_drift(fields["i,nr"], med, t) < 5e-3


def test_bohm_path_from_mean_overtakes_mean(fields):
    from qscatter.observables import moments
    f = fields["i,nr"]
    x0 = moments(f, 0.0).mean_x
    tr = trajectory_from(f, x0, 16.0)
    assert tr.x_final > moments(f, 16.0).mean_x


def test_samples_on_cadence(nr_ensemble):
    tr = nr_ensemble[0]
    assert tr.t[0] == 0.0 and tr.t[-1] == 20.0
    assert np.allclose(np.diff(tr.t), 0.05)
    assert tr.samples[0] == (0.0, tr.x0)


def test_node_proximity_guard(fields):
    with pytest.raises(NodeProximity):
        velocity(fields["i,nr"], np.array([60.0]), 0.0)


def test_ensemble_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(quantiles=(0.5,))
    with pytest.raises(ValueError):
        EnsembleSpec(quantiles=(0.2, 0.1))
    with pytest.raises(ValueError):
        EnsembleSpec(quantiles=(0.0, 0.5))
    with pytest.raises(ValueError):
        EnsembleSpec(t_final=0.0)


def test_threaded_ensemble_is_identical(fields):
    spec = EnsembleSpec(quantiles=(0.25, 0.5, 0.75), t_final=5.0)
    a = run_ensemble(fields["i,nr"], spec, workers=1)
    b = run_ensemble(fields["i,nr"], spec, workers=3)
    for x, y in zip(a, b):
        assert np.array_equal(x.x, y.x)
