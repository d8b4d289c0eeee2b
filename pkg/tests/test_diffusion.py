import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from episcale.analytics import EmpiricalDistribution, ks_distance, ou_moments, ou_survival_curve
from episcale.diffusion import (
    DiffusionPath,
    DiffusionSpec,
    first_passage,
    integrate,
    sample_batch,
    size_of,
    time_change,
)
from episcale.errors import ParameterError


def test_zero_start_is_absorbed():
    path = integrate(DiffusionSpec("feller", y0=0.0, time_cap=1.0), 3)
    assert path.absorbed_at == 0.0
    assert np.all(path.values == 0.0)
    assert path.size_integral == 0.0


def test_noise_defaults():
    assert DiffusionSpec("ou").noise_coefficient == 1.0
    assert DiffusionSpec("feller").noise_coefficient == 2.0
    assert DiffusionSpec("sir_limit", y0=(1.0, 0.0)).noise_coefficient == 2.0
    assert DiffusionSpec("feller", noise=1.0).noise_coefficient == 1.0


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        (dict(kind="brownian"), "kind must be one of"),
        (dict(kind="feller", y0=-1.0), "nonnegative"),
        (dict(kind="feller", step=0.1), "step must be ≤ 1e-2"),
        (dict(kind="feller", step=0.0), "step must be positive"),
        (dict(kind="feller", time_cap=0.0), "time_cap must be positive"),
        (dict(kind="feller", noise=0.0), "noise must be positive"),
        (dict(kind="sir_limit", y0=(1.0, -1.0)), "nonnegative pair"),
    ],
)
def test_spec_errors(kwargs, msg):
    with pytest.raises(ParameterError, match=msg):
        DiffusionSpec(**kwargs)


def test_ou_may_start_negative():
    assert DiffusionSpec("ou", y0=-1.0).initial == (-1.0, 0.0)


def test_integrate_grid_and_determinism():
    spec = DiffusionSpec("attenuated_feller", lam=1.0, y0=1.0, time_cap=2.0)
    a, b = integrate(spec, 9), integrate(spec, 9)
    assert len(a.grid) == 2001 and a.grid[-1] == pytest.approx(2.0)
    assert np.array_equal(a.values, b.values)
    assert np.all(a.values >= 0)
    if a.absorbed_at is not None:
        k = int(round(a.absorbed_at / spec.step))
        assert np.all(a.values[k:] == 0.0) and a.values[k - 1] > 0
    assert size_of(a) == pytest.approx(a.size_integral, rel=1e-12, abs=1e-15)


def test_sir_removed_is_integral_of_infected():
    path = integrate(DiffusionSpec("sir_limit", lam=0.5, y0=(1.0, 0.2), time_cap=3.0), 4)
    i, r = path.values[:, 0], path.values[:, 1]
    trap = 0.2 + np.concatenate([[0.0], np.cumsum(0.5 * (i[1:] + i[:-1]) * path.step)])
    assert np.allclose(r, trap, atol=1e-12)
    assert np.all(np.diff(r) >= 0)


def test_ml_wiener_follows_parabola_with_tiny_noise():
    # J(1) = b + lam - 1/2 when the noise is negligible
    spec = DiffusionSpec("ml_wiener", lam=0.0, y0=5.0, time_cap=1.0, noise=1e-8)
    path = integrate(spec, 1)
    assert path.values[-1] == pytest.approx(4.5, abs=1e-3)


def test_first_passage_examples():
    grid = np.array([0.0, 1.0, 2.0, 3.0])
    path = DiffusionPath(grid, np.array([2.0, 1.5, 0.5, 1.0]), None, 0.0)
    assert first_passage(path, 1.0) == pytest.approx(1.5)
    assert first_passage(path, 2.5) == 0.0
    assert first_passage(path, 0.0) is None
    assert first_passage(path, 1.75, from_above=False) == 0.0
    up = DiffusionPath(grid, np.array([0.0, 1.0, 2.0, 3.0]), None, 0.0)
    assert first_passage(up, 2.5, from_above=False) == pytest.approx(2.5)


def test_size_of_trapezoid():
    grid = np.linspace(0.0, 1.0, 11)
    path = DiffusionPath(grid, grid.copy(), None, 0.0)
    assert size_of(path) == pytest.approx(0.5, abs=1e-15)
    assert size_of(DiffusionPath(np.zeros(1), np.ones(1), None, 0.0)) == 0.0


def test_time_change_examples():
    grid = np.linspace(0.0, 2.0, 2001)
    const = DiffusionPath(grid, np.full(grid.size, 2.0), None, 4.0)
    tc = time_change(const)
    assert tc.grid[-1] == pytest.approx(4.0)
    assert np.allclose(tc.values, 2.0)
    assert tc.absorbed_at is None
    empty = time_change(DiffusionPath(grid, np.zeros(grid.size), 0.0, 0.0))
    assert empty.absorbed_at == 0.0 and len(empty.grid) == 1
    # linear decay y = 1 - t: clock s = t - t^2/2, so V(s) = sqrt(1 - 2 s)
    lin = np.clip(1.0 - grid, 0.0, None)
    tc = time_change(DiffusionPath(grid, lin, 1.0, 0.5))
    assert tc.absorbed_at == pytest.approx(0.5, abs=1e-6)
    inner = tc.grid < 0.45
    assert np.allclose(tc.values[inner], np.sqrt(1 - 2 * tc.grid[inner]), atol=1e-4)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), lam=st.floats(-1.0, 2.0), y0=st.floats(0.1, 3.0))
def test_time_change_preserves_area_property(seed, lam, y0):
    path = integrate(DiffusionSpec("attenuated_feller", lam=lam, y0=y0, time_cap=2.0), seed)
    tc = time_change(path)
    assert tc.grid[-1] == pytest.approx(path.size_integral, rel=1e-12, abs=1e-15)
    assert np.all(tc.values >= 0)
    assert np.all(np.diff(tc.grid) > 0)


@pytest.mark.slow
def test_ou_moments_at_large_sample():
    n = 100_000
    spec = DiffusionSpec("ou", y0=1.0, time_cap=1.0)
    u = sample_batch(spec, n, 5, checkpoints=[1.0])["checkpoint_y"][:, 0]
    m, v = ou_moments(1.0, 1.0)
    assert abs(u.mean() - m) < 4 * math.sqrt(v / n)
    assert abs(u.var() - v) < 4 * v * math.sqrt(2 / n) + 1e-3


@pytest.mark.slow
def test_feller_martingale_mean():
    # lam = 0: E Y(t) = y0 (absorption at 0 keeps the martingale)
    n = 50_000
    out = sample_batch(DiffusionSpec("feller", y0=1.0, time_cap=1.0), n, 6, checkpoints=[0.5, 1.0])
    y = out["checkpoint_y"]
    se = y.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(y.mean(axis=0) - 1.0) < 4 * se)
    # extinction by t is exp(-y0 / t) for dY = sqrt(2Y) dW
    assert np.mean(y[:, 1] == 0) == pytest.approx(math.exp(-1.0), abs=0.01)


@pytest.mark.slow
def test_time_changed_feller_passage_matches_ou():
    # area under the attenuated Feller path is the passage time of the time-changed OU
    n = 100_000
    spec = DiffusionSpec("attenuated_feller", y0=1.0, time_cap=50.0)
    area = sample_batch(spec, n, 7)["size_integral"]
    assert ks_distance(EmpiricalDistribution(area), ou_survival_curve(1.0, 2.0)) < 0.02


@pytest.mark.slow
def test_step_halving_weak_error_small():
    n = 40_000
    coarse = DiffusionSpec("attenuated_feller", lam=1.0, y0=1.0, time_cap=1.0, step=2e-3)
    fine = DiffusionSpec("attenuated_feller", lam=1.0, y0=1.0, time_cap=1.0, step=1e-3)
    a = sample_batch(coarse, n, 8, checkpoints=[1.0])["checkpoint_y"][:, 0]
    b = sample_batch(fine, n, 9, checkpoints=[1.0])["checkpoint_y"][:, 0]
    assert abs(a.mean() - b.mean()) < 4 * math.sqrt(a.var() / n + b.var() / n)
    assert ks_distance(EmpiricalDistribution(a), EmpiricalDistribution(b)) < 1.95 * math.sqrt(2 / n)


def test_bridge_passage_never_later_than_grid_passage():
    out = sample_batch(DiffusionSpec("ou", y0=1.0, time_cap=5.0), 500, 10, level=0.0,
                       stop_at_passage=True, bridge=True)
    both = ~np.isnan(out["passage"])
    assert np.all(out["passage_bridge"][both] <= out["passage"][both])


def test_sample_batch_checkpoint_validation():
    spec = DiffusionSpec("feller", time_cap=1.0)
    with pytest.raises(ParameterError):
        sample_batch(spec, 3, 1, checkpoints=[0.5, 0.2])
    with pytest.raises(ParameterError):
        sample_batch(spec, 3, 1, checkpoints=[2.0])


def test_sample_batch_matches_integrate():
    from episcale.rng import replicate_generator

    spec = DiffusionSpec("attenuated_feller", lam=0.5, y0=1.0, time_cap=1.0)
    out = sample_batch(spec, 4, 21, checkpoints=[0.5, 1.0])
    for k in range(4):
        path = integrate(spec, replicate_generator(21, "diffusion", k))
        assert out["size_integral"][k] == path.size_integral
        assert out["checkpoint_y"][k, 1] == path.values[-1]
