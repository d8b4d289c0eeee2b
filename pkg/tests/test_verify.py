import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from episcale import verify
from episcale.ctmc import EpidemicParams
from episcale.errors import DomainError, ParameterError, UsageError

# Bump derivatives by 30-digit numerical differentiation of exp(-1/(1-((y-1)/2)^2)).
FROZEN_BUMP = {
    0.5: (0.344153786865412390, 0.0978926327083839687, -0.220149654001965725),
    2.2: (0.209611387151097823, -0.307047930397115951, -0.381810903032872048),
}


@pytest.fixture(scope="module")
def bump():
    return verify.standard_bump()


@pytest.mark.parametrize("y", sorted(FROZEN_BUMP))
def test_bump_frozen_values(bump, y):
    f, d1, d2 = FROZEN_BUMP[y]
    assert bump.f(y) == pytest.approx(f, abs=1e-14)
    assert bump.df(y) == pytest.approx(d1, abs=1e-14)
    assert bump.d2f(y) == pytest.approx(d2, abs=1e-13)


def test_bump_support(bump):
    assert bump.support_bound == 3.0
    assert bump.vanishes_beyond_support()
    assert bump.f(-1.0) == 0.0 and bump.f(1.0) == pytest.approx(math.exp(-1))
    # third derivative is bounded by ~ the Lipschitz estimate
    assert 20.0 < bump.lipschitz_d2f < 30.0


def test_limit_generator_examples(bump):
    y = 0.5
    f, d1, d2 = FROZEN_BUMP[y]
    assert verify.limit_generator(0.5, 1.0, bump, y) == pytest.approx((y - y * y) * d1 + y * d2)
    assert verify.limit_generator(0.25, 1.0, bump, y) == pytest.approx(y * d1 + y * d2)
    assert verify.limit_generator("subcritical", 0.0, bump, y) == pytest.approx(y * d2)
    assert verify.limit_generator(0.5, 0.0, bump, 0.0) == 0.0


def test_discrete_generator_hand_computed(bump):
    p = EpidemicParams(100, 0.5, 1.0)
    y = 0.5  # x = 5, h = 0.1
    up = 10 * 5 * (1 - 5 / 100)
    down = 10 * 5
    expected = up * (bump.f(0.6) - bump.f(0.5)) + down * (bump.f(0.4) - bump.f(0.5))
    assert verify.discrete_generator(p, bump, y) == pytest.approx(expected, rel=1e-13)


def test_discrete_generator_off_lattice(bump):
    with pytest.raises(DomainError):
        verify.discrete_generator(EpidemicParams(100, 0.5, 1.0), bump, 0.55)


def test_generator_taylor_bound(bump):
    # |error| <= (y^2 |f''| / 2 + y L / 3) / N^alpha at a lattice point
    N, y = 10_000, 1.0
    p = EpidemicParams(N, 0.5, 1.0)
    gap = abs(verify.discrete_generator(p, bump, y) - verify.limit_generator(0.5, 0.0, bump, y))
    bound = (y * y * abs(bump.d2f(y)) / 2 + y * bump.lipschitz_d2f / 3) / math.sqrt(N)
    assert gap <= bound


@settings(max_examples=40, deadline=None)
@given(k=st.integers(0, 400), lam=st.floats(-3.0, 3.0))
def test_generator_gap_shrinks_with_n_property(k, lam):
    f = verify.standard_bump()
    small, large = EpidemicParams(10_000, 0.5, 1.0, lam), EpidemicParams(1_000_000, 0.5, 1.0, lam)
    y = k / 100.0
    e1 = abs(verify.discrete_generator(small, f, y) - verify.limit_generator(0.5, lam, f, y))
    e2 = abs(verify.discrete_generator(large, f, y) - verify.limit_generator(0.5, lam, f, y))
    bound = lambda n: (y * y * abs(f.d2f(y)) / 2 + y * f.lipschitz_d2f / 3 + abs(lam) * y * 2) / math.sqrt(n)
    assert e1 <= bound(10_000) + 1e-12
    assert e2 <= bound(1_000_000) + 1e-12


def test_zero_function_passes_trivially():
    r = verify.check_generator_convergence(0.5, 1.0, verify.zero_function(), [10**4, 10**6])
    assert r.passed and r.sup_errors == [0.0, 0.0]


@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_generator_convergence_rate(bump, lam):
    r = verify.check_generator_convergence(0.5, lam, bump, [10**4, 10**6, 10**8])
    assert r.passed
    assert -1.3 <= r.empirical_rate <= -0.7
    assert r.sup_errors[0] > r.sup_errors[1] > r.sup_errors[2]


def test_generator_negative_control(bump):
    # alpha = 1/4 chain against the critical limit: the y^2 drift mismatch does not vanish
    r = verify.check_generator_convergence(0.25, 1.0, bump, [10**4, 10**6, 10**8], regime="critical")
    assert not r.passed


def test_generator_convergence_usage(bump):
    with pytest.raises(ParameterError):
        verify.check_generator_convergence(0.5, 0.0, bump, [10**6, 10**4])
    with pytest.raises(ParameterError):
        verify.check_generator_convergence(0.5, 0.0, bump, [50, 10**4])
    wide = verify.TestFunction(bump.f, bump.df, bump.d2f, 20.0, bump.lipschitz_d2f)
    with pytest.raises(DomainError):
        verify.check_generator_convergence(0.5, 0.0, wide, [100, 200])


def test_report_serialization_excludes_samples():
    params = EpidemicParams(400, 0.5, 1.0)
    r = verify.check_coupling(params, 50, 3)
    d = r.to_dict()
    assert "samples" not in d and r.samples is not None
    json.dumps(d)
    assert r.violations == 0 and r.passed


def test_size_law_usage():
    with pytest.raises(UsageError):
        verify.check_size_law(EpidemicParams(10_000, 0.25, 1.0), 1000, 1)
    with pytest.raises(ParameterError):
        verify.check_size_law(EpidemicParams(10_000, 0.5, 1.0), 10, 1)


def test_size_law_zero_start_trivial():
    r = verify.check_size_law(EpidemicParams(10_000, 0.5, 0.0), 1000, 1)
    assert r.passed and r.ks == 0.0


def test_sir_usage():
    with pytest.raises(UsageError):
        verify.check_sir_scaling_and_ml(EpidemicParams(10_000, 0.5, 1.0), 100, 1)


def test_envelope_scaling_usage_and_zero_start():
    with pytest.raises(ParameterError):
        verify.check_envelope_scaling(0.0, 1.0, [100], 100, 1, method="tau-leap")
    r = verify.check_envelope_scaling(0.0, 0.0, [100], 100, 1)
    assert r.passed and r.atom_chain == [1.0]


def test_process_scaling_needs_enough_replicates():
    with pytest.raises(ParameterError):
        verify.check_process_scaling(EpidemicParams(400, 0.5, 1.0), [1.0], 10, 1)


@pytest.mark.slow
def test_process_scaling_small_n_report():
    r = verify.check_process_scaling(EpidemicParams(2500, 0.5, 1.0, 1.0), [0.5, 1.0], 2000, 4)
    assert len(r.ks) == 2 and len(r.ks_unit_noise) == 2
    assert all(k < 0.08 for k in r.ks)
    # the literal unit-noise limit is visibly further away
    assert min(r.ks_unit_noise) > max(r.ks)
    assert r.samples["checkpoints"].shape == (2000, 2)


@pytest.mark.slow
def test_ks_null_quantiles_are_small():
    q = verify.ks_null_quantiles(2000, 20, 1)
    assert q["quantiles"]["0.95"] < 2.0 * math.sqrt(2 / 2000)
    assert len(q["values"]) == 20
