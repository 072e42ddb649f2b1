"""Property tests for the invariants of every module."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from ewlab import (
    AtomicLimitLaw,
    CharacteristicFunction,
    EmpiricalCdf,
    B_f,
    build_sieve,
    classify,
    companions,
    concentration_integral,
    convergence_sweep,
    empirical_cdf,
    eta,
    h_factor,
    invert_cf,
    kolmogorov_distance,
    levelset_consistency,
    make_spec,
    pi_k,
    published_params,
    select_params_thm12,
    select_params_thm13,
)
from ewlab.functionals import b_f_direct_sum, mean_value_beta
from ewlab.harness import brute_force_distance, step_law
from ewlab.primes import primes_up_to
from ewlab.sieve import direct_mean_value

SPECS = [
    make_spec("LOGPOW", 2),
    make_spec("LOGPOW", 0.5),
    make_spec("PPOW", 1),
    make_spec("PPOW", 0.3, strongly_additive=True),
    make_spec("DYADIC_LOG", 2),
    make_spec("DYADIC_POW", 1),
    make_spec("EULER_RATIO"),
    make_spec("SIGMA_RATIO"),
    make_spec("ZERO"),
]
SMALL_PRIMES = primes_up_to(2000).tolist()

spec_st = st.sampled_from(SPECS)
prime_st = st.sampled_from(SMALL_PRIMES)
fast = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


# -- function model ---------------------------------------------------------

@fast
@given(spec_st, st.floats(3, 1e6), st.floats(1, 100), prime_st, st.integers(1, 12))
def test_truncation_idempotent(spec, R, factor, p, nu):
    once = spec.truncate(R)
    twice = once.truncate(R * factor)
    assert twice(p, nu) == once(p, nu)


@fast
@given(spec_st, st.floats(3, 1e6), prime_st, st.integers(1, 12))
def test_truncated_value_is_zero_or_original(spec, R, p, nu):
    v = spec.truncate(R)(p, nu)
    assert v == 0.0 or v == spec(p, nu)


@fast
@given(spec_st, prime_st, st.floats(1e-12, 1e-3))
def test_companions_tail_control(spec, p, tol):
    S1, _ = companions(spec, p, tail_tol=tol)
    S2, _ = companions(spec, p, tail_tol=tol / 100)
    assert abs(S1 - S2) <= tol


@pytest.mark.parametrize("spec", [make_spec("PPOW", 1), make_spec("SIGMA_RATIO"), make_spec("DYADIC_POW", 1),
                                  make_spec("PPOW", 1, overrides=[(3, 2, 1.0)])], ids=str)
def test_h_multiplicative_all_pairs(spec):
    h = {m: h_factor(spec, m) for m in range(1, 1001)}
    assert h[1] == 1.0
    for m in range(1, 1001):
        for n in range(1, 1000 // m + 1):
            if math.gcd(m, n) == 1:
                assert h[m * n] == pytest.approx(h[m] * h[n], rel=1e-13, abs=0)


@fast
@given(spec_st, st.integers(1, 1000), st.integers(1, 1000))
def test_h_multiplicative_sampled(spec, m, n):
    if math.gcd(m, n) == 1:
        assert h_factor(spec, m * n) == pytest.approx(h_factor(spec, m) * h_factor(spec, n), rel=1e-13)


def test_classify_zero_sums():
    c = classify(make_spec("ZERO"))
    assert c.sum_min_square == c.sum_linear == c.sum_support == 0.0


# -- sieve ------------------------------------------------------------------

@settings(max_examples=15, deadline=None)
@given(spec_st, st.integers(1, 30_000), st.integers(2, 5000), st.integers(2, 5000))
def test_segment_invariance(spec, x, s1, s2):
    a = build_sieve(spec, x, segment_size=s1)
    b = build_sieve(spec, x, segment_size=s2)
    assert a.f_values.tobytes() == b.f_values.tobytes()
    assert a.omega_values.tobytes() == b.omega_values.tobytes()


@settings(max_examples=20, deadline=None)
@given(spec_st, st.integers(1, 20_000))
def test_pik_sum_and_levelset_twist(spec, x):
    t = build_sieve(spec, x)
    assert sum(pi_k(t, k) for k in range(t.max_omega + 1)) == x
    assert direct_mean_value(t, "levelset_twist", z=1.0, tau=0.0)[0] == x


@settings(max_examples=20, deadline=None)
@given(spec_st, st.integers(1, 5000), st.lists(st.floats(-3, 8), min_size=2, max_size=50))
def test_empirical_cdf_monotone_right_continuous(spec, x, ys):
    t = build_sieve(spec, x)
    ys = np.sort(ys)
    F = empirical_cdf(t, ys)
    assert np.all(np.diff(F) >= 0)
    # values equal up to rounding (e.g. f(6) and f(28) for SIGMA_RATIO) form one cluster
    vals = np.unique(t.population)
    tops = vals[np.append(np.diff(vals) > 1e-12, True)]
    half_gap = np.min(np.diff(tops)) / 2 if tops.size > 1 else 1.0
    assert np.array_equal(empirical_cdf(t, tops), empirical_cdf(t, tops + half_gap))
    assert empirical_cdf(t, -np.inf) == 0.0 and empirical_cdf(t, np.inf) == 1.0


# -- limit laws -------------------------------------------------------------

@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_cf_hermitian(spec):
    cf = CharacteristicFunction(spec, 10**4)
    taus = np.linspace(0, 200, 1000)
    assert np.max(np.abs(cf(-taus) - np.conj(cf(taus)))) < 1e-12
    if spec.is_strongly_additive:
        cc = CharacteristicFunction(spec, 10**4, r=1.3)
        assert np.max(np.abs(cc(-taus) - np.conj(cc(taus)))) < 1e-12


def test_atomic_normalization_monotone():
    spec = make_spec("DYADIC_POW", 1)
    masses = []
    for c in (1000, 2000, 4000, 8000, 16000):
        law = AtomicLimitLaw(spec, c, c).fit()
        assert law.deficit_ <= law.deficit_bound_
        masses.append(law.enumerated_mass_)
    assert all(b > a for a, b in zip(masses, masses[1:])) and masses[-1] <= 1


def _mixture_cf(t):
    t = np.asarray(t, dtype=float)
    return 0.3 * np.exp(-0.5 * t * t) + 0.7 * np.exp(2j * t - 0.08 * t * t)


@pytest.mark.parametrize("cf,lo,hi,T,n", [
    (_mixture_cf, -3.0, 5.0, 60.0, 1000),
    (CharacteristicFunction(make_spec("LOGPOW", 1.5), 1000), 1.0, 6.0, 200.0, 100),
], ids=["mixture", "logpow"])
def test_invert_cf_monotone_on_grid(cf, lo, hi, T, n):
    ys = np.linspace(lo, hi, n)
    out = [invert_cf(cf, y, T) for y in ys]
    F = np.array([v for v, _ in out])
    err = np.array([e for _, e in out])
    assert np.all(np.diff(F) >= -2 * np.maximum(err[1:], err[:-1]))


def test_concentration_refinement():
    cf = CharacteristicFunction(make_spec("LOGPOW", 2), 10**4)
    for ell in (0.5, 0.1, 0.02):
        prev = concentration_integral(cf, ell, tol=1e-5)
        new = concentration_integral(cf, ell, tol=1e-5 / 2)
        assert abs(new - prev) < 1e-5


def test_refusals():
    from ewlab import InsufficientDecayError, InvalidInputError
    from ewlab.limit_law import DegenerateCF

    with pytest.raises(InvalidInputError):
        AtomicLimitLaw(make_spec("LOGPOW", 1), 100, 100).fit()
    with pytest.raises(InsufficientDecayError):
        invert_cf(DegenerateCF(1.0), 0.0, 50.0)


# -- error functionals ------------------------------------------------------

TAIL_SPECS = [s for s in SPECS if s.family.value != "ZERO"]


@pytest.mark.parametrize("spec", TAIL_SPECS, ids=str)
def test_eta_majorant(spec):
    ps = primes_up_to(3 * 10**6)
    for y in np.exp(np.linspace(math.log(3), math.log(1e6), 20)):
        p = ps[ps > y]
        f = spec.values(p, 1)
        small = np.abs(f) <= 1
        lin = abs(math.fsum(f[small] / p[small]))
        sq = math.fsum(np.minimum(1, f * f) / p)
        assert max(lin, sq) <= eta(spec, y, P_max=3000)


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_B_square_direct_sum(spec):
    for v in (10, 1000, 50_000):
        assert abs(B_f(spec, v) ** 2 - 2 - b_f_direct_sum(spec, v)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.floats(3, 30))
def test_search_params_feasible_post_hoc(e):
    p = select_params_thm12(make_spec("LOGPOW", 2), log_x=10.0**e)
    if p.feasible:
        assert p.lhs_first <= p.rhs_first and p.lhs_second <= p.rhs_second
        assert math.log(3) <= p.log_R <= p.eps * p.log_x
    else:
        assert p.choice == "degenerate"


def test_bounds_nonincreasing_in_x():
    spec = make_spec("LOGPOW", 2)
    grid = [10.0**e for e in (2, 3, 5, 8, 12, 20, 30)]
    for fn in (published_params, select_params_thm12):
        b = [fn(spec, log_x=lx).bound113 for lx in grid]
        assert all(v <= 1.2 * u for u, v in zip(b, b[1:]))
    fr = [select_params_thm13(spec, x, 3).frakR for x in (1e5, 1e6, 1e7, 1e8)]
    assert all(v <= 1.2 * u for u, v in zip(fr, fr[1:]))


def test_mean_value_beta_limits():
    assert mean_value_beta(0.2, 0.4) == 1.0
    assert mean_value_beta(0.2, 1e8) < 1e-12


# -- harness ----------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.integers(-50, 50), min_size=1, max_size=1000),
    st.lists(st.integers(-50, 50), min_size=1, max_size=30, unique=True),
)
def test_distance_oracle_agreement(sample, atoms):
    emp = EmpiricalCdf().fit(np.asarray(sample) / 10)
    law = step_law(np.asarray(atoms) / 10)
    grid = np.arange(-520, 521) / 10
    assert abs(kolmogorov_distance(emp, law) - brute_force_distance(emp, law, grid)) < 1e-12
    assert 0 <= kolmogorov_distance(emp, law) <= 1


@settings(max_examples=20, deadline=None, derandomize=True)
@given(st.integers(16, 10**5), st.integers(0, 8), st.floats(-10, 10), spec_st)
def test_dft_extraction_exact(x, k, tau, spec):
    t = build_sieve(spec, x)
    if pi_k(t, k) == 0 and k > t.max_omega:
        return
    res, direct, _ = levelset_consistency(t, k, tau, R=100.0, r=1.0)
    assert res <= 1e-9 * max(1, pi_k(t, k))


def test_sweep_deterministic():
    spec = make_spec("DYADIC_POW", 2)
    t = build_sieve(spec, 50_000)
    law = AtomicLimitLaw(spec, 10**4, 10**4).fit()
    a = convergence_sweep(spec, [500, 5000, 50_000], "atomic", table=t, law=law).to_csv()
    b = convergence_sweep(spec, [500, 5000, 50_000], "atomic", table=t, law=law).to_csv()
    assert a == b
