import math

import numpy as np
import pytest

from ewlab import (
    AtomicLimitLaw,
    CharacteristicFunction,
    InsufficientDecayError,
    InvalidInputError,
    InvertedLimitLaw,
    cf_conditional,
    cf_limit,
    concentration_integral,
    concentration_kr,
    invert_cf,
    make_spec,
)
from ewlab.limit_law import DegenerateCF, GaussianCF, concentration_min, default_window
from ewlab.primes import primes_up_to

from oracles import gauss_integral, normal_cdf

FAMILIES = [
    make_spec("LOGPOW", 2),
    make_spec("PPOW", 1),
    make_spec("DYADIC_LOG", 2),
    make_spec("DYADIC_POW", 1),
    make_spec("EULER_RATIO"),
    make_spec("SIGMA_RATIO"),
    make_spec("ZERO"),
]


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.text())
def test_cf_at_zero_is_one(spec):
    assert cf_limit(spec, 0.0, 10**4) == 1 + 0j
    if spec.is_strongly_additive:
        assert cf_conditional(spec, 0.0, 0.7, 10**4) == 1 + 0j


def test_zero_spec_cf():
    taus = np.linspace(-50, 50, 11)
    assert np.all(CharacteristicFunction(make_spec("ZERO"), 1000)(taus) == 1)
    assert np.all(CharacteristicFunction(make_spec("ZERO"), 1000, r=2.0)(taus) == 1)


def test_cf_two_cutoffs_ppow():
    spec = make_spec("PPOW", 1)
    assert abs(cf_limit(spec, 1.0, 10**5) - cf_limit(spec, 1.0, 10**6)) < 1e-6


def test_conditional_rejects_bad_r():
    with pytest.raises(InvalidInputError):
        cf_conditional(make_spec("LOGPOW", 2), 1.0, 0.0)
    with pytest.raises(InvalidInputError):
        CharacteristicFunction(make_spec("LOGPOW", 2), 1000, r=-1.0)


def test_conditional_against_direct_product():
    spec = make_spec("LOGPOW", 2)
    cf = CharacteristicFunction(spec, 10**4, r=1.0, tail_model=False)
    for tau in (0.3, 1.0, 4.0):
        direct = 1 + 0j
        for p in primes_up_to(10**4).tolist():
            f = 1 / math.log(p) ** 2
            direct *= (1 + complex(math.cos(tau * f), math.sin(tau * f)) / (p - 1)) / (1 + 1 / (p - 1))
        assert abs(cf(tau) - direct) < 1e-12


def test_limit_cf_against_direct_product_sigma():
    spec = make_spec("SIGMA_RATIO")
    cf = CharacteristicFunction(spec, 2000, tail_model=False)
    tau = 1.7
    direct = 1 + 0j
    for p in primes_up_to(2000).tolist():
        s, nu = 0j, 0
        while p ** (-nu) > 1e-18:
            v = spec(p, nu) if nu else 0.0
            s += complex(math.cos(tau * v), math.sin(tau * v)) / p**nu
            nu += 1
        direct *= (1 - 1 / p) * s
    assert abs(cf(tau) - direct) < 1e-12


def test_cf_bounded_by_one_plus_tail_error():
    cf = CharacteristicFunction(make_spec("LOGPOW", 2), 10**4)
    taus = np.linspace(-100, 100, 401)
    assert np.all(np.abs(cf(taus)) <= 1 + cf.tail_error(taus) + 1e-15)


# -- atomic laws ------------------------------------------------------------

def test_atomic_law_zero_spec():
    law = AtomicLimitLaw(make_spec("ZERO"), 1000, 1000).fit()
    assert law.n_atoms_ == 1
    assert law.positions_.tolist() == [0.0] and law.masses_.tolist() == [1.0]
    assert law.predict(0.0) == 1.0 and law.predict(-1e-12) == 0.0


def test_atomic_law_refuses_continuous():
    with pytest.raises(InvalidInputError):
        AtomicLimitLaw(make_spec("LOGPOW", 2), 1000, 1000).fit()


def test_atomic_law_nonnegative_family():
    law = AtomicLimitLaw(make_spec("DYADIC_LOG", 2), 10**4, 10**4).fit()
    assert law.predict(-1e-9) == 0.0
    assert law.predict(0.0) == pytest.approx(math.exp(law.log_prime_product_), rel=1e-14)


def test_atomic_mass_monotone_and_bounded():
    spec = make_spec("DYADIC_LOG", 2)
    prev = 0.0
    for c in (2500, 5000, 10**4, 2 * 10**4):
        law = AtomicLimitLaw(spec, c, c).fit()
        assert prev < law.enumerated_mass_ <= 1.0
        assert law.deficit_ <= law.deficit_bound_
        prev = law.enumerated_mass_


def test_atomic_zero_atom_two_cutoffs():
    spec = make_spec("DYADIC_LOG", 2)
    a = AtomicLimitLaw(spec, 10**5, 10**4).fit()
    b = AtomicLimitLaw(spec, 10**6, 10**4).fit()
    assert abs(a.predict(0.0) - b.predict(0.0)) <= a.tail_bound_


def test_atoms_csv():
    law = AtomicLimitLaw(make_spec("DYADIC_POW", 1), 200, 200).fit()
    lines = law.atoms_csv().splitlines()
    assert lines[0] == "fm,weight"
    # atoms sharing a value f(m) are merged
    assert len(lines) == law.positions_.size + 1 <= law.n_atoms_ + 1
    assert math.fsum(float(l.split(",")[1]) for l in lines[1:]) == pytest.approx(law.enumerated_mass_, rel=1e-14)


# -- inversion --------------------------------------------------------------

def test_invert_refuses_degenerate():
    with pytest.raises(InsufficientDecayError):
        invert_cf(DegenerateCF(0.3), 0.0, 100.0)
    with pytest.raises(InsufficientDecayError):
        InvertedLimitLaw(DegenerateCF(0.0), t_int=100).fit()


@pytest.mark.parametrize("y", [0.0, 0.5, 1.0, 2.0, -1.3])
def test_invert_gaussian(y):
    val, err = invert_cf(GaussianCF(), y, 40.0)
    assert abs(val - normal_cdf(y)) < 1e-6
    assert err < 1e-6


def test_even_cf_median():
    val, _ = invert_cf(lambda t: np.exp(-np.abs(np.asarray(t))), 0.0, 2000.0)
    assert val == pytest.approx(0.5, abs=1e-9)


def test_grid_inversion_gaussian():
    law = InvertedLimitLaw(GaussianCF(0.7, 1.3), t_int=40, center=0.7, half_width=12, oversample=64).fit()
    ys = np.linspace(-2, 3, 11)
    ref = np.array([normal_cdf(y, 0.7, 1.3) for y in ys])
    assert np.max(np.abs(law.predict(ys) - ref)) < 1e-6
    assert law.mean_ == pytest.approx(0.7, abs=1e-6)


def test_inverted_law_monotone_within_error():
    spec = make_spec("LOGPOW", 2)
    cf = CharacteristicFunction(spec, 10**4)
    c, hw = default_window(spec, p_max=10**4)
    law = InvertedLimitLaw(cf, t_int=2000, center=c, half_width=hw).fit()
    ys = np.linspace(c - hw, c + hw, 1000)
    F = law.predict(ys)
    assert np.all(np.diff(F) >= -2 * law.pointwise_error(ys[1:]))
    assert law.predict(c - 2 * hw) == 0.0 and law.predict(c + 2 * hw) == 1.0
    # the pointwise half-line formula agrees with the grid inversion
    for y in (c - 0.5, c, c + 0.5):
        v, e = invert_cf(cf, y, 500.0)
        assert abs(v - law.predict(y)) <= e + law.error_ + 1e-6


def test_bad_taper():
    with pytest.raises(InvalidInputError):
        InvertedLimitLaw(GaussianCF(), taper="hann").fit()


# -- concentration ----------------------------------------------------------

def test_concentration_examples():
    assert concentration_integral(lambda t: 1.0, 0.25) == pytest.approx(2.0, abs=1e-12)
    assert concentration_integral(GaussianCF(), 1.0) == pytest.approx(gauss_integral(1.0), abs=1e-8)
    assert concentration_kr(make_spec("ZERO"), 0.1) == 1.0
    assert concentration_kr(make_spec("LOGPOW", 2), 3.0, c_kr=3.0) == 3.0
    with pytest.raises(InvalidInputError):
        concentration_integral(GaussianCF(), 1.5)


def test_concentration_kr_mertens_shape():
    xi = 2.0
    ell = 0.08
    bound = concentration_kr(make_spec("LOGPOW", xi), ell, P_max=10**6)
    ps = primes_up_to(10**6)
    direct = 1 / math.sqrt(1 + math.fsum(1.0 / ps[np.log(ps) < ell ** (-1 / xi)]))
    assert bound == pytest.approx(direct, rel=1e-12)
    # Mertens: the sum is log log of the cutoff plus a constant
    mertens = 1 / math.sqrt(1 + math.log(ell ** (-1 / xi)) + 0.2615)
    assert bound == pytest.approx(mertens, rel=0.1)


def test_concentration_integral_refinement():
    cf = CharacteristicFunction(make_spec("LOGPOW", 2), 10**4)
    a = concentration_integral(cf, 0.05, tol=1e-6)
    b = concentration_integral(cf, 0.05, tol=1e-8)
    assert abs(a - b) < 1e-6


def test_concentration_min_records_winner():
    spec = make_spec("LOGPOW", 2)
    cb = concentration_min(spec, 0.5, GaussianCF(), P_max=10**4)
    assert cb.value == min(cb.kr, cb.integral)
    assert cb.winner in ("kr", "integral")
