import math

import numpy as np
import pytest

from ewlab import (
    EmpiricalCdf,
    InvalidInputError,
    build_sieve,
    convergence_sweep,
    kolmogorov_distance,
    levelset_consistency,
    levelset_sweep,
    make_spec,
    pi_k,
    verify_mean_value,
    verify_pik_asymptotic,
)
from ewlab.functionals import default_mean_value_params, predicted_mean_value
from ewlab.harness import brute_force_distance, step_law
from ewlab.primes import primes_up_to


class UniformLaw:
    def predict(self, y):
        return np.clip(np.asarray(y, dtype=float), 0.0, 1.0)


def test_distance_examples():
    a = step_law([0.0, 1.0, 2.0])
    emp = EmpiricalCdf().fit([0.0, 1.0, 2.0])
    assert kolmogorov_distance(emp, a) == 0.0
    assert kolmogorov_distance(EmpiricalCdf().fit([0.0]), step_law([1.0])) == 1.0
    emp10 = EmpiricalCdf().fit(np.arange(1, 11) / 10)
    assert kolmogorov_distance(emp10, UniformLaw()) == pytest.approx(0.1, abs=1e-15)
    assert kolmogorov_distance(emp10, UniformLaw(), guard=0.05) == pytest.approx(0.15)


def test_guard_refused():
    emp = EmpiricalCdf().fit([0.0])
    with pytest.raises(InvalidInputError):
        kolmogorov_distance(emp, step_law([0.0]), guard=0.2)


def test_distance_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 1000))
        sample = np.round(rng.normal(size=n), 2)
        emp = EmpiricalCdf().fit(sample)
        atoms = np.round(rng.normal(size=int(rng.integers(1, 50))), 2)
        law = step_law(atoms, rng.dirichlet(np.ones(atoms.size)))
        grid = np.union1d(np.arange(-600, 601) / 100, atoms)
        assert abs(kolmogorov_distance(emp, law) - brute_force_distance(emp, law, grid)) < 1e-12


def test_levelset_dft_small():
    t = build_sieve(make_spec("LOGPOW", 2), 6)
    res, direct, extracted = levelset_consistency(t, 1, 0.0, r=1.0)
    assert direct == 4
    assert abs(extracted - 4) < 1e-9


def test_levelset_dft_tau_zero_counts():
    t = build_sieve(make_spec("SIGMA_RATIO"), 20_000)
    for k in range(0, 5):
        res, direct, extracted = levelset_consistency(t, k, 0.0)
        assert direct == pi_k(t, k)
        assert abs(extracted - pi_k(t, k)) < 1e-9 * max(1, pi_k(t, k))


def test_levelset_dft_refuses_bad_points():
    t = build_sieve(make_spec("LOGPOW", 2), 100)
    with pytest.raises(InvalidInputError):
        levelset_consistency(t, 1, 0.0, theta_points=96)
    with pytest.raises(InvalidInputError):
        levelset_consistency(t, 1, 0.0, theta_points=32)


def test_pi_one_is_prime_power_count():
    x = 10**5
    t = build_sieve(make_spec("ZERO"), x)
    count = 0
    for p in primes_up_to(x).tolist():
        q = p
        while q <= x:
            count += 1
            q *= p
    assert pi_k(t, 1) == count


def test_pik_check_rejects_range():
    t = build_sieve(make_spec("ZERO"), 10**5)
    with pytest.raises(InvalidInputError):
        verify_pik_asymptotic(t, 40)


def test_zero_sweep():
    spec = make_spec("ZERO")
    rep = convergence_sweep(spec, [1000, 10_000, 100_000], "atomic")
    assert rep.distances == [0.0, 0.0, 0.0]
    t = build_sieve(spec, 10**5)
    ls = levelset_sweep(spec, t, [2, 3])
    assert [row["D"] for row in ls.rows] == [0.0, 0.0]


def test_sweep_csv_deterministic_and_sane():
    spec = make_spec("DYADIC_POW", 1)
    t = build_sieve(spec, 10**5)
    from ewlab.limit_law import AtomicLimitLaw

    law = AtomicLimitLaw(spec, 10**5, 10**5, tail="poisson").fit()
    a = convergence_sweep(spec, [10**3, 10**4, 10**5], "atomic", table=t, law=law)
    b = convergence_sweep(spec, [10**3, 10**4, 10**5], "atomic", table=t, law=law)
    assert a.to_csv() == b.to_csv()
    assert all(0 <= d <= 1 for d in a.distances)
    assert all(math.isfinite(v) and v > 0 for v in a.bounds)
    assert a.to_csv().splitlines()[0].startswith("x,D,bound,ratio,guard")


def test_sweep_rejects_bad_grid():
    with pytest.raises(InvalidInputError):
        convergence_sweep(make_spec("ZERO"), [100, 1000], "atomic")
    with pytest.raises(InvalidInputError):
        convergence_sweep(make_spec("ZERO"), [1000, 100, 10_000], "atomic")


def test_mean_value_tau_zero_is_mertens_control():
    spec = make_spec("LOGPOW", 2)
    x = 10**5
    c = verify_mean_value(spec, 0.0, 100.0, x)
    params = default_mean_value_params(x, complex_g=False)
    pred = predicted_mean_value(params, make_spec("ZERO"), 0.0, x)
    assert c.direct == x
    assert c.deviation == pytest.approx(abs(pred.value - x) / x, rel=1e-12)


def test_mean_value_strict_skips():
    c = verify_mean_value(make_spec("LOGPOW", 2), 1.0, 100.0, 10**5, strict=True)
    # at this size the oscillation condition fails for tau = 1
    assert not c.conditions_ok and c.failed_conditions == ("oscillation",)
    assert c.skipped and c.passed is None and math.isnan(c.deviation)
