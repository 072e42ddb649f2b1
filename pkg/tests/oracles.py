"""Independent reference implementations used by the tests.

Nothing here calls into ewlab: family values, factorizations and special
functions are recomputed from their definitions.
"""

from fractions import Fraction
import math

import mpmath


def factorize(n):
    """Trial division; returns [(p, nu), ...] in increasing p."""
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            nu = 0
            while n % d == 0:
                n //= d
                nu += 1
            out.append((d, nu))
        d += 1
    if n > 1:
        out.append((n, 1))
    return out


def _dyadic(p, kappa, log_form):
    n = p.bit_length() - 1
    if 2**n == p:
        n -= 1
    nmin = 3 if log_form else 1
    if n < nmin:
        return 0.0
    with mpmath.workdps(50):
        delta = 1 / mpmath.log(n) ** kappa if log_form else 1 / mpmath.mpf(n) ** kappa
        return 1.0 if p <= mpmath.mpf(2) ** n * (1 + delta) else 0.0


def family_value(family, param, p, nu):
    if family == "LOGPOW":
        return 1.0 / math.log(p) ** param
    if family == "PPOW":
        return p ** (-param) if nu == 1 else 0.0
    if family == "DYADIC_LOG":
        return _dyadic(p, param, True)
    if family == "DYADIC_POW":
        return _dyadic(p, param, False)
    if family == "EULER_RATIO":
        return math.log(p / (p - 1))
    if family == "SIGMA_RATIO":
        sigma = sum(Fraction(p) ** j for j in range(nu + 1))
        return math.log(sigma / Fraction(p) ** nu)
    if family == "ZERO":
        return 0.0
    raise ValueError(family)


def naive_table(family, param, x):
    """Lists f(n), omega(n) for n = 1..x."""
    fs, om = [], []
    for n in range(1, x + 1):
        fac = factorize(n)
        fs.append(math.fsum(family_value(family, param, p, nu) for p, nu in fac))
        om.append(len(fac))
    return fs, om


def normal_cdf(x, mu=0.0, sigma=1.0):
    """Taylor series of the error function, summed in 60-digit arithmetic."""
    with mpmath.workdps(60):
        z = (mpmath.mpf(x) - mu) / sigma / mpmath.sqrt(2)
        s = mpmath.mpf(0)
        term = z
        n = 0
        while True:
            add = term / (2 * n + 1)
            s += add
            if abs(add) < mpmath.mpf(10) ** -40:
                break
            n += 1
            term *= -z * z / n
        return float(mpmath.mpf(0.5) + s / mpmath.sqrt(mpmath.pi))


def gauss_integral(a):
    """int_{-a}^{a} exp(-t^2/2) dt by its power series."""
    with mpmath.workdps(50):
        a = mpmath.mpf(a)
        s, n, term = mpmath.mpf(0), 0, a
        while abs(term) > mpmath.mpf(10) ** -40:
            s += term / (2 * n + 1)
            n += 1
            term *= -a * a / (2 * n)
        return float(2 * s)
