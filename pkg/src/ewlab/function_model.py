"""Real additive functions given by their values on prime powers.

An :class:`AdditiveFunctionSpec` combines a closed-form family, a finite
table of explicit overrides and an optional truncation level ``R``; the
truncated function keeps ``f(p**nu)`` when ``p**nu <= R`` or
``|f(p**nu)| <= 1`` and is zero otherwise.

Text format (one spec, whitespace separated ``key=value`` tokens)::

    family=LOGPOW xi=2 truncation=1000 override=2,1,0.5

Keys: ``family`` (required), the family parameter (``xi`` or ``kappa``),
``truncation``, repeated ``override=p,nu,value`` and ``strong=0|1`` (only
printed when it differs from the family default).  Lines starting with
``#`` are comments.  Floats are printed with ``repr`` so that
``parse_spec(format_spec(s)) == s``.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
import hashlib
import math

import mpmath
import numpy as np
from scipy import special
from sympy import factorint

from ._validation import InvalidInputError, check_positive_int, check_prime, check_real
from .primes import primes_up_to

EULER_GAMMA = 0.57721566490153286061
DEFAULT_TAIL_TOL = 1e-15


class Family(str, Enum):
    LOGPOW = "LOGPOW"
    PPOW = "PPOW"
    DYADIC_LOG = "DYADIC_LOG"
    DYADIC_POW = "DYADIC_POW"
    EULER_RATIO = "EULER_RATIO"
    SIGMA_RATIO = "SIGMA_RATIO"
    ZERO = "ZERO"


_FAMILY_PARAM = {
    Family.LOGPOW: "xi",
    Family.PPOW: "xi",
    Family.DYADIC_LOG: "kappa",
    Family.DYADIC_POW: "kappa",
}
_STRONG_DEFAULT = {
    Family.LOGPOW: True,
    Family.PPOW: False,
    Family.DYADIC_LOG: True,
    Family.DYADIC_POW: True,
    Family.EULER_RATIO: True,
    Family.SIGMA_RATIO: False,
    Family.ZERO: True,
}
# smallest dyadic block index n allowed by each dyadic family
_DYADIC_NMIN = {Family.DYADIC_LOG: 3, Family.DYADIC_POW: 1}


@dataclass(frozen=True)
class AdditiveFunctionSpec:
    """Rule for ``f(p**nu)``.

    Parameters
    ----------
    family : Family or str
    param : float, optional
        ``xi`` for LOGPOW/PPOW, ``kappa`` for the dyadic families.
    overrides : mapping or iterable of ``(p, nu, value)``
        Explicit values, taking priority over the family rule.
    strongly_additive : bool, optional
        Defaults to the family's own property.
    truncation : float, optional
        Truncation level ``R >= 3``.
    """

    family: Family = Family.ZERO
    param: float | None = None
    overrides: tuple = ()
    strongly_additive: bool | None = None
    truncation: float | None = None
    _override_map: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        try:
            fam = Family(str(getattr(self.family, "value", self.family)).upper())
        except ValueError:
            raise InvalidInputError(f"unknown family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        if fam in _FAMILY_PARAM:
            if self.param is None:
                raise InvalidInputError(f"{fam.value} needs {_FAMILY_PARAM[fam]}")
            object.__setattr__(self, "param", check_real(self.param, _FAMILY_PARAM[fam], low=0.0, low_open=True))
        elif self.param is not None:
            raise InvalidInputError(f"{fam.value} takes no parameter")
        if self.strongly_additive is None:
            object.__setattr__(self, "strongly_additive", _STRONG_DEFAULT[fam])
        else:
            object.__setattr__(self, "strongly_additive", bool(self.strongly_additive))
        items = self.overrides.items() if isinstance(self.overrides, dict) else self.overrides
        norm = {}
        for item in items:
            if len(item) == 2:
                (p, nu), v = item
            else:
                p, nu, v = item
            p = check_prime(p)
            nu = check_positive_int(nu, "nu")
            if self.strongly_additive and nu != 1:
                raise InvalidInputError("strongly additive specs only take nu=1 overrides")
            norm[(p, nu)] = check_real(v, "override value")
        object.__setattr__(self, "overrides", tuple((p, nu, v) for (p, nu), v in sorted(norm.items())))
        object.__setattr__(self, "_override_map", norm)
        if self.truncation is not None:
            object.__setattr__(self, "truncation", check_real(self.truncation, "truncation", low=3.0))

    # -- convenience -------------------------------------------------
    @property
    def xi(self):
        return self.param if self.family in (Family.LOGPOW, Family.PPOW) else None

    @property
    def kappa(self):
        return self.param if self.family in _DYADIC_NMIN else None

    @property
    def is_strongly_additive(self):
        """True when ``f(p**nu) = f(p)`` holds for the evaluated (possibly
        truncated) function."""
        return self.strongly_additive and self.truncation is None

    def truncate(self, R):
        R = check_real(R, "R", low=3.0)
        if self.truncation is not None:
            R = min(R, self.truncation)
        return replace(self, truncation=R)

    def untruncated(self):
        return replace(self, truncation=None)

    def text(self):
        return format_spec(self)

    def digest(self):
        return hashlib.sha256(self.text().encode()).digest()

    # -- evaluation --------------------------------------------------
    def values(self, p, nu=1):
        """Vectorized ``f(p**nu)``; ``p`` must hold primes (not checked)."""
        p = np.asarray(p, dtype=np.int64)
        nu = np.broadcast_to(np.asarray(nu, dtype=np.int64), p.shape)
        if self.strongly_additive:
            eff_nu = np.ones_like(nu)
        else:
            eff_nu = nu
        out = _family_values(self, p, eff_nu)
        for (q, k), v in self._override_map.items():
            hit = p == q
            if self.strongly_additive:
                out = np.where(hit, v, out)
            else:
                out = np.where(hit & (nu == k), v, out)
        if self.truncation is not None:
            with np.errstate(over="ignore"):
                logq = nu * np.log(p.astype(float))
            big = logq > math.log(self.truncation) + 1e-12
            # exact check near the boundary
            near = np.abs(logq - math.log(self.truncation)) <= 1e-9
            if near.any():
                for i in np.flatnonzero(near):
                    big.flat[i] = int(p.flat[i]) ** int(nu.flat[i]) > self.truncation
            out = np.where(big & (np.abs(out) > 1.0), 0.0, out)
        return out

    def __call__(self, p, nu=1):
        return eval_prime_power(self, p, nu)


def _family_values(spec, p, nu):
    fam = spec.family
    pf = p.astype(float)
    if fam is Family.LOGPOW:
        return np.log(pf) ** (-spec.param)
    if fam is Family.PPOW:
        return np.where(nu == 1, pf ** (-spec.param), 0.0)
    if fam in _DYADIC_NMIN:
        return dyadic_indicator(fam, spec.param, p).astype(float)
    if fam is Family.EULER_RATIO:
        return -np.log1p(-1.0 / pf)
    if fam is Family.SIGMA_RATIO:
        # log(sigma(p^nu)/p^nu) = log(1 + 1/p + ... + 1/p^nu)
        return np.log1p(-np.expm1(-nu * np.log(pf)) / (pf - 1.0))
    return np.zeros(p.shape)


@lru_cache(maxsize=32)
def _dyadic_upper(family, kappa, nmax=64):
    """floor(2^n (1 + delta_n)) for n = 0..nmax, computed with 60 digits."""
    nmin = _DYADIC_NMIN[family]
    out = np.full(nmax + 1, -1, dtype=np.int64)
    with mpmath.workdps(60):
        k = mpmath.mpf(kappa)
        for n in range(nmin, nmax + 1):
            delta = 1 / mpmath.log(n) ** k if family is Family.DYADIC_LOG else 1 / mpmath.mpf(n) ** k
            ub = int(mpmath.floor(mpmath.mpf(2) ** n * (1 + delta)))
            out[n] = min(ub, np.iinfo(np.int64).max)
    return out


def dyadic_indicator(family, kappa, p):
    """Boolean array: p lies in some block ``2^n < p <= 2^n (1 + delta_n)``.

    Only the block with ``2^n < p <= 2^(n+1)`` can contain ``p`` because
    ``delta_n <= 1``; membership is an exact integer comparison.
    """
    family = Family(family)
    p = np.asarray(p, dtype=np.int64)
    _, e = np.frexp((p - 1).astype(float))
    n = e.astype(np.int64) - 1
    ub = _dyadic_upper(family, float(kappa))
    ok = (n >= _DYADIC_NMIN[family]) & (n < len(ub))
    res = np.zeros(p.shape, dtype=bool)
    res[ok] = p[ok] <= ub[n[ok]]
    return res


def eval_prime_power(spec, p, nu=1):
    """``f(p**nu)`` with overrides, strong additivity and truncation."""
    p = check_prime(p)
    nu = check_positive_int(nu, "nu")
    return float(spec.values(np.array([p]), np.array([nu]))[0])


def prime_power_terms(spec, primes, tol=DEFAULT_TAIL_TOL, nu_start=1):
    """Yield ``(index, nu, values, inverse_powers)`` over the local series.

    For each exponent ``nu`` the subset of ``primes`` with
    ``p**-nu >= tol * (1 - 1/p)`` is returned, so that the remaining
    geometric tail of every local series is below ``tol``.
    """
    primes = np.asarray(primes, dtype=np.int64)
    logp = np.log(primes.astype(float))
    thresh = math.log(tol) + np.log1p(-1.0 / primes)
    idx = np.arange(primes.size)
    nu = nu_start
    while idx.size:
        lp = -nu * logp[idx]
        keep = lp >= thresh[idx]
        idx = idx[keep]
        if not idx.size:
            break
        yield idx, nu, spec.values(primes[idx], nu), np.exp(lp[keep])
        nu += 1


def companions(spec, p, tail_tol=DEFAULT_TAIL_TOL):
    """``(S_p, w_p)`` where ``S_p = sum_nu u_f(p^nu) / p^nu``."""
    p = check_prime(p)
    S, w = companions_array(spec, np.array([p]), tail_tol)
    return float(S[0]), float(w[0])


def companions_array(spec, primes, tail_tol=DEFAULT_TAIL_TOL):
    primes = np.asarray(primes, dtype=np.int64)
    S = np.zeros(primes.size)
    if spec.is_strongly_additive:
        nz = spec.values(primes, 1) != 0
        S[nz] = 1.0 / (primes[nz] - 1.0)
    else:
        for idx, _, vals, inv in prime_power_terms(spec, primes, tail_tol):
            S[idx] += np.where(vals != 0, inv, 0.0)
    return S, (1.0 - 1.0 / primes) * S


def h_factor(spec, m):
    """``h_f(m) = u_f(m) prod_{p | m} (1 - 1/p) / (1 - w_p)``."""
    m = check_positive_int(m, "m")
    out = 1.0
    for p, nu in sorted(factorint(m).items()):
        if spec.values(np.array([p]), np.array([nu]))[0] == 0:
            return 0.0
        _, w = companions(spec, p)
        out *= (1.0 - 1.0 / p) / (1.0 - w)
    return out


def additive_value(spec, n):
    """``f(n)`` by factorization; reference path for small ``n``."""
    n = check_positive_int(n, "n")
    return math.fsum(eval_prime_power(spec, p, nu) for p, nu in sorted(factorint(n).items()))


# ---------------------------------------------------------------------------
# classification of the criterion series

@dataclass(frozen=True)
class Classification:
    prime_budget: int
    sum_min_square: float
    sum_linear: float
    sum_support: float
    has_limit: bool | None
    support_divergent: bool | None
    verdict: str

    @property
    def atomic(self):
        return self.has_limit is True and self.support_divergent is False

    @property
    def continuous(self):
        return self.has_limit is True and self.support_divergent is True


def _analytic_verdict(spec):
    fam, k = spec.family, spec.param
    if fam is Family.ZERO:
        return True, False
    if fam in (Family.LOGPOW, Family.PPOW, Family.EULER_RATIO, Family.SIGMA_RATIO):
        return True, True
    if fam is Family.DYADIC_LOG:
        # both the square series and the support series are
        # sum 1/(n (log n)^kappa), so they converge together
        return k > 1, k <= 1
    if fam is Family.DYADIC_POW:
        return True, False
    return None, None


def classify(spec, prime_budget=10**6):
    """Partial sums of the criterion series over ``p <= prime_budget``
    together with the analytic verdict known for the family.

    Finitely many overrides never change a verdict.
    """
    prime_budget = check_positive_int(prime_budget, "prime_budget", minimum=100)
    ps = primes_up_to(prime_budget)
    f = spec.untruncated().values(ps, 1)
    inv = 1.0 / ps
    s_sq = math.fsum(np.minimum(1.0, f * f) * inv)
    s_lin = math.fsum(np.where(np.abs(f) <= 1.0, f, 0.0) * inv)
    s_sup = math.fsum(np.where(f != 0, inv, 0.0))
    lim, div = _analytic_verdict(spec)
    if lim is None:
        verdict = "undetermined (partial sums reported)"
    elif not lim:
        verdict = "no limit law"
    else:
        verdict = "continuous" if div else "atomic"
    return Classification(prime_budget, s_sq, s_lin, s_sup, lim, div, verdict)


# ---------------------------------------------------------------------------
# prime-sum tail models, sum over p > P of h(f(p)) / p

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _composite_nodes(a, b, panels=48):
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * np.diff(edges)[:, None]
    return (mid + half * _GL_X).ravel(), (half * _GL_W).ravel()


def _cin(z):
    """Entire cosine integral ``Cin(z) = int_0^z (1 - cos t)/t dt`` (even)."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z < 0.05
    zs = z[small] ** 2
    out[small] = zs / 4 - zs**2 / 96 + zs**3 / 4320
    _, ci = special.sici(z[~small])
    out[~small] = EULER_GAMMA + np.log(z[~small]) - ci
    return out


@lru_cache(maxsize=256)
def _dyadic_lambda(spec, log_P, n_terms=10**6):
    """Model of ``sum_{p > P, f(p) = 1} 1/p`` using ``1/log t`` prime density."""
    fam, k = spec.family, spec.param
    if fam is Family.DYADIC_LOG and k <= 1:
        return math.inf
    ln2 = math.log(2.0)
    nmin = _DYADIC_NMIN[fam]

    def log1p_delta(n):
        return np.log1p(1.0 / (np.log(n) ** k if fam is Family.DYADIC_LOG else n ** k))

    n0 = max(math.ceil(log_P / ln2) - 1, nmin - 1)
    total = 0.0
    if n0 >= nmin:
        log_b = n0 * ln2 + float(log1p_delta(np.float64(n0)))
        if log_P < log_b:
            total += math.log(log_b / log_P)
    ns = np.arange(n0 + 1, n0 + 1 + n_terms, dtype=float)
    total += math.fsum(np.log1p(log1p_delta(ns) / (ns * ln2)))
    N = n0 + n_terms + 0.5
    if fam is Family.DYADIC_LOG:
        total += math.log(N) ** (1 - k) / ((k - 1) * ln2)
    else:
        total += N ** (-k) / (k * ln2)
    return total


def prime_tail(spec, log_P, kind, tau=None):
    """Model of ``sum_{p > P} h(f(p)) / p`` with ``P = exp(log_P)``.

    kind : ``"count"`` (h = 1 on the support), ``"linear"`` (h = f on
    ``|f| <= 1``), ``"square"`` (h = min(1, f^2)) or ``"cf"``
    (h = exp(i tau f) - 1, vectorized over ``tau``).

    Primes are replaced by the density ``dt / log t``; overrides and
    truncation are ignored (they only act on finitely many small primes
    for the built-in families once ``P >= 3``).
    """
    fam = spec.family
    log_P = float(log_P)
    if kind == "cf":
        tau = np.asarray(tau, dtype=float)
    if fam is Family.ZERO:
        return np.zeros(tau.shape, dtype=complex) if kind == "cf" else 0.0
    if fam in _DYADIC_NMIN:
        lam = _dyadic_lambda(spec, log_P)
        if kind == "cf":
            if not math.isfinite(lam):
                raise InvalidInputError("divergent support series: no limit law")
            return (-2.0 * np.sin(tau / 2) ** 2 + 1j * np.sin(tau)) * lam
        return lam
    if kind == "count":
        return math.inf
    if fam is Family.LOGPOW:
        xi = spec.param
        s1 = log_P ** (-xi)
        if kind == "linear":
            return s1 / xi
        if kind == "square":
            return s1 * s1 / (2 * xi) if s1 <= 1 else (0.5 + math.log(s1)) / xi
        z = tau * s1
        out = (1j * np.sign(z) * special.sici(np.abs(z))[0] - _cin(z)) / xi
        return np.where(z == 0, 0.0, out)
    # PPOW, EULER_RATIO, SIGMA_RATIO: f(e^w) decays like exp(-rate * w)
    rate = spec.param if fam is Family.PPOW else 1.0
    w, wt = _composite_nodes(log_P, log_P + 45.0 / rate)
    if fam is Family.PPOW:
        fv = np.exp(-rate * w)
    elif fam is Family.EULER_RATIO:
        fv = -np.log1p(-np.exp(-w))
    else:
        fv = np.log1p(np.exp(-w))
    wt = wt / w
    if kind == "linear":
        return float(np.dot(wt, np.where(fv <= 1, fv, 0.0)))
    if kind == "square":
        return float(np.dot(wt, np.minimum(1.0, fv * fv)))
    arg = np.multiply.outer(tau, fv)
    return (-2.0 * np.sin(arg / 2) ** 2 + 1j * np.sin(arg)) @ wt


# ---------------------------------------------------------------------------
# text format

def format_spec(spec):
    parts = [f"family={spec.family.value}"]
    if spec.param is not None:
        parts.append(f"{_FAMILY_PARAM[spec.family]}={spec.param!r}")
    if spec.strongly_additive != _STRONG_DEFAULT[spec.family]:
        parts.append(f"strong={int(spec.strongly_additive)}")
    if spec.truncation is not None:
        parts.append(f"truncation={spec.truncation!r}")
    parts.extend(f"override={p},{nu},{v!r}" for p, nu, v in spec.overrides)
    return " ".join(parts)


def parse_spec(text):
    kw = {}
    overrides = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        for tok in line.split():
            if "=" not in tok:
                raise InvalidInputError(f"bad token {tok!r}")
            key, val = tok.split("=", 1)
            key = key.lower()
            if key == "override":
                try:
                    p, nu, v = val.split(",")
                    overrides.append((int(p), int(nu), float(v)))
                except ValueError:
                    raise InvalidInputError(f"bad override {val!r}") from None
            elif key == "family":
                kw["family"] = val
            elif key in ("xi", "kappa"):
                kw["param"] = float(val)
            elif key == "truncation":
                kw["truncation"] = float(val)
            elif key == "strong":
                kw["strongly_additive"] = val not in ("0", "false", "False")
            else:
                raise InvalidInputError(f"unknown key {key!r}")
    if "family" not in kw:
        raise InvalidInputError("spec needs a family")
    return AdditiveFunctionSpec(overrides=overrides, **kw)


def make_spec(family, param=None, **kwargs):
    """Shorthand: ``make_spec("LOGPOW", 2)``."""
    return AdditiveFunctionSpec(family=family, param=param, **kwargs)
