"""Limiting distributions: characteristic functions, the atomic law built
from the multiplicative weights ``h_f(m)/m``, numerical inversion for
continuous laws, and concentration bounds."""

from dataclasses import dataclass
import io
import math
import warnings

import numpy as np
from scipy import integrate, optimize, stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    InsufficientDecayError,
    InvalidInputError,
    as_float_array,
    check_positive_int,
    check_real,
)
from .function_model import (
    Family,
    classify,
    companions_array,
    prime_tail,
)
from .primes import primes_up_to

_CHUNK = 1 << 21


def _log1p_complex(a, b):
    """log(1 + a + ib) evaluated so that conjugate inputs give conjugate
    outputs bit for bit."""
    return 0.5 * np.log1p(2 * a + a * a + b * b), np.arctan2(b, 1.0 + a)


class CharacteristicFunction:
    """Euler-product characteristic function of the limit law.

    With ``r = None`` this is ``prod_p (1 - 1/p) sum_nu exp(i tau f(p^nu)) / p^nu``;
    with ``r > 0`` it is the conditional product
    ``prod_p (1 + r e^{i tau f(p)}/(p-1)) / (1 + r/(p-1))``.
    Primes up to ``p_max`` are multiplied exactly (in log space); the
    remaining primes enter through ``exp(sum_{p > p_max} (e^{i tau f(p)} - 1)/p)``
    using the family's prime-density model (times ``r`` when conditional).
    """

    def __init__(self, spec, p_max=10**5, r=None, tail_model=True):
        self.spec = spec
        self.p_max = check_positive_int(p_max, "p_max", minimum=100)
        if r is not None:
            r = check_real(r, "r")
            if r <= 0:
                raise InvalidInputError("r must be positive")
        self.r = r
        self.tail_model = tail_model
        primes = primes_up_to(self.p_max)
        terms = []
        if r is not None:
            f = spec.values(primes, 1)
            nz = f != 0
            terms.append((np.flatnonzero(nz), f[nz], r / (primes[nz] - 1.0 + r)))
        elif spec.is_strongly_additive:
            f = spec.values(primes, 1)
            nz = f != 0
            terms.append((np.flatnonzero(nz), f[nz], 1.0 / primes[nz]))
        else:
            from .function_model import prime_power_terms

            for idx, nu, vals, inv in prime_power_terms(spec, primes):
                nz = vals != 0
                coef = (1.0 - 1.0 / primes[idx[nz]]) * inv[nz]
                terms.append((idx[nz], vals[nz], coef))
        self._n_primes = primes.size
        self._terms = terms
        self._width = max(1, sum(t[0].size for t in terms))

    def _log_product(self, tau):
        re = np.zeros(tau.size)
        im = np.zeros(tau.size)
        step = max(1, _CHUNK // self._width)
        for s in range(0, tau.size, step):
            t = tau[s:s + step]
            a = np.zeros((t.size, self._n_primes))
            b = np.zeros((t.size, self._n_primes))
            for idx, f, coef in self._terms:
                arg = np.multiply.outer(t, f)
                a[:, idx] += -2.0 * np.sin(arg / 2) ** 2 * coef
                b[:, idx] += np.sin(arg) * coef
            lr, li = _log1p_complex(a, b)
            re[s:s + step] = lr.sum(axis=1)
            im[s:s + step] = li.sum(axis=1)
        return re, im

    def tail(self, tau):
        tau = np.asarray(tau, dtype=float)
        if not self.tail_model:
            return np.zeros(tau.shape, dtype=complex)
        out = prime_tail(self.spec, math.log(self.p_max), "cf", tau)
        return out * (self.r if self.r is not None else 1.0)

    def tail_error(self, tau):
        """Heuristic size of the error committed by the tail model."""
        tau = np.asarray(tau, dtype=float)
        P = self.p_max
        second_order = 4.0 / (P * math.log(P)) * (self.r or 1.0) ** 2
        return 0.02 * np.abs(self.tail(tau)) + np.where(tau == 0, 0.0, second_order)

    def __call__(self, tau):
        arr, scalar = as_float_array(tau)
        re, im = self._log_product(arr)
        tl = self.tail(arr)
        re = re + tl.real
        im = im + tl.imag
        out = np.exp(re) * (np.cos(im) + 1j * np.sin(im))
        return complex(out[0]) if scalar else out


class GaussianCF:
    """Control characteristic function ``exp(i mu tau - sigma^2 tau^2 / 2)``."""

    def __init__(self, mu=0.0, sigma=1.0):
        self.mu, self.sigma = float(mu), float(sigma)

    def __call__(self, tau):
        t = np.asarray(tau, dtype=float)
        out = np.exp(1j * self.mu * t - 0.5 * (self.sigma * t) ** 2)
        return complex(out) if out.ndim == 0 else out


class DegenerateCF:
    """Characteristic function of the point mass at ``a``."""

    def __init__(self, a=0.0):
        self.a = float(a)

    def __call__(self, tau):
        out = np.exp(1j * self.a * np.asarray(tau, dtype=float))
        return complex(out) if out.ndim == 0 else out


def cf_limit(spec, tau, p_max=10**5):
    return CharacteristicFunction(spec, p_max)(tau)


def cf_conditional(spec, tau, r, p_max=10**5):
    r = check_real(r, "r")
    if r <= 0:
        raise InvalidInputError("r must be positive")
    return CharacteristicFunction(spec, p_max, r=r)(tau)


# ---------------------------------------------------------------------------
# atomic laws

class AtomicLimitLaw(BaseEstimator):
    """Discrete limit law ``F(y) = prod_p (1 - w_p) sum_{f(m) <= y} h_f(m)/m``.

    Atoms are all ``m <= m_cut`` built from primes ``p <= p_cut`` with
    ``u_f(m) = 1``, weighted by ``prod_{p <= p_cut} (1 - w_p) h_f(m) / m``.
    With these weights the full (unbounded ``m``) mass is exactly one, so
    ``deficit_`` is the mass of the unenumerated atoms; ``deficit_bound_``
    is Rankin's bound for it.  ``tail_bound_`` bounds the effect of the
    primes above ``p_cut`` on the law.

    Parameters
    ----------
    spec : AdditiveFunctionSpec
    p_cut, m_cut : int
    mass_budget : float
        Keep the heaviest atoms until this mass is reached.
    tail : {"none", "poisson"}
        ``"poisson"`` convolves the enumerated law with the Poisson law of
        the number of primes ``p > p_cut`` dividing ``m``; only available
        when ``f`` is constant on its support beyond ``p_cut`` (the dyadic
        families).
    """

    def __init__(self, spec=None, p_cut=10**6, m_cut=10**6, mass_budget=1.0, tail="none"):
        self.spec = spec
        self.p_cut = p_cut
        self.m_cut = m_cut
        self.mass_budget = mass_budget
        self.tail = tail

    def fit(self, X=None, y=None):
        spec = self.spec
        p_cut = check_positive_int(self.p_cut, "p_cut", minimum=2)
        m_cut = check_positive_int(self.m_cut, "m_cut")
        budget = check_real(self.mass_budget, "mass_budget", low=0.0, high=1.0)
        if self.tail not in ("none", "poisson"):
            raise InvalidInputError(f"unknown tail option {self.tail!r}")
        cls = classify(spec, max(100, min(p_cut, 10**6)))
        if cls.support_divergent:
            raise InvalidInputError("law is continuous: sum of 1/p over the support diverges")
        if cls.has_limit is False:
            raise InvalidInputError("no limit law for this function")

        primes = primes_up_to(p_cut)
        S, w = companions_array(spec, primes)
        self.log_prime_product_ = math.fsum(np.log1p(-w))
        prod = math.exp(self.log_prime_product_)
        local = (1.0 - 1.0 / primes) / (1.0 - w)

        support = []  # (p, [(q, f(q), weight factor)], local factor, index)
        small = primes[primes <= m_cut]
        nu = 1
        cand = small
        per_prime = {}
        while cand.size:
            vals = spec.values(cand, nu)
            for p, v in zip(cand[vals != 0].tolist(), vals[vals != 0].tolist()):
                per_prime.setdefault(p, []).append((p**nu, v))
            nu += 1
            cand = cand[cand.astype(float) ** nu <= m_cut]
        loc_of = dict(zip(primes.tolist(), local.tolist()))
        for p in sorted(per_prime):
            c = loc_of[p]
            support.append([(q, v, c / q) for q, v in sorted(per_prime[p])])

        ms, fs, ws = [1], [0.0], [1.0]
        stack = [(0, 1, 0.0, 1.0)]
        ps = sorted(per_prime)
        n_sup = len(ps)
        while stack:
            i, m, fm, wm = stack.pop()
            for j in range(i, n_sup):
                if m * ps[j] > m_cut:
                    break
                for q, v, c in support[j]:
                    mq = m * q
                    if mq > m_cut:
                        break
                    node = (j + 1, mq, fm + v, wm * c)
                    ms.append(mq)
                    fs.append(node[2])
                    ws.append(node[3])
                    stack.append(node)
        ms = np.array(ms, dtype=np.int64)
        fs = np.array(fs)
        hm = np.array(ws)  # h_f(m) / m
        weights = prod * hm

        order = np.argsort(-weights, kind="stable")
        cum = np.cumsum(weights[order])
        keep = order if budget >= 1.0 else order[: int(np.searchsorted(cum, budget, side="left")) + 1]
        self.budget_met_ = bool(cum[-1] >= budget - 1e-15)
        if budget < 1.0 and not self.budget_met_:
            warnings.warn(f"mass budget {budget} not reached: enumerated mass {cum[-1]:.6g}")
        dropped = math.fsum(weights) - math.fsum(weights[keep])
        self.n_atoms_ = keep.size
        self.enumerated_mass_ = math.fsum(weights[keep])
        self.deficit_ = 1.0 - self.enumerated_mass_
        self.atom_values_ = fs[keep]
        self.atom_weights_ = weights[keep]

        pos, inv = np.unique(self.atom_values_, return_inverse=True)
        self.positions_ = pos
        self.masses_ = np.bincount(inv, weights=self.atom_weights_)
        self._cum = np.concatenate(([0.0], np.cumsum(self.masses_)))

        self.deficit_bound_ = dropped + self._rankin_bound(spec, primes, local, prod, ms, hm, m_cut)
        self.tail_bound_ = self._tail_mass_bound(spec, p_cut)
        self.lam_ = None
        if self.tail == "poisson":
            if spec.family not in (Family.DYADIC_LOG, Family.DYADIC_POW) or spec.overrides:
                raise InvalidInputError("poisson tail needs a dyadic spec")
            self.lam_ = prime_tail(spec, math.log(p_cut), "count")
            jmax = int(self.lam_ + 12 * math.sqrt(self.lam_) + 30)
            self.poisson_weights_ = stats.poisson.pmf(np.arange(jmax + 1), self.lam_)
            self.tail_error_ = 1.0 / (p_cut * math.log(p_cut)) + 0.02 * self.lam_ * math.exp(-self.lam_)
        else:
            self.tail_error_ = self.tail_bound_
        self.error_budget_ = self.deficit_ + self.tail_error_
        return self

    @staticmethod
    def _rankin_bound(spec, primes, local, prod, ms, hm, m_cut):
        """Rankin: sum_{m > M} h/m <= M^-s (sum_all h m^(s-1) - sum_{m<=M} h m^(s-1))."""
        if spec.family is Family.ZERO and not spec.overrides:
            return 0.0
        terms = []
        if spec.is_strongly_additive:
            nz = spec.values(primes, 1) != 0
            terms.append(("strong", primes[nz].astype(float), local[nz]))
        else:
            from .function_model import prime_power_terms

            terms.append(("general", primes, local))
        logM = math.log(m_cut)

        def log_full(s):
            if terms[0][0] == "strong":
                p, c = terms[0][1], terms[0][2]
                return math.fsum(np.log1p(c / np.expm1((1 - s) * np.log(p))))
            acc = np.zeros(primes.size)
            for idx, nu, vals, _ in prime_power_terms(spec, primes, tol=1e-18):
                acc[idx] += np.where(vals != 0, np.exp(-nu * (1 - s) * np.log(primes[idx].astype(float))), 0.0)
            return math.fsum(np.log1p(local * acc))

        def bound(s):
            full = math.exp(log_full(s))
            part = math.fsum(hm * np.exp(s * np.log(ms.astype(float))))
            return prod * math.exp(-s * logM) * max(full - part, 0.0)

        res = optimize.minimize_scalar(bound, bounds=(1e-4, 0.95), method="bounded", options={"xatol": 1e-4})
        return float(min(res.fun, bound(0.5), 1.0))

    @staticmethod
    def _tail_mass_bound(spec, p_cut):
        """Bound for sum_{p > p_cut} w_p, which dominates the sup distance
        between the p_cut-truncated law and the full law."""
        if spec.family is Family.ZERO:
            return 0.0
        lam = prime_tail(spec, math.log(p_cut), "count")
        extra = 0.0 if spec.is_strongly_additive else 2.0 / (p_cut * math.log(p_cut))
        return 1.02 * lam + extra

    # -- evaluation --------------------------------------------------
    def _enum_cdf(self, y, side):
        return self._cum[np.searchsorted(self.positions_, y, side=side)]

    def _cdf(self, y, side):
        check_is_fitted(self)
        arr, scalar = as_float_array(y)
        if self.lam_ is None:
            out = self._enum_cdf(arr, side)
        else:
            out = np.zeros(arr.shape)
            for j, pj in enumerate(self.poisson_weights_):
                out += pj * self._enum_cdf(arr - j, side)
        return float(out[0]) if scalar else out

    def predict(self, y):
        return self._cdf(y, "right")

    cdf = predict

    def cdf_left(self, y):
        return self._cdf(y, "left")

    def jump_points(self):
        check_is_fitted(self)
        if self.lam_ is None:
            return self.positions_
        shifts = np.arange(self.poisson_weights_.size, dtype=float)
        return np.unique(np.add.outer(shifts, self.positions_).ravel())

    def atoms_csv(self):
        check_is_fitted(self)
        buf = io.StringIO()
        buf.write("fm,weight\n")
        for v, w in zip(self.positions_, self.masses_):
            buf.write(f"{v:.17g},{w:.17g}\n")
        return buf.getvalue()


def atomic_law(spec, mass_budget=1.0, P_cut=10**6, M_cut=10**6, tail="none"):
    return AtomicLimitLaw(spec, P_cut, M_cut, mass_budget, tail).fit()


# ---------------------------------------------------------------------------
# inversion

def _decay_check(cf, T_int, limit=0.5):
    grid = np.linspace(0.5 * T_int, T_int, 64)
    mags = np.abs(np.asarray(cf(grid)))
    if mags.max() > limit:
        raise InsufficientDecayError(
            f"|phi| = {mags.max():.3g} on [T/2, T]; the law may carry large atoms"
        )
    return grid, mags


def invert_cf(cf, y, T_int, epsabs=1e-11):
    """``F(y) = 1/2 - (1/pi) int_0^T Im(e^{-i tau y} phi(tau)) / tau dtau``.

    Returns ``(value, error)``; the error adds the quadrature estimate and a
    truncation estimate from the measured decay of ``|phi|`` near ``T``.
    """
    y = check_real(y, "y")
    T_int = check_real(T_int, "T_int", low=0.0, low_open=True)
    grid, mags = _decay_check(cf, T_int)
    h = 1e-6
    d0 = (complex(cf(h)).imag - complex(cf(-h)).imag) / (2 * h)

    def integrand(t):
        if t < 1e-6:
            return d0 - y
        return (np.exp(-1j * t * y) * complex(cf(t))).imag / t

    val, qerr = integrate.quad(integrand, 0.0, T_int, limit=1000, epsabs=epsabs, epsrel=1e-12)
    m_hi = mags[-16:].max()
    m_lo = mags[:16].max()
    a = max(math.log(max(m_lo, 1e-300) / max(m_hi, 1e-300)) / math.log(2.0), 0.1)
    trunc = 0.0 if m_hi < 1e-300 else m_hi / (math.pi * a)
    return 0.5 - val / math.pi, qerr / math.pi + trunc


class InvertedLimitLaw(BaseEstimator):
    """Continuous limit law recovered from its characteristic function on a grid.

    Uses the Fourier-series form of a distribution function supported in
    a window ``[center - half_width, center + half_width]``, evaluated by
    FFT.  With Fejer weights the computed CDF is nondecreasing.  ``error_`` is twice the sup difference between the
    ``N``- and ``N/2``-term approximations.

    Parameters
    ----------
    cf : callable
        Vectorized characteristic function.
    t_int : float
        Frequency cutoff.
    center, half_width : float
        Window containing essentially all of the mass.
    oversample : int
        y-grid refinement factor relative to the number of frequencies.
    taper : {"fejer", "none"}
        ``"none"`` drops the Fejer weights: much smaller bias for rapidly
        decaying ``phi``, but monotonicity then only holds up to ``error_``.
    """

    def __init__(self, cf=None, t_int=2e4, center=0.0, half_width=8.0, oversample=4, taper="none"):
        self.cf = cf
        self.taper = taper
        self.t_int = t_int
        self.center = center
        self.half_width = half_width
        self.oversample = oversample

    def fit(self, X=None, y=None):
        T = check_real(self.t_int, "t_int", low=0.0, low_open=True)
        hw = check_real(self.half_width, "half_width", low=0.0, low_open=True)
        c = check_real(self.center, "center")
        if self.taper not in ("fejer", "none"):
            raise InvalidInputError(f"unknown taper {self.taper!r}")
        _decay_check(self.cf, T)
        L = 2 * hw
        delta = math.pi / hw
        N = max(8, int(math.ceil(T / delta)))
        k = np.arange(1, N)
        phi = np.asarray(self.cf(k * delta))
        psi = phi * np.exp(-1j * k * delta * c)
        Mgrid = 1 << int(math.ceil(math.log2(self.oversample * N)))
        u = -hw + np.arange(Mgrid) * (L / Mgrid)
        # constant Fourier term: -E[X - c] / L, with E[X] from phi'(0)
        h = 1e-4 / hw
        ends = np.asarray(self.cf(np.array([h, -h])))
        self.mean_ = float((ends[0].imag - ends[1].imag) / (2 * h))
        shift = (self.mean_ - c) / L

        def series(n_terms):
            kk = k[: n_terms - 1]
            a = np.zeros(Mgrid, dtype=complex)
            wts = (1.0 - kk / n_terms) if self.taper == "fejer" else 1.0
            a[kk] = wts * psi[: n_terms - 1] / kk * np.where(kk % 2 == 0, 1.0, -1.0)
            s = np.fft.fft(a)
            return 0.5 + u / L - shift - s.imag / math.pi

        F = series(N)
        F_half = series(N // 2)
        self.grid_ = c + u
        self.cdf_grid_ = np.clip(np.maximum.accumulate(F), 0.0, 1.0)
        self.error_grid_ = 2.0 * np.abs(F - F_half)
        self.error_ = float(self.error_grid_.max())
        self.n_terms_ = N
        return self

    def predict(self, y):
        check_is_fitted(self)
        arr, scalar = as_float_array(y)
        out = np.interp(arr, self.grid_, self.cdf_grid_, left=0.0, right=1.0)
        return float(out[0]) if scalar else out

    cdf = predict

    def cdf_left(self, y):
        return self.predict(y)

    def pointwise_error(self, y):
        check_is_fitted(self)
        return np.interp(np.asarray(y, dtype=float), self.grid_, self.error_grid_)

    def law_csv(self, ys):
        buf = io.StringIO()
        buf.write("y,F,err\n")
        for yy, F, e in zip(ys, self.predict(ys), self.pointwise_error(ys)):
            buf.write(f"{yy:.17g},{F:.17g},{e:.17g}\n")
        return buf.getvalue()


def default_window(spec, r=None, p_max=10**5):
    """Center and half width from the mean and variance of the product model."""
    ps = primes_up_to(p_max)
    f = spec.values(ps, 1)
    wt = (r / (ps - 1.0 + r)) if r is not None else 1.0 / ps
    mean = math.fsum(f * wt)
    var = math.fsum(f * f * wt)
    spread = max(math.sqrt(var), 0.1)
    return mean, 8 * spread + 2 * float(np.abs(f).max()) + 1.0


# ---------------------------------------------------------------------------
# concentration

def concentration_kr(spec, ell, P_max=10**6, c_kr=1.0):
    """Kolmogorov-Rogozin type bound ``C / sqrt(1 + sum_{|f(p)| > ell} 1/p)``."""
    ell = check_real(ell, "ell", low=0.0, low_open=True)
    ps = primes_up_to(P_max)
    f = spec.values(ps, 1)
    s = math.fsum(np.where(np.abs(f) > ell, 1.0 / ps, 0.0))
    return c_kr / math.sqrt(1.0 + s)


def concentration_integral(cf, ell, tol=1e-8):
    """``ell * int_{-1/ell}^{1/ell} |phi(tau)| dtau`` (the integrand is even)."""
    ell = check_real(ell, "ell", low=0.0, low_open=True)
    if ell > 1:
        raise InvalidInputError("ell must lie in (0, 1]")
    # tol is absolute on the returned value
    val, _ = integrate.quad(lambda t: abs(complex(cf(t))), 0.0, 1.0 / ell, limit=2000,
                            epsabs=tol / (2.0 * ell), epsrel=0.0)
    return 2.0 * ell * val


@dataclass(frozen=True)
class ConcentrationBound:
    value: float
    kr: float
    integral: float
    winner: str


def concentration_min(spec, ell, cf, P_max=10**6, c_kr=1.0, c_int=1.0):
    """Minimum of the two concentration bounds, recording which one won."""
    kr = concentration_kr(spec, ell, P_max, c_kr)
    it = c_int * concentration_integral(cf, min(ell, 1.0))
    return ConcentrationBound(min(kr, it), kr, it, "kr" if kr <= it else "integral")
