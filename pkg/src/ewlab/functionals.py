"""Effective error functionals and parameter selections.

Prime sums are exact up to ``P_max`` (cached cumulative tables) and use
the family tail models of :func:`ewlab.function_model.prime_tail`
beyond.  Every functional also accepts ``log_y`` / ``log_x`` so that
astronomically large arguments can be handled through the tail models.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import io
import math
import warnings

import numpy as np
from scipy import integrate

from ._validation import InvalidInputError, check_positive_int, check_real
from .function_model import EULER_GAMMA, Family, classify, prime_tail
from .primes import primes_up_to

DEFAULT_P_MAX = 10**6
_LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# constants ledger

_DEFAULT_CONSTANTS = {
    "C_KR": (1.0, "concentration bound constant (Kolmogorov-Rogozin)"),
    "C_INT": (1.0, "concentration bound constant (integral of |phi|)"),
    "C_EPS": (1.0, "implied constant of T^2 eta(x^eps) << eps^(1/3)"),
    "C_W": (1.0, "implied constant of T^2 eta(x^w) << w"),
    "C_SUP": (1.0, "implied constant of the sup-norm bound, continuous case"),
    "C_LEVEL": (1.0, "implied constant of the level-set bound"),
    "C_RATE": (1.0, "implied constant of the atomic-case rate"),
    "C_LOCAL": (1.0, "implied constant of the second mean-value condition"),
    "C_DENSITY": (1.0, "implied constant of the third mean-value condition"),
    "C_MV": (1.0, "implied constant of the mean-value remainder"),
    "C_PIK": (1.0, "implied constant of the level-set count remainder"),
    "c0": (0.05, "upper limit for v"),
    "c1": (130.0, "exponent of w = v^c1"),
    "kappa": (0.25, "admissible range kappa <= r <= 1/kappa"),
}


@dataclass
class ConstantsLedger:
    """Absolute constants hidden in the asymptotic bounds, each with a
    provenance note.  File format: ``name=value  # provenance``."""

    values: dict = field(default_factory=lambda: {k: v for k, (v, _) in _DEFAULT_CONSTANTS.items()})
    provenance: dict = field(default_factory=lambda: {k: "default: " + d for k, (_, d) in _DEFAULT_CONSTANTS.items()})

    def __getitem__(self, name):
        return self.values[name]

    def set(self, name, value, provenance="set"):
        self.values[name] = float(value)
        self.provenance[name] = provenance

    def dumps(self):
        return "".join(f"{k}={self.values[k]!r}  # {self.provenance.get(k, '')}\n" for k in sorted(self.values))

    @classmethod
    def loads(cls, text):
        led = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line, _, note = raw.partition("#")
            line = line.strip()
            if not line:
                continue
            name, eq, val = line.partition("=")
            if not eq:
                raise InvalidInputError(f"ledger line {lineno}: expected name=value")
            try:
                led.set(name.strip(), float(val), note.strip() or "file")
            except ValueError:
                raise InvalidInputError(f"ledger line {lineno}: bad value {val.strip()!r}") from None
        return led

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())


# ---------------------------------------------------------------------------
# cached prime tables

@dataclass(frozen=True)
class _PrimeData:
    P: int
    primes: np.ndarray
    alpha_suffix: np.ndarray  # sum_{p >= primes[i]} u(p)/p, with a trailing 0
    ulog_prefix: np.ndarray  # sum_{p <= primes[i]} u(p) log p / p, leading 0
    lin_suffix: np.ndarray
    sq_suffix: np.ndarray
    pp_q: np.ndarray  # prime powers p^nu, nu >= 2, p <= P, sorted
    pp_sq_suffix: np.ndarray
    all_q: np.ndarray  # every p^nu (nu >= 1) up to 1e18 with f != 0, sorted
    all_f2: np.ndarray


def _suffix(a):
    return np.concatenate((np.cumsum(a[::-1])[::-1], [0.0]))


def _prefix(a):
    return np.concatenate(([0.0], np.cumsum(a)))


@lru_cache(maxsize=16)
def _prime_data(spec, P):
    ps = primes_up_to(P)
    pf = ps.astype(float)
    f = spec.values(ps, 1)
    u = (f != 0).astype(float)
    small = np.abs(f) <= 1.0
    qs, sqs, fs = [pf], [np.minimum(1.0, f * f) / pf], [f]
    nu = 2
    cand = ps
    while True:
        cand = cand[cand.astype(float) ** nu <= 1e18]
        if cand.size == 0:
            break
        q = cand.astype(float) ** nu
        fv = spec.values(cand, nu)
        qs.append(q)
        sqs.append(np.minimum(1.0, fv * fv) / q)
        fs.append(fv)
        nu += 1
    pp_q = np.concatenate(qs[1:]) if len(qs) > 1 else np.empty(0)
    pp_sq = np.concatenate(sqs[1:]) if len(qs) > 1 else np.empty(0)
    order = np.argsort(pp_q, kind="stable")
    all_q = np.concatenate(qs)
    all_f = np.concatenate(fs)
    keep = all_f != 0
    all_q, all_f = all_q[keep], all_f[keep]
    o2 = np.argsort(all_q, kind="stable")
    return _PrimeData(
        P=P,
        primes=ps,
        alpha_suffix=_suffix(u / pf),
        ulog_prefix=_prefix(u * np.log(pf) / pf),
        lin_suffix=_suffix(np.where(small, f, 0.0) / pf),
        sq_suffix=_suffix(np.minimum(1.0, f * f) / pf),
        pp_q=pp_q[order],
        pp_sq_suffix=_suffix(pp_sq[order]),
        all_q=all_q[o2],
        all_f2=(all_f * all_f / all_q)[o2],
    )


def _resolve_log(y, log_y, name="y", minimum=2.0):
    if (y is None) == (log_y is None):
        raise InvalidInputError(f"give exactly one of {name} and log_{name}")
    if log_y is None:
        y = check_real(y, name, low=minimum)
        return math.log(y), y
    log_y = check_real(log_y, "log_" + name, low=math.log(minimum))
    return log_y, (math.exp(log_y) if log_y < 700 else math.inf)


def _log1p_delta(spec, n):
    n = np.asarray(n, dtype=float)
    if spec.family is Family.DYADIC_LOG:
        return np.log1p(np.log(n) ** (-spec.param))
    return np.log1p(n ** (-spec.param))


def _dyadic_loglin(spec, log_lo, log_hi):
    """Model of ``sum_{lo < p <= hi, f(p) != 0} log p / p`` for the dyadic
    families: the total logarithmic length of the blocks in ``(lo, hi]``."""
    if log_hi <= log_lo:
        return 0.0
    nmin = 3 if spec.family is Family.DYADIC_LOG else 1
    n_lo = max(int(math.floor(log_lo / _LN2)), nmin)
    n_hi = int(math.floor(log_hi / _LN2))
    if n_hi < n_lo:
        return 0.0
    total = 0.0
    n_exact_end = min(n_hi, n_lo + 10**6)
    ns = np.arange(n_lo, n_exact_end + 1, dtype=float)
    lens = _log1p_delta(spec, ns)
    a = ns * _LN2
    b = a + lens
    total += math.fsum(np.clip(np.minimum(b, log_hi) - np.maximum(a, log_lo), 0.0, None))
    if n_hi > n_exact_end:
        val, _ = integrate.quad(lambda t: float(_log1p_delta(spec, t)), n_exact_end + 0.5, n_hi + 0.5, limit=200)
        total += val
    return total


# ---------------------------------------------------------------------------
# alpha, beta, eta, B

def alpha(spec, y=None, P_max=DEFAULT_P_MAX, log_y=None):
    """``sum_{p > y} u_f(p) / p``."""
    ly, yv = _resolve_log(y, log_y)
    d = _prime_data(spec, P_max)
    if ly >= math.log(P_max):
        return float(prime_tail(spec, ly, "count"))
    i = np.searchsorted(d.primes, yv, side="right")
    return float(d.alpha_suffix[i]) + float(prime_tail(spec, math.log(P_max), "count"))


def beta(spec, y=None, P_max=DEFAULT_P_MAX, log_y=None):
    """``(1/log y) int_1^y alpha(t) dt/t``, using that alpha is a step
    function: the integral equals ``alpha(y) log y + sum_{p<=y} u(p) log p/p``."""
    ly, yv = _resolve_log(y, log_y)
    a = alpha(spec, log_y=ly, P_max=P_max)
    if not math.isfinite(a):
        return math.inf
    d = _prime_data(spec, P_max)
    if ly < math.log(P_max):
        s = float(d.ulog_prefix[np.searchsorted(d.primes, yv, side="right")])
    else:
        s = float(d.ulog_prefix[-1])
        if spec.family in (Family.DYADIC_LOG, Family.DYADIC_POW):
            s += _dyadic_loglin(spec, math.log(P_max), ly)
        elif spec.family is not Family.ZERO:
            return math.inf
    return a + s / ly


def alpha_beta(spec, y=None, P_max=DEFAULT_P_MAX, log_y=None):
    return alpha(spec, y, P_max, log_y), beta(spec, y, P_max, log_y)


def _eta_raw(spec, ly, P_max):
    d = _prime_data(spec, P_max)
    lP = math.log(P_max)
    if ly < lP:
        y = math.exp(ly)
        i = np.searchsorted(d.primes, y, side="right")
        lin_tail = complex(prime_tail(spec, lP, "linear")).real
        sq_tail = float(prime_tail(spec, lP, "square"))
        lin = abs(float(d.lin_suffix[i]) + lin_tail) + 0.02 * abs(lin_tail)
        j = np.searchsorted(d.pp_q, y, side="right")
        higher = float(d.pp_sq_suffix[j]) + 2.0 / (P_max * lP)
        sq = float(d.sq_suffix[i]) + 1.02 * sq_tail + higher
    else:
        lin_tail = float(prime_tail(spec, ly, "linear"))
        lin = 1.02 * abs(lin_tail)
        higher = 4.0 * math.exp(-ly / 2) / ly
        j = np.searchsorted(d.pp_q, math.exp(min(ly, 700.0)), side="right")
        higher += float(d.pp_sq_suffix[j])
        sq = 1.02 * float(prime_tail(spec, ly, "square")) + higher
    if spec.family is Family.ZERO and not spec.overrides:
        return 0.0
    return max(lin, sq)


def eta(spec, y=None, P_max=DEFAULT_P_MAX, log_y=None):
    """Nonincreasing majorant of both tails ``|sum_{p>y, |f(p)|<=1} f(p)/p|``
    and ``sum_{p^nu > y} min(1, f(p^nu)^2)/p^nu``.

    The larger of the two tails is made monotone by taking its running
    maximum over a geometric grid of larger arguments below ``P_max``;
    beyond ``P_max`` the tail models are already nonincreasing.
    """
    ly, _ = _resolve_log(y, log_y, minimum=1.0)
    if spec.family is Family.ZERO and not spec.overrides:
        return 0.0
    if spec.family is Family.DYADIC_LOG and spec.param <= 1:
        raise InvalidInputError("no limit law: the tails diverge")
    lP = math.log(P_max)
    if ly >= lP:
        return _eta_raw(spec, ly, P_max)
    grid = np.exp(np.linspace(math.log(max(ly, 1e-3)), math.log(lP), 160))
    grid[0] = ly
    return max(max(_eta_raw(spec, g, P_max) for g in grid), _eta_raw(spec, lP, P_max))


def B_f(spec, v, P_max=DEFAULT_P_MAX):
    """``sqrt(2 + sum_{p^nu <= v} f(p^nu)^2 / p^nu)``."""
    v = check_real(v, "v", low=1.0)
    d = _prime_data(spec, P_max)
    j = np.searchsorted(d.all_q, v, side="right")
    s = math.fsum(d.all_f2[:j])
    if v > P_max and spec.family is not Family.ZERO:
        # squares of the primes in (P_max, v]; f is below 1 there for every family
        lP = math.log(P_max)
        s += float(prime_tail(spec, lP, "square")) - float(prime_tail(spec, math.log(v), "square"))
    return math.sqrt(2.0 + s)


def b_f_direct_sum(spec, v):
    """Reference ``sum_{p^nu <= v} f(p^nu)^2/p^nu`` by plain enumeration."""
    terms = []
    for p in primes_up_to(int(v)).tolist():
        q, nu = p, 1
        while q <= v:
            fv = float(spec.values(np.array([p]), np.array([nu]))[0])
            terms.append(fv * fv / q)
            q *= p
            nu += 1
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# atomic-case rate

@dataclass(frozen=True)
class RateBreakdown:
    alpha_term: float
    beta_term: float
    log_term: float

    @property
    def total(self):
        return self.alpha_term + self.beta_term + self.log_term


def rate_thm11(spec, x=None, P_max=DEFAULT_P_MAX, log_x=None):
    """``alpha(x^(1/log log x)) + beta(sqrt x)^(1/4) + (log x)^(-1/6)``."""
    lx, _ = _resolve_log(x, log_x, "x", minimum=16.0)
    cls = classify(spec, min(P_max, 10**6))
    if not cls.atomic:
        warnings.warn(f"rate for the atomic case requested for a {cls.verdict} spec")
    a = alpha(spec, log_y=lx / math.log(lx), P_max=P_max)
    b = beta(spec, log_y=lx / 2, P_max=P_max)
    return RateBreakdown(a, b ** 0.25, lx ** (-1.0 / 6))


# ---------------------------------------------------------------------------
# concentration

def q_bound(spec, ell, cf=None, constants=None, P_max=DEFAULT_P_MAX):
    """Smaller of the two concentration bounds; returns ``(value, winner)``."""
    from .limit_law import concentration_integral, concentration_kr

    led = constants or ConstantsLedger()
    kr = concentration_kr(spec, ell, P_max, led["C_KR"])
    if cf is None or ell > 1:
        return kr, "kr"
    it = led["C_INT"] * concentration_integral(cf, ell, tol=1e-6)
    return (kr, "kr") if kr <= it else (it, "integral")


# ---------------------------------------------------------------------------
# continuous-case parameters

@dataclass(frozen=True)
class SupNormParams:
    log_x: float
    eps: float
    log_R: float
    T: float
    eta_R: float
    eta_xeps: float
    Bf_R: float
    q_value: float
    q_winner: str
    bound113: float
    lhs_first: float
    rhs_first: float
    lhs_second: float
    rhs_second: float
    eps_condition: bool
    feasible: bool
    choice: str

    @property
    def R(self):
        return math.exp(self.log_R) if self.log_R < 700 else math.inf


def _supnorm_record(spec, lx, eps, log_R, T, choice, led, P_max, cf):
    eta_R = eta(spec, log_y=log_R, P_max=P_max)
    eta_z = eta(spec, log_y=max(eps * lx, math.log(2.0)), P_max=P_max)
    Bf = B_f(spec, math.exp(min(log_R, 700.0)), P_max)
    q, winner = q_bound(spec, 1.0 / T, cf, led, P_max)
    bound = q + eps ** (1 / 6) * math.log(T * Bf / eps) + eta_R
    lhs1 = 2 * math.log(log_R) + 0.5 * T * T * eta_R + 7
    rhs1 = 0.25 * math.log(1 / eps)
    lhs2 = T * T * eta_z
    rhs2 = led["C_EPS"] * eps ** (1 / 3)
    feasible = lhs1 <= rhs1 and lhs2 <= rhs2 and log_R <= eps * lx and log_R >= math.log(3.0)
    return SupNormParams(
        lx, eps, log_R, T, eta_R, eta_z, Bf, q, winner, bound,
        lhs1, rhs1, lhs2, rhs2, eta_z <= eps ** (1 / 3), feasible, choice,
    )


def published_params(spec, x=None, c=1.0, log_x=None, constants=None, P_max=DEFAULT_P_MAX, cf=None):
    """Published choices for the two model families.

    LOGPOW[xi]: ``eps = 2/sqrt(log x)``, ``R = exp(c (log x)^(1/16))``,
    ``T = (log x)^(xi/32)``.  PPOW[xi]: same ``eps`` and ``R`` with
    ``log T = c (log x)^(1/24)``.
    """
    lx, _ = _resolve_log(x, log_x, "x", minimum=16.0)
    led = constants or ConstantsLedger()
    eps = 2.0 / math.sqrt(lx)
    log_R = max(c * lx ** (1 / 16), math.log(3.0))
    if spec.family is Family.LOGPOW:
        T = lx ** (spec.param / 32)
    elif spec.family is Family.PPOW:
        T = math.exp(c * lx ** (1 / 24))
    else:
        raise InvalidInputError("published choices exist for LOGPOW and PPOW only")
    return _supnorm_record(spec, lx, eps, log_R, max(T, 1.0), "published", led, P_max, cf)


def select_params_thm12(spec, x=None, log_x=None, constants=None, P_max=DEFAULT_P_MAX, cf=None):
    """Search ``(eps, R, T)`` satisfying both side conditions and
    minimizing the sup-norm bound.

    ``T`` is the largest value allowed by the two constraints for the given
    ``(eps, R)``; ``eps`` and ``log R`` run over log-spaced grids.  With no
    feasible point the degenerate point ``R = T = 3`` is returned with
    ``feasible=False``.
    """
    lx, _ = _resolve_log(x, log_x, "x", minimum=16.0)
    led = constants or ConstantsLedger()
    lo = 1.0 / math.sqrt(lx)
    best = None
    if lo < 0.5:
        for eps in np.exp(np.linspace(math.log(lo) + 1e-9, math.log(0.5), 24)):
            rhs1 = 0.25 * math.log(1 / eps)
            eta_z = eta(spec, log_y=max(eps * lx, math.log(2.0)), P_max=P_max)
            t2_second = led["C_EPS"] * eps ** (1 / 3) / eta_z if eta_z > 0 else math.inf
            hi_logR = eps * lx
            if hi_logR < math.log(3.0):
                continue
            for log_R in np.exp(np.linspace(math.log(math.log(3.0)), math.log(hi_logR), 24)):
                slack = rhs1 - 7 - 2 * math.log(log_R)
                if slack < 0:
                    continue
                eta_R = eta(spec, log_y=log_R, P_max=P_max)
                t2 = min(2 * slack / eta_R if eta_R > 0 else math.inf, t2_second)
                T = min(math.sqrt(t2), 1e12)
                if T < 1:
                    continue
                rec = _supnorm_record(spec, lx, eps, log_R, T, "search", led, P_max, None)
                if rec.feasible and (best is None or rec.bound113 < best.bound113):
                    best = rec
    if best is None:
        eps = min(2.0 / math.sqrt(lx), 0.5)
        return _supnorm_record(spec, lx, eps, math.log(3.0), 3.0, "degenerate", led, P_max, cf)
    if cf is not None:
        best = _supnorm_record(spec, lx, best.eps, best.log_R, best.T, "search", led, P_max, cf)
    return best


# ---------------------------------------------------------------------------
# level-set parameters

@dataclass(frozen=True)
class LevelSetParams:
    log_x: float
    k: int
    r: float
    v: float
    w: float
    T: float
    log_R: float
    eta_R: float
    Bf_R: float
    q_value: float
    q_winner: str
    sigma: float
    frakR: float
    feasible: bool
    violations: tuple
    choice: str

    @property
    def R(self):
        return math.exp(self.log_R)


def sigma_f(spec, R, r, x=None, log_x=None, P_max=DEFAULT_P_MAX):
    """``eta(R)^(r/(r+1)) + (log x)^(-r/(r+1))``."""
    lx, _ = _resolve_log(x, log_x, "x")
    e = r / (r + 1)
    return eta(spec, R, P_max) ** e + lx ** (-e)


def _levelset_record(spec, lx, k, v, T, log_R, choice, led, P_max, cf):
    llx = math.log(lx)
    r = k / llx
    w = v ** led["c1"]
    eta_R = eta(spec, log_y=log_R, P_max=P_max)
    eta_xw = eta(spec, log_y=w * lx, P_max=P_max)
    Bf = B_f(spec, math.exp(log_R), P_max)
    q, winner = q_bound(spec, 1.0 / T, cf, led, P_max)
    e = r / (r + 1)
    frak = q + (v + math.log(1 / v) / math.sqrt(k)) * math.log(T * Bf / v) + eta_R**e
    sigma = eta_R**e + lx ** (-e)
    viol = []
    if not 1 / llx <= v * (1 + 1e-12):
        viol.append("v < 1/log log x")
    if v > led["c0"]:
        viol.append("v > c0")
    if not (math.log(3.0) - 1e-12 <= log_R <= 1 / v):
        viol.append("R outside [3, e^(1/v)]")
    if T < 1:
        viol.append("T < 1")
    if T * T * eta_R > math.log(1 / v):
        viol.append("T^2 eta(R) > log(1/v)")
    if not T * T * eta_xw <= led["C_W"] * w:
        viol.append("T^2 eta(x^w) > C w")
    return LevelSetParams(lx, k, r, v, w, T, log_R, eta_R, Bf, q, winner, sigma, frak, not viol, tuple(viol), choice)


def select_params_thm13(spec, x=None, k=1, log_x=None, constants=None, P_max=DEFAULT_P_MAX, cf=None, choice="published"):
    """Parameters ``(v, w, T, R)`` and the level-set remainder.

    ``choice="published"`` uses ``v = 1/log log x``, ``R = log x``,
    ``T = (log log x)^(xi/2)`` (``xi = 1`` outside LOGPOW);
    ``choice="search"`` scans ``v`` and ``R`` for the smallest remainder
    among the points satisfying every side condition, falling back to the
    published point.
    """
    lx, _ = _resolve_log(x, log_x, "x", minimum=16.0)
    k = check_positive_int(k, "k")
    led = constants or ConstantsLedger()
    if not spec.is_strongly_additive:
        raise InvalidInputError("level-set bounds need a strongly additive spec")
    llx = math.log(lx)
    r = k / llx
    kap = led["kappa"]
    if not kap <= r <= 1 / kap:
        raise InvalidInputError(f"r = {r:.4g} outside [{kap}, {1 / kap}]")
    xi = spec.param if spec.family is Family.LOGPOW else 1.0
    published = _levelset_record(spec, lx, k, 1 / llx, max(llx ** (xi / 2), 1.0), math.log(lx), "published", led, P_max, cf)
    if choice == "published":
        return published
    if choice != "search":
        raise InvalidInputError(f"unknown choice {choice!r}")
    best = None
    if 1 / llx <= led["c0"]:
        for v in np.exp(np.linspace(math.log(1 / llx), math.log(led["c0"]), 12)):
            for log_R in np.exp(np.linspace(math.log(math.log(3.0)), math.log(1 / v), 12)):
                eta_R = eta(spec, log_y=log_R, P_max=P_max)
                T = math.sqrt(math.log(1 / v) / eta_R) if eta_R > 0 else 1e6
                rec = _levelset_record(spec, lx, k, v, max(T, 1.0), log_R, "search", led, P_max, None)
                if rec.feasible and (best is None or rec.frakR < best.frakR):
                    best = rec
    if best is None:
        return published
    return _levelset_record(spec, lx, k, best.v, best.T, best.log_R, "search", led, P_max, cf)


# ---------------------------------------------------------------------------
# mean values of multiplicative functions

@dataclass(frozen=True)
class MeanValueParams:
    a: float
    b: float
    A: float
    B: float
    rho: float
    delta: float
    eps: float
    c_g: int = 2

    def __post_init__(self):
        if not 0 < self.a <= 0.25:
            raise InvalidInputError("a must lie in (0, 1/4]")
        if not self.a <= self.b <= 0.5:
            raise InvalidInputError("b must lie in [a, 1/2]")
        if self.A < 2 * self.b:
            raise InvalidInputError("A must be >= 2b")
        if not 2 * self.b <= self.rho <= self.A:
            raise InvalidInputError("rho must lie in [2b, A]")
        if self.c_g not in (1, 2):
            raise InvalidInputError("c_g is 1 or 2")
        if not 0 < self.eps <= 0.5:
            raise InvalidInputError("eps must lie in (0, 1/2]")
        if not 0 < self.delta <= 2 * self.beta * self.b / (3 * self.c_g) * (1 + 1e-12):
            raise InvalidInputError("delta out of range")

    @property
    def h(self):
        return (1 - self.b) / self.b

    @property
    def beta(self):
        return mean_value_beta(self.b, self.A)


def mean_value_beta(b, A):
    """``1 - sin(2 pi b/A) / (2 pi b/A)``."""
    t = 2 * math.pi * b / A
    return 1.0 - math.sin(t) / t


def default_mean_value_params(x, r=1.0, B=None, complex_g=True):
    """Instantiation used for ``g = z^omega e^(i tau f_R)`` with ``|z| = r``:
    ``b = min(1, r)/2``, ``A = max(1, r)``, ``rho = r``, ``eps = 2/sqrt(log x)``
    capped at 1/2, and the largest admissible ``delta``."""
    lx = math.log(x)
    b = 0.5 * min(1.0, r)
    A = max(1.0, r)
    c_g = 2 if complex_g else 1
    beta = mean_value_beta(b, A)
    delta = 2 * beta * b / (3 * c_g)
    if B is None:
        B = r * _higher_power_log_sum(x)
    return MeanValueParams(a=min(0.25, b), b=b, A=A, B=max(B, 1e-12), rho=r, delta=delta,
                           eps=min(0.5, 2.0 / math.sqrt(lx)), c_g=c_g)


def _higher_power_log_sum(x):
    ps = primes_up_to(int(min(x, 10**7))).astype(float)
    lp = np.log(ps)
    # sum_{nu >= 2} nu p^-nu = (2p - 1) / (p (p - 1)^2)
    return math.fsum(lp * (2 * ps - 1) / (ps * (ps - 1) ** 2))


@dataclass(frozen=True)
class ConditionReport:
    growth_max: float
    growth_sum: float
    growth_ok: bool
    oscillation_lhs: float
    oscillation_rhs: float
    oscillation_ok: bool
    local_lhs: tuple
    local_rhs: tuple
    local_ok: bool
    density_lhs: tuple
    density_ok: bool

    @property
    def ok(self):
        return self.growth_ok and self.oscillation_ok and self.local_ok and self.density_ok

    def failures(self):
        names = ("growth", "oscillation", "local", "density")
        return [n for n in names if not getattr(self, n + "_ok")]


def check_thm21_conditions(params, spec, tau, x, z=1.0, constants=None):
    """Evaluate the conditions for ``g(n) = z^omega(n) e^(i tau f(n))`` and
    ``r(n) = |z|^omega(n)`` (``spec`` should already be truncated).

    With ``|z| = rho`` the last condition has left side exactly 0.
    """
    led = constants or ConstantsLedger()
    x = check_real(x, "x", low=3.0)
    ps = primes_up_to(int(x))
    pf = ps.astype(float)
    lp = np.log(pf)
    rz = abs(z)
    theta = math.atan2(complex(z).imag, complex(z).real)
    f = spec.values(ps, 1)
    gap = rz * (1.0 - np.cos(theta + tau * f))  # r(p) - Re g(p)
    g_max = rz
    g_sum = rz * _higher_power_log_sum(x)
    g_ok = g_max <= 2 * params.A and g_sum <= params.B * (1 + 1e-9)
    osc_lhs = math.fsum(gap / pf)
    osc_rhs = 0.5 * params.beta * params.b * math.log(1 / params.eps)
    lx = math.log(x)
    z_eps = x**params.eps
    loc_lhs, loc_rhs = [], []
    for ly in (params.eps * lx, 0.5 * lx, lx):
        sel = (pf > z_eps) & (lp <= ly + 1e-12)
        loc_lhs.append(math.fsum(gap[sel] ** params.h * lp[sel] / pf[sel]))
        loc_rhs.append(led["C_LOCAL"] * params.eps ** (params.c_g * params.delta * params.h) * ly)
    dens_lhs = []
    for ly in (params.eps * lx, 0.5 * lx, lx):
        sel = lp <= ly + 1e-12
        dens_lhs.append(abs(math.fsum((rz - params.rho) * lp[sel] / pf[sel])))
    dens_ok = all(v <= led["C_DENSITY"] * params.eps * ly for v, ly in zip(dens_lhs, (params.eps * lx, 0.5 * lx, lx)))
    return ConditionReport(
        g_max, g_sum, g_ok, osc_lhs, osc_rhs, osc_lhs <= osc_rhs,
        tuple(loc_lhs), tuple(loc_rhs), all(a <= b for a, b in zip(loc_lhs, loc_rhs)),
        tuple(dens_lhs), dens_ok,
    )


@dataclass(frozen=True)
class MeanValuePrediction:
    value: complex
    product: complex
    error_scale: float


def predicted_mean_value(params, spec, tau, x, z=1.0):
    """``e^(-gamma rho) x / (Gamma(rho) log x) prod_{p<=x} sum_{p^nu<=x} g(p^nu)/p^nu``
    for ``g = z^omega e^(i tau f)``, with the remainder scale
    ``eps^delta e^(Re Z(x; g))`` (same prefactor) reported separately."""
    x = check_real(x, "x", low=3.0)
    ps = primes_up_to(int(x))
    pf = ps.astype(float)
    local = np.ones(ps.size, dtype=complex)
    nu = 1
    cand = np.arange(ps.size)
    while cand.size:
        p_nu = pf[cand] ** nu
        fv = spec.values(ps[cand], nu)
        local[cand] += z * np.exp(1j * tau * fv) / p_nu
        nu += 1
        cand = cand[pf[cand] ** nu <= x]
    log_prod = complex(math.fsum(np.log(np.abs(local))), math.fsum(np.angle(local)))
    prod = np.exp(log_prod)
    lx = math.log(x)
    pref = math.exp(-EULER_GAMMA * params.rho) * x / (math.gamma(params.rho) * lx)
    Zre = math.fsum((z * np.exp(1j * tau * spec.values(ps, 1))).real / pf)
    scale = pref * params.eps**params.delta * math.exp(Zre)
    return MeanValuePrediction(pref * prod, prod, scale)


def predicted_pik(x, k):
    """``x e^(-gamma r) L^k G_0(r) / (k! log x)`` with ``L = sum_{p<=x} 1/(p-1)``,
    ``G_0(r) = e^(-r L) prod_{p<=x} (1 + r/(p-1))`` and ``r = k / log log x``."""
    x = check_real(x, "x", low=16.0)
    k = check_positive_int(k, "k")
    pf = primes_up_to(int(x)).astype(float)
    lx = math.log(x)
    r = k / math.log(lx)
    L = math.fsum(1.0 / (pf - 1.0))
    logG = -r * L + math.fsum(np.log1p(r / (pf - 1.0)))
    log_main = math.log(x) - EULER_GAMMA * r + k * math.log(L) + logG - math.lgamma(k + 1) - math.log(lx)
    return math.exp(log_main)


# ---------------------------------------------------------------------------
# CSV exports

def _fmt(v):
    return f"{v:.17g}"


def budget_csv_thm12(rows):
    """``rows``: iterable of ``(x, alpha, beta, SupNormParams, RateBreakdown)``."""
    buf = io.StringIO()
    buf.write("x,alpha,beta,eta_R,Bf_R,Rx,eps,R,T,bound113\n")
    for x, a, b, p, rate in rows:
        vals = (x, a, b, p.eta_R, p.Bf_R, rate.total, p.eps, p.R, p.T, p.bound113)
        buf.write(",".join(_fmt(float(v)) for v in vals) + "\n")
    return buf.getvalue()


def budget_csv_thm13(rows):
    buf = io.StringIO()
    buf.write("x,k,r,v,T,R,sigma,frakR\n")
    for x, p in rows:
        vals = (x, p.k, p.r, p.v, p.T, p.R, p.sigma, p.frakR)
        buf.write(",".join(_fmt(float(v)) for v in vals) + "\n")
    return buf.getvalue()
