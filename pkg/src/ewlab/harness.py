"""Verification experiments: sup-norm distances between empirical and
limiting laws, rate sweeps, mean-value and level-set checks."""

from dataclasses import dataclass, field
import io
import math

import numpy as np

from ._validation import InvalidInputError, check_positive_int, check_real
from .function_model import Family, classify
from .functionals import (
    ConstantsLedger,
    check_thm21_conditions,
    default_mean_value_params,
    predicted_mean_value,
    predicted_pik,
    rate_thm11,
    published_params,
    select_params_thm12,
    select_params_thm13,
)
from .limit_law import AtomicLimitLaw, CharacteristicFunction, InvertedLimitLaw, default_window
from .sieve import EmpiricalCdf, build_sieve, direct_mean_value, pi_k

MAX_GUARD = 0.1


def _fmt(v):
    return f"{float(v):.17g}"


class _StepLaw:
    """Distribution function of a finite list of atoms."""

    def __init__(self, positions, masses):
        order = np.argsort(positions, kind="stable")
        self.positions = np.asarray(positions, dtype=float)[order]
        self.cum = np.concatenate(([0.0], np.cumsum(np.asarray(masses, dtype=float)[order])))

    def predict(self, y):
        return self.cum[np.searchsorted(self.positions, y, side="right")]

    def cdf_left(self, y):
        return self.cum[np.searchsorted(self.positions, y, side="left")]

    def jump_points(self):
        return self.positions


def step_law(positions, masses=None):
    positions = np.atleast_1d(np.asarray(positions, dtype=float))
    if masses is None:
        masses = np.full(positions.size, 1.0 / positions.size)
    return _StepLaw(positions, masses)


def kolmogorov_distance(emp, law, guard=0.0):
    """``sup_y |F_x(y) - F(y)| + guard`` for a step function ``F_x``.

    Both one-sided limits are compared at every jump of ``F_x`` and, when
    the law exposes ``jump_points``, at every jump of ``F``; between
    consecutive jumps of both functions the difference is monotone for a
    continuous ``F`` and constant for a step ``F``, so this is the exact
    supremum up to the law's own evaluation error (``guard``).
    """
    guard = check_real(guard, "guard", low=0.0)
    if guard > MAX_GUARD:
        raise InvalidInputError(f"guard {guard:.3g} exceeds {MAX_GUARD}: distance would be meaningless")
    pts = emp.jump_points()
    if hasattr(law, "jump_points"):
        pts = np.union1d(pts, law.jump_points())
    law_left = getattr(law, "cdf_left", law.predict)
    right = np.abs(emp.predict(pts) - law.predict(pts))
    left = np.abs(emp.cdf_left(pts) - law_left(pts))
    d = float(max(right.max(initial=0.0), left.max(initial=0.0)))
    return min(d, 1.0) + guard


def brute_force_distance(emp, law, grid):
    """Reference sup over a dense grid including both one-sided limits."""
    g = np.asarray(grid, dtype=float)
    law_left = getattr(law, "cdf_left", law.predict)
    a = np.abs(np.asarray(emp.predict(g)) - np.asarray(law.predict(g))).max()
    b = np.abs(np.asarray(emp.cdf_left(g)) - np.asarray(law_left(g))).max()
    return float(max(a, b))


# ---------------------------------------------------------------------------
# convergence sweeps

@dataclass
class DistanceReport:
    spec_text: str
    mode: str
    x_grid: list
    distances: list
    bounds: list
    guards: list
    extra: dict = field(default_factory=dict)

    @property
    def ratios(self):
        return [d / b for d, b in zip(self.distances, self.bounds)]

    @property
    def C_hat(self):
        return max(self.ratios)

    @property
    def spread(self):
        r = self.ratios
        if max(r) == 0:
            return 1.0
        return max(r) / min(r) if min(r) > 0 else math.inf

    @property
    def stable(self):
        return self.spread < 3.0

    @property
    def slope(self):
        d = np.asarray(self.distances)
        if np.any(d <= 0):
            return 0.0
        return float(np.polyfit(np.log(self.x_grid), np.log(d), 1)[0])

    def nonincreasing(self, noise=1.5):
        d = self.distances
        return all(d[i + 1] <= noise * d[i] for i in range(len(d) - 1))

    def to_csv(self):
        buf = io.StringIO()
        cols = ["x", "D", "bound", "ratio", "guard"] + sorted(self.extra)
        buf.write(",".join(cols) + "\n")
        for i, x in enumerate(self.x_grid):
            row = [x, self.distances[i], self.bounds[i], self.ratios[i], self.guards[i]]
            row += [self.extra[c][i] for c in sorted(self.extra)]
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()


def _tables_for(spec, x_grid, table):
    if table is None:
        table = build_sieve(spec, int(max(x_grid)))
    if table.spec != spec:
        raise InvalidInputError("table was built for a different spec")
    return [table.prefix(int(x)) for x in x_grid]


def atomic_reference_law(spec, P_cut=10**6, M_cut=10**7):
    tail = "poisson" if spec.family in (Family.DYADIC_LOG, Family.DYADIC_POW) and not spec.overrides else "none"
    return AtomicLimitLaw(spec, P_cut, M_cut, tail=tail).fit()


def continuous_reference_law(spec, p_max=3 * 10**4, t_int=5e3):
    cf = CharacteristicFunction(spec, p_max)
    c, hw = default_window(spec, p_max=p_max)
    law = InvertedLimitLaw(cf, t_int=t_int, center=c, half_width=hw).fit()
    return cf, law


def convergence_sweep(spec, x_grid, mode="atomic", table=None, constants=None, law=None, cf=None,
                      params="published", published_c=1.0):
    """Kolmogorov distances ``D_x`` and theoretical bounds over ``x_grid``.

    ``mode="atomic"`` uses the enumerated atomic law and the rate of the
    atomic case; ``mode="continuous"`` inverts the characteristic function
    of ``f`` and uses the sup-norm bound of the continuous case with the
    parameters given by ``params`` (``"published"`` or ``"search"``).
    """
    x_grid = [int(check_positive_int(x, "x", minimum=16)) for x in x_grid]
    if len(x_grid) < 3 or any(b <= a for a, b in zip(x_grid, x_grid[1:])):
        raise InvalidInputError("x_grid must be increasing with at least 3 points")
    led = constants or ConstantsLedger()
    tables = _tables_for(spec, x_grid, table)
    dists, bounds, guards = [], [], []
    extra = {}
    if spec.family is Family.ZERO and not spec.overrides:
        law = step_law([0.0])
        for t in tables:
            dists.append(kolmogorov_distance(EmpiricalCdf.from_table(t), law))
            bounds.append(math.log(t.x) ** (-1 / 6))
            guards.append(0.0)
        return DistanceReport(spec.text(), mode, x_grid, dists, bounds, guards)
    if mode == "atomic":
        law = law or atomic_reference_law(spec)
        guard = law.error_budget_
        comps = {"alpha_term": [], "beta_term": [], "log_term": []}
        for t in tables:
            dists.append(kolmogorov_distance(EmpiricalCdf.from_table(t), law, guard))
            rate = rate_thm11(spec, t.x)
            for name in comps:
                comps[name].append(getattr(rate, name))
            bounds.append(led["C_RATE"] * rate.total)
            guards.append(guard)
        extra.update(comps)
    elif mode == "continuous":
        if law is None:
            cf, law = continuous_reference_law(spec)
        guard = law.error_
        for name in ("eps", "R", "T", "eta_R", "q_value", "lhs_first", "rhs_first"):
            extra[name] = []
        for t in tables:
            dists.append(kolmogorov_distance(EmpiricalCdf.from_table(t), law, guard))
            if params == "published":
                p = published_params(spec, t.x, c=published_c, constants=led, cf=cf)
            else:
                p = select_params_thm12(spec, t.x, constants=led, cf=cf)
            bounds.append(led["C_SUP"] * p.bound113)
            guards.append(guard)
            for name in extra:
                extra[name].append(getattr(p, name))
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")
    return DistanceReport(spec.text(), mode, x_grid, dists, bounds, guards, extra)


# ---------------------------------------------------------------------------
# mean values

@dataclass(frozen=True)
class MeanValueCheck:
    x: int
    tau: float
    R: float
    direct: complex
    predicted: complex
    deviation: float
    error_scale: float
    conditions_ok: bool
    failed_conditions: tuple
    passed: bool | None
    skipped: str | None


def verify_mean_value(spec, tau, R, x, table=None, constants=None, strict=False):
    """``|M(x; g) - prediction| / x`` for ``g = exp(i tau f_R)``.

    The deviation is always computed; the pass/fail verdict against the
    ledger-scaled remainder is only given when the side conditions hold.
    With ``strict=True`` a failed condition skips the comparison entirely.
    """
    led = constants or ConstantsLedger()
    x = check_positive_int(x, "x", minimum=16)
    tau = check_real(tau, "tau")
    fR = spec.truncate(R)
    params = default_mean_value_params(x, complex_g=tau != 0)
    cond = check_thm21_conditions(params, fR, tau, x, constants=led)
    if strict and not cond.ok:
        return MeanValueCheck(x, tau, R, math.nan, math.nan, math.nan, math.nan, False,
                              tuple(cond.failures()), None, "conditions failed: " + ", ".join(cond.failures()))
    t = table.prefix(x) if table is not None else build_sieve(spec, x)
    M, _ = direct_mean_value(t, "cf_twist", tau=tau, R=R)
    pred = predicted_mean_value(params, fR, tau, x)
    dev = float(abs(M - pred.value) / x)
    scale = led["C_MV"] * pred.error_scale / x
    passed = bool(dev <= scale) if cond.ok else None
    return MeanValueCheck(x, tau, R, M, pred.value, dev, scale, cond.ok, tuple(cond.failures()), passed, None)


# ---------------------------------------------------------------------------
# level sets

def levelset_consistency(table, k, tau, R=None, theta_points=64, r=None):
    """Residual between ``sum_{omega(n)=k} e^(i tau f_R(n))`` summed
    directly and extracted as the ``k``-th discrete Fourier coefficient of
    ``z -> S_R(x; tau, z)`` on the circle ``|z| = r``.

    Returns ``(residual, direct, extracted)``.
    """
    k = check_positive_int(k, "k", minimum=0)
    J = check_positive_int(theta_points, "theta_points", minimum=64)
    if J & (J - 1):
        raise InvalidInputError("theta_points must be a power of two")
    if table.max_omega >= J:
        raise InvalidInputError("aliasing: max omega >= theta_points")
    if r is None:
        r = max(k, 1) / math.log(math.log(max(table.x, 16)))
    if R is not None:
        f, _ = table.truncation_data(R)
        f = f[1:]
    else:
        f = table.population
    om = table.omega_population
    sel = om == k
    g = np.exp(1j * tau * f[sel])
    direct = complex(math.fsum(g.real), math.fsum(g.imag))
    S = np.empty(J, dtype=complex)
    for j in range(J):
        z = r * np.exp(2j * math.pi * j / J)
        S[j], _ = direct_mean_value(table, "levelset_twist", z=z, tau=tau, R=R)
    theta = 2 * math.pi * np.arange(J) / J
    extracted = complex(np.mean(S * np.exp(-1j * k * theta)) / r**k)
    return abs(extracted - direct), direct, extracted


@dataclass(frozen=True)
class PikCheck:
    x: int
    k: int
    observed: int
    predicted: float
    ratio: float
    tolerance: float
    passed: bool


def verify_pik_asymptotic(table, k, constants=None):
    """Observed ``pi_k(x)`` over the main term of its asymptotic formula."""
    led = constants or ConstantsLedger()
    x = table.x
    k = check_positive_int(k, "k")
    llx = math.log(math.log(x))
    r = k / llx
    if not led["kappa"] <= r <= 1 / led["kappa"]:
        raise InvalidInputError(f"r = {r:.4g} outside the admissible range")
    obs = pi_k(table, k)
    pred = predicted_pik(x, k)
    v = 1 / llx
    tol = led["C_PIK"] * (v + math.log(1 / v) / math.sqrt(k))
    ratio = obs / pred
    return PikCheck(x, k, obs, pred, ratio, tol, abs(ratio - 1) <= tol)


@dataclass
class LevelSetReport:
    spec_text: str
    x: int
    rows: list  # dicts with k, r, D, frakR, sigma, ratio, pi_obs, pi_pred, guard

    @property
    def C_hat(self):
        return max(row["ratio"] for row in self.rows)

    @property
    def spread(self):
        rs = [row["ratio"] for row in self.rows]
        if max(rs) == 0:
            return 1.0
        return max(rs) / min(rs) if min(rs) > 0 else math.inf

    def to_csv(self):
        cols = ["x", "k", "r", "D", "frakR", "sigma", "ratio", "pi_obs", "pi_pred", "guard"]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(self.x if c == "x" else row[c]) for c in cols) + "\n")
        return buf.getvalue()


def levelset_sweep(spec, table, k_list, constants=None, p_max=3 * 10**4, t_int=2e3, choice="published"):
    """Distance between the level-set law of ``f`` on ``omega(n) = k`` and
    the conditional limit law for ``r = k / log log x``, against the
    level-set remainder, for each ``k``."""
    led = constants or ConstantsLedger()
    x = table.x
    llx = math.log(math.log(x))
    rows = []
    zero = spec.family is Family.ZERO and not spec.overrides
    for k in k_list:
        r = k / llx
        emp = EmpiricalCdf.from_table(table, k)
        if zero:
            D, frak, sigma, guard = kolmogorov_distance(emp, step_law([0.0])), 0.0, 0.0, 0.0
            ratio = 0.0
        else:
            cf = CharacteristicFunction(spec, p_max, r=r)
            c, hw = default_window(spec, r=r, p_max=p_max)
            law = InvertedLimitLaw(cf, t_int=t_int, center=c, half_width=hw).fit()
            params = select_params_thm13(spec, x, k, constants=led, cf=cf, choice=choice)
            guard = law.error_
            D = kolmogorov_distance(emp, law, guard)
            frak = led["C_LEVEL"] * params.frakR
            sigma = params.sigma
            ratio = D / frak
        rows.append(dict(k=k, r=r, D=D, frakR=frak, sigma=sigma, ratio=ratio,
                         pi_obs=pi_k(table, k), pi_pred=predicted_pik(x, k), guard=guard))
    return LevelSetReport(spec.text(), x, rows)


def classify_report(spec, budgets=(10**4, 10**5, 10**6)):
    buf = io.StringIO()
    buf.write("budget,sum_min_square,sum_linear,sum_support,verdict\n")
    for b in budgets:
        c = classify(spec, b)
        buf.write(f"{b},{_fmt(c.sum_min_square)},{_fmt(c.sum_linear)},{_fmt(c.sum_support)},{c.verdict}\n")
    return buf.getvalue()
