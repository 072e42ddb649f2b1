"""Segmented sieve for additive functions and the empirical laws built on it.

For every ``n <= x`` the sieve returns ``f(n) = sum_{p^nu || n} f(p^nu)``
and ``omega(n)``.  Within a segment each small prime ``p <= sqrt(x)`` is
divided out completely (which yields ``nu``); what remains is 1 or a
prime larger than ``sqrt(x)``.  Contributions are added in increasing
prime order with Neumaier compensation, so the table does not depend on
the segment size.
"""

from dataclasses import dataclass, field
from functools import cached_property
import io
import math
import struct

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    EmptyTableError,
    InvalidInputError,
    UndefinedDistributionError,
    as_float_array,
    check_positive_int,
    check_real,
)
from .function_model import AdditiveFunctionSpec, parse_spec
from .primes import primes_up_to

SIEVE_MAGIC = b"EWSIEVE\x00"
SIEVE_VERSION = 1
DEFAULT_SEGMENT = 1 << 20
EXACT_CAP = 1 << 32


def _neumaier_add(acc, comp, where, v):
    a = acc[where]
    t = a + v
    comp[where] += np.where(np.abs(a) >= np.abs(v), (a - t) + v, (v - t) + a)
    acc[where] = t


def _sieve_segment(spec, lo, hi, small, small_tables):
    """f and omega for ``lo <= n < hi`` (lo >= 1)."""
    size = hi - lo
    rem = np.arange(lo, hi, dtype=np.int64)
    acc = np.zeros(size)
    comp = np.zeros(size)
    omega = np.zeros(size, dtype=np.int8)
    for p, table in zip(small, small_tables):
        if p >= hi:
            break
        start = (-lo) % p
        if start >= size:
            continue
        sl = slice(start, size, p)
        r = rem[sl] // p
        nu = np.ones(r.size, dtype=np.int64)
        mask = r % p == 0
        while mask.any():
            nu[mask] += 1
            r[mask] //= p
            mask[mask] = r[mask] % p == 0
        rem[sl] = r
        _neumaier_add(acc, comp, sl, table[nu])
        omega[sl] += 1
    big = np.flatnonzero(rem > 1)
    if big.size:
        _neumaier_add(acc, comp, big, spec.values(rem[big], 1))
        omega[big] += 1
    return acc + comp, omega


def _small_prime_tables(spec, x):
    small = primes_up_to(math.isqrt(x))
    tables = []
    for p in small:
        numax = int(math.log(x) / math.log(p)) + 1
        # index 0 unused
        tables.append(np.concatenate(([0.0], spec.values(np.full(numax, p), np.arange(1, numax + 1)))))
    return small, tables


def sieve_range(spec, lo, hi, segment_size=DEFAULT_SEGMENT, x_cap=None):
    """Yield ``(start, f, omega)`` blocks covering ``lo <= n <= hi``."""
    x_cap = hi if x_cap is None else x_cap
    small, tables = _small_prime_tables(spec, x_cap)
    start = lo
    while start <= hi:
        stop = min(start + segment_size, hi + 1)
        f, om = _sieve_segment(spec, start, stop, small, tables)
        yield start, f, om
        start = stop


def build_sieve(spec, x, segment_size=DEFAULT_SEGMENT):
    """Exact ``f(n)`` and ``omega(n)`` for ``1 <= n <= x``."""
    if isinstance(x, (int, np.integer)) and x == 0:
        raise EmptyTableError("x = 0 gives an empty table")
    x = check_positive_int(x, "x")
    segment_size = check_positive_int(segment_size, "segment_size", minimum=2)
    if x > EXACT_CAP:
        raise InvalidInputError("x above the exact cap; use stream_histogram")
    f = np.zeros(x + 1)
    om = np.zeros(x + 1, dtype=np.int8)
    for start, fs, oms in sieve_range(spec, 1, x, segment_size):
        f[start:start + fs.size] = fs
        om[start:start + oms.size] = oms
    return SieveTable(spec=spec, x=x, f_values=f, omega_values=om, segment_size=segment_size)


@dataclass(frozen=True, eq=False)
class SieveTable:
    """Per-n arrays; slot 0 is padding so that ``f_values[n] == f(n)``."""

    spec: AdditiveFunctionSpec
    x: int
    f_values: np.ndarray = field(repr=False)
    omega_values: np.ndarray = field(repr=False)
    segment_size: int = DEFAULT_SEGMENT

    def __post_init__(self):
        self.f_values.setflags(write=False)
        self.omega_values.setflags(write=False)

    @property
    def population(self):
        return self.f_values[1:]

    @property
    def omega_population(self):
        return self.omega_values[1:]

    @cached_property
    def sorted_values(self):
        out = np.sort(self.population)
        out.setflags(write=False)
        return out

    @cached_property
    def _level_index(self):
        # one lexsort serves every level set: blocks keyed by omega, sorted by f
        om = self.omega_population
        order = np.lexsort((self.population, om))
        counts = np.bincount(om, minlength=1)
        bounds = np.concatenate(([0], np.cumsum(counts)))
        return self.population[order], bounds

    def level_values(self, k):
        vals, bounds = self._level_index
        if k < 0 or k + 1 >= bounds.size:
            return vals[:0]
        return vals[bounds[k]:bounds[k + 1]]

    @property
    def max_omega(self):
        return int(self.omega_population.max())

    def prefix(self, x):
        """Table restricted to ``n <= x``."""
        x = check_positive_int(x, "x")
        if x > self.x:
            raise InvalidInputError("prefix beyond table")
        return SieveTable(self.spec, x, self.f_values[: x + 1], self.omega_values[: x + 1], self.segment_size)

    @cached_property
    def primes(self):
        return primes_up_to(self.x)

    # -- truncation --------------------------------------------------
    def bad_prime_powers(self, R):
        """Prime powers ``q = p^nu <= x`` zeroed by the truncation at R."""
        R = check_real(R, "R", low=3.0)
        ps = self.primes
        out = []
        nu = 1
        cand = ps
        while cand.size:
            q = cand.astype(np.int64) ** nu
            vals = self.spec.values(cand, nu)
            hit = (q > R) & (np.abs(vals) > 1.0)
            out.extend(zip(cand[hit].tolist(), [nu] * int(hit.sum()), vals[hit].tolist()))
            nu += 1
            cand = cand[cand.astype(float) ** nu <= self.x]
        return out

    def truncation_data(self, R):
        """``(f_R values, changed mask)``; the mask flags n with a truncated
        prime power ``p^nu || n``."""
        f = self.f_values.copy()
        changed = np.zeros(self.x + 1, dtype=bool)
        for p, nu, v in self.bad_prime_powers(R):
            q = p**nu
            idx = np.arange(q, self.x + 1, q)
            idx = idx[(idx // q) % p != 0]
            f[idx] -= v
            changed[idx] = True
        return f, changed


def empirical_cdf(table, y):
    """``(1/x) #{n <= x : f(n) <= y}``."""
    arr, scalar = as_float_array(y)
    out = np.searchsorted(table.sorted_values, arr, side="right") / table.x
    return float(out[0]) if scalar else out


def pi_k(table, k):
    k = check_positive_int(k, "k", minimum=0)
    return int(np.count_nonzero(table.omega_population == k))


def levelset_cdf(table, k, y):
    vals = table.level_values(check_positive_int(k, "k", minimum=0))
    if vals.size == 0:
        raise UndefinedDistributionError(f"empty level set omega = {k}")
    arr, scalar = as_float_array(y)
    out = np.searchsorted(vals, arr, side="right") / vals.size
    return float(out[0]) if scalar else out


class EmpiricalCdf(BaseEstimator):
    """Right-continuous empirical distribution function.

    Parameters
    ----------
    restriction : int, optional
        Level ``k`` the sample was restricted to (metadata only).
    """

    def __init__(self, restriction=None):
        self.restriction = restriction

    def fit(self, X, y=None):
        vals = np.sort(np.asarray(X, dtype=float).ravel())
        if vals.size == 0:
            raise UndefinedDistributionError("empty sample")
        self.sorted_values_ = vals
        self.sample_size_ = vals.size
        return self

    @classmethod
    def from_table(cls, table, k=None):
        obj = cls(restriction=k)
        vals = table.sorted_values if k is None else table.level_values(k)
        if vals.size == 0:
            raise UndefinedDistributionError(f"empty level set omega = {k}")
        obj.sorted_values_ = vals
        obj.sample_size_ = vals.size
        return obj

    def predict(self, y):
        check_is_fitted(self)
        arr, scalar = as_float_array(y)
        out = np.searchsorted(self.sorted_values_, arr, side="right") / self.sample_size_
        return float(out[0]) if scalar else out

    cdf = predict

    def cdf_left(self, y):
        check_is_fitted(self)
        arr, scalar = as_float_array(y)
        out = np.searchsorted(self.sorted_values_, arr, side="left") / self.sample_size_
        return float(out[0]) if scalar else out

    def jump_points(self):
        check_is_fitted(self)
        return np.unique(self.sorted_values_)


# ---------------------------------------------------------------------------
# direct multiplicative sums

def _g_values(table, kind, z=1.0, tau=0.0, R=None):
    """g(n) for n = 1..x as a complex array (slot 0 excluded)."""
    if R is not None:
        f, _ = table.truncation_data(R)
        f = f[1:]
    else:
        f = table.population
    om = table.omega_population
    if kind == "unit":
        return np.ones(table.x, dtype=complex)
    if kind == "omega_power":
        return np.power(complex(z), om.astype(np.int64))
    if kind == "cf_twist":
        return np.exp(1j * tau * f)
    if kind == "levelset_twist":
        return np.power(complex(z), om.astype(np.int64)) * np.exp(1j * tau * f)
    raise InvalidInputError(f"unknown g kind {kind!r}")


def direct_mean_value(table, kind="unit", z=1.0, tau=0.0, R=None):
    """``(M(x; g), Z(x; g))`` summed directly over the sieve.

    kind : ``unit``, ``omega_power`` (z^omega), ``cf_twist``
    (exp(i tau f_R)) or ``levelset_twist`` (z^omega exp(i tau f_R)).
    """
    g = _g_values(table, kind, z, tau, R)
    ps = table.primes
    M = complex(math.fsum(g.real), math.fsum(g.imag))
    gp = g[ps - 1] / ps
    Z = complex(math.fsum(gp.real), math.fsum(gp.imag))
    return M, Z


def omega_bucket_sums(table, tau=0.0, R=None):
    """``c_w = sum_{omega(n) = w} exp(i tau f_R(n))`` for w = 0..max omega."""
    g = _g_values(table, "cf_twist", tau=tau, R=R)
    om = table.omega_population
    return np.bincount(om, weights=g.real) + 1j * np.bincount(om, weights=g.imag)


def truncation_discrepancy(table, R):
    """Fraction of ``n <= x`` (overall and per level set) with
    ``f_R(n) != f(n)``.

    Returns ``(overall, {k: fraction})``.
    """
    _, changed = table.truncation_data(R)
    changed = changed[1:]
    om = table.omega_population
    overall = np.count_nonzero(changed) / table.x
    tot = np.bincount(om)
    bad = np.bincount(om, weights=changed.astype(float), minlength=tot.size)
    per = {k: float(bad[k] / tot[k]) for k in range(tot.size) if tot[k]}
    return overall, per


# ---------------------------------------------------------------------------
# persistence

def dump_table(table, fh):
    """Binary dump: magic, version, x, segment size, spec digest, spec
    text, then float64 f-values and int8 omega-values for n = 0..x."""
    text = table.spec.text().encode()
    fh.write(SIEVE_MAGIC)
    fh.write(struct.pack("<IQQ", SIEVE_VERSION, table.x, table.segment_size))
    fh.write(table.spec.digest())
    fh.write(struct.pack("<I", len(text)))
    fh.write(text)
    fh.write(np.ascontiguousarray(table.f_values, dtype="<f8").tobytes())
    fh.write(np.ascontiguousarray(table.omega_values, dtype="i1").tobytes())


def load_table(fh, spec=None):
    if fh.read(len(SIEVE_MAGIC)) != SIEVE_MAGIC:
        raise InvalidInputError("not a sieve dump")
    version, x, seg = struct.unpack("<IQQ", fh.read(20))
    if version != SIEVE_VERSION:
        raise InvalidInputError(f"unsupported dump version {version}")
    digest = fh.read(32)
    (n,) = struct.unpack("<I", fh.read(4))
    stored = parse_spec(fh.read(n).decode())
    if stored.digest() != digest:
        raise InvalidInputError("spec hash mismatch")
    if spec is not None and spec.digest() != digest:
        raise InvalidInputError("dump was built for a different spec")
    f = np.frombuffer(fh.read(8 * (x + 1)), dtype="<f8").astype(float)
    om = np.frombuffer(fh.read(x + 1), dtype="i1").astype(np.int8)
    if f.size != x + 1 or om.size != x + 1:
        raise InvalidInputError("truncated dump")
    return SieveTable(stored, int(x), f, om, int(seg))


def histogram(values, edges):
    """Counts of ``values`` in ``(edges[i-1], edges[i]]`` plus cumulative CDF."""
    edges = np.asarray(edges, dtype=float)
    cum = np.searchsorted(np.sort(values), edges, side="right")
    counts = np.diff(np.concatenate(([0], cum)))
    return counts, cum / len(values)


def stream_histogram(spec, x, edges, segment_size=DEFAULT_SEGMENT):
    """Histogram of f(n), n <= x, without retaining per-n values."""
    x = check_positive_int(x, "x")
    edges = np.asarray(edges, dtype=float)
    counts = np.zeros(edges.size, dtype=np.int64)
    for _, f, _ in sieve_range(spec, 1, x, segment_size):
        idx = np.searchsorted(edges, f, side="left")
        counts += np.bincount(idx, minlength=edges.size + 1)[: edges.size]
    return counts, np.cumsum(counts) / x


def histogram_csv(edges, counts, cdf):
    buf = io.StringIO()
    buf.write("y,count,cdf\n")
    for y, c, F in zip(edges, counts, cdf):
        buf.write(f"{y:.17g},{int(c)},{F:.17g}\n")
    return buf.getvalue()
