"""Complex special functions: Hurwitz zeta, log-gamma, binomials, Pochhammer.

Everything is binary64.  Hurwitz zeta uses Euler-Maclaurin summation with a
Bernoulli table built once at import time; log-gamma uses the Stirling series
after an upward shift of the argument.
"""

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class NumericError(ArithmeticError):
    """Base class for numerical failures raised by this package."""


class PoleAt1(NumericError):
    pass


class ConvergenceFailure(NumericError):
    pass


class PoleAtNonpositiveInteger(NumericError):
    pass


@dataclass(frozen=True)
class Precision:
    rel_tol: float = 1e-12
    max_terms: int = 100000

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")


DEFAULT_PRECISION = Precision()
POLE_GUARD = 1e-8
CANCEL_RATIO = 1e3
N_BERNOULLI = 30


def _bernoulli_table(n):
    # Akiyama-Tanigawa, exact rationals; returns B_0..B_n with B_1 = -1/2
    out = []
    a = [Fraction(0)] * (n + 1)
    for m in range(n + 1):
        a[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        out.append(a[0])
    if n >= 1:
        out[1] = -out[1]
    return tuple(out)


_BERN = _bernoulli_table(2 * N_BERNOULLI + 2)
# B_{2r}/(2r)! as floats, r = 1..N_BERNOULLI
_EM_COEF = tuple(float(_BERN[2 * r] / math.factorial(2 * r))
                 for r in range(1, N_BERNOULLI + 1))
_EM_COEF_LD = tuple(np.longdouble(_BERN[2 * r].numerator)
                    / np.longdouble(_BERN[2 * r].denominator * math.factorial(2 * r))
                    for r in range(1, N_BERNOULLI + 1))
# Stirling coefficients B_{2r}/(2r(2r-1))
_STIRLING = tuple(float(_BERN[2 * r] / (2 * r * (2 * r - 1)))
                  for r in range(1, 16))


def bernoulli(n):
    """Exact Bernoulli number B_n (B_1 = -1/2) as a Fraction."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n < len(_BERN):
        return _BERN[n]
    return _bernoulli_table(n)[n]


def _as_complex_array(s):
    return np.asarray(s, dtype=complex)


def hurwitz_zeta(s, q, prec=DEFAULT_PRECISION):
    """Analytic continuation of sum_{j>=0} (j+q)^(-s).

    `s` may be a scalar or an array; `q` is a positive real scalar.  Returns a
    Python complex for scalar input and an ndarray otherwise.
    """
    q = float(q)
    if not q > 0.0:
        raise ValueError("q must be positive")
    sa = _as_complex_array(s)
    scalar = sa.ndim == 0
    sa = np.atleast_1d(sa)
    if np.any(np.abs(sa - 1.0) < POLE_GUARD):
        raise PoleAt1("hurwitz_zeta evaluated within the guard radius of s=1")

    # number of points N0 that must be summed directly so that the
    # Euler-Maclaurin tail converges quickly: (J+q) >= N0
    big = float(np.max(np.abs(sa.imag))) if sa.size else 0.0
    big_re = float(np.max(np.abs(sa.real))) if sa.size else 0.0
    n0 = max(6, math.ceil(math.hypot(big, big_re) / math.pi))
    J = max(0, n0 - int(math.floor(q)))
    while True:
        val, err, scale = _hurwitz_em(sa, q, J)
        bad = err > prec.rel_tol * np.maximum(np.abs(val), scale)
        if not np.any(bad):
            break
        if J >= prec.max_terms:
            raise ConvergenceFailure(
                "Euler-Maclaurin error estimate %.3g exceeds tolerance"
                % float(np.max(err / np.maximum(np.abs(val), scale))))
        J = min(prec.max_terms, 2 * J + 4)
    # Re s < 0 with small q: direct part and tail are both ~ N^{1-s} while the
    # value is small.  Redo those entries with the wider float type.
    lossy = scale > CANCEL_RATIO * np.abs(val)
    if np.any(lossy) and np.finfo(np.longdouble).eps < np.finfo(float).eps:
        val = val.copy()
        val[lossy] = _hurwitz_em(sa[lossy], q, J, np.clongdouble)[0]
    if scalar:
        return complex(val[0])
    return val


def _hurwitz_em(s, q, J, ctype=complex):
    rtype = np.float64 if ctype is complex else np.longdouble
    s = s.astype(ctype)
    if J > 0:
        base = rtype(q) + np.arange(J, dtype=rtype)
        logb = np.log(base)
        # direct part; rows over s, summed along j
        direct = np.exp(-np.outer(s, logb)).sum(axis=1)
    else:
        direct = np.zeros(s.shape, dtype=ctype)
    N = rtype(J) + rtype(q)
    logN = np.log(N)
    nmis = np.exp(-s * logN)  # N^{-s}
    tail = N * nmis / (s - 1.0) + 0.5 * nmis
    # Bernoulli corrections: B_{2r}/(2r)! (s)_{2r-1} N^{-s-2r+1}
    poch = s.copy()  # (s)_1
    term_pow = nmis / N  # N^{-s-1}
    err = np.full(s.shape, np.inf)
    corr = np.zeros(s.shape, dtype=complex)
    done = np.zeros(s.shape, dtype=bool)
    inv_n2 = 1.0 / (N * N)
    coef = _EM_COEF if ctype is complex else _EM_COEF_LD
    for r in range(1, N_BERNOULLI + 1):
        t = coef[r - 1] * poch * term_pow
        at = np.abs(t)
        corr = np.where(done, corr, corr + t)
        err = np.where(done, err, at)
        done |= at < 1e-17 * np.abs(direct + tail + corr)
        if np.all(done):
            break
        poch = poch * (s + 2 * r - 1) * (s + 2 * r)
        term_pow = term_pow * inv_n2
    else:
        # series exhausted: the next coefficient (from the exact table)
        # gives the first omitted term
        r = N_BERNOULLI + 1
        c = float(_BERN[2 * r] / math.factorial(2 * r))
        nxt = np.abs(c * poch * term_pow)
        err = np.where(done, err, nxt)
    val = direct + tail + corr
    scale = np.abs(nmis) * N
    if ctype is not complex:
        val = val.astype(complex)
    return val, err.astype(float), scale.astype(float)


def hurwitz_residue_check(q, radius=0.25, nodes=128):
    """Residue of s -> zeta(s, q) at s = 1 by the trapezoid rule on a circle."""
    th = 2.0 * np.pi * np.arange(nodes) / nodes
    z = radius * np.exp(1j * th)
    vals = hurwitz_zeta(1.0 + z, q)
    return float(np.real(np.mean(vals * z)))


def complex_binomial(s, m):
    """Generalized binomial coefficient s(s-1)...(s-m+1)/m!."""
    m = int(m)
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return 1.0 + 0j if isinstance(s, complex) else _one_like(s)
    if m > 64:
        # gamma-ratio form; exact zeros when s is a small nonnegative integer
        sc = complex(s)
        if sc.imag == 0.0 and sc.real == round(sc.real) and 0 <= sc.real < m:
            return 0j
        if sc.imag == 0.0 and sc.real == round(sc.real) and sc.real < 0:
            n = -int(round(sc.real))
            # binom(-n, m) = (-1)^m binom(n+m-1, m)
            return complex((-1) ** m * math.comb(n + m - 1, m))
        return cmath.exp(log_gamma(sc + 1) - log_gamma(sc - m + 1)
                         - math.lgamma(m + 1))
    out = _one_like(s)
    for i in range(m):
        out = out * (s - i) / (i + 1)
    return out


def _one_like(s):
    if isinstance(s, np.ndarray):
        return np.ones_like(s, dtype=np.result_type(s, float))
    return 1.0 + 0 * s


def binomial_series(s, nmax):
    """Array [binom(s, 0), ..., binom(s, nmax)] (s scalar or 1-d array)."""
    s = np.asarray(s)
    out = np.empty((nmax + 1,) + s.shape, dtype=np.result_type(s, float))
    out[0] = 1.0
    for i in range(nmax):
        out[i + 1] = out[i] * (s - i) / (i + 1)
    return out


def pochhammer(x, m):
    """Rising factorial x(x+1)...(x+m-1); pochhammer(x, 0) = 1."""
    m = int(m)
    if m < 0:
        raise ValueError("m must be nonnegative")
    out = _one_like(x)
    for i in range(m):
        out = out * (x + i)
    return out


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_SHIFT = 15.0


def log_gamma(z):
    """Principal branch of log Gamma(z), analytic off (-inf, 0].

    Accepts scalars or arrays.
    """
    za = np.asarray(z, dtype=complex)
    scalar = za.ndim == 0
    za = np.atleast_1d(za)
    re, im = za.real, za.imag
    if np.any((im == 0.0) & (re <= 0.0) & (re == np.round(re))):
        raise PoleAtNonpositiveInteger("log_gamma at a nonpositive integer")
    # shift so that |w| >= _SHIFT along the real direction
    target = np.where(np.abs(im) >= _SHIFT, 0.0, _SHIFT)
    nshift = np.ceil(np.maximum(target - re, 0.0)).astype(int)
    out = np.empty(za.shape, dtype=complex)
    for n in np.unique(nshift):
        sel = nshift == n
        w = za[sel] + n
        acc = _stirling(w)
        if n > 0:
            k = np.arange(n, dtype=float)
            acc = acc - np.log(za[sel][:, None] + k[None, :]).sum(axis=1)
        out[sel] = acc
    if scalar:
        return complex(out[0])
    return out


def _stirling(w):
    lw = np.log(w)
    acc = (w - 0.5) * lw - w + _HALF_LOG_2PI
    inv = 1.0 / w
    inv2 = inv * inv
    p = inv
    for c in _STIRLING:
        acc = acc + c * p
        p = p * inv2
    return acc


def gamma(z):
    """Gamma(z) through exp(log_gamma)."""
    return np.exp(log_gamma(z))
