"""One-dimensional attracting germs at 0: parabolic models, polynomial jets,
hyperbolic linear maps.  Each germ knows how to iterate itself, its
displacement g = id - f and the inverse of g, and its Fatou coordinate.
"""

import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .specfun import NumericError


class DomainError(NumericError):
    pass


class NewtonFailure(NumericError):
    pass


class OutOfRange(NumericError):
    pass


class AccuracyWarning(UserWarning):
    """Raised (as a warning) when a Fatou coordinate fails the Abel test."""

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


@dataclass(frozen=True)
class FormalClass:
    k: int
    a: float
    rho: float

    def __post_init__(self):
        if self.k < 1 or not self.a > 0:
            raise ValueError("formal class needs k >= 1 and a > 0")


def _scalar_or_array(x, out):
    if np.ndim(x) == 0:
        return float(np.asarray(out).ravel()[0])
    return out


def solve_monotone(F, dF, target, lo, hi, guess, rtol=1e-14, maxiter=200,
                   newton_iters=50):
    """Vectorized safeguarded Newton for a monotone F on [lo, hi].

    Works in t = log x.  After `newton_iters` iterations every remaining
    point falls back to bisection.  `dF` returns dF/dx.
    """
    target = np.asarray(target, dtype=float)
    shape = target.shape
    tgt = np.atleast_1d(target).astype(float)
    tlo = np.log(np.broadcast_to(lo, tgt.shape)).astype(float).copy()
    thi = np.log(np.broadcast_to(hi, tgt.shape)).astype(float).copy()
    t = np.log(np.broadcast_to(guess, tgt.shape)).astype(float).copy()
    t = np.clip(t, tlo, thi)
    flo = F(np.exp(tlo)) - tgt
    fhi = F(np.exp(thi)) - tgt
    if np.any(np.sign(flo) * np.sign(fhi) > 0):
        raise OutOfRange("target outside the image of the bracket")
    incr = fhi >= flo
    active = np.ones(tgt.shape, dtype=bool)
    for it in range(maxiter):
        x = np.exp(t[active])
        fx = F(x) - tgt[active]
        up = (fx < 0) == incr[active]  # root lies above t
        tl, th = tlo[active], thi[active]
        tl = np.where(up, t[active], tl)
        th = np.where(up, th, t[active])
        tlo[active], thi[active] = tl, th
        if it < newton_iters:
            d = dF(x) * x
            with np.errstate(divide="ignore", invalid="ignore"):
                step = -fx / d
            tn = t[active] + step
            bad = ~np.isfinite(tn) | (tn < tl) | (tn > th)
            tn = np.where(bad, 0.5 * (tl + th), tn)
        else:
            tn = 0.5 * (tl + th)
        tn = np.where(fx == 0, t[active], tn)
        conv = (np.abs(tn - t[active]) <= rtol) | (fx == 0) | \
            ((th - tl) <= rtol)
        tt = t.copy()
        tt[active] = tn
        t = tt
        idx = np.flatnonzero(active)
        active[idx[conv]] = False
        if not active.any():
            break
    else:
        raise NewtonFailure("monotone solve did not converge")
    out = np.exp(t).reshape(shape)
    return out


class Germ:
    """Common interface.  Subclasses set `x_max` and implement the maps."""

    kind = "germ"
    x_max = 0.9
    parabolic = True

    def check_domain(self, x):
        xa = np.asarray(x, dtype=float)
        if np.any(~(xa > 0)) or np.any(xa > self.x_max * (1 + 1e-15)):
            raise DomainError("point outside (0, %r]" % self.x_max)

    # default implementations in terms of eval
    def iterate(self, x0, n):
        self.check_domain(x0)
        x = float(x0)
        for _ in range(int(n)):
            x = float(self.eval(x))
        return x

    def gap(self, x):
        return x - self.eval(x)

    def formal_class(self):
        raise NotImplementedError

    def default_fatou(self):
        return FatouCoordinate(self)


class ModelParabolic(Germ):
    """Time-one map of x' = -a x^{k+1} / (1 - a rho x^k).

    Its Fatou coordinate is Psi(x) = 1/(a k x^k) + rho log x.  With a = 1 this
    is the usual formal normal form of multiplicity k and residual invariant
    rho.
    """

    kind = "model"

    def __init__(self, k, rho=0.0, a=1.0):
        k = int(k)
        if k < 1 or not a > 0:
            raise ValueError("need k >= 1 and a > 0")
        self.k, self.rho, self.a = k, float(rho), float(a)
        if self.rho > 0:
            self.x_max = min(0.9, 0.5 * (self.a * self.rho) ** (-1.0 / k))
        else:
            self.x_max = 0.9

    def __repr__(self):
        return "ModelParabolic(k=%d, rho=%r, a=%r)" % (self.k, self.rho, self.a)

    @property
    def spec(self):
        s = "model:k=%d,rho=%r" % (self.k, self.rho)
        if self.a != 1.0:
            s += ",a=%r" % self.a
        return s

    def formal_class(self):
        return FormalClass(self.k, self.a, self.rho)

    # Fatou coordinate and its inverse
    def psi(self, x):
        x = np.asarray(x, dtype=float)
        out = 1.0 / (self.a * self.k * x ** self.k)
        if self.rho:
            out = out + self.rho * np.log(x)
        return _scalar_or_array(x, out)

    def dpsi(self, x):
        x = np.asarray(x, dtype=float)
        return -(1.0 - self.a * self.rho * x ** self.k) / (self.a * x ** (self.k + 1))

    def psi_inverse(self, y):
        y = np.asarray(y, dtype=float)
        k, a, rho = self.k, self.a, self.rho
        if np.any(y < self.psi(self.x_max) * (1 - 1e-14) - 1e-300):
            raise OutOfRange("Fatou value below Psi(x_max)")
        if rho == 0.0:
            return _scalar_or_array(y, (a * k * y) ** (-1.0 / k))
        # u = x^{-k} solves u/(a k) - (rho/k) log u = y; Newton in u is
        # nearly linear because the log term is a small perturbation
        u = a * k * np.atleast_1d(y).astype(float)
        u = np.maximum(u, self.x_max ** (-k))
        for _ in range(60):
            h = u / (a * k) - (rho / k) * np.log(u) - np.atleast_1d(y)
            dh = 1.0 / (a * k) - rho / (k * u)
            un = u - h / dh
            un = np.maximum(un, 0.5 * u)
            step = np.abs(un - u)
            u = un
            if np.all(step <= 2e-15 * u):
                break
        else:
            if np.any(step > 1e-13 * u):
                raise NewtonFailure("Fatou inversion stalled")
        x = u ** (-1.0 / k)
        return _scalar_or_array(y, x.reshape(np.shape(y)))

    # relative displacement r = g(x)/x, solved directly for accuracy
    def _rel_gap(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k, a, rho = self.k, self.a, self.rho
        akx = a * k * x ** k
        r = -np.expm1(-np.log1p(akx) / k)
        if rho == 0.0:
            return r
        for _ in range(60):
            lm = np.log1p(-r)
            phi = np.expm1(-k * lm) / akx + rho * lm - 1.0
            dphi = k * np.exp(-(k + 1) * lm) / akx - rho / (1.0 - r)
            rn = r - phi / dphi
            rn = np.clip(rn, 0.5 * r, 0.5 * (1.0 + r))
            step = np.abs(rn - r)
            r = rn
            if np.all(step <= 2e-15 * r):
                break
        else:
            if np.any(step > 1e-13 * r):
                raise NewtonFailure("displacement solve stalled")
        return r

    def eval(self, x):
        self.check_domain(x)
        xa = np.asarray(x, dtype=float)
        out = xa * (1.0 - self._rel_gap(xa).reshape(xa.shape))
        return _scalar_or_array(x, out)

    def gap(self, x):
        self.check_domain(x)
        xa = np.asarray(x, dtype=float)
        out = xa * self._rel_gap(xa).reshape(xa.shape)
        return _scalar_or_array(x, out)

    def dgap(self, x):
        # g' = 1 - f' and f'(x) = Psi'(x)/Psi'(f(x))
        fx = self.eval(x)
        return 1.0 - self.dpsi(x) / self.dpsi(fx)

    def iterate(self, x0, n):
        self.check_domain(x0)
        n = np.asarray(n, dtype=float)
        if np.any(n < 0):
            raise ValueError("n must be nonnegative")
        k, a = self.k, self.a
        if self.rho == 0.0:
            out = x0 / (1.0 + n * a * k * x0 ** k) ** (1.0 / k)
        else:
            out = self.psi_inverse(self.psi(x0) + n)
            out = np.where(n == 0, x0, out)
        return _scalar_or_array(n, out)

    def inverse_gap(self, y):
        ya = np.asarray(y, dtype=float)
        gmax = self.gap(self.x_max)
        if np.any(ya <= 0) or np.any(ya > gmax * (1 + 1e-13)):
            raise OutOfRange("y outside (0, gap(x_max)]")
        k, a = self.k, self.a
        if k == 1 and self.rho == 0.0:
            # a x^2/(1 + a x) = y
            out = (a * ya + np.sqrt(a * a * ya * ya + 4.0 * a * ya)) / (2.0 * a)
            return _scalar_or_array(y, out)
        out = _invert_gap(self, ya)
        return _scalar_or_array(y, out)


def _invert_gap(germ, y):
    y = np.atleast_1d(y).astype(float)
    guess = np.minimum((y / germ.a) ** (1.0 / (germ.k + 1)), germ.x_max)
    lo = 0.25 * guess
    for _ in range(60):
        bad = germ.gap(lo) > y
        if not bad.any():
            break
        lo = np.where(bad, 0.25 * lo, lo)
    hi = np.minimum(4.0 * guess, germ.x_max)
    return solve_monotone(germ.gap, germ.dgap, y, lo, hi, guess)


class Hyperbolic(Germ):
    """f(x) = a x with 0 < a < 1."""

    kind = "hyperbolic"
    parabolic = False
    x_max = 1.0

    def __init__(self, a):
        if not 0 < a < 1:
            raise ValueError("need 0 < a < 1")
        self.a = float(a)

    def __repr__(self):
        return "Hyperbolic(a=%r)" % self.a

    @property
    def spec(self):
        return "hyperbolic:a=%r" % self.a

    def eval(self, x):
        self.check_domain(x)
        return self.a * x

    def iterate(self, x0, n):
        self.check_domain(x0)
        return x0 * self.a ** np.asarray(n, dtype=float) if np.ndim(n) else \
            x0 * self.a ** float(n)

    def gap(self, x):
        self.check_domain(x)
        return (1.0 - self.a) * x

    def dgap(self, x):
        return (1.0 - self.a) + 0 * np.asarray(x, dtype=float)

    def inverse_gap(self, y):
        ya = np.asarray(y, dtype=float)
        if np.any(ya <= 0) or np.any(ya > (1 - self.a) * self.x_max * (1 + 1e-13)):
            raise OutOfRange("y outside (0, gap(x_max)]")
        return y / (1.0 - self.a)

    def psi(self, x):
        return np.log(x) / math.log(self.a)

    def dpsi(self, x):
        return 1.0 / (np.asarray(x, dtype=float) * math.log(self.a))

    def psi_inverse(self, y):
        return self.a ** np.asarray(y, dtype=float) if np.ndim(y) else self.a ** float(y)


class JetParabolic(Germ):
    """Polynomial germ f(x) = x - a x^{k+1} + sum_{i > k+1} c_i x^i.

    `coeffs` is the full coefficient list [0, 1, c_2, c_3, ...] of f.
    """

    kind = "jet"

    def __init__(self, coeffs, truncation_order=None):
        c = [float(v) for v in coeffs]
        if len(c) < 3 or c[0] != 0.0 or c[1] != 1.0:
            raise ValueError("jet must start 0 + 1*x + ...")
        k = next((i - 1 for i in range(2, len(c)) if c[i] != 0.0), None)
        if k is None or c[k + 1] >= 0:
            raise ValueError("leading nonlinear coefficient must be negative")
        self.coeffs = tuple(c)
        self.k = k
        self.a = -c[k + 1]
        self._poly = np.array(c[::-1])  # highest first for np.polyval
        self._dpoly = np.polyder(self._poly)
        self.x_max = self._find_domain()
        self.truncation_order = (k + 1) if truncation_order is None \
            else int(truncation_order)
        self._fatou_cache = {}

    def __repr__(self):
        return "JetParabolic(%r)" % (self.coeffs,)

    @property
    def spec(self):
        parts = ["c%d=%r" % (i, v) for i, v in enumerate(self.coeffs)
                 if i >= 2 and v != 0.0]
        return "jet:" + ",".join(parts)

    def _find_domain(self):
        xs = np.linspace(0.9 / 4000, 0.9, 4000)
        f = np.polyval(self._poly, xs)
        df = np.polyval(self._dpoly, xs)
        ok = (f > 0) & (f < xs) & (df > 0)
        if ok.all():
            return 0.9
        first_bad = np.argmin(ok)
        if first_bad == 0:
            raise ValueError("jet is not attracting near 0")
        return float(0.9 * xs[first_bad - 1])

    def formal_fatou(self, order=None):
        """(coefficients {p: d_p}, rho) of the truncated formal Fatou
        coordinate."""
        order = self.truncation_order if order is None else int(order)
        if order not in self._fatou_cache:
            self._fatou_cache[order] = _formal_fatou(self.coeffs, self.k, order)
        return self._fatou_cache[order]

    def formal_class(self):
        return FormalClass(self.k, self.a, self.formal_fatou()[1])

    def eval(self, x):
        self.check_domain(x)
        return np.polyval(self._poly, x)

    def deriv(self, x):
        return np.polyval(self._dpoly, x)

    def gap(self, x):
        self.check_domain(x)
        # x - f(x) = -(sum_{i>=2} c_i x^i), evaluated without cancellation
        c = self.coeffs
        xa = np.asarray(x, dtype=float)
        acc = np.zeros_like(xa)
        for ci in c[:1:-1]:
            acc = (acc + ci) * xa
        out = -acc * xa
        return _scalar_or_array(x, out)

    def dgap(self, x):
        return 1.0 - self.deriv(x)

    def iterate(self, x0, n):
        self.check_domain(x0)
        p = self.coeffs
        x = float(x0)
        for _ in range(int(n)):
            acc = 0.0
            for ci in p[:0:-1]:
                acc = (acc + ci) * x
            x = acc
        return x

    def inverse_gap(self, y):
        ya = np.asarray(y, dtype=float)
        gmax = self.gap(self.x_max)
        if np.any(ya <= 0) or np.any(ya > gmax * (1 + 1e-13)):
            raise OutOfRange("y outside (0, gap(x_max)]")
        out = _invert_gap(self, ya)
        return _scalar_or_array(y, out)

    # truncated asymptotic Fatou coordinate
    def psi_trunc(self, x, order=None):
        coef, rho = self.formal_fatou(order)
        x = np.asarray(x, dtype=float)
        out = rho * np.log(x)
        for p, d in coef.items():
            out = out + d * x ** p
        return out

    def dpsi_trunc(self, x, order=None):
        coef, rho = self.formal_fatou(order)
        x = np.asarray(x, dtype=float)
        out = rho / x
        for p, d in coef.items():
            out = out + p * d * x ** (p - 1)
        return out


def _series_mul(a, b, n):
    return np.convolve(a, b)[:n]


def _formal_fatou(coeffs, k, order):
    """Coefficients d_p (p = -k..order, p != 0) and rho of the formal Fatou
    coordinate sum d_p x^p + rho log x, solved order by order from
    Psi(f(x)) - Psi(x) = 1.
    """
    n = k + order + 2  # number of series terms kept in w
    c = np.zeros(n + 1)
    for i, v in enumerate(coeffs):
        if i < len(c):
            c[i] = v
    # f(x)/x = 1 + w(x), w as a series in x
    w = c[1:n + 1].copy()
    w[0] = 0.0
    powers = list(range(-k, 0)) + list(range(1, order + 1))

    def pow_series(p):
        # (1+w)^p - 1 via binomial series, truncated at n terms
        out = np.zeros(n)
        term = np.zeros(n)
        term[0] = 1.0
        coef = 1.0
        for m in range(1, n):
            term = _series_mul(term, w, n)
            coef = coef * (p - m + 1) / m
            if not term.any():
                break
            out += coef * term
        return out

    def log_series():
        out = np.zeros(n)
        term = np.zeros(n)
        term[0] = 1.0
        for m in range(1, n):
            term = _series_mul(term, w, n)
            if not term.any():
                break
            out += ((-1) ** (m + 1) / m) * term
        return out

    # D(x) = sum_p d_p x^p [(1+w)^p - 1] + rho log(1+w); coefficient of x^q
    contrib = {p: pow_series(p) for p in powers}
    logc = log_series()
    d = {p: 0.0 for p in powers}
    rho = 0.0
    # target: D = 1 + 0 x + ... ; unknown entering at order q is p = q - k
    for q in range(0, k + order + 1):
        p = q - k
        total = 0.0
        for pp, val in d.items():
            idx = q - pp
            if 0 <= idx < n:
                total += val * contrib[pp][idx]
        if 0 <= q < n:
            total += rho * logc[q]
        want = 1.0 if q == 0 else 0.0
        if p == 0:
            lead = logc[q]  # = -a
            rho = (want - total) / lead
        else:
            lead = contrib[p][q - p]  # = -a p
            d[p] = (want - total) / lead
    return d, rho


@dataclass(frozen=True)
class FatouCoordinate:
    germ: Germ
    truncation_order: int = None
    deep_iterates: int = None
    deep_threshold: float = 1e-3


def _deep_iterate_jet(germ, x, fc):
    """Push points below the threshold (or n* steps), tracking the count and
    the log-derivative of the composed map."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if fc.deep_iterates is not None:
        logd = np.zeros(x.shape)
        for _ in range(int(fc.deep_iterates)):
            logd += np.log(germ.deriv(x))
            x = np.polyval(germ._poly, x)
        return x, np.full(x.shape, int(fc.deep_iterates), dtype=np.int64), logd
    if x.size <= SCALAR_DEEP:
        out = [_deep_scalar(germ, float(v), fc.deep_threshold) for v in x.ravel()]
        y, n, logd = (np.array(col).reshape(x.shape) for col in zip(*out))
        return y, n.astype(np.int64), logd
    n = np.zeros(x.shape, dtype=np.int64)
    logd = np.zeros(x.shape)
    prod = np.ones(x.shape)
    step = 0
    while True:
        active = x >= fc.deep_threshold
        if not active.any():
            break
        d = np.polyval(germ._dpoly, x)
        x = np.where(active, np.polyval(germ._poly, x), x)
        prod = np.where(active, prod * d, prod)
        n += active
        step += 1
        if step % 1024 == 0:
            logd += np.log(prod)
            prod[:] = 1.0
    return x, n, logd + np.log(prod)


SCALAR_DEEP = 16


def _deep_scalar(germ, x, thr):
    # plain floats: far cheaper per step than numpy on a handful of points
    P = [float(c) for c in germ._poly]
    D = [float(c) for c in germ._dpoly]
    n = 0
    prod = 1.0
    logd = 0.0
    while x >= thr:
        d = D[0]
        for c in D[1:]:
            d = d * x + c
        p = P[0]
        for c in P[1:]:
            p = p * x + c
        prod *= d
        n += 1
        if n & 1023 == 0:
            logd += math.log(prod)
            prod = 1.0
        x = p
    return x, n, logd + math.log(prod)


def fatou_with_defect(fc, x):
    """(Psi(x), Abel defect |Psi(f(x)) - Psi(x) - 1|)."""
    g = fc.germ
    g.check_domain(x)
    if isinstance(g, JetParabolic):
        y, n, _ = _deep_iterate_jet(g, x, fc)
        o = fc.truncation_order
        val = g.psi_trunc(y, o) - n
        defect = np.abs(g.psi_trunc(np.polyval(g._poly, y), o)
                        - g.psi_trunc(y, o) - 1.0)
        val = val.reshape(np.shape(x))
        defect = defect.reshape(np.shape(x))
    else:
        val = g.psi(x)
        fx = g.eval(x)
        defect = np.abs(np.asarray(g.psi(fx)) - val - 1.0) / np.maximum(1.0, np.abs(val))
    return _scalar_or_array(x, val), _scalar_or_array(x, defect)


def fatou(fc, x):
    """Fatou coordinate Psi(x); warns with AccuracyWarning on a poor Abel
    defect."""
    if not isinstance(fc, FatouCoordinate):
        fc = FatouCoordinate(fc)
    g = fc.germ
    if isinstance(g, JetParabolic):
        val, defect = fatou_with_defect(fc, x)
        worst = float(np.max(defect))
        if worst > 1e-8:
            warnings.warn(AccuracyWarning(
                "Abel defect %.3g exceeds 1e-8" % worst, worst))
        return val
    g.check_domain(x)
    return g.psi(x)


def _dfatou(fc, x):
    g = fc.germ
    if isinstance(g, JetParabolic):
        y, _, logd = _deep_iterate_jet(g, x, fc)
        return (g.dpsi_trunc(y, fc.truncation_order) * np.exp(logd)).reshape(np.shape(x))
    return g.dpsi(x)


def fatou_inverse(fc, y):
    """Psi^{-1}(y) on (0, x_max]."""
    if not isinstance(fc, FatouCoordinate):
        fc = FatouCoordinate(fc)
    g = fc.germ
    if not isinstance(g, JetParabolic):
        return g.psi_inverse(y)
    ya = np.asarray(y, dtype=float)
    top = fatou(fc, g.x_max)
    if np.any(ya < top - 1e-12 * abs(top)):
        raise OutOfRange("Fatou value below Psi(x_max)")
    # leading-order guess from 1/(a k x^k)
    guess = np.minimum((g.a * g.k * np.maximum(ya, 1e-300)) ** (-1.0 / g.k),
                       g.x_max)
    out = solve_monotone(lambda x: fatou(fc, x), lambda x: _dfatou(fc, x),
                         ya, 1e-12 + 0 * ya, g.x_max, guess, rtol=1e-14)
    return _scalar_or_array(y, out)


def continuous_iterate(fc, x0, t):
    """Psi^{-1}(Psi(x0) + t)."""
    if not isinstance(fc, FatouCoordinate):
        fc = FatouCoordinate(fc)
    if np.ndim(t) == 0 and t == 0:
        return float(x0)
    return fatou_inverse(fc, fatou(fc, x0) + np.asarray(t, dtype=float))


# functional aliases for the operation names
def eval_germ(germ, x):
    return germ.eval(x)


def iterate(germ, x0, n):
    return germ.iterate(x0, n)


def gap(germ, x):
    return germ.gap(x)


def inverse_gap(germ, y):
    return germ.inverse_gap(y)


_SPEC_RE = re.compile(r"^\s*(\w+)\s*:(.*)$")


def parse_germ(spec):
    """Parse `model:k=1,rho=0`, `hyperbolic:a=0.5` or `jet:c2=-1,c3=0.3`."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise ValueError("germ spec must look like kind:key=value,...")
    kind = m.group(1).lower()
    params = {}
    for item in filter(None, (p.strip() for p in m.group(2).split(","))):
        if "=" not in item:
            raise ValueError("bad germ parameter %r" % item)
        key, val = item.split("=", 1)
        params[key.strip()] = float(val)
    if kind == "model":
        if "k" not in params:
            raise ValueError("model germ needs k")
        extra = set(params) - {"k", "rho", "a"}
        if extra:
            raise ValueError("unknown model parameters %s" % sorted(extra))
        k = params["k"]
        if k != int(k):
            raise ValueError("k must be an integer")
        return ModelParabolic(int(k), params.get("rho", 0.0), params.get("a", 1.0))
    if kind == "hyperbolic":
        if set(params) != {"a"}:
            raise ValueError("hyperbolic germ takes exactly a")
        return Hyperbolic(params["a"])
    if kind == "jet":
        idx = {}
        for key, val in params.items():
            if not re.fullmatch(r"c\d+", key):
                raise ValueError("jet parameters are c2, c3, ...")
            idx[int(key[1:])] = val
        if not idx or min(idx) < 2:
            raise ValueError("jet parameters are c2, c3, ...")
        coeffs = [0.0, 1.0] + [0.0] * (max(idx) - 1)
        for i, v in idx.items():
            coeffs[i] = v
        return JetParabolic(coeffs)
    raise ValueError("unknown germ kind %r" % kind)
