"""Orbits, fractal strings and tube functions.

The (inner) tube function of an orbit x_0 > x_1 > ... is

    V(eps) = x_{n_eps} + 2 eps n_eps,

with n_eps the first index whose gap g(x_n) = x_n - x_{n+1} drops below
2 eps.  Its continuous-time counterpart replaces n_eps by the Fatou time
tau_eps at which g = 2 eps exactly.  Samples of V on (0, delta] and their
iterated primitives feed the tube zeta function.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .germs import (FatouCoordinate, Hyperbolic, JetParabolic, ModelParabolic,
                    fatou)
from .specfun import NumericError


class EpsTooLarge(NumericError):
    pass


class OrbitTooShort(NumericError):
    pass


class GridTooCoarse(NumericError):
    pass


class NearDiscontinuity(UserWarning):
    pass


TIE_BAND = 1e-12


@dataclass(frozen=True, eq=False)
class Orbit:
    germ: object
    x0: float
    points: np.ndarray
    cutoff: float
    n_max: int
    stop: str  # "cutoff" or "n_max"

    def __len__(self):
        return len(self.points)

    @property
    def gaps(self):
        """g(x_n) for every stored point (the last one looks one step past
        the stored orbit)."""
        return self._cache("gaps", lambda: np.asarray(self.germ.gap(self.points)))

    @property
    def eps_n(self):
        return self._cache("eps_n", lambda: 0.5 * self.gaps)

    @property
    def lengths(self):
        return self.gaps[:-1]

    def _cache(self, key, fn):
        store = self.__dict__.setdefault("_memo", {})
        if key not in store:
            store[key] = fn()
        return store[key]


def build_orbit(germ, x0, cutoff, n_max=10 ** 7):
    """Points x_n = f^n(x0) while x_n > cutoff, at most n_max + 1 of them."""
    germ.check_domain(x0)
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    x0 = float(x0)
    if isinstance(germ, (ModelParabolic, Hyperbolic)):
        if cutoff >= x0:
            n_need = 0
        else:
            n_need = int(math.ceil(germ.psi(cutoff) - germ.psi(x0))) + 1
        n = min(n_need, n_max)
        pts = np.asarray(germ.iterate(x0, np.arange(n + 1, dtype=float)),
                         dtype=float)
        pts[0] = x0
        keep = pts > cutoff
        keep[0] = True
        cut = int(np.argmin(keep)) if not keep.all() else len(pts)
        pts = pts[:cut]
        stop = "cutoff" if cut <= n else "n_max"
        if stop == "n_max" and len(pts) > n_max + 1:
            pts = pts[:n_max + 1]
    else:
        out = [x0]
        x = x0
        stop = "n_max"
        coeffs = germ.coeffs if isinstance(germ, JetParabolic) else None
        while len(out) <= n_max:
            if coeffs is not None:
                acc = 0.0
                for ci in coeffs[:0:-1]:
                    acc = (acc + ci) * x
                x = acc
            else:
                x = float(germ.eval(x))
            if not x > cutoff:
                stop = "cutoff"
                break
            out.append(x)
        pts = np.array(out)
    return Orbit(germ, x0, pts, float(cutoff), int(n_max), stop)


def eps_cutoff(germ, x0, eps_min):
    """Cutoff keeping the first orbit point with gap <= 2 eps_min: that point
    lies in (f(xc), xc] where g(xc) = 2 eps_min."""
    y = min(2.0 * eps_min, float(germ.gap(x0)))
    xc = float(germ.inverse_gap(y))
    return 0.999 * float(germ.eval(xc))


def orbit_for_eps(germ, x0, eps_min, n_max=10 ** 8):
    """An orbit long enough for tube evaluation down to eps_min."""
    return build_orbit(germ, x0, eps_cutoff(germ, x0, eps_min), n_max)


@dataclass(frozen=True)
class FractalString:
    """Gap sequence of an orbit; the germ is kept so the tail can be
    continued analytically past the stored lengths."""
    lengths: np.ndarray
    tail_model: tuple  # (k, a); k = 0 marks a geometric (hyperbolic) tail
    germ: object = None
    x0: float = None

    @classmethod
    def from_orbit(cls, orbit):
        g = orbit.germ
        if isinstance(g, Hyperbolic):
            tail = (0, g.a)
        else:
            tail = (g.k, g.a)
        return cls(np.asarray(orbit.lengths), tail, g, orbit.x0)


# ---------------------------------------------------------------- tube ---

def _check_eps(orbit, eps):
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    if np.any(eps > orbit.eps_n[0] * (1 + TIE_BAND)):
        raise EpsTooLarge("eps exceeds eps_0 = g(x0)/2")
    return eps


def critical_index(orbit, eps):
    """n_eps: first n with g(x_n) < 2 eps; equals n when eps = eps_n."""
    e = _check_eps(orbit, eps)
    en = orbit.eps_n
    # eps_n is decreasing; count the eps_j lying strictly above the band
    neg = -en
    cnt = np.searchsorted(neg, -e * (1 + TIE_BAND), side="left")
    if np.any(cnt >= len(en)):
        raise OrbitTooShort("orbit ends before the gaps fall below 2 eps")
    return int(cnt) if np.ndim(eps) == 0 else cnt


def tube_length(orbit, eps):
    """V(eps) = x_{n_eps} + 2 eps n_eps."""
    n = critical_index(orbit, eps)
    e = np.asarray(eps, dtype=float)
    out = orbit.points[n] + 2.0 * e * n
    return float(out) if np.ndim(eps) == 0 else out


def tube_length_union(orbit, eps):
    """Measure of the union of (x_j - eps, x_j + eps) inside [0, x0], by
    merging sorted intervals.  Slow reference implementation."""
    eps = float(eps)
    n = critical_index(orbit, eps)
    # points beyond the orbit tail lie in [0, x_n]; the union covers it
    pts = orbit.points[:n + 1][::-1]
    lo = np.clip(pts - eps, 0.0, orbit.x0)
    hi = np.clip(pts + eps, 0.0, orbit.x0)
    lo[0] = 0.0  # everything below x_n is covered by the accumulating tail
    total = 0.0
    cur_lo, cur_hi = lo[0], hi[0]
    for a, b in zip(lo[1:], hi[1:]):
        if a <= cur_hi:
            cur_hi = max(cur_hi, b)
        else:
            total += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
    total += cur_hi - cur_lo
    return total


def sawtooth_G(s):
    """G(s) = 0 at integers, 1 - frac(s) otherwise."""
    s = np.asarray(s, dtype=float)
    fr = s - np.floor(s)
    out = np.where(fr == 0.0, 0.0, 1.0 - fr)
    return float(out) if out.ndim == 0 else out


def _fc(fc):
    return fc if isinstance(fc, FatouCoordinate) else FatouCoordinate(fc)


def continuous_critical_time(fc, x0, eps):
    """tau_eps = Psi(g^{-1}(2 eps)) - Psi(x0)."""
    fc = _fc(fc)
    g = fc.germ
    e = np.asarray(eps, dtype=float)
    e0 = 0.5 * float(g.gap(x0))
    if np.any(e <= 0) or np.any(e > e0 * (1 + TIE_BAND)):
        raise EpsTooLarge("eps outside (0, eps_0]")
    y = np.minimum(2.0 * e, 2.0 * e0)
    x = g.inverse_gap(y)
    tau = np.asarray(fatou(fc, x)) - fatou(fc, x0)
    tau = np.maximum(tau, 0.0)
    return float(tau) if np.ndim(eps) == 0 else tau


def tube_length_continuous(fc, x0, eps):
    """V^c(eps) = g^{-1}(2 eps) + 2 eps tau_eps."""
    fc = _fc(fc)
    g = fc.germ
    e = np.asarray(eps, dtype=float)
    tau = continuous_critical_time(fc, x0, e)
    e0 = 0.5 * float(g.gap(x0))
    x = g.inverse_gap(np.minimum(2.0 * e, 2.0 * e0))
    out = x + 2.0 * e * tau
    return float(out) if np.ndim(eps) == 0 else out


def bridge_check(orbit, fc, eps):
    """|n_eps - tau_eps - G(tau_eps)|.

    Within 1e-9 (relative) of some eps_n the convention G = 0 is applied and
    a NearDiscontinuity warning is issued.
    """
    n = critical_index(orbit, eps)
    tau = continuous_critical_time(fc, orbit.x0, eps)
    en = orbit.eps_n
    j = min(int(np.argmin(np.abs(en[max(n - 1, 0):n + 2] - eps))) + max(n - 1, 0),
            len(en) - 1)
    if abs(en[j] - eps) <= 1e-9 * eps:
        warnings.warn(NearDiscontinuity("eps within 1e-9 of eps_%d" % j))
        return abs(n - tau)
    return abs(n - tau - sawtooth_G(tau))


# ------------------------------------------------------------- samples ---

@dataclass(frozen=True)
class TailTerm:
    """coef * t^alpha * sum_i poly[i] (log t)^i."""
    alpha: float
    poly: tuple

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lt = np.log(t)
        return t ** self.alpha * np.polyval(self.poly[::-1], lt)

    def primitive(self):
        """Term for the integral from 0 (requires alpha > -1)."""
        # integral of t^a P(log t) = t^{a+1} Q(log t), (a+1) Q + Q' = P
        return TailTerm(self.alpha + 1.0, tuple(_solve_q(self.poly, self.alpha + 1.0)))

    def mellin(self, beta, delta):
        """Analytic continuation of int_0^delta t^beta (term) dt."""
        c = self.alpha + beta + 1.0
        q = _solve_q(self.poly, c)
        ld = math.log(delta)
        return delta ** c * sum(qi * ld ** i for i, qi in enumerate(q))


def _solve_q(p, c):
    # Q with c Q + Q' = P for polynomials in log t (ascending coefficients)
    n = len(p)
    q = [0j] * n if isinstance(c, complex) else [0.0] * n
    for i in range(n - 1, -1, -1):
        nxt = (i + 1) * q[i + 1] if i + 1 < n else 0.0
        q[i] = (p[i] - nxt) / c
    return q


@dataclass(eq=False)
class TubeSamples:
    """Samples of a tube-type function on an increasing grid.

    `stack[j]` holds the j-th primitive at the nodes (stack[0] = values of the
    function itself).  Between nodes the base function is linear; below
    eps[0] it is replaced by the tail model sum(tail).  `exact` records that
    the base function is piecewise linear with kinks only at nodes.
    """
    eps: np.ndarray
    value: np.ndarray
    kind: str = "V"
    tail: tuple = ()
    exact: bool = False
    stack: list = field(default=None)
    error: float = 0.0
    dim_hint: float = None

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.stack is None:
            self.stack = [self.value]
        if np.any(np.diff(self.eps) <= 0):
            raise ValueError("eps grid must be increasing")

    @property
    def order(self):
        return len(self.stack) - 1

    def to_csv(self):
        lines = ["eps,value,kind"]
        for e, v in zip(self.eps, self.value):
            lines.append("%.17g,%.17g,%s" % (e, v, self.kind))
        return "\n".join(lines) + "\n"

    def local_poly(self, m, i, tau):
        """m-th primitive at eps[i] + tau (0 <= tau <= h_i), exact for the
        piecewise linear base."""
        st = self.stack
        h = self.eps[i + 1] - self.eps[i]
        v0, v1 = st[0][i], st[0][i + 1]
        out = 0.0
        for j in range(m):
            out = out + st[m - j][i] * tau ** j / math.factorial(j)
        out = out + v0 * tau ** m / math.factorial(m)
        out = out + (v1 - v0) / h * tau ** (m + 1) / math.factorial(m + 1)
        return out

    def tail_value(self, t, m=0):
        tail = self.tail
        for _ in range(m):
            tail = tuple(tt.primitive() for tt in tail)
        return sum((tt(t) for tt in tail), 0.0 * np.asarray(t, dtype=float))


def eps_grid(eps_min, eps_max, per_decade=400):
    n = max(2, int(round(per_decade * math.log10(eps_max / eps_min))) + 1)
    return np.geomspace(eps_min, eps_max, n)


def tube_samples(orbit, eps, continuous=False):
    """Plain samples of V (or V^c) at the given eps values."""
    eps = np.sort(np.asarray(eps, dtype=float))
    if continuous:
        val = tube_length_continuous(FatouCoordinate(orbit.germ), orbit.x0, eps)
        kind = "Vc"
    else:
        val = tube_length(orbit, eps)
        kind = "V"
    return TubeSamples(eps, val, kind)


def default_tail_basis(germ):
    """Exponent/log-power pairs of the leading tube terms."""
    if isinstance(germ, Hyperbolic):
        return [(1.0, 0), (1.0, 1)]
    k = germ.k
    basis = [(j / (k + 1.0), 0) for j in range(1, k + 2)]
    basis.append((1.0, 1))
    basis.append(((k + 2.0) / (k + 1.0), 0))
    return basis


def fit_tail(eps, value, basis, decades=2.0):
    """Least-squares tail terms from the lowest `decades` of the samples."""
    eps = np.asarray(eps)
    sel = eps <= eps[0] * 10 ** decades
    e, v = eps[sel], np.asarray(value)[sel]
    w = e ** (-min(b[0] for b in basis))
    A = np.column_stack([e ** al * np.log(e) ** p for al, p in basis])
    scale = np.linalg.norm(A * w[:, None], axis=0)
    coef, *_ = np.linalg.lstsq(A * w[:, None] / scale, v * w, rcond=None)
    coef = coef / scale
    terms = []
    for (al, p), c in zip(basis, coef):
        poly = [0.0] * (p + 1)
        poly[p] = float(c)
        terms.append(TailTerm(float(al), tuple(poly)))
    return tuple(terms)


def tube_samples_exact(orbit, eps_min, delta=1.0, per_decade_above=64,
                       tail_basis=None, tail=None, max_ratio=1.02):
    """Samples of V on [eps_min, delta] whose nodes include every kink eps_n,
    so linear interpolation reproduces V exactly.  Above eps_0 the relative
    tube equals x0.  The tail below eps_min is fitted unless given."""
    en = orbit.eps_n
    e0 = en[0]
    if eps_min >= e0:
        raise ValueError("eps_min must lie below eps_0")
    if en[-1] >= eps_min:
        raise OrbitTooShort("orbit does not reach eps_min")
    kinks = en[en > eps_min][::-1]
    nodes = np.concatenate([[eps_min], kinks])
    # refine wide cells so that each cell has ratio <= max_ratio
    ratios = nodes[1:] / nodes[:-1]
    if np.any(ratios > max_ratio):
        pieces = [nodes[:1]]
        for lo, hi, r in zip(nodes[:-1], nodes[1:], ratios):
            cnt = int(math.ceil(math.log(r) / math.log(max_ratio)))
            if cnt > 1:
                pieces.append(np.geomspace(lo, hi, cnt + 1)[1:])
            else:
                pieces.append([hi])
        nodes = np.concatenate(pieces)
    vals = tube_length(orbit, np.minimum(nodes, e0))
    if delta > e0:
        cnt = max(2, int(math.ceil(per_decade_above * math.log10(delta / e0))))
        above = np.geomspace(e0, delta, cnt + 1)[1:]
        nodes = np.concatenate([nodes, above])
        vals = np.concatenate([vals, np.full(above.shape, orbit.x0)])
    else:
        keep = nodes <= delta
        nodes, vals = nodes[keep], vals[keep]
        if nodes[-1] < delta:
            nodes = np.append(nodes, delta)
            vals = np.append(vals, tube_length(orbit, delta))
    if tail is None:
        basis = default_tail_basis(orbit.germ) if tail_basis is None else tail_basis
        tail = fit_tail(nodes, vals, basis)
    dim = None
    if not isinstance(orbit.germ, Hyperbolic):
        dim = orbit.germ.k / (orbit.germ.k + 1.0)
    else:
        dim = 0.0
    return TubeSamples(nodes, vals, "V", tuple(tail), True, dim_hint=dim)


def primitive_samples(samples, m, rtol=1e-6):
    """m-th iterated primitive V^{[m]}(t) = int_0^t ... of the samples.

    The base is integrated exactly as a piecewise linear function; the part
    below the first node comes from the tail model.  For non-exact samples a
    Richardson estimate (full grid against every other node) is attached;
    GridTooCoarse if it exceeds `rtol`.
    """
    m = int(m)
    if m < 1:
        raise ValueError("m must be positive")
    stack = _primitive_stack(samples.eps, samples.value, samples.tail, m)
    err = 0.0
    if not samples.exact and len(samples.eps) > 4:
        half = _primitive_stack(samples.eps[::2], samples.value[::2],
                                samples.tail, m)
        diff = np.abs(stack[m][::2] - half[m])
        err = float(np.max(diff / np.maximum(np.abs(stack[m][::2]), 1e-300))) / 3.0
        if err > rtol:
            raise GridTooCoarse("primitive error estimate %.3g" % err)
    out = TubeSamples(samples.eps, stack[m], "P%d" % m, samples.tail,
                      samples.exact, stack, err, samples.dim_hint)
    return out


def _primitive_stack(eps, val, tail, m):
    h = np.diff(eps)
    st = [np.asarray(val, dtype=float)]
    tails = tuple(tail)
    for j in range(1, m + 1):
        tails = tuple(tt.primitive() for tt in tails)
        start = sum((tt(eps[0]) for tt in tails), 0.0)
        inc = np.zeros_like(h)
        for l in range(1, j):
            inc += st[j - l][:-1] * h ** l / math.factorial(l)
        inc += st[0][:-1] * h ** j / math.factorial(j)
        inc += (st[0][1:] - st[0][:-1]) * h ** j / math.factorial(j + 1)
        st.append(np.concatenate([[start], start + np.cumsum(inc)]))
    return st
