"""Zeta functions of orbits: series, meromorphic extensions, tube zeta.

Geometric zeta   zeta_L(s) = sum_j l_j^s
Distance zeta    zeta_f(s) = 2^{1-s}/s * zeta_L(s)
Tube zeta        int_0^delta t^{s-2} V(t) dt

Each extension back-end returns a MeromorphicFn: a vectorized evaluator on a
right half-plane together with the table of its principal parts.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .germs import FatouCoordinate, Hyperbolic, ModelParabolic, _dfatou
from .specfun import (ConvergenceFailure, NumericError, binomial_series,
                      complex_binomial, hurwitz_zeta, log_gamma)
from .tube import FractalString, GridTooCoarse, primitive_samples


class OutOfHalfPlane(NumericError):
    pass


class PoleAtZero(NumericError):
    pass


class QuadratureFailure(NumericError):
    pass


class DuplicateExponent(ValueError):
    pass


@dataclass(frozen=True)
class PrincipalTerm:
    pole: complex
    order: int
    laurent: tuple  # (c_{-1}, ..., c_{-order})
    cancelled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pole", complex(self.pole))
        object.__setattr__(self, "laurent", tuple(complex(c) for c in self.laurent))
        object.__setattr__(self, "cancelled", bool(self.cancelled))

    @property
    def residue(self):
        return self.laurent[0]


@dataclass(frozen=True, eq=False)
class MeromorphicFn:
    func: object
    sigma_min: float
    structure: tuple
    M: int
    provenance: str
    kind: str = "geometric"  # geometric | distance | tube
    exact_structure: bool = True

    def __call__(self, s):
        sa = np.asarray(s, dtype=complex)
        if np.any(sa.real <= self.sigma_min):
            raise OutOfHalfPlane("Re s must exceed %.6g" % self.sigma_min)
        out = self.func(np.atleast_1d(sa))
        if sa.ndim == 0:
            return complex(np.asarray(out).ravel()[0])
        return np.asarray(out).reshape(sa.shape)

    def poles(self, include_cancelled=False):
        return [p for p in self.structure if include_cancelled or not p.cancelled]

    def report(self):
        lines = ["backend: %s" % self.provenance,
                 "kind: %s" % self.kind,
                 "M: %d" % self.M,
                 "validity: Re s > %.17g" % self.sigma_min,
                 "pole,order,cancelled,laurent"]
        for p in sorted(self.structure, key=lambda t: (-t.pole.real, t.pole.imag)):
            co = ";".join("%.17g%+.17gj" % (c.real, c.imag) for c in p.laurent)
            lines.append("%.17g%+.17gj,%d,%s,%s" % (p.pole.real, p.pole.imag,
                                                  p.order, p.cancelled, co))
        return "\n".join(lines) + "\n"


CANCEL_TOL = 1e-12


def _distance_factor_taylor(w, n):
    """Taylor coefficients of 2^{1-s}/s at s = w != 0."""
    l2 = math.log(2.0)
    a = [2.0 * cmath.exp(-w * l2) * (-l2) ** j / math.factorial(j) for j in range(n)]
    b = [(-1) ** j / w ** (j + 1) for j in range(n)]
    return np.convolve(a, b)[:n]


def _regular_value(fn, w, r=1e-3, nodes=64):
    th = 2 * np.pi * np.arange(nodes) / nodes
    return complex(np.mean(fn.func(w + r * np.exp(1j * th))))


def to_distance(fn):
    """Distance zeta 2^{1-s}/s * zeta_L(s) from a geometric zeta."""
    if fn.kind != "geometric":
        raise ValueError("expected a geometric zeta")
    g = fn.func

    def func(s):
        return 2.0 ** (1.0 - s) / s * g(s)

    terms = []
    have_zero = False
    for p in fn.structure:
        if p.pole == 0:
            have_zero = True
            if p.cancelled:
                z0 = _regular_value(fn, 0.0)
                terms.append(PrincipalTerm(0j, 1, (2.0 * z0,), abs(z0) < CANCEL_TOL))
                continue
            raise NotImplementedError("geometric pole at 0")
        t = _distance_factor_taylor(p.pole, p.order)
        co = []
        for j in range(1, p.order + 1):
            # c_{-j} of the product: sum_r t_r c_{-(j+r)}
            co.append(sum(t[r] * p.laurent[j + r - 1] for r in range(p.order - j + 1)))
        canc = p.cancelled or abs(co[-1]) < CANCEL_TOL
        terms.append(PrincipalTerm(p.pole, p.order, tuple(co), canc))
    if not have_zero and fn.sigma_min < 0:
        z0 = _regular_value(fn, 0.0)
        terms.append(PrincipalTerm(0j, 1, (2.0 * z0,), abs(z0) < CANCEL_TOL))
    return MeromorphicFn(func, fn.sigma_min, tuple(terms), fn.M,
                         fn.provenance, "distance", fn.exact_structure)


# ------------------------------------------------------------- series ---

def _string_dim(string):
    k = string.tail_model[0]
    return 0.0 if k == 0 else k / (k + 1.0)


def geometric_zeta_series(string, s, n_direct=None):
    """sum_j l_j^s for Re s above the box dimension.

    The first n_direct lengths are summed directly.  The rest is continued
    through the Fatou coordinate, l(t) = g(Psi^{-1}(Psi(x_N) + t - N)), and
    summed by Euler-Maclaurin: the integral is taken in x, the boundary
    terms use l(N) and l'(N).  Geometric tails (hyperbolic) are summed in
    closed form.
    """
    s = complex(s)
    D = _string_dim(string)
    if s.real <= D + 0.05 - 1e-12:
        raise OutOfHalfPlane("series needs Re s > %.6g" % (D + 0.05))
    k, a = string.tail_model
    lengths = np.asarray(string.lengths)
    if k == 0:
        direct = np.exp(s * np.log(lengths)).sum()
        last = lengths[-1] * a
        return complex(direct + cmath.exp(s * math.log(last)) / (1 - cmath.exp(s * math.log(a))))
    germ = string.germ
    if germ is None:
        raise ValueError("the parabolic tail needs the germ")
    N = n_direct or max(2000, int(50 * abs(s)))
    if len(lengths) < N:
        xs = germ.iterate(string.x0, np.arange(N + 1)) if isinstance(germ, ModelParabolic) \
            else _plain_orbit(germ, string.x0, N)
        lengths = np.asarray(germ.gap(np.asarray(xs[:N])))
        xN = float(xs[N])
    else:
        xN = float(germ.iterate(string.x0, N))
        lengths = lengths[:N]
    direct = np.exp(s * np.log(lengths)).sum()
    tail, err = _em_tail(germ, xN, s, k, a)
    total = complex(direct + tail)
    if err > 1e-10 * abs(total):
        raise ConvergenceFailure("series tail error estimate %.3g" % err)
    return total


def _plain_orbit(germ, x0, n):
    out = np.empty(n + 1)
    x = float(x0)
    for i in range(n + 1):
        out[i] = x
        x = float(germ.eval(x)) if i < n else x
    return out


_GL16 = np.polynomial.legendre.leggauss(16)


def _em_tail(germ, xN, s, k, a):
    fc = FatouCoordinate(germ)
    xc = 1e-17
    U = math.log(xN / xc)
    width = min(1.0, 2.0 / (1.0 + (k + 1) * abs(s.imag)))
    npan = int(math.ceil(U / width))
    edges = np.linspace(0.0, U, npan + 1)
    xg, wg = _GL16
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    x = xN * np.exp(-u)
    lg = np.log(np.asarray(germ.gap(x)))
    dps = np.abs(np.asarray(_dfatou(fc, x)))
    integral = np.sum(w * np.exp(s * lg) * dps * x)
    beta = (k + 1) * s - k
    integral += cmath.exp((s - 1) * math.log(a) + beta * math.log(xc)) / beta
    lN = float(germ.gap(xN))
    dN = float(_dfatou(fc, xN))
    dl = float(germ.dgap(xN)) / dN
    phi = cmath.exp(s * math.log(lN))
    dphi = s * phi / lN * dl
    # dt/dx = Psi'(x); t - N = Psi(x) - Psi(x_N)
    N_eff = 1.0 / (a * k * xN ** k)
    tail = integral + 0.5 * phi - dphi / 12.0
    err = abs(phi) * (abs(s) * (1 + 1.0 / k) / N_eff) ** 3 / 720.0
    return tail, err


def distance_zeta(obj, s):
    """2^{1-s}/s * zeta_L(s) from an orbit or fractal string."""
    s = complex(s)
    if abs(s) < 1e-14:
        raise PoleAtZero("distance zeta has a pole at s = 0")
    string = obj if isinstance(obj, FractalString) else FractalString.from_orbit(obj)
    return 2.0 ** (1 - s) / s * geometric_zeta_series(string, s)


def distance_zeta_full(obj, s, delta=1.0):
    """Distance zeta of the whole orbit over its delta-neighbourhood; the
    two end caps add 2 delta^s / s."""
    s = complex(s)
    return distance_zeta(obj, s) + 2.0 * cmath.exp(s * math.log(delta)) / s


# ---------------------------------------------------- k = 1 back-end ---

def extend_k1(x0, M, J0=32, P=48):
    """Geometric zeta of the k=1 model orbit from x0, on Re s > -M/2.

    zeta_L(s) = sum_{m<=M} binom(-s,m) zeta(2s+m, X) + R_M(s), X = 1/x0,
    where R_M collects the higher binomial terms: directly for j < J0 and
    through Hurwitz zeta at J0 + X beyond.
    """
    M = int(M)
    if M < 1:
        raise ValueError("M must be at least 1")
    X = 1.0 / x0

    def func(s):
        s = np.asarray(s, dtype=complex)
        bc = binomial_series(-s, M + P)
        out = np.zeros(s.shape, dtype=complex)
        for m in range(M + 1):
            out += bc[m] * hurwitz_zeta(2 * s + m, X)
        out += _k1_remainder(s, X, M, bc, J0, P)
        return out

    terms = []
    for m in range(M + 1):
        w = (1.0 - m) / 2.0
        res = 0.5 * complex(complex_binomial(-w, m))
        terms.append(PrincipalTerm(complex(w), 1, (res,), abs(res) < CANCEL_TOL))
    return MeromorphicFn(func, -M / 2.0, tuple(terms), M, "k1")


def _k1_remainder(s, X, M, bc, J0, P):
    out = np.zeros(s.shape, dtype=complex)
    for j in range(J0):
        q = j + X
        u = 1.0 / q
        if u <= 0.3:
            up = u ** np.arange(M + 1, M + P + 1)
            br = (bc[M + 1:M + P + 1] * up[:, None]).sum(axis=0)
        else:
            br = np.exp(-s * math.log1p(u))
            up = u ** np.arange(M + 1)
            br = br - (bc[:M + 1] * up[:, None]).sum(axis=0)
        out += np.exp(-2 * s * math.log(q)) * br
    for p in range(M + 1, M + P + 1):
        out += bc[p] * hurwitz_zeta(2 * s + p, J0 + X)
    return out


def mellin_barnes_k1(x0, s, M, eta=0.5, h=0.05):
    """k=1 geometric zeta through the Mellin-Barnes representation
    of (1 + 1/(j+X))^{-s}, line Re z = M - eta.

    The trapezoid step h is reduced when a singularity of the integrand
    (z = 1 - 2s, or an integer) lies within d < h/0.2 of the line.
    """
    s = complex(s)
    M = int(M)
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if s.real <= -(M - 1) / 2.0 + eta / 2.0:
        raise OutOfHalfPlane("Re s too small for this M")
    X = 1.0 / x0
    out = 0j
    for n in range(M):
        out += complex_binomial(-s, n) * hurwitz_zeta(2 * s + n, X)
    c = M - eta
    d = min(eta, 1 - eta, abs(1 - 2 * s.real - c), abs(-s.real - math.floor(c + s.real) - c))
    h = min(h, 0.2 * d)
    Y = 40.0 + 4.0 * abs(s.imag)
    y = np.arange(-Y, Y + h / 2, h)
    z = c + 1j * y
    lg = log_gamma(s + z) + log_gamma(-z)
    integrand = np.exp(lg) * hurwitz_zeta(2 * s + z, X)
    # 1/Gamma(s), zero at the poles of Gamma
    if s.imag == 0 and s.real <= 0 and s.real == round(s.real):
        return out
    integral = h * integrand.sum() / (2 * math.pi)
    integral /= cmath.exp(log_gamma(s))
    edge = max(abs(integrand[0]), abs(integrand[-1])) * Y / abs(cmath.exp(log_gamma(s)))
    if edge > 1e-9 * max(1.0, abs(out + integral)):
        raise QuadratureFailure("Mellin-Barnes tail bound %.3g" % edge)
    return out + integral


def mellin_barnes_base(lam, s, c=None, h=0.05):
    """(1+lam)^{-s} from the Mellin-Barnes integral on Re z = c."""
    s = complex(s)
    if c is None:
        c = -0.5 * s.real
    Y = 40.0 + 4.0 * abs(s.imag)
    y = np.arange(-Y, Y + h / 2, h)
    z = c + 1j * y
    vals = np.exp(log_gamma(s + z) + log_gamma(-z) + z * math.log(lam))
    return complex(h * vals.sum() / (2 * math.pi) / cmath.exp(log_gamma(s)))


# -------------------------------------------- shifted a-string back-end ---

def W(s, a, n):
    """Coefficient functions of the Hurwitz decomposition (finite triple
    sum); W(s, a, 0) = a^s and W(s, 1, n) = binom(-s, n)."""
    s = np.asarray(s, dtype=complex)
    tot = np.zeros(s.shape, dtype=complex)
    for k in range(n + 1):
        bsk = complex_binomial(s, k)
        inner = 0.0
        for i in range(k + 1):
            acc = 0.0
            for j in range(i + 1):
                acc += (-a) ** j * math.comb(i, j) * complex_binomial((i - k) * a, n + k - j).real
            inner += (-1) ** i * math.comb(k, i) * acc
        tot = tot + (-1.0 / a) ** k * bsk * inner
    out = np.exp(s * math.log(a)) * tot
    return complex(out) if out.ndim == 0 else out


def h_coefficients(a, n):
    """Power series of 1 + h(u) = (1 - (1+u)^{-a})/(a u)."""
    return np.array([-complex_binomial(-a, m + 1).real / a for m in range(n + 1)])


def power_series_pow(H, s, n):
    """Coefficients of (sum H_i u^i)^s with H_0 = 1 (Miller recurrence),
    vectorized over s."""
    s = np.asarray(s, dtype=complex)
    F = np.zeros((n + 1,) + s.shape, dtype=complex)
    F[0] = 1.0
    for m in range(1, n + 1):
        acc = np.zeros(s.shape, dtype=complex)
        for i in range(1, m + 1):
            acc += ((s + 1) * i - m) * H[i] * F[m - i]
        F[m] = acc / m
    return F


def extend_shifted_a_string(a, b, M, J0=32, P=60):
    """zeta of l_j = (j+b)^{-a} - (j+1+b)^{-a} on Re s > -M/(a+1)."""
    a = float(a)
    b = float(b)
    M = int(M)
    if a <= 0 or b <= 0 or M < 0:
        raise ValueError("need a, b > 0 and M >= 0")
    H = h_coefficients(a, M + P)
    A1 = a + 1.0

    # W(s, a, n) = a^s c_n(s) with c_n from the power recurrence; the
    # triple sum loses digits to cancellation once a < 1 and n grows
    def func(s):
        s = np.asarray(s, dtype=complex)
        out = np.zeros(s.shape, dtype=complex)
        c = power_series_pow(H, s, M + P)
        for n in range(M + 1):
            out += c[n] * hurwitz_zeta(A1 * s + n, b)
        out += _astring_remainder(s, a, b, M, c, J0, P)
        return np.exp(s * math.log(a)) * out

    terms = []
    for n in range(M + 1):
        w = (1.0 - n) / A1
        if w == 0.0:
            # W(0, a, n) = 0 for n >= 1: removable
            terms.append(PrincipalTerm(0j, 1, (0j,), True))
            continue
        cw = power_series_pow(H, np.array([w]), n)[n][0]
        res = complex(a ** w * cw) / A1
        terms.append(PrincipalTerm(complex(w), 1, (res,), abs(res) < CANCEL_TOL))
    return MeromorphicFn(func, -M / A1, tuple(terms), M, "astring")


def _astring_remainder(s, a, b, M, c, J0, P):
    out = np.zeros(s.shape, dtype=complex)
    A1 = a + 1.0
    for j in range(J0):
        q = j + b
        u = 1.0 / q
        if u <= 0.3:
            up = u ** np.arange(M + 1, M + P + 1)
            br = (c[M + 1:M + P + 1] * up[:, None]).sum(axis=0)
        else:
            onep = -math.expm1(-a * math.log1p(u)) / (a * u)  # 1 + h_j
            br = np.exp(s * math.log(onep))
            up = u ** np.arange(M + 1)
            br = br - (c[:M + 1] * up[:, None]).sum(axis=0)
        out += np.exp(-A1 * s * math.log(q)) * br
    for p in range(M + 1, M + P + 1):
        out += c[p] * hurwitz_zeta(A1 * s + p, J0 + b)
    return out


def tilde_Z(k, s, n):
    """Coefficient of zeta((k+1)s/k + n, b_k) in the model-k geometric zeta
    (leading coefficient a = 1)."""
    return np.exp(-np.asarray(s, dtype=complex) * math.log(k) / k) * W(s, 1.0 / k, n)


def extend_model_k(k, x0, M, a=1.0, geometric=False):
    """Distance zeta of the model orbit x' = -a x^{k+1}/(1 - a rho x^k) with
    rho = 0 (closed-form orbit), through the shifted 1/k-string."""
    k = int(k)
    if k < 1:
        raise ValueError("k must be positive")
    u0 = a ** (1.0 / k) * x0
    bk = 1.0 / (k * u0 ** k)
    base = extend_shifted_a_string(1.0 / k, bk, M)
    # l_j = (a k)^{-1/k} l_j(b_k)
    lc = -math.log(a * k) / k

    def func(s):
        return np.exp(s * lc) * base.func(s)

    terms = []
    for p in base.structure:
        f = cmath.exp(p.pole * lc)
        terms.append(PrincipalTerm(p.pole, p.order, tuple(f * c for c in p.laurent),
                                   p.cancelled))
    geo = MeromorphicFn(func, base.sigma_min, tuple(terms), M, "modelk")
    return geo if geometric else to_distance(geo)


# -------------------------------------------------------- hyperbolic ---

def hyperbolic_zeta(a, x0, K=60):
    """Closed-form distance zeta of the orbit of ax; poles s_k (|k| <= K in
    the structure table) and the double pole at 0."""
    a = float(a)
    x0 = float(x0)
    La = math.log(a)
    cL = math.log(x0 * (1 - a) / 2.0)

    def func(s):
        s = np.asarray(s, dtype=complex)
        return 2.0 * np.exp(s * cL) / (s * -np.expm1(s * La))

    terms = []
    # double pole at 0: 2 e^{c s} / (s * (1 - a^s))
    n = 4
    e = np.array([cL ** j / math.factorial(j) for j in range(n)]) * 2.0
    # (1 - a^s)/s = -La * (1 + La s/2 + La^2 s^2/6 + ...)
    q = np.array([-La * La ** j / math.factorial(j + 1) for j in range(n)])
    inv = np.zeros(n)
    inv[0] = 1.0 / q[0]
    for j in range(1, n):
        inv[j] = -sum(q[i] * inv[j - i] for i in range(1, j + 1)) / q[0]
    prod = np.convolve(e, inv)[:n]  # s^2 f(s)
    terms.append(PrincipalTerm(0j, 2, (complex(prod[1]), complex(prod[0]))))
    for kk in range(-K, K + 1):
        if kk == 0:
            continue
        sk = 2j * math.pi * kk / La
        res = -2.0 * cmath.exp(sk * cL) / (sk * La)
        terms.append(PrincipalTerm(sk, 1, (res,)))

    return MeromorphicFn(func, -math.inf, tuple(terms), 0, "hyperbolic", "distance")


def hyperbolic_geometric_zeta(a, x0):
    a = float(a)
    x0 = float(x0)

    def func(s):
        s = np.asarray(s, dtype=complex)
        return np.exp(s * math.log(x0 * (1 - a))) / -np.expm1(s * math.log(a))

    return MeromorphicFn(func, -math.inf, (), 0, "hyperbolic", "geometric")


# ---------------------------------------------------------- tube zeta ---

_GL8 = np.polynomial.legendre.leggauss(8)
_GL6 = np.polynomial.legendre.leggauss(6)


def _cell_quad(lo, hi, fn, s_beta, rule):
    xg, wg = rule
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t = mid[:, None] + half[:, None] * xg[None, :]
    tau = t - lo[:, None]
    return (half[:, None] * wg[None, :] * np.exp(s_beta * np.log(t)) * fn(tau)).sum()


def _mellin_cells(samples, m, beta, delta, chunk=200000):
    """int_{eps_0}^{delta} t^beta V^{[m]}(t) dt over the sample cells and
    an error estimate (8- against 6-point Gauss)."""
    e = samples.eps
    top = np.searchsorted(e, delta * (1 + 1e-14), side="right") - 1
    if top < 1 or e[top] < delta * (1 - 1e-14):
        raise GridTooCoarse("samples must extend to delta")
    st = samples.stack
    fac = [1.0 / math.factorial(j) for j in range(m + 2)]
    tot8 = 0j
    tot6 = 0j
    for lo_i in range(0, top, chunk):
        idx = np.arange(lo_i, min(lo_i + chunk, top))
        lo = e[idx]
        hi = e[idx + 1]
        slope = (st[0][idx + 1] - st[0][idx]) / (hi - lo)
        coef = [st[m - j][idx] * fac[j] for j in range(m)]
        coef.append(st[0][idx] * fac[m])
        coef.append(slope * fac[m + 1])

        def poly(tau):
            out = np.zeros_like(tau)
            for j in range(m + 1, -1, -1):
                out = out * tau + coef[j][:, None]
            return out

        tot8 += _cell_quad(lo, hi, poly, beta, _GL8)
        tot6 += _cell_quad(lo, hi, poly, beta, _GL6)
    return tot8, abs(tot8 - tot6)


def _tail_mellin(samples, m, beta):
    tail = samples.tail
    for _ in range(m):
        tail = tuple(t.primitive() for t in tail)
    e0 = samples.eps[0]
    val = sum((t.mellin(beta, e0) for t in tail), 0j)
    # residual of the tail model at the first nodes, propagated as a power
    r0 = abs(samples.stack[m][0] - sum(t(e0) for t in tail))
    near = samples.stack[0][:8] - sum(t(samples.eps[:8]) for t in samples.tail)
    r0 = max(r0, float(np.max(np.abs(near))) * e0 ** m)
    gam = max(t.alpha for t in tail)
    c = beta.real + 1 + gam
    err = r0 * e0 ** (beta.real + 1) / c if c > 0 else math.inf
    return val, err


def tube_zeta_numeric(samples, s, delta=1.0, rtol=1e-8):
    """int_0^delta t^{s-2} V(t) dt; the part below the first node comes from
    the tail model."""
    s = complex(s)
    D = samples.dim_hint
    if D is not None and s.real <= D + 0.05 - 1e-12:
        raise OutOfHalfPlane("direct tube zeta needs Re s > dim + 0.05")
    beta = s - 2.0
    body, qerr = _mellin_cells(samples, 0, beta, delta)
    tail, terr = _tail_mellin(samples, 0, beta)
    val = body + tail
    err = qerr + terr
    if err > rtol * abs(val):
        raise GridTooCoarse("tube zeta error estimate %.3g" % (err / abs(val)))
    return val


def tube_zeta_via_primitives(samples, m, s, delta=1.0, rtol=1e-6):
    """Tube zeta through the m-th primitive:
    sum_{n=1}^m (2-s)_{n-1} delta^{s-1-n} V^{[n]}(delta)
      + (2-s)_m int_0^delta t^{s-2-m} V^{[m]}(t) dt."""
    s = complex(s)
    m = int(m)
    if m < 1:
        raise ValueError("m must be positive")
    D = samples.dim_hint
    if D is not None and s.real <= D - m + 0.05 - 1e-12:
        raise OutOfHalfPlane("Re s too small for m = %d" % m)
    P = samples if samples.order >= m else primitive_samples(samples, m)
    e = P.eps
    i = int(np.searchsorted(e, delta * (1 - 1e-14)))
    if i >= len(e) or abs(e[i] - delta) > 1e-12 * delta:
        raise GridTooCoarse("delta must be a sample node")
    N = 1.0
    out = 0j
    poch = 1.0 + 0j
    for n in range(1, m + 1):
        out += poch * cmath.exp((s - N - n) * math.log(delta)) * P.stack[n][i]
        poch *= (N - s + n)
    beta = s - N - 1 - m
    body, qerr = _mellin_cells(P, m, beta, delta)
    tail, terr = _tail_mellin(P, m, beta)
    integral = body + tail
    val = out + poch * integral
    err = abs(poch) * (qerr + terr)
    if err > rtol * abs(val):
        raise GridTooCoarse("primitive route error estimate %.3g" % (err / abs(val)))
    return val


def tube_from_distance(zd, s, x0, delta=1.0):
    """Tube zeta from the distance zeta via
    zeta_f = delta^{s-1} |A_delta| + (1-s) tube (delta >= eps_0)."""
    s = complex(s)
    return (zd - cmath.exp((s - 1) * math.log(delta)) * x0) / (1 - s)


# ------------------------------------------- zeta from an expansion ---

@dataclass(frozen=True)
class ExpansionTermList:
    """Terms M_i eps^{alpha_i + m} P_i(-log eps); P_i as ascending
    coefficients, monic."""
    terms: tuple
    m: int = 0
    delta: float = 1.0
    N: int = 1

    def __post_init__(self):
        al = [t[0] for t in self.terms]
        if len(set(al)) != len(al):
            raise DuplicateExponent("repeated exponent in the expansion")
        if any(b <= a for a, b in zip(al, al[1:])):
            raise ValueError("exponents must increase")
        for t in self.terms:
            if abs(t[2][-1] - 1.0) > 1e-14:
                raise ValueError("polynomials must be monic")


def _poly_deriv_values(p, x):
    """[P(x), P'(x), P''(x), ...] for ascending coefficients."""
    p = list(p)
    out = []
    while p:
        out.append(sum(c * x ** i for i, c in enumerate(p)))
        p = [i * c for i, c in enumerate(p)][1:]
    return out


def theoremC_zeta(tl, kind="distance"):
    """Principal-part function built from a tube expansion.

    kind="distance": (N-s)_{m+1} sum_i delta^{s-N+alpha_i}
                      sum_j M_i P_i^{(j)}(-log delta)/(s-N+alpha_i)^{j+1}.
    kind="tube" drops the factor (N - s).
    """
    N, m, d = tl.N, tl.m, tl.delta
    ld = math.log(d)
    lo = 0 if kind == "distance" else 1

    def poch(s):
        out = 1.0
        for i in range(lo, m + 1):
            out = out * (N - s + i)
        return out

    def func(s):
        s = np.asarray(s, dtype=complex)
        tot = np.zeros(s.shape, dtype=complex)
        for al, Mi, P in tl.terms:
            w = s - N + al
            der = _poly_deriv_values(P, -ld)
            inner = sum(Mi * der[j] / w ** (j + 1) for j in range(len(der)))
            tot += np.exp(w * ld) * inner
        return poch(s) * tot

    terms = []
    for al, Mi, P in tl.terms:
        om = N - al
        n = len(P) - 1
        b = [Mi * v for v in _poly_deriv_values(P, -ld)]
        # Taylor of poch(s) delta^{s - om} at om
        pc = np.array([1.0 + 0j])
        for i in range(lo, m + 1):
            pc = np.convolve(pc, [N - om + i, -1.0])
        ex = np.array([ld ** r / math.factorial(r) for r in range(n + 1)])
        A = np.convolve(pc, ex)[:n + 1]
        A = np.concatenate([A, np.zeros(n + 1 - len(A))])
        co = []
        for j in range(n + 1):
            co.append(complex(sum(A[r] * b[j + r] for r in range(n + 1 - j))))
        terms.append(PrincipalTerm(complex(om), n + 1, tuple(co), abs(co[-1]) < CANCEL_TOL))

    return MeromorphicFn(func, -math.inf, tuple(terms), m,
                         "expansion (principal parts only)", kind, False)
