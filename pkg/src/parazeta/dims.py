"""Complex dimensions, tube formulas, formal-class recovery and fits."""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .germs import FormalClass
from .specfun import NumericError
from .zeta import extend_k1, to_distance


class RadiusTooSmall(NumericError):
    pass


class NonConvergent(NumericError):
    pass


class PoleAtOne(NumericError):
    pass


class NonIntegralMultiplicity(ValueError):
    pass


class NegativeDiscriminant(ValueError):
    pass


class InsufficientRange(ValueError):
    pass


class IllConditioned(NumericError):
    pass


DETECT_TOL = 1e-9


@dataclass(frozen=True)
class ComplexDimension:
    location: complex
    order: int
    principal: tuple
    cancelled: bool = False
    candidate: complex = None


@dataclass(frozen=True)
class FitResult:
    basis: tuple
    coefficients: tuple
    residual_norm: float
    condition_number: float

    @property
    def reliable(self):
        return self.condition_number < 1e12

    def coef(self, exponent, log_power=0):
        for (al, p), c in zip(self.basis, self.coefficients):
            if abs(al - exponent) < 1e-12 and p == log_power:
                return c
        raise KeyError((exponent, log_power))

    def to_csv(self):
        rows = ["exponent,log_power,coefficient"]
        for (al, p), c in zip(self.basis, self.coefficients):
            rows.append("%.17g,%d,%.17g" % (al, p, c))
        rows.append("# residual_norm=%.17g condition_number=%.17g"
                    % (self.residual_norm, self.condition_number))
        return "\n".join(rows) + "\n"


# ---------------------------------------------------------- contours ---

def _radius(fn, w):
    d = math.inf
    for p in fn.structure:
        if abs(p.pole - w) > 1e-12:
            d = min(d, abs(p.pole - w))
    r = min(0.1, d / 2.0)
    if math.isfinite(fn.sigma_min):
        r = min(r, 0.5 * (w.real - fn.sigma_min))
    return r


def _moments(fn, w, r, nodes, nmax):
    th = 2.0 * np.pi * np.arange(nodes) / nodes
    z = r * np.exp(1j * th)
    f = fn.func(w + z)
    return [complex(np.mean(f * z ** n)) for n in range(1, nmax + 1)]


def residue_contour(fn, omega, order_hint=1, radius=None, nodes=128):
    """Laurent coefficients (c_{-1}, ..., c_{-order_hint}) at omega by the
    trapezoid rule on a circle, checked against twice the nodes."""
    w = complex(omega)
    r = _radius(fn, w) if radius is None else radius
    if not r >= 1e-6:
        raise RadiusTooSmall("contour radius %.3g" % r)
    a = _moments(fn, w, r, nodes, order_hint)
    b = _moments(fn, w, r, 2 * nodes, order_hint)
    for x, y in zip(a, b):
        if abs(x - y) > 1e-9 * max(1.0, abs(y)):
            raise NonConvergent("contour moments changed by %.3g" % abs(x - y))
    return tuple(b)


def locate_pole(fn, omega, radius=None, nodes=256):
    """Location of a simple pole inside the contour around omega:
    omega + (moment of (s - omega) f)/(moment of f)."""
    w = complex(omega)
    r = _radius(fn, w) if radius is None else radius
    c1, c2 = _moments(fn, w, r, nodes, 2)
    if abs(c1) < DETECT_TOL:
        return w
    return w + c2 / c1


def complex_dimensions(fn, window_left, im_max=math.inf):
    """Candidate poles of fn in {Re s > window_left, |Im s| <= im_max},
    validated by contour integration; vanishing ones flagged cancelled."""
    if window_left <= fn.sigma_min:
        raise ValueError("window must lie in the validity half-plane")
    out = []
    for p in fn.structure:
        w = complex(p.pole)
        if w.real <= window_left or abs(w.imag) > im_max:
            continue
        co = residue_contour(fn, w, p.order + 1)
        order = 0
        for j, c in enumerate(co):
            if abs(c) > DETECT_TOL:
                order = j + 1
        if order == 0:
            out.append(ComplexDimension(w, 1, co[:1], True, w))
            continue
        loc = locate_pole(fn, w) if order == 1 else w
        out.append(ComplexDimension(loc, order, co[:order], False, w))
    out.sort(key=lambda d: (-d.location.real, d.location.imag))
    return out


def scan_poles(fn, re_range, im_range, step=0.25, offset=0.0371, gl=48):
    """Independent pole search: (1/2 pi i) times the contour integral of fn
    around each square of a grid.  Squares with a nonzero value enclose
    poles; returns (centre, value) pairs."""
    xg, wg = np.polynomial.legendre.leggauss(gl)
    re0, re1 = re_range
    im0, im1 = im_range
    xs = np.arange(re0 + offset, re1, step) + step / 2
    ys = np.arange(im0 + offset, im1, step) + step / 2
    cen = (xs[:, None] + 1j * ys[None, :]).ravel()
    h = step / 2
    unit = [(1 - 1j), (1 + 1j), (-1 + 1j), (-1 - 1j)]
    total = np.zeros(cen.shape, dtype=complex)
    for k in range(4):
        a, b = h * unit[k], h * unit[(k + 1) % 4]
        z = cen[:, None] + 0.5 * (a + b) + 0.5 * (b - a) * xg[None, :]
        f = fn.func(z.ravel()).reshape(z.shape)
        total += 0.5 * (b - a) * (f * wg[None, :]).sum(axis=1)
    total /= 2j * math.pi
    hit = np.abs(total) > 1e-7
    return [(complex(c), complex(v)) for c, v in zip(cen[hit], total[hit])]


def has_nonreal_dimensions(dims, tol=1e-9):
    return any(abs(d.location.imag) > tol and not d.cancelled for d in dims)


# ------------------------------------------------------- tube formula ---

def _tube_kernel_taylor(w, eps, n):
    """Taylor coefficients of eps^{1-s}/(1-s) at s = w."""
    if abs(1 - w) < 1e-14:
        raise PoleAtOne("tube kernel singular at s = 1")
    le = math.log(eps)
    a = [cmath.exp((1 - w) * le) * (-le) ** j / math.factorial(j) for j in range(n)]
    b = [1.0 / (1 - w) ** (j + 1) for j in range(n)]
    return np.convolve(a, b)[:n]


def tube_formula(dims, fn, eps):
    """sum of res(eps^{1-s}/(1-s) fn(s), w) over the given dimensions."""
    tot = 0j
    for d in dims:
        if d.cancelled:
            continue
        t = _tube_kernel_taylor(d.location, eps, d.order)
        tot += sum(d.principal[n] * t[n] for n in range(d.order))
    return float(tot.real)


# --------------------------------------------------- formal class ---

def recover_formal_class(omega1, res1, a_k1, convention="stated"):
    """(k, a, rho) from the rightmost pole, its residue and the coefficient
    a_{k+1} = Res(s zeta_f(s), 0) (equivalently minus the eps log eps
    coefficient of the tube function).

    convention="stated": res1 = 2^{1/(k+1)}(1 + a^2/k)/(k+1) and
        a_{k+1} = 2 rho/(a(k+1)) (k^{1/k} a^{-1/k} + 1 + a^2 (k+1)/k).
    convention="exact": res1 = (2/a)^{1/(k+1)}/k and a_{k+1} = -2 rho/(k+1),
        as computed from the model x' = -a x^{k+1}/(1 - a rho x^k).
    Both agree on res1 when a = 1.
    """
    if not 0 < omega1 < 1:
        raise ValueError("omega1 must lie in (0, 1)")
    if not res1 > 0:
        raise ValueError("res1 must be positive")
    q = omega1 / (1 - omega1)
    k = int(round(q))
    defect = abs(q - k)
    if k < 1 or defect >= 0.02:
        raise NonIntegralMultiplicity("k estimate %.4g" % q)
    if convention == "stated":
        disc = k * ((k + 1) * res1 / 2 ** (1.0 / (k + 1)) - 1.0)
        if disc <= 0:
            raise NegativeDiscriminant("no positive a for this residue")
        a = math.sqrt(disc)
        fac = 2.0 / (a * (k + 1)) * (k ** (1.0 / k) * a ** (-1.0 / k) + 1 + a * a * (k + 1) / k)
        rho = a_k1 / fac
    elif convention == "exact":
        a = 2.0 / (k * res1) ** (k + 1)
        rho = -(k + 1) * a_k1 / 2.0
    else:
        raise ValueError("unknown convention %r" % convention)
    return FormalClass(k, a, rho)


def forward_residues(fc, convention="exact"):
    """(omega1, res1, a_k1) for a formal class; inverse of
    recover_formal_class."""
    k, a, rho = fc.k, fc.a, fc.rho
    w = k / (k + 1.0)
    if convention == "stated":
        res1 = 2 ** (1.0 / (k + 1)) * (1 + a * a / k) / (k + 1)
        ak1 = 2 * rho / (a * (k + 1)) * (k ** (1.0 / k) * a ** (-1.0 / k) + 1 + a * a * (k + 1) / k)
    else:
        res1 = (2.0 / a) ** (1.0 / (k + 1)) / k
        ak1 = -2.0 * rho / (k + 1)
    return w, res1, ak1


# -------------------------------------------------------------- fits ---

def _ev(samples):
    if isinstance(samples, tuple):
        return np.asarray(samples[0], float), np.asarray(samples[1], float)
    return samples.eps, samples.value


def box_dimension_fit(samples, window=None):
    """(D, content) from the slope of log V against log eps."""
    e, v = _ev(samples)
    if window is not None:
        sel = (e >= window[0]) & (e <= window[1])
        e, v = e[sel], v[sel]
    if len(e) < 3 or math.log10(e.max() / e.min()) < 3 - 1e-9:
        raise InsufficientRange("need at least 3 decades of eps")
    A = np.column_stack([np.ones_like(e), np.log(e)])
    (c0, c1), *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
    return float(1.0 - c1), float(math.exp(c0))


def fit_expansion(samples, basis, window=None):
    """Weighted least squares of V on eps^alpha (log eps)^p, weights
    eps^{-alpha_min}."""
    e, v = _ev(samples)
    if window is not None:
        sel = (e >= window[0]) & (e <= window[1])
        e, v = e[sel], v[sel]
    basis = tuple((float(a), int(p)) for a, p in basis)
    if len(set(basis)) != len(basis):
        raise ValueError("basis terms must be distinct")
    amin = min(a for a, _ in basis)
    w = e ** (-amin)
    A = np.column_stack([e ** a * np.log(e) ** p for a, p in basis]) * w[:, None]
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    coef, *_ = np.linalg.lstsq(As, v * w, rcond=None)
    cond = float(np.linalg.cond(As))
    res = float(np.linalg.norm(As @ coef - v * w))
    return FitResult(basis, tuple(float(c) for c in coef / scale), res, cond)


def regularization_ratio(x0, m_max, window=(1e-6, 0.08), per_decade=400,
                         extra_terms=4):
    """For the k=1 model: fitted [eps^{m+1/2}] coefficient of V^c divided by
    the coefficient produced by the residue at 1/2 - m."""
    from .germs import FatouCoordinate, ModelParabolic
    from .tube import eps_grid, tube_length_continuous
    if m_max > 4:
        raise IllConditioned("m_max above 4 is too ill-conditioned")
    g = ModelParabolic(1)
    e = eps_grid(window[0], window[1], per_decade)
    v = tube_length_continuous(FatouCoordinate(g), x0, e)
    L = m_max + extra_terms
    basis = [(0.5 + m, 0) for m in range(L + 1)] + [(1.0, 0)]
    fit = fit_expansion((e, v), basis)
    if not fit.reliable:
        raise IllConditioned("condition number %.3g" % fit.condition_number)
    fd = to_distance(extend_k1(x0, 2 * m_max + 2))
    dims = complex_dimensions(fd, -m_max - 0.25)
    out = []
    for m in range(m_max + 1):
        w = 0.5 - m
        d = [x for x in dims if abs(x.location - w) < 1e-6]
        ref = tube_formula(d, fd, 1.0)
        out.append(fit.coef(0.5 + m) / ref)
    return out


def regularization_ratio_k(k, x0, n_poles=3, window=(1e-6, 0.08), per_decade=400,
                           terms=8):
    """Same measurement for the model of multiplicity k, over the first
    `n_poles` live poles other than 0.  Returns (pole, ratio, condition)
    triples.  For k >= 2 nothing is asserted about the values."""
    from .germs import FatouCoordinate, ModelParabolic
    from .tube import eps_grid, tube_length_continuous
    from .zeta import extend_model_k
    g = ModelParabolic(k)
    top = min(window[1], 0.45 * float(g.gap(x0)))
    e = eps_grid(window[0], top, per_decade)
    v = tube_length_continuous(FatouCoordinate(g), x0, e)
    fd = extend_model_k(k, x0, 10)
    dims = [d for d in complex_dimensions(fd, -3.2)
            if not d.cancelled and abs(d.location) > 1e-9]
    dims = sorted(dims, key=lambda d: -d.location.real)[:n_poles]
    idx = [int(round((1 - d.location.real) * (k + 1))) for d in dims]
    basis = [(j / (k + 1.0), 0) for j in range(1, max(terms, max(idx) + 3) + 1)]
    fit = fit_expansion((e, v), basis)
    return [(d.location.real, fit.coef(j / (k + 1.0)) / tube_formula([d], fd, 1.0),
             fit.condition_number) for d, j in zip(dims, idx)]


def hurwitz_growth_probe(sigma, q, t_values):
    """Empirical exponent mu in |zeta(sigma + it, q)| ~ t^mu along a vertical
    line, from a least-squares fit of log|zeta| on log t."""
    from .specfun import hurwitz_zeta
    t = np.asarray(t_values, dtype=float)
    z = np.abs(hurwitz_zeta(sigma + 1j * t, q))
    mu, _ = np.polyfit(np.log(t), np.log(z), 1)
    return float(mu)


# -------------------------------------------------------- hyperbolic ---

def hyperbolic_poles(a, K):
    La = math.log(a)
    return [2j * math.pi * k / La for k in range(-K, K + 1) if k != 0]


def hyperbolic_fourier_H(a, x0, t, K):
    """Truncated Fourier series of the periodic part of the hyperbolic tube
    function."""
    if K < 1:
        raise ValueError("K must be positive")
    La = math.log(a)
    t = np.asarray(t, dtype=float)
    k = np.arange(1, K + 1)
    sk = 2j * math.pi * k / La
    coef = 1.0 / (sk * (1 - sk))
    ph = np.exp(2j * math.pi * np.multiply.outer(t, k))
    # terms for -k are complex conjugates
    osc = 2.0 * np.real(ph @ coef)
    const = 1 + (math.log(4) - 2) / La - 2 * math.log(x0 * (1 - a)) / La
    out = const - 2.0 / La * osc
    return float(out) if out.ndim == 0 else out


def hyperbolic_F(a, x0, G):
    """F(G) = 2 log_a(2/(x0(1-a))) + 2G + 2 a^G/(1-a)."""
    La = math.log(a)
    G = np.asarray(G, dtype=float)
    return 2 * math.log(2 / (x0 * (1 - a))) / La + 2 * G + 2 * a ** G / (1 - a)


def hyperbolic_tail_bound(a, K, kmax=10 ** 6):
    """sum over |k| > K of (2/|log a|)/(|s_k| |1 - s_k|)."""
    La = abs(math.log(a))
    k = np.arange(K + 1, kmax + 1, dtype=float)
    sk = 2 * math.pi * k / La
    part = np.sum(1.0 / (sk * np.hypot(1.0, sk)))
    # remainder beyond kmax ~ La^2/(4 pi^2 kmax)
    part += La * La / (4 * math.pi ** 2 * kmax)
    return 2.0 * (2.0 / La) * part


def hyperbolic_tube_exact(a, x0, eps):
    """-(2/log a) eps (-log eps) + eps F(G(tau_eps)),
    tau_eps = log_a(2 eps/(x0(1-a)))."""
    from .tube import sawtooth_G
    La = math.log(a)
    eps = np.asarray(eps, dtype=float)
    tau = np.log(2 * eps / (x0 * (1 - a))) / La
    tau = np.where(np.abs(tau - np.round(tau)) < 1e-12, np.round(tau), tau)
    return -2.0 / La * eps * (-np.log(eps)) + eps * hyperbolic_F(a, x0, sawtooth_G(np.maximum(tau, 0.0)))


def formal_class_from_tube(germ, x0, eps_min=1e-9, eps_max=1e-4, per_decade=400,
                           convention="exact"):
    """Recover (k, a, rho) from tube samples alone: D from the discrete tube,
    the leading residue and the eps log eps coefficient from V^c."""
    from .tube import eps_grid, orbit_for_eps, tube_length, tube_length_continuous
    from .germs import FatouCoordinate
    e = eps_grid(eps_min, eps_max, per_decade)
    o = orbit_for_eps(germ, x0, eps_min)
    D, _ = box_dimension_fit((e, tube_length(o, e)))
    kk = int(round(D / (1 - D)))
    if kk < 1:
        raise NonIntegralMultiplicity("fitted D = %.6g gives no multiplicity" % D)
    basis = [(j / (kk + 1.0), 0) for j in range(1, kk + 3)] + [(1.0, 1)]
    vc = tube_length_continuous(FatouCoordinate(germ), x0, e)
    fit = fit_expansion((e, vc), basis)
    lead = 1.0 / (kk + 1.0)
    res1 = fit.coef(lead) * lead
    ak1 = -fit.coef(1.0, 1)
    return recover_formal_class(D, res1, ak1, convention), (D, res1, ak1)
