import cmath
import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from parazeta.dims import complex_dimensions, residue_contour
from parazeta.germs import Hyperbolic, JetParabolic, ModelParabolic
from parazeta.specfun import complex_binomial
from parazeta.tube import (FractalString, TailTerm, TubeSamples, build_orbit,
                           orbit_for_eps, tube_samples_exact)
from parazeta.zeta import (ExpansionTermList, OutOfHalfPlane, W, distance_zeta,
                           distance_zeta_full, extend_k1, extend_model_k,
                           extend_shifted_a_string, geometric_zeta_series,
                           h_coefficients, hyperbolic_geometric_zeta,
                           hyperbolic_zeta, mellin_barnes_base,
                           mellin_barnes_k1, power_series_pow, theoremC_zeta,
                           to_distance, tube_from_distance, tube_zeta_numeric,
                           tube_zeta_via_primitives)

SQRT2 = math.sqrt(2)


def rel(a, b):
    return abs(a - b) / abs(b)


def k1_string(x0=0.5, cutoff=1e-4):
    return FractalString.from_orbit(build_orbit(ModelParabolic(1), x0, cutoff))


def richardson_k1(s, x0=0.5, N=2_500_000):
    """sum of l_j^s, l_j = 1/((j+X)(j+X+1)), X = 1/x0: 10^7 terms in
    total and two Richardson steps on the N^{1-2s} tail."""
    X = 1 / x0

    def S(n):
        j = np.arange(n, dtype=float)
        return np.sum(np.exp(-s * (np.log(j + X) + np.log(j + X + 1))))

    p = 2 * s.real - 1
    a, b, c = S(N), S(2 * N), S(4 * N)
    r1 = 2.0 ** -(2 * s - 1)
    e1 = b + (b - a) * r1 / (1 - r1)
    e2 = c + (c - b) * r1 / (1 - r1)
    r2 = 2.0 ** -(2 * s)
    return e2 + (e2 - e1) * r2 / (1 - r2) if p > 0 else e2


# --------------------------------------------------------------- series ---

@pytest.mark.parametrize("germ,x0", [(ModelParabolic(1), 0.5), (ModelParabolic(2, 0.3), 0.4),
                                     (Hyperbolic(0.5), 0.5), (Hyperbolic(0.2), 0.7),
                                     (JetParabolic([0, 1, -1, 0.3]), 0.3),
                                     (ModelParabolic(3, -0.5), 0.6)])
def test_telescoping(germ, x0):
    st = FractalString.from_orbit(build_orbit(germ, x0, min(1e-3, 0.1 * x0)))
    assert abs(geometric_zeta_series(st, 1.0) - x0) < 1e-10
    assert abs(distance_zeta(st, 1.0) - x0) < 1e-10


def test_series_vs_brute_force():
    s = 0.8
    ref = richardson_k1(s)
    assert rel(geometric_zeta_series(k1_string(), s), ref) < 1e-9


def test_series_refuses_below_dimension():
    with pytest.raises(OutOfHalfPlane):
        geometric_zeta_series(k1_string(), 0.4)


def test_distance_zeta_quadrature():
    # integrate d(x, O)^{s-1} over the first gaps numerically, add the rest
    s = 0.9
    x0 = 0.5
    st = k1_string(x0)
    pts = 1 / (np.arange(0, 400) + 2.0)
    total = 0.0
    for hi, lo in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (hi + lo)
        # endpoint singularity handled by the algebraic weight
        one = lambda x: 1.0
        total += quad(one, lo, mid, weight="alg", wvar=(s - 1, 0), epsabs=0, epsrel=1e-12)[0]
        total += quad(one, mid, hi, weight="alg", wvar=(0, s - 1), epsabs=0, epsrel=1e-12)[0]
    j = np.arange(399, 10_000_000, dtype=float)
    rest = np.sum(2 * (0.5 / ((j + 2) * (j + 3))) ** s / s)
    # sum over j >= 10^7 by Euler-Maclaurin: integral plus half the first term
    f = lambda u: 2 * (0.5 / ((u + 2) * (u + 3))) ** s / s
    tail = float(mpmath.quad(f, [1e7, 1e9, mpmath.inf])) + 0.5 * f(1e7)
    ref = total + rest + tail
    assert rel(distance_zeta(st, s), ref) < 1e-8


def test_end_caps():
    st = k1_string()
    for s in (0.8, 1.3 + 2j):
        for d in (1.0, 0.7):
            lhs = distance_zeta_full(st, s, d) - distance_zeta(st, s)
            assert abs(lhs - 2 * d ** s / s) < 1e-13


# ------------------------------------------------------------ back-ends ---

def sample_points(rng, n, re_lo, re_hi, im_max, avoid=()):
    out = []
    while len(out) < n:
        s = complex(rng.uniform(re_lo, re_hi), rng.uniform(-im_max, im_max))
        if all(abs(s - a) > 0.15 for a in avoid):
            out.append(s)
    return out


def test_backend_agreement():
    x0 = 0.5
    rng = np.random.default_rng(11)
    pts = sample_points(rng, 20, -0.4, 2.0, 10.0, avoid=(0.5, 0.0))
    fns = {
        "k1": extend_k1(x0, 6),
        "astring": extend_shifted_a_string(1.0, 1 / x0, 6),
        "modelk": extend_model_k(1, x0, 6, geometric=True),
    }
    vals = {n: np.array([f(s) for s in pts]) for n, f in fns.items()}
    vals["mb"] = np.array([mellin_barnes_k1(x0, s, 3) for s in pts])
    names = list(vals)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = vals[names[i]], vals[names[j]]
            assert np.max(np.abs(a - b) / np.abs(b)) < 1e-7, (names[i], names[j])


def test_extend_k1_overlap():
    st = k1_string()
    fn = extend_k1(0.5, 4)
    assert rel(fn(0.75), geometric_zeta_series(st, 0.75)) < 1e-9


def test_extend_k1_residue_half():
    for x0 in (0.3, 0.5, 0.7):
        fd = to_distance(extend_k1(x0, 4))
        assert abs(residue_contour(fd, 0.5)[0] - SQRT2) < 1e-8


def test_extend_k1_residue_zero_stated():
    # stated value 1 - 2/x0
    for x0 in (0.3, 0.5, 0.7):
        fd = to_distance(extend_k1(x0, 4))
        assert abs(residue_contour(fd, 0.0)[0] - (1 - 2 / x0)) < 1e-8


def test_extend_k1_residue_zero_measured():
    for x0 in (0.3, 0.5, 0.7):
        fd = to_distance(extend_k1(x0, 4))
        assert abs(residue_contour(fd, 0.0)[0] + 2 / x0) < 1e-8


def test_W_examples():
    rng = np.random.default_rng(5)
    for _ in range(10):
        s = complex(rng.uniform(-3, 3), rng.uniform(-5, 5))
        a = rng.uniform(0.2, 2)
        assert rel(W(s, a, 0), a ** s) < 1e-13
        for n in range(7):
            ref = complex_binomial(-s, n)
            assert abs(W(s, 1.0, n) - ref) <= 1e-12 * max(1, abs(ref))


def test_W_matches_power_series():
    # W(s, a, n) = a^s [t^n] (sum_j h_j t^j)^s ; check the triple sum
    # against mpmath's series power
    mpmath.mp.dps = 40
    for a in (0.5, 1 / 3):
        for s in (0.7 + 1.1j, -1.25):
            H = h_coefficients(a, 7)
            c = power_series_pow(H, np.array([s]), 7)
            for n in range(7):
                ours = a ** s * c[n][0]
                assert abs(W(s, a, n) - ours) <= 1e-9 * max(1, abs(ours))
            # mpmath oracle: (1 + t)^{-a} expansion of the gap string
            sm = mpmath.mpc(s)
            ser = mpmath.taylor(lambda t: ((1 - (1 + t) ** (-a)) / (a * t)) ** sm
                                if t != 0 else mpmath.mpf(1), 0, 6)
            for n in range(7):
                assert abs(complex(ser[n]) - c[n][0]) <= 1e-12 * max(1, abs(complex(ser[n])))


def test_astring_matches_k1():
    x0 = 0.5
    a_fn = extend_shifted_a_string(1.0, 1 / x0, 6)
    k_fn = extend_k1(x0, 6)
    for s in (0.3 + 1j, -0.7 + 2j, 1.7, -1.2 - 3j):
        assert rel(a_fn(s), k_fn(s)) < 1e-9


def test_model_k_examples():
    for k in (1, 2, 3):
        fd = extend_model_k(k, 0.5, 6)
        live = [p for p in fd.poles()]
        assert abs(max(p.pole.real for p in live) - k / (k + 1)) < 1e-14
    fd1 = extend_model_k(1, 0.5, 6)
    fk = to_distance(extend_k1(0.5, 6))
    for s in (0.3 + 1j, -0.7 + 2j, 1.7):
        assert rel(fd1(s), fk(s)) < 1e-9
    st = FractalString.from_orbit(build_orbit(ModelParabolic(2), 0.6, 1e-3))
    assert rel(extend_model_k(2, 0.6, 6)(0.8), distance_zeta(st, 0.8)) < 1e-9


@pytest.mark.parametrize("k", [1, 2, 3])
def test_model_pole_lattice(k):
    fd = extend_model_k(k, 0.5, 6)
    for d in complex_dimensions(fd, fd.sigma_min + 0.2):
        if d.cancelled:
            continue
        w = d.location
        m = round(-w.real * (k + 1) / k)
        lattice = min(abs(w - k / (k + 1)), abs(w + m * k / (k + 1)))
        assert lattice < 1e-9
        assert d.order == 1


def test_k1_cancelled_flags():
    fd = to_distance(extend_k1(0.5, 6))
    dims = complex_dimensions(fd, -2.2)
    live = sorted(round(d.location.real, 6) for d in dims if not d.cancelled)
    dead = sorted(round(d.location.real, 6) for d in dims if d.cancelled)
    assert live == [-1.5, -0.5, 0.0, 0.5]
    assert dead == [-2.0, -1.0]
    for w in dead:
        assert abs(residue_contour(fd, w)[0]) < 1e-9


# ------------------------------------------------------------ hyperbolic ---

def test_hyperbolic_examples():
    a, x0 = 0.5, 0.5
    fd = hyperbolic_zeta(a, x0)
    assert abs(fd(1.0) - x0) < 1e-14
    La = math.log(a)
    poles = {complex(p.pole): p for p in fd.poles()}
    for k in range(1, 6):
        sk = 2j * math.pi * k / La
        assert min(abs(sk - w) for w in poles) < 1e-14
    assert poles[0j].order == 2
    # residue at s_1 by an independent contour quadrature in mpmath
    s1 = 2j * math.pi / La
    r = 0.3
    f = lambda t: complex(fd(s1 + r * cmath.exp(1j * float(t)))) * r * cmath.exp(1j * float(t))
    ref = complex(mpmath.quad(lambda t: f(t), [0, mpmath.pi / 2, mpmath.pi,
                                                3 * mpmath.pi / 2, 2 * mpmath.pi])) / (2 * math.pi)
    res = next(p for w, p in poles.items() if abs(w - s1) < 1e-12).laurent[0]
    assert abs(res - ref) < 1e-10


def test_hyperbolic_geometric_vs_series():
    st = FractalString.from_orbit(build_orbit(Hyperbolic(0.3), 0.4, 1e-6))
    hz = hyperbolic_geometric_zeta(0.3, 0.4)
    for s in (0.2 + 3j, 1.5, 0.05 - 7j):
        assert rel(hz(s), geometric_zeta_series(st, s)) < 1e-10


def test_hyperbolic_double_pole_series():
    # zeta = 2^{1-s}/s * (1-a)^s x0^s / (1 - a^s): expand at 0 with mpmath
    a, x0 = 0.5, 0.5
    fd = hyperbolic_zeta(a, x0)
    mpmath.mp.dps = 30
    g = lambda s: 2 ** (1 - s) * ((1 - a) * x0) ** s * s / (1 - mpmath.mpf(a) ** s)
    # s^2 zeta(s) = g(s)/... -> c_{-2} = g(0), c_{-1} = g'(0)
    ser = mpmath.taylor(g, 0, 1, method="quad", radius=0.5)
    p0 = next(p for p in fd.poles() if abs(p.pole) < 1e-14)
    assert abs(p0.laurent[1] - complex(ser[0])) < 1e-12
    assert abs(p0.laurent[0] - complex(ser[1])) < 1e-12
    co = residue_contour(fd, 0.0, 2)
    assert abs(co[1] - complex(ser[0])) < 1e-9 and abs(co[0] - complex(ser[1])) < 1e-9


# ------------------------------------------------------------ tube zeta ---

def const_samples(c, delta=1.0):
    eps = np.geomspace(1e-6, delta, 300)
    return TubeSamples(eps, np.full(eps.shape, c), tail=(TailTerm(0.0, (c,)),), exact=True)


def test_tube_zeta_constant():
    c, d = 2.5, 1.0
    ts = const_samples(c, d)
    for s in (1.5, 2 + 1j):
        want = c * d ** (s - 1) / (s - 1)
        assert rel(tube_zeta_numeric(ts, s, d), want) < 1e-10
        assert rel(tube_zeta_via_primitives(ts, 1, s, d), want) < 1e-10


@pytest.fixture(scope="module")
def k1_samples():
    o = orbit_for_eps(ModelParabolic(1), 0.5, 1e-9)
    return o, tube_samples_exact(o, 1e-9, 1.0)


def test_tube_relation(k1_samples):
    o, ts = k1_samples
    s = 0.8
    st = FractalString.from_orbit(o)
    lhs = distance_zeta(st, s)
    assert rel(0.5 + (1 - s) * tube_zeta_numeric(ts, s), lhs) < 1e-6


def test_tube_grid_refinement(k1_samples):
    o, ts = k1_samples
    fine = tube_samples_exact(o, 1e-9, 1.0, max_ratio=1.01, tail=ts.tail)
    for s in (0.8, 0.7 + 2j):
        assert rel(tube_zeta_numeric(ts, s), tube_zeta_numeric(fine, s)) < 1e-8


def test_primitives_vs_direct(k1_samples):
    _, ts = k1_samples
    for s in (0.8, 0.65 + 1j, 1.4 - 2j):
        direct = tube_zeta_numeric(ts, s)
        assert rel(tube_zeta_via_primitives(ts, 1, s), direct) < 1e-6


def test_primitives_below_dimension(k1_samples):
    _, ts = k1_samples
    s = 0.2
    fd = to_distance(extend_k1(0.5, 6))
    want = tube_from_distance(fd(s), s, 0.5, 1.0)
    assert rel(tube_zeta_via_primitives(ts, 2, s), want) < 1e-5


# -------------------------------------------------- zeta from an expansion ---

def test_theoremC_single_term():
    al, Mc = 0.4, 1.7
    fn = theoremC_zeta(ExpansionTermList(((al, Mc, (1.0,)),)))
    (p,) = fn.structure
    assert abs(p.pole - (1 - al)) < 1e-15
    assert abs(p.laurent[0] - Mc * al) < 1e-14


@pytest.mark.parametrize("m,n", [(0, 0), (1, 0), (2, 1), (1, 2)])
def test_theoremC_leading_coefficient(m, n):
    al, Mc = 0.3, 1.3
    P = tuple([0.0] * n + [1.0])
    tl = ExpansionTermList(((al, Mc, P),), m)
    poch = math.prod(al + 1 + i for i in range(m))
    tube = theoremC_zeta(tl, "tube").structure[0]
    assert abs(tube.laurent[-1] - Mc * poch * math.factorial(n)) < 1e-12
    dist = theoremC_zeta(tl, "distance").structure[0]
    # the distance form carries the extra factor (N - s) = alpha at the pole
    assert abs(dist.laurent[-1] - al * Mc * poch * math.factorial(n)) < 1e-12


def test_theoremC_k1_round_trip():
    x0 = 0.5
    tl = ExpansionTermList(((0.5, 2 * SQRT2, (1.0,)), (1.0, -2 / x0, (1.0,))))
    tc = theoremC_zeta(tl)
    fd = to_distance(extend_k1(x0, 4))
    for p in tc.structure:
        ref = residue_contour(fd, p.pole, p.order)
        assert max(abs(a - b) for a, b in zip(p.laurent, ref)) < 1e-8


# ------------------------------------------------------- Mellin-Barnes ---

def test_mb_examples():
    x0 = 0.5
    assert rel(mellin_barnes_k1(x0, 0.3, 1, 0.5), extend_k1(x0, 4)(0.3)) < 1e-7
    assert rel(mellin_barnes_k1(x0, 0.8, 1, 0.5), geometric_zeta_series(k1_string(), 0.8)) < 1e-8
    assert abs(mellin_barnes_base(0.3, 1.2) - 1.3 ** -1.2) < 1e-9
