import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from parazeta.dims import (InsufficientRange, NonIntegralMultiplicity,
                           box_dimension_fit, complex_dimensions,
                           fit_expansion, formal_class_from_tube,
                           forward_residues, has_nonreal_dimensions,
                           hyperbolic_F, hyperbolic_fourier_H,
                           hyperbolic_tail_bound, hurwitz_growth_probe,
                           locate_pole, recover_formal_class,
                           regularization_ratio, regularization_ratio_k,
                           residue_contour, scan_poles, tube_formula)
from parazeta.germs import FatouCoordinate, FormalClass, Hyperbolic, ModelParabolic
from parazeta.tube import (eps_grid, orbit_for_eps, sawtooth_G, tube_length,
                           tube_length_continuous)
from parazeta.zeta import extend_k1, extend_model_k, hyperbolic_zeta, to_distance

SQRT2 = math.sqrt(2)


def k1_distance(x0, M=4):
    return to_distance(extend_k1(x0, M))


def envelope_slope(e, d, per_bin=100):
    n = len(e) // per_bin
    le = np.log(e[:n * per_bin]).reshape(n, per_bin)
    ld = np.log(np.abs(d[:n * per_bin])).reshape(n, per_bin)
    j = np.argmax(ld, axis=1)
    return float(np.polyfit(le[np.arange(n), j], ld[np.arange(n), j], 1)[0])


def test_residue_half():
    assert abs(residue_contour(k1_distance(0.5), 0.5)[0] - SQRT2) < 1e-8


@pytest.mark.parametrize("x0", [0.3, 0.5, 0.7])
def test_residue_zero_stated(x0):
    # stated value 1 - 2/x0; the extension gives -2/x0 (see README)
    r = residue_contour(k1_distance(x0), 0.0)[0]
    assert abs(r - (1 - 2 / x0)) < 1e-8


@pytest.mark.parametrize("x0", [0.3, 0.5, 0.7])
def test_residue_zero_measured(x0):
    r = residue_contour(k1_distance(x0), 0.0)[0]
    assert abs(r + 2 / x0) < 1e-8


@pytest.mark.parametrize("k", [1, 2, 3])
def test_residue_independent_of_x0(k):
    w = k / (k + 1)
    r = [residue_contour(extend_model_k(k, x0, 4), w)[0] for x0 in (0.3, 0.5, 0.7)]
    assert max(abs(x - r[0]) for x in r) < 1e-8


def test_complex_dimensions_k1():
    dims = complex_dimensions(k1_distance(0.5, 6), -2.2)
    live = sorted(d.location.real for d in dims if not d.cancelled)
    dead = sorted(d.location.real for d in dims if d.cancelled)
    assert np.allclose(live, [-1.5, -0.5, 0, 0.5], atol=1e-10)
    assert np.allclose(dead, [-2, -1], atol=1e-10)
    for d in dims:
        if d.cancelled:
            assert abs(d.principal[0]) < 1e-9


@pytest.mark.parametrize("k", [1, 2, 3])
def test_rightmost_dimension(k):
    fd = extend_model_k(k, 0.5, 4)
    live = [d for d in complex_dimensions(fd, fd.sigma_min + 0.2) if not d.cancelled]
    right = max(live, key=lambda d: d.location.real)
    assert abs(right.location - k / (k + 1)) < 1e-10
    assert abs(locate_pole(fd, k / (k + 1)) - k / (k + 1)) < 1e-10


def test_complex_dimensions_hyperbolic():
    a = 0.5
    La = math.log(a)
    period = 2 * math.pi / abs(La)
    dims = complex_dimensions(hyperbolic_zeta(a, 0.5), -1.0, im_max=3 * period + 0.1)
    zero = [d for d in dims if abs(d.location) < 1e-9]
    assert len(zero) == 1 and zero[0].order == 2
    for k in range(-3, 4):
        if k:
            sk = 2j * math.pi * k / La
            assert min(abs(d.location - sk) for d in dims) < 1e-10
    assert all(abs(d.location.imag) <= 3 * period + 0.1 for d in dims)


def test_tube_formula_examples():
    x0 = 0.5
    fd = k1_distance(x0)
    dims = complex_dimensions(fd, -0.25)
    half = [d for d in dims if abs(d.location - 0.5) < 1e-9]
    for e in (1e-6, 1e-3):
        assert tube_formula(half, fd, e) == pytest.approx(2 * SQRT2 * math.sqrt(e), rel=1e-9)
        want = 2 * SQRT2 * math.sqrt(e) - 2 / x0 * e
        assert tube_formula(dims, fd, e) == pytest.approx(want, rel=1e-9)


def test_tube_formula_hyperbolic():
    a, x0 = 0.5, 0.5
    fd = hyperbolic_zeta(a, x0)
    d0 = [d for d in complex_dimensions(fd, -1.0, im_max=1.0) if abs(d.location) < 1e-9]
    La = math.log(a)
    # the double pole at 0 carries the eps log eps term and the mean of the
    # periodic part
    mean, _ = quad(lambda t: hyperbolic_F(a, x0, sawtooth_G(t)), 0, 1, points=[0.5])
    for e in (1e-7, 1e-4):
        want = -2 / La * e * (-math.log(e)) + e * mean
        assert tube_formula(d0, fd, e) == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_tube_formula_convergence(L):
    x0 = 0.5
    fd = k1_distance(x0, 2 * L + 2)
    dims = complex_dimensions(fd, 0.5 - L - 0.25)
    o = orbit_for_eps(ModelParabolic(1), x0, 1e-9)
    e = eps_grid(1e-9, 1e-5, 400)
    tf = np.array([tube_formula(dims, fd, x) for x in e])
    assert envelope_slope(e, tube_length(o, e) - tf) >= 1 + L / 2 - 0.05


def test_tube_formula_first_term_pointwise():
    x0 = 0.5
    fd = k1_distance(x0)
    half = [d for d in complex_dimensions(fd, 0.25)]
    o = orbit_for_eps(ModelParabolic(1), x0, 1e-10)
    e = eps_grid(1e-10, 1e-6, 50)
    ratio = tube_length(o, e) / np.array([tube_formula(half, fd, x) for x in e])
    assert np.max(np.abs(ratio - 1)) < 1e-2
    assert abs(ratio[0] - 1) < abs(ratio[-1] - 1)


def test_recover_examples():
    fc = recover_formal_class(0.5, SQRT2, 0.0)
    assert (fc.k, fc.a, fc.rho) == (1, pytest.approx(1.0, abs=1e-12), 0.0)
    fc = recover_formal_class(2 / 3, forward_residues(FormalClass(2, 1.0, 0.0), "stated")[1], 0.0)
    assert fc.k == 2
    fc = recover_formal_class(0.5, SQRT2, 2.8)
    assert fc.rho == pytest.approx(0.7, rel=1e-12)
    with pytest.raises(NonIntegralMultiplicity):
        recover_formal_class(0.6, 1.0, 0.0)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_recover_roundtrip_analytic(k, a):
    fd = extend_model_k(k, 0.5, 4, a=a)
    w = k / (k + 1)
    w1 = locate_pole(fd, w).real
    res1 = residue_contour(fd, w)[0].real
    for rho in (-0.5, 0.0, 0.7):
        ak1 = forward_residues(FormalClass(k, a, rho))[2]
        fc = recover_formal_class(w1, res1, ak1, "exact")
        assert fc.k == k
        assert abs(fc.a - a) < 1e-6
        assert abs(fc.rho - rho) < 1e-6


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_rho_zero_from_double_pole(k, a):
    c = residue_contour(extend_model_k(k, 0.5, 4, a=a), 0.0, 2)
    assert abs(c[1]) < 1e-8


@pytest.mark.parametrize("k,rho", [(1, -0.5), (1, 0.7), (2, 0.0), (2, 0.7)])
def test_recover_from_fit(k, rho):
    fc, _ = formal_class_from_tube(ModelParabolic(k, rho), 0.5)
    assert fc.k == k
    assert abs(fc.a - 1) < 0.02
    assert abs(fc.rho - rho) <= (0.02 * abs(rho) if rho else 0.02)


@pytest.mark.parametrize("k", [1, 3])
def test_box_dimension_model(k):
    e = eps_grid(1e-9, 1e-4, 400)
    o = orbit_for_eps(ModelParabolic(k), 0.5, 1e-9)
    D, _ = box_dimension_fit((e, tube_length(o, e)))
    assert abs(D - k / (k + 1)) < 0.01


def test_box_dimension_synthetic():
    e = np.geomspace(1e-8, 1e-2, 200)
    D, M = box_dimension_fit((e, 5 * e ** 0.3))
    assert abs(D - 0.7) < 1e-6 and abs(M - 5) < 1e-6
    with pytest.raises(InsufficientRange):
        box_dimension_fit((e[-50:], 5 * e[-50:] ** 0.3))


def test_fit_k1():
    x0 = 0.5
    e = eps_grid(1e-9, 1e-4, 400)
    vc = tube_length_continuous(FatouCoordinate(ModelParabolic(1)), x0, e)
    fit = fit_expansion((e, vc), [(0.5, 0), (1.0, 0), (1.5, 0)])
    assert fit.coef(0.5) == pytest.approx(2 * SQRT2, rel=1e-4)
    assert fit.coef(1.0) == pytest.approx(-2 / x0, rel=1e-4)
    assert fit.reliable


def test_fit_rho_stated():
    e = eps_grid(1e-9, 1e-4, 400)
    vc = tube_length_continuous(FatouCoordinate(ModelParabolic(1, 0.7)), 0.5, e)
    fit = fit_expansion((e, vc), [(0.5, 0), (1.0, 1), (1.0, 0), (1.5, 0)])
    assert fit.coef(1.0, 1) == pytest.approx(-2.8, rel=0.02)


def test_fit_rho_measured():
    e = eps_grid(1e-9, 1e-4, 400)
    vc = tube_length_continuous(FatouCoordinate(ModelParabolic(1, 0.7)), 0.5, e)
    fit = fit_expansion((e, vc), [(0.5, 0), (1.0, 1), (1.0, 0), (1.5, 0)])
    assert fit.coef(1.0, 1) == pytest.approx(0.7, rel=0.02)


def test_fit_synthetic():
    e = np.geomspace(1e-6, 1e-1, 300)
    basis = [(0.25, 0), (0.5, 0), (1.0, 1), (1.0, 0)]
    c = [1.5, -0.7, 0.3, 2.0]
    v = sum(ci * e ** al * np.log(e) ** p for ci, (al, p) in zip(c, basis))
    fit = fit_expansion((e, v), basis)
    assert np.allclose(fit.coefficients, c, rtol=1e-10, atol=0)
    assert fit.to_csv().startswith("exponent,log_power,coefficient")


def test_regularization_ratio():
    r = regularization_ratio(0.5, 2)
    for m, v in enumerate(r):
        assert abs(v / (2 * m + 1) - 1) < 0.01


def test_regularization_ratio_k_matches_k1():
    rows = regularization_ratio_k(1, 0.5)
    assert [round(w, 9) for w, _, _ in rows] == [0.5, -0.5, -1.5]
    for (_, r, _), want in zip(rows, regularization_ratio(0.5, 2)):
        assert abs(r - want) < 0.01 * want


@pytest.mark.parametrize("k", [2, 3])
def test_regularization_ratio_k_reports(k):
    # measurement only; the k >= 2 values are reported, not asserted
    rows = regularization_ratio_k(k, 0.5)
    assert rows[0][0] == pytest.approx(k / (k + 1), abs=1e-9)
    assert all(np.isfinite(r) and c > 0 for _, r, c in rows)


@pytest.mark.parametrize("sigma", [-1.0, 0.0, 2.0])
def test_hurwitz_growth_probe(sigma):
    t = np.geomspace(50, 2000, 25)
    z = [abs(complex(mpmath.zeta(mpmath.mpc(sigma, x), 0.7))) for x in t]
    want = np.polyfit(np.log(t), np.log(z), 1)[0]
    assert hurwitz_growth_probe(sigma, 0.7, t) == pytest.approx(want, abs=1e-8)


def test_fourier_mean():
    a, x0 = 0.5, 0.5
    t = np.arange(4096) / 4096
    La = math.log(a)
    const = 1 + (math.log(4) - 2) / La - 2 * math.log(x0 * (1 - a)) / La
    assert np.mean(hyperbolic_fourier_H(a, x0, t, 50)) == pytest.approx(const, rel=1e-12)


def test_fourier_matches_closed_form():
    a, x0, K = 0.5, 0.5, 2000
    tb = hyperbolic_tail_bound(a, K)
    t = 0.37
    # H(t) is F(G) at phase -t
    assert abs(hyperbolic_fourier_H(a, x0, t, K) - hyperbolic_F(a, x0, sawtooth_G(-t))) <= tb


def _hyperbolic_check(sign):
    a, x0, K = 0.5, 0.5, 2000
    La = math.log(a)
    o = orbit_for_eps(Hyperbolic(a), x0, 1e-12)
    rng = np.random.default_rng(11)
    e = np.exp(rng.uniform(math.log(1e-10), math.log(o.eps_n[0]), 50))
    tau = np.log(2 * e / (x0 * (1 - a))) / La
    want = -2 / La * e * (-np.log(e)) + e * hyperbolic_fourier_H(a, x0, sign * tau, K)
    return np.max(np.abs(tube_length(o, e) - want) / e), hyperbolic_tail_bound(a, K)


def test_hyperbolic_tube_stated_phase():
    err, tb = _hyperbolic_check(+1)
    assert err <= tb


def test_hyperbolic_tube_negated_phase():
    err, tb = _hyperbolic_check(-1)
    assert err <= tb


def test_dichotomy():
    fh = hyperbolic_zeta(0.5, 0.5)
    assert has_nonreal_dimensions(complex_dimensions(fh, -1.0, im_max=20))
    fd = extend_model_k(1, 0.5, 4)
    assert not has_nonreal_dimensions(complex_dimensions(fd, fd.sigma_min + 0.2, im_max=20))
    found = scan_poles(fd, (fd.sigma_min + 0.2, 1.2), (-20, 20), step=0.5)
    assert not [c for c, _ in found if abs(c.imag) > 0.5]
