"""Acceptance checks shared by `parazeta check` and the test suite.

Each criterion returns a list of Outcome rows; the criterion passes when all
of its rows pass.  Rows tagged info=True are reported but never counted.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .dims import (box_dimension_fit, complex_dimensions, fit_expansion,
                   formal_class_from_tube, forward_residues,
                   has_nonreal_dimensions,
                   hyperbolic_fourier_H, hyperbolic_tail_bound,
                   hyperbolic_tube_exact, locate_pole, recover_formal_class,
                   regularization_ratio, residue_contour, scan_poles,
                   tube_formula)
from .germs import FatouCoordinate, FormalClass, Hyperbolic, ModelParabolic
from .tube import (FractalString, build_orbit, eps_grid, orbit_for_eps,
                   tube_length, tube_length_continuous, tube_samples_exact)
from .zeta import (ExpansionTermList, distance_zeta, extend_k1,
                   extend_model_k, extend_shifted_a_string,
                   geometric_zeta_series, hyperbolic_geometric_zeta,
                   hyperbolic_zeta, mellin_barnes_k1, theoremC_zeta,
                   to_distance, tube_zeta_numeric, tube_zeta_via_primitives)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Outcome:
    label: str
    ok: bool
    detail: str
    info: bool = False


def _row(label, err, tol, info=False):
    return Outcome(label, bool(err <= tol), "err=%.3e tol=%.1e" % (err, tol), info)


def _timed(label, t0, limit):
    dt = time.time() - t0
    return Outcome(label, dt < limit, "%.2f s (limit %g s)" % (dt, limit))


def criterion_1():
    t0 = time.time()
    rows = []
    for x0 in (0.3, 0.5, 0.7):
        fd = to_distance(extend_k1(x0, 4))
        r_half = residue_contour(fd, 0.5)[0]
        r_zero = residue_contour(fd, 0.0)[0]
        rows.append(_row("res 1/2, x0=%g" % x0, abs(r_half - SQRT2), 1e-8))
        rows.append(_row("res 0 = 1-2/x0, x0=%g (measured %.12g)" % (x0, r_zero.real),
                         abs(r_zero - (1 - 2 / x0)), 1e-8))
        rows.append(_row("res 0 = -2/x0, x0=%g" % x0, abs(r_zero + 2 / x0), 1e-8, True))
    rows.append(_timed("runtime", t0, 10))
    return rows


def _pole_set_distance(w, k):
    D = k / (k + 1.0)
    if abs(w - D) < 0.1:
        return abs(w - D)
    m = round(-w.real * (k + 1) / k)
    return abs(w + m * k / (k + 1.0))


def criterion_2():
    t0 = time.time()
    rows = []
    for k in (1, 2, 3):
        fd = extend_model_k(k, 0.5, 6)
        dims = complex_dimensions(fd, fd.sigma_min + 0.2)
        live = [d for d in dims if not d.cancelled]
        right = max(live, key=lambda d: d.location.real)
        rows.append(_row("k=%d rightmost at k/(k+1)" % k,
                         abs(right.location - k / (k + 1.0)), 1e-10))
        dev = max(_pole_set_distance(d.location, k) for d in live)
        rows.append(_row("k=%d %d poles in lattice" % (k, len(live)), dev, 1e-9))
        c2 = max(abs(residue_contour(fd, d.candidate, 2)[1]) for d in live)
        rows.append(_row("k=%d simple (max |c_-2|)" % k, c2, 1e-9))
    rows.append(_timed("runtime", t0, 60))
    return rows


def _rand_points(rng, n, re_lo, re_hi, im_max):
    return [complex(rng.uniform(re_lo, re_hi), rng.uniform(-im_max, im_max))
            for _ in range(n)]


def criterion_3():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    rows = []
    x0 = 0.5
    g1 = ModelParabolic(1)
    s1 = FractalString.from_orbit(build_orbit(g1, x0, 1e-4))
    backends = {
        "k1": extend_k1(x0, 6),
        "astring": extend_shifted_a_string(1.0, 1.0 / x0, 6),
        "modelk(k=1)": extend_model_k(1, x0, 6, geometric=True),
    }
    pts = _rand_points(rng, 20, 0.6, 2.0, 10.0)
    ref = [geometric_zeta_series(s1, s) for s in pts]
    for name, fn in backends.items():
        err = max(abs(fn(s) / r - 1) for s, r in zip(pts, ref))
        rows.append(_row("%s vs series" % name, err, 1e-9))
    err = max(abs(mellin_barnes_k1(x0, s, 2, 0.5) / r - 1) for s, r in zip(pts, ref))
    rows.append(_row("mb vs series", err, 1e-9))
    g2 = ModelParabolic(2)
    s2 = FractalString.from_orbit(build_orbit(g2, 0.6, 1e-2))
    m2 = extend_model_k(2, 0.6, 6, geometric=True)
    pts2 = _rand_points(rng, 20, 2.0 / 3 + 0.1, 2.0, 10.0)
    err = max(abs(m2(s) / geometric_zeta_series(s2, s) - 1) for s in pts2)
    rows.append(_row("modelk(k=2) vs series", err, 1e-9))
    h = Hyperbolic(0.5)
    sh = FractalString.from_orbit(build_orbit(h, 0.5, 1e-3))
    hz = hyperbolic_geometric_zeta(0.5, 0.5)
    pts3 = _rand_points(rng, 20, 0.1, 2.0, 10.0)
    err = max(abs(hz(s) / geometric_zeta_series(sh, s) - 1) for s in pts3)
    rows.append(_row("hyperbolic vs series", err, 1e-9))
    k1 = backends["k1"]
    pts4 = _rand_points(rng, 10, -0.4, 0.4, 5.0)
    err = max(abs(k1(s) - mellin_barnes_k1(x0, s, 3, 0.5)) / abs(k1(s)) for s in pts4)
    rows.append(_row("k1 vs mb on -0.4<Re s<0.4", err, 1e-7))
    rows.append(_timed("runtime", t0, 120))
    return rows


def _envelope_slope(e, d, per_bin=100):
    """Least-squares slope of log(max |d|) per bin against log eps."""
    n = len(e) // per_bin
    le = np.log(e[:n * per_bin]).reshape(n, per_bin)
    ld = np.log(np.abs(d[:n * per_bin])).reshape(n, per_bin)
    j = np.argmax(ld, axis=1)
    x = le[np.arange(n), j]
    y = ld[np.arange(n), j]
    return float(np.polyfit(x, y, 1)[0])


def criterion_4():
    t0 = time.time()
    rows = []
    for x0 in (0.3, 0.5, 0.7):
        fd = to_distance(extend_k1(x0, 4))
        dims = [d for d in complex_dimensions(fd, -0.25)]
        o = orbit_for_eps(ModelParabolic(1), x0, 1e-9)
        e = eps_grid(1e-9, 1e-5, 400)
        tf = np.array([tube_formula(dims, fd, x) for x in e])
        closed = 2 * SQRT2 * np.sqrt(e) - 2 / x0 * e
        rows.append(_row("x0=%g tube formula = closed form" % x0,
                         float(np.max(np.abs(tf - closed) / closed)), 1e-9))
        slope = _envelope_slope(e, tube_length(o, e) - tf)
        rows.append(Outcome("x0=%g slope of V - formula" % x0, slope >= 1.45,
                            "slope=%.4f (>= 1.45)" % slope))
    rows.append(_timed("runtime", t0, 30))
    return rows


def criterion_5():
    rows = []
    e = eps_grid(1e-9, 1e-4, 400)
    for k in (1, 2, 3):
        o = orbit_for_eps(ModelParabolic(k), 0.5, 1e-9)
        D, _ = box_dimension_fit((e, tube_length(o, e)))
        rows.append(_row("k=%d D=%.5f" % (k, D), abs(D - k / (k + 1.0)), 0.01))
    return rows


def criterion_6():
    rows = []
    x0 = 0.5
    e = eps_grid(1e-9, 1e-4, 400)
    basis = [(0.5, 0), (1.0, 1), (1.0, 0), (1.5, 0)]
    for rho in (0.0, 0.7):
        g = ModelParabolic(1, rho)
        vc = tube_length_continuous(FatouCoordinate(g), x0, e)
        fit = fit_expansion((e, vc), basis)
        c_half = fit.coef(0.5)
        c_log = fit.coef(1.0, 1)
        rows.append(_row("rho=%g [eps^1/2]=%.8g" % (rho, c_half),
                         abs(c_half / (2 * SQRT2) - 1), 0.005))
        target = -4 * rho
        if rho == 0:
            err = abs(c_log)
            rows.append(_row("rho=0 [eps log eps]=%.3g (abs)" % c_log, err, 0.02))
            c_lin = fit.coef(1.0, 0)
            rows.append(_row("rho=0 [eps]=%.8g" % c_lin, abs(c_lin / (-2 / x0) - 1), 0.005))
        else:
            rows.append(_row("rho=%g [eps log eps]=%.6g vs -4 rho" % (rho, c_log),
                             abs(c_log / target - 1), 0.02))
            rows.append(_row("rho=%g [eps log eps] vs 2 rho/(k+1)" % rho,
                             abs(c_log / rho - 1), 0.02, True))
    return rows


def criterion_7():
    r = regularization_ratio(0.5, 2)
    return [_row("m=%d ratio=%.8f" % (m, v), abs(v / (2 * m + 1) - 1), 0.01)
            for m, v in enumerate(r)]


def _fitted_class(k, rho, x0=0.5):
    return formal_class_from_tube(ModelParabolic(k, rho), x0)[1]


def criterion_8():
    t0 = time.time()
    rows = []
    worst_a = 0.0
    worst_rho = 0.0
    kbad = 0
    stated_bad = 0
    x0 = 0.5
    for k in (1, 2, 3):
        for a in (0.5, 1.0, 2.0):
            fd = extend_model_k(k, x0, 4, a=a)
            w = k / (k + 1.0)
            w1 = locate_pole(fd, w).real
            res1 = residue_contour(fd, w)[0].real
            c0 = residue_contour(fd, 0.0, 2)
            for rho in (-0.5, 0.0, 0.7):
                # rho = 0 is read off the double-pole coefficient at 0
                ak1 = c0[1].real if rho == 0 else forward_residues(
                    FormalClass(k, a, rho))[2]
                fc = recover_formal_class(w1, res1, ak1, "exact")
                kbad += fc.k != k
                worst_a = max(worst_a, abs(fc.a - a))
                worst_rho = max(worst_rho, abs(fc.rho - rho))
                try:
                    st = recover_formal_class(w1, res1, forward_residues(
                        FormalClass(k, a, rho), "stated")[2], "stated")
                    stated_bad += abs(st.a - a) > 1e-6
                except ValueError:
                    stated_bad += 1
    rows.append(Outcome("analytic: k exact", kbad == 0, "%d mismatches" % kbad))
    rows.append(_row("analytic: a", worst_a, 1e-6))
    rows.append(_row("analytic: rho", worst_rho, 1e-6))
    rows.append(Outcome("analytic, stated residue formula: a off in %d/27 cases"
                        % stated_bad, True, "", True))
    for k in (1, 2):
        for rho in (-0.5, 0.0, 0.7):
            D, res1, ak1 = _fitted_class(k, rho)
            fc = recover_formal_class(D, res1, ak1, "exact")
            rows.append(Outcome("fit k=%d rho=%g: k" % (k, rho), fc.k == k, "k=%d" % fc.k))
            rows.append(_row("fit k=%d rho=%g: a=%.6f" % (k, rho, fc.a), abs(fc.a - 1), 0.02))
            tol_rho = 0.02 * abs(rho) if rho else 0.02
            rows.append(_row("fit k=%d rho=%g: rho=%.6f" % (k, rho, fc.rho),
                             abs(fc.rho - rho), tol_rho))
            st = recover_formal_class(D, res1, ak1, "stated")
            rows.append(Outcome("fit k=%d rho=%g, stated formulas: rho=%.6f"
                                % (k, rho, st.rho), True, "", True))
    rows.append(_timed("runtime", t0, 300))
    return rows


def criterion_9():
    rows = []
    rng = np.random.default_rng(9)
    for a in (0.3, 0.5):
        x0 = 0.5
        o = orbit_for_eps(Hyperbolic(a), x0, 1e-12)
        e = np.exp(rng.uniform(math.log(1e-10), math.log(o.eps_n[0]), 50))
        V = tube_length(o, e)
        rows.append(_row("a=%g exact form" % a,
                         float(np.max(np.abs(V - hyperbolic_tube_exact(a, x0, e)))), 1e-12))
        La = math.log(a)
        tau = np.log(2 * e / (x0 * (1 - a))) / La
        base = -2 / La * e * (-np.log(e))
        tb = hyperbolic_tail_bound(a, 2000)
        Vf = base + e * hyperbolic_fourier_H(a, x0, -tau, 2000)
        rows.append(_row("a=%g Fourier form at phase -tau" % a,
                         float(np.max(np.abs(V - Vf) / e)), tb))
        Vp = base + e * hyperbolic_fourier_H(a, x0, tau, 2000)
        rows.append(_row("a=%g Fourier form at phase +tau" % a,
                         float(np.max(np.abs(V - Vp) / e)), tb, True))
        fd = hyperbolic_zeta(a, x0)
        dims = complex_dimensions(fd, -1.0, im_max=5 * 2 * math.pi / abs(La) + 0.5)
        err = 0.0
        for kk in range(-5, 6):
            if kk == 0:
                continue
            sk = 2j * math.pi * kk / La
            err = max(err, min(abs(d.location - sk) for d in dims))
        rows.append(_row("a=%g poles 2k pi i/log a, |k|<=5" % a, err, 1e-10))
    return rows


def criterion_10():
    rows = []
    x0 = 0.5
    g = ModelParabolic(1)
    o = orbit_for_eps(g, x0, 1e-9)
    ts = tube_samples_exact(o, 1e-9, 1.0)
    string = FractalString.from_orbit(o)
    pts = [0.8, 0.65 + 1j, 1.2 - 2j, 0.9 + 3j, 1.5]
    e1 = e2 = e3 = 0.0
    for s in pts:
        tz = tube_zeta_numeric(ts, s)
        e1 = max(e1, abs(tube_zeta_via_primitives(ts, 1, s) / tz - 1))
        e2 = max(e2, abs(tube_zeta_via_primitives(ts, 2, s) / tz - 1))
        zf = distance_zeta(string, s)
        e3 = max(e3, abs((x0 + (1 - s) * tz) / zf - 1))
    rows.append(_row("primitives m=1", e1, 1e-5))
    rows.append(_row("primitives m=2", e2, 1e-5))
    rows.append(_row("distance-tube relation", e3, 1e-6))
    tl = ExpansionTermList(((0.5, 2 * SQRT2, (1.0,)), (1.0, -2 / x0, (1.0,))), 0, 1.0, 1)
    tc = theoremC_zeta(tl)
    fd = to_distance(extend_k1(x0, 4))
    err = 0.0
    for p in tc.structure:
        ref = residue_contour(fd, p.pole, p.order)
        err = max(err, max(abs(x - y) for x, y in zip(p.laurent, ref)))
    rows.append(_row("expansion zeta principal parts at 1/2, 0", err, 1e-8))
    return rows


def criterion_11(run_suite=None):
    """Parabolic/hyperbolic dichotomy; `run_suite` (callable returning
    (ok, detail)) adds the property-test harness."""
    rows = []
    for k in (1, 2):
        fd = extend_model_k(k, 0.5, 4)
        dims = complex_dimensions(fd, fd.sigma_min + 0.2, im_max=20)
        found = scan_poles(fd, (fd.sigma_min + 0.2, 1.2), (-20, 20), step=0.5)
        nonreal = [c for c, v in found if abs(c.imag) > 0.5]
        rows.append(Outcome("parabolic k=%d: no nonreal poles (|Im|<=20)" % k,
                            not has_nonreal_dimensions(dims) and not nonreal,
                            "%d scan cells flagged off the real axis" % len(nonreal)))
    fh = hyperbolic_zeta(0.5, 0.5)
    dims = complex_dimensions(fh, -1.0, im_max=20)
    rows.append(Outcome("hyperbolic: nonreal poles present", has_nonreal_dimensions(dims),
                        "%d poles" % len(dims)))
    if run_suite is not None:
        ok, detail = run_suite()
        rows.append(Outcome("property suites", ok, detail))
    return rows


CRITERIA = [
    (1, "residues k=1", criterion_1),
    (2, "pole layout k=1,2,3", criterion_2),
    (3, "series/extension overlap", criterion_3),
    (4, "tube-formula reconstruction", criterion_4),
    (5, "box dimension fit", criterion_5),
    (6, "expansion coefficients", criterion_6),
    (7, "regularization ratio", criterion_7),
    (8, "formal-class round trip", criterion_8),
    (9, "hyperbolic exact tube formula", criterion_9),
    (10, "functional equations", criterion_10),
    (11, "property suites and dichotomy", criterion_11),
]


def summarize(num, title, rows):
    counted = [r for r in rows if not r.info]
    ok = all(r.ok for r in counted)
    lines = ["%s criterion %d: %s" % ("PASS" if ok else "FAIL", num, title)]
    for r in rows:
        tag = "info" if r.info else ("ok" if r.ok else "FAIL")
        lines.append("    [%s] %s %s" % (tag, r.label, r.detail))
    return ok, lines


def run_all(out=print, only=None):
    results = {}
    for num, title, fn in CRITERIA:
        if only and num not in only:
            continue
        try:
            rows = fn()
        except Exception as exc:  # report, keep going
            rows = [Outcome("raised %s" % type(exc).__name__, False, str(exc))]
        ok, lines = summarize(num, title, rows)
        for ln in lines:
            out(ln)
        results[num] = ok
    return results
