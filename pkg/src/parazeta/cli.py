"""Command-line front end.

    parazeta orbit --germ model:k=1,rho=0 --x0 0.5 --cutoff 1e-4
    parazeta tube  --germ hyperbolic:a=0.5 --eps-min 1e-8 --eps-max 1e-3
    parazeta zeta  --germ model:k=1 --backend k1,mb --s-grid "0.2:0.8:4@-2:2:3"
    parazeta dims  --germ model:k=2 --backend modelk --recover-formal-class
    parazeta fit   --germ model:k=1,rho=0.7
    parazeta check

Settings come from an optional config file (key = value under any section
header) and are overridden by flags.  Every output starts with `#` comment
lines giving the version, the resolved config and the germ spec.
"""

import argparse
import configparser
import hashlib
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .specfun import NumericError
from .germs import DomainError, FatouCoordinate, Hyperbolic, ModelParabolic, parse_germ
from .tube import (EpsTooLarge, Orbit, build_orbit, continuous_critical_time,
                   critical_index, eps_cutoff, eps_grid, tube_length,
                   tube_length_continuous, tube_length_union)
from .zeta import (OutOfHalfPlane, extend_k1, extend_model_k,
                   extend_shifted_a_string, hyperbolic_geometric_zeta,
                   hyperbolic_zeta, mellin_barnes_k1, to_distance,
                   tube_from_distance)
from .dims import (box_dimension_fit, complex_dimensions, fit_expansion,
                   formal_class_from_tube, locate_pole, recover_formal_class,
                   residue_contour)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
BACKENDS = ("k1", "astring", "modelk", "hyperbolic", "mb")
ORACLES = ("none", "union")
NEAR_POLE = 1e-3


class ConfigError(ValueError):
    pass


def fmt(x):
    return "%.17g" % x


@dataclass
class RunConfig:
    germ: str = "model:k=1,rho=0"
    x0: float = 0.5
    cutoff: float = 1e-4
    eps_min: float = 1e-8
    eps_max: float = 1e-3
    eps_per_decade: int = 20
    s_grid: str = "0.8;1.2+1j;2"
    backend: str = "auto"
    kind: str = "distance"
    M: int = 6
    delta: float = 1.0
    precision: float = 1e-7
    window_left: float = float("nan")
    im_max: float = 20.0
    basis: str = ""
    route: str = "auto"
    recover_formal_class: bool = False
    oracle: str = "none"
    out: str = "-"
    cache_dir: str = ""
    threads: int = 4

    def header(self, command, germ):
        lines = ["# parazeta %s" % __version__, "# command: %s" % command,
                 "# germ: %s" % germ.spec]
        for k, v in sorted(asdict(self).items()):
            lines.append("# config: %s = %s" % (k, v))
        return "\n".join(lines) + "\n"


_CONVERT = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    typ = _CONVERT[key]
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if typ in (bool, "bool"):
            if isinstance(raw, bool):
                return raw
            low = raw.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return str(raw)
    except ValueError:
        raise ConfigError("bad value for %s: %r" % (key, raw)) from None


def load_config(path):
    """Flat key = value pairs; section headers only group them."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from None
    out = {}
    for sec in cp.sections():
        for key, val in cp.items(sec):
            key = key.replace("-", "_")
            if key not in _CONVERT:
                raise ConfigError("unknown config key %r in [%s]" % (key, sec))
            out[key] = _coerce(key, val)
    return out


def resolve(args):
    values = {}
    if args.config:
        values.update(load_config(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = _coerce(f.name, v)
    cfg = RunConfig(**values)
    for name in cfg.backend.split(","):
        if name not in BACKENDS + ("auto",):
            raise ConfigError("unknown backend %r" % name)
    if cfg.oracle not in ORACLES:
        raise ConfigError("oracle must be one of %s" % ", ".join(ORACLES))
    if cfg.kind not in ("distance", "geometric", "tube"):
        raise ConfigError("kind must be distance, geometric or tube")
    if cfg.kind == "tube" and cfg.delta < 0.5 * cfg.x0:
        raise ConfigError("tube kind needs delta >= eps_0 (take delta >= x0/2)")
    if cfg.route not in ("auto", "analytic", "fit"):
        raise ConfigError("route must be auto, analytic or fit")
    if not 0 < cfg.eps_min < cfg.eps_max:
        raise ConfigError("need 0 < eps_min < eps_max")
    if cfg.eps_per_decade < 1 or cfg.M < 0 or cfg.threads < 1:
        raise ConfigError("eps_per_decade, M and threads must be positive")
    return cfg


def parse_s_grid(text):
    """Items separated by `;`: a complex literal (`1.2+3j`), a real range
    `a:b:n`, or a rectangle `a:b:n@c:d:m` (real part x imaginary part)."""
    def rng(part):
        a, b, n = part.split(":")
        return np.linspace(float(a), float(b), int(n))

    pts = []
    for item in filter(None, (t.strip() for t in text.split(";"))):
        try:
            if "@" in item:
                re_part, im_part = item.split("@")
                for x in rng(re_part):
                    for y in rng(im_part):
                        pts.append(complex(x, y))
            elif ":" in item:
                pts.extend(complex(x) for x in rng(item))
            else:
                pts.append(complex(item.replace(" ", "")))
        except ValueError:
            raise ConfigError("bad s-grid item %r" % item) from None
    if not pts:
        raise ConfigError("empty s grid")
    return pts


# ------------------------------------------------------------- output ---
def _emit(cfg, text):
    if cfg.out == "-":
        sys.stdout.write(text)
        return
    d = os.path.dirname(cfg.out)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(cfg.out, "w", newline="\n") as fh:
        fh.write(text)


def _pmap(cfg, fn, items):
    # map keeps input order whatever the completion order
    if cfg.threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        return list(ex.map(fn, items))


def _germ(cfg):
    try:
        return parse_germ(cfg.germ)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# -------------------------------------------------------------- orbit ---
def orbit_key(germ, x0, cutoff):
    text = "%s|%s|%s" % (germ.spec, fmt(x0), fmt(cutoff))
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def cached_orbit(cfg, germ, x0, cutoff, builder):
    if not cfg.cache_dir:
        return builder()
    path = os.path.join(cfg.cache_dir, "orbit-%s.npz" % orbit_key(germ, x0, cutoff))
    if os.path.exists(path):
        with np.load(path) as z:
            return Orbit(germ, float(x0), z["points"], float(z["cutoff"]),
                         int(z["n_max"]), str(z["stop"]))
    o = builder()
    os.makedirs(cfg.cache_dir, exist_ok=True)
    tmp = path + ".tmp.npz"
    np.savez(tmp, points=o.points, cutoff=o.cutoff, n_max=o.n_max, stop=o.stop)
    os.replace(tmp, path)
    return o


def cmd_orbit(cfg):
    germ = _germ(cfg)
    o = cached_orbit(cfg, germ, cfg.x0, cfg.cutoff,
                     lambda: build_orbit(germ, cfg.x0, cfg.cutoff))
    pts = o.points
    ell = np.append(pts[:-1] - pts[1:], np.nan)
    # the last point's gap lies past the cutoff: report it from the germ
    ell[-1] = float(germ.gap(pts[-1]))
    rows = ["j,x_j,ell_j"]
    rows += ["%d,%s,%s" % (j, fmt(x), fmt(l)) for j, (x, l) in enumerate(zip(pts, ell))]
    _emit(cfg, cfg.header("orbit", germ) + "# stop: %s\n" % o.stop + "\n".join(rows) + "\n")
    return EXIT_OK


# --------------------------------------------------------------- tube ---
def cmd_tube(cfg):
    germ = _germ(cfg)
    eps = eps_grid(cfg.eps_min, cfg.eps_max, cfg.eps_per_decade)
    o = _tube_orbit(cfg, germ)
    fc = FatouCoordinate(germ)

    def row(e):
        try:
            n = critical_index(o, e)
            V = tube_length_union(o, e) if cfg.oracle == "union" else tube_length(o, e)
            tau = continuous_critical_time(fc, cfg.x0, e)
            Vc = tube_length_continuous(fc, cfg.x0, e)
        except EpsTooLarge:
            return "%s,nan,nan,nan,nan,nan" % fmt(e), e
        return ",".join([fmt(e), fmt(V), fmt(Vc), str(n), fmt(tau), fmt(n - tau)]), None

    res = _pmap(cfg, row, list(eps))
    lines = ["eps,V,Vc,n_eps,tau_eps,G"] + [r for r, _ in res]
    flagged = [e for _, e in res if e is not None]
    note = "".join("# EpsTooLarge at eps=%s\n" % fmt(e) for e in flagged)
    _emit(cfg, cfg.header("tube", germ) + note + "\n".join(lines) + "\n")
    return EXIT_OK


def _tube_orbit(cfg, germ):
    cutoff = eps_cutoff(germ, cfg.x0, cfg.eps_min)
    return cached_orbit(cfg, germ, cfg.x0, cutoff,
                        lambda: build_orbit(germ, cfg.x0, cutoff, 10 ** 8))


# --------------------------------------------------------------- zeta ---
def _model_params(germ, need_k1=False):
    if not isinstance(germ, ModelParabolic) or germ.rho != 0.0:
        raise ConfigError("this backend needs a model germ with rho = 0")
    if need_k1 and (germ.k != 1 or germ.a != 1.0):
        raise ConfigError("this backend needs model:k=1 with a = 1")
    return germ


def make_backend(name, germ, cfg):
    """A callable s -> value and the MeromorphicFn behind it (None for mb)."""
    geometric = cfg.kind == "geometric"
    if name == "k1":
        _model_params(germ, True)
        fn = extend_k1(cfg.x0, cfg.M)
    elif name == "astring":
        _model_params(germ, True)
        fn = extend_shifted_a_string(1.0, 1.0 / cfg.x0, cfg.M)
    elif name == "modelk":
        g = _model_params(germ)
        fn = extend_model_k(g.k, cfg.x0, cfg.M, a=g.a, geometric=True)
    elif name == "hyperbolic":
        if not isinstance(germ, Hyperbolic):
            raise ConfigError("hyperbolic backend needs a hyperbolic germ")
        if geometric:
            fn = hyperbolic_geometric_zeta(germ.a, cfg.x0)
        else:
            return hyperbolic_zeta(germ.a, cfg.x0), hyperbolic_zeta(germ.a, cfg.x0)
    else:  # mb
        _model_params(germ, True)
        M = max(cfg.M, 1)

        def mb(s):
            if s.real <= -M / 2.0 + 0.05:
                raise OutOfHalfPlane("mb needs Re s > %.6g" % (-M / 2.0 + 0.05))
            v = mellin_barnes_k1(cfg.x0, s, M)
            return v if geometric else v * 2.0 ** (1 - s) / s
        return mb, None
    if not geometric:
        fn = to_distance(fn)
    return fn, fn


def _near_pole(fn, s):
    if fn is None:
        return False
    return any(abs(s - p.pole) < NEAR_POLE for p in fn.poles())


def cmd_zeta(cfg):
    germ = _germ(cfg)
    pts = parse_s_grid(cfg.s_grid)
    names = [_pick_backend(n, germ) for n in cfg.backend.split(",")]
    built = [(n,) + make_backend(n, germ, cfg) for n in names]

    def row(s):
        vals = []
        for name, call, fn in built:
            try:
                vals.append((name, complex(call(s)), _near_pole(fn, s), None))
            except OutOfHalfPlane as exc:
                vals.append((name, complex(math.nan, math.nan), False, str(exc)))
            except ZeroDivisionError:
                vals.append((name, complex(math.nan, math.nan), True, "pole"))
        return vals

    if cfg.kind == "tube":
        plain = row
        dcfg = RunConfig(**{**asdict(cfg), "kind": "distance"})
        built = [(n,) + make_backend(n, germ, dcfg) for n in names]

        def row(s):
            if s == 1:
                nan = complex(math.nan, math.nan)
                return [(n, nan, False, "s = 1 is not evaluated through the "
                         "distance relation") for n, _, _ in built]
            return [(n, tube_from_distance(v, s, cfg.x0, cfg.delta), near, err)
                    for n, v, near, err in plain(s)]

    res = _pmap(cfg, row, pts)
    lines = ["re_s,im_s,re_val,im_val,backend"]
    notes = []
    worst = 0.0
    for s, vals in zip(pts, res):
        for name, v, near, err in vals:
            lines.append(",".join([fmt(s.real), fmt(s.imag), fmt(v.real), fmt(v.imag), name]))
            if err:
                notes.append("# %s refused s=%s: %s" % (name, fmt_c(s), err))
            elif near or abs(v) > 1e8:
                notes.append("# near-pole: %s at s=%s |value|=%.3g" % (name, fmt_c(s), abs(v)))
        ok = [v for _, v, _, e in vals if e is None]
        if len(ok) > 1:
            d = max(abs(a - b) / max(abs(b), 1e-300) for a in ok for b in ok)
            worst = max(worst, d)
            flag = " (above precision %g)" % cfg.precision if d > cfg.precision else ""
            notes.append("# discrepancy at s=%s: %.3e%s" % (fmt_c(s), d, flag))
    text = cfg.header("zeta", germ) + "\n".join(lines) + "\n"
    if len(names) > 1:
        notes.append("# max relative discrepancy: %.3e" % worst)
    if notes:
        text += "\n".join(notes) + "\n"
    _emit(cfg, text)
    for n in notes:
        if "near-pole" in n or "refused" in n or "max relative" in n or "above" in n:
            print(n, file=sys.stderr)
    return EXIT_OK


def fmt_c(s):
    return "%s%+.17gj" % (fmt(s.real), s.imag)


# --------------------------------------------------------------- dims ---
def _pick_backend(name, germ):
    if name != "auto":
        return name
    if isinstance(germ, Hyperbolic):
        return "hyperbolic"
    if isinstance(germ, ModelParabolic) and germ.rho == 0.0:
        return "k1" if (germ.k, germ.a) == (1, 1.0) else "modelk"
    raise ConfigError("no extension backend for %s" % germ.spec)


def cmd_dims(cfg):
    germ = _germ(cfg)
    name = cfg.backend.split(",")[0]
    try:
        name = _pick_backend(name, germ)
    except ConfigError:
        name = None
    out = [cfg.header("dims", germ).rstrip("\n")]
    fn = None
    if name is not None and name != "mb":
        dcfg = RunConfig(**{**asdict(cfg), "kind": "distance"})
        fn = make_backend(name, germ, dcfg)[1]
    if fn is not None:
        left = cfg.window_left
        if math.isnan(left):
            left = fn.sigma_min + 0.2 if math.isfinite(fn.sigma_min) else -1.0
        dims = complex_dimensions(fn, left, cfg.im_max)
        out.append("backend: %s" % fn.provenance)
        out.append("window: Re s > %s, |Im s| <= %s" % (fmt(left), fmt(cfg.im_max)))
        out.append("re,im,order,cancelled,principal")
        for d in dims:
            pp = ";".join(fmt_c(c) for c in d.principal)
            out.append("%s,%s,%d,%s,%s" % (fmt(d.location.real), fmt(d.location.imag),
                                         d.order, d.cancelled, pp))
    else:
        out.append("no analytic backend for this germ; dimension from tube samples")
    if cfg.recover_formal_class:
        if isinstance(germ, Hyperbolic):
            raise ConfigError("formal class is defined for parabolic germs only")
        route = cfg.route
        if route == "auto":
            route = "analytic" if fn is not None else "fit"
        if route == "analytic":
            if fn is None:
                raise ConfigError("analytic route needs an extension backend")
            live = [d for d in dims if not d.cancelled and abs(d.location.imag) < 1e-9]
            w = max(d.location.real for d in live)
            w1 = locate_pole(fn, w).real
            res1 = residue_contour(fn, w)[0].real
            ak1 = residue_contour(fn, 0.0, 2)[1].real
            fc = recover_formal_class(w1, res1, ak1, "exact")
            data = (w1, res1, ak1)
        else:
            fc, data = formal_class_from_tube(germ, cfg.x0, max(cfg.eps_min, 1e-9),
                                              min(cfg.eps_max, 1e-4))
        out.append("formal class (%s route): k=%d a=%s rho=%s" % (route, fc.k, fmt(fc.a),
                                                                  fmt(fc.rho)))
        out.append("inputs: D=%s res1=%s a_k1=%s" % tuple(fmt(x) for x in data))
    _emit(cfg, "\n".join(out) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- fit ---
def _parse_basis(text, D):
    if not text:
        kk = max(1, int(round(D / (1 - D)))) if D < 1 else 1
        return [(j / (kk + 1.0), 0) for j in range(1, kk + 3)] + [(1.0, 1)]
    basis = []
    for item in text.split(","):
        try:
            al, p = item.split(":") if ":" in item else (item, "0")
            basis.append((float(al), int(p)))
        except ValueError:
            raise ConfigError("basis items look like exponent:log_power") from None
    return basis


def cmd_fit(cfg):
    germ = _germ(cfg)
    e = eps_grid(cfg.eps_min, cfg.eps_max, cfg.eps_per_decade)
    o = _tube_orbit(cfg, germ)
    D, dfit = box_dimension_fit((e, tube_length(o, e)))
    basis = _parse_basis(cfg.basis, D)
    if isinstance(germ, Hyperbolic):
        vals = tube_length(o, e)
    else:
        vals = tube_length_continuous(FatouCoordinate(germ), cfg.x0, e)
    fit = fit_expansion((e, vals), basis)
    text = cfg.header("fit", germ) + "# box dimension D=%s\n" % fmt(D)
    text += "# samples: %s\n" % ("V" if isinstance(germ, Hyperbolic) else "Vc")
    if not fit.reliable:
        text += "# warning: ill-conditioned fit\n"
    _emit(cfg, text + fit.to_csv())
    return EXIT_OK


# -------------------------------------------------------------- check ---
def cmd_check(cfg, only=None):
    from .acceptance import run_all
    res = run_all(print, only)
    npass = sum(res.values())
    print("%d/%d criteria passed" % (npass, len(res)))
    return EXIT_OK if all(res.values()) else EXIT_FAIL


# --------------------------------------------------------------- main ---
def build_parser():
    p = argparse.ArgumentParser(prog="parazeta", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version="parazeta " + __version__)
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="config file (key = value under section headers)")
    a("--germ", help="model:k=1,rho=0 | hyperbolic:a=0.5 | jet:c2=-1,...")
    a("--x0")
    a("--cutoff")
    a("--eps-min", dest="eps_min")
    a("--eps-max", dest="eps_max")
    a("--eps-per-decade", dest="eps_per_decade")
    a("--s-grid", dest="s_grid")
    a("--backend", help="one or more of %s, comma separated" % "|".join(BACKENDS))
    a("--kind", help="distance (default), geometric or tube")
    a("--M")
    a("--delta")
    a("--precision", help="relative tolerance for cross-backend agreement")
    a("--window-left", dest="window_left")
    a("--im-max", dest="im_max")
    a("--basis", help="exponent:log_power,... for fit")
    a("--route", help="auto | analytic | fit")
    a("--recover-formal-class", dest="recover_formal_class", action="store_const",
      const="true")
    a("--oracle", help="none | union")
    a("--out", help="output file, - for stdout")
    a("--cache-dir", dest="cache_dir")
    a("--threads")
    for name in ("orbit", "tube", "zeta", "dims", "fit"):
        sub.add_parser(name, parents=[common])
    chk = sub.add_parser("check", parents=[common])
    chk.add_argument("--only", help="comma separated criterion numbers")
    return p


COMMANDS = {"orbit": cmd_orbit, "tube": cmd_tube, "zeta": cmd_zeta,
            "dims": cmd_dims, "fit": cmd_fit}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "check":
            only = None
            if args.only:
                only = {int(x) for x in args.only.split(",")}
            return cmd_check(cfg, only)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return COMMANDS[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print("numeric failure (%s): %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        # reader went away (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
