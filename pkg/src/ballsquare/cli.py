"""
Command-line front end: one subcommand per experiment.

Configuration comes from an optional flat ``key=value`` file, overridden by
flags.  Exit status is 0 when every check passes, 1 on a tolerance failure
and 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import math
from pathlib import Path
import sys

from .errors import FitError, GridError, PreconditionError
from . import experiments as ex
from .grid_spectral import make_grid
from .kernels import KernelFamily
from .lp_decomposition import OctaveQuadrature, measure_decay

CONFIG_VERSION = "1"

SUBCOMMANDS = ("kernel-check", "l2-identity", "norm-sweep", "sharpness", "second-order",
               "lp-decay", "reverse-probe")

# key -> (flag, parser description)
KEYS = {
    "dim": "--dim", "alpha": "--alpha", "lambda": "--lambda", "p": "--p", "j": "--j",
    "N": "--N", "L": "--L", "t_min": "--t-min", "t_max": "--t-max",
    "nodes_per_octave": "--nodes-per-octave", "seed": "--seed", "out_dir": "--out-dir",
    "workers": "--workers", "trials": "--trials",
}
ALIASES = {"p_list": "p", "j_list": "j", "grid_N": "N", "grid_L": "L"}

DEFAULTS = {
    "kernel-check": {"dim": "1,2,3"},
    "l2-identity": {"dim": "1", "alpha": "0.5", "N": "65536", "L": "32", "t_min": "1e-4",
                    "t_max": "1e4", "nodes_per_octave": "16"},
    "norm-sweep": {"dim": "1", "alpha": "0.5", "lambda": "2", "p": "2", "N": "2048",
                   "L": "32", "t_min": "0.0625", "t_max": "16", "nodes_per_octave": "8"},
    "sharpness": {"dim": "1", "alpha": "0.25", "j": "4..13", "p": "1.05,1.2,1.4,1.6,1.9",
                  "N": "1048576", "L": "32", "nodes_per_octave": "8"},
    "second-order": {"dim": "1", "N": "4096", "L": "32", "t_max": "1",
                     "nodes_per_octave": "8"},
    "lp-decay": {"dim": "1", "alpha": "0.5", "j": "-6..6", "p": "2", "N": "8192",
                 "L": "1024", "t_min": "0.00390625", "t_max": "256", "nodes_per_octave": "8",
                 "trials": "20"},
    "reverse-probe": {"dim": "1", "alpha": "0.5", "p": "2", "N": "2048", "L": "32",
                      "t_min": "0.0625", "t_max": "16", "nodes_per_octave": "8"},
}
COMMON = {"seed": "0", "out_dir": "ballsquare-out", "workers": "1"}


class ConfigError(ValueError):
    """A configuration key is unknown or violates a precondition."""


def emit_default_config(subcommand):
    """Default ``key=value`` text for a subcommand."""
    if subcommand not in DEFAULTS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    vals = {**DEFAULTS[subcommand], **COMMON}
    lines = [f"# ballsquare {subcommand} defaults, config version {CONFIG_VERSION}"]
    lines += [f"{k}={vals[k]}" for k in sorted(vals)]
    return "\n".join(lines) + "\n"


def read_config_file(path):
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = ALIASES.get(key, key)
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r} in {path}:{num}")
        out[key] = val
    return out


def _num(key, text, kind=float):
    try:
        v = kind(text)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {text!r} as {kind.__name__}") from None
    if kind is float and not math.isfinite(v):
        raise ConfigError(f"key {key!r}: must be finite")
    return v


def _floats(key, text):
    return [_num(key, s) for s in text.split(",") if s.strip()]


def _jrange(text):
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = _num("j", a, int), _num("j", b, int)
        if hi < lo:
            raise ConfigError(f"key 'j': empty range {text!r}")
        return list(range(lo, hi + 1))
    return [_num("j", s, int) for s in text.split(",") if s.strip()]


def parse_config(sub, raw):
    """Typed, validated configuration from string values."""
    vals = {**DEFAULTS[sub], **COMMON, **raw}
    cfg = {}
    for key, text in vals.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        if key == "dim":
            dims = [_num(key, s, int) for s in text.split(",")]
            if any(d not in (1, 2, 3) for d in dims):
                raise ConfigError(f"key 'dim': must be 1, 2 or 3, got {text}")
            if sub != "kernel-check" and len(dims) != 1:
                raise ConfigError("key 'dim': a single dimension is required")
            cfg[key] = dims if sub == "kernel-check" else dims[0]
        elif key == "alpha":
            if text.strip().lower() == "second":
                if sub not in ("sharpness", "lp-decay"):
                    raise ConfigError(f"key 'alpha': 'second' is not valid for {sub}")
                cfg[key] = None
            else:
                a = _num(key, text)
                if not 0 < a < 2:
                    raise ConfigError(f"key 'alpha': must lie in (0, 2), got {a}")
                cfg[key] = a
        elif key == "lambda":
            lam = _num(key, text)
            if not lam > 1:
                raise ConfigError(f"key 'lambda': must exceed 1, got {lam}")
            cfg[key] = lam
        elif key == "p":
            ps = _floats(key, text)
            if not ps or any(not p > 1 for p in ps):
                raise ConfigError(f"key 'p': every value must exceed 1, got {text}")
            cfg[key] = ps
        elif key == "j":
            cfg[key] = _jrange(text)
        elif key == "N":
            N = _num(key, text, int)
            if N < 8 or N & (N - 1):
                raise ConfigError(f"key 'N': must be a power of two >= 8, got {N}")
            cfg[key] = N
        elif key in ("L", "t_min", "t_max"):
            v = _num(key, text)
            if not v > 0:
                raise ConfigError(f"key {key!r}: must be positive, got {v}")
            cfg[key] = v
        elif key in ("nodes_per_octave", "workers", "trials", "seed"):
            v = _num(key, text, int)
            floor = {"nodes_per_octave": 4, "workers": 1, "trials": 10, "seed": 0}[key]
            if v < floor:
                raise ConfigError(f"key {key!r}: must be at least {floor}, got {v}")
            cfg[key] = v
        elif key == "out_dir":
            cfg[key] = text
    if "t_min" in cfg and "t_max" in cfg and not cfg["t_min"] < cfg["t_max"]:
        raise ConfigError("keys 't_min'/'t_max': need t_min < t_max")
    return cfg


def _reports(sub, cfg):
    """Build the experiment reports for one subcommand (may raise precondition errors)."""
    w = cfg["workers"]
    if sub == "kernel-check":
        return [ex.kernel_check(dims=tuple(cfg["dim"]))]
    if sub == "l2-identity":
        return [ex.l2_identity(cfg["alpha"], cfg["dim"], cfg["N"], cfg["L"], cfg["t_min"],
                               cfg["t_max"], cfg["nodes_per_octave"], workers=w)]
    if sub == "norm-sweep":
        return [ex.equivalence_sweep(cfg["alpha"], p, cfg["lambda"], cfg["dim"], cfg["N"],
                                     cfg["L"], cfg["t_min"], cfg["t_max"],
                                     cfg["nodes_per_octave"], workers=w) for p in cfg["p"]]
    if sub == "sharpness":
        sc = ex.SharpnessConfig(dim=cfg["dim"], alpha=cfg["alpha"], js=tuple(cfg["j"]),
                                ps=tuple(cfg["p"]), N=cfg["N"], L=cfg["L"],
                                t_min=cfg.get("t_min"), t_max=cfg.get("t_max"),
                                nodes_per_octave=cfg["nodes_per_octave"])
        return [ex.sharpness_sweep(sc, workers=w)]
    if sub == "second-order":
        grid = make_grid(cfg["dim"], cfg["N"], cfg["L"])
        from .grid_spectral import sample_gaussian
        return [ex.second_order_recovery(sample_gaussian(grid, 1.0), t_upper=cfg["t_max"],
                                         nodes_per_octave=cfg["nodes_per_octave"], workers=w)]
    if sub == "lp-decay":
        fam = (KernelFamily.second_order(cfg["dim"]) if cfg["alpha"] is None
               else KernelFamily.fractional(cfg["dim"], cfg["alpha"]))
        grid = make_grid(cfg["dim"], cfg["N"], cfg["L"])
        oq = OctaveQuadrature(cfg["t_min"], cfg["t_max"], cfg["nodes_per_octave"])
        js = cfg["j"]
        out = []
        for p in cfg["p"]:
            d = measure_decay(fam, (min(js), max(js)), p=p, trials=cfg["trials"], grid=grid,
                              quad=oq, seed=cfg["seed"], workers=w)
            rep = ex.decay_report(d)
            rep.config.update(N=cfg["N"], L=cfg["L"], t_min=cfg["t_min"], t_max=cfg["t_max"],
                              nodes_per_octave=cfg["nodes_per_octave"], trials=cfg["trials"])
            out.append(rep)
        return out
    if sub == "reverse-probe":
        return [ex.reverse_probe(cfg["alpha"], p, cfg["dim"], cfg["N"], cfg["L"], cfg["t_min"],
                                 cfg["t_max"], cfg["nodes_per_octave"], workers=w)
                for p in cfg["p"]]
    raise ConfigError(f"unknown subcommand {sub!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="ballsquare", description=__doc__.strip().splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = subs.add_parser(name)
        sp.add_argument("--config", help="key=value configuration file")
        sp.add_argument("--defaults", action="store_true",
                        help="print the default configuration and exit")
        for key, flag in KEYS.items():
            sp.add_argument(flag, dest=f"opt_{key}", metavar=key.upper())
    return parser


def run(argv=None):
    """Parse ``argv``, run the experiment, write CSVs; return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    sub = args.subcommand
    if args.defaults:
        sys.stdout.write(emit_default_config(sub))
        return 0
    try:
        raw = read_config_file(args.config) if args.config else {}
        for key in KEYS:
            val = getattr(args, f"opt_{key}")
            if val is not None:
                raw[key] = val
        cfg = parse_config(sub, raw)
        reports = _reports(sub, cfg)
    except (ConfigError, PreconditionError, GridError, FitError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(cfg["out_dir"])
    ok = True
    for i, rep in enumerate(reports):
        rep.config["seed"] = cfg["seed"]
        stem = sub if len(reports) == 1 else f"{sub}_{i}"
        path = out_dir / f"{stem}.csv"
        ex.write_report(rep, path)
        for line in rep.summary_lines():
            print(line)
        print(f"wrote {path}")
        ok = ok and rep.passed
    return 0 if ok else 1


def main():
    sys.exit(run())
