"""Command line experiment runner.

Every CSV starts with ``#cfg key=value`` lines echoing the effective
configuration, so a report can be fed straight back through ``--config``.
Exit codes: 0 success, 1 validation failure, 2 runtime failure, 3 failed
``verify`` property.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import ergodic as erg
from .integrators import EE, LIE, SCHEMES, SchemeConfig, StepError, simulate
from .models import DriftBlowUp, ValidationError, heat_sin_model, linear_model, validate
from .noise import RNG_VERSION

SEED_ENV = "ERGODIC_SPDE_SEED"
EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3

WEAK_COLUMNS = ["level", "h", "error", "stderr", "samples", "seed", "scheme", "noise", "T"]
ERGODIC_COLUMNS = ["model", "scheme", "noise", "n", "tau", "T", "functional", "samples", "seed",
                   "value", "stderr"]
SIM_COLUMNS = ["step", "t", "mean_sq_norm", "phi_mean", "phi_stderr"]

# key -> (default, kind); kinds drive parsing and canonical echo
KEYS = {
    "model": ("heat_sin", str),
    "noise": ("white", str),
    "n": (100, int),
    "beta": (None, float),
    "dealias_factor": (2, int),
    "u0": ("sine", str),
    "drift_b": (0.0, float),
    "scheme": (EE, str),
    "tau": ("2^-6", "dyadic"),
    "T": ("20", "dyadic"),
    "M": (None, int),
    "functional": ("phi1", str),
    "samples": (100, int),
    "seed": (None, int),
    "threads": (1, int),
    "tau_ladder": ("2^-5..2^-9", "ladder"),
    "tau_ref": ("2^-12", "dyadic"),
    "n_ladder": ("2^1..2^7", "nladder"),
    "n_ref": (1024, int),
    "record_every": (None, int),
    "unsafe": (False, bool),
}
# thread count never changes results, so it stays out of the echo
ECHO_KEYS = [k for k in KEYS if k != "threads"]
ALIASES = {"phi": "functional", "tau-ladder": "tau_ladder", "tau-ref": "tau_ref", "n-ladder": "n_ladder",
           "n-ref": "n_ref", "dealias-factor": "dealias_factor", "record-every": "record_every",
           "drift-b": "drift_b"}


class ConfigError(ValueError):
    pass


_DYADIC = re.compile(r"^\s*(?:(\d+)\s*\*\s*)?2\^\(?\s*(-?\d+)\s*\)?\s*$")


def parse_dyadic(text) -> Fraction:
    """Exact rational from ``2^-6``, ``3*2^-4``, ``1/64``, ``20`` or ``0.015625``."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, (int, float)):
        return Fraction(text)
    m = _DYADIC.match(str(text))
    if m:
        mant = int(m.group(1) or 1)
        return mant * Fraction(2) ** int(m.group(2))
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse {text!r} as an exact number") from None


def format_dyadic(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    if x > 0 and x.denominator & (x.denominator - 1) == 0 and x.numerator & (x.numerator - 1) == 0:
        e = x.numerator.bit_length() - x.denominator.bit_length()
        return f"2^{e}" if e else "1"
    return str(x)


def parse_ladder(text) -> list[Fraction]:
    """``2^-5..2^-8`` (every power of two in between) or a comma list."""
    if isinstance(text, (list, tuple)):
        return [parse_dyadic(t) for t in text]
    text = str(text)
    if ".." in text:
        a, b = (parse_dyadic(t) for t in text.split(".."))
        ea, eb = (math.log2(v) for v in (a, b))
        if ea != int(ea) or eb != int(eb):
            raise ConfigError(f"range ladder {text!r} needs power-of-two endpoints")
        step = 1 if eb >= ea else -1
        return [Fraction(2) ** e for e in range(int(ea), int(eb) + step, step)]
    return [parse_dyadic(t) for t in text.split(",") if t.strip()]


def parse_nladder(text) -> list[int]:
    vals = parse_ladder(text)
    if any(v.denominator != 1 or v < 1 for v in vals):
        raise ConfigError(f"mode ladder {text!r} must contain positive integers")
    return [int(v) for v in vals]


def _parse_value(key, raw):
    default, kind = KEYS[key]
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
        return None
    try:
        if kind == "dyadic":
            return parse_dyadic(raw)
        if kind in ("ladder", "nladder"):
            return parse_ladder(raw) if kind == "ladder" else parse_nladder(raw)
        if kind is bool:
            return raw if isinstance(raw, bool) else str(raw).strip().lower() in ("1", "true", "yes", "on")
        if kind is int:
            return int(parse_dyadic(raw)) if not isinstance(raw, int) else raw
        return kind(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def _echo_value(key, value):
    kind = KEYS[key][1]
    if value is None:
        return "none"
    if kind == "dyadic":
        return format_dyadic(value)
    if kind == "ladder":
        return ",".join(format_dyadic(v) for v in value)
    if kind == "nladder":
        return ",".join(str(v) for v in value)
    if kind is bool:
        return "true" if value else "false"
    return str(value)


def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#cfg key=value`` lines (report echoes) are read too."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line.startswith("#cfg "):
            line = line[5:]
        elif not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        key = ALIASES.get(key.strip(), key.strip())
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r} in {path}")
        out[key] = value.strip()
    return out


def resolve_config(file_cfg: dict, flags: dict) -> dict:
    cfg = {k: _parse_value(k, d) if isinstance(d, str) and KEYS[k][1] != str else d
           for k, (d, _) in KEYS.items()}
    for src in (file_cfg, flags):
        for k, v in src.items():
            if v is not None:
                cfg[k] = _parse_value(k, v)
    if cfg["seed"] is None:
        cfg["seed"] = int(os.environ.get(SEED_ENV, "0"))
    if cfg["scheme"] not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}")
    if cfg["M"] is not None:
        T = cfg["M"] * cfg["tau"]
        if ("T" in file_cfg or "T" in flags) and cfg["T"] is not None and cfg["T"] != T:
            raise ConfigError(f"T = {format_dyadic(cfg['T'])} disagrees with M * tau = {format_dyadic(T)}")
        cfg["T"] = T
    return cfg


def build_model(cfg, n=None):
    n = cfg["n"] if n is None else n
    if cfg["model"] == "heat_sin":
        return heat_sin_model(n, cfg["noise"], cfg["beta"], cfg["dealias_factor"], cfg["u0"])
    if cfg["model"] in ("linear", "ou"):
        return linear_model(n, cfg["noise"], cfg["drift_b"], cfg["beta"], cfg["u0"])
    raise ConfigError(f"unknown model {cfg['model']!r}")


def _require_T(cfg):
    if cfg["T"] is None:
        raise ConfigError("either T or M is required")
    return cfg["T"]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, Fraction):
        return repr(float(x))
    return str(x)


def render_csv(cfg: dict, kind: str, columns: list, rows: list, footer: list | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"#kind {kind}\n#rng {RNG_VERSION}\n")
    for k in ECHO_KEYS:
        buf.write(f"#cfg {k}={_echo_value(k, cfg[k])}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    for line in footer or []:
        buf.write(f"#fit {json.dumps(line, sort_keys=True)}\n")
    return buf.getvalue()


FIT_COLUMNS = ["scheme", "axis", "slope", "intercept", "residual", "levels"]


def render_fit_csv(fits) -> str:
    lines = [",".join(FIT_COLUMNS)]
    for f in fits:
        if "error" in f:
            lines.append(f"{f['scheme']},{f['axis']},nan,nan,nan,\"{f['error']}\"")
            continue
        levels = " ".join(repr(v) for v in f["levels"])
        lines.append(f"{f['scheme']},{f['axis']},{f['slope']!r},{f['intercept']!r},{f['residual']!r},{levels}")
    return "\n".join(lines) + "\n"


def _weak_rows(report, cfg):
    rows = []
    for lv, h, e, se in zip(report.levels, report.h(), report.errors, report.stderrs):
        rows.append(dict(level=lv, h=h, error=e, stderr=se, samples=report.samples, seed=cfg["seed"],
                         scheme=report.scheme, noise=report.noise, T=report.T))
    return rows


def _fits(report, axes):
    out = []
    for axis in axes:
        try:
            fit = erg.fit_order(report, axis=axis)
        except ValueError as exc:
            out.append({"scheme": report.scheme, "axis": axis, "error": str(exc)})
            continue
        out.append({"scheme": report.scheme, "axis": axis, "slope": fit.slope, "intercept": fit.intercept,
                    "residual": fit.residual, "levels": [float(v) for v in fit.levels]})
    return out


PLOT_SCRIPT = '''"""Log-log plot of {csv}; generated by ergodic-spde."""
import csv
import sys

import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(l for l in open("{csv}") if not l.startswith("#"))]
for scheme in sorted({{r["scheme"] for r in rows}}):
    sel = [r for r in rows if r["scheme"] == scheme and float(r["error"]) > 0]
    h = [float(r["h"]) for r in sel]
    plt.loglog(h, [float(r["error"]) for r in sel], "o-", label=scheme)
    if h:
        e0 = float(sel[0]["error"])
        plt.loglog(h, [e0 * (x / h[0]) ** {ref} for x in h], "k--", lw=0.8)
plt.xlabel("h")
plt.ylabel("weak error")
plt.legend()
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else "{stem}.png", dpi=150)
'''


def cmd_simulate(cfg):
    p = build_model(cfg)
    steps = erg.steps_for(_require_T(cfg), cfg["tau"])
    c = SchemeConfig.for_problem(p, cfg["scheme"], float(cfg["tau"]), steps, cfg["unsafe"])
    every = cfg["record_every"] or max(1, steps // 1000)
    traj = simulate(p, c, cfg["seed"], cfg["samples"], record_every=every, threads=cfg["threads"])
    phi = erg.get_functional(cfg["functional"])
    rows = []
    for m, snap in zip(traj.steps, traj.snapshots):
        vals = phi(snap)
        se = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
        rows.append(dict(step=int(m), t=m * c.tau, mean_sq_norm=float(np.mean(np.sum(snap**2, axis=-1))),
                         phi_mean=float(np.mean(vals)), phi_stderr=se))
    return "simulate", SIM_COLUMNS, rows, None, None


def cmd_ergodic(cfg):
    p = build_model(cfg)
    steps = erg.steps_for(_require_T(cfg), cfg["tau"])
    c = SchemeConfig.for_problem(p, cfg["scheme"], float(cfg["tau"]), steps, cfg["unsafe"])
    r = erg.ergodic_time_average(p, c, cfg["functional"], cfg["samples"], cfg["seed"], cfg["threads"])
    row = dict(model=r.model, scheme=r.scheme, noise=r.noise, n=r.n, tau=r.tau, T=r.T, functional=r.functional,
               samples=r.samples, seed=r.seed, value=r.value, stderr=r.stderr)
    return "ergodic", ERGODIC_COLUMNS, [row], None, None


def _temporal(cfg, scheme):
    p = build_model(cfg)
    T = _require_T(cfg)
    return erg.weak_error_temporal(p, [Fraction(t) for t in cfg["tau_ladder"]], cfg["tau_ref"], T,
                                   cfg["functional"], cfg["samples"], cfg["seed"], scheme, cfg["threads"])


def cmd_weak_temporal(cfg):
    rep = _temporal(cfg, cfg["scheme"])
    return "weak-temporal", WEAK_COLUMNS, _weak_rows(rep, cfg), _fits(rep, ["tau"]), 0.5


def cmd_weak_spatial(cfg):
    p = build_model(cfg, n=cfg["n_ref"])
    rep = erg.weak_error_spatial(p, cfg["n_ladder"], cfg["n_ref"], cfg["tau"], _require_T(cfg),
                                 cfg["functional"], cfg["samples"], cfg["seed"], cfg["scheme"], cfg["threads"])
    return "weak-spatial", WEAK_COLUMNS, _weak_rows(rep, cfg), _fits(rep, ["n", "lambda"]), 1.0


def cmd_compare(cfg):
    rows, fits = [], []
    for scheme in (EE, LIE):
        rep = _temporal(cfg, scheme)
        rows += _weak_rows(rep, cfg)
        fits += _fits(rep, ["tau"])
    return "compare", WEAK_COLUMNS, rows, fits, 0.5


COMMANDS = {"simulate": cmd_simulate, "ergodic": cmd_ergodic, "weak-temporal": cmd_weak_temporal,
            "weak-spatial": cmd_weak_spatial, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergodic-spde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["verify"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key=value file (report CSVs work too)")
        sp.add_argument("--out", help="directory for CSV reports")
        if name == "verify":
            sp.add_argument("--quick", action="store_true", help="skip the long-run Monte Carlo checks")
            continue
        for key, (_, kind) in KEYS.items():
            flag = "--" + key.replace("_", "-")
            extra = ["--phi"] if key == "functional" else []
            if kind is bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True, default=None)
            else:
                sp.add_argument(flag, *extra, dest=key, default=None)
    return parser


def _fail(code, kind, reason):
    print(json.dumps({"status": "error", "kind": kind, "reason": reason}), file=sys.stderr)
    return code


def run_verify(args) -> int:
    from .verification import CHECKS, run_all, moment_stationarity, stationary_variance_oracle

    checks = [c for c in CHECKS if not (args.quick and c in (moment_stationarity, stationary_variance_oracle))]
    results = run_all(checks, echo=print)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "verify.csv", "w") as fh:
            fh.write("property,passed,detail\n")
            for r in results:
                fh.write(f"{r.name},{int(r.passed)},\"{r.detail}\"\n")
    return EXIT_VERIFY if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return run_verify(args)
    flags = {k: getattr(args, k) for k in KEYS if getattr(args, k, None) is not None}
    try:
        cfg = resolve_config(read_config(args.config) if args.config else {}, flags)
        validate(build_model(cfg))
        kind, columns, rows, fits, ref_slope = COMMANDS[args.command](cfg)
    except (StepError, DriftBlowUp, FloatingPointError) as exc:
        where = {"step": getattr(exc, "step", None)}
        samples = getattr(exc, "samples", None)
        if samples is not None:
            where["samples"] = [int(s) for s in samples]
        return _fail(EXIT_RUNTIME, "runtime", f"{exc} {json.dumps(where)}")
    except (ConfigError, ValidationError, ValueError, OSError) as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime failure
        return _fail(EXIT_RUNTIME, "runtime", f"{type(exc).__name__}: {exc}")
    text = render_csv(cfg, kind, columns, rows, fits)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{kind}.csv").write_text(text)
        (out / f"{kind}.cfg").write_text("".join(f"{k} = {_echo_value(k, cfg[k])}\n" for k in ECHO_KEYS))
        if fits:
            (out / f"{kind}_fit.csv").write_text(render_fit_csv(fits))
        if ref_slope is not None:
            (out / f"plot_{kind}.py").write_text(
                PLOT_SCRIPT.format(csv=f"{kind}.csv", stem=f"{kind}", ref=ref_slope))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
