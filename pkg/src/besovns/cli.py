"""Command-line front end.

Subcommands: ``analyze``, ``criterion``, ``example-scan``, ``solve`` and
``verify``.  Every flag may also come from a JSON file given with
``--config`` (flags on the command line win).  Outputs go to ``--out`` and
embed the effective config and its sha256; nothing time-dependent is written,
so reruns are byte-identical.

Exit codes: 0 success, 1 failure (a check failed or a computation broke
down), 2 invalid configuration.  On a nonzero exit a JSON error record is
printed to stderr and, when possible, written to ``<out>/error.json``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io as bio
from .criterion import (
    CriterionInput,
    criterion_lhs,
    example_sweep,
    scale_to_lhs,
    sweep_fits,
    SWEEP_COLUMNS,
)
from .data import (
    Example1Params,
    cosine_mode,
    example1_data,
    example2_data,
    random_field,
    random_velocity,
    shear_flow,
)
from .heat import QuadratureError, caloric_norms
from .littlewood_paley import BesovIndex, build_partition, dyadic_spectra
from .navier_stokes import SolveConfig, apriori_balance, solve
from .spectral import ScalarField, VelocityField, make_lattice
from .verify import SUITES, run_suite

FIELDS = ("cosine", "shear", "random", "random-velocity", "small", "zero", "zero-velocity",
          "example1", "example2", "file")
# Flags that change where results go or how fast they arrive, not what they are.
_NOT_ECHOED = {"out", "jobs", "config", "command", "func"}


class ConfigError(ValueError):
    """Invalid command-line or config-file input (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _float(text: str) -> float:
    """Float that also accepts ``inf`` and powers like ``2^-3``."""
    t = str(text).strip().lower()
    if "^" in t:
        base, exp = t.split("^", 1)
        return float(base) ** float(exp)
    return float(t)


def _index(text: str) -> BesovIndex:
    parts = str(text).split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"Besov index {text!r} must be 's,p,r'")
    try:
        s, p, r = (_float(x) for x in parts)
        return BesovIndex(s, p, r)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"Besov index {text!r}: {exc}") from exc


# -- field sources ------------------------------------------------------------------

def _add_field_args(p: argparse.ArgumentParser, default: str):
    g = p.add_argument_group("field source")
    g.add_argument("--field", choices=FIELDS, default=default)
    g.add_argument("--n", type=int, default=32, help="grid points per axis")
    g.add_argument("--L", type=_float, default=2 * math.pi, help="box period")
    g.add_argument("--mode", type=int, nargs=3, default=[4, 0, 0], help="integer mode of 'cosine'")
    g.add_argument("--amplitude", type=_float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sample", type=int, default=0, help="sample id within the seed's stream")
    g.add_argument("--gamma", type=_float, default=None, help="block decay of random fields")
    g.add_argument("--kmin", type=_float, default=None)
    g.add_argument("--kmax", type=_float, default=None)
    g.add_argument("--target-lhs", type=_float, default=9.99e-4,
                   help="criterion value reached by the 'small' field")
    g.add_argument("--eps", type=_float, default=0.125, help="example parameter")
    g.add_argument("--alpha", type=_float, default=0.9, help="example-1 anisotropy")
    g.add_argument("--input", default=None, help="field container for --field file")


def _make_field(a) -> ScalarField | VelocityField:
    if a.field == "file":
        if not a.input:
            raise ConfigError("--field file needs --input")
        return bio.load_field(a.input)
    if a.field == "example1":
        return example1_data(Example1Params(a.eps, a.alpha, getattr(a, "p", 5.0)))
    if a.field == "example2":
        return example2_data(a.eps)
    if a.n < 8 or a.n & (a.n - 1):
        raise ConfigError(f"--n must be a power of two >= 8, got {a.n}")
    lat = make_lattice(a.n, a.L)
    if a.field == "cosine":
        return cosine_mode(lat, tuple(a.mode), a.amplitude)
    if a.field == "shear":
        return shear_flow(lat, a.amplitude)
    if a.field == "zero":
        return ScalarField.zeros(lat)
    if a.field == "zero-velocity":
        return VelocityField.zeros(lat)
    if a.field == "random":
        return random_field(lat, a.seed, a.sample, a.gamma, a.kmin, a.kmax) * a.amplitude
    kmax = a.kmax if a.kmax is not None else 6.0
    if a.field == "random-velocity":
        return random_velocity(lat, a.seed, a.sample, a.gamma, a.kmin, a.kmax, a.amplitude)
    # 'small': smooth data (gamma 2, |k| <= 6 by default) scaled to the target.
    u = random_velocity(lat, a.seed, a.sample, a.gamma if a.gamma is not None else 2.0,
                        a.kmin, kmax, a.amplitude)
    if a.field == "small":
        u, _ = scale_to_lhs(u, a.target_lhs, getattr(a, "p", 4.0), getattr(a, "C_const", 1.0))
    return u


def _components(f) -> list[tuple[str, ScalarField]]:
    if isinstance(f, VelocityField):
        return [(f"u{i + 1}", c) for i, c in enumerate(f.components)]
    return [("f", f)]


# -- commands -----------------------------------------------------------------------

def cmd_analyze(a, config: dict, out: Path) -> tuple[dict, bool]:
    f = _make_field(a)
    idx = a.index or [BesovIndex(0.0, math.inf, 1.0)]
    P = build_partition(f.lattice)
    ps = sorted({i.p for i in idx})
    rows, norms = [], []
    for name, c in _components(f):
        spectra = None if c.is_zero() else dyadic_spectra(c, ps, P, check_boundary=True)
        for p in ps:
            entries = [] if spectra is None else spectra[p].entries
            rows.extend({"component": name, "p": p, "j": j, "block_norm": v} for j, v in entries)
        for i in idx:
            val = 0.0 if spectra is None else spectra[i.p].besov(i.s, i.r)
            norms.append({"component": name, "s": i.s, "p": i.p, "r": i.r, "norm": val})
    payload = {"lattice": f.lattice.describe(), "partition": P.describe(), "norms": norms}
    if isinstance(f, VelocityField):
        payload["vector_norms"] = [
            {"s": i.s, "p": i.p, "r": i.r,
             "norm": sum(n["norm"] for n in norms if (n["s"], n["p"], n["r"]) == (i.s, i.p, i.r))}
            for i in idx
        ]
    if a.caloric:
        cal = {"inf" if r == np.inf else str(r): 0.0 for r in (1, 2, np.inf)}
        if not f.is_zero():
            vals = caloric_norms(f, (1, 2, np.inf), P=P)
            cal = {("inf" if r == np.inf else str(r)): v for r, v in vals.items()}
        payload["caloric"] = cal
    bio.write_text(out / "spectra.csv",
                   bio.rows_to_csv(rows, ["component", "p", "j", "block_norm"], config))
    bio.write_json(out / "norms.json", payload, config)
    return payload, True


def cmd_criterion(a, config: dict, out: Path) -> tuple[dict, bool]:
    u = _make_field(a)
    if not isinstance(u, VelocityField):
        raise ConfigError(f"--field {a.field} is scalar; the criterion needs a velocity field")
    rep = criterion_lhs(CriterionInput(u, a.p, a.C_const, a.delta))
    payload = {"report": rep.as_dict()}
    bio.write_json(out / "criterion.json", payload, config)
    return payload, True


def cmd_example_scan(a, config: dict, out: Path) -> tuple[dict, bool]:
    if a.example == 1:
        for e in a.eps_list:
            Example1Params(e, a.alpha, a.p).validate()
    points = example_sweep(a.example, a.eps_list, a.p, a.alpha, a.C_const, a.delta, a.jobs)
    rows = [pt.row() for pt in points]
    columns = list(SWEEP_COLUMNS)
    if a.example == 2:
        columns.append("symbol_norm")
        for row, pt in zip(rows, points):
            row["symbol_norm"] = pt.symbol_norm
    bio.write_text(out / "sweep.csv", bio.rows_to_csv(rows, columns, config))
    fits = sweep_fits(a.example, points) if len(points) >= 2 else {}
    payload = {"fits": fits, "points": rows}
    bio.write_json(out / "fit.json", payload, config)
    return payload, True


def cmd_solve(a, config: dict, out: Path) -> tuple[dict, bool]:
    u = _make_field(a)
    if not isinstance(u, VelocityField):
        raise ConfigError(f"--field {a.field} is scalar; the solver needs a velocity field")
    cfg = SolveConfig(dt=a.dt, T=a.T, p=a.p, eta=a.eta, monitor_every=a.monitor_every,
                      track_balance=a.balance)
    trace = solve(u, cfg)
    rows = [dict(zip(("t", "monitor_inf", "monitor_l1", "energy", "div_residual"), r))
            for r in zip(trace.times, trace.monitor_inf, trace.monitor_l1, trace.energy,
                         trace.div_residual)]
    bio.write_text(out / "trace.csv", bio.rows_to_csv(
        rows, ["t", "monitor_inf", "monitor_l1", "energy", "div_residual"], config))
    summary = {"status": trace.status, "message": trace.message, "steps": trace.steps,
               "gamma_hit": trace.gamma_hit, "max_monitor_inf": trace.max_monitor,
               "lattice": u.lattice.describe()}
    if a.balance and trace.status == "completed":
        summary["balance"] = apriori_balance(trace, u, a.p)
    if a.save_final and trace.final_v is not None:
        bio.save_field(out / "final_v.field", trace.final_v)
    bio.write_json(out / "summary.json", summary, config)
    return summary, trace.status in ("completed", "bootstrap-exit")


def cmd_verify(a, config: dict, out: Path) -> tuple[dict, bool]:
    res = run_suite(a.suite, n=a.n, samples=a.samples, seed=a.seed)
    bio.write_text(out / f"{a.suite}_samples.csv", bio.rows_to_csv(res.rows, None, config))
    bio.write_json(out / f"{a.suite}_summary.json", {"summary": res.summary}, config)
    return res.summary, res.passed


# -- parser -------------------------------------------------------------------------

def _criterion_args(p):
    p.add_argument("--p", type=_float, default=4.0, help="integrability exponent, 3 < p < 6")
    p.add_argument("--C-const", dest="C_const", type=_float, default=1.0)
    p.add_argument("--delta", type=_float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="besovns", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", default=None, help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="block spectra and Besov/caloric norms of a field")
    _add_field_args(p, "cosine")
    p.add_argument("--index", type=_index, action="append",
                   help="Besov index 's,p,r' (repeatable), e.g. 0,inf,1")
    p.add_argument("--caloric", action="store_true", help="also report caloric norms")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("criterion", help="evaluate the smallness functional")
    _add_field_args(p, "example2")
    _criterion_args(p)
    p.set_defaults(func=cmd_criterion)

    p = sub.add_parser("example-scan", help="sweep an example family over eps")
    p.add_argument("--example", type=int, choices=(1, 2), default=2)
    p.add_argument("--eps-list", type=_float, nargs="+",
                   default=[2.0 ** -k for k in range(3, 7)])
    p.add_argument("--alpha", type=_float, default=0.9)
    _criterion_args(p)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_example_scan)

    p = sub.add_parser("solve", help="integrate the perturbation system")
    _add_field_args(p, "shear")
    p.add_argument("--dt", type=_float, default=1e-3)
    p.add_argument("--T", type=_float, default=1.0)
    p.add_argument("--p", type=_float, default=4.0, help="monitor exponent")
    p.add_argument("--C-const", dest="C_const", type=_float, default=1.0)
    p.add_argument("--eta", type=_float, default=0.1)
    p.add_argument("--monitor-every", type=int, default=10)
    p.add_argument("--balance", action="store_true", help="track the a priori balance terms")
    p.add_argument("--save-final", action="store_true", help="write the final perturbation field")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    for name in ("analyze", "criterion", "example-scan", "solve", "verify"):
        sub.choices[name].add_argument("--out", default=".", help="output directory")
    return parser


def _load_config(argv) -> dict:
    pre = _Parser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        with open(known.config) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    defaults = _load_config(argv)
    parser = build_parser()
    if defaults:
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        for sp in sub.choices.values():
            known = {a.dest: a for a in sp._actions}
            coerced = {}
            for k, v in defaults.items():
                action = known.get(k)
                if action is None:
                    continue
                if action.type is not None:
                    conv = action.type
                    v = [conv(str(x)) for x in v] if isinstance(v, list) else conv(str(v))
                coerced[k] = v
            sp.set_defaults(**coerced)
    return parser.parse_args(argv)


def _echo(args: argparse.Namespace) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in _NOT_ECHOED:
            continue
        if isinstance(v, BesovIndex):
            v = [v.s, v.p, v.r]
        elif isinstance(v, list):
            v = [[x.s, x.p, x.r] if isinstance(x, BesovIndex) else x for x in v]
        out[k] = v
    out["command"] = args.command
    return out


def _fail(code: int, exc: BaseException, out: Path | None) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    text = bio.canonical_json(record, indent=2)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            bio.write_text(out / "error.json", text + "\n")
        except OSError:
            pass
    return code


def _pre_out(argv) -> Path | None:
    pre = _Parser(add_help=False)
    pre.add_argument("--out", default=None)
    try:
        known, _ = pre.parse_known_args(list(sys.argv[1:] if argv is None else argv))
    except ConfigError:
        return None
    return Path(known.out) if known.out else None


def main(argv=None) -> int:
    out = _pre_out(argv)
    try:
        args = parse_args(argv)
        out = Path(args.out)
        config = _echo(args)
        payload, ok = args.func(args, config, out)
    except (ConfigError, ValueError) as exc:
        return _fail(2, exc, out)
    except (QuadratureError, ArithmeticError, RuntimeError) as exc:
        return _fail(1, exc, out)
    print(bio.canonical_json({"command": args.command, "passed": bool(ok), "result": payload},
                             indent=2))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
