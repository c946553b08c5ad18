"""Command-line front end: ``dualif <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 divergent phase integral, 4 numerical failure at run time.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .catalog import CATALOG_NAMES, catalog_get, catalog_info
from .dual import NumericDual
from .errors import (DivergentError, DomainError, DualIFError, ExprError, UnknownModel,
                     ValidationError)
from .models import InputSignal, VoltageModel, parse_extended, validate_voltage
from .quadrature import DEFAULT_SPEC, QuadratureSpec
from .rate import fi_curve, onset_rate_monomial, monomial_model, rate
from .sim import SimConfig, integrate_phase, integrate_voltage, to_json
from .verify import DEFAULT_TOL, run_checks

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_DIVERGENT, EXIT_NUMERIC = 0, 1, 2, 3, 4

QUAD_TOL_ENV = "DUALIF_QUAD_TOL"


class UsageError(Exception):
    pass


def quad_spec() -> QuadratureSpec:
    raw = os.environ.get(QUAD_TOL_ENV)
    if raw is None or not raw.strip():
        return DEFAULT_SPEC
    try:
        return QuadratureSpec(rel_tol=float(raw))
    except ValueError as exc:
        raise UsageError(f"{QUAD_TOL_ENV}={raw!r}: {exc}") from exc


def _dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "inf" if v == math.inf else "-inf" if v == -math.inf else f"{v:.17g}"
    return str(v)


def parse_model_spec(text: str) -> VoltageModel:
    """``expr:f=<expr>;xp=<v|inf>;xm=<v|-inf>`` (xp, xm default to +-inf)."""
    body = text[len("expr:"):]
    fields = {}
    for part in body.split(";"):
        if not part.strip():
            continue
        key, sep, value = part.partition("=")
        if not sep or key.strip() not in ("f", "xp", "xm"):
            raise UsageError(f"bad model field {part!r}; expected f=, xp= or xm=")
        fields[key.strip()] = value.strip()
    if "f" not in fields:
        raise UsageError("model spec needs f=<expression>")
    return VoltageModel(fields["f"], parse_extended(fields.get("xp", "inf")),
                        parse_extended(fields.get("xm", "-inf")), "custom")


def _validated(model: VoltageModel) -> VoltageModel:
    validate_voltage(model).raise_if_invalid()
    return model


# --------------------------------------------------------------------------
# Commands


def cmd_catalog(args) -> int:
    if args.action == "list":
        if args.format == "json":
            _emit(_dump_json(list(CATALOG_NAMES)), args.out)
        else:
            _emit("".join(f"{n}\n" for n in CATALOG_NAMES), args.out)
        return EXIT_OK
    if not args.name:
        raise UsageError("catalog show needs a model name")
    info = catalog_info(args.name)
    if args.format == "json":
        _emit(_dump_json({k: _fmt(v) if isinstance(v, float) and math.isinf(v) else v
                          for k, v in info.items()}), args.out)
    else:
        _emit("key,value\n" + "".join(f"{k},{_fmt(v)}\n" for k, v in info.items()), args.out)
    return EXIT_OK


def cmd_dualize(args) -> int:
    spec = quad_spec()
    model = _validated(VoltageModel(args.f, parse_extended(args.x_plus),
                                    parse_extended(args.x_minus), "custom"))
    dual = NumericDual(model, spec)
    data = dual.export(args.samples)
    if args.format == "csv":
        rows = [f"# y_plus={_fmt(data['y_plus'])} y_minus={_fmt(data['y_minus'])}", "y,x,g"]
        rows += [f"{y:.12g},{x:.12g},{g:.12g}" for y, x, g in data["samples"]]
        _emit("\n".join(rows) + "\n", args.out)
    else:
        data = {"f": str(model.f), "x_plus": _fmt(model.x_plus), "x_minus": _fmt(model.x_minus),
                "compactified": dual.compactified, **data}
        _emit(_dump_json(data), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = quad_spec()
    try:
        inp = InputSignal.from_spec(args.input)
    except (ValueError, ExprError) as exc:
        raise UsageError(f"--input: {exc}") from exc
    cfg = SimConfig(t_end=args.t_end, dt=args.dt, event_tol=args.event_tol,
                    x_cap=args.x_cap, reset_mode="wrap" if args.wrap else "reset")
    if args.model.startswith("expr:"):
        voltage = _validated(parse_model_spec(args.model))
        pair = NumericDual(voltage, spec).pair() if (
            args.repr == "phase" or voltage.infinite_sides) else None
    else:
        pair = catalog_get(args.model)
        voltage = pair.voltage
    if args.repr == "phase":
        y0 = 0.0 if args.init is None else args.init
        traj, spikes = integrate_phase(pair.phase, inp, cfg, y0)
    else:
        x0 = 0.0 if args.init is None else args.init
        traj, spikes = integrate_voltage(voltage, inp, cfg, x0, pair=pair)
    if args.out is None:
        _emit(to_json(traj, spikes) + "\n" if args.format == "json" else spikes.to_csv(), None)
    elif args.format == "json":
        _emit(to_json(traj, spikes) + "\n", f"{args.out}.json")
    else:
        _emit(traj.to_csv(), f"{args.out}.traj.csv")
        _emit(spikes.to_csv(), f"{args.out}.spikes.csv")
    return EXIT_OK


def cmd_fi(args) -> int:
    method = {"quad": "quadrature", "closed": "closed_form"}[args.method]
    curve = fi_curve(args.model, args.i_min, args.i_max, args.steps, method, quad_spec())
    text = _dump_json(curve.to_json()) if args.format == "json" else curve.to_csv()
    _emit(text, args.out)
    return EXIT_OK


def cmd_onset(args) -> int:
    phase = monomial_model(args.p)
    row = {"p": args.p, "onset_rate": onset_rate_monomial(args.p),
           "quadrature_rate_at_0": rate(phase, 0.0, quad_spec())}
    if args.format == "json":
        _emit(_dump_json(row), args.out)
    else:
        _emit("p,onset_rate,quadrature_rate_at_0\n"
              + ",".join(f"{v:.12g}" for v in row.values()) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.model != "all" and args.model.strip().lower() not in CATALOG_NAMES:
        raise UnknownModel(args.model)
    rows = run_checks(args.model.strip().lower(), args.tol, quad_spec())
    if args.format == "csv":
        text = "check,model,max_error,pass\n" + "".join(
            f"{r['check']},{r['model']},{r['max_error']:.3e},{str(r['pass']).lower()}\n"
            for r in rows)
    else:
        text = _dump_json(rows)
    _emit(text, args.out)
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_VERIFY


# --------------------------------------------------------------------------
# Parser


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (default depends on the command)")
    common.add_argument("--out", default=None,
                        help="output path (simulate: file prefix); default stdout")

    parser = argparse.ArgumentParser(
        prog="dualif",
        description="Integrate-and-fire models in voltage and phase form.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", parents=[common], help="list or show built-in models")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_catalog, default_format="csv")

    p = sub.add_parser("dualize", parents=[common], help="build the phase dual of f")
    p.add_argument("--f", required=True, help="voltage dynamics f(x)")
    p.add_argument("--x-plus", default="inf")
    p.add_argument("--x-minus", default="-inf")
    p.add_argument("--samples", type=int, default=257)
    p.set_defaults(func=cmd_dualize, default_format="json")

    p = sub.add_parser("simulate", parents=[common], help="simulate a model under input")
    p.add_argument("--model", required=True,
                   help="catalog name or expr:f=<expr>;xp=<v|inf>;xm=<v|-inf>")
    p.add_argument("--repr", choices=("voltage", "phase"), default="phase")
    p.add_argument("--input", default="const:1",
                   help="const:<v> | step:<v0>,<v1>,<t> | expr:<expression in t>")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--event-tol", type=float, default=1e-10)
    p.add_argument("--x-cap", type=float, default=1e8)
    p.add_argument("--init", type=float, default=None, help="initial state (default 0)")
    p.add_argument("--wrap", action="store_true", help="wrap phase instead of resetting")
    p.set_defaults(func=cmd_simulate, default_format="csv")

    p = sub.add_parser("fi", parents=[common], help="firing rate against constant input")
    p.add_argument("--model", required=True)
    p.add_argument("--i-min", type=float, required=True)
    p.add_argument("--i-max", type=float, required=True)
    p.add_argument("--steps", type=_positive_int, required=True)
    p.add_argument("--method", choices=("quad", "closed"), default="quad")
    p.set_defaults(func=cmd_fi, default_format="csv")

    p = sub.add_parser("onset", parents=[common], help="rate at zero input for g = |y|^p")
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_onset, default_format="csv")

    p = sub.add_parser("verify", parents=[common], help="run the self-checks")
    p.add_argument("--model", default="all")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(func=cmd_verify, default_format="json")
    return parser


def _join_negative_values(argv: Sequence[str]) -> list[str]:
    """Glue ``--flag -inf`` into ``--flag=-inf``; argparse reads ``-inf`` as an option."""
    out: list[str] = []
    for tok in argv:
        if (tok.lower() in ("-inf", "-infinity") and out and out[-1].startswith("--")
                and "=" not in out[-1]):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = _join_negative_values(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.format is None:
        args.format = args.default_format
    if args.out is not None and args.command != "simulate":
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    try:
        return args.func(args)
    except DivergentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENT
    except DomainError as exc:
        # a user expression failed while being evaluated mid-run
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ExprError, ValidationError, UnknownModel) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DualIFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
