"""Command-line front end.

Every command writes its result to ``--out`` (or stdout) and a run manifest to
``<out>.manifest.json`` (or stderr).  Exit codes: 0 success, 1 input error,
2 precision or certification failure, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from pathlib import Path

from mpmath import mp

from . import __version__
from .angles import (DEFAULT_MAX_COEFF, DEFAULT_PRECISION, AngleSystem, Mode, RelationLattice,
                     detect_relations, extract_closure)
from .density import RaceFunctions, densities
from .errors import InputError, KwraceError
from .laurent import LaurentPoly
from .sampler import SamplerConfig, expectation

ASSUMPTION_FIELDS = ["precision_bits", "max_coeff", "n_max", "truncation_N"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def load_angles(path, continuous: bool = False) -> AngleSystem:
    """``{"angles": [...], "mode": "discrete"}`` or a bare list of angle strings."""
    data = _read_json(path)
    if isinstance(data, list):
        items, mode = data, Mode.DISCRETE
    elif isinstance(data, dict) and "angles" in data:
        items, mode = data["angles"], Mode(data.get("mode", "discrete"))
    else:
        raise InputError(f"{path}: expected a list of angles or an object with 'angles'")
    if continuous:
        mode = Mode.CONTINUOUS
    if not isinstance(items, list) or not items:
        raise InputError(f"{path}: 'angles' must be a non-empty list")
    return AngleSystem.parse(items, mode)


def _poly_items(obj):
    if isinstance(obj, dict):
        return obj.get("terms", [])
    return obj


def load_poly(path, r: int) -> LaurentPoly:
    return LaurentPoly.from_json(_poly_items(_read_json(path)), r)


def load_race(path, r: int) -> RaceFunctions:
    """``{"functions": [terms, ...], "names": [...], "error_term_present": false}``."""
    data = _read_json(path)
    if not isinstance(data, dict) or "functions" not in data:
        raise InputError(f"{path}: expected an object with 'functions'")
    fs = tuple(LaurentPoly.from_json(_poly_items(f), r) for f in data["functions"])
    return RaceFunctions(fs, bool(data.get("error_term_present", False)), data.get("names"))


def _hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


class Run:
    """Collects output text and writes it with the manifest."""

    def __init__(self, args, inputs):
        self.args = args
        self.inputs = [str(p) for p in inputs if p is not None]
        self.t0 = time.perf_counter()
        self.parts: list[str] = []

    def emit(self, text: str):
        self.parts.append(text)

    def manifest(self) -> dict:
        a = self.args
        return {
            "command": a.command,
            "inputs": {p: _hash(p) for p in self.inputs if os.path.exists(p)},
            "seed": a.seed,
            "precision_bits": a.precision,
            "max_coeff": a.max_coeff,
            "samples": a.samples,
            "tool_version": __version__,
            "arguments": {k: v for k, v in sorted(vars(a).items()) if k not in ("out", "func")},
            "wall_time": round(time.perf_counter() - self.t0, 3),
        }

    def finish(self):
        text = "".join(self.parts)
        man = json.dumps(self.manifest(), indent=2, sort_keys=True, default=str) + "\n"
        if self.args.out:
            Path(self.args.out).write_text(text)
            Path(str(self.args.out) + ".manifest.json").write_text(man)
        else:
            sys.stdout.write(text)
            sys.stderr.write(man)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def _cfg(args) -> SamplerConfig:
    return SamplerConfig(seed=args.seed, n_samples=args.samples)


def _closure(args, system):
    lat = detect_relations(system, args.max_coeff, args.precision)
    return lat, extract_closure(system, lat)


def _density_rows(reports, args, n_max, truncation=""):
    header = ["ordering", "value", "stderr", "lower", "upper", "existence", "method", "witnesses",
              "positivity_witness", "violation_witness"] + ASSUMPTION_FIELDS
    rows = []
    for rep in reports:
        rows.append([rep.label, _num(rep.value.value), _num(rep.value.stderr), _num(rep.lower), _num(rep.upper),
                     rep.existence.value, rep.value.method.value, rep.witnesses(),
                     "" if rep.positivity_witness is None else rep.positivity_witness,
                     "" if rep.violation_witness is None else rep.violation_witness,
                     args.precision, args.max_coeff, n_max, truncation])
    return header, rows


# ---------------------------------------------------------------------------
# commands


def cmd_detect(args, run: Run) -> int:
    system = load_angles(args.angles, args.continuous)
    lat, cd = _closure(args, system)
    run.emit(_json({"lattice": lat.to_json(), "closure": cd.to_json()}))
    return 0


def cmd_expectation(args, run: Run) -> int:
    system = load_angles(args.angles, args.continuous)
    lat, cd = _closure(args, system)
    f = load_poly(args.spec, system.r)
    est = expectation(f, cd, _cfg(args))
    out = est.to_json()
    out.update(precision_bits=args.precision, max_coeff=args.max_coeff)
    run.emit(_json(out))
    return 0


def cmd_density(args, run: Run) -> int:
    system = load_angles(args.angles, args.continuous)
    lat, cd = _closure(args, system)
    rf = load_race(args.race, system.r)
    orderings = "all" if args.all_orderings else None
    reps = densities(rf, cd, _cfg(args), orderings=orderings, n_max=args.nmax)
    run.emit(_csv(*_density_rows(reps, args, args.nmax or "")))
    return 0


def cmd_moments(args, run: Run) -> int:
    from .moments import closed_form_moments

    system = load_angles(args.angles, args.continuous)
    lat, cd = _closure(args, system)
    rf = load_race(args.race, system.r)
    out = {
        "functions": {name: closed_form_moments(f, cd, lat, args.allow_general_relations).to_json()
                      for name, f in zip(rf.names, rf.fs)},
        "lattice": lat.to_json(),
        "precision_bits": args.precision,
        "max_coeff": args.max_coeff,
    }
    run.emit(_json(out))
    return 0


def _load_spec(path):
    from .ffrace import RaceSpec, load_builtin

    if path is None:
        return load_builtin()
    if not os.path.exists(path) and not path.endswith(".json"):
        return load_builtin(path)
    return RaceSpec.load(path)


def cmd_race(args, run: Run) -> int:
    from .ffrace import build_cumulative_race, build_race

    spec = _load_spec(args.spec)
    build = build_cumulative_race if args.cumulative else build_race
    br = build(spec, args.max_coeff, args.precision)
    orderings = "all" if args.all_orderings else None
    reps = densities(br.race, br.closure, _cfg(args), orderings=orderings, n_max=args.nmax)
    run.emit(_csv(*_density_rows(reps, args, args.nmax or "")))
    code = 0
    if args.oracle:
        from .oracle import count_classes, residual_check, residuals_csv

        table = count_classes(spec, args.count_nmax)
        rows = residual_check(spec, table, range(1, args.count_nmax + 1))
        run.emit("\n" + table.to_csv() + "\n" + residuals_csv(rows))
        if not all(r.ok for r in rows):
            sys.stderr.write("residual bound exceeded\n")
            code = 2
    return code


def cmd_count(args, run: Run) -> int:
    from .oracle import count_classes

    spec = _load_spec(args.spec)
    table = count_classes(spec, args.nmax, fast=not args.no_fast)
    run.emit(table.to_csv())
    return 0


def _nrange(text: str) -> range:
    try:
        lo, hi = text.split("..")
        return range(int(lo), int(hi) + 1)
    except ValueError:
        raise InputError(f"bad range {text!r}; use LO..HI") from None


def cmd_residuals(args, run: Run) -> int:
    from .oracle import count_classes, residual_check, residuals_csv

    spec = _load_spec(args.spec)
    nr = _nrange(args.nrange)
    table = count_classes(spec, nr.stop - 1, fast=not args.no_fast)
    rows = residual_check(spec, table, nr, args.constant)
    run.emit(residuals_csv(rows))
    return 0 if all(r.ok for r in rows) else 2


def cmd_ap_density(args, run: Run) -> int:
    from .almost_periodic import APSeries, align_series, ap_density, incremental_basis

    with mp.workprec(args.precision + 64):
        series = align_series([APSeries.from_csv(p) for p in args.series])
        if args.truncate:
            series = [s.truncate(args.truncate) for s in series]
        system = series[0].system()
        if args.independent:
            lat = RelationLattice.declared(system, (), args.precision)
        else:
            lat = detect_relations(system, args.max_coeff, args.precision)
        ib = incremental_basis(series[0], lat)
        rep = ap_density(series, lat, args.split_T, _cfg(args), ib)
    header = ["ordering", "value", "stderr", "lower", "upper", "existence", "value_at_half_N", "sensitivity_delta"]
    header += ASSUMPTION_FIELDS
    label = ">".join(Path(p).stem for p in args.series)
    row = [label, _num(rep.value.value), _num(rep.value.stderr), _num(rep.lower), _num(rep.upper),
           rep.existence.value, _num(rep.value_half), _num(rep.delta), args.precision,
           "" if args.independent else args.max_coeff, "", rep.N]
    run.emit(_csv(header, [row]))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=100_000, help="Monte Carlo samples per coset")
    common.add_argument("--precision", type=int, default=DEFAULT_PRECISION, help="working precision in bits")
    common.add_argument("--max-coeff", type=int, default=DEFAULT_MAX_COEFF, help="relation coefficient bound")
    common.add_argument("--out", help="output file (manifest goes to OUT.manifest.json)")
    common.add_argument("--threads", type=int, default=1, help="cap on worker threads")

    p = _Parser(prog="kwrace", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def angles_args(sp):
        sp.add_argument("--angles", required=True, help="JSON angle file")
        sp.add_argument("--continuous", action="store_true", help="continuous flow instead of n = 1, 2, ...")

    sp = sub.add_parser("detect", parents=[common], help="detect relations and the orbit closure")
    angles_args(sp)
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("expectation", parents=[common], help="expectation of a Laurent polynomial")
    sp.add_argument("--spec", required=True, help="JSON polynomial file")
    angles_args(sp)
    sp.set_defaults(func=cmd_expectation)

    sp = sub.add_parser("density", parents=[common], help="ordering densities of a race")
    sp.add_argument("--race", required=True)
    angles_args(sp)
    sp.add_argument("--all-orderings", action="store_true")
    sp.add_argument("--nmax", type=int, default=None, help="tie-scan bound")
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("moments", parents=[common], help="closed-form coset moments")
    sp.add_argument("--race", required=True)
    angles_args(sp)
    sp.add_argument("--allow-general-relations", action="store_true")
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("race", parents=[common], help="Chebotarev race over F_q(t)")
    sp.add_argument("--spec", default=None, help="race spec JSON (default: built-in s3_f7)")
    sp.add_argument("--all-orderings", action="store_true")
    sp.add_argument("--nmax", type=int, default=10_000, help="tie-scan bound")
    sp.add_argument("--cumulative", action="store_true", help="count places of degree <= n")
    sp.add_argument("--oracle", action="store_true", help="also count places and check residuals")
    sp.add_argument("--count-nmax", type=int, default=10, help="largest degree counted by --oracle")
    sp.set_defaults(func=cmd_race)

    sp = sub.add_parser("count", parents=[common], help="count places by Frobenius class")
    sp.add_argument("--spec", default=None)
    sp.add_argument("--nmax", type=int, required=True)
    sp.add_argument("--no-fast", action="store_true", help="factorise every place")
    sp.set_defaults(func=cmd_count)

    sp = sub.add_parser("residuals", parents=[common], help="explicit formula residuals")
    sp.add_argument("--spec", default=None)
    sp.add_argument("--nrange", default="3..10")
    sp.add_argument("--constant", type=float, default=None, help="override the residual constant")
    sp.add_argument("--no-fast", action="store_true")
    sp.set_defaults(func=cmd_residuals)

    sp = sub.add_parser("ap-density", parents=[common], help="ordering density of almost periodic series")
    sp.add_argument("--series", nargs="+", required=True, help="CSV files with theta, re, im")
    sp.add_argument("--split-T", type=int, required=True, help="number of leading frequencies in T")
    sp.add_argument("--truncate", type=int, default=None)
    sp.add_argument("--independent", action="store_true",
                    help="declare the frequencies linearly independent instead of detecting relations")
    sp.set_defaults(func=cmd_ap_density)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        sys.stderr.write("--threads must be >= 1\n")
        return 1
    if args.samples < 1:
        sys.stderr.write("--samples must be >= 1\n")
        return 1
    # the kernels are serial; the cap keeps BLAS and numba pools in line with it
    for var in ("NUMBA_NUM_THREADS", "OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(args.threads)
    inputs = [getattr(args, k, None) for k in ("angles", "spec", "race")] + list(getattr(args, "series", []) or [])
    run = Run(args, inputs)
    try:
        code = args.func(args, run)
    except KwraceError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except AssertionError as exc:
        sys.stderr.write(f"internal error: {exc}\n")
        return 3
    run.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())
