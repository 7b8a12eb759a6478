"""Command line: validate, describe, count, predict, compare."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

from .constant import (DEFAULT_EXPONENT_EPS, DEFAULT_PMAX, DEFAULT_SAMPLES, DEFAULT_SEED,
                       DensityError, default_region, predict)
from .fan import (Fan, FanError, builtin_fan, min_collection_size, parse_fan,
                  primitive_collections, validate_fan)
from .mobius import MobiusError, format_density, local_density, mobius_table
from .picard import (DirectionError, PicardError, ProjectivityError, central_direction,
                     compute_picard, validate_direction, ample_basis)
from .sections import build_section_basis
from .torsor import (DEFAULT_BUDGET, DEFAULT_EPS, BudgetExceeded, GrowthSpec, RegionError,
                     default_threads, enumerate_points, parse_region)

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2


class UsageError(ValueError):
    pass


def load_fan(src: str) -> Fan:
    if src.startswith("builtin:"):
        return builtin_fan(src.split(":", 1)[1])
    try:
        text = Path(src).read_text()
    except OSError as exc:
        raise FanError(f"cannot read fan file {src}: {exc.strerror}") from None
    fan = parse_fan(text)
    if fan.name is None:
        fan = Fan(fan.dim, fan.rays, fan.max_cones, Path(src).stem)
    return fan


def parse_B_list(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            v = Fraction(tok)
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"bad B value {tok!r}") from None
        out.append(int(v) if v.denominator == 1 else v)
    if not out:
        raise UsageError("empty B list")
    if any(b < 1 for b in out):
        raise UsageError("B values must be >= 1")
    if any(b2 <= b1 for b1, b2 in zip(out, out[1:])):
        raise UsageError("B values must be strictly increasing")
    return out


def parse_u(text: str, m: int) -> list[Fraction]:
    try:
        vals = [Fraction(x.strip()) for x in text.split(",")]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad --u list {text!r}") from None
    if len(vals) != m:
        raise UsageError(f"--u needs {m} values, got {len(vals)}")
    return vals


class Context:
    """Fan, Picard data, sections, region and direction resolved from flags."""

    def __init__(self, args, need_region=True):
        self.fan = load_fan(args.fan)
        rep = validate_fan(self.fan)
        if not rep.ok:
            bad = next(c for c in rep.checks if not c.passed)
            raise FanError(f"fan failed check {bad.name}: {bad.witness}")
        self.pd = compute_picard(self.fan)
        self.sb = build_section_basis(self.fan, self.pd)
        if getattr(args, "u", None):
            self.direction = validate_direction(self.pd, parse_u(args.u, self.pd.m))
        else:
            self.direction = central_direction(self.pd)
        if need_region:
            if getattr(args, "region", None):
                try:
                    text = Path(args.region).read_text()
                except OSError as exc:
                    raise RegionError(f"cannot read region file: {exc.strerror}") from None
                self.region = parse_region(text, self.pd.m)
            else:
                self.region = default_region(self.pd, self.sb)


def _emit(args, text: str):
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# -- commands -------------------------------------------------------------------

def cmd_validate(args) -> int:
    fan = load_fan(args.fan)
    rep = validate_fan(fan)
    doc = {"fan": fan.name, "digest": fan.digest(), **rep.to_dict()}
    code = EXIT_OK if rep.ok else EXIT_INVALID
    if rep.ok:
        try:
            pd = compute_picard(fan)
            basis = ample_basis(pd)
            doc["projective"] = {"ok": True, "ample_basis": [list(L) for L in basis],
                                 "wall_relations": [list(r) for r in pd.wall_relations]}
        except (PicardError, ProjectivityError) as exc:
            doc["projective"] = {"ok": False, "reason": str(exc)}
            doc["ok"] = False
            code = EXIT_INVALID
    _emit(args, json.dumps(doc, indent=2) + "\n")
    return code


def cmd_describe(args) -> int:
    ctx = Context(args, need_region=False)
    fan, pd, sb = ctx.fan, ctx.pd, ctx.sb
    doc = {
        "fan": fan.name, "dim": pd.n, "rays": pd.m, "picard_rank": pd.t,
        "projection": [list(r) for r in pd.proj],
        "ray_classes": [list(c) for c in pd.ray_classes],
        "anticanonical": list(pd.anticanonical),
        "wall_relations": [list(r) for r in pd.wall_relations],
        "ample_basis": [list(L) for L in sb.basis],
        "primitive_collections": [list(c) for c in primitive_collections(fan)],
        "f": min_collection_size(fan),
        "default_direction": [str(c) for c in ctx.direction.pairings],
        "provenance": pd.provenance,
    }
    if args.sections:
        doc["sections"] = [{"class": list(L), "r": len(M), "monomials": [list(c) for c in M]}
                           for L, M in zip(sb.basis, sb.monomials)]
    if args.mobius:
        for p in (2, 3, 5, 7):
            local_density(fan, p)
        doc["mobius"] = {"local_values": [{"rays": list(A), "mu": v}
                                          for A, v in mobius_table(fan).items()],
                         "local_density": format_density(fan)}
    _emit(args, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _count_rows(ctx, args):
    for B in args.B:
        gs = GrowthSpec(ctx.direction, B)
        t0 = time.perf_counter()
        rep = enumerate_points(ctx.fan, ctx.pd, ctx.sb, ctx.region, gs, eps=args.tol,
                               exact=args.exact_boundary, threads=args.threads,
                               budget=args.budget)
        yield B, rep, time.perf_counter() - t0


def cmd_count(args) -> int:
    ctx = Context(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["B", "torsor_count", "torus_count", "boundary_count", "rational_count"]
    w.writerow(head + (["nodes", "seconds"] if args.timing else []))
    for B, rep, dt in _count_rows(ctx, args):
        row = [B, rep.torsor_count, rep.torus_count, rep.boundary_count, rep.rational_count]
        extra = [str(rep.nodes), f"{dt:.3f}"] if args.timing else []
        w.writerow([_fmt(x) for x in row] + extra)
    _emit(args, buf.getvalue())
    return EXIT_OK


def _report(ctx, args):
    gs = GrowthSpec(ctx.direction, 1)
    return predict(ctx.fan, ctx.pd, ctx.sb, ctx.region, gs, samples=args.samples,
                   seed=args.seed, p_max=args.pmax, exponent_eps=args.eps)


def cmd_predict(args) -> int:
    ctx = Context(args)
    rep = _report(ctx, args)
    doc = rep.to_dict()
    if args.B:
        doc["predictions"] = [dict(zip(("B", "value", "lo", "hi"), (str(B), *rep.prediction(B))))
                              for B in args.B]
    _emit(args, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    ctx = Context(args)
    rep = _report(ctx, args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["B", "rational_count", "torus_count", "boundary_count", "prediction",
            "prediction_lo", "prediction_hi", "ratio", "residual_scale"]
    w.writerow(head + (["seconds"] if args.timing else []))
    for B, cnt, dt in _count_rows(ctx, args):
        val, lo, hi = rep.prediction(B)
        ratio = cnt.rational_count / val if val > 0 else math.nan
        resid = float(B) ** (-rep.error_exponent)
        row = [B, cnt.rational_count, cnt.torus_count // 2 ** ctx.pd.t,
               cnt.boundary_count // 2 ** ctx.pd.t, val, lo, hi, ratio, resid]
        w.writerow([_fmt(x) for x in row] + ([f"{dt:.3f}"] if args.timing else []))
    _emit(args, buf.getvalue())
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fan", required=True, help="builtin:NAME or path to a fan JSON file")
    common.add_argument("--out", help="write output here instead of stdout")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--region", help="region JSON file (default: unit box on the ample basis)")
    run.add_argument("--u", help="comma list of m rationals <[D_rho], u>")
    run.add_argument("--B", default=None, help="comma list of B >= 1")
    run.add_argument("--eps", type=float, default=DEFAULT_EXPONENT_EPS,
                     help="epsilon in the error-exponent diagnostic")
    run.add_argument("--tol", type=float, default=DEFAULT_EPS, help="height comparison tolerance")
    run.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    run.add_argument("--seed", type=int, default=DEFAULT_SEED)
    run.add_argument("--pmax", type=int, default=DEFAULT_PMAX)
    run.add_argument("--threads", type=int, default=None, help="default: $TORIX_THREADS or 1")
    run.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="enumeration node budget")
    run.add_argument("--exact-boundary", action="store_true",
                     help="decide boundary hits exactly for log(p/q) bounds")
    run.add_argument("--timing", action="store_true", help="add a wall-clock column")

    p = _Parser(prog="torix", description="Multi-height point counts on toric varieties.")
    sub = p.add_subparsers(dest="cmd", required=True)
    sub.add_parser("validate", parents=[common]).set_defaults(func=cmd_validate)
    d = sub.add_parser("describe", parents=[common, run])
    d.add_argument("--sections", action="store_true")
    d.add_argument("--mobius", action="store_true")
    d.set_defaults(func=cmd_describe)
    sub.add_parser("count", parents=[common, run]).set_defaults(func=cmd_count)
    sub.add_parser("predict", parents=[common, run]).set_defaults(func=cmd_predict)
    sub.add_parser("compare", parents=[common, run]).set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "threads") and args.threads is None:
        args.threads = default_threads()
    if getattr(args, "B", None):
        try:
            args.B = parse_B_list(args.B)
        except UsageError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
    if args.cmd in ("count", "compare") and not args.B:
        print("error: --B is required", file=sys.stderr)
        return EXIT_INVALID
    if hasattr(args, "samples") and args.samples < 1000:
        print("error: --samples must be at least 1000", file=sys.stderr)
        return EXIT_INVALID
    if hasattr(args, "pmax") and args.pmax < 11:
        print("error: --pmax must be at least 11", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (FanError, PicardError, DirectionError, RegionError, UsageError, MobiusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (BudgetExceeded, DensityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
