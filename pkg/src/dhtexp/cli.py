"""Command-line interface.

Data goes to stdout (JSON or CSV), diagnostics to stderr.  Exit codes: 0 on
success, 1 on invalid input, 2 when a numerical solver fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import bsds as B
from .errors import ConvergenceError, DHTError, ValidationError
from .iprojection import quantization_exponent
from .prob import HypothesisPair, TestChannel, conditional_entropy, entropy, kl_divergence
from .sha import (
    check_no_quantization_condition,
    critical_rate_bound_sha,
    lambda_hat,
    merge_map,
    sha_binning_curve,
    sha_quantize_binning_exponent,
)
from .simulator import SchemeConfig, simulate, simulate_sequential

LN2 = math.log(2.0)


def _num(x):
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return float(f"{x:.12g}")
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, np.ndarray):
        return _num(x.tolist())
    if isinstance(x, np.generic):
        return _num(x.item())
    return x


class Units:
    """Rates and exponents are nats internally; ``--bits`` converts I/O only."""

    def __init__(self, bits: bool):
        self.bits = bits
        self.name = "bits" if bits else "nats"

    def rate_in(self, r: float) -> float:
        return r * LN2 if self.bits else r

    def out(self, v: float) -> float:
        return v / LN2 if self.bits else v


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path}: {exc}") from None
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


def _pair_from_args(args) -> tuple[HypothesisPair, B.BsdsParams | None]:
    has_inline = args.p is not None or args.q is not None
    if bool(args.input) == has_inline:
        raise ValidationError("give exactly one input source: --input FILE or --p/--q")
    if args.input:
        hp = HypothesisPair.from_json_obj(_load_json(args.input))
        return hp, _detect_bsds(hp)
    if args.p is None or args.q is None:
        raise ValidationError("inline BSDS input needs both --p and --q")
    params = B.BsdsParams(args.p, args.q)
    return params.pair(), params


def _detect_bsds(hp: HypothesisPair) -> B.BsdsParams | None:
    if hp.p.cards != (2, 2):
        return None
    found = []
    for d in (hp.p, hp.q):
        m = d.probs
        if not (np.isclose(m[0, 0], m[1, 1], atol=1e-12) and np.isclose(m[0, 1], m[1, 0], atol=1e-12)):
            return None
        found.append(float(2 * m[0, 1]))
    try:
        return B.BsdsParams(*found)
    except ValidationError:
        return None


def _channel_from_args(args, nx: int) -> TestChannel:
    spec = args.channel
    if spec == "identity":
        return TestChannel.identity(nx)
    if spec == "constant":
        return TestChannel.constant(nx)
    if spec.startswith("map:"):
        return TestChannel.from_map([int(v) for v in spec[4:].split(",")])
    return TestChannel.from_json_obj(_load_json(spec))


def _rate_grid(args, lo: float, hi: float, units: Units) -> list[float]:
    if args.rates:
        rates = [units.rate_in(float(v)) for v in args.rates.split(",")]
    else:
        lo = units.rate_in(args.rate_min) if args.rate_min is not None else lo
        hi = units.rate_in(args.rate_max) if args.rate_max is not None else hi
        rates = np.linspace(lo, hi, args.num).tolist()
    return rates


def _emit(obj, fmt: str, out, table: tuple[list[str], list[list]] | None = None) -> None:
    if fmt == "csv" and table is not None:
        header, rows = table
        w = csv.writer(out, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])
        return
    json.dump(_num(obj), out, indent=2, sort_keys=True)
    out.write("\n")


def cmd_check_degeneracy(args, units, out):
    hp, _ = _pair_from_args(args)
    llr = lambda_hat(hp, args.reference_column)
    verdict = check_no_quantization_condition(hp, args.row_tol, args.reference_column)
    mm = merge_map(hp, args.row_tol)
    obj = {
        "lambda": llr.lam,
        "lambda_hat": llr.lam_hat,
        "reference_column": args.reference_column,
        "verdict": "non-degenerate" if verdict.holds else "degenerate",
        "witness": list(verdict.witness) if verdict.witness else None,
        "ties": [list(t) for t in verdict.ties],
        "min_row_gap": verdict.min_gap,
        "classes": [list(c) for c in mm.classes],
        "kappa": list(mm.kappa),
    }
    rows = [[f"{c}", " ".join(map(str, cls))] for c, cls in enumerate(mm.classes)]
    _emit(obj, args.format, out, (["class", "members"], rows))


def cmd_exponent(args, units, out):
    hp, _ = _pair_from_args(args)
    w = _channel_from_args(args, hp.p.cards[0])
    e = quantization_exponent(hp, w, tol=args.tol)
    stein = kl_divergence(hp.p, hp.q)
    obj = {"quantization_exponent": units.out(e), "stein_exponent": units.out(stein), "units": units.name}
    if args.rate is not None:
        obj["quantize_binning_exponent"] = units.out(
            sha_quantize_binning_exponent(hp, w, units.rate_in(args.rate), tol=args.tol)
        )
    _emit(obj, args.format, out, (list(obj), [list(obj.values())]))


def cmd_sha_bound(args, units, out):
    hp, params = _pair_from_args(args)
    h_cond = conditional_entropy(hp.p, "X", "Y")
    stein = kl_divergence(hp.p, hp.q)
    rates = _rate_grid(args, h_cond, entropy(hp.p, "X") + stein + 0.25, units)
    curve = sha_binning_curve(hp, rates, tol=args.tol)
    meta = {k: units.out(v) for k, v in curve.parameters.items()}
    if params is not None:
        meta.update({"p": params.p, "q": params.q})
    obj = {
        "scheme": curve.scheme,
        "units": units.name,
        "tolerance": curve.tolerance,
        "parameters": meta,
        "rates": [units.out(r) for r in curve.rates],
        "exponents": [units.out(e) for e in curve.exponents],
    }
    params_txt = ";".join(f"{k}={v:.12g}" for k, v in meta.items())
    rows = [
        [units.out(r), units.out(e), curve.scheme, params_txt, curve.tolerance]
        for r, e in curve.rows()
    ]
    _emit(obj, args.format, out, (["R", "E", "scheme", "params", "tolerance"], rows))


def cmd_critical_rate(args, units, out):
    hp, params = _pair_from_args(args)
    bound = critical_rate_bound_sha(hp, tol=args.tol)
    obj = {
        "sha_critical_rate_bound": units.out(bound.value),
        "certificate_exponent": units.out(bound.certificate),
        "stein_exponent": units.out(bound.stein_exponent),
        "units": units.name,
    }
    if params is not None:
        obj["closed_form"] = units.out(B.bsds_critical_rate(params))
    _emit(obj, args.format, out, (list(obj), [list(obj.values())]))


def cmd_bsds(args, units, out):
    params = B.BsdsParams(args.p, args.q)
    rates = _rate_grid(args, B.h(params.p), B.bsds_critical_rate(params) + 0.25, units)
    rows = [[units.out(r), units.out(B.bsds_exponent(params, r))] for r in rates]
    obj = {
        "p": params.p,
        "q": params.q,
        "units": units.name,
        "h_p": units.out(B.h(params.p)),
        "h_q": units.out(B.h(params.q)),
        "stein_exponent": units.out(B.d_bin(params.p, params.q)),
        "critical_rate": units.out(B.bsds_critical_rate(params)),
        "curve": rows,
    }
    _emit(obj, args.format, out, (["R", "E"], rows))


def _product_params(args) -> B.ProductBsdsParams:
    return B.ProductBsdsParams.aligned(args.p1, args.q1)


def cmd_product_bsds(args, units, out):
    params = _product_params(args)
    floor = B.h(params.p1) + B.h(params.p2)
    rates = _rate_grid(args, floor, B.product_bsds_critical_rate(params) + 0.25, units)
    rows = [[units.out(r), units.out(B.product_bsds_exponent(params, r))] for r in rates]
    obj = {
        "p1": params.p1,
        "q1": params.q1,
        "units": units.name,
        "stein_exponent": units.out(params.stein_exponent()),
        "critical_rate_joint_binning": units.out(B.product_bsds_critical_rate(params)),
        "curve": rows,
    }
    _emit(obj, args.format, out, (["R", "E"], rows))


def cmd_sequential(args, units, out):
    params = _product_params(args)
    joint = B.product_bsds_critical_rate(params)
    seq = B.sequential_critical_rate(params)
    split = B.RateSplit.stein_split(params)
    rows = [
        ["joint binning critical rate", units.out(joint)],
        ["sequential critical rate", units.out(seq)],
        ["improvement", units.out(joint - seq)],
        ["D(p1||q1)", units.out(B.d_bin(params.p1, params.q1))],
        ["sequential exponent at split", units.out(B.sequential_exponent(params, split))],
        ["stein exponent", units.out(params.stein_exponent())],
    ]
    obj = {
        "p1": params.p1,
        "q1": params.q1,
        "units": units.name,
        "split": {"r1": units.out(split.r1), "r2": units.out(split.r2)},
        "table": {k: v for k, v in rows},
    }
    _emit(obj, args.format, out, (["quantity", "value"], rows))


def cmd_simulate(args, units, out):
    if args.p1 is not None or args.q1 is not None:
        if args.p1 is None or args.q1 is None:
            raise ValidationError("the sequential simulation needs both --p1 and --q1")
        params = B.ProductBsdsParams.aligned(args.p1, args.q1)
        if args.r1 is not None and args.r2 is not None:
            split = (units.rate_in(args.r1), units.rate_in(args.r2))
        else:
            s = B.RateSplit.stein_split(params)
            split = (s.r1, s.r2)
        cfg = SchemeConfig(
            n=args.n, delta=args.delta, trials=args.trials, seed=args.seed,
            scheme="sequential", split=split, workers=args.workers,
        )
        c1, c2 = params.components
        result = simulate_sequential([c1.pair(), c2.pair()], cfg)
    else:
        hp, _ = _pair_from_args(args)
        if args.rate is None:
            raise ValidationError("simulate needs --rate")
        cfg = SchemeConfig(
            n=args.n, rate=units.rate_in(args.rate), delta=args.delta, trials=args.trials,
            seed=args.seed, workers=args.workers,
        )
        result = simulate(hp, cfg)
    obj = result.to_json_obj()
    fields = ["alpha_hat", "beta_hat", "trials", "decode_error_rate", "n", "seed"]
    _emit(obj, args.format, out, (fields, [[obj[f] for f in fields]]))


def cmd_reproduce(args, units, out):
    from .reproduce import all_passed, reproduce

    checks = reproduce()
    for c in checks:
        out.write(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  [{c.detail}]\n")
    ok = all_passed(checks)
    out.write(f"{'ALL PASSED' if ok else 'FAILURES PRESENT'} ({sum(c.passed for c in checks)}/{len(checks)})\n")
    return 0 if ok else 1


COMMANDS = {
    "check-degeneracy": cmd_check_degeneracy,
    "exponent": cmd_exponent,
    "sha-bound": cmd_sha_bound,
    "critical-rate": cmd_critical_rate,
    "bsds": cmd_bsds,
    "product-bsds": cmd_product_bsds,
    "sequential": cmd_sequential,
    "simulate": cmd_simulate,
    "reproduce-paper": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhtexp", description="Error exponents for distributed hypothesis testing.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--bits", action="store_true", help="read and print rates/exponents in bits")
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--seed", type=int, default=0)

    pair = argparse.ArgumentParser(add_help=False)
    pair.add_argument("--input", help="JSON file with a hypothesis pair {'p': ..., 'q': ...}")
    pair.add_argument("--p", type=float, help="BSDS crossover under the null")
    pair.add_argument("--q", type=float, help="BSDS crossover under the alternative")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--rates", help="comma-separated rates")
    grid.add_argument("--rate-min", type=float)
    grid.add_argument("--rate-max", type=float)
    grid.add_argument("--num", type=int, default=21)

    product = argparse.ArgumentParser(add_help=False)
    product.add_argument("--p1", type=float, required=True)
    product.add_argument("--q1", type=float, required=True)

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check-degeneracy", parents=[common, pair])
    p.add_argument("--row-tol", type=float, default=1e-9)
    p.add_argument("--reference-column", type=int, default=0)
    p = sub.add_parser("exponent", parents=[common, pair])
    p.add_argument("--channel", default="identity", help="identity | constant | map:0,1,1 | path to JSON")
    p.add_argument("--rate", type=float, help="also evaluate the quantize-and-binning bound at this rate")
    sub.add_parser("sha-bound", parents=[common, pair, grid])
    sub.add_parser("critical-rate", parents=[common, pair])
    p = sub.add_parser("bsds", parents=[common, grid])
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    sub.add_parser("product-bsds", parents=[common, grid, product])
    sub.add_parser("sequential", parents=[common, product])
    p = sub.add_parser("simulate", parents=[common, pair])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rate", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--p1", type=float, help="run the sequential scheme on the reverse-aligned product")
    p.add_argument("--q1", type=float)
    p.add_argument("--r1", type=float)
    p.add_argument("--r2", type=float)
    sub.add_parser("reproduce-paper", parents=[common])
    return parser


def run(argv=None, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    units = Units(args.bits)
    buf = io.StringIO()
    try:
        code = COMMANDS[args.command](args, units, buf) or 0
    except ConvergenceError as exc:
        err.write(f"error: {exc}\n")
        return 2
    except (DHTError, ValueError) as exc:
        err.write(f"error: {exc}\n")
        return 1
    out.write(buf.getvalue())
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
