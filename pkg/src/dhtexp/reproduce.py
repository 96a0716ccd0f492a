"""End-to-end checks of the headline results: the merged-symbol counterexample,
the critical-rate comparison for a reverse-aligned BSDS product, and the
location of the inner binning minimizer for such products."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np

from .bsds import (
    ProductBsdsParams,
    product_bsds_critical_rate,
    product_bsds_exponent,
    product_inner_check,
    sequential_critical_rate,
)
from .iprojection import quantization_exponent
from .prob import HypothesisPair, binary_kl, kl_divergence
from .sha import check_no_quantization_condition, lambda_hat, merge_map, sha_binning_exponent

# Counterexample tables, as integer weights over a common denominator.
COUNTEREXAMPLE_P = ((1, 2, 3), (2, 3, 3), (1, 3, 6))
COUNTEREXAMPLE_Q = ((2, 1, 1), (1, 1, 1), (1, 2, 4))


def counterexample_pair(a: float = 1.0) -> HypothesisPair:
    p = np.array(COUNTEREXAMPLE_P, dtype=float) * a
    q = np.array(COUNTEREXAMPLE_Q, dtype=float) * a
    return HypothesisPair.from_arrays(p / (24 * a), q / (14 * a))


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _exact_ratio_rows():
    """Row-offset likelihood ratios ``P(x,y)Q(x,0) / (Q(x,y)P(x,0))`` as fractions."""
    p = [[Fraction(v, 24) for v in row] for row in COUNTEREXAMPLE_P]
    q = [[Fraction(v, 14) for v in row] for row in COUNTEREXAMPLE_Q]
    return [[p[x][y] * q[x][0] / (q[x][y] * p[x][0]) for y in range(3)] for x in range(3)]


def check_counterexample() -> list[Check]:
    hp = counterexample_pair()
    llr = lambda_hat(hp)
    lam = llr.lam
    distinct = all(np.max(np.abs(lam[i] - lam[j])) > 1e-9 for i in range(3) for j in range(i + 1, 3))
    exact = _exact_ratio_rows()
    verdict = check_no_quantization_condition(hp)
    mm = merge_map(hp)
    e = quantization_exponent(hp, mm.channel())
    d = kl_divergence(hp.p, hp.q)
    return [
        Check("counterexample: log-likelihood rows pairwise distinct", distinct, f"rows {lam.round(6).tolist()}"),
        Check(
            "counterexample: normalized rows 1 and 2 coincide",
            exact[1] == exact[2] and llr.row_gap(1, 2) <= 1e-12,
            f"exact ratios {[str(v) for v in exact[1]]} vs {[str(v) for v in exact[2]]}",
        ),
        Check(
            "counterexample: degenerate with witness (1, 2)",
            (not verdict.holds) and verdict.witness == (1, 2),
            f"witness {verdict.witness}",
        ),
        Check("counterexample: merge classes {0}, {1, 2}", mm.classes == ((0,), (1, 2)), f"classes {mm.classes}"),
        Check(
            "counterexample: merged quantization exponent equals D(P||Q)",
            abs(e - d) < 1e-8,
            f"E = {e:.12g}, D = {d:.12g}, gap {abs(e - d):.2e}",
        ),
    ]


def _dec_h(p: Decimal) -> Decimal:
    one = Decimal(1)
    return -(p * p.ln()) - (one - p) * (one - p).ln()


def _dec_d(p: Decimal, q: Decimal) -> Decimal:
    one = Decimal(1)
    return p * (p / q).ln() + (one - p) * ((one - p) / (one - q)).ln()


def check_critical_rates(p1: float = 0.3, q1: float = 0.1) -> list[Check]:
    getcontext().prec = 50
    params = ProductBsdsParams.aligned(p1, q1)
    joint = product_bsds_critical_rate(params)
    seq = sequential_critical_rate(params)
    dp, dq = Decimal(repr(p1)), Decimal(repr(q1))
    joint_ref = float(_dec_h(dp) + _dec_h(dq) + _dec_d(dp, dq) + _dec_d(dq, dp))
    seq_ref = float(_dec_h(dp) + _dec_h(dq) + _dec_d(dq, dp))
    gap = joint - seq
    return [
        Check(
            "critical rates: sequential = joint - D(p1||q1)",
            abs(gap - binary_kl(p1, q1)) <= 1e-12,
            f"joint {joint:.12g}, sequential {seq:.12g}, improvement {gap:.12g}",
        ),
        Check("critical rates: joint bound vs 50-digit evaluation", abs(joint - joint_ref) <= 1e-12, f"{joint_ref:.15g}"),
        Check("critical rates: sequential bound vs 50-digit evaluation", abs(seq - seq_ref) <= 1e-12, f"{seq_ref:.15g}"),
    ]


def random_aligned_params(rng: np.random.Generator, count: int) -> list[ProductBsdsParams]:
    out = []
    while len(out) < count:
        p1, q1 = rng.uniform(0.02, 0.98, size=2)
        if abs(p1 - q1) > 1e-3:
            out.append(ProductBsdsParams.aligned(float(p1), float(q1)))
    return out


def check_product_inner(count: int = 10, seed: int = 2021) -> list[Check]:
    worst = 0.0
    ok = True
    for params in random_aligned_params(np.random.default_rng(seed), count):
        hp = params.pair()
        try:
            inner = product_inner_check(params)
        except AssertionError:
            ok = False
            continue
        worst = max(worst, float(np.max(np.abs(inner.minimizer.probs - hp.q.probs))))
        floor = product_bsds_critical_rate(params) - params.stein_exponent()
        for rate in np.linspace(floor, product_bsds_critical_rate(params) + 0.5, 5):
            numeric = sha_binning_exponent(hp, float(rate))
            worst = max(worst, abs(numeric - product_bsds_exponent(params, float(rate))))
    return [
        Check(
            f"product BSDS: inner minimizer is Q_XY and the bound saturates at D ({count} random sets)",
            ok and worst <= 1e-4,
            f"worst deviation {worst:.2e}",
        )
    ]


def reproduce() -> list[Check]:
    return check_counterexample() + check_critical_rates() + check_product_inner()


def all_passed(checks: list[Check]) -> bool:
    return all(c.passed for c in checks)
