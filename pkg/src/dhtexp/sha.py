"""Quantize-and-binning (SHA) exponent bounds and their structural checks.

The binning bound with the noiseless test channel ``U = X`` is

    E_b(R) = min[ min_{P~ in P_b} D(P~ || Q_XY) + |R - H_P(X|Y)|^+ , D(P_XY || Q_XY) ]

with ``P_b = {P~ : P~_X = P_X, P~_Y = P_Y, H(X~|Y~) >= H_P(X|Y)}``.  Because
``P~_Y`` is pinned, ``H(X~|Y~)`` differs from the concave ``H(X~Y~)`` by a
constant, so ``P_b`` is convex and the inner problem is a convex program.
Its Lagrangian ``D(P~||Q) - lam H(P~)`` equals, up to constants,
``(1 + lam) D(P~ || Q^s / Z)`` with ``s = 1/(1 + lam)``, so the minimizer is
the I-projection of a tilted ``Q`` onto the two marginals.  A scalar search
over ``s`` then locates the active entropy constraint.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._optimize import golden_section
from .errors import ConvergenceError, QuantizationConditionError, RateError, ValidationError
from .iprojection import LinearFamily, i_project, quantization_exponent, quantization_family
from .prob import (
    HypothesisPair,
    JointDistribution,
    TestChannel,
    compose,
    conditional_entropy,
    entropy,
    entropy_of,
    kl_array,
    kl_divergence,
    marginal,
    mutual_information,
)

log = logging.getLogger(__name__)

ROW_TOL = 1e-9
# Slack on rate preconditions and the entropy constraint, against round-off.
_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class LogLikelihoodMatrix:
    lam: np.ndarray
    lam_hat: np.ndarray
    reference_column: int = 0

    def row_gap(self, x: int, x2: int) -> float:
        return float(np.max(np.abs(self.lam_hat[x] - self.lam_hat[x2])))


def lambda_hat(hp: HypothesisPair, reference_column: int = 0) -> LogLikelihoodMatrix:
    """Log-likelihood ratios and their rowwise offsets against ``reference_column``."""
    hp.require_full_support()
    if hp.p.probs.ndim != 2:
        raise ValidationError("lambda_hat needs a pair over two axes")
    if not 0 <= reference_column < hp.p.cards[1]:
        raise ValidationError(f"reference column {reference_column} out of range")
    lam = np.log(hp.p.probs) - np.log(hp.q.probs)
    lam_hat = lam - lam[:, [reference_column]]
    lam_hat[:, reference_column] = 0.0
    lam.setflags(write=False)
    lam_hat.setflags(write=False)
    return LogLikelihoodMatrix(lam, lam_hat, reference_column)


@dataclass(frozen=True)
class DegeneracyReport:
    """Outcome of the distinct-rows test.

    ``holds`` is True when every pair of rows differs by more than the
    tolerance; ``witness`` is the first tied pair otherwise.  ``ties`` lists
    every tied pair, and ``min_gap`` is the smallest row gap observed.
    """

    holds: bool
    witness: tuple[int, int] | None
    ties: tuple[tuple[int, int], ...]
    min_gap: float
    tol: float

    def __bool__(self) -> bool:
        return self.holds


def check_no_quantization_condition(
    hp: HypothesisPair, tol: float = ROW_TOL, reference_column: int = 0
) -> DegeneracyReport:
    """Test whether all rows of the normalized log-likelihood matrix are distinct.

    When they are, the quantization exponent can reach ``D(P_XY || Q_XY)``
    only with a test channel whose inputs have disjoint output supports, so
    the binning bound has to be used without quantization.
    """
    llr = lambda_hat(hp, reference_column)
    nx = llr.lam_hat.shape[0]
    ties = []
    min_gap = math.inf
    for x in range(nx):
        for x2 in range(x + 1, nx):
            gap = llr.row_gap(x, x2)
            min_gap = min(min_gap, gap)
            if gap <= tol:
                ties.append((x, x2))
    return DegeneracyReport(not ties, ties[0] if ties else None, tuple(ties), min_gap, tol)


@dataclass(frozen=True)
class MergeMap:
    kappa: tuple[int, ...]
    classes: tuple[tuple[int, ...], ...]

    @property
    def output_card(self) -> int:
        return len(self.classes)

    def channel(self) -> TestChannel:
        return TestChannel.from_map(self.kappa, self.output_card)


def merge_map(hp: HypothesisPair, tol: float = ROW_TOL) -> MergeMap:
    """Group source symbols whose normalized log-likelihood rows coincide."""
    llr = lambda_hat(hp)
    reps: list[int] = []
    kappa = []
    for x in range(llr.lam_hat.shape[0]):
        for u, r in enumerate(reps):
            if llr.row_gap(x, r) <= tol:
                kappa.append(u)
                break
        else:
            reps.append(x)
            kappa.append(len(reps) - 1)
    classes = tuple(tuple(x for x, k in enumerate(kappa) if k == u) for u in range(len(reps)))
    return MergeMap(tuple(kappa), classes)


@dataclass(frozen=True, eq=False)
class BinningInner:
    """Inner minimum ``min_{P~ in P_b} D(P~ || Q)`` with its minimizer."""

    value: float
    minimizer: JointDistribution
    method: str
    constraint_active: bool


def _two_by_two_inner(hp: HypothesisPair, tol: float) -> BinningInner:
    p, q = hp.p.probs, hp.q.probs
    px0 = p[0].sum()
    py0 = p[:, 0].sum()
    py = p.sum(axis=0)
    h_y = entropy_of(py)
    target = conditional_entropy(hp.p, "X", "Y")

    def table(t):
        return np.array([[t, px0 - t], [py0 - t, 1.0 - px0 - py0 + t]]).clip(min=0.0)

    def cond_h(t):
        return entropy_of(table(t)) - h_y

    t_min = max(0.0, px0 + py0 - 1.0)
    t_max = min(px0, py0)
    t_ind = px0 * py0
    t_p = p[0, 0]

    def far_root(lo_side: bool) -> float:
        end = t_min if lo_side else t_max
        g = lambda t: cond_h(t) - target
        if g(end) >= 0:
            return end
        if g(t_ind) <= 0:
            return t_ind
        return brentq(g, end, t_ind, xtol=1e-15, rtol=4 * np.finfo(float).eps) if lo_side else brentq(
            g, t_ind, end, xtol=1e-15, rtol=4 * np.finfo(float).eps
        )

    # The feasible set is the superlevel set of a concave function of t; P itself
    # sits on its boundary, on one side of the independence point.
    if t_p <= t_ind:
        lo, hi = t_p, far_root(lo_side=False)
    else:
        lo, hi = far_root(lo_side=True), t_p
    lo, hi = min(lo, hi), max(lo, hi)

    obj = lambda t: kl_array(table(t), q)
    t_best, val = golden_section(obj, lo, hi, tol=tol)
    # Where the unconstrained minimizer is interior the constraint is slack.
    active = abs(t_best - lo) <= 10 * tol or abs(t_best - hi) <= 10 * tol
    minimizer = JointDistribution(hp.p.axes, table(t_best) / table(t_best).sum())
    return BinningInner(val, minimizer, "golden-section", active)


def _tilted_projection(q: np.ndarray, s: float, fam: LinearFamily, axes, tol: float) -> JointDistribution:
    logq = s * np.log(q)
    tilted = np.exp(logq - logq.max())
    tilted /= tilted.sum()
    return i_project(JointDistribution(axes, tilted), fam, tol=tol).minimizer


def _tilted_inner(hp: HypothesisPair, tol: float) -> BinningInner:
    axes = hp.p.axes
    fam = LinearFamily(axes, hp.p.cards, (("X", marginal(hp.p, "X")), ("Y", marginal(hp.p, "Y"))))
    target = conditional_entropy(hp.p, "X", "Y")
    ipf_tol = min(tol, 1e-12)

    def gap(s):
        return conditional_entropy(_tilted_projection(hp.q.probs, s, fam, axes, ipf_tol), "X", "Y") - target

    def result(s, active):
        d = _tilted_projection(hp.q.probs, s, fam, axes, ipf_tol)
        return BinningInner(kl_divergence(d, hp.q), d, "tilted-projection", active)

    if gap(1.0) >= -_SLACK:
        return result(1.0, False)
    if gap(0.0) <= _SLACK:
        # Only the independent coupling is feasible.
        return result(0.0, True)
    s_star = brentq(gap, 0.0, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return result(s_star, True)


def binning_inner_minimum(hp: HypothesisPair, tol: float = 1e-10, method: str = "auto") -> BinningInner:
    """Solve ``min D(P~ || Q_XY)`` over ``P~_X = P_X, P~_Y = P_Y, H(X~|Y~) >= H_P(X|Y)``.

    ``method`` is ``"golden"`` (2x2 alphabets only: golden-section search over
    the single free cell), ``"tilted"`` (any alphabet) or ``"auto"``.
    """
    hp.require_full_support()
    if hp.p.axes != ("X", "Y"):
        raise ValidationError(f"expected a pair over axes ('X', 'Y'), got {hp.p.axes}")
    if method == "auto":
        method = "golden" if hp.p.cards == (2, 2) else "tilted"
    if method == "golden":
        if hp.p.cards != (2, 2):
            raise ValidationError("the golden-section path needs a 2x2 alphabet")
        return _two_by_two_inner(hp, tol)
    if method == "tilted":
        return _tilted_inner(hp, tol)
    raise ValidationError(f"unknown method {method!r}")


def _check_rate(rate: float, threshold: float, what: str) -> None:
    if rate < threshold - _SLACK:
        raise RateError(f"rate {rate:.12g} is below {what} = {threshold:.12g}")


def sha_binning_exponent(hp: HypothesisPair, rate: float, tol: float = 1e-10, method: str = "auto") -> float:
    """Binning bound ``E_b(R)`` with the noiseless test channel, in nats."""
    hp.require_full_support()
    h_cond = conditional_entropy(hp.p, "X", "Y")
    _check_rate(rate, h_cond, "H_P(X|Y)")
    inner = binning_inner_minimum(hp, tol, method).value
    return _combine(inner, rate - h_cond, hp.stein_exponent())


def _combine(inner: float, excess: float, cap: float) -> float:
    return min(inner + max(excess, 0.0), cap)


@dataclass(frozen=True)
class ExponentCurve:
    scheme: str
    rates: tuple[float, ...]
    exponents: tuple[float, ...]
    tolerance: float
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.rates) != len(self.exponents):
            raise ValidationError("rates and exponents differ in length")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValidationError("rates must be strictly increasing")

    def rows(self):
        return list(zip(self.rates, self.exponents))


def sha_binning_curve(hp: HypothesisPair, rates: Sequence[float], tol: float = 1e-10) -> ExponentCurve:
    """Sample ``E_b`` on a rate grid, solving the inner problem once."""
    hp.require_full_support()
    rates = tuple(float(r) for r in rates)
    h_cond = conditional_entropy(hp.p, "X", "Y")
    for r in rates:
        _check_rate(r, h_cond, "H_P(X|Y)")
    inner = binning_inner_minimum(hp, tol).value
    stein = hp.stein_exponent()
    values = tuple(_combine(inner, r - h_cond, stein) for r in rates)
    params = {"H_P(X|Y)": h_cond, "stein_exponent": stein, "inner_minimum": inner}
    return ExponentCurve("sha-binning", rates, values, tol, params)


def quantize_binning_inner_minimum(hp: HypothesisPair, w: TestChannel, tol: float = 1e-10) -> float:
    """``min D(P~_UXY || Q_UXY)`` over ``P~_UX = P_UX, P~_Y = P_Y, H(U~|Y~) >= H(U|Y)``.

    Test channels that merely relabel ``X`` reduce exactly to the noiseless
    problem.  Other channels go through a conic solver; the program is convex
    because ``H(U~|Y~)`` is concave once ``P~_Y`` is fixed.
    """
    w_support = w.probs > 0
    if w.is_deterministic() and np.all(w_support.sum(axis=0) <= 1):
        return binning_inner_minimum(hp, tol).value
    return _conic_quantize_binning_inner(hp, w, tol)


def _conic_quantize_binning_inner(hp: HypothesisPair, w: TestChannel, tol: float) -> float:
    import cvxpy as cp

    p_uxy = compose(hp.p, w)
    q_uxy = compose(hp.q, w)
    nu, nx, ny = p_uxy.cards
    cells = np.argwhere(q_uxy.probs > 0)
    k = len(cells)
    q_vec = q_uxy.probs[tuple(cells.T)]

    def incidence(cols, size):
        m = np.zeros((size, k))
        m[cols, np.arange(k)] = 1.0
        return m

    ux_idx = cells[:, 0] * nx + cells[:, 1]
    uy_idx = cells[:, 0] * ny + cells[:, 2]
    a_ux = incidence(ux_idx, nu * nx)
    a_y = incidence(cells[:, 2], ny)
    a_uy = incidence(uy_idx, nu * ny)
    b_ux = p_uxy.probs.sum(axis=2).reshape(-1)
    b_y = hp.p.probs.sum(axis=0)
    h_uy = entropy(p_uxy, ("U", "Y"))

    v = cp.Variable(k, nonneg=True)
    constraints = [a_ux @ v == b_ux, a_y @ v == b_y, cp.sum(cp.entr(a_uy @ v)) >= h_uy]
    prob = cp.Problem(cp.Minimize(cp.sum(cp.rel_entr(v, q_vec))), constraints)
    eps = max(tol, 1e-10)
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=eps, tol_gap_rel=eps, tol_feas=eps, max_iter=500)
    except cp.error.SolverError as exc:
        raise ConvergenceError(f"conic solver failed: {exc}") from exc
    if prob.status not in ("optimal", "optimal_inaccurate") or v.value is None:
        raise ConvergenceError(f"conic solver ended with status {prob.status}")
    x = np.clip(v.value, 0.0, None)
    x /= x.sum()
    return kl_array(x, q_vec)


def sha_quantize_binning_exponent(hp: HypothesisPair, w: TestChannel, rate: float, tol: float = 1e-10) -> float:
    """Quantize-and-binning bound for an arbitrary test channel, in nats."""
    hp.require_full_support()
    p_uxy = compose(hp.p, w)
    i_cond = mutual_information(p_uxy, "U", "X", "Y")
    _check_rate(rate, i_cond, "I(U;X|Y)")
    quant = quantization_exponent(hp, w, tol=tol)
    inner = quantize_binning_inner_minimum(hp, w, tol)
    return min(inner + max(rate - i_cond, 0.0), quant)


@dataclass(frozen=True)
class CriticalRateBound:
    value: float
    scheme: str
    certificate: float
    stein_exponent: float
    tolerance: float


def critical_rate_bound_sha(hp: HypothesisPair, tol: float = 1e-10, resolution: float = 1e-8) -> CriticalRateBound:
    """Smallest rate at which the noiseless binning bound reaches the Stein exponent.

    Bisects the rate bracket ``[H_P(X|Y), H_P(X) + D + 1]``.  Returns
    ``value=inf`` if the upper end of the bracket does not suffice.

    Raises
    ------
    QuantizationConditionError
        Two source symbols have equal normalized log-likelihood rows, so a
        merging test channel might do better and the noiseless search alone
        does not settle the question.
    """
    hp.require_full_support()
    stein = hp.stein_exponent()
    h_cond = conditional_entropy(hp.p, "X", "Y")
    if stein <= tol:
        return CriticalRateBound(h_cond, "sha-binning", 0.0, stein, tol)
    verdict = check_no_quantization_condition(hp)
    if not verdict:
        x, x2 = verdict.witness
        raise QuantizationConditionError(
            f"rows {x} and {x2} of the normalized log-likelihood matrix coincide; "
            "the noiseless binning search does not cover merging channels",
            verdict.witness,
        )
    inner = binning_inner_minimum(hp, tol).value
    bound = lambda r: _combine(inner, r - h_cond, stein)
    goal = stein - tol
    lo, hi = h_cond, entropy(hp.p, "X") + stein + 1.0
    if bound(hi) < goal:
        return CriticalRateBound(math.inf, "sha-binning", bound(hi), stein, tol)
    if bound(lo) >= goal:
        return CriticalRateBound(lo, "sha-binning", bound(lo), stein, tol)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if bound(mid) >= goal:
            hi = mid
        else:
            lo = mid
    return CriticalRateBound(hi, "sha-binning", bound(hi), stein, tol)
