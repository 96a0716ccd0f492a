"""I-projection onto fixed-marginal linear families by iterative scaling.

The minimizer of ``D(. || q)`` over a family fixing some marginals lies in the
exponential family generated by ``q`` and the constraint indicators, so
iterative proportional fitting (IPF) started from ``q`` converges to it.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InfeasibleFamilyError, SupportError, ValidationError
from .prob import HypothesisPair, JointDistribution, TestChannel, compose, kl_array, kl_divergence, marginal

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
STALL_WINDOW = 1000
_CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LinearFamily:
    """Distributions on ``axes`` whose listed marginals equal fixed targets.

    ``constraints`` is a sequence of ``(axis_subset, target)`` pairs where the
    target is an array (or :class:`JointDistribution`) shaped like the marginal
    on ``axis_subset`` in the given order.  ``support_mask`` restricts the
    family to a set of allowed cells.
    """

    axes: tuple[str, ...]
    cards: tuple[int, ...]
    constraints: tuple
    support_mask: np.ndarray | None = None

    def __post_init__(self):
        axes, cards = tuple(self.axes), tuple(int(c) for c in self.cards)
        if len(axes) != len(cards):
            raise ValidationError("axes and cards differ in length")
        normalized = []
        for sub, target in self.constraints:
            sub = (sub,) if isinstance(sub, str) else tuple(sub)
            if isinstance(target, JointDistribution):
                if target.axes != sub:
                    target = marginal(target, sub)
                target = target.probs
            target = np.array(target, dtype=float)
            for a in sub:
                if a not in axes:
                    raise ValidationError(f"constraint axis {a!r} not in {axes}")
            want = tuple(cards[axes.index(a)] for a in sub)
            if target.shape != want:
                raise ValidationError(f"target on {sub} has shape {target.shape}, expected {want}")
            if np.any(target < 0) or abs(target.sum() - 1.0) > 1e-9:
                raise ValidationError(f"target on {sub} is not a probability distribution")
            # Store targets in ascending axis order, ready for broadcasting.
            order = sorted(range(len(sub)), key=lambda i: axes.index(sub[i]))
            sub_sorted = tuple(sub[i] for i in order)
            normalized.append((sub_sorted, np.transpose(target, order).copy()))
        for i, (sa, ta) in enumerate(normalized):
            for sb, tb in normalized[i + 1:]:
                shared = tuple(a for a in sa if a in sb)
                if shared and not np.allclose(
                    _sub_marginal(ta, sa, shared), _sub_marginal(tb, sb, shared), atol=_CONSISTENCY_TOL, rtol=0
                ):
                    raise ValidationError(f"targets on {sa} and {sb} disagree on shared axes {shared}")
        mask = None
        if self.support_mask is not None:
            mask = np.array(self.support_mask, dtype=bool)
            if mask.shape != cards:
                raise ValidationError(f"support mask shape {mask.shape} does not match {cards}")
            mask.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "cards", cards)
        object.__setattr__(self, "constraints", tuple(normalized))
        object.__setattr__(self, "support_mask", mask)

    def _layout(self, sub):
        idx = [self.axes.index(a) for a in sub]
        drop = tuple(i for i in range(len(self.axes)) if i not in idx)
        shape = tuple(self.cards[i] if i in idx else 1 for i in range(len(self.axes)))
        return drop, shape

    def residual(self, probs: np.ndarray) -> float:
        """Largest absolute deviation of any constrained marginal from its target."""
        worst = 0.0
        for sub, target in self.constraints:
            drop, _ = self._layout(sub)
            m = probs.sum(axis=drop) if drop else probs
            worst = max(worst, float(np.max(np.abs(m - target))))
        return worst

    def contains(self, d: JointDistribution, tol: float = 1e-9) -> bool:
        if d.axes != self.axes or d.cards != self.cards:
            return False
        if self.support_mask is not None and np.any(d.probs[~self.support_mask] > 0):
            return False
        return self.residual(d.probs) <= tol


def _sub_marginal(t, axes, keep):
    drop = tuple(i for i, a in enumerate(axes) if a not in keep)
    return t.sum(axis=drop) if drop else t


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    minimizer: JointDistribution
    divergence: float
    iterations: int
    residual: float
    converged: bool


def i_project(
    q: JointDistribution,
    fam: LinearFamily,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> ProjectionResult:
    """Minimize ``D(p || q)`` over ``fam`` by iterative proportional fitting.

    Each cycle rescales the iterate so that every constrained marginal in turn
    matches its target.  The iterate starts at ``q`` restricted to the support
    mask, and cells where that restriction is zero stay zero.

    Parameters
    ----------
    q : JointDistribution
        Reference distribution; its axes and cardinalities must match ``fam``.
    fam : LinearFamily
    tol : float
        Convergence threshold on the largest marginal deviation.
    max_iter : int
        Budget of full constraint cycles.
    callback : callable, optional
        Called as ``callback(cycle, probs)`` after every cycle.

    Raises
    ------
    SupportError
        A target puts mass where the restricted ``q`` has none.
    InfeasibleFamilyError
        The residual stopped decreasing for ``STALL_WINDOW`` cycles.
    ConvergenceError
        ``max_iter`` cycles ran without reaching ``tol``.
    """
    if q.axes != fam.axes or q.cards != fam.cards:
        raise ValidationError(f"q has axes {q.axes}{q.cards}, family has {fam.axes}{fam.cards}")
    cur = np.array(q.probs, dtype=float)
    if fam.support_mask is not None:
        cur[~fam.support_mask] = 0.0
    total = cur.sum()
    if total <= 0:
        raise SupportError("q has no mass on the support mask")
    cur /= total

    layouts = [(fam._layout(sub), target) for sub, target in fam.constraints]
    for (drop, shape), target in layouts:
        m = cur.sum(axis=drop) if drop else cur
        if np.any((m <= 0) & (target > 0)):
            raise SupportError("a target marginal puts mass outside the support of q")

    residual = fam.residual(cur)
    prev = residual
    stall = 0
    it = 0
    while residual >= tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"iterative scaling did not reach tol={tol:g} in {max_iter} cycles (residual {residual:.3e})"
            )
        for (drop, shape), target in layouts:
            m = cur.sum(axis=drop) if drop else cur
            ratio = np.divide(target, m, out=np.zeros_like(target), where=m > 0)
            cur *= ratio.reshape(shape)
        it += 1
        residual = fam.residual(cur)
        if callback is not None:
            callback(it, cur)
        if residual > prev * (1.0 - 1e-12):
            stall += 1
            if stall >= STALL_WINDOW:
                raise InfeasibleFamilyError(
                    f"residual stuck near {residual:.3e} for {STALL_WINDOW} cycles; "
                    "the family looks infeasible or degenerate"
                )
        else:
            stall = 0
        prev = residual

    minimizer = JointDistribution(q.axes, cur / cur.sum())
    return ProjectionResult(
        minimizer=minimizer,
        divergence=kl_array(minimizer.probs, q.probs),
        iterations=it,
        residual=residual,
        converged=True,
    )


def sample_member(fam: LinearFamily, rng: np.random.Generator, concentration: float = 1.0) -> JointDistribution:
    """A random member of ``fam``: the I-projection of a Dirichlet draw."""
    seed = rng.dirichlet(np.full(int(np.prod(fam.cards)), concentration)).reshape(fam.cards)
    seed = np.maximum(seed, 1e-300)
    if fam.support_mask is not None:
        seed = np.where(fam.support_mask, seed, 0.0)
    seed /= seed.sum()
    return i_project(JointDistribution(fam.axes, seed), fam, tol=1e-13).minimizer


def quantization_family(hp: HypothesisPair, w: TestChannel) -> tuple[LinearFamily, JointDistribution, JointDistribution]:
    """The family ``{P~ : P~_UX = P_UX, P~_UY = P_UY}`` plus ``P_UXY`` and ``Q_UXY``."""
    if hp.p.axes != ("X", "Y"):
        raise ValidationError(f"expected a pair over axes ('X', 'Y'), got {hp.p.axes}")
    p_uxy = compose(hp.p, w)
    q_uxy = compose(hp.q, w)
    fam = LinearFamily(
        p_uxy.axes,
        p_uxy.cards,
        ((("U", "X"), marginal(p_uxy, ("U", "X"))), (("U", "Y"), marginal(p_uxy, ("U", "Y")))),
        support_mask=q_uxy.probs > 0,
    )
    return fam, p_uxy, q_uxy


def quantization_projection(
    hp: HypothesisPair, w: TestChannel, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> ProjectionResult:
    hp.require_full_support()
    fam, _, q_uxy = quantization_family(hp, w)
    return i_project(q_uxy, fam, tol=tol, max_iter=max_iter)


def quantization_exponent(
    hp: HypothesisPair, w: TestChannel, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> float:
    """``E(P_UXY || Q_UXY) = min D(P~ || Q_UXY)`` s.t. ``P~_UX = P_UX``, ``P~_UY = P_UY``."""
    return quantization_projection(hp, w, tol=tol, max_iter=max_iter).divergence


def pythagorean_check(hp: HypothesisPair, w: TestChannel, p_tilde: JointDistribution, atol: float = 1e-9) -> float:
    """Residual ``|D(P~||Q_UXY) - D(P~||P_UXY) - D(P_UXY||Q_UXY)|`` for a merge channel.

    ``p_tilde`` must share the ``UX`` and ``UY`` marginals of ``P_UXY`` (within
    ``atol``) and ``w`` must be deterministic.
    """
    if not w.is_deterministic():
        raise ValidationError("pythagorean_check needs a deterministic (merge) channel")
    fam, p_uxy, q_uxy = quantization_family(hp, w)
    if p_tilde.axes != p_uxy.axes or p_tilde.cards != p_uxy.cards:
        raise ValidationError(f"p_tilde must live on {p_uxy.axes}{p_uxy.cards}")
    if fam.residual(p_tilde.probs) > atol:
        raise ValidationError("p_tilde does not match the UX and UY marginals of P_UXY")
    d_q = kl_divergence(p_tilde, q_uxy)
    d_p = kl_divergence(p_tilde, p_uxy)
    d_pq = kl_divergence(p_uxy, q_uxy)
    return abs(d_q - d_p - d_pq)


def family_from_marginals(d: JointDistribution, subsets: Sequence, support_mask=None) -> LinearFamily:
    """Family fixing the marginals of ``d`` on each axis subset."""
    return LinearFamily(d.axes, d.cards, tuple((s, marginal(d, s)) for s in subsets), support_mask)
