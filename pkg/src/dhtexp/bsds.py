"""Closed forms for binary symmetric double sources (BSDS) and their products.

A BSDS with crossover ``p`` has uniform marginals and ``P(x != y) = p``.
For two-component products we use the symbol order ``x = 2*x1 + x2`` (and
likewise for ``y``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RateError, ValidationError
from .prob import HypothesisPair, binary_entropy as h, binary_kl as d_bin

_RATE_SLACK = 1e-12


def bsds_matrix(p: float) -> np.ndarray:
    return np.array([[1.0 - p, p], [p, 1.0 - p]]) / 2.0


def _open_unit(x: float, name: str) -> float:
    x = float(x)
    if not (0.0 < x < 1.0):
        raise ValidationError(f"{name}={x} must lie strictly inside (0, 1)")
    return x


@dataclass(frozen=True)
class BsdsParams:
    p: float
    q: float

    def __post_init__(self):
        _open_unit(self.p, "p")
        _open_unit(self.q, "q")
        if self.p == self.q:
            raise ValidationError("p ≠ q required")

    def pair(self) -> HypothesisPair:
        return HypothesisPair.from_arrays(bsds_matrix(self.p), bsds_matrix(self.q))

    def mirrored(self) -> "BsdsParams":
        return BsdsParams(1.0 - self.p, 1.0 - self.q)


@dataclass(frozen=True)
class ProductBsdsParams:
    p1: float
    q1: float
    p2: float
    q2: float
    reverse_aligned: bool = False

    def __post_init__(self):
        for name in ("p1", "q1", "p2", "q2"):
            _open_unit(getattr(self, name), name)
        if self.reverse_aligned:
            if not (self.p1 == self.q2 and self.p2 == self.q1):
                raise ValidationError("reverse alignment needs p1 = q2 and p2 = q1")
            if self.p1 == self.q1:
                raise ValidationError("p1 ≠ q1 required")
            # Swapping roles leaves the conditional entropy unchanged.
            assert h(self.p1) + h(self.p2) == h(self.q2) + h(self.q1)

    @classmethod
    def aligned(cls, p1: float, q1: float) -> "ProductBsdsParams":
        """The reverse-aligned product ``(p1, q1) x (q1, p1)``."""
        return cls(p1, q1, q1, p1, reverse_aligned=True)

    @property
    def components(self) -> tuple[BsdsParams, BsdsParams]:
        return BsdsParams(self.p1, self.q1), BsdsParams(self.p2, self.q2)

    def swapped(self) -> "ProductBsdsParams":
        return ProductBsdsParams(self.p2, self.q2, self.p1, self.q1, self.reverse_aligned)

    def pair(self) -> HypothesisPair:
        return HypothesisPair.from_arrays(
            np.kron(bsds_matrix(self.p1), bsds_matrix(self.p2)),
            np.kron(bsds_matrix(self.q1), bsds_matrix(self.q2)),
        )

    def stein_exponent(self) -> float:
        return d_bin(self.p1, self.q1) + d_bin(self.p2, self.q2)


@dataclass(frozen=True)
class RateSplit:
    r1: float
    r2: float

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0:
            raise ValidationError("split rates must be non-negative")

    @property
    def total(self) -> float:
        return self.r1 + self.r2

    @classmethod
    def stein_split(cls, params: ProductBsdsParams) -> "RateSplit":
        """``R1 = h(p1)``, ``R2 = h(p2) + D(p2||q2)``: the split reaching the Stein exponent."""
        return cls(h(params.p1), h(params.p2) + d_bin(params.p2, params.q2))


def bsds_exponent(params: BsdsParams, rate: float) -> float:
    """Closed-form binning bound for a BSDS.

    ``min(|R - h(p)|^+, D(p||q))`` when ``h(p) <= h(q)`` and ``D(p||q)``
    otherwise, valid for ``R >= h(p)``.  The second branch assumes ``p`` and
    ``q`` sit on the same side of 1/2; for ``q`` beyond the mirror point
    ``1 - p`` the numeric bound in :mod:`dhtexp.sha` is smaller.
    """
    hp_, hq = h(params.p), h(params.q)
    if rate < hp_ - _RATE_SLACK:
        raise RateError(f"rate {rate:.12g} is below h(p) = {hp_:.12g}")
    stein = d_bin(params.p, params.q)
    if hp_ <= hq:
        return min(max(rate - hp_, 0.0), stein)
    return stein


def bsds_critical_rate(params: BsdsParams) -> float:
    """``h(p) + D(p||q)`` when ``h(p) <= h(q)``, else ``h(p)``.

    Shares the same-side-of-1/2 assumption of :func:`bsds_exponent`.
    """
    hp_ = h(params.p)
    if hp_ <= h(params.q):
        return hp_ + d_bin(params.p, params.q)
    return hp_


def _require_aligned(params: ProductBsdsParams) -> None:
    if not params.reverse_aligned:
        raise ValidationError("the product formulas need reverse-aligned parameters (p1 = q2, p2 = q1)")


def product_bsds_exponent(params: ProductBsdsParams, rate: float) -> float:
    """``min(|R - h(p1) - h(p2)|^+, D(p1||q1) + D(p2||q2))`` for ``R >= h(p1) + h(p2)``."""
    _require_aligned(params)
    floor = h(params.p1) + h(params.p2)
    if rate < floor - _RATE_SLACK:
        raise RateError(f"rate {rate:.12g} is below h(p1) + h(p2) = {floor:.12g}")
    return min(max(rate - floor, 0.0), params.stein_exponent())


def product_inner_check(params: ProductBsdsParams, tol: float = 1e-4):
    """Numerically confirm that ``Q_XY`` minimizes the inner binning problem.

    Returns the :class:`~dhtexp.sha.BinningInner` found by the general
    optimizer on the 4x4 pair; raises if its minimizer is farther than
    ``tol`` (max-abs) from ``Q_XY``.
    """
    from .sha import binning_inner_minimum

    _require_aligned(params)
    hp = params.pair()
    inner = binning_inner_minimum(hp, method="tilted")
    if not inner.minimizer.allclose(hp.q, atol=tol) or inner.value > tol:
        raise AssertionError(f"inner minimizer is not Q_XY (value {inner.value:.3e})")
    return inner


def product_bsds_critical_rate(params: ProductBsdsParams) -> float:
    _require_aligned(params)
    return h(params.p1) + h(params.p2) + d_bin(params.p1, params.q1) + d_bin(params.p2, params.q2)


def _require_sequential(params: ProductBsdsParams, split: RateSplit | None = None) -> None:
    _require_aligned(params)
    if not h(params.q1) < h(params.p1):
        hint = ""
        if h(params.q2) < h(params.p2):
            hint = "; swapping the component order (params.swapped()) satisfies it"
        raise ValidationError(f"the sequential bound needs h(q1) < h(p1){hint}")
    if split is not None:
        if split.r1 < h(params.p1) - _RATE_SLACK or split.r2 < h(params.p2) - _RATE_SLACK:
            raise RateError("the split needs R1 >= h(p1) and R2 >= h(p2)")


def sequential_exponent(params: ProductBsdsParams, split: RateSplit) -> float:
    """``D(p1||q1) + min(|R2 - h(p2)|^+, D(p2||q2))`` for the sequential scheme."""
    _require_sequential(params, split)
    value = d_bin(params.p1, params.q1) + min(max(split.r2 - h(params.p2), 0.0), d_bin(params.p2, params.q2))
    c1, c2 = params.components
    parts = bsds_exponent(c1, split.r1) + bsds_exponent(c2, split.r2)
    assert math.isclose(value, parts, rel_tol=0, abs_tol=1e-12), (value, parts)
    return value


def componentwise_sequential_exponent(params: ProductBsdsParams, split: RateSplit) -> tuple[float, bool]:
    """Sum of per-component closed forms in any entropy ordering.

    Returns ``(value, backed)``, where ``backed`` is True only in the
    reverse-aligned case with ``h(q1) < h(p1)``, where the sum has been
    derived in closed form.
    """
    c1, c2 = params.components
    value = bsds_exponent(c1, split.r1) + bsds_exponent(c2, split.r2)
    backed = params.reverse_aligned and h(params.q1) < h(params.p1)
    return value, backed


def sequential_critical_rate(params: ProductBsdsParams) -> float:
    """``h(p1) + h(p2) + D(p2||q2)``; below the joint-binning bound by ``D(p1||q1)``."""
    _require_sequential(params)
    value = h(params.p1) + h(params.p2) + d_bin(params.p2, params.q2)
    gap = product_bsds_critical_rate(params) - value
    assert gap > 0 and math.isclose(gap, d_bin(params.p1, params.q1), rel_tol=0, abs_tol=1e-12)
    return value


def split_sweep(params: ProductBsdsParams, rate: float, num: int = 21) -> list[tuple[RateSplit, float]]:
    """Sequential exponent across splits ``R1 in [h(p1), R - h(p2)]`` of a fixed total rate."""
    _require_sequential(params)
    lo = h(params.p1)
    hi = rate - h(params.p2)
    if hi < lo - _RATE_SLACK:
        raise RateError(f"rate {rate:.12g} is below h(p1) + h(p2)")
    hi = max(hi, lo)
    out = []
    for r1 in np.linspace(lo, hi, num):
        split = RateSplit(float(r1), max(rate - float(r1), h(params.p2)))
        out.append((split, sequential_exponent(params, split)))
    return out
