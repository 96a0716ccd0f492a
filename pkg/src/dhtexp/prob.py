"""Finite-alphabet distributions and the information measures built on them.

All quantities are in nats.  The conventions ``0 log 0 = 0`` and
``p log(p/0) = +inf`` (for ``p > 0``) are fixed here and used everywhere else
in the package.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import SupportError, ValidationError

#: Tolerance on the total mass of a constructed distribution.
PROB_TOL = 1e-12
# Sums this close to 1 are left untouched so serialization round-trips exactly.
_EXACT_SUM_TOL = 64 * np.finfo(float).eps


def _as_axes(axes: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(axes, str):
        return (axes,)
    return tuple(axes)


def _normalized(probs: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(probs)):
        raise ValidationError(f"{what}: entries must be finite")
    if np.any(probs < 0):
        raise ValidationError(f"{what}: entries must be non-negative")
    total = float(probs.sum())
    dev = abs(total - 1.0)
    if dev > PROB_TOL:
        raise ValidationError(f"{what}: entries sum to {total!r}, not 1 (tolerance {PROB_TOL})")
    if dev > _EXACT_SUM_TOL:
        probs = probs / total
    return probs


def xlogx(a: np.ndarray) -> np.ndarray:
    """Elementwise ``a log a`` with ``0 log 0 = 0``."""
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    out[pos] = a[pos] * np.log(a[pos])
    return out


def entropy_of(probs: np.ndarray) -> float:
    """Shannon entropy (nats) of a probability array of any shape."""
    return max(0.0, -float(xlogx(probs).sum()))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """A probability tensor over a product of named finite axes.

    Parameters
    ----------
    axes : sequence of str
        Axis labels in tensor order, e.g. ``("X", "Y")`` or ``("U", "X", "Y")``.
    probs : array_like
        Non-negative entries summing to one.  Sums within ``PROB_TOL`` of one
        are renormalized; anything further off is rejected.
    """

    axes: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        axes = _as_axes(self.axes)
        probs = np.array(self.probs, dtype=float)
        if len(axes) == 0:
            raise ValidationError("a distribution needs at least one axis")
        if len(set(axes)) != len(axes):
            raise ValidationError(f"duplicate axis labels in {axes}")
        if probs.ndim != len(axes):
            raise ValidationError(
                f"probs has {probs.ndim} dimensions but {len(axes)} axes were named"
            )
        if any(c < 1 for c in probs.shape):
            raise ValidationError("every axis needs cardinality >= 1")
        probs = _normalized(probs, "JointDistribution")
        probs.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "probs", probs)

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(self.probs.shape)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cards

    def axis_index(self, name: str) -> int:
        try:
            return self.axes.index(name)
        except ValueError:
            raise ValidationError(f"unknown axis {name!r}; have {self.axes}") from None

    def marginal(self, axes: str | Iterable[str]) -> "JointDistribution":
        return marginal(self, axes)

    def has_full_support(self) -> bool:
        return bool(np.all(self.probs > 0))

    def allclose(self, other: "JointDistribution", atol: float = 1e-12) -> bool:
        return self.shape == other.shape and bool(np.allclose(self.probs, other.probs, rtol=0, atol=atol))

    def to_json_obj(self) -> dict:
        return {"axes": list(self.axes), "cards": list(self.cards), "probs": self.probs.tolist()}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "JointDistribution":
        if not isinstance(obj, dict):
            raise ValidationError("distribution must be a JSON object")
        for key in ("axes", "probs"):
            if key not in obj:
                raise ValidationError(f"distribution is missing field {key!r}")
        axes = obj["axes"]
        if not isinstance(axes, list) or not all(isinstance(a, str) for a in axes):
            raise ValidationError("field 'axes' must be a list of strings")
        try:
            probs = np.array(obj["probs"], dtype=float)
        except (TypeError, ValueError):
            raise ValidationError("field 'probs' must be a rectangular nested list of numbers") from None
        if "cards" in obj and list(obj["cards"]) != list(probs.shape):
            raise ValidationError(
                f"field 'cards' {obj['cards']} disagrees with the shape of 'probs' {list(probs.shape)}"
            )
        return cls(tuple(axes), probs)


def marginal(d: JointDistribution, axes: str | Iterable[str]) -> JointDistribution:
    """Marginal of ``d`` on ``axes``, returned with axes in the requested order."""
    keep = _as_axes(axes)
    if not keep:
        raise ValidationError("marginal needs at least one axis")
    idx = [d.axis_index(a) for a in keep]
    if len(set(idx)) != len(idx):
        raise ValidationError(f"repeated axis in {keep}")
    drop = tuple(i for i in range(len(d.axes)) if i not in idx)
    m = d.probs.sum(axis=drop) if drop else d.probs
    remaining = [i for i in range(len(d.axes)) if i in idx]
    m = np.transpose(m, [remaining.index(i) for i in idx])
    return JointDistribution(keep, m)


def entropy(d: JointDistribution, axes: str | Iterable[str] | None = None) -> float:
    """Entropy of the marginal of ``d`` on ``axes`` (all axes when omitted)."""
    if axes is None:
        return entropy_of(d.probs)
    axes = _as_axes(axes)
    if not axes:
        raise ValidationError("entropy needs a nonempty axis set")
    return entropy_of(marginal(d, axes).probs)


def conditional_entropy(d: JointDistribution, target, given=()) -> float:
    """``H(target | given) = H(target, given) - H(given)``."""
    target, given = _as_axes(target), _as_axes(given)
    if not target:
        raise ValidationError("conditional_entropy needs a nonempty target")
    if set(target) & set(given):
        raise ValidationError(f"target {target} and given {given} overlap")
    if not given:
        return entropy(d, target)
    return max(0.0, entropy(d, target + given) - entropy(d, given))


def mutual_information(d: JointDistribution, a, b, given=()) -> float:
    """``I(a ; b | given)``, clipped at zero against round-off."""
    a, b, given = _as_axes(a), _as_axes(b), _as_axes(given)
    if set(a) & set(b) or set(a) & set(given) or set(b) & set(given):
        raise ValidationError("axis sets of a mutual information must be disjoint")
    return max(0.0, conditional_entropy(d, a, given) - conditional_entropy(d, a, b + given))


def kl_array(p: np.ndarray, q: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pos = p > 0
    if np.any(q[pos] <= 0):
        return math.inf
    val = float(np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos]))))
    return max(0.0, val)


def kl_divergence(p: JointDistribution, q: JointDistribution) -> float:
    """``D(p || q)``; ``+inf`` when ``p`` is not absolutely continuous w.r.t. ``q``."""
    if p.shape != q.shape:
        raise ValidationError(f"shape mismatch: {p.shape} vs {q.shape}")
    return kl_array(p.probs, q.probs)


def _check_unit(x: float, name: str) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise ValidationError(f"{name}={x} is outside [0, 1]")
    return x


def binary_entropy(p: float) -> float:
    """``h(p) = -p ln p - (1-p) ln(1-p)``."""
    p = _check_unit(p, "p")
    out = 0.0
    for t in (p, 1.0 - p):
        if t > 0:
            out -= t * math.log(t)
    return out


def binary_kl(p: float, q: float) -> float:
    """Binary divergence ``p ln(p/q) + (1-p) ln((1-p)/(1-q))``."""
    p = _check_unit(p, "p")
    q = _check_unit(q, "q")
    out = 0.0
    for a, b in ((p, q), (1.0 - p, 1.0 - q)):
        if a > 0:
            if b <= 0:
                return math.inf
            out += a * math.log(a / b)
    return max(0.0, out)


@dataclass(frozen=True, eq=False)
class TestChannel:
    """Row-stochastic matrix ``W[x, u] = P_{U|X}(u|x)``."""

    __test__ = False  # keep pytest from collecting this class

    probs: np.ndarray

    def __post_init__(self):
        w = np.array(self.probs, dtype=float)
        if w.ndim != 2 or min(w.shape) < 1:
            raise ValidationError("a test channel is a nonempty 2-D matrix")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("test channel entries must be finite and non-negative")
        rows = w.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > PROB_TOL):
            raise ValidationError(f"test channel rows must sum to 1, got {rows.tolist()}")
        bad = np.abs(rows - 1.0) > _EXACT_SUM_TOL
        if np.any(bad):
            w[bad] = w[bad] / rows[bad, None]
        w.setflags(write=False)
        object.__setattr__(self, "probs", w)

    @property
    def input_card(self) -> int:
        return self.probs.shape[0]

    @property
    def output_card(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def identity(cls, n: int) -> "TestChannel":
        return cls(np.eye(n))

    @classmethod
    def constant(cls, n: int) -> "TestChannel":
        return cls(np.ones((n, 1)))

    @classmethod
    def from_map(cls, kappa: Sequence[int], output_card: int | None = None) -> "TestChannel":
        """Deterministic channel ``U = kappa(X)``."""
        kappa = [int(k) for k in kappa]
        if min(kappa) < 0:
            raise ValidationError("merge map labels must be non-negative")
        m = output_card if output_card is not None else max(kappa) + 1
        w = np.zeros((len(kappa), m))
        w[np.arange(len(kappa)), kappa] = 1.0
        return cls(w)

    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0) | (self.probs == 1)))

    def is_nontrivial(self) -> bool:
        """True when some output is reachable from two distinct inputs."""
        return bool(np.any((self.probs > 0).sum(axis=0) >= 2))

    def to_json_obj(self) -> dict:
        return {"probs": self.probs.tolist()}

    @classmethod
    def from_json_obj(cls, obj) -> "TestChannel":
        if isinstance(obj, dict):
            if "probs" not in obj:
                raise ValidationError("channel is missing field 'probs'")
            obj = obj["probs"]
        try:
            return cls(np.array(obj, dtype=float))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError("field 'probs' of the channel must be a numeric matrix") from None


def compose(p_xy: JointDistribution, w: TestChannel, u_axis: str = "U") -> JointDistribution:
    """``P_UXY(u, x, y) = W(u|x) P_XY(x, y)``; the channel acts on the first axis."""
    if w.input_card != p_xy.cards[0]:
        raise ValidationError(
            f"channel input size {w.input_card} does not match axis {p_xy.axes[0]!r} of size {p_xy.cards[0]}"
        )
    if u_axis in p_xy.axes:
        raise ValidationError(f"axis {u_axis!r} already present")
    rest = p_xy.probs.reshape(p_xy.cards[0], -1)
    joint = np.einsum("xu,xr->uxr", w.probs, rest).reshape((w.output_card,) + p_xy.cards)
    return JointDistribution((u_axis,) + p_xy.axes, joint)


@dataclass(frozen=True, eq=False)
class HypothesisPair:
    """Null ``p`` versus alternative ``q`` on the same alphabet."""

    p: JointDistribution
    q: JointDistribution

    def __post_init__(self):
        if self.p.shape != self.q.shape:
            raise ValidationError(f"hypotheses differ in shape: {self.p.shape} vs {self.q.shape}")
        if self.p.axes != self.q.axes:
            raise ValidationError(f"hypotheses differ in axes: {self.p.axes} vs {self.q.axes}")

    @classmethod
    def from_arrays(cls, p, q, axes=("X", "Y")) -> "HypothesisPair":
        return cls(JointDistribution(axes, p), JointDistribution(axes, q))

    @property
    def full_support(self) -> bool:
        return self.p.has_full_support() and self.q.has_full_support()

    def require_full_support(self) -> None:
        for name, d in (("P", self.p), ("Q", self.q)):
            if not d.has_full_support():
                cell = tuple(int(i) for i in np.argwhere(d.probs <= 0)[0])
                raise SupportError(f"{name} has a zero entry at {cell}; full support is required")

    def stein_exponent(self) -> float:
        return kl_divergence(self.p, self.q)

    def to_json_obj(self) -> dict:
        return {"p": self.p.to_json_obj(), "q": self.q.to_json_obj()}

    @classmethod
    def from_json_obj(cls, obj) -> "HypothesisPair":
        if not isinstance(obj, dict):
            raise ValidationError("hypothesis pair must be a JSON object with fields 'p' and 'q'")
        for key in ("p", "q"):
            if key not in obj:
                raise ValidationError(f"hypothesis pair is missing field {key!r}")
        parts = []
        for key in ("p", "q"):
            try:
                parts.append(JointDistribution.from_json_obj(obj[key]))
            except ValidationError as exc:
                raise type(exc)(f"in field {key!r}: {exc}") from None
        return cls(*parts)
