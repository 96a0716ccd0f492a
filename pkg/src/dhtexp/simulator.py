"""Monte Carlo realization of the binning scheme at small blocklengths.

The encoder announces the exact type of ``x`` together with a hashed bin
index; the decoder enumerates the type class intersected with the bin, picks
the member of smallest empirical conditional entropy given ``y``, and accepts
the null hypothesis when the joint type of the estimate with ``y`` lies within
total-variation distance ``delta`` of ``P_XY``.

Every trial draws from its own generator seeded by ``(seed, hypothesis,
trial)``, so results do not depend on how trials are scheduled.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import binomtest

from .errors import GuardError, NotProductError, ValidationError
from .prob import HypothesisPair, JointDistribution, binary_entropy

ENUMERATION_GUARD = 2**24
_TIE_TOL = 1e-9
_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class SchemeConfig:
    """Simulation settings.

    ``rate`` is in nats per symbol and the bin count is ``ceil(exp(n * rate))``.
    ``delta`` defaults to ``2.5 * sqrt(|X||Y| / n)``.  For the sequential
    scheme ``split`` gives the per-component rates and ``rate`` is ignored.
    """

    n: int
    rate: float = 0.0
    delta: float | None = None
    trials: int = 1000
    seed: int = 0
    scheme: str = "sha-binning"
    split: tuple[float, float] | None = None
    workers: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("blocklength n must be >= 1")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.rate < 0:
            raise ValidationError("rate must be non-negative")
        if self.delta is not None and not self.delta > 0:
            raise ValidationError("delta must be positive")
        if self.scheme not in ("sha-binning", "sequential"):
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "sequential" and self.split is None:
            raise ValidationError("the sequential scheme needs a rate split")
        if self.split is not None and min(self.split) < 0:
            raise ValidationError("split rates must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in 64 bits")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    def delta_for(self, x_card: int, y_card: int) -> float:
        if self.delta is not None:
            return self.delta
        return 2.5 * math.sqrt(x_card * y_card / self.n)


def bin_count(n: int, rate: float) -> int:
    exponent = n * rate
    if exponent >= 62 * math.log(2):
        return 2**62
    return max(1, math.ceil(math.exp(exponent) - 1e-9))


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class SimulationResult:
    alpha_hat: float
    beta_hat: float
    trials: int
    alpha_ci: tuple[float, float]
    beta_ci: tuple[float, float]
    decode_error_rate: float
    n: int
    bins: int | tuple[int, ...]
    delta: float | tuple[float, ...]
    seed: int
    scheme: str = "sha-binning"
    components: tuple["SimulationResult", ...] = ()
    union_bound_ok: bool | None = None
    product_consistent: bool | None = None
    type2_tau_entropies: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    @property
    def beta_exponent_estimate(self) -> float:
        """``-ln(beta_hat) / n``; a finite-n number, not an asymptotic exponent."""
        return math.inf if self.beta_hat == 0 else -math.log(self.beta_hat) / self.n

    def to_json_obj(self) -> dict:
        out = asdict(self)
        out["components"] = [c.to_json_obj() for c in self.components]
        out["type2_tau_entropies"] = [list(t) for t in self.type2_tau_entropies]
        out["beta_exponent_estimate"] = self.beta_exponent_estimate
        return out


def empirical_type(x_seq, y_seq, x_card: int | None = None, y_card: int | None = None) -> JointDistribution:
    """Joint type of two equal-length sequences."""
    counts = type_counts(x_seq, y_seq, x_card, y_card)
    n = int(counts.sum())
    return JointDistribution(("X", "Y"), counts / n)


def type_counts(x_seq, y_seq, x_card: int | None = None, y_card: int | None = None) -> np.ndarray:
    x = np.asarray(x_seq, dtype=np.int64).reshape(-1)
    y = np.asarray(y_seq, dtype=np.int64).reshape(-1)
    if x.size != y.size:
        raise ValidationError(f"sequence lengths differ: {x.size} vs {y.size}")
    if x.size == 0:
        raise ValidationError("sequences must be nonempty")
    x_card = int(x.max()) + 1 if x_card is None else x_card
    y_card = int(y.max()) + 1 if y_card is None else y_card
    if x.min() < 0 or x.max() >= x_card or y.min() < 0 or y.max() >= y_card:
        raise ValidationError("sequence symbol outside its alphabet")
    return np.bincount(x * y_card + y, minlength=x_card * y_card).reshape(x_card, y_card)


def _conditional_entropy_scores(cands: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``n * H(x|y)`` for each candidate row, from integer joint counts."""
    n = y.size
    ny = int(y.max()) + 1
    nx = int(cands.max()) + 1
    pair = cands * ny + y[None, :]
    counts = np.zeros((cands.shape[0], nx * ny), dtype=np.int64)
    rows = np.repeat(np.arange(cands.shape[0]), n)
    np.add.at(counts, (rows, pair.reshape(-1)), 1)
    c = counts.astype(float)
    y_counts = np.bincount(y, minlength=ny).astype(float)
    nlogn = lambda a: np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)
    return nlogn(y_counts).sum() - nlogn(c).sum(axis=1)


def min_entropy_decode(bin_members, y_seq) -> np.ndarray:
    """Candidate of smallest empirical ``H(x|y)``; ties go to the lexicographically smallest."""
    cands = np.atleast_2d(np.asarray(bin_members, dtype=np.int64))
    if cands.size == 0:
        raise ValidationError("empty candidate set")
    y = np.asarray(y_seq, dtype=np.int64).reshape(-1)
    if cands.shape[1] != y.size:
        raise ValidationError("candidate length differs from y")
    if cands.shape[0] == 1:
        return cands[0].copy()
    scores = _conditional_entropy_scores(cands, y)
    best = np.flatnonzero(scores <= scores.min() + _TIE_TOL)
    if best.size > 1:
        # np.lexsort keys run from least to most significant.
        order = np.lexsort(cands[best].T[::-1])
        return cands[best[order[0]]].copy()
    return cands[best[0]].copy()


@lru_cache(maxsize=4096)
def _class_codes(base: int, counts: tuple[int, ...]) -> np.ndarray:
    """Codes (base-``base`` integers, first symbol most significant) of a type class, ascending."""
    n = sum(counts)
    if n == 0:
        return np.zeros(1, dtype=np.int64)
    place = base ** (n - 1)
    parts = []
    for a, c in enumerate(counts):
        if c:
            rest = list(counts)
            rest[a] -= 1
            parts.append(a * place + _class_codes(base, tuple(rest)))
    out = np.concatenate(parts)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4096)
def _class_members(base: int, counts: tuple[int, ...]) -> np.ndarray:
    codes = _class_codes(base, counts)
    n = sum(counts)
    powers = base ** np.arange(n - 1, -1, -1, dtype=np.int64)
    out = (codes[:, None] // powers[None, :]) % base
    out.setflags(write=False)
    return out


def _hash64(codes: np.ndarray, key: np.uint64) -> np.ndarray:
    """Counter-based pseudo-random function (splitmix64 finalizer)."""
    with np.errstate(over="ignore"):
        z = codes.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15) + key
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class _Component:
    """Encoder/decoder for one source under one rate."""

    def __init__(self, p: JointDistribution, n: int, rate: float, delta: float):
        self.p = p.probs
        self.nx, self.ny = p.cards
        if self.nx**n > ENUMERATION_GUARD:
            raise GuardError(
                f"|X|^n = {self.nx}^{n} exceeds the exhaustive-enumeration guard {ENUMERATION_GUARD}"
            )
        self.n = n
        self.bins = bin_count(n, rate)
        self.delta = delta
        self.powers = self.nx ** np.arange(n - 1, -1, -1, dtype=np.int64)

    def decide(self, x: np.ndarray, y: np.ndarray, key: np.uint64) -> tuple[bool, bool]:
        counts = tuple(int(c) for c in np.bincount(x, minlength=self.nx))
        codes = _class_codes(self.nx, counts)
        bins = _hash64(codes, key) % np.uint64(self.bins)
        own = _hash64(np.array([x @ self.powers]), key)[0] % np.uint64(self.bins)
        members = _class_members(self.nx, counts)[bins == own]
        x_hat = min_entropy_decode(members, y)
        t = type_counts(x_hat, y, self.nx, self.ny) / self.n
        accept = 0.5 * float(np.abs(t - self.p).sum()) <= self.delta
        return accept, bool(np.array_equal(x_hat, x))


def _sample(rng: np.random.Generator, d: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    flat = rng.choice(d.size, size=n, p=d.reshape(-1))
    return flat // d.shape[1], flat % d.shape[1]


def _trial_rng(seed: int, hyp: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(hyp, trial)))


def _run(fn, trials: int, workers: int) -> list:
    tasks = [(h, t) for h in (0, 1) for t in range(trials)]
    if workers == 1:
        return [fn(h, t) for h, t in tasks]
    chunk = max(1, len(tasks) // (8 * workers))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ht: fn(*ht), tasks, chunksize=chunk))


def _estimates(h0_accepts: Sequence[bool], h1_accepts: Sequence[bool]):
    trials = len(h0_accepts)
    rejects = trials - int(sum(h0_accepts))
    accepts = int(sum(h1_accepts))
    return rejects / trials, accepts / trials, wilson_interval(rejects, trials), wilson_interval(accepts, trials)


def simulate(hp: HypothesisPair, cfg: SchemeConfig) -> SimulationResult:
    """Estimate type I and II error rates of the binning scheme by Monte Carlo."""
    if hp.p.probs.ndim != 2:
        raise ValidationError("simulate needs a pair over two axes")
    nx, ny = hp.p.cards
    comp = _Component(hp.p, cfg.n, cfg.rate, cfg.delta_for(nx, ny))
    dists = (hp.p.probs, hp.q.probs)

    def trial(h, t):
        rng = _trial_rng(cfg.seed, h, t)
        key = rng.integers(0, 2**64, dtype=np.uint64)
        x, y = _sample(rng, dists[h], cfg.n)
        return comp.decide(x, y, key)

    out = _run(trial, cfg.trials, cfg.workers)
    h0, h1 = out[: cfg.trials], out[cfg.trials:]
    alpha, beta, a_ci, b_ci = _estimates([a for a, _ in h0], [a for a, _ in h1])
    decode_err = sum(1 for _, ok in h0 if not ok) / cfg.trials
    return SimulationResult(
        alpha_hat=alpha,
        beta_hat=beta,
        trials=cfg.trials,
        alpha_ci=a_ci,
        beta_ci=b_ci,
        decode_error_rate=decode_err,
        n=cfg.n,
        bins=comp.bins,
        delta=comp.delta,
        seed=cfg.seed,
        scheme="sha-binning",
    )


def factor_product(hp: HypothesisPair, shape1: tuple[int, int], shape2: tuple[int, int], atol: float = 1e-12):
    """Split a pair on ``(X1 X2) x (Y1 Y2)`` (index ``x = x1*|X2| + x2``) into components."""
    (nx1, ny1), (nx2, ny2) = shape1, shape2
    if hp.p.cards != (nx1 * nx2, ny1 * ny2):
        raise NotProductError(f"shape {hp.p.cards} is not {(nx1 * nx2, ny1 * ny2)}")
    parts = []
    for d in (hp.p, hp.q):
        t = d.probs.reshape(nx1, nx2, ny1, ny2)
        a = t.sum(axis=(1, 3))
        b = t.sum(axis=(0, 2))
        if not np.allclose(t, np.einsum("ac,bd->abcd", a, b), atol=atol, rtol=0):
            raise NotProductError("the distribution does not factor into the requested components")
        parts.append((a, b))
    (p1, p2), (q1, q2) = parts
    return HypothesisPair.from_arrays(p1, q1), HypothesisPair.from_arrays(p2, q2)


def _mismatch_entropy(x: np.ndarray, y: np.ndarray) -> float:
    return binary_entropy(float(np.mean(x != y)))


def simulate_sequential(
    components: Sequence[HypothesisPair] | HypothesisPair,
    cfg: SchemeConfig,
    component_shapes: tuple[tuple[int, int], tuple[int, int]] | None = None,
) -> SimulationResult:
    """Run the two-component sequential scheme: accept only if both component tests accept.

    ``components`` is either two pairs or one product pair together with
    ``component_shapes``.  Both components see ``cfg.n`` symbols.  Type II
    errors are logged with the binary entropies of the mismatch fractions of
    the two components.
    """
    if isinstance(components, HypothesisPair):
        if component_shapes is None:
            raise NotProductError("a single product pair needs component_shapes")
        components = factor_product(components, *component_shapes)
    if len(components) != 2:
        raise NotProductError("the sequential scheme takes exactly two components")
    if cfg.split is None:
        raise ValidationError("the sequential scheme needs a rate split")
    coders = [
        _Component(c.p, cfg.n, r, cfg.delta_for(*c.p.cards)) for c, r in zip(components, cfg.split)
    ]
    dists = [(c.p.probs, c.q.probs) for c in components]

    def trial(h, t):
        rng = _trial_rng(cfg.seed, h, t)
        keys = rng.integers(0, 2**64, size=2, dtype=np.uint64)
        rows = []
        for i, coder in enumerate(coders):
            x, y = _sample(rng, dists[i][h], cfg.n)
            accept, ok = coder.decide(x, y, keys[i])
            rows.append((accept, ok, _mismatch_entropy(x, y)))
        return tuple(rows)

    out = _run(trial, cfg.trials, cfg.workers)
    h0, h1 = out[: cfg.trials], out[cfg.trials:]

    comp_results = []
    for i, coder in enumerate(coders):
        alpha, beta, a_ci, b_ci = _estimates([r[i][0] for r in h0], [r[i][0] for r in h1])
        comp_results.append(
            SimulationResult(
                alpha_hat=alpha,
                beta_hat=beta,
                trials=cfg.trials,
                alpha_ci=a_ci,
                beta_ci=b_ci,
                decode_error_rate=sum(1 for r in h0 if not r[i][1]) / cfg.trials,
                n=cfg.n,
                bins=coder.bins,
                delta=coder.delta,
                seed=cfg.seed,
            )
        )
    both = lambda r: r[0][0] and r[1][0]
    alpha, beta, a_ci, b_ci = _estimates([both(r) for r in h0], [both(r) for r in h1])
    c1, c2 = comp_results
    width = lambda ci: ci[1] - ci[0]
    union_ok = alpha <= c1.alpha_hat + c2.alpha_hat + 3 * (width(a_ci) + width(c1.alpha_ci) + width(c2.alpha_ci))
    prod_lo, prod_hi = c1.beta_ci[0] * c2.beta_ci[0], c1.beta_ci[1] * c2.beta_ci[1]
    product_ok = b_ci[0] <= prod_hi and prod_lo <= b_ci[1]
    taus = tuple((r[0][2], r[1][2]) for r in h1 if both(r))
    return SimulationResult(
        alpha_hat=alpha,
        beta_hat=beta,
        trials=cfg.trials,
        alpha_ci=a_ci,
        beta_ci=b_ci,
        decode_error_rate=sum(1 for r in h0 if not (r[0][1] and r[1][1])) / cfg.trials,
        n=cfg.n,
        bins=tuple(c.bins for c in coders),
        delta=tuple(c.delta for c in coders),
        seed=cfg.seed,
        scheme="sequential",
        components=tuple(comp_results),
        union_bound_ok=bool(union_ok),
        product_consistent=bool(product_ok),
        type2_tau_entropies=taus,
    )
