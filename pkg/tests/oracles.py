"""Independent reference computations used by the tests.

Nothing here calls into the I-projection or binning solvers: divergences are
evaluated directly and minimized by brute-force grids with local refinement.
"""

import itertools

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def mp_h(p):
    p = mp.mpf(p)
    return -p * mp.log(p) - (1 - p) * mp.log(1 - p)


def mp_d(p, q):
    p, q = mp.mpf(p), mp.mpf(q)
    return p * mp.log(p / q) + (1 - p) * mp.log((1 - p) / (1 - q))


def kl(p, q):
    p = np.asarray(p, float).ravel()
    q = np.asarray(q, float).ravel()
    m = p > 0
    return float(np.sum(p[m] * np.log(p[m] / q[m])))


def cond_entropy_xy(t):
    """H(X|Y) of a 2-D table, straight from the definition."""
    t = np.asarray(t, float)
    py = t.sum(axis=0)
    out = 0.0
    for x, y in itertools.product(range(t.shape[0]), range(t.shape[1])):
        if t[x, y] > 0:
            out -= t[x, y] * np.log(t[x, y] / py[y])
    return out


def grid_min_1d(f, lo, hi, step=1e-4, final=1e-10):
    """Minimize ``f`` on ``[lo, hi]``: uniform grid, then repeated local zoom."""
    n = max(3, int(np.ceil((hi - lo) / step)) + 1)
    xs = np.linspace(lo, hi, n)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmin(vals))
    best_x, best = xs[i], vals[i]
    h = (hi - lo) / (n - 1)
    while h > final:
        a, b = max(lo, best_x - 2 * h), min(hi, best_x + 2 * h)
        xs = np.linspace(a, b, 41)
        vals = np.array([f(x) for x in xs])
        i = int(np.argmin(vals))
        if vals[i] <= best:
            best_x, best = xs[i], vals[i]
        h = (b - a) / 40
    return best_x, best


def grid_min_2d(f, box, step=1e-2, final=1e-10):
    """Minimize ``f`` over a rectangle ``((lo0, hi0), (lo1, hi1))``; ``f`` may return inf."""
    (a0, b0), (a1, b1) = box
    n0 = max(3, int(np.ceil((b0 - a0) / step)) + 1)
    n1 = max(3, int(np.ceil((b1 - a1) / step)) + 1)
    best = (np.inf, None)
    for x in np.linspace(a0, b0, n0):
        for y in np.linspace(a1, b1, n1):
            v = f(x, y)
            if v < best[0]:
                best = (v, (x, y))
    h0, h1 = (b0 - a0) / (n0 - 1), (b1 - a1) / (n1 - 1)
    while max(h0, h1) > final:
        (x0, y0) = best[1]
        lo0, hi0 = max(a0, x0 - 2 * h0), min(b0, x0 + 2 * h0)
        lo1, hi1 = max(a1, y0 - 2 * h1), min(b1, y0 + 2 * h1)
        for x in np.linspace(lo0, hi0, 21):
            for y in np.linspace(lo1, hi1, 21):
                v = f(x, y)
                if v < best[0]:
                    best = (v, (x, y))
        h0, h1 = (hi0 - lo0) / 20, (hi1 - lo1) / 20
    return best[1], best[0]


def feasible_range(base, direction):
    """Interval of ``t`` with ``base + t * direction >= 0``."""
    base, direction = np.ravel(base), np.ravel(direction)
    lo, hi = -np.inf, np.inf
    for b, d in zip(base, direction):
        if d > 0:
            lo = max(lo, -b / d)
        elif d < 0:
            hi = min(hi, -b / d)
    return lo, hi


SADDLE_2X2 = np.array([[1.0, -1.0], [-1.0, 1.0]])
# Perturbation preserving all three pairwise marginals of a 2x2x2 table.
SADDLE_2X2X2 = np.fromfunction(lambda a, b, c: (-1.0) ** (a + b + c), (2, 2, 2))


def oracle_two_marginals_2x2(base, q):
    """min D(P || q) over 2x2 P sharing both marginals with ``base``."""
    lo, hi = feasible_range(base, SADDLE_2X2)
    return grid_min_1d(lambda t: kl(base + t * SADDLE_2X2, q), lo, hi)[1]


def oracle_pairwise_2x2x2(base, q):
    lo, hi = feasible_range(base, SADDLE_2X2X2)
    return grid_min_1d(lambda t: kl(base + t * SADDLE_2X2X2, q), lo, hi)[1]


def oracle_ux_uy_2x2x2(base, q):
    """min D(P || q) over 2x2x2 P with the (0,1) and (0,2) marginals of ``base``."""
    dirs = []
    for u in range(2):
        d = np.zeros((2, 2, 2))
        d[u] = SADDLE_2X2
        dirs.append(d)
    box = [feasible_range(base[u], SADDLE_2X2) for u in range(2)]
    return grid_min_2d(lambda s, t: kl(base + s * dirs[0] + t * dirs[1], q), box)[1]


def bsds_binning_inner_oracle(p, q):
    """Inner binning minimum for a BSDS via a grid over the crossover of P~."""
    target = float(mp_h(p))

    def f(t):
        if -t * np.log(t) - (1 - t) * np.log(1 - t) < target - 1e-15:
            return np.inf
        return float(mp_d(t, q))

    return grid_min_1d(f, 1e-9, 1 - 1e-9, step=1e-3)[1]
