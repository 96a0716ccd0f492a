"""Scalar minimization helpers."""

import math
from collections.abc import Callable

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI2 = (3 - math.sqrt(5)) / 2


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x))`` where ``x`` is the best point seen; the bracket
    shrinks until it is narrower than ``tol``.  Endpoints are evaluated too,
    so a minimum sitting on the boundary is located exactly.
    """
    a, b = min(a, b), max(a, b)
    fa, fb = f(a), f(b)
    best = (a, fa) if fa <= fb else (b, fb)
    h = b - a
    if h <= tol:
        return best
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = INV_PHI * h
            c = a + INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = INV_PHI * h
            d = a + INV_PHI * h
            fd = f(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx < best[1]:
            best = (x, fx)
    return best
