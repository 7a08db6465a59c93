"""Shared numeric helpers: clamped logarithms and adaptive quadrature."""

from __future__ import annotations

import math

E = math.e
EE = math.e**math.e


def clog(x: float) -> float:
    """log with the ``log x := log(x v e)`` convention."""
    return math.log(max(x, E))


def cloglog(x: float) -> float:
    """Iterated log with the ``log log x := log log(x v e^e)`` convention."""
    return math.log(math.log(max(x, EE)))


def log_base(x: float, q: float) -> float:
    return math.log(x) / math.log(q)


def log_of_logq(x: float, q: float) -> float:
    """``log(log_q(x))`` with the inner value clamped at 1 (so the result is >= 0)."""
    inner = math.log(max(x, 1.0)) / math.log(q)
    return math.log(max(inner, 1.0))


def _simpson(f, a, fa, m, fm, b, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adapt(f, a, fa, m, fm, b, fb, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(f, a, fa, lm, flm, m, fm)
    right = _simpson(f, m, fm, rm, frm, b, fb)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return _adapt(f, a, fa, lm, flm, m, fm, left, tol / 2.0, depth - 1) + _adapt(
        f, m, fm, rm, frm, b, fb, right, tol / 2.0, depth - 1
    )


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-8, max_depth: int = 40) -> float:
    """Adaptive Simpson quadrature of ``f`` on [a, b] to absolute tolerance."""
    if a == b:
        return 0.0
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = _simpson(f, a, fa, m, fm, b, fb)
    return _adapt(f, a, fa, m, fm, b, fb, whole, tol, max_depth)


def bracketed_newton(f, fprime, lo: float, hi: float, target: float, rel_tol: float = 1e-12) -> float:
    """Solve ``f(x) = target`` on [lo, hi] (f increasing) by safeguarded Newton."""
    x = 0.5 * (lo + hi)
    for _ in range(200):
        r = f(x) - target
        if abs(r) <= rel_tol * max(1.0, abs(target)):
            return x
        if r > 0.0:
            hi = x
        else:
            lo = x
        d = fprime(x)
        if d > 0.0:
            step = x - r / d
            x = step if lo < step < hi else 0.5 * (lo + hi)
        else:
            x = 0.5 * (lo + hi)
    return x
