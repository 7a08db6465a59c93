"""Concrete function classes, their scale functionals and entropy models.

Every supported class has analytic structure: a closed-form (or certified
quadrature) scale ``sigma_of`` per member, slice envelopes, capacity
functions, and local set capacities.  Members are plain values whose meaning
depends on the class kind:

=============  =====================================================
kind           member
=============  =====================================================
halfline       threshold ``t`` of ``1{[0, t]}``, ``t <= 1/2``
boxcdf         corner array ``x`` of ``1{[0, x]}``, ``prod(x) <= 1/2``
intervals      pair ``(a, b)`` of ``1{[a, b]}`` in [0, 1]
monotone       step function ``(sites, increments)``, nondecreasing
coordc0        coordinate index ``j`` (``f_j(x) = x_j``)
finitedict     row index into the explicit value table
linearspan     coefficient vector over the orthonormal dictionary
=============  =====================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .numutil import E, adaptive_simpson, clog, log_of_logq

SQRT_MEAN = "sqrt-mean"
SQRT_VARIANCE = "sqrt-variance"
CUSTOM = "custom-declared"

_KINDS = ("halfline", "boxcdf", "intervals", "monotone", "coordc0", "finitedict", "linearspan")


class EmptySliceError(ValueError):
    """Requested slice contains no member of the class."""


class DomainError(ValueError):
    """Member or parameter outside the class domain."""


@dataclass(frozen=True)
class Slice:
    """Scale shell ``{f : lo < sigma_P f <= hi}``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise DomainError(f"slice needs 0 <= lo < hi <= 1, got ({self.lo}, {self.hi}]")


@dataclass(frozen=True)
class FunctionClass:
    kind: str
    sigma_convention: str
    d: int = 1
    g_cdf: Optional[Callable[[float], float]] = None  # monotone: c.d.f. of P
    dict_values: Optional[tuple] = None  # finitedict: members x space table
    probs: Optional[tuple] = None  # finitedict: cell probabilities
    dim: int = 1  # linearspan dictionary size
    basis: str = "cosine"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown class kind {self.kind!r}")

    # -- maximal admissible scale -------------------------------------
    @property
    def sigma_max(self) -> float:
        if self.kind in ("halfline", "boxcdf"):
            return math.sqrt(0.5)
        if self.kind == "coordc0":
            return 1.0  # sigma_1 = 1 at j = 1
        return 1.0


def half_line() -> FunctionClass:
    return FunctionClass("halfline", SQRT_MEAN)


def box_cdf(d: int) -> FunctionClass:
    if not 1 <= d <= 3:
        raise DomainError("boxcdf supports d <= 3")
    return FunctionClass("boxcdf", SQRT_MEAN, d=d)


def intervals() -> FunctionClass:
    return FunctionClass("intervals", SQRT_MEAN)


def monotone_unit(g_cdf: Optional[Callable[[float], float]] = None) -> FunctionClass:
    # scale = L2(P) norm sqrt(P f^2), declared as the class's custom convention
    return FunctionClass("monotone", CUSTOM, g_cdf=g_cdf)


def coord_c0() -> FunctionClass:
    return FunctionClass("coordc0", SQRT_MEAN)


def finite_dict(values, probs, sigma_convention: str = SQRT_MEAN) -> FunctionClass:
    values = tuple(tuple(float(v) for v in row) for row in values)
    probs = tuple(float(p) for p in probs)
    if abs(sum(probs) - 1.0) > 1e-12 or min(probs) < 0.0:
        raise DomainError("probs must form a probability vector")
    for row in values:
        if len(row) != len(probs):
            raise DomainError("value rows must match the probability vector length")
        if min(row) < 0.0 or max(row) > 1.0:
            raise DomainError("finitedict functions must take values in [0, 1]")
    return FunctionClass("finitedict", sigma_convention, dict_values=values, probs=probs)


def linear_span(dim: int) -> FunctionClass:
    # scale = L2(uniform) norm of the member, i.e. the coefficient norm
    return FunctionClass("linearspan", CUSTOM, dim=max(int(dim), 1))


# ---------------------------------------------------------------------------
# sigma functionals
# ---------------------------------------------------------------------------


def _coord_sigma(j: float) -> float:
    # Pf_j = (j log j)^{-2} with the log(x v e) convention
    return 1.0 / (j * clog(j))


def _monotone_moments(fc: FunctionClass, member) -> tuple[float, float]:
    sites, incs = member
    sites = np.asarray(sites, dtype=float)
    incs = np.asarray(incs, dtype=float)
    if np.any(incs < 0) or incs.sum() > 1.0 + 1e-12:
        raise DomainError("monotone member needs nonnegative increments summing to <= 1")
    g = np.concatenate(([0.0], np.cumsum(incs)))
    cdf = fc.g_cdf if fc.g_cdf is not None else (lambda x: min(max(x, 0.0), 1.0))
    knots = np.concatenate((sites, [1.0]))
    mean = 0.0
    second = 0.0
    prev = 0.0
    for level, knot in zip(g, knots):
        mass = cdf(knot) - cdf(prev)
        mean += level * mass
        second += level * level * mass
        prev = knot
    return mean, second


def sigma_of(fc: FunctionClass, member) -> float:
    """Scale ``sigma_P f`` of a member under the class's declared convention."""
    if fc.kind == "halfline":
        t = float(member)
        if not 0.0 <= t <= 0.5:
            raise DomainError(f"halfline member needs t in [0, 1/2], got {t}")
        return math.sqrt(t)
    if fc.kind == "boxcdf":
        x = np.asarray(member, dtype=float)
        if x.shape != (fc.d,) or np.any(x < 0) or np.any(x > 1):
            raise DomainError("boxcdf member must be a corner in [0,1]^d")
        vol = float(np.prod(x))
        if vol > 0.5 + 1e-12:
            raise DomainError("boxcdf member needs prod(x) <= 1/2")
        return math.sqrt(vol)
    if fc.kind == "intervals":
        a, b = float(member[0]), float(member[1])
        if not 0.0 <= a <= b <= 1.0:
            raise DomainError("interval member needs 0 <= a <= b <= 1")
        return math.sqrt(b - a)
    if fc.kind == "coordc0":
        j = float(member)
        if j < 1.0:
            raise DomainError("coordc0 member needs j >= 1")
        return _coord_sigma(j)
    if fc.kind == "finitedict":
        row = np.asarray(fc.dict_values[int(member)], dtype=float)
        p = np.asarray(fc.probs, dtype=float)
        mean = float(row @ p)
        if fc.sigma_convention == SQRT_MEAN:
            return math.sqrt(mean)
        second = float((row * row) @ p)
        return math.sqrt(max(second - mean * mean, 0.0))
    if fc.kind == "monotone":
        mean, second = _monotone_moments(fc, member)
        if fc.sigma_convention == SQRT_MEAN:
            return math.sqrt(mean)
        return math.sqrt(second)  # L2 norm, as declared for this class
    if fc.kind == "linearspan":
        coef = np.asarray(member, dtype=float)
        if coef.shape != (fc.dim,):
            raise DomainError("linearspan member must have one coefficient per dictionary element")
        return float(np.linalg.norm(coef))
    raise DomainError(fc.kind)


# ---------------------------------------------------------------------------
# slice envelopes
# ---------------------------------------------------------------------------


def product_volume_cdf(c: float, d: int) -> float:
    """``P{ prod_{i<=d} U_i <= c }`` for independent uniforms, exact."""
    if c <= 0.0:
        return 0.0
    if c >= 1.0:
        return 1.0
    lc = math.log(1.0 / c)
    total = 0.0
    term = 1.0
    for k in range(d):
        total += term
        term *= lc / (k + 1)
    return c * total


def linear_span_basis(fc: FunctionClass):
    """Orthonormal dictionary on L2(uniform[0,1]): 1, sqrt(2) cos(k pi x)."""

    def ek(k: int):
        if k == 0:
            return lambda x: np.ones_like(np.asarray(x, dtype=float))
        return lambda x: math.sqrt(2.0) * np.cos(k * math.pi * np.asarray(x, dtype=float))

    return [ek(k) for k in range(fc.dim)]


COORD_TRUNCATION = 200_000  # ball truncation; envelope tail error < 1e-9


def _coord_slice_indices(sl: Slice) -> np.ndarray:
    # sigma_j = 1/(j clog j) is decreasing in j; collect the contiguous range.
    # A slice with lo = 0 has infinitely many members; the enumeration is
    # truncated at COORD_TRUNCATION, whose tail contributes less than
    # 1/(J log^4 J) ~ 1e-9 to any envelope second moment.
    js = []
    j = 1
    while _coord_sigma(j) > sl.hi:
        j += 1
        if j > COORD_TRUNCATION:
            raise EmptySliceError("no coordc0 member below the slice top")
    while _coord_sigma(j) > sl.lo and j <= COORD_TRUNCATION:
        js.append(j)
        j += 1
    if not js:
        raise EmptySliceError(f"coordc0 slice ({sl.lo}, {sl.hi}] is empty")
    return np.asarray(js)


def slice_envelope_norm(fc: FunctionClass, sl: Slice, quad_tol: float = 1e-8) -> float:
    """L2(P) norm of the pointwise envelope of the slice.

    Closed forms: halfline (``min(hi, sigma_max)``), boxcdf (exact product
    volume), monotone (``hi^2 log(e/hi^2)``, distribution-free over nonatomic
    P).  coordc0/finitedict enumerate members; linearspan integrates the
    clipped dictionary envelope by adaptive Simpson.
    """
    if fc.kind == "halfline":
        if sl.lo >= fc.sigma_max:
            raise EmptySliceError("halfline slice above sigma_max")
        return min(sl.hi, fc.sigma_max)
    if fc.kind == "boxcdf":
        if sl.lo >= fc.sigma_max:
            raise EmptySliceError("boxcdf slice above sigma_max")
        c = min(sl.hi * sl.hi, 0.5)
        return math.sqrt(product_volume_cdf(c, fc.d))
    if fc.kind == "intervals":
        # any point is covered by an admissible interval: envelope == 1
        return 1.0
    if fc.kind == "monotone":
        # envelope F(x) = min(hi / sqrt(P[x,1]), 1); the lo-constraint does not
        # shrink it (witness steps have L2 norm exactly hi).  In the variable
        # y = G(x) the norm is distribution-free:
        #   int_0^1 min(hi^2/(1-y), 1) dy = hi^2 log(e/hi^2).
        h2 = sl.hi * sl.hi
        val = adaptive_simpson(lambda y: min(h2 / (1.0 - y), 1.0) if y < 1.0 else 1.0, 0.0, 1.0, tol=quad_tol)
        return math.sqrt(val)
    if fc.kind == "coordc0":
        js = _coord_slice_indices(sl)
        c = np.array([1.0 / clog(j) ** 2 for j in js])
        p = np.array([1.0 / j**2 for j in js])
        order = np.argsort(-c)
        c, p = c[order], p[order]
        surv = np.concatenate(([1.0], np.cumprod(1.0 - p)[:-1]))
        second = float(np.sum(c * c * p * surv))
        return math.sqrt(second)
    if fc.kind == "finitedict":
        members = members_in_slice(fc, sl)
        vals = np.asarray(fc.dict_values, dtype=float)[members]
        env = np.max(np.abs(vals), axis=0)
        return math.sqrt(float((env * env) @ np.asarray(fc.probs)))
    if fc.kind == "linearspan":
        basis = linear_span_basis(fc)

        def env_sq(x):
            s = sum(e(x) ** 2 for e in basis)
            return min(sl.hi * sl.hi * float(s), 1.0)

        val = adaptive_simpson(env_sq, 0.0, 1.0, tol=quad_tol)
        return math.sqrt(val)
    raise DomainError(fc.kind)


def members_in_slice(fc: FunctionClass, sl: Slice) -> list:
    """Member indices with scale in the slice (finitedict / coordc0 only)."""
    if fc.kind == "finitedict":
        idx = [i for i in range(len(fc.dict_values)) if sl.lo < sigma_of(fc, i) <= sl.hi]
        if not idx:
            raise EmptySliceError(f"finitedict slice ({sl.lo}, {sl.hi}] is empty")
        return idx
    if fc.kind == "coordc0":
        return list(_coord_slice_indices(sl))
    raise DomainError(f"member enumeration unsupported for {fc.kind}")


# ---------------------------------------------------------------------------
# capacity functions
# ---------------------------------------------------------------------------


def capacity(fc: FunctionClass, t: float, q: float, A: float, v: float) -> float:
    """Slice capacity ``g_q(t) = (A ||F_t||_2 / t)^v`` with ``F_t`` the
    envelope of the shell ``(t/q, t]``."""
    if not 0.0 < t <= 1.0:
        raise DomainError("capacity needs 0 < t <= 1")
    if not 1.0 < q <= 2.0:
        raise DomainError("capacity needs 1 < q <= 2")
    norm = slice_envelope_norm(fc, Slice(t / q, t))
    return (A * norm / t) ** v


def alexander_set_capacity(fc: FunctionClass, delta: float) -> float:
    """Set-indexed capacity ``P(union of members with P(C) <= delta)/delta v 1``."""
    if delta <= 0.0:
        raise DomainError("delta must be positive")
    if fc.kind == "halfline":
        mass = min(delta, 0.5)
    elif fc.kind == "boxcdf":
        mass = product_volume_cdf(min(delta, 0.5), fc.d)
    elif fc.kind == "intervals":
        mass = 1.0 if delta > 0 else 0.0
    else:
        raise DomainError("set capacity needs an indicator class")
    return max(mass / delta, 1.0)


def w_parameter(fc: FunctionClass, r: float, delta: float, q: float, A: float, v: float) -> float:
    """``max_j (log log_q(delta q / rho_j)) v (log g_q(rho_j))`` over the grid
    ``rho_j = r q^j, j = 0..l`` with ``l = ceil(log_q(delta q / r))``."""
    if not 0.0 < r < delta <= 1.0:
        raise DomainError("w needs 0 < r < delta <= 1")
    l = int(math.ceil(math.log(delta * q / r) / math.log(q) - 1e-12))
    w = -math.inf
    for j in range(l + 1):
        rho = min(r * q**j, delta * q)
        term = log_of_logq(delta * q / rho, q)
        try:
            cap = capacity(fc, min(rho, 1.0), q, A, v)
            term = max(term, math.log(max(cap, 1.0)))
        except EmptySliceError:
            pass
        w = max(w, term)
    return w


# ---------------------------------------------------------------------------
# local capacity (Alexander-style, around a fixed center set)
# ---------------------------------------------------------------------------


def _corner2_area(a: float, b: float, c: float) -> float:
    """Area of ``{(y1, y2) in (a,1] x (b,1] : y1 y2 <= c}``."""
    if c <= a * b:
        return 0.0
    u1 = a
    U1 = min(1.0, c / b) if b > 0 else 1.0
    if U1 <= u1:
        return 0.0
    area = 0.0
    s1 = min(U1, c)
    if s1 > u1:
        area += (s1 - u1) * (1.0 - b)
    lo2 = max(u1, c)
    if U1 > lo2:
        area += c * (math.log(U1) - math.log(lo2)) - b * (U1 - lo2)
    return area


def _box_tau_mass(x0: np.ndarray, delta: float) -> float:
    d = x0.shape[0]
    v0 = float(np.prod(x0))
    if v0 <= 0.0:
        raise DomainError("center box must have positive volume")
    c = v0 + delta
    # inside: points of [0, x0] excludable by shrinking one coordinate
    co = np.array([np.prod(np.delete(x0, i)) for i in range(d)])
    inside = v0 - float(np.prod(np.maximum(x0 - delta / co, 0.0)))
    # one coordinate above x0
    faces = 0.0
    for i in range(d):
        length = max(min(1.0, x0[i] + delta / co[i]) - x0[i], 0.0)
        faces += co[i] * length
    if d == 1:
        return inside + faces
    if d == 2:
        return inside + faces + _corner2_area(x0[0], x0[1], c)
    # d == 3: edge slabs (two coordinates above), then the 3-d corner
    edges = 0.0
    for i in range(3):
        rest = [k for k in range(3) if k != i]
        a, b = x0[rest[0]], x0[rest[1]]
        edges += x0[i] * _corner2_area(a, b, c / x0[i])
    hi3 = min(1.0, c / (x0[0] * x0[1]))
    corner = 0.0
    if hi3 > x0[2]:
        corner = adaptive_simpson(lambda y3: _corner2_area(x0[0], x0[1], c / y3), x0[2], hi3, tol=1e-9)
    return inside + faces + edges + corner


def local_capacity_tau(fc: FunctionClass, center, delta: float) -> float:
    """Local capacity ``tau(delta)``: mass of the union of symmetric
    differences ``C delta C0`` over members with ``P(C delta C0) <= delta``,
    divided by ``delta``.  Reported value is clamped to ``[1, 1/delta]`` when
    the union is nonempty; the raw ratio is available via
    :func:`local_capacity_tau_raw`."""
    raw = local_capacity_tau_raw(fc, center, delta)
    if raw == 0.0:
        return 0.0
    return min(max(raw, 1.0), 1.0 / delta)


def local_capacity_tau_raw(fc: FunctionClass, center, delta: float) -> float:
    if delta <= 0.0:
        raise DomainError("delta must be positive")
    if fc.kind == "halfline":
        t0 = float(center if np.isscalar(center) else center[1])
        mass = min(t0 + delta, 0.5) - max(t0 - delta, 0.0)
        return max(mass, 0.0) / delta
    if fc.kind == "intervals":
        a0, b0 = float(center[0]), float(center[1])
        len0 = b0 - a0
        if delta >= len0 and len0 < 1.0:
            # disjoint/containing members reach every point
            return 1.0 / delta
        segs = [
            (max(a0 - delta, 0.0), min(a0 + delta, 1.0)),
            (max(b0 - delta, 0.0), min(b0 + delta, 1.0)),
        ]
        segs.sort()
        mass = 0.0
        cur_lo, cur_hi = segs[0]
        for lo, hi in segs[1:]:
            if lo > cur_hi:
                mass += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            else:
                cur_hi = max(cur_hi, hi)
        mass += cur_hi - cur_lo
        return mass / delta
    if fc.kind == "boxcdf":
        x0 = np.asarray(center, dtype=float)
        return _box_tau_mass(x0, delta) / delta
    raise DomainError("local capacity needs an indicator class")


# ---------------------------------------------------------------------------
# entropy models
# ---------------------------------------------------------------------------

ENTROPY_VC = "vc"
ENTROPY_REGVAR = "regvar"
ENTROPY_VCMAJOR = "vcmajor"


@dataclass(frozen=True)
class EntropyModel:
    """Uniform covering-number bound ``log N <= H(||F|| / tau)``.

    ``vc``: ``H(x) = v log(A x)``;  ``regvar``: ``H(x) = c x^alpha``; both
    vanish below ``x = 1/2``.  ``vcmajor`` is the two-argument bound
    ``H(||F||, tau) = (A||F||/tau) log(A||F||/tau) log(1/tau)`` and is
    consumed through the integral route (no closed C_H/D_H/A_H).
    """

    variant: str
    A: float = math.e
    v: float = 1.0
    alpha: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if self.variant == ENTROPY_VC:
            if self.A < math.e or self.v < 1.0:
                raise DomainError("vc entropy needs A >= e and v >= 1")
        elif self.variant == ENTROPY_REGVAR:
            if not 0.0 <= self.alpha < 2.0:
                raise DomainError("regvar entropy needs exponent in [0, 2)")
        elif self.variant != ENTROPY_VCMAJOR:
            raise DomainError(f"unknown entropy variant {self.variant!r}")


def vc_type(A: float = math.e, v: float = 1.0) -> EntropyModel:
    return EntropyModel(ENTROPY_VC, A=A, v=v)


def reg_varying(alpha: float, c: float = 1.0) -> EntropyModel:
    return EntropyModel(ENTROPY_REGVAR, alpha=alpha, c=c)


def vc_major(A: float = math.e) -> EntropyModel:
    return EntropyModel(ENTROPY_VCMAJOR, A=A)


def entropy_eval(model: EntropyModel, x: float, tau: Optional[float] = None) -> float:
    """Evaluate the entropy bound at scale ratio ``x = ||F||/tau``.

    ``vcmajor`` needs ``tau`` as well so the ``log(1/tau)`` factor is
    evaluable (the envelope norm is then ``x * tau``).
    """
    if x < 0.5:
        return 0.0
    if model.variant == ENTROPY_VC:
        return model.v * math.log(model.A * x)
    if model.variant == ENTROPY_REGVAR:
        return model.c * x**model.alpha
    if tau is None:
        raise DomainError("vcmajor entropy needs tau alongside the ratio x")
    u = model.A * x
    env = x * tau
    val = u * (math.log(u) ** 2 + math.log(u) * math.log(1.0 / (model.A * env)))
    return max(val, 0.0)


def _regvar_tail(model: EntropyModel, x: float) -> float:
    """``int_x^inf u^{-2} sqrt(H(u)) du`` for the regvar model, by quadrature.

    Substituting ``u = x / s^4`` maps the tail onto ``s in (0, 1]`` with an
    integrable endpoint for every exponent < 2.
    """

    def g(s):
        if s <= 0.0:
            return 0.0
        u = x / s**4
        return 4.0 * s**3 * math.sqrt(entropy_eval(model, u))

    return adaptive_simpson(g, 0.0, 1.0, tol=1e-10, max_depth=45) / x


def entropy_constants(model: EntropyModel, certify_tol: float = 1e-8) -> tuple[float, float, float]:
    """Constants (C_H, D_H, A_H) for the entropy model.

    vc models use the closed forms ``(2, 2 A sqrt(v)/e, A)``; regvar models
    are evaluated numerically on log grids and reported as certified upper
    bounds (grid sup times ``1 + certify_tol``).
    """
    if model.variant == ENTROPY_VC:
        return 2.0, 2.0 * model.A * math.sqrt(model.v) / math.e, model.A
    if model.variant == ENTROPY_VCMAJOR:
        raise DomainError("vcmajor bounds are consumed via the integral route; no closed constants")
    if model.alpha >= 2.0:
        raise DomainError("regvar constants need exponent < 2")
    d_h = _regvar_tail(model, 1.0) * (1.0 + certify_tol)
    xs = np.exp(np.linspace(0.0, math.log(1e6), 160))
    c_h = 1.0
    for x in xs:
        h = entropy_eval(model, x)
        if h <= 0.0:
            continue
        c_h = max(c_h, _regvar_tail(model, x) / (math.sqrt(h) / x))
    c_h *= 1.0 + certify_tol
    a_h = 1.0
    for x in np.exp(np.linspace(math.log(2.0), math.log(1e6), 400)):
        h = entropy_eval(model, x)
        if h <= 0.0:
            continue
        val = math.log(d_h * x / (4.0 * c_h * math.sqrt(h))) / (x * x)
        a_h = max(a_h, val)
    a_h *= 1.0 + certify_tol
    return c_h, d_h, a_h
