"""Expectation bounds for ``E || sum_i f(X_i) ||`` over P-centered classes
under uniform entropy models, upper and lower, plus the packing-based
fullness diagnostic.

Constant policy: in ``shape`` mode the leading constants are 1 (rates and
regime structure only); in ``explicit`` mode they are assembled from the
proof chain -- the 60/120/360/960/1440 factors are explicit even though the
theorem statement's constant is not.  The assembled values are recorded in
every report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import classes as fcm
from .classes import (
    ENTROPY_VC,
    ENTROPY_VCMAJOR,
    DomainError,
    EntropyModel,
    FunctionClass,
    entropy_constants,
    entropy_eval,
    sigma_of,
)
from .numutil import adaptive_simpson, clog
from .rng import stream


@dataclass(frozen=True)
class ExpectationQuery:
    n: int
    sigma: float
    env_norm: float
    model: EntropyModel
    mode: str = "shape"  # constant policy: "shape" (C = 1) or "explicit"
    c_regime: float = 1.0  # the c of the Gaussian-regime condition n sigma^2 >= c H

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n >= 1 required")
        if not 0.0 <= self.sigma <= self.env_norm:
            raise ValueError("need 0 <= sigma <= env_norm (sup Pf^2 <= sigma^2 <= ||F||^2)")
        if self.mode not in ("shape", "explicit"):
            raise ValueError("mode must be 'shape' or 'explicit'")


@dataclass
class ExpectationReport:
    value: float
    regime: str
    constant: float
    core: float
    gaussian_regime_value: Optional[float] = None  # the simplified bound when active
    constants_used: dict = field(default_factory=dict)


def assembled_constant(model: EntropyModel) -> float:
    """Explicit-mode constant for the main upper bound, assembled from the
    proof chain: symmetrization factor 2 times the max of the branch
    constants ``120 D_H``, ``360 C_H``, ``9*8*120^2 C_H^2`` (the fixed-point
    branch, absorbing the below-threshold case H < 9) and the flat-branch
    constant ``60 (D_H + 2 sqrt(H(2)) C_H)``."""
    c_h, d_h, _ = entropy_constants(model)
    h2 = entropy_eval(model, 2.0)
    return 2.0 * max(
        120.0 * d_h,
        360.0 * c_h,
        9.0 * 8.0 * 120.0**2 * c_h**2,
        60.0 * (d_h + 2.0 * math.sqrt(h2) * c_h),
    )


def regime_constant(model: EntropyModel, c: float) -> float:
    """Explicit-mode constant of the Gaussian-regime simplification."""
    c_h, d_h, _ = entropy_constants(model)
    return 2.0 * max(360.0 * c_h, 8.0 * 120.0**2 * c_h**2 / math.sqrt(c), 120.0 * d_h)


def _vcmajor_entropy_integral(model: EntropyModel, env_norm: float, upper: float) -> float:
    """``int_0^upper sqrt(H(2 env, tau)) d tau`` with the substitution
    ``tau = u^2`` taming the endpoint; adaptive Simpson, tol 1e-8."""

    def g(u):
        tau = u * u
        if tau <= 0.0:
            return 0.0
        return 2.0 * u * math.sqrt(entropy_eval(model, 2.0 * env_norm / tau, tau=tau))

    return adaptive_simpson(g, 0.0, math.sqrt(upper), tol=1e-8, max_depth=45)


def expectation_upper(query: ExpectationQuery) -> ExpectationReport:
    """Upper bound on ``E || sum f(X_i) ||`` for P-centered classes.

    Single-argument entropy models follow the localized display: the flat
    branch ``sqrt(n) ||F||`` against the max of the Gaussian term
    ``sqrt(n) sigma sqrt(H(2||F||/sigma))``, the entropy term
    ``H(2||F||/sigma ^ sqrt(n)||F||/(1440 C_H))`` and 1.  The two-argument
    vc-major model goes through the numerically integrated entropy route
    with a ``sqrt(log n)`` floor.  When ``n sigma^2 >= c H`` holds, the
    simplified Gaussian-regime value is reported alongside.
    """
    n, sigma, env, model = query.n, query.sigma, query.env_norm, query.model
    sqn = math.sqrt(n)
    if model.variant == ENTROPY_VCMAJOR:
        if query.mode == "explicit":
            raise DomainError("explicit constants are not assembled for vcmajor; use shape mode")
        h_val = entropy_eval(model, 2.0 * env / sigma, tau=sigma)
        flat = sqn * env * (1.0 + math.sqrt(max(math.log(1.0 / (model.A * env)), 0.0)))
        gauss = sqn * _vcmajor_entropy_integral(model, env, 2.0 * sigma)
        floor = math.sqrt(clog(n))
        core = min(flat, max(gauss, h_val, floor))
        regime = "flat" if flat <= max(gauss, h_val, floor) else (
            "gaussian" if gauss >= max(h_val, floor) else ("entropy" if h_val >= floor else "logn")
        )
        return ExpectationReport(core, regime, 1.0, core, None, {"policy": "shape", "variant": "vcmajor"})
    ratio = 2.0 * env / sigma if sigma > 0 else math.inf
    h_val = entropy_eval(model, ratio) if sigma > 0 else math.inf
    c_h, d_h, a_h = entropy_constants(model)
    flat = sqn * env
    gauss = sqn * sigma * math.sqrt(h_val) if sigma > 0 else 0.0
    h_term = entropy_eval(model, min(ratio, sqn * env / (1440.0 * c_h)))
    core = min(flat, max(gauss, h_term, 1.0))
    if flat <= max(gauss, h_term, 1.0):
        regime = "flat"
    elif gauss >= max(h_term, 1.0):
        regime = "gaussian"
    elif h_term >= 1.0:
        regime = "entropy"
    else:
        regime = "unit"
    const = 1.0 if query.mode == "shape" else assembled_constant(model)
    consts = {"policy": query.mode, "C_H": c_h, "D_H": d_h, "A_H": a_h, "C(H)": const}
    report = ExpectationReport(const * core, regime, const, core, None, consts)
    if n * sigma * sigma >= query.c_regime * h_val and h_val > 0.0:
        k_reg = 1.0 if query.mode == "shape" else regime_constant(model, query.c_regime)
        report.gaussian_regime_value = k_reg * gauss
        report.constants_used["K(H,c)"] = k_reg
        report.regime += "+gaussian-regime"
    return report


def moment_upper(query: ExpectationQuery, p: float) -> float:
    """p-th moment bound ``C^p(H) [core^p v p^{p/2} (sqrt(n) sigma)^p v p^p]``
    where ``core`` is the Gaussian/entropy max of the expectation bound."""
    if p < 1.0:
        raise ValueError("p >= 1 required")
    n, sigma, env, model = query.n, query.sigma, query.env_norm, query.model
    if model.variant == ENTROPY_VCMAJOR:
        raise DomainError("moment bound is stated for single-argument entropy models")
    sqn = math.sqrt(n)
    ratio = 2.0 * env / sigma if sigma > 0 else math.inf
    c_h = entropy_constants(model)[0]
    gauss = sqn * sigma * math.sqrt(entropy_eval(model, ratio)) if sigma > 0 else 0.0
    h_term = entropy_eval(model, min(ratio, sqn * env / (1440.0 * c_h)))
    core = max(gauss, h_term)
    const = 1.0 if query.mode == "shape" else assembled_constant(model)
    return const**p * max(core**p, p ** (p / 2.0) * (sqn * sigma) ** p, p**p)


def vc_subgraph_expectation(n: int, sigma_g: float, env_norm_g: float,
                            A: float, v: float, K1: float = 1.0) -> float:
    """Subclass expectation bound for bounded VC-subgraph classes:
    ``K1 [ sqrt(n)||G|| ^ ( sqrt(n) sigma sqrt(log(A||G||/sigma))
    v log(A||G||/sigma ^ sqrt(n)||G||) v 1 ) ]`` (the VC index is folded
    into K1)."""
    if not 0.0 < sigma_g <= env_norm_g:
        raise ValueError("need 0 < sigma_G <= ||G||_2")
    if A < math.e or v < 1.0:
        raise ValueError("need A >= e and v >= 1")
    sqn = math.sqrt(n)
    ratio = A * env_norm_g / sigma_g
    inner = max(sqn * sigma_g * math.sqrt(math.log(ratio)), math.log(min(ratio, sqn * env_norm_g)), 1.0)
    return K1 * min(sqn * env_norm_g, inner)


@dataclass
class LowerReport:
    value: Optional[float]
    premises_pass: bool
    details: dict


def expectation_lower(n: int, sigma: float, cover_log: float, L: float = 1.0,
                      model: Optional[EntropyModel] = None, env_norm: float = 1.0,
                      premise_mode: str = "shape") -> LowerReport:
    """Sudakov-route lower bound ``sqrt(n) sigma sqrt(cover_log) / (32 L)``.

    Emitted only when the premises hold: ``n sigma^2 >= 2500 v 16 A_H / 9``
    and ``n sigma^2 >= factor * H(6 ||F|| / sigma)``, with ``factor`` equal
    to 1 under the shape constant policy and to the verbatim
    ``(672 L^2 v 1) * 1920^2 C_H^2`` under the explicit policy.  On premise
    failure the report carries no bound.
    """
    if cover_log < 0.0:
        raise ValueError("cover_log >= 0 required")
    ns2 = n * sigma * sigma
    if model is not None and model.variant != ENTROPY_VCMAJOR:
        c_h, _, a_h = entropy_constants(model)
        h6 = entropy_eval(model, 6.0 * env_norm / sigma)
    else:
        c_h, a_h, h6 = 1.0, 1.0, 0.0
    p1 = ns2 >= max(2500.0, 16.0 * a_h / 9.0)
    factor = 1.0 if premise_mode == "shape" else max(672.0 * L * L, 1.0) * 1920.0**2 * c_h**2
    p2 = ns2 >= factor * h6
    details = {
        "n_sigma_sq": ns2,
        "threshold_1": max(2500.0, 16.0 * a_h / 9.0),
        "threshold_2": factor * h6,
        "premise_mode": premise_mode,
    }
    if not (p1 and p2):
        return LowerReport(None, False, details)
    return LowerReport(math.sqrt(n) * sigma / (32.0 * L) * math.sqrt(cover_log), True, details)


# ---------------------------------------------------------------------------
# packing-based fullness evidence
# ---------------------------------------------------------------------------


@dataclass
class FullnessReport:
    packing_log: float
    packing_count: int
    ratio_vs_entropy: Optional[float]
    seed: int


def _member_pool(fc: FunctionClass, sigma: float, pool: int, rng) -> np.ndarray:
    """Feature rows are member descriptors; evaluation happens later."""
    if fc.kind == "halfline":
        return rng.random(pool)[:, None] * min(sigma * sigma, 0.5)
    if fc.kind == "intervals":
        lengths = rng.random(pool) * min(sigma * sigma, 1.0)
        starts = rng.random(pool) * (1.0 - lengths)
        return np.column_stack([starts, starts + lengths])
    if fc.kind == "boxcdf":
        cap = min(sigma * sigma, 0.5)
        out = np.empty((pool, fc.d))
        got = 0
        while got < pool:
            cand = rng.random((4 * pool, fc.d))
            ok = cand[np.prod(cand, axis=1) <= cap]
            take = min(pool - got, len(ok))
            out[got : got + take] = ok[:take]
            got += take
        return out
    raise DomainError(f"fullness estimate unsupported for {fc.kind}")


def _evaluate_members(fc: FunctionClass, members: np.ndarray, pts: np.ndarray) -> np.ndarray:
    if fc.kind == "halfline":
        return (pts[None, :] <= members[:, 0:1]).astype(float)
    if fc.kind == "intervals":
        return ((pts[None, :] >= members[:, 0:1]) & (pts[None, :] <= members[:, 1:2])).astype(float)
    if fc.kind == "boxcdf":
        return np.all(pts[None, :, :] <= members[:, None, :], axis=2).astype(float)
    raise DomainError(fc.kind)


def fullness_estimate(fc: FunctionClass, sigma: float, mc_points: int, seed: int,
                      pool: int = 512, model: Optional[EntropyModel] = None,
                      env_norm: Optional[float] = None) -> FullnessReport:
    """Greedy farthest-point packing of the sigma-ball at radius sigma/2 in
    L2 of an ``mc_points``-sample discretization of P.

    The count is a consistent lower-bound estimator of the packing number;
    the report carries ``log(count)`` and, when an entropy model is given,
    its ratio to ``H(||F||/sigma)`` (the fullness constant c is existential,
    so the ratio is evidence rather than proof).
    """
    if mc_points < 10**3:
        raise ValueError("mc_points >= 1000 required")
    rng = stream(seed, 0)
    if fc.kind == "finitedict":
        members = np.arange(len(fc.dict_values))
        members = members[[sigma_of(fc, int(i)) <= sigma for i in members]]
        vals = np.asarray(fc.dict_values, dtype=float)[members]
        w = np.asarray(fc.probs, dtype=float)
        gram_diff = lambda i, j: math.sqrt(float(((vals[i] - vals[j]) ** 2 @ w)))
        feats = vals * np.sqrt(w)[None, :]
    else:
        if fc.kind == "boxcdf":
            pts = rng.random((mc_points, fc.d))
        else:
            pts = rng.random(mc_points)
        members = _member_pool(fc, sigma, pool, rng)
        feats = _evaluate_members(fc, members, pts) / math.sqrt(mc_points)
    m = feats.shape[0]
    if m == 0:
        return FullnessReport(0.0, 0, None, seed)
    chosen = [0]
    dmin = np.linalg.norm(feats - feats[0], axis=1)
    while True:
        k = int(np.argmax(dmin))
        if dmin[k] < sigma / 2.0 or len(chosen) >= m:
            break
        chosen.append(k)
        dmin = np.minimum(dmin, np.linalg.norm(feats - feats[k], axis=1))
    count = len(chosen)
    plog = math.log(count)
    ratio = None
    if model is not None:
        env = env_norm if env_norm is not None else 1.0
        h = entropy_eval(model, env / sigma, tau=sigma if model.variant == ENTROPY_VCMAJOR else None)
        ratio = plog / h if h > 0 else None
    return FullnessReport(plog, count, ratio, seed)
