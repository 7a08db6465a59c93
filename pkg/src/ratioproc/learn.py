"""Margin-distribution ratio machinery and excess-risk certificates with
concrete empirical risk minimizers (least squares, isotonic, margin
classification)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .classes import DomainError
from .kernels import pava
from .numutil import clog
from .peel import BoundReport
from .rng import stream
from .sim import ReplicationSummary, SampleBatch, draw_sample, run_replicates

# ---------------------------------------------------------------------------
# c.d.f. wrappers
# ---------------------------------------------------------------------------


@dataclass
class StepCdf:
    """Right-continuous step c.d.f. with equal or explicit weights."""

    atoms: np.ndarray
    weights: Optional[np.ndarray] = None
    continuous: bool = False

    def __post_init__(self):
        order = np.argsort(self.atoms, kind="stable")
        self.atoms = np.asarray(self.atoms, dtype=float)[order]
        if self.weights is None:
            w = np.full(self.atoms.size, 1.0 / max(self.atoms.size, 1))
        else:
            w = np.asarray(self.weights, dtype=float)[order]
        self.cum = np.concatenate([[0.0], np.cumsum(w)])

    def eval(self, t):
        out = self.cum[np.searchsorted(self.atoms, t, side="right")]
        return float(out) if np.isscalar(t) else out

    def left(self, t):
        out = self.cum[np.searchsorted(self.atoms, t, side="left")]
        return float(out) if np.isscalar(t) else out

    def jump_points(self, a: float, b: float) -> np.ndarray:
        lo = np.searchsorted(self.atoms, a, side="right")
        hi = np.searchsorted(self.atoms, b, side="left")
        return self.atoms[lo:hi]


@dataclass
class FuncCdf:
    """Continuous c.d.f. given by a (vectorized) callable."""

    fn: Callable
    continuous: bool = True

    def eval(self, t):
        out = self.fn(np.asarray(t, dtype=float))
        return float(out) if np.isscalar(t) else np.asarray(out, dtype=float)

    def left(self, t):
        return self.eval(t)

    def jump_points(self, a: float, b: float) -> np.ndarray:
        return np.empty(0)


def uniform_cdf() -> FuncCdf:
    return FuncCdf(lambda t: np.clip(t, 0.0, 1.0))


# ---------------------------------------------------------------------------
# multiplicative Levy distance
# ---------------------------------------------------------------------------

_EPS = 1e-12


def _one_sided_ok(F, G, a: float, b: float, c: float, grid: np.ndarray) -> bool:
    """``F(t) <= c G(c t)`` for all t in (a, b)."""
    cand = np.concatenate([[a], F.jump_points(a, b), grid])
    cand = cand[(cand >= a) & (cand < b)]
    if cand.size and np.any(F.eval(cand) > c * G.eval(c * cand) + _EPS):
        return False
    scaled = np.asarray(G.jump_points(a * c, b * c), dtype=float) / c
    scaled = scaled[(scaled > a) & (scaled < b)]
    if scaled.size and np.any(F.left(scaled) > c * G.left(c * scaled) + _EPS):
        return False
    return True


def mult_levy_distance(F, G, a: float, b: float, log_tol: float = 1e-6,
                       grid_points: int = 2048, log_cap: float = 50.0) -> float:
    """``M_{a,b}(F; G) = log inf{c > 1 : F(t) <= c G(ct) and G(t) <= c F(ct)
    on (a, b)}``; feasibility is scanned on the merged jump/grid points and
    the infimum located by bisection on log c (tolerance ``log_tol``).
    Returns ``inf`` when no c below ``exp(log_cap)`` is feasible."""
    if not a < b:
        raise DomainError("need a < b")
    grid = np.linspace(a, b, grid_points, endpoint=False) if (F.continuous or G.continuous) else np.empty(0)

    def feasible(c: float) -> bool:
        return _one_sided_ok(F, G, a, b, c, grid) and _one_sided_ok(G, F, a, b, c, grid)

    if feasible(1.0):
        return 0.0
    lo, hi = 0.0, 0.5
    while not feasible(math.exp(hi)):
        lo = hi
        hi *= 2.0
        if hi > log_cap:
            return math.inf
    while hi - lo > log_tol:
        mid = 0.5 * (lo + hi)
        if feasible(math.exp(mid)):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# margin cutoff and experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginSetup:
    """Empirical-entropy model ``log N <= (D/eps)^alpha`` for the score class."""

    D: float
    alpha: float

    def __post_init__(self):
        if not (self.D > 0 and 0.0 < self.alpha < 2.0):
            raise DomainError("need D > 0 and alpha in (0, 2)")


def margin_cutoff(F_f, lam: float, n: int, alpha: float) -> float:
    """``inf{delta >= 1/n : delta^{2a/(2+a)} F_f(delta) >= lam n^{-2/(2+a)}}``
    by monotone bisection; ``inf`` when no delta <= 1 qualifies."""
    if lam <= 0 or n < 1 or not 0.0 < alpha < 2.0:
        raise DomainError("need lam > 0, n >= 1, alpha in (0, 2)")
    expo = 2.0 * alpha / (2.0 + alpha)
    target = lam * n ** (-2.0 / (2.0 + alpha))

    def ok(delta: float) -> bool:
        return delta**expo * F_f.eval(delta) >= target - 1e-15

    lo = 1.0 / n
    if ok(lo):
        return lo
    if not ok(1.0):
        return math.inf
    hi = 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def margin_range_top(setup: MarginSetup, n: int, t: float) -> float:
    """Upper end ``A_n(t) = D sqrt(n) / t^{(2+alpha)/(2 alpha)}`` of the
    certified range."""
    return setup.D * math.sqrt(n) / t ** ((2.0 + setup.alpha) / (2.0 * setup.alpha))


@dataclass
class MarginExperimentResult:
    summary: ReplicationSummary
    range_top: float
    cutoffs: list
    lambda_n: float


def margin_experiment(setup: MarginSetup, family: Sequence[dict], n: int, lambda_n: float,
                      reps: int, seed: int, q: float = 2.0, K: float = 1.0,
                      workers: int = 1) -> MarginExperimentResult:
    """Replicated ``sup_f M_{delta_n(f; lambda_n), B}(F_{n,f}, F_f)`` over a
    declared finite subfamily with analytic member c.d.f.s; ``B`` defaults
    to the certified range top at ``t_n = 2 K q^2 log n``."""
    if not family:
        raise DomainError("family must be nonempty")
    t_n = 2.0 * K * q * q * clog(n)
    top = margin_range_top(setup, n, t_n)
    cutoffs = [margin_cutoff(mem["cdf"], lambda_n, n, setup.alpha) for mem in family]

    def one_rep(rep: int) -> float:
        x = stream(seed, rep).random(n)
        best = 0.0
        for mem, cut in zip(family, cutoffs):
            if not cut < top:
                continue
            emp = StepCdf(np.asarray(mem["score"](x), dtype=float))
            best = max(best, mult_levy_distance(emp, mem["cdf"], cut, top))
        return best

    vals = np.asarray(run_replicates(one_rep, reps, workers), dtype=float)
    return MarginExperimentResult(
        summary=ReplicationSummary.from_values(vals, seed),
        range_top=top, cutoffs=cutoffs, lambda_n=lambda_n,
    )


@dataclass
class MarginInequalityReport:
    freq_true_vs_emp: float
    freq_emp_vs_true: float
    prob_bound: float
    c_assembled: float
    params: dict


def check_margin_inequalities(setup: MarginSetup, family: Sequence[dict], n: int,
                              reps: int, seed: int, sigma: float = 0.5, q: float = 2.0,
                              t: float = 20.0, K: float = 1.0,
                              expectation_const: float = 1.0,
                              workers: int = 1) -> MarginInequalityReport:
    """Empirical violation frequencies of the two in-range inequalities
    ``F_f(d) <= (1 - c sigma)^{-1} F_{n,f}((1+sigma) d)`` and
    ``F_{n,f}(d) <= (1 + c sigma) F_f((1+sigma) d)`` against the stated tail
    ``K q^2/(q^2-1) t^{-1} e^{-t/(K q^2)}`` (per range point, union over the
    geometric range grid).

    ``c`` is assembled from the proof chain as ``q C + 2 q (1 + 16 C)``
    with C the expectation-bound constant (``expectation_const``)."""
    c_assembled = q * expectation_const + 2.0 * q * (1.0 + 16.0 * expectation_const)
    lam_sigma = setup.D ** (2.0 * setup.alpha / (2.0 + setup.alpha)) / (sigma * sigma)
    top = margin_range_top(setup, n, t)
    cutoffs = [margin_cutoff(mem["cdf"], lam_sigma, n, setup.alpha) for mem in family]
    deltas = []
    d = top
    while d >= 1.0 / n:
        deltas.append(d)
        d /= q

    def one_rep(rep: int):
        x = stream(seed, rep).random(n)
        v1 = v2 = False
        for mem, cut in zip(family, cutoffs):
            emp = StepCdf(np.asarray(mem["score"](x), dtype=float))
            for dl in deltas:
                if dl < cut:
                    continue
                if mem["cdf"].eval(dl) > emp.eval((1.0 + sigma) * dl) / max(1.0 - c_assembled * sigma, 1e-12):
                    v1 = True
                if emp.eval(dl) > (1.0 + c_assembled * sigma) * mem["cdf"].eval((1.0 + sigma) * dl):
                    v2 = True
        return (v1, v2)

    flags = run_replicates(one_rep, reps, workers)
    f1 = sum(1 for a, _ in flags if a) / reps
    f2 = sum(1 for _, b in flags if b) / reps
    n_range = max(len(deltas), 1)
    bound = min(n_range * K * q * q / (q * q - 1.0) / t * math.exp(-t / (K * q * q)), 1.0)
    return MarginInequalityReport(f1, f2, bound, c_assembled,
                                  {"sigma": sigma, "q": q, "t": t, "n": n, "range_points": n_range})


# ---------------------------------------------------------------------------
# excess-risk machinery
# ---------------------------------------------------------------------------


def gamma_n(r: float, s: float, n: int, beta_fn: Callable[[float], float],
            delta_fn: Callable[[float], float]) -> float:
    """Ratio-deviation radius
    ``beta(r) + 2 sqrt((s/(n r))(Delta(r) + 16 beta(r)))
    v 2 s / (n r log((s/(n r (Delta+16 beta))) v 2))``.

    The Poisson branch's log clamp is applied before the division when
    ``Delta + 16 beta = 0`` (log 2, recorded convention), so the value stays
    finite with no division by zero.
    """
    if r <= 0 or s <= 0:
        raise DomainError("need r > 0 and s > 0")
    beta = beta_fn(r)
    mass = delta_fn(r) + 16.0 * beta
    gauss = 2.0 * math.sqrt(s / (n * r) * mass)
    arg = 2.0 if mass <= 0.0 else max(s / (n * r * mass), 2.0)
    poisson = 2.0 * s / (n * r * math.log(arg))
    return beta + max(gauss, poisson)


def gamma_n_explicit(r: float, s: float, n: int, beta_fn, delta_fn, q: float) -> float:
    """One-sided slice-uniform radius assembled from Bousquet tails with
    ``s_j = s q^j``: ``beta + sqrt(2 s (Delta + 2 beta)/(n r)) + s/(3 n r)``."""
    beta = beta_fn(r)
    return beta + math.sqrt(2.0 * s * (delta_fn(r) + 2.0 * beta) / (n * r)) + s / (3.0 * n * r)


@dataclass
class ErmProblem:
    """Excess-risk certification inputs: localized means ``beta_n(r)`` and
    diameter mass ``Delta(r)`` (models or empirical tables), plus the
    certificate mode."""

    kind: str
    beta_fn: Callable[[float], float]
    delta_fn: Callable[[float], float]
    mode: str = "shape"
    K: float = 1.0


@dataclass
class ExcessRiskCertificate:
    r_star: Optional[float]
    prob_bound: float
    tolerance: float
    feasible: bool
    mode: str
    details: dict = field(default_factory=dict)


def ratio_radius(problem: ErmProblem, n: int, r: float, s: float, q: float = 2.0) -> float:
    """Two-sided uniform ratio radius ``q gamma_n(r, s)`` at a user r."""
    g = gamma_n if problem.mode == "shape" else gamma_n_explicit
    if problem.mode == "shape":
        return q * gamma_n(r, s, n, problem.beta_fn, problem.delta_fn)
    return q * gamma_n_explicit(r, s, n, problem.beta_fn, problem.delta_fn, q)


def excess_risk_certificate(problem: ErmProblem, n: int, s: float, q: float = 2.0,
                            r_min: float = 1e-10) -> ExcessRiskCertificate:
    """Smallest radius ``r*`` with ``q gamma_n(r*, s) < 1`` (log-grid
    bisection; gamma is nonincreasing in r), the failure probability of the
    excess-risk statement, and the admissible empirical-minimization
    tolerance ``(1 - q gamma_n(r*, s)) r*``."""
    if q <= 1.0:
        raise DomainError("need q > 1")

    def qg(r: float) -> float:
        return ratio_radius(problem, n, r, s, q)

    if qg(1.0) >= 1.0:
        return ExcessRiskCertificate(None, 1.0, 0.0, False, problem.mode, {"reason": "q*gamma >= 1 at r = 1"})
    lo, hi = math.log(r_min), 0.0
    if qg(r_min) < 1.0:
        hi = lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if qg(math.exp(mid)) < 1.0:
            hi = mid
        else:
            lo = mid
    r_star = math.exp(hi)
    if problem.mode == "shape":
        prob = problem.K * q / (q - 1.0) / s * math.exp(-s / (problem.K * q))
    else:
        l = int(math.ceil(math.log(1.0 / r_star) / math.log(q))) + 1
        prob = sum(math.exp(-s * q**j) for j in range(1, l + 1))
    tol = (1.0 - qg(r_star)) * r_star
    return ExcessRiskCertificate(r_star, min(prob, 1.0), tol, True, problem.mode,
                                 {"q": q, "s": s, "n": n})


def critical_radius(tau_fn: Callable[[float], float], n: int,
                    r_lo: float = 1e-12) -> float:
    """Solve ``log tau(r) / r = n`` (left side nonincreasing) by bisection;
    returns 0 when ``tau <= 1`` everywhere and 1 when even r = 1 satisfies
    ``log tau(1) >= n``."""

    def g(r: float) -> float:
        return math.log(max(tau_fn(r), 1.0)) / r - n

    if g(1.0) >= 0.0:
        return 1.0
    if g(r_lo) <= 0.0:
        return 0.0
    lo, hi = r_lo, 1.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


# ---------------------------------------------------------------------------
# concrete ERM solvers
# ---------------------------------------------------------------------------


def cosine_basis(dim: int):
    """Orthonormal dictionary on L2(uniform[0,1]): 1, sqrt(2) cos(k pi x)."""

    def ek(k):
        if k == 0:
            return lambda x: np.ones_like(np.asarray(x, dtype=float))
        return lambda x: math.sqrt(2.0) * np.cos(k * math.pi * np.asarray(x, dtype=float))

    return [ek(k) for k in range(dim)]


@dataclass
class LsFit:
    coefs: np.ndarray
    emp_risk: float
    excess: float
    projected: bool
    ridged: bool


def fit_finite_dim_ls(batch: SampleBatch, dim: int, g0_coefs: Sequence[float],
                      coef_center: Optional[Sequence[float]] = None,
                      coef_radius: Optional[float] = None) -> LsFit:
    """Exact least squares over the span of the cosine dictionary by normal
    equations.  A rank-deficient empirical Gram falls back to a 1e-10 ridge
    (flagged).  When a feasible coefficient ball is declared (guaranteeing
    g in [0, 1]), coefficients are projected onto it (flagged).  The excess
    ``||g_hat - g0||^2_{L2(uniform)}`` is the exact coefficient distance."""
    if batch.law != "regression-pair":
        raise DomainError("needs a regression-pair batch")
    x, y = batch.data["x"], batch.data["y"]
    basis = cosine_basis(dim)
    design = np.column_stack([e(x) for e in basis])
    gram = design.T @ design / batch.n
    rhs = design.T @ y / batch.n
    ridged = False
    try:
        coefs = np.linalg.solve(gram, rhs)
        if not np.all(np.isfinite(coefs)) or np.linalg.cond(gram) > 1e12:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        ridged = True
        coefs = np.linalg.solve(gram + 1e-10 * np.eye(dim), rhs)
    projected = False
    if coef_center is not None and coef_radius is not None:
        center = np.asarray(coef_center, dtype=float)
        gap = np.linalg.norm(coefs - center)
        if gap > coef_radius:
            projected = True
            coefs = center + (coefs - center) * (coef_radius / gap)
    resid = y - design @ coefs
    g0 = np.asarray(g0_coefs, dtype=float)
    return LsFit(coefs=coefs, emp_risk=float(resid @ resid / batch.n),
                 excess=float(np.sum((coefs - g0) ** 2)), projected=projected, ridged=ridged)


def step_function_eval(breaks: Sequence[float], levels: Sequence[float], x: np.ndarray) -> np.ndarray:
    """Right-continuous step function with ``levels[i]`` on
    ``[breaks[i], breaks[i+1])`` (breaks include 0 and 1)."""
    idx = np.searchsorted(np.asarray(breaks)[1:-1], x, side="right")
    return np.asarray(levels, dtype=float)[idx]


@dataclass
class IsotonicFit:
    x_sorted: np.ndarray
    fitted: np.ndarray
    emp_risk: float
    clip_gap: float
    tolerance: float
    excess: float


def fit_isotonic(batch: SampleBatch, g0_breaks: Sequence[float],
                 g0_levels: Sequence[float]) -> IsotonicFit:
    """Exact least-squares nondecreasing fit by pool-adjacent-violators on
    the x-sorted responses, clipped to [0, 1].

    The clipped fit is the reported approximate minimizer; its empirical
    risk gap against the unclipped solution is compared to the tolerance
    ``(log n)^{3/2} log log n / (2 n)`` admitted for approximate minimizers.
    The excess ``||g_tilde - g0||^2_{L2(uniform)}`` is an exact piecewise
    integral against the step target."""
    if batch.law != "regression-pair":
        raise DomainError("needs a regression-pair batch")
    x, y = batch.data["x"], batch.data["y"]
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    fit = pava(ys.astype(np.float64), np.ones_like(ys, dtype=np.float64))
    clipped = np.clip(fit, 0.0, 1.0)
    emp = float(np.mean((ys - clipped) ** 2))
    gap = emp - float(np.mean((ys - fit) ** 2))
    n = batch.n
    tol = clog(n) ** 1.5 * math.log(max(math.log(n), math.e)) / (2.0 * n)
    # exact L2(uniform) distance between the fitted step and the target step
    knots = np.unique(np.concatenate([[0.0, 1.0], xs, np.asarray(g0_breaks, dtype=float)]))
    mids = 0.5 * (knots[:-1] + knots[1:])
    ghat = _step_from_sorted(xs, clipped, mids)
    gtrue = step_function_eval(g0_breaks, g0_levels, mids)
    excess = float(np.sum((ghat - gtrue) ** 2 * np.diff(knots)))
    return IsotonicFit(x_sorted=xs, fitted=clipped, emp_risk=emp, clip_gap=gap,
                       tolerance=tol, excess=excess)


def _step_from_sorted(xs: np.ndarray, vals: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Piecewise-constant extension: vals[k] on [xs[k], xs[k+1]), clamped at
    the ends."""
    idx = np.clip(np.searchsorted(xs, points, side="right") - 1, 0, xs.size - 1)
    return vals[idx]


# ---------------------------------------------------------------------------
# margin classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginEta:
    """Exact-margin conditional law: ``eta = 1/2 + h`` on the Bayes set,
    ``1/2 - h`` off it.  ``kind``: half-lines ``[t0, 1]``, intervals
    ``[a0, b0]``, boxes ``[0, corner]`` (d = 2)."""

    kind: str
    h: float
    params: tuple

    def __call__(self, x):
        x = np.asarray(x)
        if self.kind == "half-lines":
            inside = x >= self.params[0]
        elif self.kind == "intervals":
            inside = (x >= self.params[0]) & (x <= self.params[1])
        elif self.kind == "boxes":
            inside = np.all(x <= np.asarray(self.params), axis=-1)
        else:
            raise DomainError(self.kind)
        return 0.5 + self.h * np.where(inside, 1.0, -1.0)


@dataclass
class MarginFit:
    fitted: tuple
    train_error: float
    excess: float


def fit_margin_classifier(batch: SampleBatch, eta: MarginEta) -> MarginFit:
    """Exact training-error minimization over the declared indicator class
    and the analytic excess risk ``2 h Pi(g_hat delta g_0)``."""
    if batch.law != "classification-pair":
        raise DomainError("needs a classification-pair batch")
    x, y = batch.data["x"], batch.data["y"]
    n = batch.n
    sgn = 2.0 * y - 1.0
    if eta.kind == "half-lines":
        order = np.argsort(x, kind="stable")
        s = sgn[order]
        xs = x[order]
        # err(t) = (#{y=1} - sum_{x_i >= t} s_i) / n over the cuts
        # {0} u {x_(j)} u {1}; ties prefer the domain boundary t = 0
        suffix = np.concatenate([np.cumsum(s[::-1])[::-1], [0.0]])
        k = int(np.argmax(suffix))
        if suffix[0] >= suffix[k] - 1e-12:
            k, t_hat = 0, 0.0
        else:
            t_hat = float(xs[k]) if k < n else 1.0
        err = (float(np.sum(y)) - suffix[k]) / n
        excess = 2.0 * eta.h * abs(t_hat - eta.params[0])
        return MarginFit((t_hat,), err, excess)
    if eta.kind == "intervals":
        order = np.argsort(x, kind="stable")
        s = sgn[order]
        xs = x[order]
        # maximum contiguous sum over sorted points (Kadane), empty allowed
        best, cur = 0.0, 0.0
        best_i = best_j = cur_i = 0
        bi, bj = 0, -1
        for j in range(n):
            if cur <= 0.0:
                cur = s[j]
                cur_i = j
            else:
                cur += s[j]
            if cur > best:
                best = cur
                bi, bj = cur_i, j
        if bj < bi:
            a_hat, b_hat = 0.0, 0.0
        else:
            # extending to a domain edge past the extreme enclosed samples
            # leaves the training error unchanged; prefer the extension
            a_hat = 0.0 if bi == 0 else float(xs[bi])
            b_hat = 1.0 if bj == n - 1 else float(xs[bj])
        err = (float(np.sum(y)) - best) / n
        a0, b0 = eta.params
        inter = max(0.0, min(b_hat, b0) - max(a_hat, a0))
        sym = (b_hat - a_hat) + (b0 - a0) - 2.0 * inter
        return MarginFit((a_hat, b_hat), err, 2.0 * eta.h * sym)
    if eta.kind == "boxes":
        if n > 400:
            raise DomainError("box classification enumeration is limited to n <= 400")
        xs = x
        cx = np.unique(np.concatenate([xs[:, 0], [1.0]]))
        cy = np.unique(np.concatenate([xs[:, 1], [1.0]]))
        best = 0.0
        corner = (0.0, 0.0)
        for a in cx:
            inside_a = xs[:, 0] <= a
            for b in cy:
                gain = float(np.sum(sgn[inside_a & (xs[:, 1] <= b)]))
                if gain > best:
                    best = gain
                    corner = (float(a), float(b))
        err = (float(np.sum(y)) - best) / n
        x0, y0 = eta.params
        inter = min(corner[0], x0) * min(corner[1], y0)
        sym = corner[0] * corner[1] + x0 * y0 - 2.0 * inter
        return MarginFit(corner, err, 2.0 * eta.h * sym)
    raise DomainError(eta.kind)


# ---------------------------------------------------------------------------
# empirical localized means for interval classification
# ---------------------------------------------------------------------------


def _w_candidates(xs_sorted: np.ndarray, sgn_sorted: np.ndarray, eta: MarginEta):
    """Candidate positions and values of ``W(s) = T_n(s) - T(s)`` where
    ``T_n(s) = sum_{x_i <= s}(2 y_i - 1)/n`` and ``T(s) = int_0^s (2 eta - 1)
    = 2h (2 len([0,s] within [a0,b0]) - s)``.

    W is linear between sample points and the kinks a0, b0, so its extremes
    over any interval sit on this candidate set (sample points carry both
    one-sided limits)."""
    a0, b0 = eta.params
    h = eta.h
    n = xs_sorted.size
    cums = np.concatenate([[0.0], np.cumsum(sgn_sorted)]) / n
    edge_pos = np.array([0.0, 1.0, a0, b0])
    edge_tn = cums[np.searchsorted(xs_sorted, edge_pos, side="right")]
    pos = np.concatenate([edge_pos, xs_sorted, xs_sorted])
    tn = np.concatenate([edge_tn, cums[1:], cums[:-1]])
    inside = np.clip(np.minimum(pos, b0) - a0, 0.0, None)
    t_true = 2.0 * h * (2.0 * inside - pos)
    return pos, tn - t_true


class _WindowMax:
    """Running max of values ordered by distance from a center: query(u) is
    the max over candidates within distance u (vectorized over u)."""

    def __init__(self, pos: np.ndarray, vals: np.ndarray, center: float):
        dist = np.abs(pos - center)
        order = np.argsort(dist, kind="stable")
        self.dist = dist[order]
        self.prefmax = np.concatenate([[-math.inf], np.maximum.accumulate(vals[order])])

    def query(self, u) -> np.ndarray:
        k = np.searchsorted(self.dist, u, side="right")
        return self.prefmax[k]


def _ball_span(pos, w, a0, b0, radius):
    """Exact range of ``W(b) - W(a)`` over ``|a - a0| + |b - b0| <= radius``
    (the overlap regime keeps a < b automatic).  The optimal split between
    the two windows happens at a candidate distance, so scanning candidates
    of one side against the prefix-max of the other is exhaustive."""
    maxw_a = _WindowMax(pos, w, a0)
    minw_a = _WindowMax(pos, -w, a0)
    maxw_b = _WindowMax(pos, w, b0)
    minw_b = _WindowMax(pos, -w, b0)
    db = np.abs(pos - b0)
    da = np.abs(pos - a0)
    rise = fall = -math.inf
    sb = db <= radius
    if np.any(sb):
        rem = radius - db[sb]
        rise = max(rise, float(np.max(w[sb] + minw_a.query(rem))))
        fall = max(fall, float(np.max(-w[sb] + maxw_a.query(rem))))
    sa = da <= radius
    if np.any(sa):
        rem = radius - da[sa]
        rise = max(rise, float(np.max(-w[sa] + maxw_b.query(rem))))
        fall = max(fall, float(np.max(w[sa] + minw_b.query(rem))))
    return max(rise, 0.0) + max(fall, 0.0)


def _full_span(pos, w):
    """Range of ``W(b) - W(a)`` over all a <= b (max rise plus max fall)."""
    order = np.argsort(pos, kind="stable")
    ws = w[order]
    run_min = np.minimum.accumulate(ws)
    rise = float(np.max(ws - run_min))
    run_max = np.maximum.accumulate(ws)
    fall = float(np.max(run_max - ws))
    return max(rise, 0.0) + max(fall, 0.0)


@dataclass
class ClassificationPsiTable:
    rhos: np.ndarray
    psi_hat: np.ndarray
    psi_se: np.ndarray
    psi_full_mean: float
    psi_full_se: float
    rho_overlap: float
    grid_ratio: float


def interval_classification_psi(eta: MarginEta, n: int, reps: int, seed: int,
                                rho_lo: float = 1e-5, grid_ratio: float = 1.15,
                                workers: int = 1) -> ClassificationPsiTable:
    """Monte Carlo estimates of the localized pair means
    ``psi_n(rho) = E sup_{f,g in F(rho)} |(P_n - P)(f - g)|`` for the
    interval classification problem with an exact-margin eta.

    Within the overlap regime (``rho < 2h len0``) the rho-minimal set is the
    l1 ball ``|a - a0| + |b - b0| <= rho/(2h)`` and the per-replicate sup is
    computed exactly from the W-process candidates; the full-class span
    bounds every larger rho."""
    if eta.kind != "intervals":
        raise DomainError("classification psi estimation supports intervals")
    a0, b0 = eta.params
    len0 = b0 - a0
    rho_ov = 2.0 * eta.h * len0 * 0.999
    rhos = []
    r = rho_lo
    while r < rho_ov:
        rhos.append(r)
        r *= grid_ratio
    rhos.append(rho_ov)
    rhos = np.asarray(rhos)

    def one_rep(rep: int):
        rng = stream(seed, rep)
        x = rng.random(n)
        y = (rng.random(n) < eta(x)).astype(np.int64)
        order = np.argsort(x, kind="stable")
        pos, w = _w_candidates(x[order], (2.0 * y - 1.0)[order], eta)
        maxw_a = _WindowMax(pos, w, a0)
        minw_a = _WindowMax(pos, -w, a0)
        maxw_b = _WindowMax(pos, w, b0)
        minw_b = _WindowMax(pos, -w, b0)
        da, db = np.abs(pos - a0), np.abs(pos - b0)
        spans = np.empty(rhos.size)
        for i, rho in enumerate(rhos):
            radius = rho / (2.0 * eta.h)
            rise = fall = -math.inf
            sb = db <= radius
            if np.any(sb):
                rem = radius - db[sb]
                rise = max(rise, float(np.max(w[sb] + minw_a.query(rem))))
                fall = max(fall, float(np.max(-w[sb] + maxw_a.query(rem))))
            sa = da <= radius
            if np.any(sa):
                rem = radius - da[sa]
                rise = max(rise, float(np.max(-w[sa] + maxw_b.query(rem))))
                fall = max(fall, float(np.max(w[sa] + minw_b.query(rem))))
            spans[i] = max(rise, 0.0) + max(fall, 0.0)
        return spans, _full_span(pos, w)

    rows = run_replicates(one_rep, reps, workers)
    spans = np.asarray([r[0] for r in rows])
    fulls = np.asarray([r[1] for r in rows])
    return ClassificationPsiTable(
        rhos=rhos,
        psi_hat=spans.mean(axis=0),
        psi_se=spans.std(axis=0, ddof=1) / math.sqrt(reps),
        psi_full_mean=float(fulls.mean()),
        psi_full_se=float(fulls.std(ddof=1) / math.sqrt(reps)),
        rho_overlap=rho_ov,
        grid_ratio=grid_ratio,
    )


def margin_classification_problem(eta: MarginEta, table: ClassificationPsiTable,
                                  mode: str = "explicit", se_margin: float = 3.0) -> ErmProblem:
    """ErmProblem for interval classification from estimated localized means.

    ``beta_fn(r) = sup_{rho >= r} psi(rho)/rho`` is built conservatively:
    grid values are inflated by ``se_margin`` standard errors and the grid
    ratio (psi is nondecreasing), small r fall back to
    ``psi(rho_min)/r``, and scales beyond the overlap regime use the
    full-class span.  ``Delta(r) = min(1/h, 1/r) v 1`` from the exact-margin
    diameter ``D^2(rho) <= min(rho/h, 1)``."""
    up = (table.psi_hat + se_margin * table.psi_se) * table.grid_ratio
    full_up = (table.psi_full_mean + se_margin * table.psi_full_se)
    ratios = up / table.rhos
    rhos = table.rhos

    def beta_fn(r: float) -> float:
        best = full_up / max(table.rho_overlap, r)
        sel = rhos >= r
        if np.any(sel):
            best = max(best, float(np.max(ratios[sel])))
        if r < rhos[0]:
            best = max(best, float(up[0]) / r)
        return best

    h = eta.h

    def delta_fn(r: float) -> float:
        return min(1.0 / h, 1.0 / r) if r > 0 else 1.0 / h

    return ErmProblem(kind="margin-classification", beta_fn=beta_fn, delta_fn=delta_fn, mode=mode)
