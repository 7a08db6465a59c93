"""Peeling-bound engine: grids, the gamma inverse, variance proxies,
deviation radii and the specialized power-weight ratio bounds.

Every certificate runs in one of two modes:

* ``shape``    -- the unknown universal constant K enters symbolically
  (default 1); radii/probabilities are for rate and shape comparison only.
* ``explicit`` -- one-sided certificates assembled from Bousquet's version of
  Talagrand's inequality, whose constants are fully numeric; these are the
  only certificates the exact-oracle domination tests accept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .numutil import bracketed_newton, cloglog, log_of_logq

SQRT17 = math.sqrt(17.0)


class PremiseError(ValueError):
    """A bound's premise fails on the supplied inputs; no certificate is emitted."""


# ---------------------------------------------------------------------------
# gamma machinery
# ---------------------------------------------------------------------------


def gamma_inverse(x: float) -> float:
    """``x log(1 + x)`` for x >= 0."""
    if x < 0.0:
        raise ValueError("gamma_inverse needs x >= 0")
    return x * math.log1p(x)


def gamma(x: float) -> float:
    """Inverse of ``y log(1 + y)`` on [0, inf), by safeguarded Newton.

    Satisfies ``gamma(x) <= 2x/log(1+x)`` (x >= 0), ``<= 2x/log x`` (x >= 2)
    and ``<= 2 sqrt(x)`` (x <= 2), and is subadditive.
    """
    if x < 0.0:
        raise ValueError("gamma needs x >= 0")
    if x == 0.0:
        return 0.0
    hi = max(2.0 * math.sqrt(x), 2.0 * x / math.log1p(x))
    return bracketed_newton(
        gamma_inverse,
        lambda y: math.log1p(y) + y / (1.0 + y),
        0.0,
        hi,
        x,
        rel_tol=1e-14,
    )


# ---------------------------------------------------------------------------
# grids and weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PeelingGrid:
    """Scale grid ``rho_j = r q^j``, j = 1..l, with the last slice clipped.

    ``hi[j]`` is the effective top of slice j+1: equal to ``rho[j]`` except
    for the last slice, which is clipped to ``delta``.  ``lo[j]`` is the
    slice bottom (``rho_{j-1}`` with ``rho_0 = r``).
    """

    r: float
    delta: float
    q: float
    rho: tuple
    hi: tuple
    lo: tuple
    l: int


def build_grid(r: float, delta: float, q: float) -> PeelingGrid:
    if not (0.0 < r < delta <= 1.0):
        raise ValueError("grid needs 0 < r < delta <= 1")
    if not (1.0 < q <= 2.0):
        raise ValueError("grid needs 1 < q <= 2")
    l = int(math.ceil(math.log(delta / r) / math.log(q) - 1e-12))
    l = max(l, 1)
    rho = tuple(r * q**j for j in range(1, l + 1))
    hi = tuple(min(x, delta) for x in rho)
    lo = tuple(r * q**j for j in range(l))
    return PeelingGrid(r=r, delta=delta, q=q, rho=rho, hi=hi, lo=lo, l=l)


_SLOW_REGISTRY = {"one": lambda u: 1.0, "loglog": cloglog}


@dataclass(frozen=True)
class NormWeight:
    """Weight ``phi(t) = t^alpha`` or ``t^alpha * L(1/t)^beta`` (L = loglog).

    ``alpha = 0`` with the plain power form is the unweighted sentinel used
    by the simulation sup operators; engine routines that require a strict
    weight reject it.
    """

    form: str = "power"
    alpha: float = 1.0
    slow_beta: float = 0.0

    def __post_init__(self):
        if self.form not in ("power", "power-slowvary"):
            raise ValueError(f"unknown weight form {self.form!r}")
        if self.alpha < 0.0:
            raise ValueError("weight exponent must be >= 0")
        if self.form == "power-slowvary" and self.alpha <= 0.0:
            raise ValueError("power-slowvary weight needs alpha > 0")

    @property
    def is_strict(self) -> bool:
        return self.alpha > 0.0

    def __call__(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        val = t**self.alpha
        if self.form == "power-slowvary" and self.slow_beta != 0.0:
            val *= cloglog(1.0 / t) ** self.slow_beta
        return val

    def of_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        val = np.power(t, self.alpha)  # 0**0 = 1, matching the unweighted sentinel
        if self.form == "power-slowvary" and self.slow_beta != 0.0:
            from .numutil import EE

            safe = np.maximum(t, 1e-300)
            ll = np.log(np.log(np.maximum(1.0 / safe, EE)))
            val = np.where(t > 0.0, val * ll**self.slow_beta, 0.0)
        return val

    def phi_q(self, grid: PeelingGrid) -> Callable[[float], float]:
        """Discretized step weight ``phi_q(u) = phi(hi_j)`` on slice j."""

        his = grid.hi

        def step(u: float) -> float:
            if u <= grid.lo[0] or u > his[-1]:
                raise ValueError("u outside the grid range")
            for lo_j, hi_j in zip(grid.lo, his):
                if lo_j < u <= hi_j:
                    return self(hi_j)
            return self(his[-1])

        return step


def unweighted() -> NormWeight:
    return NormWeight(form="power", alpha=0.0)


def _require_strict(weight: NormWeight):
    if not weight.is_strict:
        raise ValueError("this bound needs a strictly increasing weight (alpha > 0)")


# ---------------------------------------------------------------------------
# per-slice statistics and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SliceStats:
    """Inputs for one slice: expected sup ``psi``, squared envelope norm and
    the chosen variance proxy ``vbar`` (see :func:`variance_proxy`)."""

    psi: float
    envelope_sq: float
    vbar: float


def variance_proxy(psi: float, envelope_sq: float, rho: float, policy: str = "min") -> float:
    """Admissible ``vbar`` per the second-moment bracket:
    envelope -> ``P F_j^2``; psi-based -> ``rho^2 + 16 psi``; min -> the smaller."""
    if psi < 0.0 or envelope_sq < 0.0:
        raise ValueError("psi and envelope_sq must be nonnegative")
    if policy == "envelope":
        return envelope_sq
    if policy == "psi-based":
        return rho * rho + 16.0 * psi
    if policy == "min":
        return min(envelope_sq, rho * rho + 16.0 * psi)
    raise ValueError(f"unknown variance proxy policy {policy!r}")


@dataclass(frozen=True)
class BoundQuery:
    n: int
    s: object = 1.0  # scalar or per-slice sequence of tail parameters
    K: float = 1.0
    mode: str = "shape"  # "shape" | "explicit"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n >= 1 required")
        if self.mode not in ("shape", "explicit"):
            raise ValueError("mode must be 'shape' or 'explicit'")

    def s_list(self, l: int) -> list:
        if np.isscalar(self.s):
            if self.s <= 0:
                raise ValueError("tail parameter must be positive")
            return [float(self.s)] * l
        s = [float(v) for v in self.s]
        if len(s) != l or min(s) <= 0:
            raise ValueError("need one positive tail parameter per slice")
        return s


@dataclass
class BoundReport:
    radius: float
    prob_bound: float
    regime: str
    constants_used: dict = field(default_factory=dict)
    mode: str = "shape"
    one_sided: bool = False
    center: float = 0.0
    prob_raw: float = 0.0
    vacuous: bool = False

    @classmethod
    def make(cls, radius, prob, regime, constants, mode, one_sided=False, center=0.0):
        return cls(
            radius=max(radius, 0.0),
            prob_bound=min(prob, 1.0),
            regime=regime,
            constants_used=constants,
            mode=mode,
            one_sided=one_sided,
            center=center,
            prob_raw=prob,
            vacuous=prob >= 1.0,
        )


# ---------------------------------------------------------------------------
# s_j strategies (Remark 2.4)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SjSchedule:
    values: tuple
    tail_sum: float  # sum_j exp(-s_j / K), computed on the actual grid
    tail_bound: Optional[float]  # closed-form bound where one is attached
    strategy: str


def sj_strategy(grid: PeelingGrid, strategy: str, *, K: float = 1.0, K_prime: float = 3.0,
                s: float = 1.0, alpha: float = 1.0, s_n: float = 1.0,
                custom: Optional[Sequence[float]] = None) -> SjSchedule:
    """Build a tail-parameter schedule with its attached probability bound.

    ``constant-log-l``: ``s_j = K' log l`` with tail sum <= l^{1-K'/K};
    ``geometric``: ``s_j = s q^{alpha j}`` with the integral-comparison bound
    ``K (q^a/(q^a - 1)) (1/s) e^{-s/(K q^a)}``;
    ``loglog-shift``: ``s_j = s_n + K log log_q(q delta / rho_j)``;
    ``custom``: passthrough.
    """
    if grid.l < 1:
        raise ValueError("empty grid")
    q, l = grid.q, grid.l
    if strategy == "constant-log-l":
        if K_prime <= 0:
            raise ValueError("K' must be positive")
        val = K_prime * math.log(max(l, 2))
        values = tuple([val] * l)
        bound = l ** (1.0 - K_prime / K)
    elif strategy == "geometric":
        if s <= 0 or alpha <= 0:
            raise ValueError("geometric strategy needs positive s and alpha")
        values = tuple(s * q ** (alpha * j) for j in range(1, l + 1))
        qa = q**alpha
        bound = K * (qa / (qa - 1.0)) / s * math.exp(-s / (K * qa))
    elif strategy == "loglog-shift":
        if s_n <= 0:
            raise ValueError("loglog-shift needs s_n > 0")
        values = tuple(s_n + K * log_of_logq(q * grid.delta / rho, q) for rho in grid.hi)
        bound = None
    elif strategy == "custom":
        if custom is None or len(custom) != l or min(custom) <= 0:
            raise ValueError("custom strategy needs one positive s_j per slice")
        values = tuple(float(v) for v in custom)
        bound = None
    else:
        raise ValueError(f"unknown s_j strategy {strategy!r}")
    tail_sum = float(sum(math.exp(-v / K) for v in values))
    return SjSchedule(values=values, tail_sum=tail_sum, tail_bound=bound, strategy=strategy)


# ---------------------------------------------------------------------------
# the deviation radius of the sliced bound
# ---------------------------------------------------------------------------


def _slice_radius(s_j: float, vbar: float, phi_val: float, n: int) -> tuple[float, str]:
    """One slice's contribution: Poisson branch if ``s_j > 2 n vbar`` else
    Gaussian; ``vbar = 0`` puts the Poisson radius at 0 (no mass to deviate)."""
    if s_j > 2.0 * n * vbar:
        if vbar == 0.0:
            return 0.0, "poisson"
        arg = s_j / (n * vbar)
        assert arg > 2.0
        return 2.0 * s_j / (n * phi_val * math.log(arg)), "poisson"
    return 2.0 * math.sqrt(s_j * vbar / (n * phi_val * phi_val)), "gaussian"


def tau_radius(grid: PeelingGrid, weight: NormWeight, stats: Sequence[SliceStats],
               s_list: Sequence[float], n: int) -> tuple[float, list]:
    """``tau_{n,q,phi}``: max over slices of the per-slice concentration
    radius, with the boundary ``s_j = 2 n vbar`` assigned to the Gaussian
    branch.  Returns (radius, per-slice regimes)."""
    _require_strict(weight)
    if len(stats) != grid.l or len(s_list) != grid.l:
        raise ValueError("need one SliceStats and one s_j per slice")
    if min(s_list) <= 0:
        raise ValueError("tail parameters must be positive")
    best = 0.0
    regimes = []
    for st, s_j, hi in zip(stats, s_list, grid.hi):
        rad, reg = _slice_radius(s_j, st.vbar, weight(hi), n)
        regimes.append(reg)
        best = max(best, rad)
    return best, regimes


def _bousquet_dev(n: int, sigma_sq: float, psi: float, t: float) -> float:
    """One-sided deviation of the slice sup above its mean, ``P_n - P`` scale:
    ``sqrt(2 t (n sigma^2 + 2 n psi)) / n + t / (3 n)``."""
    return math.sqrt(2.0 * t * (n * sigma_sq + 2.0 * n * psi)) / n + t / (3.0 * n)


def beta_from_stats(grid: PeelingGrid, weight: NormWeight, stats: Sequence[SliceStats]) -> float:
    _require_strict(weight)
    return max(st.psi / weight(hi) for st, hi in zip(stats, grid.hi))


def concentration_certificate(grid: PeelingGrid, weight: NormWeight,
                              stats: Sequence[SliceStats], query: BoundQuery,
                              subdivided: Optional[Sequence] = None) -> BoundReport:
    """Concentration of the discretized weighted sup around ``beta``.

    shape mode: two-sided radius ``tau_{n,q,phi}`` with failure probability
    ``K sum_j exp(-s_j/K)`` (double sum for the subdivided form).

    explicit mode: one-sided (upper) certificate built from per-slice
    Bousquet tails with the slice variance ``hi_j^2`` (valid for every
    declared scale convention since ``sigma_P f >= sd``), failure
    probability ``sum exp(-s_j)``.

    ``subdivided`` optionally refines slice j into ``N_j`` pieces: a list
    (length l) of lists of ``(SliceStats, s_{j,k})`` pairs.  The trivial
    subdivision reproduces the plain certificate exactly.
    """
    n, K = query.n, query.K
    if subdivided is None:
        pieces = [[(st, s_j)] for st, s_j in zip(stats, query.s_list(grid.l))]
    else:
        if len(subdivided) != grid.l:
            raise ValueError("need a subdivision entry per slice")
        pieces = [list(entry) for entry in subdivided]
    beta = max(st.psi / weight(hi) for entry, hi in zip(pieces, grid.hi) for st, _ in entry)
    if query.mode == "shape":
        radius = 0.0
        regimes = []
        tail = 0.0
        for entry, hi in zip(pieces, grid.hi):
            for st, s_jk in entry:
                rad, reg = _slice_radius(s_jk, st.vbar, weight(hi), n)
                radius = max(radius, rad)
                regimes.append(reg)
                tail += math.exp(-s_jk / K)
        prob = K * tail
        return BoundReport.make(
            radius, prob, "+".join(sorted(set(regimes))),
            {"K": K, "slices": grid.l, "subdivided": subdivided is not None},
            "shape", one_sided=False, center=beta,
        )
    radius = 0.0
    prob = 0.0
    for entry, hi in zip(pieces, grid.hi):
        for st, t_jk in entry:
            dev = _bousquet_dev(n, hi * hi, st.psi, t_jk)
            radius = max(radius, dev / weight(hi))
            prob += math.exp(-t_jk)
    return BoundReport.make(
        radius, prob, "bousquet",
        {"sigma_sq": "hi_j^2", "slices": grid.l},
        "explicit", one_sided=True, center=beta,
    )


# ---------------------------------------------------------------------------
# single-application bound (Remark 2.6)
# ---------------------------------------------------------------------------

CASE_PHI_OVER_T_DECREASING = "phi-over-t-decreasing"
CASE_PHI_OVER_T_INCREASING = "phi-over-t-increasing"


def single_layer_bound(weight: NormWeight, psi_tilde: Callable[[float], float],
                       lam: float, n: int, r: float, s: float, case: str,
                       q: float = 2.0, delta: float = 1.0, K: float = 1.0) -> BoundReport:
    """One-shot concentration bound that applies the tail inequality once.

    Premises, checked numerically on the grid ``rho_j = r q^j <= delta``:
    ``psi_tilde(rho)/phi(rho)^lam`` nonincreasing, and the declared
    monotonicity of ``t / phi(t)``; ``phi-over-t-increasing`` selects the
    ``t/phi`` nonincreasing variance proxy ``r^2 + 16 c psi_tilde(r)``,
    ``phi-over-t-decreasing`` the proxy ``c_phi phi(r)^2 + 16 c psi_tilde(r)``.
    """
    _require_strict(weight)
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    if not 0.0 < r <= delta:
        raise ValueError("need 0 < r <= delta")
    l = int(math.floor(math.log(delta / r) / math.log(q) + 1e-12))
    rhos = [r * q**j for j in range(l + 1)]
    ratios = [psi_tilde(rho) / weight(rho) ** lam for rho in rhos]
    if any(a < b - 1e-12 for a, b in zip(ratios, ratios[1:])):
        raise PremiseError("psi_tilde/phi^lambda is not nonincreasing on the grid")
    over_t = [weight(rho) / rho for rho in rhos]
    if case == CASE_PHI_OVER_T_INCREASING:
        if any(a > b + 1e-12 for a, b in zip(over_t, over_t[1:])):
            raise PremiseError("phi(t)/t is not nondecreasing on the grid")
    elif case == CASE_PHI_OVER_T_DECREASING:
        if any(a < b - 1e-12 for a, b in zip(over_t, over_t[1:])):
            raise PremiseError("phi(t)/t is not nonincreasing on the grid")
    else:
        raise ValueError(f"unknown case {case!r}")
    c_sum = sum(weight(rho) ** (lam - 1.0) for rho in rhos) * weight(r) ** (1.0 - lam)
    if case == CASE_PHI_OVER_T_INCREASING:
        vbar = r * r + 16.0 * c_sum * psi_tilde(r)
    else:
        c_phi = max((rho / weight(rho)) ** 2 for rho in rhos)
        vbar = c_phi * weight(r) ** 2 + 16.0 * c_sum * psi_tilde(r)
    rad, regime = _slice_radius(s, vbar, weight(r), n)
    prob = K * math.exp(-s / K)
    return BoundReport.make(
        rad, prob, regime,
        {"c_q_lambda_phi": c_sum, "vbar": vbar, "K": K, "grid_size": l + 1},
        "shape", one_sided=False,
    )


# ---------------------------------------------------------------------------
# specialized ratio bounds: phi(t) = t^2, t, t^alpha
# ---------------------------------------------------------------------------


def ratio_bound_t2(n: int, r: float, delta: float, q: float, beta: float, s: float,
                   mode: str = "shape", K: float = 1.0) -> tuple[BoundReport, Optional[BoundReport]]:
    """Two-sided pair of certificates for ``sup |P_n f / P f - 1|`` over
    ``r^2 < Pf <= delta`` (sqrt-mean convention).

    shape mode follows the t^2-weight display verbatim: deviation radius
    ``2 sqrt((s/(n r^2))(1 + 16 beta))`` in the Gaussian regime
    (``s <= 2 n r^2 (1+16 beta)``), else the Poisson form, and tail
    ``K^2 (q^2-1)^{-1} s^{-1} e^{-s/K}``; the upper certificate carries the
    paper's factor q on the threshold.

    explicit mode rebuilds the upper bound slice by slice with Bousquet
    tails and ``s_j = s q^{2j}``; the threshold carries the step factor q^2
    of the discretized weight (no explicit lower bound is available).
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if mode == "shape":
        m = 1.0 + 16.0 * beta
        cond = s / (n * r * r * m)
        if cond > 2.0:
            radius = 2.0 * s / (n * r * r * math.log(cond))
            regime = "poisson"
        else:
            radius = 2.0 * math.sqrt(s / (n * r * r) * m)
            regime = "gaussian"
        prob = K * K / (q * q - 1.0) / s * math.exp(-s / K)
        consts = {"K": K, "q": q, "branch_condition": cond}
        upper = BoundReport.make(q * (beta + radius), prob, regime, consts, "shape",
                                 one_sided=True, center=0.0)
        lower = BoundReport.make(beta - radius, prob, regime, consts, "shape",
                                 one_sided=True, center=0.0)
        return upper, lower
    grid = build_grid(r, delta, q)
    radius = 0.0
    prob = 0.0
    for j, hi in enumerate(grid.hi, start=1):
        t_j = s * q ** (2 * j)
        psi_j = beta * hi * hi
        dev = _bousquet_dev(n, hi * hi, psi_j, t_j)
        radius = max(radius, dev / (hi * hi))
        prob += math.exp(-t_j)
    upper = BoundReport.make(
        q * q * (beta + radius), prob, "bousquet",
        {"q": q, "slices": grid.l, "s_j": "s*q^(2j)"},
        "explicit", one_sided=True, center=0.0,
    )
    return upper, None


def ratio_bound_t1(n: int, r: float, delta: float, q: float, beta: float,
                   s: float, t: float, K: float = 1.0) -> BoundReport:
    """Concentration of the t-weighted (standard-deviation normalized) sup
    around beta, with the two-regime dispatch on ``beta <= r`` and the
    simplified radii when the Poisson term can be deleted."""
    if s <= 0 or t <= 0:
        raise ValueError("s and t must be positive")
    grid = build_grid(r, delta, q)
    l = grid.l
    c_q = max(math.log(j) / q**j for j in range(1, l + 1))
    ll = log_of_logq(q * delta / r, q)
    shift = s + 2.0 * K * ll
    second = 2.0 * SQRT17 * math.sqrt(shift / n)
    log_arg = max((5.0 * s / q + 10.0 * c_q * K) / (17.0 * n * r * r), 10.0)
    first = 10.0 * math.sqrt(s / q + 2.0 * c_q * K) * math.sqrt(shift) / (n * r * math.log(log_arg))
    b_n = max(first, second)
    simplified = max(r, beta) >= math.sqrt(shift / (34.0 * n))
    consts = {"c_q": c_q, "B_n": b_n, "K": K, "loglog_term": ll, "simplified": simplified}
    if beta <= r:
        radius = second if simplified else b_n
        prob = 2.0 * K * math.exp(-s)
        regime = "beta<=r" + ("/simplified" if simplified else "")
        return BoundReport.make(radius, prob, regime, consts, "shape", center=beta)
    poisson = 2.0 * t / (n * r * math.log(max(t / (17.0 * n * r * beta), 2.0)))
    gauss = 2.0 * SQRT17 * math.sqrt(t * beta / (n * r))
    base = second if simplified else b_n
    radius = max(poisson, gauss, base)
    prob = K * K / (q - 1.0) / t * math.exp(-t / K) + 2.0 * K * math.exp(-s)
    regime = "beta>r" + ("/simplified" if simplified else "")
    return BoundReport.make(radius, prob, regime, consts, "shape", center=beta)


def c_q_alpha(q: float, delta: float, alpha: float, grid_size: int = 200_000) -> float:
    """``sup_{0 < u <= delta q} u^{2(1-alpha)} log log_q(q^2 delta / u)`` by
    dense grid plus golden-section refinement around the grid argmax."""
    us = np.linspace(delta * q / grid_size, delta * q, grid_size)
    vals = us ** (2.0 * (1.0 - alpha)) * np.array([log_of_logq(q * q * delta / u, q) for u in us])
    k = int(np.argmax(vals))
    lo = us[max(k - 1, 0)]
    hi = us[min(k + 1, grid_size - 1)]
    f = lambda u: u ** (2.0 * (1.0 - alpha)) * log_of_logq(q * q * delta / u, q)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(80):
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        else:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
    return max(float(vals[k]), fc, fd)


def ratio_bound_talpha(n: int, r: float, delta: float, q: float, beta: float,
                       s: float, alpha: float, t: Optional[float] = None,
                       K: float = 1.0) -> BoundReport:
    """Power-weight bounds for ``phi(t) = t^alpha`` with ``alpha`` in
    (0,1) or (1,2).  For ``alpha < 1`` the no-Poisson premise is checked
    numerically and its failure raises :class:`PremiseError`."""
    if s <= 0:
        raise ValueError("s must be positive")
    if t is None:
        t = s
    if 1.0 < alpha < 2.0:
        vterm = max(r ** (2.0 - alpha), beta)
        log_arg = max(s / (17.0 * n * r**alpha * vterm), 10.0) if vterm > 0 else 10.0
        poisson = 10.0 * s / (n * r**alpha * math.log(log_arg))
        gauss = 2.0 * SQRT17 * math.sqrt(s * vterm / (n * r**alpha))
        tau_exp = 2.0 * (alpha - 1.0)
        prob = K * K / (q**tau_exp - 1.0) / s * math.exp(-s / K)
        return BoundReport.make(
            max(poisson, gauss), prob, "alpha in (1,2)",
            {"vterm": vterm, "tau": tau_exp, "K": K}, "shape", center=beta,
        )
    if 0.0 < alpha < 1.0:
        ll = log_of_logq(q * q * delta / r, q)
        if max(r, beta ** (1.0 / (2.0 - alpha))) < math.sqrt((s + 2.0 * K * ll) / n):
            raise PremiseError("no-Poisson premise fails for alpha < 1")
        cqa = c_q_alpha(q, delta, alpha)
        base = 2.0 * SQRT17 * math.sqrt((s * delta ** (2.0 * (1.0 - alpha)) + 2.0 * K * cqa) / n)
        consts = {"c_q_alpha": cqa, "K": K}
        if beta <= r ** (2.0 - alpha):
            prob = 2.0 * K * math.exp(-s)
            return BoundReport.make(base, prob, "beta<=r^(2-alpha)", consts, "shape", center=beta)
        poisson = 2.0 * t / (n * r**alpha * math.log(max(t / (17.0 * n * r**alpha * beta), 2.0)))
        gauss = 2.0 * SQRT17 * math.sqrt(t * beta / (n * r**alpha))
        prob = K * K / (q**alpha - 1.0) / t * math.exp(-t / K) + 2.0 * K * math.exp(-s)
        return BoundReport.make(
            max(base, poisson, gauss), prob, "beta>r^(2-alpha)", consts, "shape", center=beta,
        )
    raise ValueError("alpha must lie in (0,1) or (1,2)")


# ---------------------------------------------------------------------------
# elementary tail inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailBound:
    kind: str
    value: float  # bernstein: the queried deviation; bousquet: the threshold
    prob: float


def tail_bounds(kind: str, n: int, sigma_sq: float, expectation_term: float, t: float) -> TailBound:
    """Bernstein / Bousquet one-sided tails for sums of centered variables
    bounded by 1.

    bernstein: ``Pr{sum >= t} <= exp(-t^2 / (2 (n sigma^2 + t/3)))``.
    bousquet:  ``Pr{Z >= E + sqrt(2 t (2E + n sigma^2)) + t/3} <= e^{-t}``
    with ``E = expectation_term`` (sum scale).
    """
    if min(n, 1) < 1 or sigma_sq < 0 or expectation_term < 0 or t < 0:
        raise ValueError("inputs must be nonnegative (n >= 1)")
    if kind == "bernstein":
        if t == 0.0:
            return TailBound("bernstein", 0.0, 1.0)
        prob = math.exp(-t * t / (2.0 * (n * sigma_sq + t / 3.0)))
        return TailBound("bernstein", t, min(prob, 1.0))
    if kind == "bousquet":
        thr = expectation_term + math.sqrt(2.0 * t * (2.0 * expectation_term + n * sigma_sq)) + t / 3.0
        return TailBound("bousquet", thr, min(math.exp(-t), 1.0))
    raise ValueError(f"unknown tail kind {kind!r}")


# ---------------------------------------------------------------------------
# almost-sure premise checker
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PremiseReport:
    conditions: dict
    passed: bool


def alexander_precheck(c_n, r_n, delta_n, u_n, phi: Callable[[float], float],
                       n_grid=None, inf_slope_tol: float = 0.05) -> PremiseReport:
    """Check the monotonicity premises of the infinitely-often lemma on an
    index grid, plus positivity of ``inf c_n phi(t)/t`` over ``[r_n, delta_n]``.

    Positivity is operationalized as: the grid infimum is positive and the
    per-n infimum does not trend to zero (log-log slope >= -inf_slope_tol).
    """
    c_n = np.asarray(c_n, dtype=float)
    r_n = np.asarray(r_n, dtype=float)
    delta_n = np.asarray(delta_n, dtype=float)
    u_n = np.asarray(u_n, dtype=float)
    m = len(c_n)
    if n_grid is None:
        n_grid = np.arange(1, m + 1, dtype=float)
    n_grid = np.asarray(n_grid, dtype=float)

    def noninc(x):
        return bool(np.all(np.diff(x) <= 1e-12))

    def nondec(x):
        return bool(np.all(np.diff(x) >= -1e-12))

    conds = {}
    conds["c_n/n decreasing"] = noninc(c_n / n_grid)
    conds["r_n decreasing"] = noninc(r_n)
    conds["sqrt(n) delta_n increasing"] = nondec(np.sqrt(n_grid) * delta_n)
    conds["u_n decreasing"] = noninc(u_n)
    infs = np.empty(m)
    for i in range(m):
        ts = np.geomspace(max(r_n[i], 1e-300), max(delta_n[i], r_n[i] * (1 + 1e-12)), 64)
        infs[i] = c_n[i] * min(phi(t) / t for t in ts)
    positive = bool(np.min(infs) > 0.0)
    if positive and m >= 2:
        slope = np.polyfit(np.log(n_grid), np.log(infs), 1)[0]
        positive = slope >= -inf_slope_tol
    conds["inf c_n phi(t)/t > 0"] = positive
    return PremiseReport(conditions=conds, passed=all(conds.values()))
