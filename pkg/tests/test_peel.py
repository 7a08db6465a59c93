import math

import numpy as np
import pytest

from ratioproc import peel
from ratioproc.numutil import log_of_logq


def test_gamma_inverse_values():
    assert peel.gamma_inverse(0.0) == 0.0
    assert peel.gamma_inverse(1.0) == pytest.approx(math.log(2.0), rel=1e-15)
    assert peel.gamma_inverse(2.0) == pytest.approx(2.0 * math.log(3.0), rel=1e-15)


def test_gamma_forced_values():
    assert peel.gamma(0.0) == 0.0
    assert peel.gamma(math.log(2.0)) == pytest.approx(1.0, rel=1e-12)
    assert peel.gamma(2.0 * math.log(3.0)) == pytest.approx(2.0, rel=1e-12)


def test_gamma_inversion_and_bounds_grid():
    xs = np.linspace(0.0, 1000.0, 250)[1:]
    for x in xs:
        assert abs(peel.gamma(peel.gamma_inverse(x)) - x) <= 1e-10 * x
        g = peel.gamma(x)
        assert g <= 2.0 * x / math.log1p(x) + 1e-9
        if x >= 2.0:
            assert g <= 2.0 * x / math.log(x) + 1e-9
        if x <= 2.0:
            assert g <= 2.0 * math.sqrt(x) + 1e-9


def test_gamma_subadditive():
    grid = np.linspace(0.0, 10.0, 40)
    gam = {x: peel.gamma(x) for x in grid}
    for x in grid:
        for y in grid:
            assert peel.gamma(x + y) <= gam[x] + gam[y] + 1e-9


def test_build_grid_examples():
    g = peel.build_grid(0.1, 0.4, 2.0)
    assert g.l == 2 and g.rho == pytest.approx((0.2, 0.4))
    g = peel.build_grid(0.1, 0.5, 2.0)
    assert g.l == 3 and g.hi[-1] == pytest.approx(0.5)
    assert g.rho[-1] == pytest.approx(0.8)
    g = peel.build_grid(0.01, 0.25, 2.0)  # 1/sqrt(n) at n = 1e4
    assert g.l == 5


def test_variance_proxy():
    assert peel.variance_proxy(0.0, 0.04, 0.2, "min") == pytest.approx(0.04)
    # the worked half-line slice admits vbar = 2 rho^2
    rho = 0.2
    assert peel.variance_proxy(rho * rho / 16.0, 10.0, rho, "min") == pytest.approx(2.0 * rho**2)
    assert peel.variance_proxy(0.0125, 10.0, 0.2, "psi-based") == pytest.approx(0.04 + 0.2)


def test_sj_strategies():
    grid = peel.build_grid(0.01, 0.5, 2.0)
    assert grid.l >= 5
    grid8 = peel.build_grid(1.0 / 2.0**9, 0.5, 2.0)
    assert grid8.l == 8
    sched = peel.sj_strategy(grid8, "constant-log-l", K=1.0, K_prime=3.0)
    assert all(v == pytest.approx(3.0 * math.log(8.0)) for v in sched.values)
    assert sched.tail_bound == pytest.approx(8.0 ** (1.0 - 3.0)) == pytest.approx(8.0**-2)
    assert sched.tail_sum <= sched.tail_bound + 1e-12
    sched = peel.sj_strategy(grid8, "geometric", K=1.0, s=4.0, alpha=2.0)
    qa = 4.0
    assert sched.tail_bound == pytest.approx(1.0 * qa / (qa - 1.0) / 4.0 * math.exp(-4.0 / qa))
    assert sched.tail_sum <= sched.tail_bound
    sched = peel.sj_strategy(grid8, "custom", custom=list(range(1, 9)))
    assert sched.values == tuple(float(v) for v in range(1, 9))
    with pytest.raises(ValueError):
        peel.sj_strategy(grid8, "custom", custom=[1.0])


def test_tau_radius_boundary_and_slices():
    grid = peel.build_grid(0.1, 0.2, 2.0)
    weight = peel.NormWeight("power", 1.0)
    n = 100
    vbar = 0.04
    s = 2.0 * n * vbar  # boundary -> Gaussian branch
    stats = [peel.SliceStats(psi=0.0, envelope_sq=vbar, vbar=vbar)]
    tau, regimes = peel.tau_radius(grid, weight, stats, [s], n)
    assert regimes == ["gaussian"]
    assert tau == pytest.approx(2.0 * math.sqrt(s * vbar / (n * weight(0.2) ** 2)))
    # worked half-line setup: vbar = 2 rho_j^2, phi = t, equal s_j: all
    # Gaussian contributions coincide at 2 sqrt(2 s / n)
    grid = peel.build_grid(0.05, 0.4, 2.0)
    s_j = [3.0] * grid.l
    stats = [peel.SliceStats(psi=0.0, envelope_sq=2 * hi * hi, vbar=2 * hi * hi) for hi in grid.hi]
    tau, regimes = peel.tau_radius(grid, weight, stats, s_j, 10**4)
    assert set(regimes) == {"gaussian"}
    assert tau == pytest.approx(2.0 * math.sqrt(2.0 * 3.0 / 10**4), rel=1e-12)
    # all-Poisson equal slices reduce to the single-slice formula
    stats = [peel.SliceStats(psi=0.0, envelope_sq=1e-8, vbar=1e-8) for _ in grid.hi]
    n = 10
    tau, regimes = peel.tau_radius(grid, weight, stats, [5.0] * grid.l, n)
    assert set(regimes) == {"poisson"}
    single = 2.0 * 5.0 / (n * weight(grid.hi[0]) * math.log(5.0 / (n * 1e-8)))
    assert tau == pytest.approx(max(single, 2.0 * 5.0 / (n * weight(grid.hi[-1]) * math.log(5.0 / (n * 1e-8)))))


def test_tau_radius_vbar_zero_poisson_is_zero():
    grid = peel.build_grid(0.1, 0.2, 2.0)
    stats = [peel.SliceStats(psi=0.0, envelope_sq=0.0, vbar=0.0)]
    tau, _ = peel.tau_radius(grid, peel.NormWeight("power", 1.0), stats, [5.0], 10)
    assert tau == 0.0


def test_tau_radius_nonincreasing_in_n_doubling():
    # doubling steps keep the within-Poisson log comparison monotone
    rng = np.random.default_rng(7)
    weight = peel.NormWeight("power", 1.0)
    for _ in range(20):
        grid = peel.build_grid(0.05, 0.4, 2.0)
        stats = [peel.SliceStats(psi=0.0, envelope_sq=v, vbar=v)
                 for v in rng.uniform(1e-6, 0.3, size=grid.l)]
        s_j = list(rng.uniform(0.5, 20.0, size=grid.l))
        n = int(rng.integers(2, 50))
        prev = math.inf
        for _ in range(8):
            tau, _ = peel.tau_radius(grid, weight, stats, s_j, n)
            assert tau <= prev + 1e-12
            prev = tau
            n *= 2


def test_certificate_radius_monotone_in_s_quadrupling():
    rng = np.random.default_rng(8)
    grid = peel.build_grid(0.05, 0.4, 2.0)
    weight = peel.NormWeight("power", 1.0)
    for _ in range(20):
        stats = [peel.SliceStats(psi=p, envelope_sq=v, vbar=v)
                 for p, v in zip(rng.uniform(0, 0.01, grid.l), rng.uniform(1e-4, 0.3, grid.l))]
        n = int(rng.integers(10, 1000))
        s = float(rng.uniform(0.1, 5.0))
        prev_rad, prev_prob = -1.0, math.inf
        for _ in range(6):
            rep = peel.concentration_certificate(grid, weight, stats, peel.BoundQuery(n=n, s=s))
            assert rep.radius >= prev_rad - 1e-12
            assert rep.prob_raw <= prev_prob + 1e-12
            prev_rad, prev_prob = rep.radius, rep.prob_raw
            s *= 4.0


def test_concentration_single_slice_reduction():
    grid = peel.build_grid(0.1, 0.2, 2.0)
    weight = peel.NormWeight("power", 1.0)
    n = 50
    rho = grid.hi[0]
    s = math.log(1.0 / 0.05)  # K e^{-s/K} = 0.05 at K = 1
    stats = [peel.SliceStats(psi=0.0, envelope_sq=rho**2, vbar=rho**2)]
    rep = peel.concentration_certificate(grid, weight, stats, peel.BoundQuery(n=n, s=s))
    assert rep.center == 0.0
    assert rep.prob_bound == pytest.approx(0.05, rel=1e-12)
    assert rep.radius == pytest.approx(2.0 * math.sqrt(s * rho**2 / (n * weight(rho) ** 2)))


def test_concentration_worked_loglog_prob_order():
    # s_j = K'' log log n with K'' = 6, K = 1: prob <= C (log n)^{-(K''/2-1)}
    weight = peel.NormWeight("power", 1.0)
    for n in (10**3, 10**4, 10**6):
        grid = peel.build_grid(1.0 / math.sqrt(n), 0.25, 2.0)
        s_val = 6.0 * math.log(math.log(n))
        stats = [peel.SliceStats(psi=0.0, envelope_sq=2 * hi**2, vbar=2 * hi**2) for hi in grid.hi]
        rep = peel.concentration_certificate(
            grid, weight, stats, peel.BoundQuery(n=n, s=[s_val] * grid.l))
        assert rep.prob_raw <= 2.0 * math.log(n) ** (-(6.0 / 2.0 - 1.0))


def test_concentration_trivial_subdivision_identity():
    grid = peel.build_grid(0.05, 0.4, 2.0)
    weight = peel.NormWeight("power", 1.0)
    stats = [peel.SliceStats(psi=0.001 * hi, envelope_sq=hi**2, vbar=hi**2) for hi in grid.hi]
    query = peel.BoundQuery(n=200, s=3.0)
    plain = peel.concentration_certificate(grid, weight, stats, query)
    sub = [[(st, 3.0)] for st in stats]
    subdivided = peel.concentration_certificate(grid, weight, stats, query, subdivided=sub)
    assert plain.radius == subdivided.radius
    assert plain.prob_raw == subdivided.prob_raw
    assert plain.center == subdivided.center


def test_single_layer_examples():
    weight = peel.NormWeight("power", 1.0)
    n, r = 100, 0.1
    s = 2.0 * n * r * r * 0.5
    rep = peel.single_layer_bound(weight, lambda rho: 0.0, 0.5, n, r, s,
                                  peel.CASE_PHI_OVER_T_INCREASING)
    assert rep.radius == pytest.approx(2.0 * math.sqrt(s / n), rel=1e-12)
    # quadratic weight with psi_tilde = c rho / sqrt(n): compare against an
    # independent recoding of the single-application display
    w2 = peel.NormWeight("power", 2.0)
    c = 0.3
    psi_t = lambda rho: c * rho / math.sqrt(n)
    rep = peel.single_layer_bound(w2, psi_t, 0.5, n, r, 4.0,
                                  peel.CASE_PHI_OVER_T_INCREASING, q=2.0, delta=1.0)
    l = int(math.floor(math.log(1.0 / r) / math.log(2.0) + 1e-12))
    rhos = [r * 2.0**j for j in range(l + 1)]
    c_sum = sum(w2(rho) ** (-0.5) for rho in rhos) * w2(r) ** 0.5
    vbar = r * r + 16.0 * c_sum * psi_t(r)
    s = 4.0
    want = (2.0 * s / (n * w2(r) * math.log(s / (n * vbar))) if s > 2 * n * vbar
            else 2.0 * math.sqrt(s * vbar / (n * w2(r) ** 2)))
    assert rep.radius == pytest.approx(want, rel=1e-12)
    with pytest.raises(peel.PremiseError):
        peel.single_layer_bound(w2, lambda rho: rho**3, 0.5, n, r, 4.0,
                                peel.CASE_PHI_OVER_T_INCREASING)
    with pytest.raises(peel.PremiseError):
        # phi(t)/t = t is increasing, so the decreasing case must refuse
        peel.single_layer_bound(w2, lambda rho: 0.0, 0.5, n, r, 4.0,
                                peel.CASE_PHI_OVER_T_DECREASING)


def test_ratio_t2_branches():
    n, r = 100, 0.1
    s = n * r * r
    upper, lower = peel.ratio_bound_t2(n, r, 0.5, 2.0, 0.0, s)
    assert upper.regime == "gaussian"
    assert upper.radius == pytest.approx(2.0 * (0.0 + 2.0))  # q (beta + 2)
    assert lower.radius == pytest.approx(-2.0) or lower.radius == 0.0  # clipped at 0
    upper, _ = peel.ratio_bound_t2(n, r, 0.5, 2.0, 0.0, 1e6)
    assert upper.regime == "poisson"
    assert upper.prob_bound <= 1.0


def test_ratio_t1_cases():
    n, r, delta, q = 10**4, 0.05, 0.5, 2.0
    s, t = 2.0, 3.0
    rep = peel.ratio_bound_t1(n, r, delta, q, 0.01, s, t)
    assert rep.constants_used["simplified"]
    want = 2.0 * math.sqrt(17.0) * math.sqrt((s + 2.0 * log_of_logq(q * delta / r, q)) / n)
    assert rep.radius == pytest.approx(want, rel=1e-12)
    assert rep.prob_raw == pytest.approx(2.0 * math.exp(-s), rel=1e-12)
    # l = 1 grid: c_q = log(1)/q = 0
    rep = peel.ratio_bound_t1(100, 0.3, 0.5, 2.0, 0.1, 1.0, 1.0)
    assert rep.constants_used["c_q"] == 0.0
    # beta > r dispatch adds the t-tail
    rep_b = peel.ratio_bound_t1(n, r, delta, q, 0.2, s, t)
    assert rep_b.regime.startswith("beta>r")
    assert rep_b.prob_raw > 2.0 * math.exp(-s)


def test_ratio_talpha_recoding_and_premise():
    n, r, delta, q, beta, s = 500, 0.1, 0.5, 2.0, 0.05, 2.0
    alpha = 1.5
    rep = peel.ratio_bound_talpha(n, r, delta, q, beta, s, alpha)
    # independent recoding of the alpha in (1,2) display
    vterm = max(r ** (2.0 - alpha), beta)
    pois = 10.0 * s / (n * r**alpha * math.log(max(s / (17.0 * n * r**alpha * vterm), 10.0)))
    gaus = 2.0 * math.sqrt(17.0) * math.sqrt(s * vterm / (n * r**alpha))
    prob = 1.0 / (q ** (2 * (alpha - 1)) - 1.0) / s * math.exp(-s)
    assert rep.radius == pytest.approx(max(pois, gaus), rel=1e-12)
    assert rep.prob_raw == pytest.approx(prob, rel=1e-12)
    # beta -> 0, s -> 0+: radius -> 0
    tiny = peel.ratio_bound_talpha(10**6, 0.2, 0.5, 2.0, 0.0, 1e-12, 1.5)
    assert tiny.radius <= 1e-5
    # alpha < 1 with a failing no-Poisson premise
    with pytest.raises(peel.PremiseError):
        peel.ratio_bound_talpha(10, 1e-4, 0.5, 2.0, 1e-8, 50.0, 0.5)


def test_c_q_alpha_dense_oracle():
    # sup of u log log_q(q^2 / u) over (0, q] against a 1e6-point scan
    q, delta, alpha = 2.0, 1.0, 0.5
    got = peel.c_q_alpha(q, delta, alpha)
    us = np.linspace(delta * q / 10**6, delta * q, 10**6)
    inner = np.maximum(np.log(q * q * delta / us) / math.log(q), 1.0)
    dense = float(np.max(us * np.maximum(np.log(inner), 0.0)))
    assert got >= dense - 1e-9
    assert got == pytest.approx(dense, rel=1e-5)


def test_tail_bounds_values():
    n, s2 = 10, 0.2
    tb = peel.tail_bounds("bousquet", n, s2, 6.0 * n * s2, 26.0 * n * s2)
    assert tb.value == pytest.approx((6.0 + 26.0 + 26.0 / 3.0) * n * s2, rel=1e-12)
    assert tb.value <= 41.0 * n * s2
    assert tb.prob == pytest.approx(math.exp(-26.0 * n * s2))
    assert peel.tail_bounds("bernstein", 5, 0.1, 0.0, 0.0).prob == 1.0


def test_bernstein_dominates_binomial():
    # n = 20 Bernoulli(1/2) cells: exact tail of the centered sum
    from math import comb

    n, p = 20, 0.5
    pmf = [comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)]
    for t in np.linspace(0.5, 9.5, 10):
        exact = sum(pr for k, pr in enumerate(pmf) if k - n * p >= t)
        bound = peel.tail_bounds("bernstein", n, p * (1 - p), 0.0, float(t)).prob
        assert exact <= bound + 1e-12


def test_alexander_precheck():
    ns = np.arange(10, 10**6, 5000, dtype=float)
    phi = lambda t: t
    rep = peel.alexander_precheck(np.sqrt(np.log(np.log(ns))), 1.0 / np.sqrt(ns),
                                  np.full_like(ns, 0.25), 1.0 / np.log(ns), phi, n_grid=ns)
    assert rep.passed
    rep = peel.alexander_precheck(ns**2, 1.0 / np.sqrt(ns), np.full_like(ns, 0.25),
                                  1.0 / np.log(ns), phi, n_grid=ns)
    assert not rep.conditions["c_n/n decreasing"]
    phi2 = lambda t: t * t
    rep = peel.alexander_precheck(np.ones_like(ns), 1.0 / np.sqrt(ns), np.full_like(ns, 0.25),
                                  1.0 / np.log(ns), phi2, n_grid=ns)
    assert not rep.conditions["inf c_n phi(t)/t > 0"]
