import math

import numpy as np
import pytest

from ratioproc import classes as C
from ratioproc.numutil import adaptive_simpson, log_of_logq


def test_sigma_halfline():
    assert C.sigma_of(C.half_line(), 0.25) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(C.DomainError):
        C.sigma_of(C.half_line(), 0.6)


def test_sigma_coordc0_at_log_one():
    # evaluated at j = e where log j = 1: Pf = e^-2, sigma = 1/e
    assert C.sigma_of(C.coord_c0(), math.e) == pytest.approx(1.0 / math.e, rel=1e-12)


def test_sigma_finitedict_constant_variance_zero():
    fc = C.finite_dict([(0.5, 0.5)], (0.3, 0.7), sigma_convention=C.SQRT_VARIANCE)
    assert C.sigma_of(fc, 0) == pytest.approx(0.0, abs=1e-12)


def test_monotone_envelope_ball_values():
    fc = C.monotone_unit()
    assert C.slice_envelope_norm(fc, C.Slice(0.0, 1.0)) ** 2 == pytest.approx(1.0, abs=1e-8)
    delta = math.exp(-0.5)
    want = delta * delta * math.log(math.e / delta**2)  # = 2/e
    assert C.slice_envelope_norm(fc, C.Slice(0.0, delta)) ** 2 == pytest.approx(want, abs=1e-8)
    assert want == pytest.approx(2.0 * math.exp(-1.0), rel=1e-12)


def test_monotone_quadrature_matches_closed_form():
    fc = C.monotone_unit()
    for delta in np.linspace(0.05, 1.0, 20):
        got = C.slice_envelope_norm(fc, C.Slice(0.0, float(delta))) ** 2
        want = delta**2 * math.log(math.e / delta**2)
        assert abs(got - want) <= 1e-6


def test_halfline_slice_envelope_is_hi():
    fc = C.half_line()
    for u in (0.1, 0.3, 0.6):
        assert C.slice_envelope_norm(fc, C.Slice(u / 2.0, u)) == pytest.approx(u, abs=1e-15)
    with pytest.raises(C.EmptySliceError):
        C.slice_envelope_norm(fc, C.Slice(0.8, 0.9))


def test_box_volume_cdf_exact():
    # d = 2: P{U1 U2 <= c} = c (1 + log(1/c)); cross-check by quadrature
    for c in (0.05, 0.2, 0.45):
        want = c * (1.0 + math.log(1.0 / c))
        assert C.product_volume_cdf(c, 2) == pytest.approx(want, rel=1e-12)
        quad = c + adaptive_simpson(lambda u: min(c / u, 1.0), c, 1.0, tol=1e-10)
        assert C.product_volume_cdf(c, 2) == pytest.approx(quad, abs=1e-8)
    quad3 = adaptive_simpson(lambda u: C.product_volume_cdf(0.3 / u, 2), 0.3, 1.0, tol=1e-10) + 0.3
    assert C.product_volume_cdf(0.3, 3) == pytest.approx(quad3, abs=1e-7)


def test_envelope_monotone_in_hi():
    rng = np.random.default_rng(5)
    for fc in (C.half_line(), C.box_cdf(2), C.intervals(), C.monotone_unit(), C.coord_c0()):
        for _ in range(50):
            t1, t2 = np.sort(rng.uniform(0.05, 0.69 if fc.kind in ("halfline", "boxcdf") else 0.95,
                                         size=2))
            if t2 - t1 < 1e-3:
                continue
            n1 = C.slice_envelope_norm(fc, C.Slice(0.0, float(t1)))
            n2 = C.slice_envelope_norm(fc, C.Slice(0.0, float(t2)))
            assert n1 <= n2 + 1e-9


def test_capacity_halfline_constant():
    fc = C.half_line()
    vals = [C.capacity(fc, t, 2.0, math.e, 2.0) for t in np.linspace(0.05, 0.7, 30)]
    assert all(v == pytest.approx(math.e**2, rel=1e-12) for v in vals)


def test_capacity_box_log_shape():
    # g^{2/(d^2-1)} tracks log(1/t) within 10% across a 4-fold scale drop
    fc = C.box_cdf(2)
    t = 1e-6
    g1 = C.capacity(fc, t, 2.0, math.e, 3.0) ** (2.0 / 3.0)
    g2 = C.capacity(fc, t / 4.0, 2.0, math.e, 3.0) ** (2.0 / 3.0)
    want = math.log(4.0 / t) / math.log(1.0 / t)
    assert g2 / g1 == pytest.approx(want, rel=0.10)


def test_capacity_monotone_matches_envelope():
    fc = C.monotone_unit()
    got = C.capacity(fc, 1.0, 2.0, math.e, 1.0)
    norm = C.slice_envelope_norm(fc, C.Slice(0.5, 1.0))
    assert got == pytest.approx(math.e * norm, rel=1e-10)
    assert norm == pytest.approx(1.0, abs=1e-7)  # envelope min(1/sqrt(1-x), 1) == 1


def test_local_capacity_halfline():
    fc = C.half_line()
    assert C.local_capacity_tau(fc, 0.3, 0.05) == pytest.approx(2.0, rel=1e-9)


def _union_mass(segments):
    segs = sorted((lo, hi) for lo, hi in segments if hi > lo)
    mass = 0.0
    cur_lo, cur_hi = None, None
    for lo, hi in segs:
        if cur_lo is None:
            cur_lo, cur_hi = lo, hi
        elif lo > cur_hi:
            mass += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_lo is not None:
        mass += cur_hi - cur_lo
    return mass


def _tau_bruteforce_intervals(center, delta, ends_n=4001):
    """Union of C delta C0 over a dense endpoint grid.  In the overlap
    regime (delta < len0), the symmetric difference of a feasible pair is
    the two edge bands, so accumulating interval unions is exact on the
    endpoint grid."""
    a0, b0 = center
    ends = np.linspace(0.0, 1.0, ends_n)
    segments = []
    for a in ends:
        bs = ends[ends >= a]
        inter = np.clip(np.minimum(bs, b0) - max(a, a0), 0.0, None)
        sym = (bs - a) + (b0 - a0) - 2.0 * inter
        feas = bs[sym <= delta + 1e-12]
        if feas.size == 0:
            continue
        segments.append((min(a, a0), max(a, a0)))
        segments.append((min(float(feas.min()), b0), max(float(feas.max()), b0)))
    return _union_mass(segments) / delta


def test_local_capacity_intervals_vs_bruteforce():
    fc = C.intervals()
    # the worked instance: union of symmetric differences has mass 4*delta
    got = C.local_capacity_tau(fc, (0.2, 0.6), 0.1)
    brute = _tau_bruteforce_intervals((0.2, 0.6), 0.1)
    assert got == pytest.approx(4.0, rel=1e-9)
    assert got == pytest.approx(brute, abs=4.5 * (1.0 / 4000) / 0.1)
    rng = np.random.default_rng(11)
    for _ in range(20):
        a0 = rng.uniform(0.1, 0.5)
        b0 = a0 + rng.uniform(0.15, 0.4)
        delta = rng.uniform(0.02, 0.12)
        got = C.local_capacity_tau_raw(fc, (a0, min(b0, 1.0)), delta)
        brute = _tau_bruteforce_intervals((a0, min(b0, 1.0)), delta)
        # grid quantization loses up to one endpoint cell per band edge
        # (four edges), always on the low side
        assert brute <= got + 1e-12
        assert got == pytest.approx(brute, abs=4.5 * (1.0 / 4000) / delta)


def test_local_capacity_full_union_small():
    fc = C.intervals()
    assert C.local_capacity_tau(fc, (0.2, 0.6), 1.2) <= 1.0


def test_local_capacity_box_vs_bruteforce():
    rng = np.random.default_rng(3)
    for d in (2, 3):
        fc = C.box_cdf(d)
        for _ in range(4):
            x0 = rng.uniform(0.35, 0.7, size=d)
            x0 = x0 * (0.5 / max(np.prod(x0), 0.5)) ** (1.0 / d)
            delta = rng.uniform(0.02, 0.08)
            got = C.local_capacity_tau_raw(fc, x0, delta)
            pts = rng.random((200_000, d))
            v0 = np.prod(x0)
            vol_max = np.prod(np.maximum(x0[None, :], pts), axis=1)
            outside = vol_max <= v0 + delta + 1e-12
            inside_pt = np.all(pts <= x0[None, :], axis=1)
            co = np.array([np.prod(np.delete(x0, i)) for i in range(d)])
            removable = np.min((x0[None, :] - pts) * co[None, :] + np.where(pts > x0[None, :], np.inf, 0.0), axis=1) <= delta
            member = np.where(inside_pt, removable, outside)
            brute = member.mean() / delta
            assert got == pytest.approx(brute, rel=0.05, abs=0.05)


def test_w_parameter_single_slice_arith():
    # capacity of the half-line class with A = e, v = 1 is identically e
    fc = C.half_line()
    w = C.w_parameter(fc, 0.25, 0.5, 2.0, math.e, 1.0)
    assert w == pytest.approx(1.0, abs=1e-12)  # max(log log_q(q^2), log e) = 1


def test_w_parameter_loglog_dominates():
    fc = C.half_line()
    for r in (1e-4, 1e-6):
        w = C.w_parameter(fc, r, 0.5, 2.0, math.e, 1.0)
        want = log_of_logq(2.0 * 0.5 / r, 2.0)
        assert w == pytest.approx(want, rel=1e-12)


def test_w_parameter_box_matches_direct_loop():
    fc = C.box_cdf(2)
    r, delta, q, A, v = 1e-3, 0.5, 2.0, math.e, 3.0
    got = C.w_parameter(fc, r, delta, q, A, v)
    l = math.ceil(math.log(delta * q / r) / math.log(q) - 1e-12)
    want = -math.inf
    for j in range(l + 1):
        rho = min(r * q**j, delta * q)
        term = log_of_logq(delta * q / rho, q)
        try:
            term = max(term, math.log(max(C.capacity(fc, min(rho, 1.0), q, A, v), 1.0)))
        except C.EmptySliceError:
            pass
        want = max(want, term)
    assert got == pytest.approx(want, rel=1e-12)


def test_entropy_eval_vc_exact():
    model = C.vc_type(A=math.e, v=1.0)
    assert C.entropy_eval(model, 1.0) == pytest.approx(1.0, rel=1e-15)
    rng = np.random.default_rng(2)
    for x in rng.uniform(0.5, 50.0, size=10):
        assert C.entropy_eval(C.vc_type(3.0, 2.5), x) == pytest.approx(2.5 * math.log(3.0 * x),
                                                                       rel=1e-14)


def test_entropy_eval_regvar_cutoff():
    assert C.entropy_eval(C.reg_varying(1.0, 1.0), 0.4) == 0.0


def test_entropy_eval_vcmajor_two_codings():
    model = C.vc_major(A=math.e)
    x, tau = 0.5 / 0.1, 0.1
    got = C.entropy_eval(model, x, tau=tau)
    # independent coding of the same display: u log(u) log(1/tau)
    u = math.e * 0.5 / 0.1
    want = u * math.log(u) * math.log(1.0 / 0.1)
    assert got == pytest.approx(want, rel=1e-12)
    assert got == pytest.approx(81.6635, rel=1e-4)


def test_entropy_constants_vc_closed_forms():
    c_h, d_h, a_h = C.entropy_constants(C.vc_type(math.e, 1.0))
    assert (c_h, d_h, a_h) == (2.0, pytest.approx(2.0, rel=1e-14), math.e)
    # numeric verification that the closed forms dominate the definitions
    model = C.vc_type(math.e, 1.0)
    tail = adaptive_simpson(lambda u: math.sqrt(C.entropy_eval(model, 1.0 / u)) if u > 0 else 0.0,
                            0.0, 1.0, tol=1e-10)
    assert d_h >= tail - 1e-9
    for x in np.geomspace(1.0, 1e4, 40):
        tail_x = adaptive_simpson(
            lambda s: 4.0 * s**3 * math.sqrt(C.entropy_eval(model, x / s**4)) if s > 0 else 0.0,
            0.0, 1.0, tol=1e-10) / x
        assert tail_x <= c_h * math.sqrt(C.entropy_eval(model, x)) / x + 1e-9


def test_entropy_constants_regvar_integral():
    c_h, d_h, a_h = C.entropy_constants(C.reg_varying(1.0, 1.0))
    assert d_h == pytest.approx(2.0, abs=1e-6)  # int_1^inf u^{-3/2} du = 2
    assert c_h >= 1.0 and a_h >= 1.0
    with pytest.raises(C.DomainError):
        C.reg_varying(2.0, 1.0)


def test_alexander_set_capacity():
    assert C.alexander_set_capacity(C.half_line(), 0.1) == pytest.approx(1.0)
    got = C.alexander_set_capacity(C.box_cdf(2), 0.1)
    assert got == pytest.approx((0.1 * (1 + math.log(10.0))) / 0.1, rel=1e-12)
    assert C.alexander_set_capacity(C.intervals(), 0.25) == pytest.approx(4.0)
