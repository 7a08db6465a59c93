"""The acceptance suite: one function per criterion, each printing a
pass/fail line at its stated tolerance.

Heavy Monte Carlo pipelines are shared through :class:`AcceptanceContext`;
the determinism criterion re-runs every registered study (two fresh runs,
one of them with 4 workers) and compares serialized bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .. import classes as fcm
from .. import expect, learn, peel, sim
from ..numutil import cloglog
from ..rng import derive_seed, stream
from .config import StudySpec
from .studies import clt_r_n, fit_slope, run_study, stability_check

MASTER_SEED = 20240601
REPS = 200


@dataclass
class CriterionResult:
    name: str
    passed: bool
    details: str


# ---------------------------------------------------------------------------
# registered studies (shared by the criteria and the determinism check)
# ---------------------------------------------------------------------------


def _spec_eicker(workers: int) -> StudySpec:
    return StudySpec(kind="ratio-scaling", n_grid=(10**3, 10**4, 10**5, 10**6), reps=REPS,
                     seed=MASTER_SEED, workers=workers, clazz={"kind": "halfline"},
                     weight={"alpha": 1.0}, range={"rule": "eicker"})


def _spec_box(workers: int) -> StudySpec:
    return StudySpec(kind="ratio-scaling", n_grid=(10**3, 10**4, 10**5), reps=REPS,
                     seed=MASTER_SEED, workers=workers, clazz={"kind": "boxcdf", "d": 2},
                     weight={"alpha": 1.0}, range={"rule": "box-rate", "eps": 1.0},
                     extras={"levels_per_octave": 12, "full": False})


def _spec_c0(workers: int, seed: int) -> StudySpec:
    return StudySpec(kind="ratio-scaling", n_grid=(10**4, 10**5, 10**6), reps=REPS,
                     seed=seed, workers=workers, clazz={"kind": "coordc0"},
                     weight={"alpha": 2.0}, range={"rule": "c0-ratio"})


def _spec_intervals_ball(workers: int, sigma: float, ns: tuple) -> StudySpec:
    return StudySpec(kind="ratio-scaling", n_grid=ns, reps=REPS, seed=MASTER_SEED,
                     workers=workers, clazz={"kind": "intervals"}, weight={"alpha": 0.0},
                     range={"rule": "fixed", "r": 0.0, "delta": sigma})


def _spec_ls(workers: int) -> StudySpec:
    return StudySpec(kind="erm", n_grid=(10**3, 3 * 10**3, 10**4, 3 * 10**4), reps=REPS,
                     seed=MASTER_SEED, workers=workers,
                     problem={"kind": "finite-dim-ls", "d": 4, "noise_b": 0.25})


def _spec_isotonic(workers: int) -> StudySpec:
    return StudySpec(kind="erm", n_grid=(10**3, 10**4, 10**5), reps=REPS, seed=MASTER_SEED,
                     workers=workers, problem={"kind": "isotonic", "noise_b": 0.2})


def _spec_margin_erm(workers: int, h: float) -> StudySpec:
    return StudySpec(kind="erm", n_grid=(10**4,), reps=REPS, seed=MASTER_SEED, workers=workers,
                     problem={"kind": "margin-classification", "h": h, "a0": 0.3, "b0": 0.7,
                              "s": 1.6, "psi_reps": 100})


def _spec_margin_ratio(workers: int) -> StudySpec:
    return StudySpec(kind="margin", n_grid=(10**3, 10**4, 10**5), reps=REPS, seed=MASTER_SEED,
                     workers=workers, problem={"D": 1.0, "alpha": 1.0})


def _spec_psi_halfline(workers: int) -> StudySpec:
    # carrier spec for the psi-domination pipeline (criterion 7)
    return StudySpec(kind="ratio-scaling", n_grid=(10**3, 10**4), reps=REPS, seed=MASTER_SEED,
                     workers=workers, clazz={"kind": "halfline"}, weight={"alpha": 1.0},
                     range={"rule": "eicker"}, extras={"pipeline": "psi-domination"})


def _psi_halfline_rows(workers: int) -> list:
    rows = []
    for n in (10**3, 10**4):
        seed_n = derive_seed(MASTER_SEED, 7, n)
        grid = peel.build_grid(1.0 / math.sqrt(n), 0.25, 2.0)
        res = sim.estimate_psi_beta(fcm.half_line(), grid, peel.NormWeight("power", 1.0),
                                    n, REPS, seed_n, workers)
        for hi, summ in zip(grid.hi, res.slice_summaries):
            rows.append({"study": "psi-domination", "class": "halfline", "n": n,
                         "rep": "summary", "statistic": f"psi@{hi:.8g}",
                         "value": float(summ.mean), "seed": seed_n})
            rows.append({"study": "psi-domination", "class": "halfline", "n": n,
                         "rep": "summary", "statistic": f"se@{hi:.8g}",
                         "value": float(summ.stderr), "seed": seed_n})
    return rows


def _c0_beta_rows(workers: int, seed: int) -> dict:
    """beta_hat per n for the coordinate class at Example-4.3 parameters."""
    out = {}
    for n in (10**4, 10**5, 10**6):
        seed_n = derive_seed(seed, 5, n)
        r_n = math.log(n) / math.sqrt(n)
        q_n = min(1.0 + math.log(n) ** 2 / math.sqrt(n), 2.0)
        grid = peel.build_grid(r_n, 0.5, q_n)
        res = sim.estimate_psi_beta(fcm.coord_c0(), grid, peel.NormWeight("power", 2.0),
                                    n, REPS, seed_n, workers)
        out[n] = res.beta_hat
    return out


def _clt_pipeline(workers: int):
    """psi tables on the 1-d c.d.f. premises grid plus the two premise
    reports (exponent 1 and 1/4)."""
    ns = (10**3, 10**4, 10**5, 10**6)
    deltas = (0.25, 0.125, 0.0625, 0.03125)
    q = 2.0
    psi_tables = {}
    for n in ns:
        seed_n = derive_seed(MASTER_SEED, 11, n)
        grid = peel.build_grid(clt_r_n(n), 0.5, q)
        res = sim.estimate_psi_beta(fcm.half_line(), grid, peel.NormWeight("power", 1.0),
                                    n, REPS, seed_n, workers)
        psi_tables[n] = [(hi, s.mean, s.stderr) for hi, s in zip(grid.hi, res.slice_summaries)
                         if s.reps > 0]
    rep_pass = sim.clt_premise_check(sim.CltWeight(1.0), list(ns), clt_r_n, q, psi_tables, deltas)
    rep_fail = sim.clt_premise_check(sim.CltWeight(0.25), list(ns), clt_r_n, q, psi_tables, deltas)
    return psi_tables, rep_pass, rep_fail


class AcceptanceContext:
    """Caches the shared study runs for one acceptance pass."""

    def __init__(self, workers: int = 1):
        self.workers = workers
        self._cache: dict = {}

    def get(self, key: str, builder: Callable):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    def eicker(self):
        return self.get("eicker", lambda: run_study(_spec_eicker(self.workers)))

    def box(self):
        return self.get("box", lambda: run_study(_spec_box(self.workers)))

    def c0(self, seed: int):
        return self.get(f"c0-{seed}", lambda: run_study(_spec_c0(self.workers, seed)))

    def intervals_ball(self, sigma: float):
        return self.get(f"ball-{sigma}",
                        lambda: run_study(_spec_intervals_ball(self.workers, sigma, (10**4, 10**5))))

    def ls(self):
        return self.get("ls", lambda: run_study(_spec_ls(self.workers)))

    def isotonic(self):
        return self.get("isotonic", lambda: run_study(_spec_isotonic(self.workers)))

    def margin_erm(self, h: float):
        return self.get(f"margin-erm-{h}", lambda: run_study(_spec_margin_erm(self.workers, h)))

    def margin_ratio(self):
        return self.get("margin-ratio", lambda: run_study(_spec_margin_ratio(self.workers)))

    def psi_halfline(self):
        return self.get("psi-halfline", lambda: _psi_halfline_rows(self.workers))

    def c0_betas(self, seed: int):
        return self.get(f"c0-beta-{seed}", lambda: _c0_beta_rows(self.workers, seed))

    def clt(self):
        return self.get("clt", lambda: _clt_pipeline(self.workers))


# ---------------------------------------------------------------------------
# criterion 1: exact-oracle domination in explicit mode
# ---------------------------------------------------------------------------


def _finite_instances(count: int = 10):
    """Deterministic FiniteDict instances: rational cell probabilities,
    dictionary values on a quarter grid, sqrt-mean scale convention."""
    rng = stream(MASTER_SEED, 9001)
    instances = []
    while len(instances) < count:
        space = int(rng.integers(2, 5))
        n = int(rng.integers(2, 6))
        weights = rng.integers(1, 5, size=space)
        denom = int(weights.sum())
        probs = [Fraction(int(w), denom) for w in weights]
        members = int(rng.integers(2, 7))
        rows = rng.integers(0, 5, size=(members, space)) / 4.0
        means = rows @ np.asarray([float(p) for p in probs])
        if np.any(means <= 0.01):
            continue
        instances.append((probs, rows, n))
    return instances


def _slice_edges(grid: peel.PeelingGrid):
    return list(zip(grid.lo, grid.hi))


def criterion_1(ctx: AcceptanceContext) -> CriterionResult:
    violations = []
    for idx, (probs, rows, n) in enumerate(_finite_instances()):
        p = np.asarray([float(v) for v in probs])
        sigma = np.sqrt(rows @ p)
        lo_s, hi_s = float(sigma.min()), float(sigma.max())
        grid = peel.build_grid(0.9 * lo_s, min(hi_s, 1.0), 2.0)
        weight = peel.NormWeight("power", 1.0)
        # exact per-slice means from the oracle
        stats = []
        for lo, hi in _slice_edges(grid):
            idx_members = np.where((sigma > lo) & (sigma <= hi))[0]
            if len(idx_members) == 0:
                stats.append(peel.SliceStats(psi=0.0, envelope_sq=0.0, vbar=0.0))
                continue
            law = sim.exact_small_oracle(probs, n, sim.stat_sup_abs(rows, p, idx_members))
            env = np.max(np.abs(rows[idx_members]), axis=0)
            stats.append(peel.SliceStats(psi=law.expectation(), envelope_sq=float((env**2) @ p),
                                         vbar=hi * hi))
        phi_vals = [weight(hi) for _, hi in _slice_edges(grid)]
        stat_w = sim.stat_weighted_sup(rows, p, sigma, _slice_edges(grid), phi_vals)
        law_w = sim.exact_small_oracle(probs, n, stat_w)
        for s in (1.0, 2.5):
            query = peel.BoundQuery(n=n, s=s, mode="explicit")
            cert = peel.concentration_certificate(grid, weight, stats, query)
            exact = law_w.tail(cert.center + cert.radius)
            if exact > cert.prob_bound + 1e-12:
                violations.append(f"conc inst{idx} s={s}: {exact} > {cert.prob_bound}")
        # ratio-type certificate (t^2 weight)
        means = rows @ p
        r_sig, d_sig = 0.9 * lo_s, min(hi_s * 1.0001, 1.0)
        grid2 = peel.build_grid(r_sig, d_sig, 2.0)
        psi2 = []
        for lo, hi in _slice_edges(grid2):
            idx_members = np.where((sigma > lo) & (sigma <= hi))[0]
            if len(idx_members) == 0:
                psi2.append(0.0)
                continue
            law = sim.exact_small_oracle(probs, n, sim.stat_sup_abs(rows, p, idx_members))
            psi2.append(law.expectation())
        beta2 = max(ps / hi**2 for ps, (lo, hi) in zip(psi2, _slice_edges(grid2)))
        keep = (means > r_sig**2) & (means <= d_sig**2)
        if np.any(keep):
            law_r = sim.exact_small_oracle(probs, n, sim.stat_sup_ratio(rows, p, np.where(keep)[0]))
            for s in (0.8, 2.0):
                upper, _ = peel.ratio_bound_t2(n, r_sig, d_sig, 2.0, beta2, s, mode="explicit")
                exact = law_r.tail(upper.radius)
                if exact > upper.prob_bound + 1e-12:
                    violations.append(f"t2 inst{idx} s={s}: {exact} > {upper.prob_bound}")
        # elementary tails
        var0 = float((rows[0] ** 2) @ p - (rows[0] @ p) ** 2)
        law_m = sim.exact_small_oracle(probs, n, lambda pn, row=rows[0]: float(row @ pn - row @ p))
        for t in (0.3, 0.8, 1.5):
            tb = peel.tail_bounds("bernstein", n, var0, 0.0, t)
            exact = law_m.tail(t / n)
            if exact > tb.prob + 1e-12:
                violations.append(f"bernstein inst{idx} t={t}: {exact} > {tb.prob}")
        law_all = sim.exact_small_oracle(probs, n, sim.stat_sup_abs(rows, p))
        e_term = n * law_all.expectation()
        var_max = float(np.max((rows**2) @ p - (rows @ p) ** 2))
        for t in (0.5, 1.5):
            tb = peel.tail_bounds("bousquet", n, var_max, e_term, t)
            exact = law_all.tail(tb.value / n)
            if exact > tb.prob + 1e-12:
                violations.append(f"bousquet inst{idx} t={t}: {exact} > {tb.prob}")
    passed = not violations
    return CriterionResult("1 exact-oracle domination", passed,
                           "zero violations" if passed else "; ".join(violations[:4]))


# ---------------------------------------------------------------------------
# criterion 2: gamma machinery
# ---------------------------------------------------------------------------


def criterion_2(ctx: AcceptanceContext) -> CriterionResult:
    xs = np.linspace(0.0, 1000.0, 1001)[1:]
    inv_resid = max(abs(peel.gamma(peel.gamma_inverse(x)) - x) / x for x in xs)
    ok = inv_resid <= 1e-10
    details = [f"inversion residual {inv_resid:.2e}"]
    for x in np.concatenate([np.linspace(1e-6, 2.0, 200), np.geomspace(2.0, 1e4, 200)]):
        g = peel.gamma(x)
        if g > 2.0 * x / math.log1p(x) + 1e-9:
            ok = False
            details.append(f"bound 2x/log(1+x) fails at {x}")
        if x >= 2.0 and g > 2.0 * x / math.log(x) + 1e-9:
            ok = False
            details.append(f"bound 2x/log x fails at {x}")
        if x <= 2.0 and g > 2.0 * math.sqrt(x) + 1e-9:
            ok = False
            details.append(f"bound 2 sqrt x fails at {x}")
    grid = np.linspace(0.0, 20.0, 100)
    gam = np.array([peel.gamma(v) for v in grid])
    for i, x in enumerate(grid):
        for j, y in enumerate(grid):
            if peel.gamma(x + y) > gam[i] + gam[j] + 1e-9:
                ok = False
                details.append(f"subadditivity fails at ({x},{y})")
                break
    return CriterionResult("2 gamma machinery", ok, details[0] if ok else "; ".join(details[:3]))


# ---------------------------------------------------------------------------
# criteria 3-5: scaling studies
# ---------------------------------------------------------------------------


def criterion_3(ctx: AcceptanceContext) -> CriterionResult:
    res = ctx.eicker()
    slope = fit_slope(res.rows, "n", "q50")
    ok_slope = abs(slope.slope + 0.5) <= 0.05
    ok_band, series = stability_check(res.rows, lambda n: math.sqrt(n / math.log(math.log(n))), 1.5)
    passed = ok_slope and ok_band
    return CriterionResult(
        "3 Eicker rate", passed,
        f"slope {slope.slope:.4f} (target -0.5 +/- 0.05), normalized medians {np.round(series, 4)}",
    )


def criterion_4(ctx: AcceptanceContext) -> CriterionResult:
    res = ctx.box()
    ok, series = stability_check(res.rows, lambda n: math.sqrt(n) / math.sqrt(math.log(n)), 2.0)
    return CriterionResult("4 d=2 cdf rate", ok, f"normalized medians {np.round(series, 4)} band 2.0")


def criterion_5(ctx: AcceptanceContext) -> CriterionResult:
    seeds = [MASTER_SEED + i for i in range(5)]
    passes = 0
    details = []
    for seed in seeds:
        res = ctx.c0(seed)
        ok_band, series = stability_check(res.rows, lambda n: math.sqrt(math.log(n)), 2.0)
        betas = ctx.c0_betas(seed)
        medians = {n: float(np.median(res.aux[n])) for n in res.aux}
        ns = sorted(medians)
        normalized = [medians[n] / betas[n] for n in ns]
        ok_increasing = all(b > a for a, b in zip(normalized, normalized[1:]))
        passes += ok_band and ok_increasing
        details.append(f"seed {seed}: band={ok_band} inc={ok_increasing}")
    needed = math.ceil(0.9 * len(seeds))
    return CriterionResult("5 c0 counterexample", passes >= needed,
                           f"{passes}/5 seeds pass (need {needed}); " + "; ".join(details))


# ---------------------------------------------------------------------------
# criteria 6-8
# ---------------------------------------------------------------------------


def criterion_6(ctx: AcceptanceContext) -> CriterionResult:
    worst = 0.0
    fc = fcm.monotone_unit()
    for delta in np.linspace(0.05, 1.0, 20):
        got = fcm.slice_envelope_norm(fc, fcm.Slice(0.0, float(delta))) ** 2
        want = delta * delta * math.log(math.e / (delta * delta))
        worst = max(worst, abs(got - want))
    return CriterionResult("6 monotone envelope", worst <= 1e-6, f"max quadrature gap {worst:.2e}")


def criterion_7(ctx: AcceptanceContext) -> CriterionResult:
    rows = ctx.psi_halfline()
    violations = []
    for n in (10**3, 10**4):
        psi = {r["statistic"][4:]: r["value"] for r in rows if r["n"] == n and r["statistic"].startswith("psi@")}
        ses = {r["statistic"][3:]: r["value"] for r in rows if r["n"] == n and r["statistic"].startswith("se@")}
        for key, val in psi.items():
            hi = float(key)
            bound = 4.0 * hi / math.sqrt(n) + 3.0 * ses[key]
            if val > bound:
                violations.append(f"n={n} hi={hi}: {val:.5f} > {bound:.5f}")
    return CriterionResult("7 psi domination", not violations,
                           "all slices within 4 rho/sqrt(n) + 3 se" if not violations
                           else "; ".join(violations[:3]))


def criterion_8(ctx: AcceptanceContext) -> CriterionResult:
    model = fcm.vc_type(A=4.0, v=4.0)
    fc = fcm.intervals()
    checks = []
    violations = []
    for sigma in (0.125, 0.25):
        res = ctx.intervals_ball(sigma)
        for n in (10**4, 10**5):
            vals = res.aux[n]
            mc = n * float(np.mean(vals))
            se = n * float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
            upper = expect.expectation_upper(
                expect.ExpectationQuery(n=n, sigma=sigma, env_norm=1.0, model=model,
                                        mode="explicit")).value
            fr = expect.fullness_estimate(fc, sigma, mc_points=4000,
                                          seed=derive_seed(MASTER_SEED, 8, n, int(sigma * 1000)))
            lower_rep = expect.expectation_lower(n, sigma, fr.packing_log, L=1.0, model=model,
                                                 env_norm=1.0, premise_mode="shape")
            lower = lower_rep.value if lower_rep.premises_pass else None
            if mc + 2.0 * se > upper:
                violations.append(f"upper fails at sigma={sigma} n={n}")
            if lower is not None and lower > mc - 2.0 * se:
                violations.append(f"lower fails at sigma={sigma} n={n}")
            checks.append(f"s={sigma},n={n}: low={'-' if lower is None else f'{lower:.1f}'} "
                          f"mc={mc:.1f} up={upper:.3g}")
    return CriterionResult("8 expectation sandwich", not violations,
                           "; ".join(checks) if not violations else "; ".join(violations))


# ---------------------------------------------------------------------------
# criterion 9: ERM rates
# ---------------------------------------------------------------------------


def criterion_9(ctx: AcceptanceContext) -> CriterionResult:
    ls = ctx.ls()
    slope = fit_slope(ls.rows, "n", "mean")
    ok_a = abs(slope.slope + 1.0) <= 0.1
    iso = ctx.isotonic()
    ok_b, series = stability_check(
        iso.rows, lambda n: n / (math.log(n) ** 1.5 * math.log(math.log(n))), 2.0
    )
    ok_c = True
    frac_info = []
    for h in (0.1, 0.3):
        res = ctx.margin_erm(h)
        aux = res.aux[10**4]
        cert = aux["certificate"]
        if not cert.feasible or cert.prob_bound > 0.05:
            ok_c = False
            frac_info.append(f"h={h}: infeasible certificate")
            continue
        frac = float(np.mean(aux["excess"] <= cert.r_star))
        frac_info.append(f"h={h}: {100 * frac:.1f}% <= r*={cert.r_star:.4f} (prob {cert.prob_bound:.3f})")
        ok_c = ok_c and frac >= 0.95
    passed = ok_a and ok_b and ok_c
    return CriterionResult(
        "9 ERM rates", passed,
        f"LS slope {slope.slope:.3f}; isotonic normalized medians {np.round(series, 3)}; "
        + "; ".join(frac_info),
    )


# ---------------------------------------------------------------------------
# criteria 10-12
# ---------------------------------------------------------------------------


def criterion_10(ctx: AcceptanceContext) -> CriterionResult:
    res = ctx.margin_ratio()
    medians = [(n, float(np.median(res.aux[n].summary.values))) for n in sorted(res.aux)]
    vals = [v for _, v in medians]
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    final_small = vals[-1] < 0.1
    return CriterionResult("10 margin ratios", decreasing and final_small,
                           f"median sup-M {[(n, round(v, 4)) for n, v in medians]}")


def criterion_11(ctx: AcceptanceContext) -> CriterionResult:
    _, rep_pass, rep_fail = ctx.clt()
    ok = rep_pass.passed and rep_fail.conditions["(5.4)"]["verdict"] == "fail"
    det = (f"exponent 1: {[(k, rep_pass.conditions[k]['verdict']) for k in ('(5.4)', '(5.5)', '(5.6)')]}; "
           f"exponent 1/4 (5.4): {rep_fail.conditions['(5.4)']['verdict']}")
    return CriterionResult("11 CLT premises", ok, det)


def _registry(workers: int) -> dict:
    return {
        "eicker": lambda w=workers: run_study(_spec_eicker(w)).csv(),
        "box": lambda w=workers: run_study(_spec_box(w)).csv(),
        "c0-seed0": lambda w=workers: run_study(_spec_c0(w, MASTER_SEED)).csv(),
        "intervals-ball": lambda w=workers: run_study(
            _spec_intervals_ball(w, 0.25, (10**4,))).csv(),
        "ls": lambda w=workers: run_study(_spec_ls(w)).csv(),
        "isotonic": lambda w=workers: run_study(_spec_isotonic(w)).csv(),
        "margin-erm": lambda w=workers: run_study(_spec_margin_erm(w, 0.1)).csv(),
        "margin-ratio": lambda w=workers: run_study(_spec_margin_ratio(w)).csv(),
        "psi-halfline": lambda w=workers: str(_psi_halfline_rows(w)),
    }


def criterion_12(ctx: AcceptanceContext) -> CriterionResult:
    mismatches = []
    for name in _registry(1):
        first = _registry(1)[name]()
        second = _registry(1)[name]()
        four = _registry(4)[name]()
        if first != second:
            mismatches.append(f"{name}: rerun differs")
        if first != four:
            mismatches.append(f"{name}: 1-vs-4 workers differ")
    return CriterionResult("12 determinism", not mismatches,
                           "bit-identical across reruns and worker counts" if not mismatches
                           else "; ".join(mismatches))


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


def run_acceptance(workers: int = 1, printer: Optional[Callable[[str], None]] = print,
                   only: Optional[list] = None) -> list:
    ctx = AcceptanceContext(workers=workers)
    results = []
    for crit in CRITERIA:
        if only and not any(crit.__name__.endswith(f"_{k}") for k in only):
            continue
        res = crit(ctx)
        results.append(res)
        if printer:
            printer(f"{'PASS' if res.passed else 'FAIL'} -- {res.name}: {res.details}")
    return results
