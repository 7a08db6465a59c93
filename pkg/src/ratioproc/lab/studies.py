"""Study runner: deterministic pipelines per study kind, slope fits and
stability diagnostics.

A study's rows are fully determined by its :class:`StudySpec` (master seed
included), replicate-indexed, and identical under any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .. import classes as fcm
from .. import expect, learn, peel, sim
from ..numutil import clog, cloglog
from ..rng import derive_seed, stream
from .config import ConfigError, StudySpec
from .io import rows_to_csv


@dataclass
class StudyResult:
    spec: StudySpec
    rows: list
    aux: dict = field(default_factory=dict)

    def csv(self) -> str:
        return rows_to_csv(self.rows)


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    residual_rms: float
    points: int


def fit_slope(table: Sequence[dict], x: str = "n", y: str = "q50") -> SlopeFit:
    """OLS on ``(log n, log statistic)`` over the summary rows of a table."""
    xs, ys = [], []
    for row in table:
        if row.get("rep") == "summary" and row.get("statistic") == y:
            xs.append(float(row[x]))
            ys.append(float(row["value"]))
    if len(xs) < 3:
        raise ValueError("slope fit needs at least 3 points")
    if min(ys) <= 0 or min(xs) <= 0:
        raise ValueError("slope fit needs positive values")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return SlopeFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))), len(xs))


def stability_check(table: Sequence[dict], normalizer: Callable[[float], float],
                    band: float, statistic: str = "q50") -> tuple[bool, list]:
    """Pass iff the normalized quantile series stays within a multiplicative
    band: ``max/min <= band``."""
    series = []
    for row in table:
        if row.get("rep") == "summary" and row.get("statistic") == statistic:
            series.append((float(row["n"]), float(row["value"]) * normalizer(float(row["n"]))))
    if not series:
        raise ValueError("no matching summary rows")
    vals = [v for _, v in sorted(series)]
    ratio = max(vals) / min(vals) if min(vals) > 0 else math.inf
    return ratio <= band, vals


def _summary_rows(study: str, clazz: str, n: int, seed: int, values: np.ndarray,
                  per_rep_stat: str = "sup") -> list:
    summ = sim.ReplicationSummary.from_values(values, seed)
    rows = [
        {"study": study, "class": clazz, "n": n, "rep": str(k), "statistic": per_rep_stat,
         "value": float(v), "seed": seed}
        for k, v in enumerate(values)
    ]
    for name, val in (("mean", summ.mean), ("stderr", summ.stderr), ("q50", summ.q50),
                      ("q90", summ.q90), ("q95", summ.q95)):
        rows.append({"study": study, "class": clazz, "n": n, "rep": "summary",
                     "statistic": name, "value": float(val), "seed": seed})
    return rows


# ---------------------------------------------------------------------------
# ratio-scaling studies
# ---------------------------------------------------------------------------


def _coord_j_window(r: float, delta: float) -> tuple[int, int]:
    j = 1
    while 1.0 / (j * clog(j)) > delta:
        j += 1
    j_lo = j
    j_hi = sim.coordc0_jmax(r)
    if j_hi < j_lo:
        raise ConfigError("empty coordinate window")
    return j_lo, j_hi


def _scaling_value(spec: StudySpec, n: int, rep: int, seed_n: int) -> float:
    kind = spec.clazz.get("kind", "halfline")
    rule = spec.range.get("rule", "fixed")
    alpha = float(spec.weight.get("alpha", 1.0))
    weight = peel.NormWeight("power", alpha)
    if kind == "halfline":
        batch = sim._draw_rep("uniform-1d", n, seed_n, rep)
        if rule == "eicker":
            r_t, d_t = 1.0 / n, 0.5
        else:
            r_t, d_t = float(spec.range.get("r_t", 0.0)), float(spec.range.get("delta_t", 0.5))
        return sim.sup_halfline(batch, r_t, d_t, weight).value
    if kind == "boxcdf":
        d = int(spec.clazz.get("d", 2))
        batch = sim._draw_rep("uniform-box", n, seed_n, rep, d=d)
        if rule == "box-rate":
            eps = float(spec.range.get("eps", 1.0))
            r = math.sqrt(eps / (n * math.log(n)))
            delta = 0.5
        else:
            r, delta = float(spec.range.get("r", 0.0)), float(spec.range.get("delta", 0.5))
        lpo = int(spec.extras.get("levels_per_octave", 12))
        full = spec.extras.get("full", None)
        return sim.sup_box(batch, r, delta, weight, levels_per_octave=lpo,
                           full=None if full is None else bool(full)).value
    if kind == "coordc0":
        if rule == "c0-ratio":
            r = math.log(n) / math.sqrt(n)
            delta = 0.5
        else:
            r, delta = float(spec.range["r"]), float(spec.range.get("delta", 0.5))
        j_lo, j_hi = _coord_j_window(r, delta)
        batch = sim._draw_rep("coordc0", n, seed_n, rep, j_max=j_hi)
        return sim.sup_c0(batch, (j_lo, j_hi), weight).value
    if kind == "intervals":
        batch = sim._draw_rep("uniform-1d", n, seed_n, rep)
        r = float(spec.range.get("r", 0.0))
        delta = float(spec.range["delta"])
        return sim.sup_intervals(batch, r, delta, weight if alpha > 0 else peel.unweighted()).value
    raise ConfigError(f"ratio-scaling unsupported for class {kind!r}")


def _run_ratio_scaling(spec: StudySpec) -> StudyResult:
    rows = []
    aux = {}
    name = f"ratio-scaling/{spec.range.get('rule', 'fixed')}"
    clazz = spec.clazz.get("kind", "halfline")
    for n in spec.n_grid:
        seed_n = derive_seed(spec.seed, n)
        vals = np.asarray(
            sim.run_replicates(lambda rep: _scaling_value(spec, n, rep, seed_n), spec.reps,
                               spec.workers),
            dtype=float,
        )
        rows.extend(_summary_rows(name, clazz, n, seed_n, vals))
        aux[n] = vals
    return StudyResult(spec, rows, aux)


# ---------------------------------------------------------------------------
# ERM studies
# ---------------------------------------------------------------------------


def _run_erm(spec: StudySpec) -> StudyResult:
    kind = spec.problem.get("kind", "finite-dim-ls")
    rows = []
    aux = {}
    if kind == "finite-dim-ls":
        dim = int(spec.problem.get("d", 4))
        noise = float(spec.problem.get("noise_b", 0.25))
        g0 = np.zeros(dim)
        g0[0] = 0.5
        if dim > 1:
            g0[1] = 0.2 / math.sqrt(2.0)

        def g0_fun(x):
            return 0.5 + 0.2 * np.cos(math.pi * np.asarray(x))

        for n in spec.n_grid:
            seed_n = derive_seed(spec.seed, n)

            def one(rep):
                batch = _regression_batch(n, seed_n, rep, g0_fun, noise)
                return learn.fit_finite_dim_ls(batch, dim, g0).excess

            vals = np.asarray(sim.run_replicates(one, spec.reps, spec.workers), dtype=float)
            rows.extend(_summary_rows("erm/finite-dim-ls", "linearspan", n, seed_n, vals, "excess"))
            aux[n] = vals
        return StudyResult(spec, rows, aux)
    if kind == "isotonic":
        breaks = list(spec.problem.get("breaks", (0.0, 0.25, 0.5, 0.75, 1.0)))
        levels = list(spec.problem.get("levels", (0.2, 0.4, 0.6, 0.8)))
        noise = float(spec.problem.get("noise_b", 0.2))

        def g0_fun(x):
            return learn.step_function_eval(breaks, levels, np.asarray(x))

        for n in spec.n_grid:
            seed_n = derive_seed(spec.seed, n)

            def one(rep):
                batch = _regression_batch(n, seed_n, rep, g0_fun, noise)
                return learn.fit_isotonic(batch, breaks, levels).excess

            vals = np.asarray(sim.run_replicates(one, spec.reps, spec.workers), dtype=float)
            rows.extend(_summary_rows("erm/isotonic", "monotone", n, seed_n, vals, "excess"))
            aux[n] = vals
        return StudyResult(spec, rows, aux)
    if kind == "margin-classification":
        h = float(spec.problem.get("h", 0.1))
        a0 = float(spec.problem.get("a0", 0.3))
        b0 = float(spec.problem.get("b0", 0.7))
        eta = learn.MarginEta("intervals", h, (a0, b0))
        s = float(spec.problem.get("s", 1.6))
        psi_reps = int(spec.problem.get("psi_reps", 100))
        for n in spec.n_grid:
            seed_n = derive_seed(spec.seed, n)
            table = learn.interval_classification_psi(eta, n, psi_reps, derive_seed(seed_n, 1),
                                                      workers=spec.workers)
            problem = learn.margin_classification_problem(eta, table, mode="explicit")
            cert = learn.excess_risk_certificate(problem, n, s, q=2.0)

            def one(rep):
                batch = _classification_batch(n, seed_n, rep, eta)
                return learn.fit_margin_classifier(batch, eta).excess

            vals = np.asarray(sim.run_replicates(one, spec.reps, spec.workers), dtype=float)
            rows.extend(_summary_rows("erm/margin", "intervals", n, seed_n, vals, "excess"))
            r_star = cert.r_star if cert.feasible else math.inf
            rows.append({"study": "erm/margin", "class": "intervals", "n": n, "rep": "summary",
                         "statistic": "certificate_r_star", "value": float(r_star), "seed": seed_n})
            rows.append({"study": "erm/margin", "class": "intervals", "n": n, "rep": "summary",
                         "statistic": "certificate_prob", "value": float(cert.prob_bound),
                         "seed": seed_n})
            aux[n] = {"excess": vals, "certificate": cert, "psi_table": table}
        return StudyResult(spec, rows, aux)
    raise ConfigError(f"unknown erm problem {kind!r}")


def _regression_batch(n, seed, rep, g0_fun, noise_b):
    rng = stream(seed, rep)
    x = rng.random(n)
    u = rng.uniform(-noise_b, noise_b, n) if noise_b > 0 else np.zeros(n)
    y = np.clip(g0_fun(x) + u, 0.0, 1.0)
    return sim.SampleBatch("regression-pair", n, seed, {"noise_b": noise_b}, {"x": x, "y": y})


def _classification_batch(n, seed, rep, eta):
    rng = stream(seed, rep)
    x = rng.random(n)
    y = (rng.random(n) < eta(x)).astype(np.int64)
    return sim.SampleBatch("classification-pair", n, seed, {}, {"x": x, "y": y})


# ---------------------------------------------------------------------------
# margin-ratio studies
# ---------------------------------------------------------------------------


def _run_margin(spec: StudySpec) -> StudyResult:
    setup = learn.MarginSetup(D=float(spec.problem.get("D", 1.0)),
                              alpha=float(spec.problem.get("alpha", 1.0)))
    family = [{"score": lambda x: x, "cdf": learn.uniform_cdf()}]
    rows = []
    aux = {}
    for n in spec.n_grid:
        seed_n = derive_seed(spec.seed, n)
        lambda_n = clog(n)
        res = learn.margin_experiment(setup, family, n, lambda_n, spec.reps, seed_n,
                                      workers=spec.workers)
        rows.extend(_summary_rows("margin", "uniform-score", n, seed_n, res.summary.values, "sup_M"))
        aux[n] = res
    return StudyResult(spec, rows, aux)


# ---------------------------------------------------------------------------
# weighted-CLT premise studies
# ---------------------------------------------------------------------------


def clt_r_n(n: int) -> float:
    """The 1-d c.d.f. premise radius ``logloglog n / (sqrt(n) loglog n)``
    (plain iterated logs; positive for n >= 16)."""
    lll = math.log(math.log(math.log(max(n, 16))))
    return lll / (math.sqrt(n) * cloglog(n))


def _run_clt_premise(spec: StudySpec) -> StudyResult:
    exponent = float(spec.weight.get("clt_exponent", 1.0))
    wclt = sim.CltWeight(exponent)
    q = float(spec.extras.get("q", 2.0))
    deltas = spec.extras.get("delta_grid", (0.25, 0.125, 0.0625, 0.03125))
    rows = []
    psi_tables = {}
    for n in spec.n_grid:
        seed_n = derive_seed(spec.seed, n)
        r_n = clt_r_n(n)
        grid = peel.build_grid(r_n, 0.5, q)
        fc = fcm.half_line()
        res = sim.estimate_psi_beta(fc, grid, peel.NormWeight("power", 1.0), n, spec.reps,
                                    seed_n, spec.workers)
        table = [(hi, summ.mean, summ.stderr)
                 for hi, summ in zip(grid.hi, res.slice_summaries) if summ.reps > 0]
        psi_tables[n] = table
        for hi, m, se in table:
            rows.append({"study": "clt-premise", "class": "halfline", "n": n, "rep": "summary",
                         "statistic": f"psi_hat@{hi:.6g}", "value": float(m), "seed": seed_n})
    report = sim.clt_premise_check(wclt, list(spec.n_grid), clt_r_n, q, psi_tables, deltas)
    for name, cond in report.conditions.items():
        rows.append({"study": "clt-premise", "class": "halfline", "n": spec.n_grid[-1],
                     "rep": "summary", "statistic": f"verdict{name}",
                     "value": 1.0 if cond["verdict"] == "pass" else 0.0, "seed": spec.seed})
    return StudyResult(spec, rows, {"report": report, "psi_tables": psi_tables})


# ---------------------------------------------------------------------------
# bound tables and the oracle passthrough
# ---------------------------------------------------------------------------


def _run_bound_table(spec: StudySpec) -> StudyResult:
    op = spec.problem.get("op", "ratio-t2")
    rows = []
    for n in spec.n_grid:
        p = spec.problem
        if op == "ratio-t2":
            upper, lower = peel.ratio_bound_t2(n, float(p.get("r", 0.1)), float(p.get("delta", 0.5)),
                                               float(p.get("q", 2.0)), float(p.get("beta", 0.0)),
                                               float(p.get("s", 4.0)), mode=p.get("mode", "shape"))
            reports = [("upper", upper)] + ([("lower", lower)] if lower is not None else [])
        elif op == "ratio-t1":
            rep = peel.ratio_bound_t1(n, float(p.get("r", 0.1)), float(p.get("delta", 0.5)),
                                      float(p.get("q", 2.0)), float(p.get("beta", 0.0)),
                                      float(p.get("s", 4.0)), float(p.get("t", 4.0)))
            reports = [("two-sided", rep)]
        elif op == "ratio-talpha":
            rep = peel.ratio_bound_talpha(n, float(p.get("r", 0.1)), float(p.get("delta", 0.5)),
                                          float(p.get("q", 2.0)), float(p.get("beta", 0.0)),
                                          float(p.get("s", 4.0)), float(p.get("alpha", 1.5)))
            reports = [("two-sided", rep)]
        else:
            raise ConfigError(f"unknown bound op {op!r}")
        for tag, report in reports:
            rows.append({"study": f"bound/{op}", "class": tag, "n": n, "rep": "summary",
                         "statistic": "radius", "value": float(report.radius), "seed": spec.seed})
            rows.append({"study": f"bound/{op}", "class": tag, "n": n, "rep": "summary",
                         "statistic": "prob", "value": float(report.prob_bound), "seed": spec.seed})
    return StudyResult(spec, rows)


def _run_oracle(spec: StudySpec) -> StudyResult:
    probs = spec.problem.get("probs", (0.5, 0.5))
    dict_rows = spec.problem.get("dict", ((1.0, 0.0),))
    if isinstance(dict_rows[0], (int, float)):
        dict_rows = (dict_rows,)
    stat_kind = spec.problem.get("statistic", "sup_abs")
    n = spec.n_grid[0] if spec.n_grid else 2
    rows_arr = np.asarray(dict_rows, dtype=float)
    p = np.asarray(probs, dtype=float)
    stat = sim.stat_sup_abs(rows_arr, p) if stat_kind == "sup_abs" else sim.stat_sup_ratio(rows_arr, p)
    law = sim.exact_small_oracle(list(probs), n, stat)
    rows = []
    for k, (v, pr) in enumerate(zip(law.values, law.probs)):
        rows.append({"study": "oracle", "class": stat_kind, "n": n, "rep": str(k),
                     "statistic": "atom-value", "value": float(v), "seed": spec.seed})
        rows.append({"study": "oracle", "class": stat_kind, "n": n, "rep": str(k),
                     "statistic": "atom-prob", "value": float(pr), "seed": spec.seed})
    return StudyResult(spec, rows, {"law": law})


def run_study(spec: StudySpec) -> StudyResult:
    """Execute a study; deterministic given the spec (seed included)."""
    if spec.kind == "ratio-scaling":
        return _run_ratio_scaling(spec)
    if spec.kind == "erm":
        return _run_erm(spec)
    if spec.kind == "margin":
        return _run_margin(spec)
    if spec.kind == "clt-premise":
        return _run_clt_premise(spec)
    if spec.kind == "bound-table":
        return _run_bound_table(spec)
    if spec.kind == "oracle":
        return _run_oracle(spec)
    if spec.kind == "verify":
        from .acceptance import run_acceptance

        results = run_acceptance(workers=spec.workers)
        rows = [{"study": "verify", "class": "", "n": 0, "rep": "summary",
                 "statistic": res.name, "value": 1.0 if res.passed else 0.0, "seed": spec.seed}
                for res in results]
        return StudyResult(spec, rows, {"results": results})
    raise ConfigError(f"unknown study kind {spec.kind!r}")
