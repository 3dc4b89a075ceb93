"""Hybrid severity/frequency calibration from bank summary statistics.

A bank reports per-year counts of losses above two thresholds (ũ < u), the
aggregate of losses above u and the largest loss. Severity parameters are
found by a plain grid scan matching two conditions; the Poisson rate is then
backed out from the count above u.

This module works in raw currency units (Euro), so the default thresholds
are u = 20,000 and ũ = 10,000.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from opcap.distributions import Lognormal, SeverityDistribution, make_distribution
from opcap.lda import CompoundPoissonModel, simulate, sla_var
from opcap.streams import Seed, ordered_map, substream

U_DEFAULT = 20_000.0
U_TILDE_DEFAULT = 10_000.0

FIRST_CONDITIONS = ("percentile", "maximum_heavy", "maximum_medium")
OBJECTIVES = ("sum_of_squares", "pareto_optimal")
TIE_BREAKS = ("relative", "absolute")


@dataclass(frozen=True)
class QisBankStatistics:
    """Per-year (ñ_i, n_i, S_i, M_i) with ñ counting losses above ũ and n above u."""

    n_tilde: tuple
    n: tuple
    S: tuple
    M: tuple
    u: float = U_DEFAULT
    u_tilde: float = U_TILDE_DEFAULT
    years: tuple | None = None

    def __post_init__(self):
        nt = np.asarray(self.n_tilde, dtype=np.int64)
        n = np.asarray(self.n, dtype=np.int64)
        s = np.asarray(self.S, dtype=float)
        m = np.asarray(self.M, dtype=float)
        if not (len(nt) == len(n) == len(s) == len(m)) or len(n) < 1:
            raise ValueError("need at least one year and equal-length columns")
        if not 0 < self.u_tilde < self.u:
            raise ValueError("thresholds must satisfy 0 < u_tilde < u")
        if np.any(n < 0) or np.any(nt < n):
            raise ValueError("counts must satisfy n_tilde >= n >= 0")
        if np.any(s < n * self.u * (1 - 1e-12)):
            raise ValueError("S_i must be at least n_i * u")
        if np.any((nt > 0) & (m < self.u_tilde)):
            raise ValueError("M_i must be at least u_tilde in years with losses above it")
        years = tuple(range(1, len(n) + 1)) if self.years is None else tuple(int(y) for y in self.years)
        for name, arr in (("n_tilde", nt), ("n", n), ("S", s), ("M", m)):
            object.__setattr__(self, name, tuple(arr.tolist()))
        object.__setattr__(self, "years", years)

    @property
    def n_years(self) -> int:
        return len(self.n)

    @classmethod
    def from_csv(cls, path, *, u: float = U_DEFAULT, u_tilde: float = U_TILDE_DEFAULT) -> "QisBankStatistics":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = {"year", "n_tilde", "n", "S", "M"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"statistics CSV lacks columns {sorted(missing)}")
            rows = list(reader)
        return cls(
            n_tilde=tuple(int(r["n_tilde"]) for r in rows),
            n=tuple(int(r["n"]) for r in rows),
            S=tuple(float(r["S"]) for r in rows),
            M=tuple(float(r["M"]) for r in rows),
            u=u,
            u_tilde=u_tilde,
            years=tuple(int(r["year"]) for r in rows),
        )

    def rows(self) -> list[dict]:
        return [
            {"year": y, "n_tilde": a, "n": b, "S": s, "M": m}
            for y, a, b, s, m in zip(self.years, self.n_tilde, self.n, self.S, self.M)
        ]


@dataclass(frozen=True)
class SampleAggregates:
    lambda_u: float
    lambda_u_tilde: float
    mu_u: float
    mu_m1: float
    mu_m2: float
    n_tilde_mean: float
    n_tilde_total: int
    u: float = U_DEFAULT
    u_tilde: float = U_TILDE_DEFAULT

    @property
    def frequency_ratio(self) -> float:
        """λ̂_ũ / λ̂_u, the target of the percentile condition."""
        return self.lambda_u_tilde / self.lambda_u


def aggregate_statistics(stats: QisBankStatistics) -> SampleAggregates:
    n = np.asarray(stats.n, dtype=float)
    if n.sum() <= 0:
        raise ValueError("no losses above u; the tail mean estimate is undefined")
    nt = np.asarray(stats.n_tilde, dtype=float)
    m = np.asarray(stats.M, dtype=float)
    return SampleAggregates(
        lambda_u=float(n.mean()),
        lambda_u_tilde=float(nt.mean()),
        mu_u=float(np.sum(stats.S) / n.sum()),
        mu_m1=float(m.max()),
        mu_m2=float(m.mean()),
        n_tilde_mean=float(nt.mean()),
        n_tilde_total=int(nt.sum()),
        u=stats.u,
        u_tilde=stats.u_tilde,
    )


def population_aggregates(
    rate: float, d: SeverityDistribution, u: float = U_DEFAULT, u_tilde: float = U_TILDE_DEFAULT
) -> SampleAggregates:
    """Expected counts and tail mean of a compound Poisson model (no maxima)."""
    return SampleAggregates(
        lambda_u=rate * float(d.sf(u)),
        lambda_u_tilde=rate * float(d.sf(u_tilde)),
        mu_u=float(d.conditional_tail_mean(u)),
        mu_m1=math.nan,
        mu_m2=math.nan,
        n_tilde_mean=rate * float(d.sf(u_tilde)),
        n_tilde_total=0,
        u=u,
        u_tilde=u_tilde,
    )


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return out


def condition_residuals_lognormal(mu, sigma, agg: SampleAggregates, u: float | None = None, u_tilde: float | None = None):
    """(O1, O2) for a Lognormal severity; arrays broadcast over (mu, sigma)."""
    d = Lognormal(mu, sigma)
    u = agg.u if u is None else u
    u_tilde = agg.u_tilde if u_tilde is None else u_tilde
    o1 = percentile_condition(d, agg, u, u_tilde)
    o2 = moment_condition(d, agg, u)
    return o1, o2


def percentile_condition(d: SeverityDistribution, agg: SampleAggregates, u: float | None = None, u_tilde: float | None = None):
    """(1 - F(ũ)) / (1 - F(u)) - λ̂_ũ / λ̂_u; infinite where the survival at u vanishes."""
    u = agg.u if u is None else u
    u_tilde = agg.u_tilde if u_tilde is None else u_tilde
    out = _ratio(d.sf(u_tilde), d.sf(u)) - agg.frequency_ratio
    return float(out) if out.ndim == 0 else out


def moment_condition(d: SeverityDistribution, agg: SampleAggregates, u: float | None = None):
    """E[X | X > u] - μ̂_u."""
    u = agg.u if u is None else u
    out = _ratio(d.partial_expectation(u), d.sf(u)) - agg.mu_u
    return float(out) if out.ndim == 0 else out


def maximum_condition(
    d: SeverityDistribution,
    agg: SampleAggregates,
    u_tilde: float | None = None,
    variant: str = "heavy",
):
    """F_{X|X>ũ}(μ̂_M) - ñ/(ñ+1).

    heavy: μ̂_M is the largest yearly maximum and ñ the total count above ũ.
    medium: μ̂_M is the mean yearly maximum and ñ the mean yearly count.
    Based on E[F(X_{n,n})] = n/(n+1) for the maximum of n i.i.d. draws.
    """
    u_tilde = agg.u_tilde if u_tilde is None else u_tilde
    if variant == "heavy":
        m_hat, n_tilde = agg.mu_m1, float(agg.n_tilde_total)
    elif variant == "medium":
        m_hat, n_tilde = agg.mu_m2, agg.n_tilde_mean
    else:
        raise ValueError(f"unknown maximum-condition variant {variant!r}; use 'heavy' or 'medium'")
    if not m_hat > u_tilde:
        raise ValueError("the maximum statistic must exceed u_tilde")
    sf_t = np.asarray(d.sf(u_tilde), dtype=float)
    cond_cdf = _ratio(sf_t - np.asarray(d.sf(m_hat), dtype=float), sf_t)
    out = cond_cdf - n_tilde / (n_tilde + 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid over the two severity parameters, endpoints included."""

    p1_bounds: tuple
    p2_bounds: tuple
    p1_step: float = 0.05
    p2_step: float = 0.05

    def __post_init__(self):
        for lo, hi in (self.p1_bounds, self.p2_bounds):
            if not lo <= hi:
                raise ValueError("grid bounds must satisfy lo <= hi")
        if not (self.p1_step > 0 and self.p2_step > 0):
            raise ValueError("grid steps must be positive")
        object.__setattr__(self, "p1_bounds", tuple(float(v) for v in self.p1_bounds))
        object.__setattr__(self, "p2_bounds", tuple(float(v) for v in self.p2_bounds))

    @staticmethod
    def _axis(bounds, step):
        lo, hi = bounds
        k = int(math.floor((hi - lo) / step + 1e-9))
        # rounding keeps values like 9.35 exact in printed output
        return np.round(lo + step * np.arange(k + 1), 10)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return self._axis(self.p1_bounds, self.p1_step), self._axis(self.p2_bounds, self.p2_step)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.axes()
        p1, p2 = np.meshgrid(a, b, indexing="ij")
        return p1.ravel(), p2.ravel()

    @property
    def size(self) -> int:
        a, b = self.axes()
        return len(a) * len(b)

    def to_dict(self) -> dict:
        return {"p1_bounds": list(self.p1_bounds), "p2_bounds": list(self.p2_bounds), "p1_step": self.p1_step, "p2_step": self.p2_step}


GRID_1 = GridSpec((8.0, 12.0), (1.0, 3.0))
GRID_2 = GridSpec((6.0, 14.0), (0.5, 3.5))
GRIDS = {"grid1": GRID_1, "grid2": GRID_2}


@dataclass
class CalibrationResult:
    family: str
    params: tuple
    lam: float
    objective_value: float
    converged: bool
    grid: GridSpec
    objective: str = "sum_of_squares"
    first_condition: str = "percentile"
    residuals: tuple = (math.nan, math.nan)
    u: float = U_DEFAULT

    def distribution(self) -> SeverityDistribution:
        return make_distribution(self.family, *self.params)

    def model(self) -> CompoundPoissonModel:
        return CompoundPoissonModel.single(self.lam, self.distribution())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = list(self.params)
        out["residuals"] = list(self.residuals)
        out["grid"] = self.grid.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)


class GridEvaluator:
    """Data-independent grid quantities, reused across many samples."""

    def __init__(self, family: str, grid: GridSpec, u: float = U_DEFAULT, u_tilde: float = U_TILDE_DEFAULT):
        self.family = family
        self.grid = grid
        self.u = u
        self.u_tilde = u_tilde
        self.p1, self.p2 = grid.points()
        self.dist = make_distribution(family, self.p1, self.p2)
        self.sf_u = np.asarray(self.dist.sf(u), dtype=float)
        self.sf_ut = np.asarray(self.dist.sf(u_tilde), dtype=float)
        self.survival_ratio = _ratio(self.sf_ut, self.sf_u)
        self.tail_mean = _ratio(self.dist.partial_expectation(u), self.sf_u)

    def residuals(self, agg: SampleAggregates, first_condition: str = "percentile") -> tuple[np.ndarray, np.ndarray]:
        if first_condition == "percentile":
            o1 = self.survival_ratio - agg.frequency_ratio
        elif first_condition in ("maximum_heavy", "maximum_medium"):
            o1 = np.asarray(maximum_condition(self.dist, agg, self.u_tilde, first_condition.split("_")[1]))
        else:
            raise ValueError(f"unknown condition {first_condition!r}; choose from {FIRST_CONDITIONS}")
        o2 = self.tail_mean - agg.mu_u
        return o1, o2

    def calibrate(
        self,
        agg: SampleAggregates,
        objective: str = "sum_of_squares",
        first_condition: str = "percentile",
        tie_break: str = "relative",
    ) -> CalibrationResult:
        o1, o2 = self.residuals(agg, first_condition)
        finite = np.isfinite(o1) & np.isfinite(o2)
        ss = np.where(finite, o1 * o1 + o2 * o2, np.inf)
        if not finite.any():
            return CalibrationResult(
                self.family, (math.nan, math.nan), math.nan, math.inf, False, self.grid, objective, first_condition, (math.inf, math.inf), self.u
            )
        if objective == "sum_of_squares":
            idx = _lexicographic_argmin(ss, self.p1, self.p2)
        elif objective == "pareto_optimal":
            idx = pareto_pick(o1, o2, self.p1, self.p2, agg, first_condition, tie_break)
        else:
            raise ValueError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")
        sf_u = float(self.sf_u[idx])
        converged = bool(finite[idx] and sf_u > 0)
        lam = agg.lambda_u / sf_u if converged else math.nan
        return CalibrationResult(
            self.family,
            (float(self.p1[idx]), float(self.p2[idx])),
            lam,
            float(ss[idx]),
            converged,
            self.grid,
            objective,
            first_condition,
            (float(o1[idx]), float(o2[idx])),
            self.u,
        )


def _lexicographic_argmin(score, p1, p2) -> int:
    best = np.flatnonzero(score == score.min())
    if len(best) == 1:
        return int(best[0])
    order = np.lexsort((p2[best], p1[best]))
    return int(best[order[0]])


def weak_pareto_mask(a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Points for which no other point is strictly smaller in both coordinates."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    order = np.argsort(a1, kind="stable")
    s1, s2 = a1[order], a2[order]
    mask = np.zeros(len(a1), dtype=bool)
    # running minimum of a2 over points with strictly smaller a1
    best = np.inf
    i = 0
    n = len(s1)
    while i < n:
        j = i
        while j < n and s1[j] == s1[i]:
            j += 1
        mask[order[i:j]] = ~(s2[i:j] > best)
        best = min(best, float(s2[i:j].min()))
        i = j
    return mask & np.isfinite(a1) & np.isfinite(a2)


def pareto_pick(o1, o2, p1, p2, agg: SampleAggregates, first_condition: str = "percentile", tie_break: str = "relative") -> int:
    """One point from the weak Pareto set of (|O1|, |O2|).

    ``absolute`` picks the smallest O1^2 + O2^2 in the set; ``relative``
    first divides each residual by the size of its target, so that the two
    conditions are weighed on a common scale. Remaining ties go to the
    lexicographically smallest parameter pair.
    """
    a1, a2 = np.abs(o1), np.abs(o2)
    mask = weak_pareto_mask(a1, a2)
    if tie_break == "absolute":
        score = o1 * o1 + o2 * o2
    elif tie_break == "relative":
        t1 = agg.frequency_ratio if first_condition == "percentile" else 1.0
        score = (o1 / t1) ** 2 + (o2 / agg.mu_u) ** 2
    else:
        raise ValueError(f"unknown tie-break {tie_break!r}; choose from {TIE_BREAKS}")
    score = np.where(mask, score, np.inf)
    return _lexicographic_argmin(score, np.asarray(p1), np.asarray(p2))


def grid_search_calibrate(
    agg: SampleAggregates,
    family: str = "lognormal",
    grid: GridSpec = GRID_1,
    objective: str = "sum_of_squares",
    *,
    first_condition: str = "percentile",
    tie_break: str = "relative",
) -> CalibrationResult:
    return GridEvaluator(family, grid, agg.u, agg.u_tilde).calibrate(agg, objective, first_condition, tie_break)


def estimate_lambda(d: SeverityDistribution, lambda_u: float, u: float = U_DEFAULT) -> float:
    """λ̂ = λ̂_u / (1 - F(u))."""
    surv = float(d.sf(u))
    if not surv > 0:
        raise ValueError("F(u) = 1 under the fitted severity; the rate cannot be backed out")
    return lambda_u / surv


@dataclass(frozen=True)
class FilterOutcome:
    passed: bool
    reasons: tuple = ()
    proportion_above_u: float = math.nan
    losses_per_bn_assets: float = math.nan


PROPORTION_RANGE = (0.01, 0.40)
FREQUENCY_PER_ASSETS_RANGE = (0.1, 70.0)


def opcar_filters(candidate: CalibrationResult, total_assets_bn: float, lambda_u: float) -> FilterOutcome:
    """Plausibility screens for a fitted model.

    proportion: share of losses above u, λ̂_u / λ̂, within [1%, 40%].
    frequency/assets: fitted annual loss count per Euro billion of total
    assets within [0.1, 70].
    convergence: the grid search produced a finite optimum.
    """
    reasons = []
    if not candidate.converged or not math.isfinite(candidate.lam) or candidate.lam <= 0:
        return FilterOutcome(False, ("convergence",))
    prop = lambda_u / candidate.lam
    per_assets = candidate.lam / total_assets_bn
    if not PROPORTION_RANGE[0] <= prop <= PROPORTION_RANGE[1]:
        reasons.append("proportion")
    if not FREQUENCY_PER_ASSETS_RANGE[0] <= per_assets <= FREQUENCY_PER_ASSETS_RANGE[1]:
        reasons.append("frequency/assets")
    return FilterOutcome(not reasons, tuple(reasons), prop, per_assets)


def model_average_var(results: Sequence[CalibrationResult], alpha: float = 0.999) -> float:
    """Mean single-loss-approximation VaR (λ - 1 mean term) over surviving models."""
    results = list(results)
    if not results:
        raise ValueError("no surviving models to average")
    return math.fsum(sla_var(r.model(), alpha, "opcar", unit=1.0) for r in results) / len(results)


def statistics_from_sample(sample, u: float = U_DEFAULT, u_tilde: float = U_TILDE_DEFAULT) -> QisBankStatistics:
    """Summarize simulated years (amounts in the calibration unit)."""
    return QisBankStatistics(
        n_tilde=tuple(sample.exceedance_counts(u_tilde).tolist()),
        n=tuple(sample.exceedance_counts(u).tolist()),
        S=tuple(sample.exceedance_totals(u).tolist()),
        M=tuple(sample.maxima().tolist()),
        u=u,
        u_tilde=u_tilde,
    )


def simulate_qis_statistics(
    model: CompoundPoissonModel,
    years: int,
    seed: Seed,
    *,
    u: float = U_DEFAULT,
    u_tilde: float = U_TILDE_DEFAULT,
) -> QisBankStatistics:
    sample = simulate(model, years, seed, unit=1.0, threads=1)
    return statistics_from_sample(sample, u, u_tilde)


def calibration_study(
    seed: Seed,
    *,
    rate: float = 1000.0,
    mu: float = 10.0,
    sigma: float = 2.0,
    blocks: int = 200,
    years: int = 5,
    grid: GridSpec = GRID_1,
    tie_break: str = "relative",
    alpha: float = 0.999,
    threads: int | None = None,
) -> dict:
    """Repeated calibration of Poisson-Lognormal data, one substream per block.

    Returns per-block rows and, per objective, the mean and root-mean-square
    error of the estimates against the data-generating values. VaR uses the
    single-loss approximation with the λ mean term.
    """
    model = CompoundPoissonModel.poisson_lognormal(rate, mu, sigma)
    evaluator = GridEvaluator("lognormal", grid)

    def run(b):
        stats = simulate_qis_statistics(model, years, substream(seed, b))
        agg = aggregate_statistics(stats)
        row = {
            "block": b,
            "lambda_u_tilde": agg.lambda_u_tilde,
            "lambda_u": agg.lambda_u,
            "mu_u": agg.mu_u,
        }
        for tag, objective in (("obj1", "sum_of_squares"), ("obj2", "pareto_optimal")):
            res = evaluator.calibrate(agg, objective, tie_break=tie_break)
            var = sla_var(res.model(), alpha, "lognormal_closed_form", unit=1.0) if res.converged else math.nan
            row.update(
                {
                    f"mu_{tag}": res.params[0],
                    f"sigma_{tag}": res.params[1],
                    f"lambda_{tag}": res.lam,
                    f"var_{tag}": var,
                }
            )
        return row

    rows = ordered_map(run, range(blocks), threads)
    truth = {
        "mu": mu,
        "sigma": sigma,
        "lambda": rate,
        "var": sla_var(model, alpha, "lognormal_closed_form", unit=1.0),
    }
    summary = {}
    for key in ("lambda_u_tilde", "lambda_u", "mu_u"):
        v = np.array([r[key] for r in rows])
        summary[key] = {"mean": float(v.mean()), "sd": float(v.std(ddof=1)) if len(v) > 1 else 0.0}
    for tag in ("obj1", "obj2"):
        for name, true in truth.items():
            v = np.array([r[f"{name}_{tag}"] for r in rows])
            summary[f"{name}_{tag}"] = {
                "mean": float(np.nanmean(v)),
                "rmse": float(np.sqrt(np.nanmean((v - true) ** 2))),
            }
    return {"rows": rows, "summary": summary, "truth": truth}
