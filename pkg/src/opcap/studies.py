"""Capital studies built on the SMA formula and compound Poisson models.

All amounts are Euro million unless a name ends in ``_bn``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from opcap import sma
from opcap.distributions import Gamma, Lognormal
from opcap.lda import (
    EURO_MILLION,
    CompoundPoissonModel,
    long_term_lc,
    mc_var,
    simulate,
    sla_var,
)
from opcap.rootfind import NoRootError, bisect_increasing
from opcap.streams import Seed, ordered_map, substream

BUCKET1_CAP = 110.0  # K_SMA at the top of bucket 1


def solve_bi(target: float, lc: float, *, rtol: float = 1e-13) -> float:
    """BI such that k_sma(BI, lc) equals ``target``.

    Bucket 1 ignores LC, so targets up to 110 invert exactly to target/0.11.
    Above that K_SMA increases strictly in BI, and the root is bracketed
    from BI = 1000 upward.
    """
    if not (math.isfinite(target) and target > 0):
        raise NoRootError(f"target capital must be positive and finite, got {target!r}")
    if lc < 0 or not math.isfinite(lc):
        raise ValueError("lc must be finite and nonnegative")
    if target <= BUCKET1_CAP:
        return target / 0.11
    return bisect_increasing(
        lambda bi: sma.k_sma(bi, lc) - target, 1000.0, 1e9, rtol=rtol, log_scale=True
    )


def implied_bi(
    model: CompoundPoissonModel,
    alpha: float = 0.999,
    method: str = "sla",
    *,
    years: int = 1_000_000,
    seed: Seed | None = None,
    unit: float = EURO_MILLION,
    L: float = sma.DEFAULT_L,
    H: float = sma.DEFAULT_H,
    threads: int | None = None,
) -> float:
    """BI at which long-run SMA capital equals the model's annual VaR."""
    if method == "sla":
        var = sla_var(model, alpha, "corrected", unit=unit)
    elif method == "mc":
        if seed is None:
            raise ValueError("the mc method needs an explicit seed")
        var = mc_var(model, alpha, years, seed, unit=unit, threads=threads).value
    else:
        raise ValueError(f"unknown VaR method {method!r}; use 'sla' or 'mc'")
    return solve_bi(var, long_term_lc(model, L, H, unit=unit))


GRID_MUS = (10.0, 12.0, 14.0)
GRID_SIGMAS = (1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0)


def implied_bi_grid(
    rate: float = 10.0, mus: Sequence[float] = GRID_MUS, sigmas: Sequence[float] = GRID_SIGMAS, alpha: float = 0.999
) -> list[dict]:
    """Implied BI (Euro billion, SLA) over a (mu, sigma) grid of Poisson-Lognormal models."""
    rows = []
    for mu in mus:
        for sigma in sigmas:
            bi = implied_bi(CompoundPoissonModel.poisson_lognormal(rate, mu, sigma), alpha)
            rows.append({"lambda": rate, "mu": mu, "sigma": sigma, "implied_bi_bn": bi / 1000.0})
    return rows


def bank_models(sigma: float) -> dict[str, CompoundPoissonModel]:
    """Small, medium and large banks: frequent Gamma losses plus rare Lognormal ones."""
    return {
        size: CompoundPoissonModel(((990.0, Gamma(1.0, beta)), (10.0, Lognormal(mu, sigma))))
        for size, beta, mu in (("small", 1e4, 10.0), ("medium", 1e5, 12.0), ("large", 5e5, 14.0))
    }


TEST_CASES = {"tc1": 2.5, "tc2": 2.8}


@dataclass(frozen=True)
class InstabilityStudySpec:
    model: CompoundPoissonModel
    bi: float
    horizon: int = 1000
    window: int = 10
    burn_in: int = 10

    def __post_init__(self):
        if not self.horizon > self.window >= 1:
            raise ValueError("need horizon > window >= 1")
        if self.burn_in < self.window - 1:
            raise ValueError("burn_in must cover a full LC window (burn_in >= window - 1)")
        if not (math.isfinite(self.bi) and self.bi >= 0):
            raise ValueError("bi must be finite and nonnegative")


@dataclass
class InstabilitySeries:
    years: np.ndarray
    lc: np.ndarray
    capital: np.ndarray
    ratio: np.ndarray
    long_term_lc: float
    long_term_capital: float

    def rows(self) -> list[dict]:
        return [
            {"year": int(y), "lc": float(l), "k_sma": float(k), "ratio": float(r)}
            for y, l, k, r in zip(self.years, self.lc, self.capital, self.ratio)
        ]


def yearly_lc_contributions(sample, L: float = sma.DEFAULT_L, H: float = sma.DEFAULT_H) -> np.ndarray:
    """Per-year 7*total + 7*(above L) + 5*(above H); its window mean is the loss component."""
    w1, w2, w3 = sma.LC_WEIGHTS
    return w1 * sample.totals() + w2 * sample.exceedance_totals(L) + w3 * sample.exceedance_totals(H)


def instability_series(
    spec: InstabilityStudySpec,
    seed: Seed,
    *,
    unit: float = EURO_MILLION,
    threads: int | None = None,
) -> InstabilitySeries:
    """Yearly SMA capital from a trailing LC window, relative to its long-run value."""
    total_years = spec.burn_in + spec.horizon
    sample = simulate(spec.model, total_years, seed, unit=unit, threads=threads)
    contrib = yearly_lc_contributions(sample)
    csum = np.concatenate(([0.0], np.cumsum(contrib)))
    t = np.arange(spec.burn_in, total_years)
    lc = (csum[t + 1] - csum[t + 1 - spec.window]) / spec.window
    capital = np.array([sma.k_sma(spec.bi, v) for v in lc])
    ltl = long_term_lc(spec.model, unit=unit)
    kbar = sma.k_sma(spec.bi, ltl)
    return InstabilitySeries(t - spec.burn_in + 1, lc, capital, capital / kbar, ltl, kbar)


def summarize_ratios(ratios: np.ndarray) -> dict:
    """Boxplot statistics: quartiles and 1.5 IQR whiskers clipped to the data."""
    r = np.asarray(ratios, dtype=float)
    q1, med, q3 = np.percentile(r, [25, 50, 75])
    iqr = q3 - q1
    lo = float(r[r >= q1 - 1.5 * iqr].min())
    hi = float(r[r <= q3 + 1.5 * iqr].max())
    return {
        "min": float(r.min()),
        "whisker_lo": lo,
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "whisker_hi": hi,
        "max": float(r.max()),
        "mean": float(r.mean()),
    }


SENSITIVITY_SIGMAS = (2.0, 2.25, 2.5, 2.75, 3.0)


def sensitivity_model(sigma: float) -> CompoundPoissonModel:
    return CompoundPoissonModel(((990.0, Gamma(1.0, 5e5)), (10.0, Lognormal(14.0, sigma))))


def sensitivity_boxplot_data(
    sigmas: Sequence[float],
    seed: Seed,
    *,
    bi: float | None = None,
    horizon: int = 1000,
    window: int = 10,
    burn_in: int = 10,
    threads: int | None = None,
) -> list[dict]:
    """Ratio summaries per severity sigma for the large-bank model.

    With ``bi=None`` each sigma uses its own implied BI (SLA), so the
    long-run SMA capital equals the model VaR.
    """
    sigmas = list(sigmas)
    if not sigmas:
        raise ValueError("sigma list must be nonempty")
    out = []
    for k, sigma in enumerate(sigmas):
        model = sensitivity_model(sigma)
        b = implied_bi(model) if bi is None else float(bi)
        series = instability_series(
            InstabilityStudySpec(model, b, horizon, window, burn_in), substream(seed, k), threads=threads
        )
        out.append({"sigma": float(sigma), "bi": b, **summarize_ratios(series.ratio)})
    return out


def superadditivity_gap(joint: tuple[float, float], entities: Sequence[tuple[float, float]]) -> float:
    """K_SMA(joint) minus the sum of entity K_SMA; positive means super-additive."""
    if not entities:
        raise ValueError("need at least one entity")
    return sma.k_sma(*joint) - math.fsum(sma.k_sma(bi, lc) for bi, lc in entities)


def capital_gap(joint_capital: float, entity_capitals: Sequence[float]) -> float:
    """Gap computed directly from capital figures."""
    return float(joint_capital) - math.fsum(entity_capitals)


@dataclass(frozen=True)
class SplitSpec:
    """Split of a bank into ``m`` entities.

    By default the entities are similar: each gets the joint model with
    rates divided by m, plus BI/m and LC/m. ``entity_models`` overrides the
    entity loss models (BI is still split evenly).
    """

    model: CompoundPoissonModel
    m: int = 2
    entity_models: tuple | None = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.entity_models is not None and len(self.entity_models) != self.m:
            raise ValueError("entity_models must have exactly m entries")


def split_analysis(spec: SplitSpec, alpha: float = 0.999, *, unit: float = EURO_MILLION) -> dict:
    bi = implied_bi(spec.model, alpha, unit=unit)
    lc = long_term_lc(spec.model, unit=unit)
    sma_joint = sma.k_sma(bi, lc)
    m = spec.m
    if spec.entity_models is None:
        entity = spec.model.scaled(1.0 / m)
        entity_lc = [lc / m] * m
        entity_lda = [sla_var(entity, alpha, unit=unit)] * m
    else:
        entity_lc = [long_term_lc(e, unit=unit) for e in spec.entity_models]
        entity_lda = [sla_var(e, alpha, unit=unit) for e in spec.entity_models]
    entity_sma = [sma.k_sma(bi / m, v) for v in entity_lc]
    total_sma = math.fsum(entity_sma)
    delta = sma_joint - total_sma
    under = math.fsum(entity_lda) - total_sma
    return {
        "m": m,
        "bi_joint": bi,
        "lc_joint": lc,
        "sma_joint": sma_joint,
        "lda_joint": sla_var(spec.model, alpha, unit=unit),
        "sma_entities": entity_sma,
        "lda_entities": entity_lda,
        "delta": delta,
        "relative_delta": delta / sma_joint,
        "under_capitalization": under,
        "relative_under_capitalization": under / total_sma,
    }


def superadditive_region(
    joint: CompoundPoissonModel,
    mu1_grid: Sequence[float],
    mu2_grid: Sequence[float],
    *,
    rates: tuple[float, float] = (10.0, 10.0),
    sigmas: tuple[float, float] = (2.5, 2.5),
    alpha: float = 0.999,
) -> list[dict]:
    """Two Poisson-Lognormal entities with implied BIs; flag super-additive cells.

    Each cell reports Entity 1's implied BI in Euro billion when the joint
    long-run SMA capital exceeds the sum over entities, and None otherwise.
    """
    if not mu1_grid or not mu2_grid:
        raise ValueError("grids must be nonempty")
    bi_j = implied_bi(joint, alpha)
    k_j = sma.k_sma(bi_j, long_term_lc(joint))

    def entity(rate, mu, sigma):
        model = CompoundPoissonModel.poisson_lognormal(rate, mu, sigma)
        b = implied_bi(model, alpha)
        return b, sma.k_sma(b, long_term_lc(model))

    e1 = {mu: entity(rates[0], mu, sigmas[0]) for mu in mu1_grid}
    e2 = {mu: entity(rates[1], mu, sigmas[1]) for mu in mu2_grid}
    rows = []
    for mu1 in mu1_grid:
        for mu2 in mu2_grid:
            gap = k_j - e1[mu1][1] - e2[mu2][1]
            feasible = gap > 0
            rows.append(
                {
                    "mu1": float(mu1),
                    "mu2": float(mu2),
                    "bi1_bn": e1[mu1][0] / 1000.0 if feasible else None,
                    "bi2_bn": e2[mu2][0] / 1000.0 if feasible else None,
                    "gap": gap,
                }
            )
    return rows


def instability_by_bank_size(
    sigma: float,
    seed: Seed,
    *,
    bi: float = 2000.0,
    horizon: int = 1000,
    window: int = 10,
    burn_in: int = 10,
    threads: int | None = None,
) -> dict[str, InstabilitySeries]:
    """Instability series for the three test-case banks, one substream each."""
    models = bank_models(sigma)

    def run(item):
        k, (size, model) = item
        spec = InstabilityStudySpec(model, bi, horizon, window, burn_in)
        return size, instability_series(spec, substream(seed, k))

    return dict(ordered_map(run, list(enumerate(models.items())), threads))
