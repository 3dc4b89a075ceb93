"""Parametric severity distributions for operational loss amounts.

All families are two-parameter positive-loss models. Parameters may be
numpy arrays, in which case every method broadcasts over them (this is
what the calibration grid search relies on).

Conventions
-----------
Lognormal(mu, sigma)
    log X ~ Normal(mu, sigma**2).
Gamma(shape, scale)
    mean shape*scale, variance shape*scale**2.
Pareto(shape, scale)
    survival (scale/x)**shape for x >= scale (Pareto type I).
LogGamma(shape, rate)
    X = exp(Y) with Y ~ Gamma(shape, rate); support x >= 1.
LogLogistic(shape, scale)
    cdf 1 / (1 + (x/scale)**-shape).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special

from opcap.rootfind import bisect_increasing

ArrayLike = Union[float, np.ndarray]


class InfiniteMeanError(ValueError):
    """Raised when a quantity needs E[X] but the parameterization has none."""


def _check_positive(name: str, value) -> None:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive and finite, got {value!r}")


def _check_probability(p, *, name: str = "p") -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0)) or np.any(~(arr < 1)):
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {p!r}")
    return arr


def _scalar(x):
    arr = np.asarray(x)
    return float(arr) if arr.ndim == 0 else arr


class SeverityDistribution:
    """Common interface. Subclasses implement cdf, sf, isf, mean, sampling."""

    def cdf(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def sf(self, x: ArrayLike) -> ArrayLike:
        return _scalar(1.0 - np.asarray(self.cdf(x)))

    def quantile(self, p: ArrayLike) -> ArrayLike:
        """Smallest x with cdf(x) >= p, for p in (0, 1)."""
        raise NotImplementedError

    def isf(self, q: ArrayLike) -> ArrayLike:
        """Inverse survival function, quantile(1 - q) without cancellation."""
        q = _check_probability(q, name="q")
        return self.quantile(1.0 - q)

    def mean(self) -> ArrayLike:
        raise NotImplementedError

    def partial_expectation(self, threshold: ArrayLike) -> ArrayLike:
        """E[X * 1{X > threshold}]."""
        raise NotImplementedError

    def conditional_tail_mean(self, threshold: ArrayLike) -> ArrayLike:
        """E[X | X > threshold] = partial_expectation / survival."""
        surv = np.asarray(self.sf(threshold), dtype=float)
        if np.any(surv <= 0):
            raise ValueError("threshold lies beyond the support; conditional mean undefined")
        return _scalar(np.asarray(self.partial_expectation(threshold)) / surv)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def _require_finite_mean(self, finite) -> None:
        if not np.all(finite):
            raise InfiniteMeanError(f"{self!r} has infinite mean")


@dataclass(frozen=True)
class Lognormal(SeverityDistribution):
    mu: ArrayLike
    sigma: ArrayLike

    def __post_init__(self):
        if not np.all(np.isfinite(np.asarray(self.mu, dtype=float))):
            raise ValueError(f"mu must be finite, got {self.mu!r}")
        _check_positive("sigma", self.sigma)

    def _z(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (np.log(x) - self.mu) / self.sigma

    def cdf(self, x):
        return _scalar(special.ndtr(self._z(x)))

    def sf(self, x):
        return _scalar(special.ndtr(-self._z(x)))

    def quantile(self, p):
        p = _check_probability(p)
        return _scalar(np.exp(self.mu + self.sigma * special.ndtri(p)))

    def isf(self, q):
        q = _check_probability(q, name="q")
        return _scalar(np.exp(self.mu - self.sigma * special.ndtri(q)))

    def mean(self):
        return _scalar(np.exp(self.mu + 0.5 * np.square(self.sigma)))

    def partial_expectation(self, threshold):
        # e^{mu + sigma^2/2} * Phi((sigma^2 + mu - ln t) / sigma); t = 0 gives the mean
        t = np.asarray(threshold, dtype=float)
        with np.errstate(divide="ignore"):
            arg = (np.square(self.sigma) + self.mu - np.log(t)) / self.sigma
        return _scalar(np.exp(self.mu + 0.5 * np.square(self.sigma)) * special.ndtr(arg))

    def sample(self, rng, size):
        z = rng.standard_normal(int(size))
        z *= self.sigma
        z += self.mu
        np.exp(z, out=z)
        return z


@dataclass(frozen=True)
class Gamma(SeverityDistribution):
    shape: ArrayLike
    scale: ArrayLike

    def __post_init__(self):
        _check_positive("shape", self.shape)
        _check_positive("scale", self.scale)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _scalar(special.gammainc(self.shape, x / self.scale))

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _scalar(special.gammaincc(self.shape, x / self.scale))

    def quantile(self, p):
        p = _check_probability(p)
        return _scalar(self.scale * special.gammaincinv(self.shape, p))

    def isf(self, q):
        q = _check_probability(q, name="q")
        return _scalar(self.scale * special.gammainccinv(self.shape, q))

    def mean(self):
        return _scalar(np.multiply(self.shape, self.scale))

    def partial_expectation(self, threshold):
        t = np.maximum(np.asarray(threshold, dtype=float), 0.0)
        return _scalar(
            np.multiply(self.shape, self.scale) * special.gammaincc(np.add(self.shape, 1.0), t / self.scale)
        )

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, int(size))


@dataclass(frozen=True)
class Pareto(SeverityDistribution):
    shape: ArrayLike
    scale: ArrayLike

    def __post_init__(self):
        _check_positive("shape", self.shape)
        _check_positive("scale", self.scale)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        ratio = np.asarray(self.scale / np.maximum(x, self.scale), dtype=float)
        return _scalar(np.power(ratio, self.shape))

    def cdf(self, x):
        return _scalar(1.0 - np.asarray(self.sf(x)))

    def quantile(self, p):
        p = _check_probability(p)
        return _scalar(self.scale * np.power(1.0 - p, -1.0 / np.asarray(self.shape)))

    def isf(self, q):
        q = _check_probability(q, name="q")
        return _scalar(self.scale * np.power(q, -1.0 / np.asarray(self.shape)))

    def mean(self):
        shape = np.asarray(self.shape, dtype=float)
        self._require_finite_mean(shape > 1)
        return _scalar(shape * self.scale / (shape - 1.0))

    def partial_expectation(self, threshold):
        shape = np.asarray(self.shape, dtype=float)
        self._require_finite_mean(shape > 1)
        t = np.maximum(np.asarray(threshold, dtype=float), self.scale)
        # shape * scale^shape * t^(1-shape) / (shape-1), equal to the mean for t <= scale
        out = shape * self.scale / (shape - 1.0) * np.power(self.scale / t, shape - 1.0)
        return _scalar(out)

    def sample(self, rng, size):
        # numpy's pareto draws Lomax; shifting by one gives Pareto type I
        return self.scale * (1.0 + rng.pareto(self.shape, int(size)))


@dataclass(frozen=True)
class LogGamma(SeverityDistribution):
    shape: ArrayLike
    rate: ArrayLike

    def __post_init__(self):
        _check_positive("shape", self.shape)
        _check_positive("rate", self.rate)

    def _y(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.maximum(np.log(np.maximum(x, 1.0)), 0.0)

    def cdf(self, x):
        return _scalar(special.gammainc(self.shape, np.multiply(self.rate, self._y(x))))

    def sf(self, x):
        return _scalar(special.gammaincc(self.shape, np.multiply(self.rate, self._y(x))))

    def quantile(self, p):
        p = _check_probability(p)
        return _scalar(np.exp(special.gammaincinv(self.shape, p) / self.rate))

    def isf(self, q):
        q = _check_probability(q, name="q")
        return _scalar(np.exp(special.gammainccinv(self.shape, q) / self.rate))

    def mean(self):
        rate = np.asarray(self.rate, dtype=float)
        self._require_finite_mean(rate > 1)
        return _scalar(np.power(rate / (rate - 1.0), self.shape))

    def partial_expectation(self, threshold):
        rate = np.asarray(self.rate, dtype=float)
        self._require_finite_mean(rate > 1)
        y = self._y(threshold)
        return _scalar(np.power(rate / (rate - 1.0), self.shape) * special.gammaincc(self.shape, (rate - 1.0) * y))

    def sample(self, rng, size):
        return np.exp(rng.gamma(self.shape, 1.0 / np.asarray(self.rate), int(size)))


@dataclass(frozen=True)
class LogLogistic(SeverityDistribution):
    shape: ArrayLike
    scale: ArrayLike

    def __post_init__(self):
        _check_positive("shape", self.shape)
        _check_positive("scale", self.scale)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return _scalar(special.expit(self.shape * (np.log(x) - np.log(self.scale))))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return _scalar(special.expit(-self.shape * (np.log(x) - np.log(self.scale))))

    def quantile(self, p):
        p = _check_probability(p)
        return _scalar(self.scale * np.exp(special.logit(p) / self.shape))

    def isf(self, q):
        q = _check_probability(q, name="q")
        return _scalar(self.scale * np.exp(-special.logit(q) / self.shape))

    def mean(self):
        shape = np.asarray(self.shape, dtype=float)
        self._require_finite_mean(shape > 1)
        b = np.pi / shape
        return _scalar(self.scale * b / np.sin(b))

    def partial_expectation(self, threshold):
        # substituting u = F(x) turns the tail integral into an incomplete beta
        shape = np.asarray(self.shape, dtype=float)
        self._require_finite_mean(shape > 1)
        u = np.asarray(self.cdf(threshold), dtype=float)
        return _scalar(np.asarray(self.mean()) * special.betaincc(1.0 + 1.0 / shape, 1.0 - 1.0 / shape, u))

    def sample(self, rng, size):
        u = rng.random(int(size))
        return self.scale * np.exp(special.logit(u) / self.shape)


@dataclass(frozen=True)
class Mixture(SeverityDistribution):
    """Finite mixture; the severity of a merged compound Poisson process."""

    weights: tuple
    components: tuple
    _w: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.components) or len(w) == 0:
            raise ValueError("weights and components must be nonempty and of equal length")
        if np.any(w <= 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-12):
            raise ValueError("mixture weights must be positive and sum to one")
        object.__setattr__(self, "_w", w)

    def cdf(self, x):
        return _scalar(sum(w * np.asarray(c.cdf(x)) for w, c in zip(self._w, self.components)))

    def sf(self, x):
        return _scalar(sum(w * np.asarray(c.sf(x)) for w, c in zip(self._w, self.components)))

    def mean(self):
        return float(sum(w * c.mean() for w, c in zip(self._w, self.components)))

    def partial_expectation(self, threshold):
        return _scalar(
            sum(w * np.asarray(c.partial_expectation(threshold)) for w, c in zip(self._w, self.components))
        )

    def _invert(self, target: float, use_sf: bool) -> float:
        # the mixture quantile lies between the extreme component quantiles
        if use_sf:
            pts = [c.isf(target) for c in self.components]

            def func(x):
                return target - self.sf(x)
        else:
            pts = [c.quantile(target) for c in self.components]

            def func(x):
                return self.cdf(x) - target

        return bisect_increasing(func, min(pts), max(pts), rtol=1e-13, log_scale=True)

    def quantile(self, p):
        p = _check_probability(p)
        if p.ndim:
            return np.array([self._invert(float(v), False) for v in p.ravel()]).reshape(p.shape)
        return self._invert(float(p), False)

    def isf(self, q):
        q = _check_probability(q, name="q")
        if q.ndim:
            return np.array([self._invert(float(v), True) for v in q.ravel()]).reshape(q.shape)
        return self._invert(float(q), True)

    def sample(self, rng, size):
        size = int(size)
        which = rng.choice(len(self._w), size=size, p=self._w)
        out = np.empty(size)
        for k, comp in enumerate(self.components):
            mask = which == k
            out[mask] = comp.sample(rng, int(mask.sum()))
        return out


FAMILIES = {
    "lognormal": Lognormal,
    "gamma": Gamma,
    "pareto": Pareto,
    "loggamma": LogGamma,
    "loglogistic": LogLogistic,
}


def make_distribution(family: str, *params) -> SeverityDistribution:
    """Build a distribution from a family name and its two parameters."""
    try:
        cls = FAMILIES[family.lower().replace("-", "").replace("_", "")]
    except KeyError:
        raise ValueError(f"unknown severity family {family!r}; choose from {sorted(FAMILIES)}") from None
    return cls(*params)


def sample(d: SeverityDistribution, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. losses from ``d`` using the caller's generator."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return d.sample(rng, count)
