"""Capital regressions on bank-level indicators.

Linear least squares over any covariate subset, and a one-covariate
nonlinear model R(x) = x F(x) with a power-type coefficient function

    F(x) = theta (x - A)^(1 - alpha) / (1 - alpha),  theta >= 0, 0 <= alpha < 1, A <= 0,

fitted by least squares or by the quantile (check) loss.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

ALPHA_MAX = 1.0 - 1e-9


class RankDeficientError(ValueError):
    def __init__(self, columns: Sequence[str]):
        self.columns = tuple(columns)
        super().__init__(f"design matrix is rank deficient; collinear columns: {', '.join(self.columns)}")


@dataclass
class RegressionDataset:
    y: np.ndarray
    X: np.ndarray
    names: tuple

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        self.X = X
        if self.names is None:
            self.names = tuple(f"x{i + 1}" for i in range(X.shape[1]))
        self.names = tuple(self.names)
        if X.shape[0] != len(self.y) or len(self.names) != X.shape[1]:
            raise ValueError("response length, design rows and column names must agree")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(X))):
            raise ValueError("dataset contains missing or non-finite values")

    @property
    def n_obs(self) -> int:
        return len(self.y)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.X[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"no covariate named {name!r}") from None

    @classmethod
    def from_csv(cls, path, response: str = "y") -> "RegressionDataset":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = [[float(v) for v in row] for row in reader if row]
        if response not in header:
            raise ValueError(f"CSV has no response column {response!r}")
        arr = np.asarray(data, dtype=float).reshape(len(data), len(header))
        j = header.index(response)
        names = tuple(h for i, h in enumerate(header) if i != j)
        return cls(arr[:, j], np.delete(arr, j, axis=1), names)


@dataclass
class OlsResult:
    names: tuple
    coef: np.ndarray
    stderr: np.ndarray
    r_squared: float
    residual_variance: float
    residuals: np.ndarray
    intercept: bool

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "coef": self.coef.tolist(),
            "stderr": self.stderr.tolist(),
            "r_squared": self.r_squared,
            "residual_variance": self.residual_variance,
            "intercept": self.intercept,
        }


def _collinear_columns(A: np.ndarray, names: Sequence[str], tol: float) -> list[str]:
    # pivoted QR moves dependent columns to the end; report the trailing ones
    _, R, piv = linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > tol * d[0])) if d.size and d[0] > 0 else 0
    return [names[i] for i in piv[rank:]]


def ols_fit(
    data: RegressionDataset,
    covariates: Sequence[str] | None = None,
    *,
    intercept: bool = True,
    weights: np.ndarray | None = None,
) -> OlsResult:
    """Least squares on the chosen covariates; ``weights`` gives weighted least squares."""
    cols = list(data.names if covariates is None else covariates)
    X = np.column_stack([data.column(c) for c in cols]) if cols else np.empty((data.n_obs, 0))
    names = (["intercept"] if intercept else []) + cols
    if intercept:
        X = np.column_stack([np.ones(data.n_obs), X])
    p = X.shape[1]
    if p == 0:
        raise ValueError("no parameters to fit")
    if data.n_obs <= p:
        raise ValueError(f"need more observations ({data.n_obs}) than parameters ({p})")
    y = data.y
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != y.shape or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite, nonnegative and one per observation")
        sw = np.sqrt(w)
        Xw, yw = X * sw[:, None], y * sw
    else:
        Xw, yw = X, y
    tol = max(Xw.shape) * np.finfo(float).eps
    coef, _, rank, _ = np.linalg.lstsq(Xw, yw, rcond=tol)
    if rank < p:
        raise RankDeficientError(_collinear_columns(Xw, names, tol) or names[-1:])
    resid_w = yw - Xw @ coef
    dof = data.n_obs - p
    s2 = float(resid_w @ resid_w) / dof
    xtx_inv = np.linalg.inv(Xw.T @ Xw)
    stderr = np.sqrt(np.maximum(np.diag(xtx_inv) * s2, 0.0))
    if intercept:
        ybar = np.average(y, weights=weights)
        tss = float(np.sum((weights if weights is not None else 1.0) * (y - ybar) ** 2))
    else:
        tss = float(yw @ yw)
    r2 = 1.0 - float(resid_w @ resid_w) / tss if tss > 0 else math.nan
    return OlsResult(tuple(names), coef, stderr, r2, s2, y - X @ coef, intercept)


def simple_linear_fit(data: RegressionDataset, covariate: str) -> OlsResult:
    return ols_fit(data, [covariate])


@dataclass(frozen=True)
class PowerCoefficientModel:
    theta: float
    alpha: float
    A: float = 0.0

    def __post_init__(self):
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise ValueError("theta must be finite and nonnegative")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if not (self.A <= 0 and math.isfinite(self.A)):
            raise ValueError("A must be finite and nonpositive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PowerEval:
    F: np.ndarray
    dF: np.ndarray
    R: np.ndarray
    dR: np.ndarray
    d2R: np.ndarray


def power_model_eval(m: PowerCoefficientModel, x) -> PowerEval:
    """F, F', R = xF, R' = F + xF' and R'' = 2F' + xF''."""
    if m.alpha >= 1:
        raise ValueError("alpha = 1 is the logarithmic limit; the power form needs alpha < 1")
    x = np.asarray(x, dtype=float)
    if np.any(x <= m.A):
        raise ValueError("the power model needs x > A")
    z = x - m.A
    F = m.theta * z ** (1.0 - m.alpha) / (1.0 - m.alpha)
    dF = m.theta * z ** (-m.alpha)
    d2F = -m.alpha * m.theta * z ** (-m.alpha - 1.0)
    return PowerEval(F, dF, x * F, F + x * dF, 2.0 * dF + x * d2F)


def check_loss(y, tau: float):
    """Quantile loss rho_tau(y) = y (tau - 1{y < 0})."""
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    y = np.asarray(y, dtype=float)
    out = y * (tau - (y < 0))
    return float(out) if out.ndim == 0 else out


@dataclass
class PowerFit:
    model: PowerCoefficientModel
    objective: str
    loss: float
    tau: float | None = None

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "objective": self.objective, "loss": self.loss, "tau": self.tau}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _basis(x, alpha, A):
    # R(x) = theta * g(x) with g = x (x - A)^(1 - alpha) / (1 - alpha)
    return x * (x - A) ** (1.0 - alpha) / (1.0 - alpha)


def power_objective(params, x, y, objective: str, tau: float | None) -> float:
    theta, alpha, A = params
    if np.any(x <= A):
        return math.inf
    r = y - theta * _basis(x, alpha, A)
    if objective == "least_squares":
        return float(r @ r)
    return float(np.sum(check_loss(r, tau)))


def power_model_fit(
    x,
    y,
    objective: str = "least_squares",
    tau: float | None = None,
    *,
    alpha_starts: Sequence[float] = tuple(np.round(np.arange(0.0, 1.0, 0.1), 10)),
) -> PowerFit:
    """Constrained fit of R(x) = x F(x) by deterministic multi-start local search.

    Starting values: alpha on the given grid, A in {0, -mean(x), -10 mean(x)}
    and theta from the least-squares profile at each (alpha, A), scaled by
    {0.1, 1, 10}. Each start is polished with bounded L-BFGS-B (least
    squares) or Powell (quantile loss).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape or len(x) < 4:
        raise ValueError("need at least 4 paired observations")
    if objective not in ("least_squares", "quantile"):
        raise ValueError("objective must be 'least_squares' or 'quantile'")
    if objective == "quantile" and tau is None:
        raise ValueError("the quantile objective needs tau")
    if objective == "quantile":
        check_loss(0.0, tau)
    if np.any(x <= 0):
        raise ValueError("covariate values must be positive so that x > A holds for some A <= 0")
    xbar = float(x.mean())
    bounds = [(0.0, None), (0.0, ALPHA_MAX - 1e-6), (-100.0 * xbar, 0.0)]

    def f(p):
        return power_objective(p, x, y, objective, tau)

    best = None
    for alpha in alpha_starts:
        for A in (0.0, -xbar, -10.0 * xbar):
            g = _basis(x, alpha, A)
            theta0 = max(float(g @ y) / float(g @ g), 0.0) if float(g @ g) > 0 else 0.0
            for scale in (0.1, 1.0, 10.0):
                start = np.array([theta0 * scale, alpha, A])
                if objective == "least_squares":
                    res = optimize.minimize(f, start, method="L-BFGS-B", bounds=bounds)
                else:
                    res = optimize.minimize(f, start, method="Powell", bounds=bounds)
                val = f(res.x)
                if best is None or val < best[0]:
                    best = (val, res.x)
    theta, alpha, A = best[1]
    model = PowerCoefficientModel(max(float(theta), 0.0), float(min(max(alpha, 0.0), ALPHA_MAX)), float(min(A, 0.0)))
    return PowerFit(model, objective, float(best[0]), tau)


def synthetic_dataset(
    n_obs: int, coef: Sequence[float], noise_sd: float, seed, *, intercept: float = 0.0
) -> RegressionDataset:
    """BI-like lognormal covariates and a linear response with Gaussian noise."""
    from opcap.streams import generator

    rng = generator(seed)
    coef = np.asarray(coef, dtype=float)
    X = rng.lognormal(7.0, 1.0, size=(n_obs, len(coef)))
    y = intercept + X @ coef + noise_sd * rng.standard_normal(n_obs)
    return RegressionDataset(y, X, tuple(f"x{i + 1}" for i in range(len(coef))))
