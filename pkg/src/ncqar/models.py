"""
Quantile (non)causal autoregressions and the classical companions used around them: OLS AR fits, Hannan-Quinn
order selection, residual diagnostics and the approximate t maximum likelihood baseline.
"""
import enum
import logging
import math
import typing
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DataError,
    DegeneracyError,
    InsufficientDataError,
    ParameterDomainError,
)
from .quantile_solver import QuantileFit, RegressionProblem, solve, solve_many, solve_restricted

__all__ = (
    "Direction",
    "ModelSpec",
    "OlsFit",
    "AmlFit",
    "Diagnostics",
    "DEFAULT_P_MAX",
    "as_series",
    "build_design",
    "fit_qar",
    "fit_qar_many",
    "fit_ols_ar",
    "hq_criteria",
    "select_order_hq",
    "aml_residuals",
    "aml_loglik",
    "fit_aml_t",
    "residual_diagnostics",
)

log = logging.getLogger(__name__)

DEFAULT_P_MAX = 8
AML_BUDGET = 50_000
AML_RESTARTS = 6


class Direction(str, enum.Enum):
    CAUSAL = "causal"
    NONCAUSAL = "noncausal"

    @property
    def opposite(self) -> "Direction":
        return Direction.NONCAUSAL if self is Direction.CAUSAL else Direction.CAUSAL

    @classmethod
    def parse(cls, value: typing.Union[str, "Direction"]) -> "Direction":
        try:
            return cls(str(value.value if isinstance(value, Direction) else value).strip().lower())
        except ValueError:
            raise ConfigurationError(f"direction must be 'causal' or 'noncausal', got {value!r}") from None


@dataclass(frozen=True)
class ModelSpec:
    direction: Direction
    p: int = 1
    restricted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction.parse(self.direction))
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            raise ParameterDomainError(f"model order p must be an integer >= 1, got {self.p!r}")

    @property
    def label(self) -> str:
        prefix = "R" if self.restricted else ""
        return f"{prefix}Q{'C' if self.direction is Direction.CAUSAL else 'NC'}AR({self.p})"

    def to_mapping(self) -> dict:
        return {"direction": self.direction.value, "p": int(self.p), "restricted": self.restricted}


def as_series(series: typing.Sequence[float]) -> np.ndarray:
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise DataError(f"series must be one-dimensional, got shape {values.shape}")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise DataError("series contains a non-finite value", row=int(bad[0]) + 1)
    return values


def build_design(series: typing.Sequence[float], model: ModelSpec) -> RegressionProblem:
    """
    Regression problem of a QCAR(p) (lags) or QNCAR(p) (leads) model.

    Both directions use exactly T - p rows: causal drops the first p observations, noncausal the last p.
    A restricted model marks the rows whose regressors are all nonnegative.
    """
    y = as_series(series)
    T, p = y.size, model.p
    if T <= 2 * p + 2:
        raise InsufficientDataError(f"series of length {T} is too short for order {p}", n_effective=max(T - p, 0))
    n = T - p
    if model.direction is Direction.CAUSAL:
        response = y[p:]
        regressors = [y[p - i : T - i] for i in range(1, p + 1)]
    else:
        response = y[:n]
        regressors = [y[i : i + n] for i in range(1, p + 1)]
    design = np.column_stack([np.ones(n)] + regressors)
    mask = np.all(design >= 0.0, axis=1) if model.restricted else None
    return RegressionProblem(design, response, mask)


def fit_qar(series: typing.Sequence[float], model: ModelSpec, tau: float) -> QuantileFit:
    problem = build_design(series, model)
    if model.restricted:
        return solve_restricted(problem, tau)
    return solve(problem, tau)


def fit_qar_many(series: typing.Sequence[float], model: ModelSpec, taus: typing.Iterable[float]):
    """``fit_qar`` at several levels at once, sharing the design and warm-starting the solver."""
    return solve_many(build_design(series, model), taus, restricted=model.restricted)


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray  # intercept first, then lags 1..k
    residuals: np.ndarray
    sigma2: float
    design: np.ndarray

    @property
    def n(self) -> int:
        return self.residuals.size


def fit_ols_ar(series: typing.Sequence[float], k: int, start: typing.Optional[int] = None) -> OlsFit:
    """
    Least-squares AR(k) with intercept on rows ``start..T-1`` (0-based, ``start`` defaults to ``k``).
    sigma2 is the residual sum of squares over the number of rows.
    """
    y = as_series(series)
    start = k if start is None else start
    if start < k:
        raise ConfigurationError(f"start ({start}) must be >= k ({k})")
    n = y.size - start
    if n <= k + 1:
        raise InsufficientDataError(f"not enough rows for an AR({k}) fit", n_effective=max(n, 0))
    design = np.column_stack([np.ones(n)] + [y[start - i : y.size - i] for i in range(1, k + 1)])
    coefficients, *_ = np.linalg.lstsq(design, y[start:], rcond=None)
    residuals = y[start:] - design @ coefficients
    return OlsFit(coefficients, residuals, float(residuals @ residuals) / n, design)


def hq_criteria(series: typing.Sequence[float], p_max: int = DEFAULT_P_MAX) -> typing.Dict[int, float]:
    """Hannan-Quinn values ln(sigma2_k) + 2k ln(ln n)/n for k = 1..p_max on the common sample t > p_max."""
    if not isinstance(p_max, (int, np.integer)) or p_max < 1:
        raise ParameterDomainError(f"p_max must be an integer >= 1, got {p_max!r}")
    y = as_series(series)
    if y.size <= 3 * p_max:
        raise InsufficientDataError(
            f"series of length {y.size} is too short for p_max={p_max}", n_effective=y.size - p_max
        )
    if np.ptp(y) == 0.0:
        raise DegeneracyError(
            "series is constant; AR lags are collinear with the intercept", columns=range(1, p_max + 1)
        )
    n = y.size - p_max
    penalty = 2.0 * math.log(math.log(n)) / n
    criteria = {}
    for k in range(1, p_max + 1):
        fit = fit_ols_ar(y, k, start=p_max)
        if fit.sigma2 <= 0.0:
            raise InsufficientDataError("series is fitted exactly by an AR model", n_effective=n)
        criteria[k] = math.log(fit.sigma2) + k * penalty
    return criteria


def select_order_hq(series: typing.Sequence[float], p_max: int = DEFAULT_P_MAX) -> int:
    criteria = hq_criteria(series, p_max)
    order = min(criteria, key=lambda k: (criteria[k], k))
    log.debug("Hannan-Quinn criteria %s -> p=%d", criteria, order)
    return order


@dataclass(frozen=True)
class AmlFit:
    pi: typing.Tuple[float, ...]
    phi: typing.Tuple[float, ...]
    intercept: float
    sigma: float
    nu: float
    loglik: float
    n_evaluations: int = 0

    @property
    def coefficients(self) -> typing.Tuple[float, ...]:
        return self.pi + self.phi

    def to_mapping(self) -> dict:
        return {
            "pi": list(self.pi),
            "phi": list(self.phi),
            "intercept": self.intercept,
            "sigma": self.sigma,
            "nu": self.nu,
            "loglik": self.loglik,
            "n_evaluations": self.n_evaluations,
        }


def aml_residuals(y: np.ndarray, pi: typing.Sequence[float], phi: typing.Sequence[float], alpha: float):
    """eps_t = pi(L) phi(L^-1) y_t - alpha for t = r+1..T-s (1-based)."""
    r, s = len(pi), len(phi)
    T = y.size
    u = y[: T - s].copy()  # phi(L^-1) y_t for t = 1..T-s
    for j, coefficient in enumerate(phi, start=1):
        u -= coefficient * y[j : T - s + j]
    eps = u[r:].copy()
    for i, coefficient in enumerate(pi, start=1):
        eps -= coefficient * u[r - i : u.size - i]
    return eps - alpha


def aml_loglik(
    series: typing.Sequence[float],
    pi: typing.Sequence[float],
    phi: typing.Sequence[float],
    alpha: float,
    sigma: float,
    nu: float,
) -> float:
    """Approximate conditional log-likelihood of a MAR(r,s) with non-standardised t innovations."""
    if sigma <= 0.0 or nu <= 0.0:
        raise ParameterDomainError(f"sigma and nu must be > 0, got sigma={sigma!r}, nu={nu!r}")
    eps = aml_residuals(as_series(series), pi, phi, alpha)
    constant = gammaln((nu + 1.0) / 2.0) - 0.5 * math.log(nu * math.pi) - gammaln(nu / 2.0) - math.log(sigma)
    return float(eps.size * constant - (nu + 1.0) / 2.0 * np.sum(np.log1p((eps / sigma) ** 2 / nu)))


def _aml_start(y: np.ndarray, r: int, s: int) -> np.ndarray:
    pi = fit_ols_ar(y, r).coefficients[1:] if r else np.zeros(0)
    phi = fit_ols_ar(y[::-1], s).coefficients[1:] if s else np.zeros(0)
    eps = aml_residuals(y, pi, phi, 0.0)
    alpha = float(np.median(eps))
    scale = float(stats.median_abs_deviation(eps, scale="normal"))
    if not scale > 0.0:
        scale = float(np.std(eps)) or 1.0
    return np.r_[pi, phi, alpha, math.log(scale), math.log(5.0)]


def fit_aml_t(series: typing.Sequence[float], r: int, s: int, *, budget: int = AML_BUDGET) -> AmlFit:
    """
    Maximises ``aml_loglik`` by Nelder-Mead with restarts, starting from OLS coefficients in each direction and
    a median intercept. sigma and nu are optimised on the log scale.

    :raises ConvergenceError: If the evaluation budget runs out first. ``best`` holds the best AmlFit found.
    """
    if r < 0 or s < 0 or r + s < 1:
        raise ParameterDomainError(f"need r, s >= 0 and r + s >= 1, got r={r}, s={s}")
    y = as_series(series)
    if y.size <= 2 * (r + s) + 3:
        raise InsufficientDataError(f"series of length {y.size} is too short", n_effective=y.size - r - s)

    def unpack(x: np.ndarray):
        return x[:r], x[r : r + s], x[r + s], math.exp(x[r + s + 1]), math.exp(x[r + s + 2])

    def negative(x: np.ndarray) -> float:
        pi, phi, alpha, sigma, nu = unpack(x)
        if not (math.isfinite(sigma) and math.isfinite(nu)) or sigma <= 0.0 or nu <= 0.0:
            return math.inf
        value = aml_loglik(y, pi, phi, alpha, sigma, nu)
        return -value if math.isfinite(value) else math.inf

    x = _aml_start(y, r, s)
    best_value = negative(x)
    evaluations = 1
    converged = False
    for restart in range(AML_RESTARTS):
        remaining = budget - evaluations
        if remaining <= 0:
            break
        result = optimize.minimize(
            negative,
            x,
            method="Nelder-Mead",
            options={"maxfev": remaining, "xatol": 1e-8, "fatol": 1e-10, "adaptive": True},
        )
        evaluations += int(result.nfev)
        improved = best_value - result.fun
        if result.fun <= best_value:
            x, best_value = result.x, float(result.fun)
        log.debug("AML restart %d: loglik %.6f (nfev=%d, ok=%s)", restart, -best_value, result.nfev, result.success)
        if result.success and improved <= 1e-9 * (1.0 + abs(best_value)):
            converged = True
            break

    pi, phi, alpha, sigma, nu = unpack(x)
    fit = AmlFit(
        pi=tuple(float(v) for v in pi),
        phi=tuple(float(v) for v in phi),
        intercept=float(alpha),
        sigma=sigma,
        nu=nu,
        loglik=aml_loglik(y, pi, phi, alpha, sigma, nu),
        n_evaluations=evaluations,
    )
    if not converged:
        raise ConvergenceError(f"AML did not converge within {budget} evaluations", best=fit)
    return fit


@dataclass(frozen=True)
class Diagnostics:
    order: int
    n: int
    skewness: float
    kurtosis: float
    jarque_bera_pvalue: float
    lm_pvalue: float
    arch_pvalue: float

    def to_mapping(self) -> dict:
        return {
            "HQ": self.order,
            "n": self.n,
            "BJ": self.jarque_bera_pvalue,
            "skew": self.skewness,
            "kurt": self.kurtosis,
            "LM[1-2]": self.lm_pvalue,
            "ARCH[1-2]": self.arch_pvalue,
        }


def _auxiliary_lm(target: np.ndarray, regressors: np.ndarray, df: int) -> float:
    """p-value of the n*R^2 statistic of an auxiliary regression."""
    coefficients, *_ = np.linalg.lstsq(regressors, target, rcond=None)
    fitted = regressors @ coefficients
    centred = target - target.mean()
    total = float(centred @ centred)
    if total <= 0.0:
        return 1.0
    r2 = 1.0 - float((target - fitted) @ (target - fitted)) / total
    return float(stats.chi2.sf(target.size * max(r2, 0.0), df))


def _lagged(values: np.ndarray, lags: int) -> np.ndarray:
    """Columns values_{t-1}..values_{t-lags}, with zeros before the start."""
    columns = []
    for lag in range(1, lags + 1):
        column = np.zeros_like(values)
        column[lag:] = values[:-lag]
        columns.append(column)
    return np.column_stack(columns)


def residual_diagnostics(series: typing.Sequence[float], p: typing.Optional[int] = None, lags: int = 2) -> Diagnostics:
    """
    Descriptive statistics of OLS AR(p) residuals: skewness, kurtosis, Jarque-Bera normality, Breusch-Godfrey
    autocorrelation LM and Engle ARCH LM at lags 1..``lags``. ``p`` defaults to the Hannan-Quinn order.
    """
    y = as_series(series)
    if p is None:
        p = select_order_hq(y, min(DEFAULT_P_MAX, max(1, (y.size - 1) // 3)))
    fit = fit_ols_ar(y, p)
    e = fit.residuals
    lm = _auxiliary_lm(e, np.column_stack([fit.design, _lagged(e, lags)]), lags)
    squared = e**2
    arch = _auxiliary_lm(squared[lags:], np.column_stack([np.ones(e.size), _lagged(squared, lags)])[lags:], lags)
    return Diagnostics(
        order=int(p),
        n=int(e.size),
        skewness=float(stats.skew(e)),
        kurtosis=float(stats.kurtosis(e, fisher=False)),
        jarque_bera_pvalue=float(stats.jarque_bera(e).pvalue),
        lm_pvalue=lm,
        arch_pvalue=arch,
    )
