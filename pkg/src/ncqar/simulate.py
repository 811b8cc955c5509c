"""
MAR(r,s) sample paths, pi(L) phi(L^-1) y_t = intercept + eps_t.

Two generators share one innovation stream:

* the matrix method solves L U y = eps with L lower-triangular banded (lag coefficients) and U upper-triangular
  banded (lead coefficients), treating values before the sample and after it as zero;
* the recursive method runs the lead polynomial backward from a zero terminal value and then the lag polynomial
  forward from zero initial values.

Both trim ``burn_in`` points from each end, after which the boundary assumptions have washed out.
"""
import logging
import math
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.signal import lfilter

from .distributions import DistributionSpec, quantile, sample, sample_uniform
from .errors import ConfigurationError, ParameterDomainError, StationarityError

__all__ = (
    "MarSpec",
    "SimConfig",
    "RegimeSpec",
    "MaCoefficients",
    "DEFAULT_BURN_IN",
    "STATIONARITY_MARGIN",
    "polynomial_roots",
    "companion_moduli",
    "check_stationary",
    "innovations",
    "solve_mar_matrix",
    "solve_mar_recursive",
    "simulate_mar_matrix",
    "simulate_mar_recursive",
    "simulate_mar",
    "simulate_two_regime",
    "ma_coefficients",
)

log = logging.getLogger(__name__)

DEFAULT_BURN_IN = 200
STATIONARITY_MARGIN = 1e-10


def polynomial_roots(coefficients: typing.Sequence[float]) -> np.ndarray:
    """Roots of 1 - c1 z - ... - ck z^k."""
    if not len(coefficients):
        return np.zeros(0, dtype=complex)
    # np.roots wants the highest power first
    return np.roots(np.r_[-np.asarray(coefficients, dtype=float)[::-1], 1.0])


def companion_moduli(coefficients: typing.Sequence[float]) -> np.ndarray:
    """Moduli of the companion-matrix eigenvalues of 1 - c1 z - ... - ck z^k (inverse root moduli)."""
    k = len(coefficients)
    if k == 0:
        return np.zeros(0)
    companion = np.zeros((k, k))
    companion[0, :] = coefficients
    if k > 1:
        companion[1:, :-1] = np.eye(k - 1)
    return np.abs(np.linalg.eigvals(companion))


def check_stationary(pi: typing.Sequence[float], phi: typing.Sequence[float]) -> None:
    """Raises StationarityError unless every root of pi(z) and phi(z) lies strictly outside the unit circle."""
    for name, coefficients in (("pi", pi), ("phi", phi)):
        moduli = companion_moduli(coefficients)
        if moduli.size and moduli.max() >= 1.0 - STATIONARITY_MARGIN:
            raise StationarityError(
                f"{name}(z) has a root on or inside the unit circle (inverse root modulus {moduli.max():.6g})",
                polynomial=name,
                modulus=float(moduli.max()),
            )


@dataclass(frozen=True)
class MarSpec:
    """Lag coefficients ``pi`` (r of them), lead coefficients ``phi`` (s of them) and an intercept."""

    pi: typing.Tuple[float, ...] = ()
    phi: typing.Tuple[float, ...] = ()
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pi", tuple(float(c) for c in self.pi))
        object.__setattr__(self, "phi", tuple(float(c) for c in self.phi))
        if not all(math.isfinite(c) for c in self.pi + self.phi + (self.intercept,)):
            raise ParameterDomainError("MAR coefficients must be finite")
        check_stationary(self.pi, self.phi)

    @property
    def r(self) -> int:
        return len(self.pi)

    @property
    def s(self) -> int:
        return len(self.phi)

    @classmethod
    def causal(cls, *pi: float, intercept: float = 0.0) -> "MarSpec":
        return cls(pi=pi, intercept=intercept)

    @classmethod
    def noncausal(cls, *phi: float, intercept: float = 0.0) -> "MarSpec":
        return cls(phi=phi, intercept=intercept)

    def to_mapping(self) -> dict:
        return {"pi": list(self.pi), "phi": list(self.phi), "intercept": self.intercept}


@dataclass(frozen=True)
class SimConfig:
    total_length: int
    seed: int
    burn_in: int = DEFAULT_BURN_IN
    innovation: DistributionSpec = field(default_factory=DistributionSpec)

    def __post_init__(self):
        if self.total_length < 1:
            raise ConfigurationError(f"total_length must be >= 1, got {self.total_length}")
        if self.burn_in < 0:
            raise ConfigurationError(f"burn_in must be >= 0, got {self.burn_in}")

    @property
    def retained_length(self) -> int:
        return self.total_length - 2 * self.burn_in

    def validate_for(self, r: int, s: int) -> None:
        if self.total_length <= 2 * self.burn_in + r + s:
            raise ConfigurationError(
                f"total_length ({self.total_length}) must exceed 2*burn_in + r + s "
                f"({2 * self.burn_in + r + s})"
            )

    def to_mapping(self) -> dict:
        return {
            "total_length": self.total_length,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "innovation": self.innovation.to_mapping(),
        }


@dataclass(frozen=True)
class RegimeSpec:
    """Random-coefficient noncausal AR(1): beta1 when tau_t <= tau_star, beta2 otherwise."""

    tau_star: float
    beta1: float
    beta2: float
    innovation_quantile: DistributionSpec = field(default_factory=DistributionSpec)

    def __post_init__(self):
        if not 0.0 < self.tau_star < 1.0:
            raise ParameterDomainError(f"tau_star must lie in (0, 1), got {self.tau_star!r}")

    def to_mapping(self) -> dict:
        return {
            "tau_star": self.tau_star,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "innovation": self.innovation_quantile.to_mapping(),
        }


def innovations(cfg: SimConfig) -> np.ndarray:
    """The innovation stream both MAR generators consume, one draw per simulated point."""
    return sample(cfg.innovation, cfg.total_length, cfg.seed)


def _lower_band(pi: typing.Sequence[float], n: int) -> np.ndarray:
    # solve_banded layout for (l, u) = (r, 0): row k holds the k-th subdiagonal
    band = np.zeros((len(pi) + 1, n))
    band[0, :] = 1.0
    for k, coefficient in enumerate(pi, start=1):
        band[k, : n - k] = -coefficient
    return band


def _upper_band(phi: typing.Sequence[float], n: int) -> np.ndarray:
    # solve_banded layout for (l, u) = (0, s): row s - k holds the k-th superdiagonal
    s = len(phi)
    band = np.zeros((s + 1, n))
    band[s, :] = 1.0
    for k, coefficient in enumerate(phi, start=1):
        band[s - k, k:] = -coefficient
    return band


def solve_mar_matrix(spec: MarSpec, eps: np.ndarray) -> np.ndarray:
    """y = U^-1 L^-1 (intercept + eps) over the whole buffer, no trimming."""
    forcing = spec.intercept + np.asarray(eps, dtype=float)
    n = forcing.size
    z = forcing
    if spec.r:
        z = solve_banded((spec.r, 0), _lower_band(spec.pi, n), z, check_finite=False)
    if spec.s:
        z = solve_banded((0, spec.s), _upper_band(spec.phi, n), z, check_finite=False)
    return np.array(z, dtype=float, copy=True)


def solve_mar_recursive(spec: MarSpec, eps: np.ndarray) -> np.ndarray:
    """Lead polynomial backward from zero, then lag polynomial forward from zero. No trimming."""
    forcing = spec.intercept + np.asarray(eps, dtype=float)
    v = forcing
    if spec.s:
        v = lfilter([1.0], np.r_[1.0, -np.asarray(spec.phi)], v[::-1])[::-1]
    if spec.r:
        v = lfilter([1.0], np.r_[1.0, -np.asarray(spec.pi)], v)
    return np.array(v, dtype=float, copy=True)


def _trim(path: np.ndarray, burn_in: int) -> np.ndarray:
    return path[burn_in : path.size - burn_in]


def simulate_mar_matrix(spec: MarSpec, cfg: SimConfig) -> np.ndarray:
    """MAR(r,s) path by two banded triangular solves, burn-in trimmed from both ends."""
    cfg.validate_for(spec.r, spec.s)
    return _trim(solve_mar_matrix(spec, innovations(cfg)), cfg.burn_in)


def simulate_mar_recursive(spec: MarSpec, cfg: SimConfig) -> np.ndarray:
    """MAR(r,s) path by backward then forward recursion, burn-in trimmed from both ends."""
    cfg.validate_for(spec.r, spec.s)
    return _trim(solve_mar_recursive(spec, innovations(cfg)), cfg.burn_in)


def simulate_mar(spec: MarSpec, cfg: SimConfig, method: typing.Literal["matrix", "recursive"] = "matrix"):
    if method == "matrix":
        return simulate_mar_matrix(spec, cfg)
    if method == "recursive":
        return simulate_mar_recursive(spec, cfg)
    raise ConfigurationError(f"Unknown simulation method {method!r}")


def simulate_two_regime(regime: RegimeSpec, cfg: SimConfig) -> np.ndarray:
    """
    y_t = beta(tau_t) y_{t+1} + F^-1(tau_t), generated backward from y = 0 past the end of the buffer.

    The tau_t stream is the package's uniform stream for ``cfg.seed``; ``cfg.innovation`` is not used, the
    innovation law is the regime's own ``innovation_quantile``.
    """
    cfg.validate_for(0, 1)
    taus = sample_uniform(cfg.total_length, cfg.seed)
    shocks = np.asarray(quantile(regime.innovation_quantile, taus), dtype=float)
    coefficients = np.where(taus <= regime.tau_star, regime.beta1, regime.beta2)
    path = np.empty(cfg.total_length)
    following = 0.0
    for t in range(cfg.total_length - 1, -1, -1):
        following = coefficients[t] * following + shocks[t]
        path[t] = following
    return _trim(path, cfg.burn_in)


@dataclass(frozen=True)
class MaCoefficients:
    """Two-sided MA weights a_{-K}..a_{K}; ``values[K + i]`` multiplies eps_{t-i}."""

    K: int
    values: np.ndarray
    tail_bound: float
    decay_rate: float

    def __getitem__(self, i: int) -> float:
        if abs(i) > self.K:
            raise IndexError(i)
        return float(self.values[self.K + i])

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)


def _power_series_inverse(coefficients: typing.Sequence[float], length: int) -> np.ndarray:
    """First ``length`` coefficients of 1 / (1 - c1 z - ... - ck z^k)."""
    impulse = np.zeros(length)
    impulse[0] = 1.0
    return lfilter([1.0], np.r_[1.0, -np.asarray(coefficients, dtype=float)], impulse)


def ma_coefficients(spec: MarSpec, K: typing.Optional[int] = None) -> MaCoefficients:
    """
    Truncated Laurent expansion of pi(L)^-1 phi(L^-1)^-1.

    :param spec: A stationary MAR specification
    :param K: Number of lags (and leads) to return. Defaults to the smallest K >= 50 with rate**K below 1e-12.
    :return: The coefficients plus a geometric estimate of the absolute mass beyond K
    """
    rate = float(max(np.r_[companion_moduli(spec.pi), companion_moduli(spec.phi), 0.0]))
    if K is None:
        K = 50 if rate == 0.0 else max(50, math.ceil(math.log(1e-12) / math.log(rate)) + spec.r + spec.s)
    if K < 1:
        raise ParameterDomainError(f"K must be >= 1, got {K!r}")
    padding = 0 if rate == 0.0 else min(20_000, math.ceil(math.log(1e-18) / math.log(rate)))
    length = K + padding + spec.r + spec.s + 1
    lags = _power_series_inverse(spec.pi, length)
    leads = _power_series_inverse(spec.phi, length)

    values = np.empty(2 * K + 1)
    for m in range(-K, K + 1):
        start = max(0, -m)
        stop = length - max(0, m)
        values[K + m] = np.dot(lags[start + m : stop + m], leads[start:stop])

    edge = max(abs(values[0]), abs(values[-1]))
    tail = 0.0 if rate == 0.0 else 2.0 * edge * rate / (1.0 - rate)
    log.debug("Laurent expansion with K=%d, decay rate %.4g, tail estimate %.3g", K, rate, tail)
    return MaCoefficients(K=K, values=values, tail_bound=tail, decay_rate=rate)
