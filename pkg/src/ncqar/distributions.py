"""
Innovation laws used by every data generating process in the package.

All laws are location/scale families ``x = mu + sigma * z`` over a standard core ``z``. Sampling is always done by
pushing one seeded uniform stream through the quantile function, so the same seed drives every law identically.
"""
import enum
import functools
import logging
import math
import typing
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, stats

from .errors import ConfigurationError, ParameterDomainError

__all__ = (
    "Kind",
    "DistributionSpec",
    "pdf",
    "logpdf",
    "cdf",
    "quantile",
    "mean",
    "sample",
    "sample_uniform",
    "uniform_generator",
)

log = logging.getLogger(__name__)

ArrayLike = typing.Union[float, np.ndarray, typing.Sequence[float]]
_UNIFORM_BITS = 52
_MEAN_TOLERANCE = 1e-10


class Kind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"
    CAUCHY = "cauchy"
    SKEWED_T = "skewed_t"
    UNIFORM01 = "uniform01"

    @classmethod
    def parse(cls, value: typing.Union[str, "Kind"]) -> "Kind":
        if isinstance(value, Kind):
            return value
        key = str(value).strip().casefold().replace("-", "_").replace(" ", "_")
        aliases = {
            "gaussian": cls.GAUSSIAN,
            "normal": cls.GAUSSIAN,
            "student_t": cls.STUDENT_T,
            "studentt": cls.STUDENT_T,
            "t": cls.STUDENT_T,
            "cauchy": cls.CAUCHY,
            "skewed_t": cls.SKEWED_T,
            "skewedt": cls.SKEWED_T,
            "skew_t": cls.SKEWED_T,
            "uniform01": cls.UNIFORM01,
            "uniform": cls.UNIFORM01,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigurationError(
                f"Unknown distribution kind {value!r}. Expected one of: {', '.join(k.value for k in cls)}"
            ) from None


@dataclass(frozen=True)
class DistributionSpec:
    """An innovation law. ``nu`` is used by StudentT/SkewedT, ``gamma`` and ``demeaned`` by SkewedT only."""

    kind: Kind = Kind.GAUSSIAN
    nu: typing.Optional[float] = None
    gamma: typing.Optional[float] = None
    mu: float = 0.0
    sigma: float = 1.0
    demeaned: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ParameterDomainError(f"sigma must be > 0, got {self.sigma!r}")
        if not math.isfinite(self.mu):
            raise ParameterDomainError(f"mu must be finite, got {self.mu!r}")
        if self.kind in (Kind.STUDENT_T, Kind.SKEWED_T):
            if self.nu is None or not (math.isfinite(self.nu) and self.nu > 0):
                raise ParameterDomainError(f"{self.kind.value} needs nu > 0, got {self.nu!r}")
        if self.kind is Kind.SKEWED_T:
            if self.gamma is None:
                object.__setattr__(self, "gamma", 1.0)
            if not (math.isfinite(self.gamma) and self.gamma > 0):
                raise ParameterDomainError(f"skewed_t needs gamma > 0, got {self.gamma!r}")
        if self.demeaned and self.kind is not Kind.SKEWED_T:
            raise ParameterDomainError("demeaned only applies to skewed_t")
        if self.demeaned and self.nu <= 1:
            raise ParameterDomainError("a skewed_t with nu <= 1 has no mean to subtract")

    @classmethod
    def gaussian(cls, mu: float = 0.0, sigma: float = 1.0) -> "DistributionSpec":
        return cls(Kind.GAUSSIAN, mu=mu, sigma=sigma)

    @classmethod
    def student_t(cls, nu: float, mu: float = 0.0, sigma: float = 1.0) -> "DistributionSpec":
        return cls(Kind.STUDENT_T, nu=nu, mu=mu, sigma=sigma)

    @classmethod
    def cauchy(cls, mu: float = 0.0, sigma: float = 1.0) -> "DistributionSpec":
        return cls(Kind.CAUCHY, mu=mu, sigma=sigma)

    @classmethod
    def skewed_t(cls, nu: float, gamma: float, demeaned: bool = False, mu: float = 0.0, sigma: float = 1.0):
        return cls(Kind.SKEWED_T, nu=nu, gamma=gamma, mu=mu, sigma=sigma, demeaned=demeaned)

    @classmethod
    def uniform01(cls) -> "DistributionSpec":
        return cls(Kind.UNIFORM01)

    @classmethod
    def from_mapping(cls, data: typing.Mapping[str, typing.Any]) -> "DistributionSpec":
        """Builds a spec from its ``{kind, nu, gamma, mu, sigma, demeaned}`` form. Unknown keys are rejected."""
        allowed = {"kind", "nu", "gamma", "mu", "sigma", "demeaned"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(f"Unknown distribution keys: {', '.join(sorted(unknown))}")
        if "kind" not in data:
            raise ConfigurationError("Distribution spec needs a 'kind'")
        kwargs = dict(data)
        for key in ("nu", "gamma", "mu", "sigma"):
            if kwargs.get(key) is not None:
                kwargs[key] = float(kwargs[key])
        kwargs["demeaned"] = bool(kwargs.get("demeaned", False))
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data

    def describe(self) -> str:
        match self.kind:
            case Kind.GAUSSIAN:
                core = "N(0,1)"
            case Kind.STUDENT_T:
                core = f"t({self.nu:g})"
            case Kind.CAUCHY:
                core = "Cauchy"
            case Kind.SKEWED_T:
                core = f"t({self.nu:g}, γ={self.gamma:g})" + (" demeaned" if self.demeaned else "")
            case _:
                core = "U(0,1)"
        if self.mu != 0.0 or self.sigma != 1.0:
            core += f" [mu={self.mu:g}, sigma={self.sigma:g}]"
        return core


@functools.lru_cache(maxsize=64)
def _skewed_t_core_mean(nu: float, gamma: float) -> float:
    """First moment of the standard skewed t, by quadrature on each branch."""
    c = 2.0 / (gamma + 1.0 / gamma)
    left, _ = integrate.quad(
        lambda z: z * c * stats.t.pdf(gamma * z, nu), -np.inf, 0.0, epsabs=_MEAN_TOLERANCE, epsrel=_MEAN_TOLERANCE,
        limit=500,
    )
    right, _ = integrate.quad(
        lambda z: z * c * stats.t.pdf(z / gamma, nu), 0.0, np.inf, epsabs=_MEAN_TOLERANCE, epsrel=_MEAN_TOLERANCE,
        limit=500,
    )
    log.debug("skewed t(%s, %s) core mean = %r", nu, gamma, left + right)
    return left + right


def _location(spec: DistributionSpec) -> float:
    if spec.demeaned:
        return spec.mu - spec.sigma * _skewed_t_core_mean(spec.nu, spec.gamma)
    return spec.mu


def _skewed_pdf(z: np.ndarray, nu: float, gamma: float) -> np.ndarray:
    c = 2.0 / (gamma + 1.0 / gamma)
    return np.where(z < 0, c * stats.t.pdf(gamma * z, nu), c * stats.t.pdf(z / gamma, nu))


def _skewed_logpdf(z: np.ndarray, nu: float, gamma: float) -> np.ndarray:
    c = math.log(2.0 / (gamma + 1.0 / gamma))
    return np.where(z < 0, c + stats.t.logpdf(gamma * z, nu), c + stats.t.logpdf(z / gamma, nu))


def _skewed_cdf(z: np.ndarray, nu: float, gamma: float) -> np.ndarray:
    g2 = gamma * gamma
    lower = 2.0 / (g2 + 1.0) * stats.t.cdf(gamma * z, nu)
    upper = 1.0 / (g2 + 1.0) + 2.0 * g2 / (g2 + 1.0) * (stats.t.cdf(z / gamma, nu) - 0.5)
    return np.where(z < 0, lower, upper)


def _skewed_ppf(q: np.ndarray, nu: float, gamma: float) -> np.ndarray:
    g2 = gamma * gamma
    at_zero = 1.0 / (g2 + 1.0)
    # both branches are evaluated by np.where; clip keeps the unused one inside (0, 1)
    lower_arg = np.clip(q * (g2 + 1.0) / 2.0, 0.0, 0.5)
    upper_arg = np.clip((q - at_zero) * (g2 + 1.0) / (2.0 * g2) + 0.5, 0.5, 1.0)
    return np.where(q < at_zero, stats.t.ppf(lower_arg, nu) / gamma, gamma * stats.t.ppf(upper_arg, nu))


def _standardise(spec: DistributionSpec, x: ArrayLike) -> np.ndarray:
    return (np.asarray(x, dtype=float) - _location(spec)) / spec.sigma


def _as_output(value: np.ndarray, like: ArrayLike):
    if np.ndim(like) == 0:
        return float(value)
    return value


def pdf(spec: DistributionSpec, x: ArrayLike):
    """Density f(x)."""
    z = _standardise(spec, x)
    match spec.kind:
        case Kind.GAUSSIAN:
            out = stats.norm.pdf(z)
        case Kind.STUDENT_T:
            out = stats.t.pdf(z, spec.nu)
        case Kind.CAUCHY:
            out = stats.cauchy.pdf(z)
        case Kind.SKEWED_T:
            out = _skewed_pdf(z, spec.nu, spec.gamma)
        case _:
            out = stats.uniform.pdf(z)
    return _as_output(out / spec.sigma, x)


def logpdf(spec: DistributionSpec, x: ArrayLike):
    z = _standardise(spec, x)
    match spec.kind:
        case Kind.GAUSSIAN:
            out = stats.norm.logpdf(z)
        case Kind.STUDENT_T:
            out = stats.t.logpdf(z, spec.nu)
        case Kind.CAUCHY:
            out = stats.cauchy.logpdf(z)
        case Kind.SKEWED_T:
            out = _skewed_logpdf(z, spec.nu, spec.gamma)
        case _:
            out = stats.uniform.logpdf(z)
    return _as_output(out - math.log(spec.sigma), x)


def cdf(spec: DistributionSpec, x: ArrayLike):
    """Distribution function F(x)."""
    z = _standardise(spec, x)
    match spec.kind:
        case Kind.GAUSSIAN:
            out = stats.norm.cdf(z)
        case Kind.STUDENT_T:
            out = stats.t.cdf(z, spec.nu)
        case Kind.CAUCHY:
            out = stats.cauchy.cdf(z)
        case Kind.SKEWED_T:
            out = _skewed_cdf(z, spec.nu, spec.gamma)
        case _:
            out = stats.uniform.cdf(z)
    return _as_output(out, x)


def quantile(spec: DistributionSpec, tau: ArrayLike):
    """
    Inverse distribution function F^-1(tau).

    :param spec: The innovation law
    :param tau: Probability level(s), strictly inside (0, 1)
    :raises ParameterDomainError: If any tau lies outside the open unit interval
    """
    q = np.asarray(tau, dtype=float)
    if np.any(~np.isfinite(q)) or np.any(q <= 0.0) or np.any(q >= 1.0):
        raise ParameterDomainError(f"tau must lie in (0, 1), got {tau!r}")
    match spec.kind:
        case Kind.GAUSSIAN:
            z = stats.norm.ppf(q)
        case Kind.STUDENT_T:
            z = stats.t.ppf(q, spec.nu)
        case Kind.CAUCHY:
            z = stats.cauchy.ppf(q)
        case Kind.SKEWED_T:
            z = _skewed_ppf(q, spec.nu, spec.gamma)
        case _:
            z = q
    return _as_output(_location(spec) + spec.sigma * z, tau)


def mean(spec: DistributionSpec) -> typing.Optional[float]:
    """First moment, or None when it does not exist (Cauchy, t with nu <= 1)."""
    match spec.kind:
        case Kind.GAUSSIAN:
            return spec.mu
        case Kind.STUDENT_T:
            return spec.mu if spec.nu > 1 else None
        case Kind.CAUCHY:
            return None
        case Kind.SKEWED_T:
            if spec.nu <= 1:
                return None
            if spec.demeaned:
                return spec.mu
            return spec.mu + spec.sigma * _skewed_t_core_mean(spec.nu, spec.gamma)
        case _:
            return spec.mu + 0.5 * spec.sigma


def uniform_generator(seed: int) -> np.random.Generator:
    """Counter-based generator every draw in the package comes from."""
    if not isinstance(seed, (int, np.integer)) or seed < 0 or seed >= 2**64:
        raise ParameterDomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return np.random.Generator(np.random.Philox(int(seed)))


def _cell_midpoints(bits: np.ndarray) -> np.ndarray:
    # bits < 2**52, so bits + 0.5 needs at most 53 significant bits and is exact
    return (bits.astype(float) + 0.5) / float(2**_UNIFORM_BITS)


def sample_uniform(n: int, seed: int) -> np.ndarray:
    """n uniforms strictly inside (0, 1): midpoints of the cells of a 2**52 grid."""
    if n < 1:
        raise ParameterDomainError(f"n must be >= 1, got {n!r}")
    return _cell_midpoints(uniform_generator(seed).integers(0, 2**_UNIFORM_BITS, size=n, dtype=np.int64))


def sample(spec: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws by inverse CDF. Same (spec, n, seed) always gives the same series."""
    return np.asarray(quantile(spec, sample_uniform(n, seed)), dtype=float)
