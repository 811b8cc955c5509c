"""
Seeded Monte Carlo experiments: correct-selection frequencies of the SRAR criteria, binding functions of the
misspecified causal fit on noncausal data, and a consistency study of the median QNCAR(1) estimator.

Replicate i always uses seed ``base_seed ^ i``, so results depend on the replicate index only and are identical
for any number of workers. Outcomes are always aggregated in replicate order.
"""
import concurrent.futures
import dataclasses
import functools
import hashlib
import json
import logging
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import DistributionSpec
from .errors import ConfigurationError, DataError, NumericalError, ParameterDomainError, ReplicateFailureError
from .models import Direction, ModelSpec, fit_qar
from .simulate import DEFAULT_BURN_IN, MarSpec, RegimeSpec, SimConfig, simulate_mar, simulate_two_regime
from .srar import AggregateMethod, default_grid, select_model, validate_grid

__all__ = (
    "FAILURE_BUDGET",
    "DEFAULT_DISPERSION_THRESHOLD",
    "MarDgp",
    "Dgp",
    "McConfig",
    "FrequencyTable",
    "BindingGrid",
    "ConsistencyStudy",
    "PRESET_EXPERIMENTS",
    "DEFAULT_SAMPLE_SIZE",
    "PRESET_SAMPLE_SIZES",
    "preset_sample_size",
    "true_direction",
    "simulate_dgp",
    "dgp_from_mapping",
    "run_selection_frequencies",
    "run_binding_function",
    "consistency_study",
    "checkpoint_path",
    "replicate_seed",
)

log = logging.getLogger(__name__)

FAILURE_BUDGET = 0.01
DEFAULT_DISPERSION_THRESHOLD = 0.5
_SEED_MASK = 2**64 - 1

Advance = typing.Optional[typing.Callable[[int], None]]


@dataclass(frozen=True)
class MarDgp:
    """A MAR process together with its innovation law."""

    spec: MarSpec
    innovation: DistributionSpec = field(default_factory=DistributionSpec)

    def __post_init__(self):
        if self.spec.r and self.spec.s:
            raise ConfigurationError("selection experiments need a purely causal or purely noncausal process")
        if not (self.spec.r or self.spec.s):
            raise ConfigurationError("the process needs at least one lag or lead coefficient")

    def to_mapping(self) -> dict:
        return {"type": "mar", **self.spec.to_mapping(), "innovation": self.innovation.to_mapping()}

    def describe(self) -> str:
        return f"MAR({self.spec.r},{self.spec.s}) {self.innovation.describe()}"


Dgp = typing.Union[MarDgp, RegimeSpec]


def true_direction(dgp: Dgp) -> Direction:
    """The direction a correct selection must pick. The two-regime process is generated in reverse time."""
    if isinstance(dgp, RegimeSpec):
        return Direction.NONCAUSAL
    return Direction.CAUSAL if dgp.spec.r else Direction.NONCAUSAL


def simulate_dgp(dgp: Dgp, T: int, seed: int, burn_in: int = DEFAULT_BURN_IN) -> np.ndarray:
    if isinstance(dgp, RegimeSpec):
        return simulate_two_regime(dgp, SimConfig(T + 2 * burn_in, seed, burn_in))
    return simulate_mar(dgp.spec, SimConfig(T + 2 * burn_in, seed, burn_in, dgp.innovation))


def _describe_dgp(dgp: Dgp) -> str:
    if isinstance(dgp, RegimeSpec):
        return f"two-regime(tau*={dgp.tau_star:g}, {dgp.beta1:g}/{dgp.beta2:g}) {dgp.innovation_quantile.describe()}"
    return dgp.describe()


def _dgp_mapping(dgp: Dgp) -> dict:
    if isinstance(dgp, RegimeSpec):
        return {"type": "two_regime", **dgp.to_mapping()}
    return dgp.to_mapping()


def dgp_from_mapping(data: typing.Mapping[str, typing.Any]) -> Dgp:
    """Inverse of the ``dgp`` block in reports: ``type`` is ``mar`` or ``two_regime``."""
    data = dict(data)
    kind = data.pop("type", "mar")
    innovation = DistributionSpec.from_mapping(data.pop("innovation", {"kind": "gaussian"}))
    try:
        if kind == "mar":
            spec = MarSpec(
                pi=tuple(data.pop("pi", ())), phi=tuple(data.pop("phi", ())), intercept=float(data.pop("intercept", 0))
            )
            dgp = MarDgp(spec, innovation)
        elif kind == "two_regime":
            dgp = RegimeSpec(
                float(data.pop("tau_star")), float(data.pop("beta1")), float(data.pop("beta2")), innovation
            )
        else:
            raise ConfigurationError(f"Unknown dgp type {kind!r}; expected 'mar' or 'two_regime'")
    except KeyError as e:
        raise ConfigurationError(f"dgp of type {kind!r} needs {e.args[0]!r}") from None
    if data:
        raise ConfigurationError(f"Unknown dgp keys: {', '.join(sorted(data))}")
    return dgp


# The five experiments of the selection-frequency table, keyed by column name.
PRESET_EXPERIMENTS: typing.Dict[str, Dgp] = {
    "gaussian": MarDgp(MarSpec(pi=(0.5,), intercept=1.0), DistributionSpec.gaussian()),
    "t2": MarDgp(MarSpec(pi=(0.5,), intercept=1.0), DistributionSpec.student_t(2)),
    "t1": MarDgp(MarSpec(phi=(0.5,), intercept=1.0), DistributionSpec.cauchy()),
    "two_regime": RegimeSpec(0.7, 0.2, 0.8, DistributionSpec.student_t(3)),
    "skewed_t": MarDgp(MarSpec(phi=(0.8,)), DistributionSpec.skewed_t(3, 2, demeaned=True)),
}

# Series length per experiment. The crossing experiments use the length of their SRAR plots.
DEFAULT_SAMPLE_SIZE = 200
PRESET_SAMPLE_SIZES: typing.Dict[str, int] = {"two_regime": 600, "skewed_t": 600}


def preset_sample_size(column: str) -> int:
    """Series length the preset experiment ``column`` is simulated at."""
    if column not in PRESET_EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {column!r}; expected one of {list(PRESET_EXPERIMENTS)}")
    return PRESET_SAMPLE_SIZES.get(column, DEFAULT_SAMPLE_SIZE)


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or not 0 <= seed <= _SEED_MASK:
        raise ParameterDomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def replicate_seed(base_seed: int, index: int) -> int:
    return (int(base_seed) ^ int(index)) & _SEED_MASK


@dataclass(frozen=True)
class McConfig:
    n_reps: int
    T: int
    dgp: Dgp
    seed: int
    p_fit: int = 1
    grid: typing.Tuple[float, ...] = tuple(float(t) for t in default_grid())
    parallelism: int = 1
    burn_in: int = DEFAULT_BURN_IN
    restricted: bool = False
    include_restricted: bool = False
    method: AggregateMethod = AggregateMethod.GRID_MEAN

    def __post_init__(self):
        if self.n_reps < 1:
            raise ConfigurationError(f"n_reps must be >= 1, got {self.n_reps}")
        if self.parallelism < 1:
            raise ConfigurationError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.p_fit < 1:
            raise ParameterDomainError(f"p_fit must be >= 1, got {self.p_fit}")
        if self.T <= 2 * self.p_fit + 2:
            raise ConfigurationError(f"T={self.T} is too short for order {self.p_fit}; need T > {2 * self.p_fit + 2}")
        _check_seed(self.seed)
        object.__setattr__(self, "grid", tuple(float(t) for t in validate_grid(self.grid)))
        object.__setattr__(self, "method", AggregateMethod(self.method))

    def replicate_seed(self, index: int) -> int:
        return replicate_seed(self.seed, index)

    def to_mapping(self, include_parallelism: bool = True) -> dict:
        data = {
            "n_reps": self.n_reps,
            "T": self.T,
            "dgp": _dgp_mapping(self.dgp),
            "seed": self.seed,
            "p_fit": self.p_fit,
            "grid": list(self.grid),
            "burn_in": self.burn_in,
            "restricted": self.restricted,
            "include_restricted": self.include_restricted,
            "method": self.method.value,
        }
        if include_parallelism:
            data["parallelism"] = self.parallelism
        return data

    def digest(self) -> str:
        """Hash of everything that determines the outcomes (the worker count does not)."""
        encoded = json.dumps(self.to_mapping(include_parallelism=False), sort_keys=True).encode()
        return hashlib.sha256(encoded).hexdigest()[:16]


def checkpoint_path(cfg: McConfig, directory: Path) -> Path:
    return Path(directory) / f"selection-{cfg.digest()}.jsonl"


class _Checkpoint:
    """Append-only JSON-lines record of finished replicates."""

    def __init__(self, path: Path, resume: bool):
        self.path = Path(path)
        self.done: typing.Dict[int, dict] = {}
        if resume and self.path.exists():
            with self.path.open(encoding="utf-8") as file:
                for line in file:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        outcome = json.loads(line)
                    except json.JSONDecodeError:
                        log.warning("Ignoring a truncated checkpoint line in %s", self.path)
                        continue
                    self.done[int(outcome["index"])] = outcome
            # drop unreadable lines so later appends start on a fresh line
            self.path.write_text(
                "".join(json.dumps(self.done[i], sort_keys=True) + "\n" for i in sorted(self.done)), encoding="utf-8"
            )
            log.info("Resuming from %s: %d replicates already done", self.path, len(self.done))
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def append(self, outcome: dict) -> None:
        with self.path.open("a", encoding="utf-8") as file:
            file.write(json.dumps(outcome, sort_keys=True) + "\n")
        self.done[int(outcome["index"])] = outcome


def _map_replicates(task: typing.Callable, indices: typing.Sequence, jobs: int, advance: Advance):
    """Yields (index, result) for every index, in completion order."""
    if jobs <= 1 or len(indices) <= 1:
        for index in indices:
            yield index, task(index)
            if advance:
                advance(1)
        return
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as executor:
        futures = {executor.submit(task, index): index for index in indices}
        for future in concurrent.futures.as_completed(futures):
            yield futures[future], future.result()
            if advance:
                advance(1)


def _check_failures(failed: int, total: int, what: str) -> None:
    if failed and failed >= FAILURE_BUDGET * total:
        raise ReplicateFailureError(f"too many failed {what} replicates", failed=failed, n_reps=total)


def _selection_replicate(cfg: McConfig, index: int) -> dict:
    seed = cfg.replicate_seed(index)
    outcome = {"index": index, "seed": seed}
    try:
        series = simulate_dgp(cfg.dgp, cfg.T, seed, cfg.burn_in)
        report = select_model(
            series,
            cfg.p_fit,
            cfg.grid,
            include_restricted=cfg.include_restricted,
            method=cfg.method,
            restricted=cfg.restricted,
        )
    except (NumericalError, DataError) as e:
        log.debug("replicate %d (seed %d) failed: %s", index, seed, e)
        return {**outcome, "failed": True, "error": str(e)}
    outcome.update(failed=False, winners=[w.value for w in report.per_tau_winner])
    outcome["aggregate"] = report.aggregate_winner.value
    if report.restricted_variant is not None:
        outcome["variant_winners"] = [w.value for w in report.restricted_variant.per_tau_winner]
        outcome["variant_aggregate"] = report.restricted_variant.aggregate_winner.value
    return outcome


def _binomial_se(frequency: np.ndarray, n: int) -> np.ndarray:
    return np.sqrt(frequency * (1.0 - frequency) / n)


@dataclass(frozen=True)
class FrequencyTable:
    """Share of replicates in which each criterion picked the true direction. Ties count as misses."""

    grid: typing.Tuple[float, ...]
    per_tau: np.ndarray
    aggregate: float
    n_reps: int
    n_used: int
    failed: int
    metadata: dict
    variant: typing.Optional["FrequencyTable"] = None

    @property
    def per_tau_se(self) -> np.ndarray:
        return _binomial_se(self.per_tau, self.n_used)

    @property
    def aggregate_se(self) -> float:
        return float(_binomial_se(np.asarray(self.aggregate), self.n_used))

    def at(self, tau: float) -> float:
        matches = [i for i, t in enumerate(self.grid) if abs(t - tau) <= 1e-9]
        if not matches:
            raise ConfigurationError(f"tau={tau:g} is not on the table's grid")
        return float(self.per_tau[matches[0]])

    def to_rows(self) -> typing.List[dict]:
        """One row per quantile level, then the aggregate row."""
        rows = [
            {"quantile": f"{tau:g}", "frequency": float(f), "std_error": float(se)}
            for tau, f, se in zip(self.grid, self.per_tau, self.per_tau_se)
        ]
        rows.append({"quantile": "aggregate", "frequency": self.aggregate, "std_error": self.aggregate_se})
        return rows

    def to_mapping(self) -> dict:
        data = {
            "rows": self.to_rows(),
            "n_reps": self.n_reps,
            "n_used": self.n_used,
            "failed": self.failed,
            "metadata": self.metadata,
        }
        if self.variant is not None:
            data["variant"] = self.variant.to_mapping()
        return data


def _tabulate(outcomes: typing.List[dict], cfg: McConfig, prefix: str, restricted: bool) -> FrequencyTable:
    correct = true_direction(cfg.dgp).value
    used = [o for o in outcomes if not o["failed"]]
    n_used = len(used)
    if not n_used:
        raise ReplicateFailureError("every replicate failed", failed=len(outcomes), n_reps=cfg.n_reps)
    hits = np.zeros(len(cfg.grid))
    aggregate_hits = 0
    for outcome in used:
        hits += np.array([w == correct for w in outcome[f"{prefix}winners"]], dtype=float)
        aggregate_hits += outcome[f"{prefix}aggregate"] == correct
    return FrequencyTable(
        grid=cfg.grid,
        per_tau=hits / n_used,
        aggregate=aggregate_hits / n_used,
        n_reps=cfg.n_reps,
        n_used=n_used,
        failed=len(outcomes) - n_used,
        metadata={
            "dgp": _dgp_mapping(cfg.dgp),
            "description": _describe_dgp(cfg.dgp),
            "true_direction": correct,
            "T": cfg.T,
            "n_reps": cfg.n_reps,
            "seed": cfg.seed,
            "p_fit": cfg.p_fit,
            "burn_in": cfg.burn_in,
            "restricted": restricted,
            "method": cfg.method.value,
        },
    )


def run_selection_frequencies(
    cfg: McConfig,
    *,
    checkpoint: typing.Optional[Path] = None,
    resume: bool = False,
    advance: Advance = None,
) -> FrequencyTable:
    """
    Simulates ``cfg.n_reps`` series, compares causal and noncausal fits on each and counts correct selections.

    :param checkpoint: JSON-lines file receiving every finished replicate
    :param resume: Skip the replicates already recorded in ``checkpoint``
    :param advance: Called with 1 after each replicate (for progress bars)
    :raises ReplicateFailureError: If 1% or more of the replicates failed
    """
    store = _Checkpoint(checkpoint, resume) if checkpoint is not None else None
    outcomes: typing.Dict[int, dict] = dict(store.done) if store else {}
    pending = [i for i in range(cfg.n_reps) if i not in outcomes]
    if advance and outcomes:
        advance(cfg.n_reps - len(pending))
    task = functools.partial(_selection_replicate, cfg)
    for index, outcome in _map_replicates(task, pending, cfg.parallelism, advance):
        outcomes[index] = outcome
        if store:
            store.append(outcome)

    ordered = [outcomes[i] for i in range(cfg.n_reps)]
    failed = sum(o["failed"] for o in ordered)
    _check_failures(failed, cfg.n_reps, "selection")
    table = _tabulate(ordered, cfg, "", cfg.restricted)
    if cfg.include_restricted:
        variant = _tabulate(ordered, cfg, "variant_", not cfg.restricted)
        table = dataclasses.replace(table, variant=variant)
    log.info(
        "%s: aggregate correct-selection frequency %.3f over %d replicates (%d failed)",
        _describe_dgp(cfg.dgp),
        table.aggregate,
        table.n_used,
        failed,
    )
    return table


def _check_coefficients(coefficients: typing.Iterable[float]) -> typing.Tuple[float, ...]:
    values = tuple(float(c) for c in coefficients)
    if not values:
        raise ConfigurationError("coefficient grid is empty")
    bad = [c for c in values if not -1.0 < c < 1.0]
    if bad:
        raise ParameterDomainError(f"coefficients must lie in (-1, 1), got {bad}")
    return values


def _binding_replicate(setup: tuple, index: typing.Tuple[int, int]) -> typing.Optional[float]:
    tau, coefficients, innovation, T, burn_in, seed = setup
    cell, rep = index
    dgp = MarDgp(MarSpec(phi=(coefficients[cell],)), innovation)
    try:
        series = simulate_dgp(dgp, T, replicate_seed(seed, rep), burn_in)
        return float(fit_qar(series, ModelSpec(Direction.CAUSAL, 1), tau).theta[1])
    except (NumericalError, DataError) as e:
        log.debug("binding cell %d replicate %d failed: %s", cell, rep, e)
        return None


@dataclass(frozen=True)
class BindingGrid:
    """Mean misspecified QCAR(1) lag estimate per true lead coefficient, at one quantile level."""

    tau: float
    coefficients: typing.Tuple[float, ...]
    mean: np.ndarray
    dispersion: np.ndarray
    std_error: np.ndarray
    n_used: np.ndarray
    non_convergent: np.ndarray
    n_reps: int
    dispersion_threshold: float
    metadata: dict = field(default_factory=dict)

    def at(self, coefficient: float) -> float:
        matches = [i for i, c in enumerate(self.coefficients) if abs(c - coefficient) <= 1e-12]
        if not matches:
            raise ConfigurationError(f"{coefficient:g} is not on the coefficient grid")
        return float(self.mean[matches[0]])

    def to_rows(self) -> typing.List[dict]:
        return [
            {
                "coefficient": c,
                "tau": self.tau,
                "mean": float(m),
                "dispersion": float(d),
                "std_error": float(se),
                "n_used": int(n),
                "non_convergent": bool(flag),
            }
            for c, m, d, se, n, flag in zip(
                self.coefficients, self.mean, self.dispersion, self.std_error, self.n_used, self.non_convergent
            )
        ]

    def to_mapping(self) -> dict:
        return {"rows": self.to_rows(), "n_reps": self.n_reps, "metadata": self.metadata}


def run_binding_function(
    tau: float,
    coefficient_grid: typing.Iterable[float],
    innovation: DistributionSpec,
    n_reps: int,
    T: int,
    *,
    seed: int = 0,
    burn_in: int = DEFAULT_BURN_IN,
    jobs: int = 1,
    dispersion_threshold: float = DEFAULT_DISPERSION_THRESHOLD,
    advance: Advance = None,
) -> BindingGrid:
    """
    For each true coefficient c, simulates y_t = c y_{t+1} + eps_t and fits the misspecified QCAR(1) at ``tau``.

    Replicate k of every cell uses seed ``seed ^ k``, so neighbouring cells share their innovation draws.
    Cells whose estimates have a standard deviation above ``dispersion_threshold`` are flagged non-convergent;
    their means are still reported.
    """
    if not 0.0 < tau < 1.0:
        raise ParameterDomainError(f"tau must lie in (0, 1), got {tau!r}")
    if n_reps < 2:
        raise ConfigurationError(f"n_reps must be >= 2, got {n_reps}")
    if T <= 4:
        raise ConfigurationError(f"T must be >= 5, got {T}")
    coefficients = _check_coefficients(coefficient_grid)
    _check_seed(seed)
    setup = (float(tau), coefficients, innovation, int(T), int(burn_in), int(seed))
    indices = [(cell, rep) for cell in range(len(coefficients)) for rep in range(n_reps)]
    estimates = np.full((len(coefficients), n_reps), np.nan)
    for (cell, rep), value in _map_replicates(functools.partial(_binding_replicate, setup), indices, jobs, advance):
        if value is not None:
            estimates[cell, rep] = value

    failed = int(np.isnan(estimates).sum())
    _check_failures(failed, estimates.size, "binding")
    n_used = np.sum(~np.isnan(estimates), axis=1)
    mean = np.nanmean(estimates, axis=1)
    dispersion = np.nanstd(estimates, axis=1, ddof=1)
    grid = BindingGrid(
        tau=float(tau),
        coefficients=coefficients,
        mean=mean,
        dispersion=dispersion,
        std_error=dispersion / np.sqrt(n_used),
        n_used=n_used,
        non_convergent=dispersion > dispersion_threshold,
        n_reps=n_reps,
        dispersion_threshold=dispersion_threshold,
        metadata={
            "innovation": innovation.to_mapping(),
            "T": T,
            "seed": seed,
            "burn_in": burn_in,
            "failed": failed,
        },
    )
    for c, flagged in zip(coefficients, grid.non_convergent):
        if flagged:
            log.warning(
                "binding cell c=%g at tau=%g is non-convergent (dispersion above %g)", c, tau, dispersion_threshold
            )
    return grid


def _consistency_replicate(setup: tuple, index: typing.Tuple[int, int]) -> typing.Optional[float]:
    phi, Ts, tau, innovation, burn_in, seed = setup
    cell, rep = index
    dgp = MarDgp(MarSpec(phi=(phi,)), innovation)
    try:
        series = simulate_dgp(dgp, Ts[cell], replicate_seed(seed, rep), burn_in)
        return abs(float(fit_qar(series, ModelSpec(Direction.NONCAUSAL, 1), tau).theta[1]) - phi)
    except (NumericalError, DataError) as e:
        log.debug("consistency T=%d replicate %d failed: %s", Ts[cell], rep, e)
        return None


@dataclass(frozen=True)
class ConsistencyStudy:
    phi: float
    tau: float
    Ts: typing.Tuple[int, ...]
    median_abs_error: np.ndarray
    n_used: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def shrink_factor(self) -> float:
        """Median absolute error at the smallest T over the one at the largest T."""
        last = float(self.median_abs_error[-1])
        return math.inf if last == 0.0 else float(self.median_abs_error[0]) / last

    def to_rows(self) -> typing.List[dict]:
        return [
            {"T": T, "median_abs_error": float(e), "n_used": int(n)}
            for T, e, n in zip(self.Ts, self.median_abs_error, self.n_used)
        ]

    def to_mapping(self) -> dict:
        return {"rows": self.to_rows(), "shrink_factor": self.shrink_factor, "metadata": self.metadata}


def consistency_study(
    phi: float = 0.8,
    Ts: typing.Sequence[int] = (250, 4000),
    n_reps: int = 200,
    seed: int = 0,
    *,
    tau: float = 0.5,
    innovation: typing.Optional[DistributionSpec] = None,
    burn_in: int = DEFAULT_BURN_IN,
    jobs: int = 1,
    advance: Advance = None,
) -> ConsistencyStudy:
    """Median absolute error of the QNCAR(1) lead coefficient on a noncausal AR(1), for each sample size."""
    innovation = innovation or DistributionSpec.cauchy()
    Ts = tuple(int(T) for T in Ts)
    if not Ts or any(T < 5 for T in Ts):
        raise ConfigurationError(f"sample sizes must be >= 5, got {Ts}")
    _check_seed(seed)
    setup = (float(phi), Ts, float(tau), innovation, int(burn_in), int(seed))
    indices = [(cell, rep) for cell in range(len(Ts)) for rep in range(n_reps)]
    errors = np.full((len(Ts), n_reps), np.nan)
    task = functools.partial(_consistency_replicate, setup)
    for (cell, rep), value in _map_replicates(task, indices, jobs, advance):
        if value is not None:
            errors[cell, rep] = value
    _check_failures(int(np.isnan(errors).sum()), errors.size, "consistency")
    return ConsistencyStudy(
        phi=float(phi),
        tau=float(tau),
        Ts=Ts,
        median_abs_error=np.nanmedian(errors, axis=1),
        n_used=np.sum(~np.isnan(errors), axis=1),
        metadata={"innovation": innovation.to_mapping(), "n_reps": n_reps, "seed": seed, "burn_in": burn_in},
    )
