"""
Exact check-function regression.

``solve`` minimises sum_t rho_tau(y_t - x_t' theta) by descending along the edges of the polyhedral objective,
Barrodale-Roberts style: the iterate is always a vertex (p+1 rows fitted exactly), every edge leaving it is priced
by its directional derivative, and the chosen edge is followed past as many kinks as keep the objective falling
(a weighted-median line search) before the row at the stopping kink enters the basis. Rows that sit exactly on
the current fit are ordered by a fixed symbolic perturbation of the response, so ties never stall the walk: the
perturbed objective strictly decreases at every step and the walk ends at a vertex whose dual is feasible, i.e. a
global minimiser even when many residuals are zero.

Rows are put in a canonical order (response, then regressors) before the walk, which makes the result a function of
the set of rows only.
"""
import enum
import logging
import math
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, DegeneracyError, InsufficientDataError, NumericalError, ParameterDomainError

__all__ = (
    "ENDPOINT_EPSILON",
    "RANK_TOLERANCE",
    "SolverStatus",
    "RegressionProblem",
    "QuantileFit",
    "check_loss",
    "effective_tau",
    "objective",
    "solve",
    "solve_restricted",
    "solve_many",
    "conventions",
)

log = logging.getLogger(__name__)

ENDPOINT_EPSILON = 1e-6
RANK_TOLERANCE = 1e-10
_RESIDUAL_ZERO = 1e-11
_PRICE_TOLERANCE = 1e-9
_PIVOT_TOLERANCE = 1e-12
_PERTURBATION_SEED = 20_230_101


class SolverStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    DEGENERATE_OPTIMAL = "degenerate-optimal"


@dataclass(frozen=True)
class RegressionProblem:
    """
    n rows of ``design`` (first column the intercept regressor) against ``response``.

    ``row_mask`` marks the rows that take part; None means all of them.
    """

    design: np.ndarray
    response: np.ndarray
    row_mask: typing.Optional[np.ndarray] = None

    def __post_init__(self):
        design = np.array(self.design, dtype=float, copy=True)
        if design.ndim == 1:
            design = design[:, None]
        response = np.array(self.response, dtype=float, copy=True).ravel()
        if design.ndim != 2 or design.shape[0] != response.size:
            raise ConfigurationError(
                f"design has shape {design.shape} but response has {response.size} rows"
            )
        if not (np.all(np.isfinite(design)) and np.all(np.isfinite(response))):
            raise ConfigurationError("design and response must be finite")
        mask = None
        if self.row_mask is not None:
            mask = np.array(self.row_mask, dtype=bool, copy=True).ravel()
            if mask.size != response.size:
                raise ConfigurationError(f"row_mask has {mask.size} entries for {response.size} rows")
            mask.flags.writeable = False
        design.flags.writeable = False
        response.flags.writeable = False
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "row_mask", mask)

    @property
    def n_rows(self) -> int:
        return self.response.size

    @property
    def n_params(self) -> int:
        return self.design.shape[1]

    @property
    def active_rows(self) -> np.ndarray:
        """Indices of the rows that take part, ascending."""
        if self.row_mask is None:
            return np.arange(self.n_rows)
        return np.flatnonzero(self.row_mask)

    @property
    def n_effective(self) -> int:
        return int(self.active_rows.size)

    def nonnegative_rows(self) -> np.ndarray:
        """Boolean mask of rows whose regressors are all >= 0."""
        return np.all(self.design >= 0.0, axis=1)

    def restricted(self) -> "RegressionProblem":
        """Same problem, keeping only the rows whose regressors are all >= 0."""
        mask = self.nonnegative_rows()
        if self.row_mask is not None:
            mask &= self.row_mask
        return RegressionProblem(self.design, self.response, mask)


@dataclass(frozen=True)
class QuantileFit:
    """
    Optimal fit at one quantile level. ``residuals`` and ``rows`` cover the rows that took part, in the
    problem's own row order.
    """

    tau: float
    theta: np.ndarray
    residuals: np.ndarray
    srar: float
    n_effective: int
    solver_status: SolverStatus
    rows: np.ndarray
    iterations: int = 0
    basis: typing.Tuple[int, ...] = field(default=(), repr=False)

    @property
    def intercept(self) -> float:
        return float(self.theta[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.theta[1:]

    def to_mapping(self) -> dict:
        return {
            "tau": self.tau,
            "theta": [float(v) for v in self.theta],
            "srar": self.srar,
            "n_effective": self.n_effective,
            "solver_status": self.solver_status.value,
            "iterations": self.iterations,
        }


def check_loss(u, tau: float):
    """rho_tau(u) = u * (tau - 1{u < 0}). Works elementwise on arrays."""
    values = np.asarray(u, dtype=float)
    out = values * (tau - (values < 0.0))
    if np.ndim(u) == 0:
        return float(out)
    return out


def effective_tau(tau: float) -> float:
    """Maps the endpoints 0 and 1 to the nearest level the LP is well posed at; interior levels pass through."""
    if tau == 0.0:
        return ENDPOINT_EPSILON
    if tau == 1.0:
        return 1.0 - ENDPOINT_EPSILON
    if not (math.isfinite(tau) and 0.0 < tau < 1.0):
        raise ParameterDomainError(f"tau must lie in [0, 1], got {tau!r}")
    return float(tau)


def _check_tau(tau: float) -> float:
    if not (isinstance(tau, (int, float, np.floating)) and math.isfinite(tau) and 0.0 < tau < 1.0):
        raise ParameterDomainError(f"tau must lie in (0, 1), got {tau!r}")
    return float(tau)


def objective(problem: RegressionProblem, theta: typing.Sequence[float], tau: float) -> float:
    """SRAR of an arbitrary coefficient vector over the rows that take part."""
    tau = _check_tau(tau)
    rows = problem.active_rows
    residuals = problem.response[rows] - problem.design[rows] @ np.asarray(theta, dtype=float)
    return math.fsum(check_loss(residuals, tau))


def conventions() -> dict:
    """Solver conventions recorded in every report."""
    return {
        "algorithm": "vertex edge descent with weighted-median line search",
        "pricing": "most negative directional derivative, lowest basis position on ties",
        "endpoint_epsilon": ENDPOINT_EPSILON,
        "rank_tolerance": RANK_TOLERANCE,
        "row_order": "canonical (response, regressors)",
        "ties": "symbolic perturbation of the response, fixed Philox stream",
    }


@dataclass
class _Prepared:
    X: np.ndarray
    y: np.ndarray
    rows: np.ndarray  # original index of each canonical row


def _prepare(problem: RegressionProblem) -> _Prepared:
    rows = problem.active_rows
    k = problem.n_params
    if rows.size <= k:
        raise InsufficientDataError(
            f"need more than {k} rows to fit {k} coefficients", n_effective=int(rows.size)
        )
    X = problem.design[rows]
    y = problem.response[rows]
    # np.lexsort sorts by the last key first
    order = np.lexsort(tuple(X[:, c] for c in range(k - 1, -1, -1)) + (y,))
    X = np.ascontiguousarray(X[order])
    y = np.ascontiguousarray(y[order])
    _check_rank(X)
    return _Prepared(X=X, y=y, rows=rows[order])


def _check_rank(X: np.ndarray) -> None:
    _, R, pivots = linalg.qr(X, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(R))
    if diagonal.size == 0 or diagonal[0] == 0.0:
        raise DegeneracyError("design matrix is zero", columns=list(range(X.shape[1])))
    rank = int(np.sum(diagonal > RANK_TOLERANCE * diagonal[0]))
    if rank < X.shape[1]:
        raise DegeneracyError(
            f"design has rank {rank} < {X.shape[1]}", columns=sorted(int(c) for c in pivots[rank:])
        )


def _start_basis(X: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    """Independent rows closest to the least-squares fit shifted to the tau-quantile of its residuals."""
    k = X.shape[1]
    theta, *_ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ theta
    distance = np.abs(residuals - np.quantile(residuals, tau))
    basis = []
    for row in np.argsort(distance, kind="stable"):
        candidate = X[basis + [int(row)]]
        if np.linalg.matrix_rank(candidate) == len(basis) + 1:
            basis.append(int(row))
            if len(basis) == k:
                break
    return np.array(basis)


def _perturbation(n: int) -> np.ndarray:
    """Fixed generic offsets, one per canonical row, used only to break ties between vanishing residuals."""
    return np.random.Generator(np.random.Philox(_PERTURBATION_SEED)).uniform(1.0, 2.0, n)


def _descend(X: np.ndarray, y: np.ndarray, tau: float, basis: np.ndarray):
    """
    Walks from ``basis`` to an optimal vertex.

    Non-basic rows with a vanishing residual are treated as if the response were y + delta * u for an
    infinitesimal delta: they get the sign of their share of ``u`` and the line search orders their kinks by it.
    The perturbed problem has no degenerate vertices, so every pivot strictly lowers its objective, and the dual
    of the final basis is feasible for the unperturbed problem as well.

    :return: (basis, theta, residuals, iterations, degenerate)
    """
    n, k = X.shape
    basis = basis.copy()
    zero_tolerance = _RESIDUAL_ZERO * (1.0 + float(np.abs(y).max()))
    offsets = _perturbation(n)
    max_iterations = 50 * n + 500
    for iteration in range(max_iterations + 1):
        B = X[basis]
        try:
            B_inverse = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NumericalError(f"basis became singular after {iteration} pivots") from None
        theta = B_inverse @ y[basis]
        residuals = y - X @ theta
        residuals[basis] = 0.0

        A = X @ B_inverse  # A[i, j]: change of x_i' theta per unit step along edge j
        nonbasic = np.ones(n, dtype=bool)
        nonbasic[basis] = False
        zero = nonbasic & (np.abs(residuals) <= zero_tolerance)
        shadow = offsets - A @ offsets[basis]
        shadow[basis] = 0.0
        leading = np.where(zero, 0.0, residuals)
        sign = np.where(zero, np.sign(shadow), np.sign(residuals))
        sign[sign == 0.0] = 1.0

        psi = np.where(sign[nonbasic] > 0.0, tau, tau - 1.0)
        g = A[nonbasic].T @ psi
        # slope of the objective leaving the vertex along +edge_j (released row goes negative) and -edge_j
        slopes = np.empty((k, 2))
        slopes[:, 0] = (1.0 - tau) - g
        slopes[:, 1] = tau + g
        tolerance = _PRICE_TOLERANCE * (1.0 + np.abs(A[nonbasic]).sum(axis=0))

        flat = int(np.argmin(slopes))
        j, side = divmod(flat, 2)
        if slopes[j, side] >= -tolerance[j]:
            degenerate = bool(np.any(zero) or np.any(np.abs(slopes) <= tolerance[:, None]))
            return basis, theta, residuals, iteration, degenerate

        a = (1.0 if side == 0 else -1.0) * A[:, j]  # residual_i(t) = residual_i - a_i t
        candidates = np.flatnonzero(nonbasic & (np.abs(a) > _PIVOT_TOLERANCE) & (sign * a > 0.0))
        if candidates.size == 0:
            raise NumericalError("objective is unbounded along an edge; the design is degenerate")
        steps = leading[candidates] / a[candidates]
        ties = shadow[candidates] / a[candidates]
        order = np.lexsort((candidates, ties, steps))
        slope_after = slopes[j, side] + np.cumsum(np.abs(a[candidates[order]]))
        stop = int(np.argmax(slope_after >= 0.0))
        if slope_after[stop] < 0.0:
            raise NumericalError("objective is unbounded along an edge; the design is degenerate")
        basis[j] = candidates[order[stop]]

    raise NumericalError(f"no optimal vertex after {max_iterations} pivots")


def _fit_prepared(prepared: _Prepared, tau: float, start: typing.Optional[np.ndarray] = None):
    if start is None:
        start = _start_basis(prepared.X, prepared.y, tau)
    basis, theta, residuals, iterations, degenerate = _descend(prepared.X, prepared.y, tau, start)
    log.debug("tau=%.6g: optimal vertex after %d pivots (degenerate=%s)", tau, iterations, degenerate)

    back = np.argsort(prepared.rows, kind="stable")
    return basis, QuantileFit(
        tau=tau,
        theta=theta,
        residuals=residuals[back],
        srar=math.fsum(check_loss(residuals, tau)),
        n_effective=int(prepared.rows.size),
        solver_status=SolverStatus.DEGENERATE_OPTIMAL if degenerate else SolverStatus.OPTIMAL,
        rows=prepared.rows[back],
        iterations=iterations,
        basis=tuple(int(prepared.rows[b]) for b in basis),
    )


def solve(problem: RegressionProblem, tau: float) -> QuantileFit:
    """
    Global minimiser of the check-function objective over the rows that take part.

    :param problem: The regression problem
    :param tau: Quantile level, strictly inside (0, 1). Use ``effective_tau`` to map the endpoints first.
    :raises DegeneracyError: If the design is rank deficient
    :raises InsufficientDataError: If there are no more rows than coefficients
    """
    tau = _check_tau(tau)
    _, fit = _fit_prepared(_prepare(problem), tau)
    return fit


def solve_restricted(problem: RegressionProblem, tau: float) -> QuantileFit:
    """``solve`` over the rows whose regressors are all nonnegative."""
    return solve(problem.restricted(), tau)


def solve_many(
    problem: RegressionProblem, taus: typing.Iterable[float], *, restricted: bool = False
) -> typing.List[QuantileFit]:
    """
    Fits every level in ``taus``, in the given order. The rank check runs once and each fit starts from the
    previous level's optimal vertex.
    """
    levels = [_check_tau(tau) for tau in taus]
    prepared = _prepare(problem.restricted() if restricted else problem)
    fits = []
    basis = None
    for tau in levels:
        basis, fit = _fit_prepared(prepared, tau, basis)
        fits.append(fit)
    return fits
