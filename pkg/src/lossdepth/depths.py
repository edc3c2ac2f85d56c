"""Depth computations.

halfspace_depth is the classical smallest closed-halfspace probability,
computed exactly in one and two dimensions and bounded from above by seeded
random directions in higher dimension.  logistic_depth and svm_depth report
the weighted classification loss of the best ridge-penalised separator
between the reference sample and the query.  depth_batch maps any of them
over many queries, optionally across threads, with identical results for any
thread count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    LOG2,
    DataMatrix,
    DepthProblem,
    DepthResult,
    LossKind,
    Reporting,
    ValidationError,
    as_data_matrix,
    as_query_point,
    weighted_expectation,
)
from .kernels import KernelSpec, gram
from .solvers import (
    SolverConfig,
    augment,
    gradient_descent,
    svm_dual_solve,
    svm_offset,
)

EXACT_1D = "exact-1d"
EXACT_2D = "exact-2d"
RANDOM_DIRECTIONS = "random"


@dataclass(frozen=True)
class HalfspaceConfig:
    """How to search over halfspace directions.

    exact-1d and exact-2d enumerate every distinct closed halfspace through
    the query.  random draws n_directions standard Gaussian directions from
    the seed and checks both signs of each, giving an upper bound on the
    depth in any dimension.
    """

    mode: str
    n_directions: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (EXACT_1D, EXACT_2D, RANDOM_DIRECTIONS):
            raise ValidationError(f"unknown halfspace mode {self.mode!r}")
        if self.mode == RANDOM_DIRECTIONS and self.n_directions < 1:
            raise ValidationError("random-directions halfspace depth needs n_directions >= 1")

    @classmethod
    def exact_1d(cls) -> "HalfspaceConfig":
        return cls(mode=EXACT_1D)

    @classmethod
    def exact_2d(cls) -> "HalfspaceConfig":
        return cls(mode=EXACT_2D)

    @classmethod
    def random_directions(cls, n_directions: int, seed: int = 0) -> "HalfspaceConfig":
        return cls(mode=RANDOM_DIRECTIONS, n_directions=n_directions, seed=seed)


def default_halfspace_config(d: int) -> HalfspaceConfig:
    """Exact mode for d <= 2; higher dimensions must choose a direction count."""
    if d == 1:
        return HalfspaceConfig.exact_1d()
    if d == 2:
        return HalfspaceConfig.exact_2d()
    raise ValidationError(
        "halfspace depth in dimension >= 3 needs an explicit random-directions configuration"
    )


def _halfspace_exact_1d(values: np.ndarray, z: float) -> float:
    n = values.shape[0]
    below = float(np.count_nonzero(values <= z)) / n
    above = float(np.count_nonzero(values >= z)) / n
    return min(below, above)


def _count_closed(diffs: np.ndarray, angle: float) -> int:
    u = np.array([math.cos(angle), math.sin(angle)])
    return int(np.count_nonzero(diffs @ u >= 0.0))


def _halfspace_exact_2d(points: np.ndarray, z: np.ndarray) -> float:
    """Angular sweep over the circle of unit normals.

    A non-duplicate point lies in the closed halfspace of direction u(phi)
    exactly when phi falls in the closed half-circle arc centred on its angle,
    so the count of covered points is piecewise constant between arc
    endpoints and the minimum is attained on an open gap.  The sweep sorts
    the 2n endpoints and walks the gaps; duplicates of the query belong to
    every closed halfspace and are added back at the end.
    """
    n = points.shape[0]
    diffs = points - z
    nonzero = np.any(diffs != 0.0, axis=1)
    dup_count = n - int(np.count_nonzero(nonzero))
    rest = diffs[nonzero]
    if rest.shape[0] == 0:
        return 1.0
    theta = np.arctan2(rest[:, 1], rest[:, 0])
    half_pi = 0.5 * np.pi
    two_pi = 2.0 * np.pi
    starts = np.mod(theta - half_pi, two_pi)
    ends = np.mod(theta + half_pi, two_pi)
    angles = np.concatenate([starts, ends])
    deltas = np.concatenate([np.ones(starts.size), -np.ones(ends.size)])
    order = np.argsort(angles, kind="stable")
    angles = angles[order]
    deltas = deltas[order]

    # count on the wrap-around gap between the last and first endpoint
    gap_open = angles[-1]
    gap_close = angles[0] + two_pi
    active = _count_closed(rest, float(np.mod(0.5 * (gap_open + gap_close), two_pi)))

    best = active
    best_angle = 0.5 * (gap_open + gap_close)
    total = angles.size
    i = 0
    while i < total:
        j = i
        shift = 0.0
        while j < total and angles[j] == angles[i]:
            shift += deltas[j]
            j += 1
        active += int(shift)
        next_angle = angles[j] if j < total else angles[0] + two_pi
        if active < best:
            best = active
            best_angle = 0.5 * (angles[i] + next_angle)
        i = j

    # re-count the winning gap from the raw vectors; the sweep's incremental
    # bookkeeping can split an exactly antipodal pair into a spurious gap
    best = min(max(best, 0), _count_closed(rest, float(np.mod(best_angle, two_pi))))
    return (best + dup_count) / n


def _halfspace_random(points: np.ndarray, z: np.ndarray, config: HalfspaceConfig) -> float:
    rng = np.random.default_rng(config.seed)
    directions = rng.standard_normal((config.n_directions, points.shape[1]))
    norms = np.linalg.norm(directions, axis=1)
    directions[norms == 0.0] = 0.0
    directions[norms == 0.0, 0] = 1.0
    scores = (points - z) @ directions.T
    n = points.shape[0]
    above = np.count_nonzero(scores >= 0.0, axis=0)
    below = np.count_nonzero(scores <= 0.0, axis=0)
    return float(np.minimum(above, below).min()) / n


def halfspace_depth(query, reference, config: HalfspaceConfig | None = None) -> float:
    """Smallest fraction of reference points in a closed halfspace whose
    boundary passes through the query point."""
    ref = as_data_matrix(reference)
    q = as_query_point(query)
    if ref.d != q.d:
        raise ValidationError(f"dimension mismatch: reference has d={ref.d}, query has d={q.d}")
    cfg = config if config is not None else default_halfspace_config(ref.d)
    if cfg.mode == EXACT_1D:
        if ref.d != 1:
            raise ValidationError("exact-1d halfspace depth needs one-dimensional data")
        return _halfspace_exact_1d(ref.values[:, 0], float(q.coords[0]))
    if cfg.mode == EXACT_2D:
        if ref.d != 2:
            raise ValidationError("exact-2d halfspace depth needs two-dimensional data")
        return _halfspace_exact_2d(ref.values, q.coords)
    return _halfspace_random(ref.values, q.coords, cfg)


def halfspace_depth_as_loss(query, reference, directions, strict: bool = False) -> float:
    """Depth as twice the smallest weighted zero-one loss over linear
    classifiers whose boundary passes through the query.

    Each direction u defines the classifier predicting +1 strictly above the
    hyperplane <u, x - z> = 0 and -1 on or below it.  The query sits on the
    hyperplane, is predicted -1, and contributes no loss; a reference point on
    the hyperplane counts as misclassified.  Under this boundary convention
    the value equals the closed-halfspace depth over the same directions.
    strict=True scores reference points with the zero-margin-is-correct rule
    instead, which can fall below the closed value by exactly the fraction of
    reference mass sitting on the optimal hyperplane.
    """
    ref = as_data_matrix(reference)
    q = as_query_point(query)
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if dirs.shape[0] < 1:
        raise ValidationError("halfspace loss search needs at least one direction")
    if dirs.shape[1] != ref.d:
        raise ValidationError(
            f"directions have dimension {dirs.shape[1]}, reference has d={ref.d}"
        )
    if not np.all(np.isfinite(dirs)):
        raise ValidationError("directions contain non-finite entries")
    if np.any(np.all(dirs == 0.0, axis=1)):
        raise ValidationError("directions must be non-zero")
    margins = (ref.values - q.coords) @ dirs.T
    if strict:
        counts = np.count_nonzero(margins < 0.0, axis=0)
    else:
        counts = np.count_nonzero(margins <= 0.0, axis=0)
    n = ref.n
    # weighted zero-one loss of direction u: count/(2n) for the reference side
    # plus 0 for the query, doubled
    return float(counts.min()) / n


def logistic_depth(
    query,
    reference,
    lam: float = 1.0,
    *,
    intercept: bool = True,
    reporting: Reporting = Reporting.LOSS_ONLY,
    normalize: bool = True,
    solver: SolverConfig | None = None,
) -> DepthResult:
    """Depth under the log-loss with an L2-penalised linear classifier.

    Runs gradient descent to the unique minimiser and reports the weighted
    log-loss there (plus the ridge term when reporting asks for it).  With
    normalize the value is divided by log 2, the loss of the constant-zero
    classifier, so it lands in [0, 1].
    """
    problem = DepthProblem(
        reference=as_data_matrix(reference),
        query=as_query_point(query),
        loss=LossKind.LOGISTIC,
        lam=lam,
        intercept=intercept,
        reporting=reporting,
        solver=solver,
        normalize=normalize,
    )
    return solve_logistic_problem(problem)


def solve_logistic_problem(
    problem: DepthProblem, config: SolverConfig | None = None
) -> DepthResult:
    weights, diagnostics = gradient_descent(problem, config)
    features = augment(problem.reference.values, problem.intercept)
    query_row = augment(problem.query.coords[None, :], problem.intercept)[0]
    positive = np.logaddexp(0.0, -(features @ weights))
    negative = float(np.logaddexp(0.0, float(query_row @ weights)))
    value = weighted_expectation(positive, negative)
    if problem.reporting is Reporting.LOSS_PLUS_REG:
        value += problem.lam * float(weights @ weights)
    if problem.normalize:
        value /= LOG2
    return DepthResult(
        value=float(value),
        iterations=diagnostics.iterations,
        residual=diagnostics.residual,
        converged=diagnostics.converged,
        coefficients=weights,
    )


def svm_depth(
    query,
    reference,
    lam: float = 1.0,
    *,
    kernel: KernelSpec,
    intercept: bool = False,
    reporting: Reporting = Reporting.LOSS_ONLY,
    normalize: bool = True,
    solver: SolverConfig | None = None,
    reference_gram: np.ndarray | None = None,
) -> DepthResult:
    """Depth under the hinge loss with a kernel classifier.

    Solves the box-constrained dual and reports the weighted hinge loss of
    the recovered function (plus the penalty term when requested).  The hinge
    loss of the zero function is exactly 1, so no normalisation is applied;
    the flag is accepted for interface symmetry.  Coefficients are the n+1
    dual variables, query last, with a trailing offset when intercept is on.
    """
    problem = DepthProblem(
        reference=as_data_matrix(reference),
        query=as_query_point(query),
        loss=LossKind.HINGE,
        lam=lam,
        kernel=kernel,
        intercept=intercept,
        reporting=reporting,
        solver=solver,
        normalize=normalize,
    )
    return solve_svm_problem(problem, reference_gram=reference_gram)


def solve_svm_problem(
    problem: DepthProblem,
    config: SolverConfig | None = None,
    reference_gram: np.ndarray | None = None,
) -> DepthResult:
    alpha, diagnostics = svm_dual_solve(problem, config, reference_gram)
    fvals = diagnostics.function_values
    n = problem.reference.n
    labels = np.concatenate([np.ones(n), [-1.0]])
    offset = 0.0
    coefficients = alpha
    if problem.intercept:
        box = np.concatenate(
            [np.full(n, 1.0 / (4.0 * n * problem.lam)), [1.0 / (4.0 * problem.lam)]]
        )
        offset = svm_offset(alpha, labels, box, fvals)
        coefficients = np.concatenate([alpha, [offset]])
    margins = fvals + offset
    positive = np.maximum(0.0, 1.0 - margins[:n])
    negative = float(max(0.0, 1.0 + margins[n]))
    value = weighted_expectation(positive, negative)
    if problem.reporting is Reporting.LOSS_PLUS_REG:
        value += problem.lam * float((alpha * labels) @ fvals)
    return DepthResult(
        value=float(value),
        iterations=diagnostics.iterations,
        residual=diagnostics.residual,
        converged=diagnostics.converged,
        coefficients=coefficients,
    )


METHOD_HALFSPACE = "halfspace"
METHOD_LOGISTIC = "logistic"
METHOD_SVM = "svm"


@dataclass(frozen=True, eq=False)
class DepthBatchRequest:
    """Shared settings for scoring many queries against one reference."""

    reference: DataMatrix
    queries: np.ndarray
    method: str
    lam: float = 1.0
    kernel: KernelSpec | None = None
    intercept: bool | None = None  # None picks the per-method default
    reporting: Reporting = Reporting.LOSS_ONLY
    normalize: bool = True
    solver: SolverConfig | None = None
    halfspace: HalfspaceConfig | None = None
    reference_gram: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "reference", as_data_matrix(self.reference))
        queries = np.atleast_2d(np.asarray(self.queries, dtype=float))
        if queries.size == 0:
            queries = queries.reshape(0, self.reference.d)
        if queries.ndim != 2:
            raise ValidationError(f"queries must form a 2-d array, got shape {queries.shape}")
        if queries.shape[0] > 0 and queries.shape[1] != self.reference.d:
            raise ValidationError(
                f"dimension mismatch: reference has d={self.reference.d}, "
                f"queries have d={queries.shape[1]}"
            )
        if not np.all(np.isfinite(queries)):
            raise ValidationError("queries contain non-finite entries")
        object.__setattr__(self, "queries", queries)
        if self.method not in (METHOD_HALFSPACE, METHOD_LOGISTIC, METHOD_SVM):
            raise ValidationError(f"unknown depth method {self.method!r}")
        if self.method == METHOD_SVM and self.kernel is None:
            raise ValidationError("svm depth requires a kernel")


@dataclass(eq=False)
class BatchResult:
    """Per-query results in request order; failed slots hold None and the
    failure message is recorded under the query index."""

    results: list
    errors: list

    @property
    def values(self) -> np.ndarray:
        if self.errors:
            raise ValidationError(
                f"{len(self.errors)} of {len(self.results)} queries failed; "
                f"first failure at index {self.errors[0][0]}: {self.errors[0][1]}"
            )
        return np.array([r.value for r in self.results])


def depth_batch(request: DepthBatchRequest, threads: int = 1) -> BatchResult:
    """Score every query in the request, optionally across worker threads.

    Thread count never changes the numbers: queries are independent and the
    shared reference structures are read-only.  Errors are collected per
    query instead of aborting the batch.
    """
    m = request.queries.shape[0]
    if threads < 0:
        raise ValidationError("threads must be >= 0 (0 means one per cpu)")
    if threads == 0:
        threads = os.cpu_count() or 1

    solver = request.solver if request.solver is not None else SolverConfig()
    reference_gram = request.reference_gram
    if (
        request.method == METHOD_SVM
        and reference_gram is None
        and request.reference.n <= solver.dense_gram_limit
    ):
        reference_gram = gram(request.kernel, request.reference.values)

    halfspace_cfg = request.halfspace
    if request.method == METHOD_HALFSPACE and halfspace_cfg is None:
        halfspace_cfg = default_halfspace_config(request.reference.d)

    def solve_one(index: int) -> DepthResult:
        query = request.queries[index]
        if request.method == METHOD_HALFSPACE:
            value = halfspace_depth(query, request.reference, halfspace_cfg)
            return DepthResult(value=value, iterations=0, residual=0.0, converged=True)
        if request.method == METHOD_LOGISTIC:
            intercept = True if request.intercept is None else request.intercept
            return logistic_depth(
                query,
                request.reference,
                request.lam,
                intercept=intercept,
                reporting=request.reporting,
                normalize=request.normalize,
                solver=solver,
            )
        intercept = False if request.intercept is None else request.intercept
        return svm_depth(
            query,
            request.reference,
            request.lam,
            kernel=request.kernel,
            intercept=intercept,
            reporting=request.reporting,
            normalize=request.normalize,
            solver=solver,
            reference_gram=reference_gram,
        )

    results: list = [None] * m
    errors: list = []
    if threads == 1 or m <= 1:
        for i in range(m):
            try:
                results[i] = solve_one(i)
            except Exception as exc:  # noqa: BLE001 - aggregated per query
                errors.append((i, str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(solve_one, i) for i in range(m)]
            for i, future in enumerate(futures):
                try:
                    results[i] = future.result()
                except Exception as exc:  # noqa: BLE001
                    errors.append((i, str(exc)))
    return BatchResult(results=results, errors=errors)
