"""Optimisers behind the regularised depths.

Two solvers are provided.  The logistic depth runs plain gradient descent on
the ridge-penalised expected log-loss, with a constant step set from a power
iteration bound on the Hessian.  The kernel hinge depth solves the box
constrained dual of the weighted SVM, by clipped single-coordinate Newton
ascent without an intercept (the default), or by pairwise updates that keep
the balance constraint when an unpenalised intercept is requested.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .core import (
    DepthProblem,
    LossKind,
    ValidationError,
    validate_problem,
)
from .kernels import KernelSpec, gram


@dataclass(frozen=True)
class SolverConfig:
    """Iteration budget, stopping tolerance, step rule and sweep-order seed.

    step_size None means use the inverse of the estimated gradient smoothness.
    For the dual solver the tolerance bounds the largest projected
    Karush-Kuhn-Tucker violation, and max_iterations counts full sweeps.
    """

    max_iterations: int = 10_000
    tolerance: float = 1e-8
    step_size: float | None = None
    seed: int = 0
    dense_gram_limit: int = 3000

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("solver needs max_iterations >= 1")
        if not self.tolerance > 0.0:
            raise ValidationError("solver needs a positive tolerance")
        if self.step_size is not None and not self.step_size > 0.0:
            raise ValidationError("fixed step size must be positive")


@dataclass(frozen=True)
class SmoothnessEstimate:
    """Upper bound on the gradient Lipschitz constant and the exact strong
    convexity modulus of the regularised logistic objective."""

    smoothness: float
    strong_convexity: float


@dataclass
class DescentHistory:
    values: list = field(default_factory=list)
    iterates: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class SolveDiagnostics:
    """Iteration count, final stopping residual, and convergence flag.

    The dual solver also reports how many kernel-degenerate coordinates it
    saw and the classifier values f(p_k) at the solution, so callers can
    evaluate losses without touching the kernel again.
    """

    iterations: int
    residual: float
    converged: bool
    degenerate_coordinates: int = 0
    history: DescentHistory | None = None
    function_values: np.ndarray | None = None


def _solver_config(problem: DepthProblem, override: SolverConfig | None) -> SolverConfig:
    if override is not None:
        return override
    if problem.solver is not None:
        return problem.solver
    return SolverConfig()


def augment(points: np.ndarray, intercept: bool) -> np.ndarray:
    """Append a constant-1 column when an intercept is requested."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not intercept:
        return pts
    return np.hstack([pts, np.ones((pts.shape[0], 1))])


def _require_valid(problem: DepthProblem, loss: LossKind) -> None:
    if problem.loss is not loss:
        raise ValidationError(f"expected a {loss.value} problem, got {problem.loss.value}")
    report = validate_problem(problem)
    if not report.ok:
        raise ValidationError("; ".join(report.violations))


def _logistic_parts(problem: DepthProblem) -> tuple[np.ndarray, np.ndarray]:
    features = augment(problem.reference.values, problem.intercept)
    query = augment(problem.query.coords[None, :], problem.intercept)[0]
    return features, query


def _logistic_value_grad(
    w: np.ndarray, features: np.ndarray, query: np.ndarray, lam: float
) -> tuple[float, np.ndarray]:
    n = features.shape[0]
    margins = features @ w
    query_margin = float(query @ w)
    value = (
        float(np.logaddexp(0.0, -margins).sum()) / (2.0 * n)
        + 0.5 * float(np.logaddexp(0.0, query_margin))
        + lam * float(w @ w)
    )
    grad = (
        -(features.T @ expit(-margins)) / (2.0 * n)
        + 0.5 * expit(query_margin) * query
        + 2.0 * lam * w
    )
    return value, grad


def logistic_objective(w, problem: DepthProblem) -> tuple[float, np.ndarray]:
    """Value and gradient of the ridge-penalised weighted log-loss.

    The reference rows carry label +1 and weight 1/(2n) each, the query
    carries label -1 and weight 1/2.  Numerically stable for any margin
    magnitude; no exp overflow occurs.
    """
    _require_valid(problem, LossKind.LOGISTIC)
    features, query = _logistic_parts(problem)
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != features.shape[1]:
        raise ValidationError(f"weight vector has size {w.size}, expected {features.shape[1]}")
    return _logistic_value_grad(w, features, query, problem.lam)


def power_iteration(matrix: np.ndarray, iterations: int = 100, rtol: float = 1e-10) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix."""
    m = np.asarray(matrix, dtype=float)
    v = np.ones(m.shape[0]) / np.sqrt(m.shape[0])
    estimate = 0.0
    for _ in range(iterations):
        mv = m @ v
        norm = float(np.linalg.norm(mv))
        if norm == 0.0:
            return 0.0
        v = mv / norm
        previous, estimate = estimate, norm
        if previous > 0.0 and abs(estimate - previous) <= rtol * estimate:
            break
    return estimate


def _smoothness_from_parts(
    features: np.ndarray, query: np.ndarray, lam: float
) -> SmoothnessEstimate:
    n = features.shape[0]
    hessian_bound = (features.T @ features) / (2.0 * n) + 0.5 * np.outer(query, query)
    top = power_iteration(hessian_bound)
    return SmoothnessEstimate(
        smoothness=1.01 * top + 2.0 * lam,
        strong_convexity=2.0 * lam,
    )


def estimate_smoothness(problem: DepthProblem) -> SmoothnessEstimate:
    """Hessian bound for the logistic objective.

    The curvature of the loss part is at most half the second-moment matrix
    of the augmented reference features plus half the outer product of the
    augmented query; the ridge adds 2*lam exactly.  The spectral norm comes
    from a power iteration and is inflated by 1 percent so the descent step
    stays on the safe side of the bound.
    """
    _require_valid(problem, LossKind.LOGISTIC)
    features, query = _logistic_parts(problem)
    return _smoothness_from_parts(features, query, problem.lam)


def minimize_descent(
    fun,
    w0: np.ndarray,
    step: float,
    config: SolverConfig,
    keep_history: bool = False,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Constant-step gradient descent until the gradient norm meets tolerance.

    fun maps a weight vector to (value, gradient).  Returns the final iterate
    and diagnostics; the residual is the last gradient norm seen.
    """
    if not step > 0.0:
        raise ValidationError("descent step must be positive")
    w = np.array(w0, dtype=float)
    history = DescentHistory() if keep_history else None
    residual = np.inf
    for iteration in range(config.max_iterations + 1):
        value, grad = fun(w)
        residual = float(np.linalg.norm(grad))
        if keep_history:
            history.values.append(value)
            history.iterates.append(w.copy())
        if residual <= config.tolerance:
            return w, SolveDiagnostics(iteration, residual, True, history=history)
        if iteration == config.max_iterations:
            break
        w = w - step * grad
    return w, SolveDiagnostics(config.max_iterations, residual, False, history=history)


def gradient_descent(
    problem: DepthProblem,
    config: SolverConfig | None = None,
    keep_history: bool = False,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Solve the logistic depth problem from the zero vector.

    The step is 1/smoothness unless the config fixes one.  With a positive
    ridge the objective is strongly convex, so the distance to the unique
    minimiser is at most the returned residual divided by 2*lam.
    """
    _require_valid(problem, LossKind.LOGISTIC)
    cfg = _solver_config(problem, config)
    features, query = _logistic_parts(problem)
    estimate = _smoothness_from_parts(features, query, problem.lam)
    step = cfg.step_size if cfg.step_size is not None else 1.0 / estimate.smoothness
    return minimize_descent(
        lambda w: _logistic_value_grad(w, features, query, problem.lam),
        np.zeros(features.shape[1]),
        step,
        cfg,
        keep_history=keep_history,
    )


def _svm_parts(problem: DepthProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    points = np.vstack([problem.reference.values, problem.query.coords[None, :]])
    n = problem.reference.n
    labels = np.concatenate([np.ones(n), [-1.0]])
    box = np.concatenate(
        [np.full(n, 1.0 / (4.0 * n * problem.lam)), [1.0 / (4.0 * problem.lam)]]
    )
    return points, labels, box


def _bordered_gram(
    spec: KernelSpec, points: np.ndarray, reference_gram: np.ndarray | None
) -> np.ndarray:
    if reference_gram is None:
        return gram(spec, points)
    n = points.shape[0] - 1
    if reference_gram.shape != (n, n):
        raise ValidationError(
            f"precomputed reference gram has shape {reference_gram.shape}, expected {(n, n)}"
        )
    full = np.empty((n + 1, n + 1))
    full[:n, :n] = reference_gram
    column = gram(spec, points[:n], points[n:])[:, 0]
    full[:n, n] = column
    full[n, :n] = column
    full[n, n] = gram(spec, points[n:], points[n:])[0, 0]
    return full


def svm_dual_solve(
    problem: DepthProblem,
    config: SolverConfig | None = None,
    reference_gram: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Maximise the weighted-SVM dual and return the n+1 dual coefficients.

    Dual: max over alpha of sum(alpha) - 0.5 * alpha' Y K Y alpha, subject to
    0 <= alpha_i <= 1/(4 n lam) for reference points and
    0 <= alpha_query <= 1/(4 lam) for the query.  The separating function is
    f(.) = sum_k alpha_k y_k k(p_k, .), and the minimised primal objective
    equals 2 * lam times the maximised dual value.

    Without an intercept each coordinate has the closed-form clipped Newton
    update alpha_k <- clip(alpha_k + (1 - y_k f(p_k)) / K_kk, 0, box_k),
    applied in cyclic sweeps over a seeded random order; sweeps stop when the
    largest projected KKT violation is at or below tolerance.  Coordinates
    with K_kk = 0 contribute a fixed unit hinge loss whatever alpha does, so
    they are pinned at their box bound where the (linear) dual term is
    largest, counted as degenerate, and excluded from the sweeps.  With an
    intercept the solver switches to pairwise most-violating updates
    preserving sum_k y_k alpha_k = 0.

    The kernel matrix is dense when the problem is small enough or a
    reference gram was supplied; otherwise columns are formed on demand so
    large references never materialise an n^2 matrix.
    """
    _require_valid(problem, LossKind.HINGE)
    cfg = _solver_config(problem, config)
    spec: KernelSpec = problem.kernel
    points, labels, box = _svm_parts(problem)
    m = points.shape[0]

    dense = m <= cfg.dense_gram_limit or reference_gram is not None
    kmat = _bordered_gram(spec, points, reference_gram) if dense else None
    diag = np.diagonal(kmat).copy() if dense else spec.diagonal(points)

    def column(k: int) -> np.ndarray:
        if kmat is not None:
            return kmat[:, k]
        return gram(spec, points, points[k : k + 1])[:, 0]

    degenerate = diag <= 1e-15
    alpha = np.zeros(m)
    alpha[degenerate] = box[degenerate]  # zero kernel column: the dual is linear there

    if problem.intercept:
        return _smo_with_offset(alpha, labels, box, diag, degenerate, column, cfg)

    fvals = np.zeros(m)  # f(p_k) under the current alpha; zero columns never move it
    order = np.random.default_rng(cfg.seed).permutation(np.flatnonzero(~degenerate))
    signed = alpha * labels
    residual = np.inf
    for sweep in range(1, cfg.max_iterations + 1):
        worst = 0.0
        for k in order:
            grad_k = 1.0 - labels[k] * fvals[k]
            if alpha[k] <= 0.0:
                violation = grad_k if grad_k > 0.0 else 0.0
            elif alpha[k] >= box[k]:
                violation = -grad_k if grad_k < 0.0 else 0.0
            else:
                violation = abs(grad_k)
            if violation > worst:
                worst = violation
            if violation <= cfg.tolerance:
                continue
            updated = min(max(alpha[k] + grad_k / diag[k], 0.0), box[k])
            delta = updated - alpha[k]
            if delta != 0.0:
                fvals += (delta * labels[k]) * column(k)
                alpha[k] = updated
        residual = worst
        if worst <= cfg.tolerance:
            if kmat is not None:
                np.multiply(alpha, labels, out=signed)
                fvals = kmat @ signed
            return alpha, SolveDiagnostics(
                sweep, worst, True, int(degenerate.sum()), function_values=fvals
            )
        if kmat is not None and sweep % 32 == 0:
            np.multiply(alpha, labels, out=signed)
            fvals = kmat @ signed  # shed accumulated round-off on long runs
    return alpha, SolveDiagnostics(
        cfg.max_iterations, residual, False, int(degenerate.sum()), function_values=fvals
    )


def _smo_with_offset(
    alpha: np.ndarray,
    labels: np.ndarray,
    box: np.ndarray,
    diag: np.ndarray,
    degenerate: np.ndarray,
    column,
    cfg: SolverConfig,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Pairwise dual ascent keeping sum_k y_k alpha_k = 0.

    Degenerate coordinates are reset to zero here: under a balance constraint
    a zero-column coordinate cannot be pinned unilaterally.
    """
    alpha = alpha.copy()
    alpha[degenerate] = 0.0
    active = np.flatnonzero(~degenerate)
    ndeg = int(degenerate.sum())

    def fvals_from(grad: np.ndarray) -> np.ndarray:
        return labels * (1.0 - grad)  # grad_k = 1 - y_k f_k at every alpha

    grad = np.ones_like(alpha)  # dual gradient at alpha = 0
    if active.size < 2:
        return alpha, SolveDiagnostics(0, 0.0, True, ndeg, function_values=fvals_from(grad))
    residual = np.inf
    for iteration in range(1, cfg.max_iterations + 1):
        ya = labels[active]
        scores = grad[active] * ya
        up = np.where(ya > 0, alpha[active] < box[active], alpha[active] > 0.0)
        down = np.where(ya > 0, alpha[active] > 0.0, alpha[active] < box[active])
        if not up.any() or not down.any():
            return alpha, SolveDiagnostics(
                iteration - 1, 0.0, True, ndeg, function_values=fvals_from(grad)
            )
        up_scores = np.where(up, scores, -np.inf)
        down_scores = np.where(down, scores, np.inf)
        i = active[int(np.argmax(up_scores))]
        j = active[int(np.argmin(down_scores))]
        residual = float(np.max(up_scores) - np.min(down_scores))
        if residual <= cfg.tolerance:
            return alpha, SolveDiagnostics(
                iteration - 1, residual, True, ndeg, function_values=fvals_from(grad)
            )
        col_i, col_j = column(i), column(j)
        curvature = diag[i] + diag[j] - 2.0 * float(col_i[j])
        room_i = box[i] - alpha[i] if labels[i] > 0 else alpha[i]
        room_j = alpha[j] if labels[j] > 0 else box[j] - alpha[j]
        t_max = min(room_i, room_j)
        t = min(residual / curvature, t_max) if curvature > 1e-15 else t_max
        alpha[i] += labels[i] * t
        alpha[j] -= labels[j] * t
        grad -= labels * t * (col_i - col_j)
    return alpha, SolveDiagnostics(
        cfg.max_iterations, residual, False, ndeg, function_values=fvals_from(grad)
    )


def svm_function_values(alpha, labels, kernel_matrix) -> np.ndarray:
    """f(p_k) = sum_l alpha_l y_l K_lk for every training point."""
    return kernel_matrix @ (np.asarray(alpha) * np.asarray(labels))


def svm_duality_gap(alpha, labels, fvals, lam: float) -> float:
    """Primal minus 2*lam times the dual at the no-intercept solution.

    The primal is the weighted hinge loss of f plus lam times its squared
    kernel norm; the dual is sum(alpha) - 0.5 (alpha y)' K (alpha y).  The gap
    is nonnegative and vanishes at the exact optimum, so it certifies how far
    the reported depth can sit above the true infimum.
    """
    alpha = np.asarray(alpha, dtype=float)
    labels = np.asarray(labels, dtype=float)
    fvals = np.asarray(fvals, dtype=float)
    n = alpha.size - 1
    hinge = np.maximum(0.0, 1.0 - labels * fvals)
    primal_loss = float(hinge[:n].sum()) / (2.0 * n) + 0.5 * float(hinge[n])
    squared_norm = float((alpha * labels) @ fvals)
    primal = primal_loss + lam * squared_norm
    dual = float(alpha.sum()) - 0.5 * squared_norm
    return primal - 2.0 * lam * dual


def svm_offset(alpha, labels, box, fvals) -> float:
    """Recover the unpenalised offset from the margin conditions.

    Free coordinates pin y_k (f_k + b) = 1 exactly, so b = y_k - f_k there;
    the median over free coordinates is robust.  With no free coordinate the
    KKT inequalities only bracket b, and the midpoint of the bracket is
    returned.
    """
    alpha = np.asarray(alpha)
    free = (alpha > 0.0) & (alpha < box)
    targets = np.asarray(labels) - np.asarray(fvals)
    if free.any():
        return float(np.median(targets[free]))
    up = np.where(labels > 0, alpha < box, alpha > 0.0)
    down = np.where(labels > 0, alpha > 0.0, alpha < box)
    lower = np.max(targets[up]) if up.any() else 0.0
    upper = np.min(targets[down]) if down.any() else 0.0
    return float(0.5 * (lower + upper))
