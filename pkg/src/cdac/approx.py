"""Approximate value iteration with low-dimensional value representations.

Instead of a grid table, the value function per fixation is represented by a
radial-basis-function expansion (least-squares weights over fixed centers) or
by Gaussian-process regression over a resampled training set.  Each sweep
draws fresh uniform belief samples, applies one Bellman backup using the
current model for next-state values, and refits; convergence is measured on
the weight vector (RBF) or on predictions at a fixed probe lattice (GPR).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .grid import SimplexGrid
from .model import CostParams, TaskSpec, transition_data, validate_belief
from .solver import SolveReport, assign_actions, stopping_cost_points, PolicyMap

GAUSSIAN = "gaussian"
MULTIQUADRIC = "multiquadric"
INVERSE_QUADRATIC = "inverse_quadratic"
THIN_PLATE_SPLINE = "thin_plate_spline"

_KERNELS = (GAUSSIAN, MULTIQUADRIC, INVERSE_QUADRATIC, THIN_PLATE_SPLINE)

# deterministic extra centers appended when the requested count is not a
# triangular number: sub-triangle centroids, then the barycenter
_CENTER_PADS = (
    (2 / 3, 1 / 6, 1 / 6),
    (1 / 6, 2 / 3, 1 / 6),
    (1 / 6, 1 / 6, 2 / 3),
    (1 / 3, 1 / 3, 1 / 3),
)


class DivergenceError(RuntimeError):
    """Approximate value iteration blew past the configured weight bound."""


class FactorizationError(RuntimeError):
    """GP kernel matrix stayed non-positive-definite after jitter escalation."""


@dataclass(frozen=True)
class RbfConfig:
    """Settings for the RBF solver: ``n_centers`` bases of width ``sigma``,
    ``n_samples`` fresh belief samples per sweep."""

    n_centers: int = 45
    sigma: float = 0.2
    kernel: str = GAUSSIAN
    epsilon: float = 1.0
    n_samples: int = 1000
    seed: int = 0
    tolerance: float = 1e-4
    max_iters: int = 50
    weight_bound: float = 1e9

    def __post_init__(self):
        if self.n_centers < 1:
            raise ValueError("need at least one center")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.kernel not in _KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.n_samples < 1:
            raise ValueError("need at least one sample per sweep")


@dataclass(frozen=True)
class GprConfig:
    """Settings for the GPR solver: ``n_points`` regression points with a
    squared-exponential kernel (length scale, signal and noise strengths)."""

    n_points: int = 200
    length_scale: float = 1.0
    signal: float = 1.0
    noise: float = 0.1
    seed: int = 0
    tolerance: float = 1e-3
    max_iters: int = 50
    probe_m: int = 20

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("need at least one regression point")
        if self.length_scale <= 0 or self.signal <= 0:
            raise ValueError("length scale and signal strength must be positive")
        if self.noise < 0:
            raise ValueError(f"noise strength must be >= 0, got {self.noise}")


def sample_simplex(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform samples on the 3-simplex (flat Dirichlet)."""
    return rng.dirichlet((1.0, 1.0, 1.0), size=n)


def rbf_centers(n_centers: int) -> np.ndarray:
    """Center layout: the densest triangular lattice that fits, then fixed
    interior pads, then (for larger requests) seeded uniform fill-ins."""
    t = 2
    while (t + 1) * (t + 2) // 2 <= n_centers:
        t += 1
    lattice = SimplexGrid(t).points if t * (t + 1) // 2 <= n_centers else \
        np.empty((0, 3))
    centers = [np.asarray(lattice)]
    missing = n_centers - len(lattice)
    if missing > 0:
        pads = np.asarray(_CENTER_PADS[:missing])
        centers.append(pads)
        missing -= len(pads)
    if missing > 0:
        filler = sample_simplex(np.random.default_rng(0xC0FFEE), missing)
        centers.append(filler)
    out = np.vstack(centers)[:n_centers]
    out.flags.writeable = False
    return out


def rbf_design(centers, sigma: float, points, kernel: str = GAUSSIAN,
               epsilon: float = 1.0) -> np.ndarray:
    """Design matrix with entry (i, j) = kernel(||point_i - center_j||).

    Distances are Euclidean in the full 3-d belief coordinates.  The Gaussian
    uses the density normalization 1/(sigma (2 pi)^{3/2}).
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    r = cdist(points, centers)
    if kernel == GAUSSIAN:
        norm = 1.0 / (sigma * (2.0 * np.pi) ** 1.5)
        return norm * np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    if kernel == MULTIQUADRIC:
        return np.sqrt(1.0 + epsilon * r ** 2)
    if kernel == INVERSE_QUADRATIC:
        return 1.0 / (1.0 + epsilon * r ** 2)
    if kernel == THIN_PLATE_SPLINE:
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(r > 0.0, r ** 2 * np.log(r), 0.0)
        return phi
    raise ValueError(f"unknown kernel {kernel!r}")


def rbf_fit(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares weights for one or more target columns."""
    design = np.asarray(design, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if design.shape[0] != targets.shape[0]:
        raise ValueError(
            f"design has {design.shape[0]} rows but targets {targets.shape[0]}")
    w, *_ = np.linalg.lstsq(design, targets, rcond=None)
    return w


@dataclass
class RbfModel:
    """Fitted RBF value representation: ``weights[a]`` are the basis weights
    of the value surface under fixation ``a``."""

    task: TaskSpec
    costs: CostParams
    centers: np.ndarray   # (M, 3)
    sigma: float
    weights: np.ndarray   # (A, M)
    kernel: str = GAUSSIAN
    epsilon: float = 1.0

    def design(self, points) -> np.ndarray:
        return rbf_design(self.centers, self.sigma, points, self.kernel,
                          self.epsilon)

    def predict(self, a: int, points) -> np.ndarray:
        return self.design(points) @ self.weights[a]

    def predict_all(self, points) -> np.ndarray:
        return (self.design(points) @ self.weights.T).T

    def decide(self, p, current: int, rng=None):
        return _model_decide(self, p, current)


@dataclass
class GprModel:
    """GP-regression value representation over one shared training set."""

    task: TaskSpec
    costs: CostParams
    train_points: np.ndarray  # (N, 3)
    targets: np.ndarray       # (A, N)
    length_scale: float
    signal: float
    noise: float
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._alpha is None:
            k = _se_kernel(self.train_points, self.train_points,
                           self.length_scale, self.signal)
            factor = _factor_with_jitter(k, self.noise, self.signal)
            self._alpha = cho_solve(factor, self.targets.T).T  # (A, N)

    def predict(self, a: int, points) -> np.ndarray:
        k_star = _se_kernel(np.atleast_2d(points), self.train_points,
                            self.length_scale, self.signal)
        return k_star @ self._alpha[a]

    def predict_all(self, points) -> np.ndarray:
        k_star = _se_kernel(np.atleast_2d(points), self.train_points,
                            self.length_scale, self.signal)
        return (k_star @ self._alpha.T).T

    def decide(self, p, current: int, rng=None):
        return _model_decide(self, p, current)


def _se_kernel(x, y, length_scale: float, signal: float) -> np.ndarray:
    d2 = cdist(x, y, "sqeuclidean")
    return signal ** 2 * np.exp(-d2 / (2.0 * length_scale ** 2))


def _factor_with_jitter(k: np.ndarray, noise: float, signal: float):
    n = k.shape[0]
    base = k + noise ** 2 * np.eye(n)
    jitters = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)
    last_exc = None
    for jit in jitters:
        try:
            return cho_factor(base + jit * signal ** 2 * np.eye(n), lower=True)
        except np.linalg.LinAlgError as exc:
            last_exc = exc
    eigs = np.linalg.eigvalsh(base)
    raise FactorizationError(
        f"kernel matrix is not positive definite even with jitter "
        f"{jitters[-1]:g} (min eigenvalue {eigs.min():.3e}, "
        f"noise {noise:g})") from last_exc


def bellman_backup_targets(task: TaskSpec, costs: CostParams, predict_fn,
                           points: np.ndarray) -> np.ndarray:
    """One Bellman backup at arbitrary belief points, using ``predict_fn(a,
    pts)`` for next-state values.  Returns targets of shape (A, n)."""
    ev = _continuation_ev(task, costs, predict_fn, points)
    stop = stopping_cost_points(task, points)
    n_actions = ev.shape[0]
    actions = np.arange(n_actions)
    out = np.empty_like(stop)
    for a in range(n_actions):
        q = ev + costs.c_s * (actions != a)[:, None]
        np.minimum(stop[a], q.min(axis=0), out=out[a])
    return out


def _continuation_ev(task: TaskSpec, costs: CostParams, predict_fn,
                     points: np.ndarray) -> np.ndarray:
    """Continuation values before the switch charge, shape (A, n)."""
    post, pprob = transition_data(task, points)
    n_actions, n_obs, n = pprob.shape
    ev = np.full((n_actions, n), costs.c)
    for j in range(n_actions):
        # evaluate the model once per action on all outcome posteriors
        flat = post[j].reshape(n_obs * n, task.k)
        vals = np.asarray(predict_fn(j, flat)).reshape(n_obs, n)
        ev[j] += np.einsum("on,on->n", pprob[j], vals)
    return ev


def _model_decide(model, p, current: int):
    """Stop/continue decision induced by a fitted value model (same tie rules
    as exact policy extraction)."""
    p = validate_belief(p)
    pts = p[None, :]
    ev = _continuation_ev(model.task, model.costs, model.predict, pts)[:, 0]
    q = ev + model.costs.c_s * (np.arange(len(ev)) != current)
    best = float(q.min())
    stop = stopping_cost_points(model.task, pts)[current, 0]
    if stop <= best:
        if model.task.stop_anywhere:
            return ("stop", int(np.argmax(p)))
        return ("stop", int(current))
    if q[current] == best:
        return ("continue", int(current))
    return ("continue", int(np.argmin(q)))


def approx_policy_map(model, grid: SimplexGrid) -> PolicyMap:
    """Evaluate a fitted model's policy on every grid cell."""
    ev = _continuation_ev(model.task, model.costs, model.predict, grid.points)
    stop = stopping_cost_points(model.task, grid.points)
    kind, arg = assign_actions(model.task, model.costs, grid, stop, ev)
    method = "rbf" if isinstance(model, RbfModel) else "gpr"
    return PolicyMap(grid=grid, task=model.task, costs=model.costs, kind=kind,
                     arg=arg, method=method)


def policy_agreement(a: PolicyMap, b: PolicyMap) -> dict:
    """Fraction of grid cells per fixation (and overall) where two policies
    pick the identical action."""
    if a.kind.shape != b.kind.shape:
        raise ValueError("policy maps must share the same grid and task")
    same = (a.kind == b.kind) & (a.arg == b.arg)
    per_fix = same.mean(axis=1)
    return {"per_fixation": per_fix, "overall": float(same.mean())}


def rbf_value_iteration(task: TaskSpec, costs: CostParams,
                        config: RbfConfig = RbfConfig()):
    """Fit the RBF value representation by sampled Bellman sweeps.

    Each sweep draws fresh uniform samples, backs them up through the current
    model, and refits the weights; the loop ends when the largest weight
    change drops to ``config.tolerance``.  Raises :class:`DivergenceError`
    when weights blow up and :class:`~cdac.solver.ConvergenceError` (via the
    report) is *not* raised on max_iters -- the report flags it instead,
    since sampling noise makes late sweeps stochastic.

    Returns ``(RbfModel, SolveReport)``.
    """
    rng = np.random.default_rng(config.seed)
    centers = rbf_centers(config.n_centers)
    t0 = time.perf_counter()
    x = sample_simplex(rng, config.n_samples)
    phi = rbf_design(centers, config.sigma, x, config.kernel, config.epsilon)
    weights = rbf_fit(phi, stopping_cost_points(task, x).T).T  # (A, M)
    model = RbfModel(task=task, costs=costs, centers=centers,
                     sigma=config.sigma, weights=weights,
                     kernel=config.kernel, epsilon=config.epsilon)
    deltas = []
    converged = False
    for _ in range(config.max_iters):
        x = sample_simplex(rng, config.n_samples)
        targets = bellman_backup_targets(task, costs, model.predict, x)
        phi = rbf_design(centers, config.sigma, x, config.kernel,
                         config.epsilon)
        new_weights = rbf_fit(phi, targets.T).T
        delta = float(np.abs(new_weights - model.weights).max())
        model.weights = new_weights
        deltas.append(delta)
        if not np.all(np.isfinite(new_weights)) or \
                np.abs(new_weights).max() > config.weight_bound:
            raise DivergenceError(
                f"weights exceeded bound {config.weight_bound:g} after "
                f"{len(deltas)} sweeps (max |w| = {np.abs(new_weights).max():.3e})")
        if delta <= config.tolerance:
            converged = True
            break
    report = SolveReport(iterations=len(deltas),
                         final_delta=deltas[-1] if deltas else 0.0,
                         converged=converged,
                         wall_time=time.perf_counter() - t0,
                         backend="python", deltas=tuple(deltas))
    return model, report


def gpr_value_iteration(task: TaskSpec, costs: CostParams,
                        config: GprConfig = GprConfig()):
    """Same sampled sweep scheme with the regressor swapped for a GP.

    Convergence is measured as the sup-norm change of predictions at a fixed
    probe lattice, since the training set is resampled each sweep.

    Returns ``(GprModel, SolveReport)``.
    """
    rng = np.random.default_rng(config.seed)
    probes = SimplexGrid(config.probe_m).points
    t0 = time.perf_counter()
    x = sample_simplex(rng, config.n_points)
    model = GprModel(task=task, costs=costs, train_points=x,
                     targets=stopping_cost_points(task, x),
                     length_scale=config.length_scale, signal=config.signal,
                     noise=config.noise)
    prev = model.predict_all(probes)
    deltas = []
    converged = False
    for _ in range(config.max_iters):
        x = sample_simplex(rng, config.n_points)
        targets = bellman_backup_targets(task, costs, model.predict, x)
        model = GprModel(task=task, costs=costs, train_points=x,
                         targets=targets, length_scale=config.length_scale,
                         signal=config.signal, noise=config.noise)
        pred = model.predict_all(probes)
        delta = float(np.abs(pred - prev).max())
        prev = pred
        deltas.append(delta)
        if delta <= config.tolerance:
            converged = True
            break
    report = SolveReport(iterations=len(deltas),
                         final_delta=deltas[-1] if deltas else 0.0,
                         converged=converged,
                         wall_time=time.perf_counter() - t0,
                         backend="python", deltas=tuple(deltas))
    return model, report


def select_hyperparameters(task: TaskSpec, costs: CostParams, candidates, *,
                           n_train: int = 200, n_probe: int = 200,
                           seed: int = 0, validation=None):
    """Pick GP hyperparameters (length scale, signal, noise) by held-out error.

    By default each candidate is fitted to stopping costs at seeded training
    samples, and scored by how closely one Bellman backup through its
    predictions matches the backup through the exact stopping-cost function
    at probe points.  Supplying ``validation=(points, targets)`` scores plain
    prediction error against the given targets instead.  Ties keep the first
    candidate in input order.

    Returns ``(best_candidate, errors)``.
    """
    candidates = [tuple(float(v) for v in cand) for cand in candidates]
    if not candidates:
        raise ValueError("candidate grid is empty")
    rng = np.random.default_rng(seed)
    x_train = sample_simplex(rng, n_train)
    y_train = stopping_cost_points(task, x_train)
    if validation is None:
        x_probe = sample_simplex(rng, n_probe)

        def exact_values(a, pts):
            return stopping_cost_points(task, np.atleast_2d(pts))[a]

        target = bellman_backup_targets(task, costs, exact_values, x_probe)
    else:
        x_probe = np.atleast_2d(np.asarray(validation[0], dtype=np.float64))
        target = np.asarray(validation[1], dtype=np.float64)
    errors = []
    for length_scale, signal, noise in candidates:
        gp = GprModel(task=task, costs=costs, train_points=x_train,
                      targets=y_train, length_scale=length_scale,
                      signal=signal, noise=noise)
        if validation is None:
            approx = bellman_backup_targets(task, costs, gp.predict, x_probe)
        else:
            approx = gp.predict_all(x_probe)
        errors.append(float(np.mean((approx - target) ** 2)))
    best = int(np.argmin(errors))
    return candidates[best], errors
