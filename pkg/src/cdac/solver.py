"""Bayes-risk value iteration over the discretized belief simplex.

The controller state is (belief, current fixation).  At each state the agent
either stops (paying the expected error probability) or continues observing
at some location (paying the time cost ``c``, a switch cost ``c_s`` when the
location changes, and the expected cost-to-go at the updated belief).  With
the value table initialized at the stopping cost, the Bellman operator is
monotone non-increasing, so sweeps converge to the optimal stationary value
function; the induced policy partitions the simplex into stop and
continuation regions per fixation.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import backends
from .grid import BARYCENTRIC, NEAREST, SimplexGrid, ValueFunction
from .model import CostParams, TaskSpec, transition_data, update_all_outcomes, validate_belief

STOP = 0
CONTINUE = 1


class ConvergenceError(RuntimeError):
    """Value iteration failed to reach the requested tolerance."""

    def __init__(self, message: str, report: "SolveReport"):
        super().__init__(message)
        self.report = report


@dataclass
class SolveReport:
    """Convergence statistics for one solve."""

    iterations: int
    final_delta: float
    converged: bool
    wall_time: float
    backend: str = "python"
    deltas: tuple[float, ...] = ()


@dataclass
class SweepTables:
    """Precomputed one-step lookahead for every (action, outcome, grid point):
    interpolation stencil of the posterior and its predictive probability."""

    vert: np.ndarray   # (A, O, P, 3) int32
    wt: np.ndarray     # (A, O, P, 3) float64
    pprob: np.ndarray  # (A, O, P) float64


def stopping_cost(task: TaskSpec, p, a: int) -> float:
    """Expected error cost of stopping now at belief ``p`` under fixation ``a``.

    task1 must declare the fixated location (cost ``1 - p[a]``); task2 may
    declare any location (cost ``1 - max(p)``).
    """
    p = validate_belief(p)
    a = int(a)
    if not 0 <= a < task.n_actions:
        raise ValueError(f"fixation index {a} out of range for {task.kind}")
    if task.stop_anywhere:
        return float(1.0 - p.max())
    return float(1.0 - p[a])


def stopping_cost_points(task: TaskSpec, points: np.ndarray) -> np.ndarray:
    """Stopping cost at arbitrary beliefs for every fixation; shape (A, n)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if task.stop_anywhere:
        row = 1.0 - pts.max(axis=1)
        return np.ascontiguousarray(np.tile(row, (task.n_actions, 1)))
    return np.ascontiguousarray(np.stack([1.0 - pts[:, a] for a in range(3)]))


def stopping_cost_table(task: TaskSpec, grid: SimplexGrid) -> np.ndarray:
    """Stopping cost at every grid point for every fixation; shape (A, P)."""
    return stopping_cost_points(task, grid.points)


def precompute_sweep_tables(task: TaskSpec, grid: SimplexGrid,
                            interp: str = BARYCENTRIC) -> SweepTables:
    """Build the gather/weight/probability tensors consumed by the sweep."""
    post, pprob = transition_data(task, grid.points)
    n_actions, n_obs, n_points = pprob.shape
    vert = np.empty((n_actions, n_obs, n_points, 3), dtype=np.int32)
    wt = np.empty((n_actions, n_obs, n_points, 3))
    for a in range(n_actions):
        for o in range(n_obs):
            q = post[a, o][:, :2]
            if interp == BARYCENTRIC:
                verts, weights = grid.barycentric_many(q)
            elif interp == NEAREST:
                idx = grid.nearest_many(q).astype(np.int32)
                verts = np.stack([idx, idx, idx], axis=1)
                weights = np.zeros((n_points, 3))
                weights[:, 0] = 1.0
            else:
                raise ValueError(f"unknown interpolation scheme {interp!r}")
            vert[a, o] = verts
            wt[a, o] = weights
    return SweepTables(vert=np.ascontiguousarray(vert),
                       wt=np.ascontiguousarray(wt),
                       pprob=np.ascontiguousarray(pprob))


def value_iteration(task: TaskSpec, costs: CostParams, grid: SimplexGrid, *,
                    tolerance: float = 1e-6, max_iters: int = 1000,
                    interp: str = BARYCENTRIC, backend: str | None = None,
                    tables: SweepTables | None = None):
    """Iterate the Bellman recursion to convergence.

    The table starts at the stopping cost (an upper bound, so sweeps are
    monotone non-increasing) and stops once the sup-norm change drops to
    ``tolerance``.  Raises :class:`ConvergenceError` after ``max_iters``
    sweeps, carrying the last delta in its report.

    Returns ``(ValueFunction, SolveReport)``.
    """
    if not tolerance > 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    sweep = backends.get_sweep(backend)
    backend_name = "cython" if sweep is not backends.sweep_py.bellman_sweep else "python"
    if tables is None:
        tables = precompute_sweep_tables(task, grid, interp)
    stop = stopping_cost_table(task, grid)
    v = stop.copy()
    out = np.empty_like(v)
    deltas = []
    converged = False
    t0 = time.perf_counter()
    for _ in range(max_iters):
        delta = sweep(v, stop, tables.vert, tables.wt, tables.pprob,
                      costs.c, costs.c_s, out)
        v, out = out, v
        deltas.append(float(delta))
        if delta <= tolerance:
            converged = True
            break
    wall = time.perf_counter() - t0
    report = SolveReport(iterations=len(deltas), final_delta=deltas[-1],
                         converged=converged, wall_time=wall,
                         backend=backend_name, deltas=tuple(deltas))
    if not converged:
        raise ConvergenceError(
            f"value iteration did not converge in {max_iters} sweeps "
            f"(last delta {deltas[-1]:.3e} > tolerance {tolerance:.3e})", report)
    vf = ValueFunction(grid=grid, values=v.copy(), interp=interp)
    return vf, report


def continuation_q(task: TaskSpec, costs: CostParams, vf: ValueFunction,
                   current: int, nxt: int, p) -> float:
    """Expected total cost of observing next at ``nxt`` from (p, current):
    time cost, switch charge if the fixation moves, and the expected
    interpolated cost-to-go over all observation outcomes."""
    p = validate_belief(p)
    post, pprob = update_all_outcomes(task, p, nxt)
    expected = 0.0
    for o in range(len(pprob)):
        if pprob[o] > 0.0:
            expected += pprob[o] * vf.interpolate(nxt, post[o])
    return float(costs.c + (costs.c_s if nxt != current else 0.0) + expected)


def continuation_table(task: TaskSpec, costs: CostParams, vf: ValueFunction,
                       tables: SweepTables | None = None) -> np.ndarray:
    """Continuation values before the switch charge, at every grid point;
    shape (A, P)."""
    if tables is None:
        tables = precompute_sweep_tables(task, vf.grid, vf.interp)
    return backends.continuation_values(vf.values, tables.vert, tables.wt,
                                        tables.pprob, costs.c)


def bellman_residual(task: TaskSpec, costs: CostParams, vf: ValueFunction,
                     tables: SweepTables | None = None) -> float:
    """Sup-norm of V - min(stop, best continuation) over the whole table."""
    ev = continuation_table(task, costs, vf, tables)
    stop = stopping_cost_table(task, vf.grid)
    n_actions = ev.shape[0]
    actions = np.arange(n_actions)
    worst = 0.0
    for a in range(n_actions):
        q = ev + costs.c_s * (actions != a)[:, None]
        backed = np.minimum(stop[a], q.min(axis=0))
        worst = max(worst, float(np.abs(vf.values[a] - backed).max()))
    return worst


@dataclass
class PolicyMap:
    """Per-fixation assignment of every grid cell to Stop(location) or
    Continue(next fixation)."""

    grid: SimplexGrid
    task: TaskSpec
    costs: CostParams
    kind: np.ndarray  # (A, P) uint8, STOP or CONTINUE
    arg: np.ndarray   # (A, P) int16: declared location / next action index
    report: SolveReport | None = None
    method: str = "exact"

    @property
    def n_fixations(self) -> int:
        return self.kind.shape[0]

    def decide(self, p, current: int, rng=None):
        """Action at a (possibly off-grid) belief: the assignment of the
        nearest grid cell.  Returns ('stop', location) or ('continue', next)."""
        p = np.asarray(p, dtype=np.float64)
        idx = int(self.grid.nearest_many(p[None, :2])[0])
        if self.kind[current, idx] == STOP:
            return ("stop", int(self.arg[current, idx]))
        return ("continue", int(self.arg[current, idx]))

    def stop_count(self, fixation: int) -> int:
        return int(np.sum(self.kind[fixation] == STOP))

    def stop_fraction(self, fixation: int) -> float:
        return self.stop_count(fixation) / self.grid.n_points

    def stop_region_connected(self, fixation: int) -> bool:
        """True when the stop cells form one lattice-connected component
        (6-neighborhood on the triangular lattice)."""
        mask = self._stop_mask_2d(fixation)
        seeds = np.argwhere(mask)
        if len(seeds) == 0:
            return True
        seen = np.zeros_like(mask)
        queue = deque([tuple(seeds[0])])
        seen[tuple(seeds[0])] = True
        while queue:
            i, j = queue.popleft()
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)):
                ni, nj = i + di, j + dj
                if 0 <= ni < mask.shape[0] and 0 <= nj < mask.shape[1] \
                        and mask[ni, nj] and not seen[ni, nj]:
                    seen[ni, nj] = True
                    queue.append((ni, nj))
        return bool(np.all(seen[mask]))

    def stops_at_vertex(self, fixation: int, location: int) -> bool:
        """Whether the simplex vertex of ``location`` is a stop cell."""
        m = self.grid.m
        ij = [(m - 1, 0), (0, m - 1), (0, 0)][location]
        idx = int(self.grid.flat_index(*ij))
        return bool(self.kind[fixation, idx] == STOP)

    def _stop_mask_2d(self, fixation: int) -> np.ndarray:
        m = self.grid.m
        mask = np.zeros((m, m), dtype=bool)
        lat = self.grid.lattice
        stop_cells = self.kind[fixation] == STOP
        mask[lat[stop_cells, 0], lat[stop_cells, 1]] = True
        return mask


def assign_actions(task: TaskSpec, costs: CostParams, grid: SimplexGrid,
                   stop: np.ndarray, ev: np.ndarray):
    """Shared stop/continue assignment given stopping costs and continuation
    values (both (A, P)).

    Ties between stopping and the best continuation go to Stop; continuation
    ties prefer the current fixation, then the lowest action index.  Stop
    declarations use the fixated location for task1 and the belief argmax
    (lowest index on ties) for task2.
    """
    n_actions, n_points = ev.shape
    actions = np.arange(n_actions)
    kind = np.empty((n_actions, n_points), dtype=np.uint8)
    arg = np.empty((n_actions, n_points), dtype=np.int16)
    stop_arg = (np.argmax(grid.points, axis=1).astype(np.int16)
                if task.stop_anywhere else None)
    for a in range(n_actions):
        q = ev + costs.c_s * (actions != a)[:, None]
        best = q.min(axis=0)
        barg = np.argmin(q, axis=0).astype(np.int16)
        barg[q[a] == best] = a  # stay on tie
        is_stop = stop[a] <= best
        kind[a] = np.where(is_stop, STOP, CONTINUE)
        declared = stop_arg if task.stop_anywhere else np.int16(a)
        arg[a] = np.where(is_stop, declared, barg)
    return kind, arg


def extract_policy(task: TaskSpec, costs: CostParams, vf: ValueFunction,
                   tables: SweepTables | None = None,
                   report: SolveReport | None = None) -> PolicyMap:
    """Read the stop/continue policy off a converged value function."""
    ev = continuation_table(task, costs, vf, tables)
    stop = stopping_cost_table(task, vf.grid)
    kind, arg = assign_actions(task, costs, vf.grid, stop, ev)
    return PolicyMap(grid=vf.grid, task=task, costs=costs, kind=kind, arg=arg,
                     report=report)


def solve(task: TaskSpec, costs: CostParams, grid: SimplexGrid, *,
          tolerance: float = 1e-6, max_iters: int = 1000,
          interp: str = BARYCENTRIC, backend: str | None = None):
    """Value-iterate and extract the policy, sharing the precomputed tables.

    Returns ``(ValueFunction, PolicyMap, SolveReport)``.
    """
    tables = precompute_sweep_tables(task, grid, interp)
    vf, report = value_iteration(task, costs, grid, tolerance=tolerance,
                                 max_iters=max_iters, interp=interp,
                                 backend=backend, tables=tables)
    policy = extract_policy(task, costs, vf, tables=tables, report=report)
    return vf, policy, report
