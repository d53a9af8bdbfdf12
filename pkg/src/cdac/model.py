"""Observation models, Bayesian belief updating, and cost bookkeeping.

Two visual-search tasks over k=3 candidate target locations are supported:

* ``task1`` -- the agent fixates one location at a time and receives a single
  binary sample from it.  The sample favors 1 at the target (probability
  ``beta1``) and favors 0 at a distractor (probability ``1 - beta1`` of a 1).
  Stopping is restricted to declaring the currently fixated location.
* ``task2`` -- peripheral vision.  Seven fixation actions (three target
  locations, three midway points, one center) each yield a 3-bit observation,
  one bit per location, with per-location acuity drawn from four quality
  levels ``beta1 > beta2 > beta3 > beta4``.  The agent may stop and declare
  any location.

Beliefs are plain length-3 numpy vectors on the probability simplex.  All
functions here are pure; shared tables are cached per task spec.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

TASK1 = "task1"
TASK2 = "task2"

# Acuity level (1-based index into betas) per location for each task2 action.
# Fixating a location sees it at beta1 and the others at beta4; a midway
# point sees its two neighbors at beta2 and the far location at beta4; the
# center sees all three at beta3.
_TASK2_LABELS = ("l1", "l2", "l3", "l12", "l23", "l13", "l123")
_TASK2_LEVELS = (
    (1, 4, 4),
    (4, 1, 4),
    (4, 4, 1),
    (2, 2, 4),
    (4, 2, 2),
    (2, 4, 2),
    (3, 3, 3),
)


class DegenerateModelError(RuntimeError):
    """Raised when a posterior update wipes out all probability mass."""


@dataclass(frozen=True)
class FixationAction:
    """A continuation action: where to look next.

    ``acuity`` maps each location to the 0-based index into the task's beta
    tuple, or ``None`` when the location is not observed under this fixation.
    """

    id: int
    label: str
    acuity: tuple[int | None, ...]


@dataclass(frozen=True)
class CostParams:
    """Per-trial cost coefficients: time cost ``c`` per observation, switch
    cost ``c_s`` per fixation change; the error cost is fixed at 1."""

    c: float
    c_s: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"time cost c must be positive, got {self.c}")
        if self.c_s < 0:
            raise ValueError(f"switch cost c_s must be >= 0, got {self.c_s}")


@dataclass(frozen=True)
class TaskSpec:
    """Observation model and action sets for one of the two search tasks."""

    kind: str
    betas: tuple[float, ...]
    k: int = 3

    def __post_init__(self):
        if self.k != 3:
            raise ValueError("only k=3 candidate locations are supported")
        if self.kind == TASK1:
            if len(self.betas) != 1:
                raise ValueError("task1 takes a single beta1")
            b1 = self.betas[0]
            if not 0.5 < b1 <= 1.0:
                raise ValueError(f"task1 requires 0.5 < beta1 <= 1, got {b1}")
        elif self.kind == TASK2:
            if len(self.betas) != 4:
                raise ValueError("task2 takes four betas")
            b1, b2, b3, b4 = self.betas
            if not (1.0 > b1 > b2 > b3 > b4 >= 0.5):
                raise ValueError(
                    f"task2 requires 1 > beta1 > beta2 > beta3 > beta4 >= 0.5, "
                    f"got {self.betas}")
        else:
            raise ValueError(f"unknown task kind {self.kind!r}")

    @classmethod
    def task1(cls, beta1: float) -> "TaskSpec":
        return cls(kind=TASK1, betas=(float(beta1),))

    @classmethod
    def task2(cls, beta1: float, beta2: float, beta3: float,
              beta4: float) -> "TaskSpec":
        return cls(kind=TASK2,
                   betas=(float(beta1), float(beta2), float(beta3), float(beta4)))

    @property
    def n_actions(self) -> int:
        return 3 if self.kind == TASK1 else 7

    @property
    def action_labels(self) -> tuple[str, ...]:
        return ("l1", "l2", "l3") if self.kind == TASK1 else _TASK2_LABELS

    @property
    def stop_anywhere(self) -> bool:
        """Whether stopping may declare any location (task2) or only the
        currently fixated one (task1)."""
        return self.kind == TASK2

    @property
    def obs_arity(self) -> int:
        return 1 if self.kind == TASK1 else 3

    @property
    def n_obs(self) -> int:
        return 2 ** self.obs_arity

    @property
    def observations(self) -> tuple[tuple[int, ...], ...]:
        """All observation outcomes, in lexicographic bit order."""
        return tuple(itertools.product((0, 1), repeat=self.obs_arity))

    @property
    def fixation_actions(self) -> tuple[FixationAction, ...]:
        if self.kind == TASK1:
            return tuple(
                FixationAction(j, f"l{j + 1}",
                               tuple(0 if i == j else None for i in range(3)))
                for j in range(3))
        return tuple(
            FixationAction(a, _TASK2_LABELS[a],
                           tuple(lv - 1 for lv in _TASK2_LEVELS[a]))
            for a in range(7))

    def action_index(self, label: str) -> int:
        try:
            return self.action_labels.index(label)
        except ValueError:
            raise ValueError(
                f"unknown action {label!r} for {self.kind}; "
                f"expected one of {self.action_labels}") from None

    def obs_index(self, x) -> int:
        """Flat index of an observation bit vector."""
        bits = _check_obs(self, x)
        idx = 0
        for b in bits:
            idx = 2 * idx + b
        return idx


def _check_action(task: TaskSpec, a: int) -> int:
    a = int(a)
    if not 0 <= a < task.n_actions:
        raise ValueError(f"action index {a} out of range for {task.kind}")
    return a


def _check_location(task: TaskSpec, s: int) -> int:
    s = int(s)
    if not 0 <= s < task.k:
        raise ValueError(f"location index {s} out of range 0..{task.k - 1}")
    return s


def _check_obs(task: TaskSpec, x) -> tuple[int, ...]:
    bits = tuple(int(b) for b in np.atleast_1d(x))
    if len(bits) != task.obs_arity:
        raise ValueError(
            f"{task.kind} observations have arity {task.obs_arity}, "
            f"got {len(bits)} bits")
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"observation bits must be 0 or 1, got {bits}")
    return bits


def validate_belief(p, tol: float = 1e-9) -> np.ndarray:
    """Check that ``p`` is a valid point on the 3-simplex; return a float copy."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"belief must have shape (3,), got {arr.shape}")
    if np.any(arr < -tol) or np.any(arr > 1 + tol):
        raise ValueError(f"belief entries must lie in [0, 1], got {arr}")
    if abs(float(arr.sum()) - 1.0) > tol:
        raise ValueError(f"belief must sum to 1 within {tol}, got sum {arr.sum()}")
    return np.clip(arr, 0.0, 1.0)


@lru_cache(maxsize=None)
def likelihood_table(task: TaskSpec) -> np.ndarray:
    """P(observation | target location, fixation action).

    Returns a read-only array of shape (n_actions, n_obs, k); rows sum to 1
    over the observation axis.
    """
    table = np.empty((task.n_actions, task.n_obs, task.k))
    actions = task.fixation_actions
    for a, act in enumerate(actions):
        for o, bits in enumerate(task.observations):
            for s in range(task.k):
                prob = 1.0
                if task.kind == TASK1:
                    # single bit, emitted by the fixated location
                    beta = task.betas[0]
                    theta = beta if s == a else 1.0 - beta
                    prob = theta if bits[0] == 1 else 1.0 - theta
                else:
                    for loc in range(task.k):
                        beta = task.betas[act.acuity[loc]]
                        theta = beta if loc == s else 1.0 - beta
                        prob *= theta if bits[loc] == 1 else 1.0 - theta
                table[a, o, s] = prob
    table.flags.writeable = False
    return table


def likelihood(task: TaskSpec, s: int, a: int, x) -> float:
    """Probability of observing ``x`` under fixation ``a`` when the target
    is at location ``s``."""
    s = _check_location(task, s)
    a = _check_action(task, a)
    o = task.obs_index(x)
    return float(likelihood_table(task)[a, o, s])


def belief_update(task: TaskSpec, p, a: int, x) -> np.ndarray:
    """Posterior belief after observing ``x`` under fixation ``a``.

    Zero-prior locations stay at exactly zero; the output is renormalized.
    """
    p = validate_belief(p)
    a = _check_action(task, a)
    o = task.obs_index(x)
    numer = likelihood_table(task)[a, o] * p
    z = float(numer.sum())
    if z <= 0.0:
        raise DegenerateModelError(
            f"observation {tuple(np.atleast_1d(x))} has zero probability "
            f"under every location still in the prior")
    return numer / z


def predictive_obs_dist(task: TaskSpec, p, a: int) -> list[tuple[tuple[int, ...], float]]:
    """Marginal distribution of the next observation under fixation ``a``.

    Enumerates every outcome (2 for task1, 8 for task2) with probability
    sum_i p_i * P(x | s=i, a).
    """
    p = validate_belief(p)
    a = _check_action(task, a)
    probs = likelihood_table(task)[a] @ p
    return [(obs, float(pr)) for obs, pr in zip(task.observations, probs)]


def entropy(p) -> float:
    """Shannon entropy of a belief in nats, with 0 log 0 = 0."""
    p = validate_belief(p)
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def transition_data(task: TaskSpec, points: np.ndarray):
    """Vectorized one-step lookahead for a batch of beliefs.

    For each continuation action ``a`` and observation outcome ``o``:

    * ``post[a, o, i]`` -- the posterior reached from ``points[i]``
    * ``pprob[a, o, i]`` -- the predictive probability of that outcome

    Outcomes with zero predictive probability keep the prior as posterior
    (their contribution to any expectation is zero anyway).

    Returns ``(post, pprob)`` with shapes (A, O, n, k) and (A, O, n).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != task.k:
        raise ValueError(f"points must have shape (n, {task.k})")
    table = likelihood_table(task)  # (A, O, k)
    numer = table[:, :, None, :] * pts[None, None, :, :]  # (A, O, n, k)
    pprob = numer.sum(axis=3)  # (A, O, n)
    safe = np.where(pprob > 0.0, pprob, 1.0)
    post = numer / safe[..., None]
    zero = pprob <= 0.0
    if np.any(zero):
        post = np.where(zero[..., None], pts[None, None, :, :], post)
    return post, pprob


def update_all_outcomes(task: TaskSpec, p, a: int):
    """Posteriors and predictive probabilities for every outcome of one action.

    Returns ``(post, pprob)`` with shapes (n_obs, k) and (n_obs,).
    """
    p = validate_belief(p)
    a = _check_action(task, a)
    post, pprob = transition_data(task, p[None, :])
    return post[a, :, 0, :], pprob[a, :, 0]
