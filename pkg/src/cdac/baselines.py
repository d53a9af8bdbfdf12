"""Statistical baselines: greedy-MAP and Infomax with thresholded stopping.

Both baselines share the exact Bayesian belief updates of the optimal
controller and differ only in action selection and the stopping rule:

* greedy MAP picks the action maximizing the expected one-step-ahead maximum
  posterior probability,
* Infomax picks the action minimizing the expected one-step posterior entropy,

and both stop as soon as the largest belief entry reaches a fixed threshold,
declaring the argmax location.  Since the threshold has no principled
setting, it is calibrated by binary search so the simulated accuracy matches
a reference (typically the optimal controller's).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CostParams, TaskSpec, likelihood_table, validate_belief
from .solver import CONTINUE, STOP, PolicyMap

GREEDY_MAP = "greedy_map"
INFOMAX = "infomax"

REPORT_TIES = "report"
UNIFORM_RANDOM = "uniform_random"

# scores within this absolute distance of the best are treated as tied;
# symmetric beliefs produce exact ties up to float rounding
TIE_ATOL = 1e-12


@dataclass(frozen=True)
class ThresholdPolicy:
    """A score-greedy policy that stops at belief threshold ``threshold``."""

    kind: str
    threshold: float
    tie_rule: str = UNIFORM_RANDOM
    tie_seed: int = 0

    def __post_init__(self):
        if self.kind not in (GREEDY_MAP, INFOMAX):
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if not (1.0 / 3.0 < self.threshold < 1.0):
            raise ValueError(
                f"threshold must lie in (1/3, 1), got {self.threshold}")
        if self.tie_rule not in (REPORT_TIES, UNIFORM_RANDOM):
            raise ValueError(f"unknown tie rule {self.tie_rule!r}")

    def decide(self, task: TaskSpec, p, current: int, rng=None):
        d = threshold_policy_step(self, task, p, current, rng=rng)
        return (d.kind, d.arg)


@dataclass(frozen=True)
class Decision:
    """One policy step: ``kind`` is 'stop' or 'continue'; ``arg`` the declared
    location or next action; ``ties`` the full set of score-optimal actions."""

    kind: str
    arg: int
    ties: tuple[int, ...] = ()


def _posteriors_all_actions(task: TaskSpec, p: np.ndarray):
    """Posterior per (action, outcome) plus predictive probabilities.

    Returns ``(post, pprob)`` with shapes (A, O, k) and (A, O); zero-probability
    outcomes keep the prior as posterior.
    """
    table = likelihood_table(task)  # (A, O, k)
    numer = table * p  # broadcast over (A, O, k)
    pprob = numer.sum(axis=2)
    safe = np.where(pprob > 0.0, pprob, 1.0)
    post = numer / safe[..., None]
    return post, pprob


def greedy_map_scores(task: TaskSpec, p) -> np.ndarray:
    """Expected one-step-ahead maximum posterior per action (higher better)."""
    p = validate_belief(p)
    post, pprob = _posteriors_all_actions(task, p)
    return np.einsum("ao,ao->a", pprob, post.max(axis=2))


def infomax_scores(task: TaskSpec, p) -> np.ndarray:
    """Expected one-step posterior entropy per action (lower better)."""
    p = validate_belief(p)
    post, pprob = _posteriors_all_actions(task, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(post > 0.0, post * np.log(post), 0.0)
    ent = -plogp.sum(axis=2)  # (A, O)
    return np.einsum("ao,ao->a", pprob, ent)


def _score_ties(policy_kind: str, scores: np.ndarray) -> np.ndarray:
    if policy_kind == GREEDY_MAP:
        best = scores.max()
        return np.flatnonzero(scores >= best - TIE_ATOL)
    best = scores.min()
    return np.flatnonzero(scores <= best + TIE_ATOL)


def threshold_policy_step(policy: ThresholdPolicy, task: TaskSpec, p,
                          current: int, rng=None) -> Decision:
    """One decision: stop at the argmax location once the belief threshold is
    reached, otherwise continue at the score-optimal action.

    Tied continuations resolve uniformly at random (from ``rng``, or a fresh
    generator seeded with ``policy.tie_seed``) under the ``uniform_random``
    rule, and to the lowest tied index under ``report``; the full tie set is
    returned either way.
    """
    p = validate_belief(p)
    if float(p.max()) >= policy.threshold:
        return Decision("stop", int(np.argmax(p)))
    scores = (greedy_map_scores if policy.kind == GREEDY_MAP
              else infomax_scores)(task, p)
    ties = _score_ties(policy.kind, scores)
    if len(ties) == 1 or policy.tie_rule == REPORT_TIES:
        choice = int(ties[0])
    else:
        if rng is None:
            rng = np.random.default_rng(policy.tie_seed)
        choice = int(rng.choice(ties))
    return Decision("continue", choice, ties=tuple(int(t) for t in ties))


def threshold_policy_map(policy: ThresholdPolicy, task: TaskSpec, grid):
    """Evaluate the baseline on every grid cell.

    Continuation ties resolve to the lowest tied index so the map is
    deterministic; the per-cell tie count is returned alongside as the
    ambiguity channel.  The map is fixation-independent (scores ignore the
    current fixation), so all fixation rows are identical.

    Returns ``(PolicyMap, tie_counts)`` with ``tie_counts`` of shape (P,).
    """
    n_points = grid.n_points
    kind_row = np.empty(n_points, dtype=np.uint8)
    arg_row = np.empty(n_points, dtype=np.int16)
    tie_counts = np.ones(n_points, dtype=np.int32)
    for i, point in enumerate(grid.points):
        if float(point.max()) >= policy.threshold:
            kind_row[i] = STOP
            arg_row[i] = int(np.argmax(point))
        else:
            scores = (greedy_map_scores if policy.kind == GREEDY_MAP
                      else infomax_scores)(task, point)
            ties = _score_ties(policy.kind, scores)
            kind_row[i] = CONTINUE
            arg_row[i] = int(ties[0])
            tie_counts[i] = len(ties)
    n_fix = task.n_actions
    costs = CostParams(c=1.0, c_s=0.0)  # placeholder; thresholds carry no costs
    pm = PolicyMap(grid=grid, task=task, costs=costs,
                   kind=np.tile(kind_row, (n_fix, 1)),
                   arg=np.tile(arg_row, (n_fix, 1)),
                   method=policy.kind)
    return pm, tie_counts


@dataclass
class CalibrationResult:
    """Outcome of the accuracy-matching threshold search."""

    threshold: float
    accuracy: float
    reference_accuracy: float
    probes: tuple[tuple[float, float], ...]
    warning: bool
    message: str = ""


def calibrate_threshold(policy_kind: str, task: TaskSpec, costs: CostParams,
                        reference_accuracy: float, trials: int, seed, *,
                        accuracy_tol: float = 0.02, prior=None,
                        initial_fixation: int = 0, max_steps: int = 1000,
                        bisections: int = 16, tie_rule: str = UNIFORM_RANDOM
                        ) -> CalibrationResult:
    """Binary-search the stopping threshold to match a reference accuracy.

    Accuracy is monotone (up to Monte-Carlo noise) in the threshold; every
    probe batch reuses the same ``trials`` and seed, so the search is
    deterministic.  When no exact match exists the largest threshold whose
    accuracy does not exceed the reference is returned.  Non-monotone probe
    sequences beyond the noise bound, or a final mismatch beyond
    ``accuracy_tol``, set the warning flag instead of raising.
    """
    from .simulate import run_batch  # local import to avoid a cycle

    if not (1.0 / 3.0 < reference_accuracy <= 1.0):
        raise ValueError(
            f"reference accuracy must lie in (1/3, 1], got {reference_accuracy}")
    if trials < 1000:
        raise ValueError(f"calibration needs >= 1000 trials, got {trials}")

    lo, hi = 1.0 / 3.0 + 1e-6, 1.0 - 1e-6
    probes: list[tuple[float, float]] = []

    def accuracy_at(threshold: float) -> float:
        policy = ThresholdPolicy(policy_kind, threshold, tie_rule=tie_rule)
        report = run_batch(policy, task, costs, trials, seed, prior=prior,
                           initial_fixation=initial_fixation,
                           max_steps=max_steps)
        probes.append((threshold, report.accuracy))
        return report.accuracy

    acc_hi = accuracy_at(hi)
    if acc_hi <= reference_accuracy:
        best, best_acc = hi, acc_hi
    else:
        acc_lo = accuracy_at(lo)
        if acc_lo > reference_accuracy:
            return CalibrationResult(
                threshold=lo, accuracy=acc_lo,
                reference_accuracy=reference_accuracy,
                probes=tuple(probes), warning=True,
                message="accuracy exceeds the reference even at the lowest "
                        "threshold")
        best, best_acc = lo, acc_lo
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            acc_mid = accuracy_at(mid)
            if acc_mid <= reference_accuracy:
                lo, best, best_acc = mid, mid, acc_mid
            else:
                hi = mid
    warning = abs(best_acc - reference_accuracy) > accuracy_tol
    message = ""
    if warning:
        message = (f"calibrated accuracy {best_acc:.4f} misses the reference "
                   f"{reference_accuracy:.4f} by more than {accuracy_tol}")
    # flag probe sequences that violate monotonicity beyond 3-sigma noise
    noise = 3.0 * np.sqrt(0.25 / trials) * np.sqrt(2.0)
    ordered = sorted(probes)
    for (t1, a1), (t2, a2) in zip(ordered, ordered[1:]):
        if t2 > t1 and a2 < a1 - noise:
            warning = True
            message = (message + "; " if message else "") + \
                f"non-monotone accuracy between thresholds {t1:.4f} and {t2:.4f}"
            break
    return CalibrationResult(threshold=best, accuracy=best_acc,
                             reference_accuracy=reference_accuracy,
                             probes=tuple(probes), warning=warning,
                             message=message)
