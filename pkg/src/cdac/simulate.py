"""Monte-Carlo episode simulation and policy comparison.

Episodes follow the trial protocol of the search tasks: the agent starts at
a given fixation with a prior belief, repeatedly either stops (declaring a
location) or moves/stays and draws one observation from the environment, and
pays ``c`` per observation, ``c_s`` per fixation change between consecutive
observations, and 1 for a wrong declaration.  Everything is deterministic
given the master seed; per-trial seeds are spawned from it so batches are
reproducible regardless of the number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import GREEDY_MAP, INFOMAX, ThresholdPolicy, calibrate_threshold
from .grid import SimplexGrid
from .model import CostParams, TaskSpec, likelihood_table, validate_belief
from .solver import PolicyMap, solve

_POLICY_CODES = {"cdac": 0, INFOMAX: 1, GREEDY_MAP: 2}


@dataclass
class EpisodeTrace:
    """Full record of one simulated trial."""

    seed: object
    true_location: int
    initial_fixation: int
    fixations: tuple[int, ...]
    observations: tuple[tuple[int, ...], ...]
    beliefs: np.ndarray  # (tau + 1, 3)
    declared: int
    tau: int
    n_switches: int
    cost: float
    truncated: bool


@dataclass
class BatchReport:
    """Aggregate behavioral statistics over independent trials."""

    trials: int
    accuracy: float
    mean_steps: float
    mean_switches: float
    mean_cost: float
    se_accuracy: float
    se_steps: float
    se_switches: float
    se_cost: float
    truncated: int = 0


@dataclass
class CompareRow:
    """One (policy, cost setting) row of a comparison table."""

    policy: str
    c: float
    c_s: float
    threshold: float | None
    report: BatchReport
    calibration_warning: bool = False
    message: str = ""


def _make_decider(policy, task: TaskSpec, costs: CostParams):
    """Adapt the supported policy objects to a uniform step signature."""
    if isinstance(policy, ThresholdPolicy):
        return lambda p, current, rng: policy.decide(task, p, current, rng)
    if isinstance(policy, PolicyMap):
        return lambda p, current, rng: policy.decide(p, current)
    if hasattr(policy, "decide"):
        return lambda p, current, rng: policy.decide(p, current)
    raise TypeError(f"unsupported policy object {type(policy).__name__}")


def run_episode(policy, task: TaskSpec, costs: CostParams, prior,
                initial_fixation: int, true_location: int, seed,
                max_steps: int = 1000) -> EpisodeTrace:
    """Simulate one trial to completion.

    The policy is queried at the current (belief, fixation); a continuation
    draws one observation at the chosen location.  The first observation
    never counts as a switch (switches are counted between consecutive
    observation locations).  If ``max_steps`` observations pass without a
    stop, the trial is force-stopped at the belief argmax and flagged.
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    rng = np.random.default_rng(seed)
    decide = _make_decider(policy, task, costs)
    table = likelihood_table(task)  # (A, O, k)
    # per-(action, location) cumulative outcome distributions for sampling
    cum = np.cumsum(np.swapaxes(table, 1, 2), axis=2)  # (A, k, O)
    p = validate_belief(prior if prior is not None else np.full(3, 1.0 / 3.0))
    s = int(true_location)
    current = int(initial_fixation)
    if not 0 <= current < task.n_actions:
        raise ValueError(f"initial fixation {current} invalid for {task.kind}")
    fixations: list[int] = []
    observations: list[tuple[int, ...]] = []
    beliefs = [p]
    n_switches = 0
    truncated = False
    declared = -1
    while True:
        kind, arg = decide(p, current, rng)
        if kind == "stop":
            declared = int(arg)
            break
        j = int(arg)
        if fixations and j != fixations[-1]:
            n_switches += 1
        current = j
        o = int(np.searchsorted(cum[j, s], rng.random(), side="right"))
        o = min(o, task.n_obs - 1)  # guard the u ~ 1.0 edge
        fixations.append(j)
        observations.append(task.observations[o])
        numer = table[j, o] * p
        p = numer / numer.sum()
        beliefs.append(p)
        if len(fixations) >= max_steps:
            truncated = True
            declared = int(np.argmax(p))
            break
    tau = len(fixations)
    cost = costs.c * tau + costs.c_s * n_switches + (1.0 if declared != s else 0.0)
    return EpisodeTrace(seed=seed, true_location=s,
                        initial_fixation=int(initial_fixation),
                        fixations=tuple(fixations),
                        observations=tuple(observations),
                        beliefs=np.asarray(beliefs), declared=declared,
                        tau=tau, n_switches=n_switches, cost=cost,
                        truncated=truncated)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


def run_batch(policy, task: TaskSpec, costs: CostParams, trials: int, seed, *,
              prior=None, initial_fixation: int = 0, max_steps: int = 1000,
              threads: int = 1) -> BatchReport:
    """Run independent trials with uniformly drawn target locations.

    Per-trial seeds are spawned from the master seed and results are
    aggregated in trial order, so reports are bit-identical for any
    ``threads`` value.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    root = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    children = root.spawn(trials)

    def one(i: int) -> tuple[float, float, float, float, bool]:
        ep_ss, s_ss = children[i].spawn(2)
        true_s = int(np.random.default_rng(s_ss).integers(task.k))
        tr = run_episode(policy, task, costs, prior, initial_fixation, true_s,
                         ep_ss, max_steps=max_steps)
        return (1.0 if tr.declared == tr.true_location else 0.0,
                float(tr.tau), float(tr.n_switches), tr.cost, tr.truncated)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one, range(trials)))
    else:
        rows = [one(i) for i in range(trials)]
    correct = np.array([r[0] for r in rows])
    steps = np.array([r[1] for r in rows])
    switches = np.array([r[2] for r in rows])
    cost = np.array([r[3] for r in rows])
    truncated = sum(1 for r in rows if r[4])
    acc, se_acc = _mean_se(correct)
    mst, se_st = _mean_se(steps)
    msw, se_sw = _mean_se(switches)
    mco, se_co = _mean_se(cost)
    return BatchReport(trials=trials, accuracy=acc, mean_steps=mst,
                       mean_switches=msw, mean_cost=mco, se_accuracy=se_acc,
                       se_steps=se_st, se_switches=se_sw, se_cost=se_co,
                       truncated=truncated)


def compare(policies, task: TaskSpec, cost_grid, trials: int, seed, *,
            grid_m: int = 201, tolerance: float = 1e-6, max_iters: int = 2000,
            prior=None, initial_fixation: int = 0, max_steps: int = 1000,
            calibration_trials: int = 3000, accuracy_tol: float = 0.02,
            backend: str | None = None, threads: int = 1) -> list[CompareRow]:
    """Head-to-head policy comparison over a grid of cost settings.

    For each cost setting the optimal policy is solved on an ``grid_m`` grid
    and simulated; each baseline's threshold is then calibrated against the
    optimal policy's accuracy before its own batch runs.  Seeds derive from
    (master seed, setting index, policy name), so identical policies yield
    identical rows and the table is reproducible.
    """
    policies = list(policies)
    if len(policies) < 2:
        raise ValueError("compare needs at least two policies")
    for name in policies:
        if name not in _POLICY_CODES:
            raise ValueError(f"unknown policy {name!r}; "
                             f"expected one of {sorted(_POLICY_CODES)}")
    settings = [cp if isinstance(cp, CostParams) else CostParams(*cp)
                for cp in cost_grid]
    grid = SimplexGrid(grid_m)
    rows: list[CompareRow] = []
    for si, costs in enumerate(settings):
        _, optimal, _ = solve(task, costs, grid, tolerance=tolerance,
                              max_iters=max_iters, backend=backend)
        ref_seed = np.random.SeedSequence([_entropy(seed), si, 0, 0])
        ref_report = run_batch(optimal, task, costs, trials, ref_seed,
                               prior=prior, initial_fixation=initial_fixation,
                               max_steps=max_steps, threads=threads)
        calibrations: dict[str, object] = {}
        for name in policies:
            code = _POLICY_CODES[name]
            if name == "cdac":
                rows.append(CompareRow(policy=name, c=costs.c, c_s=costs.c_s,
                                       threshold=None, report=ref_report))
                continue
            if name not in calibrations:
                cal_seed = np.random.SeedSequence([_entropy(seed), si, code, 1])
                calibrations[name] = calibrate_threshold(
                    name, task, costs, ref_report.accuracy,
                    calibration_trials, cal_seed, accuracy_tol=accuracy_tol,
                    prior=prior, initial_fixation=initial_fixation,
                    max_steps=max_steps)
            cal = calibrations[name]
            policy = ThresholdPolicy(name, cal.threshold)
            batch_seed = np.random.SeedSequence([_entropy(seed), si, code, 0])
            report = run_batch(policy, task, costs, trials, batch_seed,
                               prior=prior, initial_fixation=initial_fixation,
                               max_steps=max_steps, threads=threads)
            rows.append(CompareRow(policy=name, c=costs.c, c_s=costs.c_s,
                                   threshold=cal.threshold, report=report,
                                   calibration_warning=cal.warning,
                                   message=cal.message))
    return rows


def _entropy(seed) -> int:
    """Reduce a seed-like input to a plain int for composite seed sequences."""
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, dtype=np.uint64)[0])
    return int(seed)
