"""File exporters: CSV tables, plain PPM/PGM rasters, and model files.

All floats are written with ``repr`` so files round-trip bit-exactly and
identical runs produce identical bytes.

Raster layout: image row 0 is the top of the simplex chart (p2 = 1), columns
run left to right with p1 from 0 to 1; cells off the simplex (p1 + p2 > 1)
are white.  Colors are fixed per action so rasters from different runs can
be diffed directly:

=================  ================
action             RGB
=================  ================
stop, declare 1    (0, 127, 255)
stop, declare 2    (0, 0, 255)
stop, declare 3    (75, 0, 130)
fixate l1          (0, 128, 0)
fixate l2          (46, 139, 87)
fixate l3          (128, 128, 0)
fixate l12         (255, 0, 0)
fixate l23         (139, 69, 19)
fixate l13         (255, 255, 0)
fixate l123        (255, 0, 255)
off-simplex        (255, 255, 255)
=================  ================
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .approx import GprModel, RbfModel
from .grid import SimplexGrid, ValueFunction
from .model import CostParams, TaskSpec
from .solver import CONTINUE, STOP, PolicyMap

STOP_COLORS = ((0, 127, 255), (0, 0, 255), (75, 0, 130))
CONTINUE_COLORS = {
    "l1": (0, 128, 0),
    "l2": (46, 139, 87),
    "l3": (128, 128, 0),
    "l12": (255, 0, 0),
    "l23": (139, 69, 19),
    "l13": (255, 255, 0),
    "l123": (255, 0, 255),
}
BACKGROUND = (255, 255, 255)


def _fmt(x) -> str:
    return repr(float(x))


def write_value_csv(vf: ValueFunction, task: TaskSpec, path) -> None:
    """Value table as CSV with columns p1, p2, p3, fixation, value."""
    labels = task.action_labels
    lines = ["p1,p2,p3,fixation,value"]
    pts = vf.grid.points
    for a in range(vf.n_fixations):
        col = vf.values[a]
        for i in range(vf.grid.n_points):
            lines.append(f"{_fmt(pts[i, 0])},{_fmt(pts[i, 1])},"
                         f"{_fmt(pts[i, 2])},{labels[a]},{_fmt(col[i])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_policy_csv(policy: PolicyMap, path) -> None:
    """Policy map as CSV with columns fixation, p1, p2, p3, action_kind,
    action_arg (declared location 1..3 for stops, action label otherwise)."""
    labels = policy.task.action_labels
    lines = ["fixation,p1,p2,p3,action_kind,action_arg"]
    pts = policy.grid.points
    for a in range(policy.n_fixations):
        for i in range(policy.grid.n_points):
            if policy.kind[a, i] == STOP:
                kind, arg = "stop", str(int(policy.arg[a, i]) + 1)
            else:
                kind, arg = "continue", labels[policy.arg[a, i]]
            lines.append(f"{labels[a]},{_fmt(pts[i, 0])},{_fmt(pts[i, 1])},"
                         f"{_fmt(pts[i, 2])},{kind},{arg}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class PolicyCsv:
    """Minimal policy description re-read from CSV (enough to rasterize)."""

    m: int
    fixation_labels: tuple[str, ...]
    kind: np.ndarray  # (A, P)
    arg_labels: list[list[str]]


def read_policy_csv(path) -> PolicyCsv:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != "fixation,p1,p2,p3,action_kind,action_arg":
        raise ValueError(f"{path} is not a policy CSV")
    by_fix: dict[str, list[tuple[str, str]]] = {}
    order: list[str] = []
    for line in text[1:]:
        fix, _, _, _, kind, arg = line.split(",")
        if fix not in by_fix:
            by_fix[fix] = []
            order.append(fix)
        by_fix[fix].append((kind, arg))
    n_points = len(by_fix[order[0]])
    m = int((np.sqrt(8 * n_points + 1) - 1) / 2)
    if m * (m + 1) // 2 != n_points:
        raise ValueError(f"{path} has {n_points} rows per fixation, which is "
                         "not a triangular grid size")
    kind = np.zeros((len(order), n_points), dtype=np.uint8)
    arg_labels: list[list[str]] = []
    for a, fix in enumerate(order):
        rows = by_fix[fix]
        if len(rows) != n_points:
            raise ValueError(f"{path}: unequal fixation blocks")
        args = []
        for i, (k, arg) in enumerate(rows):
            kind[a, i] = STOP if k == "stop" else CONTINUE
            args.append(arg)
        arg_labels.append(args)
    return PolicyCsv(m=m, fixation_labels=tuple(order), kind=kind,
                     arg_labels=arg_labels)


def policy_raster(policy: PolicyMap, fixation: int) -> np.ndarray:
    """RGB raster (m, m, 3) of one fixation's policy panel."""
    labels = policy.task.action_labels
    args = [[str(int(policy.arg[fixation, i]) + 1)
             if policy.kind[fixation, i] == STOP
             else labels[policy.arg[fixation, i]]
             for i in range(policy.grid.n_points)]]
    csv = PolicyCsv(m=policy.grid.m, fixation_labels=("x",),
                    kind=policy.kind[fixation][None, :], arg_labels=args)
    return raster_from_csv(csv, 0)


def raster_from_csv(csv: PolicyCsv, fixation: int) -> np.ndarray:
    m = csv.m
    img = np.full((m, m, 3), BACKGROUND, dtype=np.uint8)
    idx = 0
    for i in range(m):
        for j in range(m - i):
            if csv.kind[fixation, idx] == STOP:
                color = STOP_COLORS[int(csv.arg_labels[fixation][idx]) - 1]
            else:
                color = CONTINUE_COLORS[csv.arg_labels[fixation][idx]]
            img[m - 1 - j, i] = color
            idx += 1
    return img


def write_ppm(img: np.ndarray, path) -> None:
    """Plain (ASCII, P3) PPM writer."""
    h, w, _ = img.shape
    lines = ["P3", f"{w} {h}", "255"]
    for r in range(h):
        lines.append(" ".join(str(int(v)) for v in img[r].reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pgm(values: np.ndarray, grid: SimplexGrid, path) -> None:
    """Plain (ASCII, P2) PGM of a per-cell integer channel (e.g. tie counts);
    off-simplex pixels are 0."""
    m = grid.m
    img = np.zeros((m, m), dtype=np.int64)
    lat = grid.lattice
    img[m - 1 - lat[:, 1], lat[:, 0]] = values
    maxval = max(int(img.max()), 1)
    lines = ["P2", f"{m} {m}", str(maxval)]
    for r in range(m):
        lines.append(" ".join(str(int(v)) for v in img[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_policy_rasters(policy: PolicyMap, outdir, prefix: str = "policy") -> list[Path]:
    """One PPM per fixation; returns the written paths."""
    outdir = Path(outdir)
    paths = []
    for a in range(policy.n_fixations):
        label = policy.task.action_labels[a]
        path = outdir / f"{prefix}_{label}.ppm"
        write_ppm(policy_raster(policy, a), path)
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# batch / comparison tables
# ---------------------------------------------------------------------------

_BATCH_HEADER = ("policy,c,c_s,threshold,trials,accuracy,mean_steps,"
                 "mean_switches,mean_cost,se_accuracy,se_steps,se_switches,"
                 "se_cost,truncated,calibration_warning,message")


def _batch_line(policy_name, c, c_s, threshold, report, warning=False,
                message="") -> str:
    thr = "" if threshold is None else _fmt(threshold)
    return (f"{policy_name},{_fmt(c)},{_fmt(c_s)},{thr},{report.trials},"
            f"{_fmt(report.accuracy)},{_fmt(report.mean_steps)},"
            f"{_fmt(report.mean_switches)},{_fmt(report.mean_cost)},"
            f"{_fmt(report.se_accuracy)},{_fmt(report.se_steps)},"
            f"{_fmt(report.se_switches)},{_fmt(report.se_cost)},"
            f"{report.truncated},{int(warning)},{message}")


def write_batch_csv(policy_name: str, costs: CostParams, report, path,
                    threshold=None) -> None:
    lines = [_BATCH_HEADER,
             _batch_line(policy_name, costs.c, costs.c_s, threshold, report)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_compare_csv(rows, path) -> None:
    lines = [_BATCH_HEADER]
    for row in rows:
        lines.append(_batch_line(row.policy, row.c, row.c_s, row.threshold,
                                 row.report, row.calibration_warning,
                                 row.message))
    Path(path).write_text("\n".join(lines) + "\n")


def write_trace_csv(trace, path) -> None:
    """Line-per-step trace dump (step 0 is the prior state)."""
    lines = ["step,fixation,observation,p1,p2,p3"]
    b = trace.beliefs
    lines.append(f"0,,,{_fmt(b[0, 0])},{_fmt(b[0, 1])},{_fmt(b[0, 2])}")
    for t in range(trace.tau):
        obs = "".join(str(bit) for bit in trace.observations[t])
        lines.append(f"{t + 1},{trace.fixations[t]},{obs},"
                     f"{_fmt(b[t + 1, 0])},{_fmt(b[t + 1, 1])},{_fmt(b[t + 1, 2])}")
    lines.append(f"# declared={trace.declared} true={trace.true_location} "
                 f"tau={trace.tau} switches={trace.n_switches} "
                 f"cost={_fmt(trace.cost)} truncated={int(trace.truncated)}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# model serialization
# ---------------------------------------------------------------------------

def save_model(model, path) -> None:
    """Serialize a fitted RBF/GPR model to a sectioned flat text file."""
    lines = ["#cdac-model v1", "[meta]"]
    task, costs = model.task, model.costs
    kind = "rbf" if isinstance(model, RbfModel) else "gpr"
    lines.append(f"kind = {kind}")
    lines.append(f"task_kind = {task.kind}")
    lines.append("betas = " + ",".join(_fmt(b) for b in task.betas))
    lines.append(f"c = {_fmt(costs.c)}")
    lines.append(f"c_s = {_fmt(costs.c_s)}")
    lines.append("[hyperparameters]")
    if kind == "rbf":
        lines.append(f"sigma = {_fmt(model.sigma)}")
        lines.append(f"kernel = {model.kernel}")
        lines.append(f"epsilon = {_fmt(model.epsilon)}")
        points, table = model.centers, model.weights
        point_section, table_section = "centers", "weights"
    else:
        lines.append(f"length_scale = {_fmt(model.length_scale)}")
        lines.append(f"signal = {_fmt(model.signal)}")
        lines.append(f"noise = {_fmt(model.noise)}")
        points, table = model.train_points, model.targets
        point_section, table_section = "inputs", "targets"
    lines.append(f"[{point_section}]")
    lines.append("p1,p2,p3")
    for row in points:
        lines.append(",".join(_fmt(v) for v in row))
    lines.append(f"[{table_section}]")
    lines.append(",".join(task.action_labels))
    for row in table.T:  # one row per point/center, one column per fixation
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path):
    """Re-load a model file written by :func:`save_model`."""
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "#cdac-model v1":
        raise ValueError(f"{path} is not a cdac model file")
    sections: dict[str, list[str]] = {}
    current = None
    for line in text[1:]:
        line = line.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    meta = dict(_kv(line) for line in sections["meta"])
    hyper = dict(_kv(line) for line in sections["hyperparameters"])
    betas = [float(v) for v in meta["betas"].split(",")]
    task = (TaskSpec.task1(*betas) if meta["task_kind"] == "task1"
            else TaskSpec.task2(*betas))
    costs = CostParams(c=float(meta["c"]), c_s=float(meta["c_s"]))
    if meta["kind"] == "rbf":
        points = _csv_block(sections["centers"])
        table = _csv_block(sections["weights"]).T
        return RbfModel(task=task, costs=costs, centers=points,
                        sigma=float(hyper["sigma"]), weights=table,
                        kernel=hyper["kernel"],
                        epsilon=float(hyper["epsilon"]))
    points = _csv_block(sections["inputs"])
    table = _csv_block(sections["targets"]).T
    return GprModel(task=task, costs=costs, train_points=points,
                    targets=table, length_scale=float(hyper["length_scale"]),
                    signal=float(hyper["signal"]), noise=float(hyper["noise"]))


def _kv(line: str) -> tuple[str, str]:
    key, _, value = line.partition("=")
    return key.strip(), value.strip()


def _csv_block(lines: list[str]) -> np.ndarray:
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    return np.asarray(rows, dtype=np.float64)
