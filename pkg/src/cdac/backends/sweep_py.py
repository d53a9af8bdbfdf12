"""Pure-numpy implementation of the Bellman sweep over a simplex grid.

The compiled kernel in ``_sweep.pyx`` mirrors the arithmetic here operation
for operation (same evaluation order), so the two backends produce identical
tables bit for bit.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def continuation_values(v, vert, wt, pprob, c):
    """Expected cost of continuing at each action, before any switch charge.

    ``ev[j, p] = c + sum_o pprob[j, o, p] * interp(v[j], posterior(p, j, o))``
    where the interpolation stencil (``vert``, ``wt``) was precomputed.

    Shapes: v (A, P); vert/wt (A, O, P, 3); pprob (A, O, P) -> ev (A, P).
    """
    n_actions, n_obs, n_points, _ = vert.shape
    ev = np.empty((n_actions, n_points))
    for j in range(n_actions):
        vj = v[j]
        acc = np.zeros(n_points)
        for o in range(n_obs):
            g = (wt[j, o, :, 0] * vj[vert[j, o, :, 0]]
                 + wt[j, o, :, 1] * vj[vert[j, o, :, 1]]
                 + wt[j, o, :, 2] * vj[vert[j, o, :, 2]])
            acc += pprob[j, o] * g
        ev[j] = c + acc
    return ev


def bellman_sweep(v, stop, vert, wt, pprob, c, c_s, out):
    """One Jacobi sweep: out = min(stop, min_j continuation); returns the
    sup-norm change."""
    ev = continuation_values(v, vert, wt, pprob, c)
    n_actions = v.shape[0]
    actions = np.arange(n_actions)
    for a in range(n_actions):
        q = ev + c_s * (actions != a)[:, None]
        np.minimum(stop[a], q.min(axis=0), out=out[a])
    return float(np.abs(out - v).max())
