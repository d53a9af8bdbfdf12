# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled Bellman sweep kernel.

Mirrors ``sweep_py`` operation for operation: per point, the per-observation
stencil products accumulate left to right, the switch charge is added after
the expectation, and minima are taken over actions in index order, so results
match the numpy backend bit for bit.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "cython"


def bellman_sweep(double[:, ::1] v, double[:, ::1] stop,
                  cnp.int32_t[:, :, :, ::1] vert, double[:, :, :, ::1] wt,
                  double[:, :, ::1] pprob, double c, double c_s,
                  double[:, ::1] out):
    """One Jacobi sweep: out = min(stop, min_j continuation); returns the
    sup-norm change."""
    cdef Py_ssize_t n_actions = v.shape[0]
    cdef Py_ssize_t n_points = v.shape[1]
    cdef Py_ssize_t n_obs = vert.shape[1]
    cdef Py_ssize_t p, j, o, a
    cdef double acc, g, best, q, delta, diff
    cdef double[::1] cont = np.empty(n_actions)

    delta = 0.0
    for p in range(n_points):
        for j in range(n_actions):
            acc = 0.0
            for o in range(n_obs):
                g = (wt[j, o, p, 0] * v[j, vert[j, o, p, 0]]
                     + wt[j, o, p, 1] * v[j, vert[j, o, p, 1]]
                     + wt[j, o, p, 2] * v[j, vert[j, o, p, 2]])
                acc = acc + pprob[j, o, p] * g
            cont[j] = c + acc
        for a in range(n_actions):
            best = cont[0] + (c_s if a != 0 else 0.0)
            for j in range(1, n_actions):
                q = cont[j] + (c_s if j != a else 0.0)
                if q < best:
                    best = q
            if stop[a, p] < best:
                best = stop[a, p]
            out[a, p] = best
            diff = best - v[a, p]
            if diff < 0:
                diff = -diff
            if diff > delta:
                delta = diff
    return delta
