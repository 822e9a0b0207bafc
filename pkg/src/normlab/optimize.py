"""Nelder-Mead simplex search run for many independent starts in lockstep.

Every start owns one row of each array and only ever reads its own row, so a
start's trajectory is identical whether it runs alone or in a batch.  The
objective must therefore be row-wise as well: ``fun(X)`` maps an ``(m, n)``
array to ``m`` values, row ``k`` depending only on ``X[k]``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = ["BatchResult", "nelder_mead_batch", "start_rng", "thread_cap"]


def start_rng(seed: int, start_index: int) -> np.random.Generator:
    """Independent generator for one start, derived from ``(seed, start_index)``."""
    return np.random.default_rng([int(seed), int(start_index)])


def thread_cap() -> int:
    """Worker cap from ``NORMLAB_THREADS`` (default: CPU count)."""
    raw = os.environ.get("NORMLAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass
class BatchResult:
    x: np.ndarray
    fun: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    evaluations: int


def nelder_mead_batch(
    fun,
    x0,
    step=0.1,
    max_iters: int = 2000,
    xatol: float = 1e-10,
    fatol: float = 1e-14,
    adaptive: bool = True,
) -> BatchResult:
    """Minimize ``fun`` from each row of ``x0``.

    Parameters
    ----------
    fun : callable
        Row-wise objective, ``(m, n) -> (m,)``.
    x0 : array, shape (starts, n)
        One initial point per start.
    step : float or array
        Edge length of the initial axis-aligned simplex.
    adaptive : bool
        Dimension-dependent coefficients (Gao and Han); plain 1/2/0.5/0.5
        otherwise.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    S, n = x0.shape
    if adaptive and n > 1:
        alpha, gamma, rho, sigma = 1.0, 1.0 + 2.0 / n, 0.75 - 1.0 / (2.0 * n), 1.0 - 1.0 / n
    else:
        alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5

    sims = np.repeat(x0[:, None, :], n + 1, axis=1)
    steps = np.broadcast_to(np.asarray(step, dtype=float), (n,))
    for k in range(n):
        sims[:, k + 1, k] += steps[k]
    fs = fun(sims.reshape(S * (n + 1), n)).reshape(S, n + 1)
    evals = S * (n + 1)

    iters = np.zeros(S, dtype=int)
    converged = np.zeros(S, dtype=bool)
    active = np.ones(S, dtype=bool)
    rows = np.arange(S)

    while True:
        order = np.argsort(fs, axis=1, kind="stable")
        sims = sims[rows[:, None], order]
        fs = np.take_along_axis(fs, order, axis=1)
        xspread = np.max(np.abs(sims[:, 1:] - sims[:, :1]), axis=(1, 2)) if n else np.zeros(S)
        fspread = np.max(np.abs(fs[:, 1:] - fs[:, :1]), axis=1)
        done = (xspread <= xatol) & (fspread <= fatol)
        converged |= active & done
        active &= ~done & (iters < max_iters)
        if not active.any():
            break
        a = np.flatnonzero(active)
        iters[a] += 1
        sa, fa = sims[a], fs[a]
        best, worst = sa[:, 0], sa[:, -1]
        f_best, f_second, f_worst = fa[:, 0], fa[:, -2], fa[:, -1]
        c = sa[:, :-1].mean(axis=1)
        xr = c + alpha * (c - worst)
        fr = fun(xr)
        evals += len(a)

        expand = fr < f_best
        accept_r = (fr >= f_best) & (fr < f_second)
        outside = (fr >= f_second) & (fr < f_worst)
        inside = fr >= f_worst

        second = np.where(
            expand[:, None],
            c + gamma * (xr - c),
            np.where(outside[:, None], c + rho * (xr - c), c + rho * (worst - c)),
        )
        need = expand | outside | inside
        f2 = np.full(len(a), np.inf)
        if need.any():
            f2[need] = fun(second[need])
            evals += int(need.sum())

        new_x = worst.copy()
        new_f = f_worst.copy()
        take_e = expand & (f2 < fr)
        take_r = (expand & ~take_e) | accept_r
        take_oc = outside & (f2 <= fr)
        take_ic = inside & (f2 < f_worst)
        new_x[take_r], new_f[take_r] = xr[take_r], fr[take_r]
        take_2 = take_e | take_oc | take_ic
        new_x[take_2], new_f[take_2] = second[take_2], f2[take_2]
        shrink = (outside & ~take_oc) | (inside & ~take_ic)

        sa[:, -1] = new_x
        fa[:, -1] = new_f
        if shrink.any():
            s = np.flatnonzero(shrink)
            pts = best[s, None, :] + sigma * (sa[s, 1:] - best[s, None, :])
            sa[s, 1:] = pts
            fa[s, 1:] = fun(pts.reshape(-1, n)).reshape(len(s), n)
            evals += len(s) * n
        sims[a], fs[a] = sa, fa

    return BatchResult(
        x=sims[:, 0].copy(),
        fun=fs[:, 0].copy(),
        iterations=iters,
        converged=converged,
        evaluations=evals,
    )
