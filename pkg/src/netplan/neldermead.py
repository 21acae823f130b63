"""Nelder-Mead simplex search with an optional projection onto a feasible set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class NMResult:
    x: np.ndarray
    fun: float
    iterations: int
    nfev: int
    converged: bool


def nelder_mead(func: Callable[[np.ndarray], float], simplex: np.ndarray, *,
                tol: float | Callable[[float], float] = 1e-8,
                max_iterations: int = 10_000,
                project: Callable[[np.ndarray], np.ndarray] | None = None,
                reflection: float = 1.0, expansion: float = 2.0,
                contraction: float = 0.5, shrink: float = 0.5) -> NMResult:
    """Minimize ``func`` starting from the (n+1, n) array ``simplex``.

    Stops when max - min of the vertex values drops below ``tol`` (a number,
    or a function of the current best value) or after ``max_iterations``.
    Every trial point passes through ``project`` before evaluation and is
    stored projected.
    """
    proj = project if project is not None else (lambda p: p)
    pts = np.array([proj(np.asarray(p, dtype=float)) for p in simplex])
    n = pts.shape[1]
    if pts.shape[0] != n + 1:
        raise ValueError("simplex must have n+1 vertices")
    vals = np.array([func(p) for p in pts])
    nfev = n + 1
    it = 0
    converged = False

    def tolerance(best):
        return tol(best) if callable(tol) else tol

    while True:
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        if vals[-1] - vals[0] < tolerance(vals[0]):
            converged = True
            break
        if it >= max_iterations:
            break
        it += 1
        centroid = pts[:-1].mean(axis=0)
        worst = pts[-1]
        xr = proj(centroid + reflection * (centroid - worst))
        fr = func(xr)
        nfev += 1
        if fr < vals[0]:
            xe = proj(centroid + expansion * (xr - centroid))
            fe = func(xe)
            nfev += 1
            if fe < fr:
                pts[-1], vals[-1] = xe, fe
            else:
                pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = proj(centroid + contraction * (xr - centroid))
            fc = func(xc)
            nfev += 1
            if fc <= fr:
                pts[-1], vals[-1] = xc, fc
                continue
        else:
            xc = proj(centroid + contraction * (worst - centroid))
            fc = func(xc)
            nfev += 1
            if fc < vals[-1]:
                pts[-1], vals[-1] = xc, fc
                continue
        best = pts[0]
        for i in range(1, n + 1):
            pts[i] = proj(best + shrink * (pts[i] - best))
            vals[i] = func(pts[i])
        nfev += n
    return NMResult(pts[0].copy(), float(vals[0]), it, nfev, converged)


def adaptive_coefficients(n: int) -> dict[str, float]:
    """Dimension-dependent coefficients that reduce to the standard ones for n = 2."""
    return dict(reflection=1.0, expansion=1.0 + 2.0 / n,
                contraction=0.75 - 1.0 / (2.0 * n), shrink=1.0 - 1.0 / n)
