"""Evaluation-capped Nelder-Mead simplex search (maximization)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["SimplexResult", "nelder_mead"]


class _CapReached(Exception):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray
    f: float
    evaluations: int
    start_value: float

    @property
    def improved(self):
        return self.f > self.start_value


def nelder_mead(
    func,
    x0,
    step,
    max_evals,
    f0=None,
    lower=None,
    upper=None,
    reflect=1.0,
    expand=2.0,
    contract=0.5,
    shrink=0.5,
):
    """Maximize `func` from `x0` using at most `max_evals` calls.

    Parameters
    ----------
    func : callable
        Objective ``func(x) -> float``; ``-inf`` marks rejected points.
    x0 : array_like
        Start point; the initial simplex adds ``step[i]`` along axis ``i``.
    step : float or array_like
        Initial simplex edge per coordinate.
    max_evals : int
        Hard cap on calls to `func`. There is no convergence test: the
        search always spends the full cap unless `func` raises.
    f0 : float, optional
        Known value at `x0`; saves one call.
    lower, upper : array_like, optional
        Candidate points are clipped into these bounds before evaluation.

    Exceptions raised by `func` (e.g. budget exhaustion) propagate.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    steps = np.broadcast_to(np.asarray(step, dtype=float), (dim,))
    lo = None if lower is None else np.broadcast_to(np.asarray(lower, dtype=float), (dim,))
    hi = None if upper is None else np.broadcast_to(np.asarray(upper, dtype=float), (dim,))

    calls = 0
    best_x, best_f = x0.copy(), -math.inf if f0 is None else float(f0)

    def clip(x):
        if lo is not None:
            x = np.maximum(x, lo)
        if hi is not None:
            x = np.minimum(x, hi)
        return x

    def evaluate(x):
        nonlocal calls, best_x, best_f
        if calls >= max_evals:
            raise _CapReached
        calls += 1
        value = float(func(x))
        if math.isnan(value):
            value = -math.inf
        if value > best_f:
            best_x, best_f = x.copy(), value
        return value

    start_value = best_f
    try:
        points = [clip(x0)]
        if f0 is None:
            values = [evaluate(points[0])]
            start_value = values[0]
        else:
            values = [float(f0)]
        for i in range(dim):
            vertex = points[0].copy()
            vertex[i] += steps[i]
            vertex = clip(vertex)
            if vertex[i] == points[0][i]:
                vertex[i] -= steps[i]
                vertex = clip(vertex)
            points.append(vertex)
            values.append(evaluate(vertex))
        simplex = np.array(points)
        fvals = np.array(values)

        while True:
            order = np.argsort(-fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]

            xr = clip(centroid + reflect * (centroid - worst))
            fr = evaluate(xr)
            if fr > fvals[0]:
                xe = clip(centroid + expand * (xr - centroid))
                fe = evaluate(xe)
                if fe > fr:
                    simplex[-1], fvals[-1] = xe, fe
                else:
                    simplex[-1], fvals[-1] = xr, fr
                continue
            if fr > fvals[-2]:
                simplex[-1], fvals[-1] = xr, fr
                continue

            if fr > fvals[-1]:
                xc = clip(centroid + contract * (xr - centroid))
                fc = evaluate(xc)
                accept = fc >= fr
            else:
                xc = clip(centroid + contract * (worst - centroid))
                fc = evaluate(xc)
                accept = fc > fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
                continue

            for i in range(1, dim + 1):
                simplex[i] = clip(simplex[0] + shrink * (simplex[i] - simplex[0]))
                fvals[i] = evaluate(simplex[i])
    except _CapReached:
        pass
    return SimplexResult(best_x, best_f, calls, start_value)
