"""Frequency-domain power model for arrays of point-absorber buoys.

Each buoy has one (heave) degree of freedom. The hydrodynamic coefficients
come from an analytical interaction kernel:

* radiation damping ``b(w) = b0 (w/w0)^3 exp(1.5 (1 - (w/w0)^2))`` on the
  diagonal, coupled between buoys ``i, j`` by ``J0(k d_ij)``;
* constant added mass ``a0`` (no cross terms);
* plane-wave excitation ``A f0 sqrt(b/b0) exp(-j k (x cos(th) + y sin(th)))``.

Motions solve ``Z v = f`` with ``Z = jw(M + A) + B + D - jK/w`` and the farm
power is ``1/4 (f^H v + v^H f) - 1/2 v^H B v``, which equals the power
absorbed by the PTO dampers, ``1/2 sum_i D_i |v_i|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import wavenumber

__all__ = [
    "EvaluationError",
    "EvaluationResult",
    "FrequencyCase",
    "HydroModel",
    "bessel_j0",
    "coefficients",
    "farm_power",
    "isolated_powers",
    "power",
    "radiation_damping",
    "solve_motion",
]

MAX_CONDITION = 1e12
RESIDUAL_TOL = 1e-9

_SERIES_LIMIT = 12.0
_SERIES_TERMS = 34
_ASYMPTOTIC_TERMS = 24


class EvaluationError(RuntimeError):
    """Motion equations could not be solved reliably for a wave cell."""

    def __init__(self, message, omega=None, theta=None):
        super().__init__(message)
        self.omega = omega
        self.theta = theta


def _series_coefficients(terms):
    # J0(x) = sum_m (-x^2/4)^m / (m!)^2, highest power first for Horner
    return [1.0 / math.factorial(m) ** 2 for m in reversed(range(terms))]


def _asymptotic_coefficients(terms):
    # Hankel expansion: a_k = prod_{j<=k} -(2j-1)^2 / j, in powers of t = 1/(8x)
    a = [1.0]
    for k in range(1, terms):
        a.append(a[-1] * -((2 * k - 1) ** 2) / k)
    p = [(-1) ** (k // 2) * a[k] for k in range(0, terms, 2)]
    q = [(-1) ** ((k - 1) // 2) * a[k] for k in range(1, terms, 2)]
    return p[::-1], q[::-1]


_SERIES = _series_coefficients(_SERIES_TERMS)
_HANKEL_P, _HANKEL_Q = _asymptotic_coefficients(_ASYMPTOTIC_TERMS)


def _horner(coeffs, z):
    out = np.full_like(z, coeffs[0])
    for c in coeffs[1:]:
        out = out * z + c
    return out


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Power series below ``|x| = 12`` and the Hankel asymptotic expansion
    (24 terms) above it; absolute error stays below 1e-12 on the real line.
    """
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < _SERIES_LIMIT
    xs = x[small]
    out[small] = _horner(_SERIES, -0.25 * xs * xs)

    xl = x[~small]
    if xl.size:
        t = 1.0 / (8.0 * xl)
        t2 = t * t
        p = _horner(_HANKEL_P, t2)
        q = t * _horner(_HANKEL_Q, t2)
        chi = xl - math.pi / 4
        out[~small] = np.sqrt(2.0 / (math.pi * xl)) * (p * np.cos(chi) - q * np.sin(chi))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HydroModel:
    """Buoy mass and the parameters of the surrogate coefficient provider.

    Parameters
    ----------
    mass : float or sequence of float
        Buoy mass in kg; a sequence gives one mass per buoy.
    a0 : float, optional
        Single-buoy added mass in kg, defaults to ``0.5 * mass``.
    b0 : float
        Peak radiation damping in N s/m, reached at `omega0`.
    omega0 : float
        Reference (peak-damping) frequency in rad/s.
    f0 : float
        Excitation force per meter of wave amplitude at `omega0`, in N/m.
    dof : int
        Degrees of freedom per buoy; only heave (1) is modeled.
    """

    mass: float | tuple = 3.76e5
    a0: float | None = None
    b0: float = 9.0e4
    omega0: float = 1.0
    f0: float = 1.0e5
    dof: int = 1

    def __post_init__(self):
        if np.ndim(self.mass):
            object.__setattr__(self, "mass", tuple(float(m) for m in self.mass))
            ref = float(np.mean(self.mass))
        else:
            object.__setattr__(self, "mass", float(self.mass))
            ref = self.mass
        if self.a0 is None:
            object.__setattr__(self, "a0", 0.5 * ref)
        if self.dof != 1:
            raise NotImplementedError("only single-DOF (heave) buoys are modeled")
        masses = np.atleast_1d(self.mass)
        if np.any(masses <= 0) or min(self.a0, self.b0, self.f0, self.omega0) <= 0:
            raise ValueError("mass, a0, b0, f0 and omega0 must be positive")

    def masses(self, n):
        if isinstance(self.mass, tuple):
            if len(self.mass) != n:
                raise ValueError(f"model has {len(self.mass)} masses, layout has {n} buoys")
            return np.array(self.mass)
        return np.full(n, self.mass)

    @property
    def resonant_stiffness(self):
        """PTO stiffness cancelling the inertia of a single buoy at `omega0`."""
        return (float(np.mean(self.mass)) + self.a0) * self.omega0**2


@dataclass(frozen=True)
class FrequencyCase:
    """Coefficients of the motion equations for one (frequency, direction) cell."""

    omega: float
    theta: float
    A: np.ndarray
    B: np.ndarray
    f_exc: np.ndarray


@dataclass(frozen=True)
class EvaluationResult:
    """Mean farm power (W) and its per-buoy decomposition.

    `q_factor` is ``None`` when isolated powers were not computed;
    `cell_power` holds the unweighted total per (direction, frequency) cell.
    """

    total_power: float
    per_buoy_power: np.ndarray
    q_factor: float | None = None
    cell_power: np.ndarray | None = None

    @property
    def n(self):
        return len(self.per_buoy_power)


def radiation_damping(model, omega):
    r = np.asarray(omega, dtype=float) / model.omega0
    return model.b0 * r**3 * np.exp(1.5 * (1.0 - r * r))


def _distances(positions):
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _coupling(k, positions):
    """``J0(k d_ij)`` for each wavenumber in `k`, shape ``(len(k), n, n)``."""
    n = len(positions)
    i, j = np.triu_indices(n, k=1)
    diff = positions[i] - positions[j]
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    out = np.empty((len(k), n, n))
    out[:, np.arange(n), np.arange(n)] = 1.0
    upper = bessel_j0(k[:, None] * d[None, :])
    out[:, i, j] = upper
    out[:, j, i] = upper
    return out


def _check_distinct(positions):
    d = _distances(positions)
    np.fill_diagonal(d, np.inf)
    if np.any(d <= 0):
        raise ValueError("coincident buoy positions")


def coefficients(model, positions, omega, theta, amplitude=1.0):
    """Added mass, radiation damping and excitation for one wave cell.

    Parameters
    ----------
    model : HydroModel
    positions : array_like, shape (n, 2)
        Buoy coordinates in meters.
    omega : float
        Angular frequency (rad/s).
    theta : float
        Wave direction in degrees.
    amplitude : float
        Wave amplitude scaling the excitation.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    _check_distinct(positions)
    k = wavenumber(omega)
    b = float(radiation_damping(model, omega))
    n = len(positions)
    B = b * _coupling(np.array([k]), positions)[0]
    A = np.diag(np.full(n, model.a0))
    th = math.radians(theta)
    phase = positions[:, 0] * math.cos(th) + positions[:, 1] * math.sin(th)
    f = amplitude * model.f0 * math.sqrt(b / model.b0) * np.exp(-1j * k * phase)
    return FrequencyCase(float(omega), float(theta), A, B, f)


def _impedance(omega, mass, A, B, pto):
    k_pto, d_pto = pto[..., 0], pto[..., 1]
    return (
        1j * omega * (np.diag(mass) + A)
        + B
        + np.diag(d_pto)
        - 1j * np.diag(k_pto) / omega
    )


def solve_motion(case, model, pto):
    """Complex heave velocity amplitudes for one wave cell.

    `pto` is an ``(n, 2)`` array of (stiffness, damping) pairs.
    """
    pto = np.asarray(pto, dtype=float).reshape(-1, 2)
    n = len(case.f_exc)
    Z = _impedance(case.omega, model.masses(n), case.A, case.B, pto)
    cond = np.linalg.cond(Z)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise EvaluationError(
            f"ill-conditioned impedance (cond={cond:.3g}) at omega={case.omega}, theta={case.theta}",
            case.omega,
            case.theta,
        )
    v = np.linalg.solve(Z, case.f_exc)
    scale = np.linalg.norm(case.f_exc)
    if np.linalg.norm(Z @ v - case.f_exc) > RESIDUAL_TOL * max(scale, np.finfo(float).tiny):
        raise EvaluationError(
            f"inaccurate solve at omega={case.omega}, theta={case.theta}", case.omega, case.theta
        )
    return v


def power(case, v, damping):
    """Total absorbed power of a solved cell and its per-buoy PTO split.

    Returns ``(total, per_buoy)`` where ``total`` is the interaction power
    expression and ``per_buoy[i] = D_i |v_i|^2 / 2``.
    """
    v = np.asarray(v, dtype=complex)
    f = case.f_exc
    total = 0.25 * (np.vdot(f, v) + np.vdot(v, f)) - 0.5 * np.vdot(v, case.B @ v)
    per_buoy = 0.5 * np.asarray(damping, dtype=float) * np.abs(v) ** 2
    return float(total.real), per_buoy


def _cell_powers(model, scenario, positions, pto):
    """Unweighted power per (direction, frequency) cell, vectorized over cells.

    Returns arrays of shape ``(n_dir, n_freq)`` and ``(n_dir, n_freq, n)``.
    """
    n = len(positions)
    omegas = scenario.frequencies
    k = wavenumber(omegas)
    b = radiation_damping(model, omegas)

    B = b[:, None, None] * _coupling(k, positions)
    eye = np.eye(n)
    reactance = omegas[:, None] * (model.masses(n) + model.a0)[None, :] - pto[None, :, 0] / omegas[:, None]
    Z = B + eye * (pto[None, :, 1] + 1j * reactance)[:, None, :]

    th = np.radians(scenario.directions)
    phase = positions[None, :, 0] * np.cos(th)[:, None] + positions[None, :, 1] * np.sin(th)[:, None]
    gain = scenario.amplitude * model.f0 * np.sqrt(b / model.b0)
    # F[f, i, d]: frequency-major so each frequency is one multi-RHS solve;
    # the appended identity yields Z^-1 for a 1-norm condition estimate
    F = gain[:, None, None] * np.exp(-1j * k[:, None, None] * phase.T[None, :, :])
    n_dir = F.shape[2]
    try:
        sol = np.linalg.solve(Z, np.concatenate([F, np.broadcast_to(eye, Z.shape)], axis=2))
    except np.linalg.LinAlgError:
        sol = np.full(Z.shape[:2] + (n_dir + n,), np.inf, dtype=complex)
    V = sol[:, :, :n_dir]
    cond = _norm1(Z) * _norm1(sol[:, :, n_dir:])
    bad = ~np.isfinite(cond) | (cond > MAX_CONDITION)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise EvaluationError(
            f"ill-conditioned impedance (cond={cond[i]:.3g}) at "
            f"omega={omegas[i]}, theta={scenario.directions[0]}",
            float(omegas[i]),
            float(scenario.directions[0]),
        )

    fv = np.sum(np.conj(F) * V, axis=1)
    vBv = np.sum(np.conj(V) * np.einsum("fij,fjd->fid", B, V), axis=1)
    total = (0.25 * (fv + np.conj(fv)) - 0.5 * vBv).real.T
    per_buoy = (0.5 * pto[None, :, 1, None] * np.abs(V) ** 2).transpose(2, 0, 1)
    return total, per_buoy


def _norm1(M):
    return np.max(np.sum(np.abs(M), axis=-2), axis=-1)


def _weighted(weights, values):
    return math.fsum((weights * values).ravel().tolist())


def isolated_powers(model, scenario, layout):
    """Mean power of each buoy deployed alone at its position with its PTO."""
    out = np.empty(layout.n)
    for i in range(layout.n):
        total, _ = _cell_powers(model, scenario, layout.positions[i : i + 1], layout.ptos[i : i + 1])
        out[i] = _weighted(scenario.weights, total)
    return out


def farm_power(model, scenario, layout, q_factor=True, keep_cells=False):
    """Probability-weighted mean power of a farm layout.

    Parameters
    ----------
    model : HydroModel
    scenario : WaveScenario
    layout : FarmLayout
    q_factor : bool
        Also evaluate every buoy in isolation and report the q-factor.
    keep_cells : bool
        Retain the per-cell unweighted total power.
    """
    positions = layout.positions
    _check_distinct(positions)
    total, per_buoy = _cell_powers(model, scenario, positions, layout.ptos)
    w = scenario.weights
    total_power = _weighted(w, total)
    per_buoy_power = np.array([_weighted(w, per_buoy[..., i]) for i in range(layout.n)])
    q = None
    if q_factor:
        q = total_power / math.fsum(isolated_powers(model, scenario, layout).tolist())
    return EvaluationResult(total_power, per_buoy_power, q, total if keep_cells else None)
