"""Optimality studies: timeshare/phase optimum, sensitivity surface, optimal duration.

The sensitivity objective for sinusoidal signals is the calibrated
transfer-function magnitude ``sin(alpha)/2 * sqrt(2 pi) * K(w)``, whose DC
value reproduces the analytic two-segment sensitivity magnitude exactly.
All optimizers refine a coarse-grid argmax with golden-section search; ties
on flat plateaus resolve toward smaller tau (better time resolution at
equal sensitivity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import bipartite_sensitivity, transfer_value

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class SensitivitySurface:
    """Sensitivity over a (signal frequency) x (pulse duration) grid.

    ``values[i, j]`` is the sensitivity at ``omega_grid[i]``,
    ``tau_grid[j]``; ``ridge`` holds (omega, tau*) rows of the per-frequency
    optimal duration.
    """

    omega_grid: np.ndarray
    tau_grid: np.ndarray
    values: np.ndarray
    ridge: np.ndarray

    def __post_init__(self):
        self.omega_grid = np.asarray(self.omega_grid, dtype=float)
        self.tau_grid = np.asarray(self.tau_grid, dtype=float)
        if np.any(np.diff(self.omega_grid) <= 0) or np.any(np.diff(self.tau_grid) <= 0):
            raise ValueError("grids must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("surface values must be finite")


def golden_section_max(f, a: float, b: float, tol: float = 1e-10,
                       max_iter: int = 200) -> tuple[float, float]:
    """Maximize a unimodal function on [a, b]; returns (x, f(x))."""
    c = b - (b - a) * _INV_GOLDEN
    d = a + (b - a) * _INV_GOLDEN
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(abs(a), abs(b), 1.0):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * _INV_GOLDEN
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * _INV_GOLDEN
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def sinusoid_sensitivity(omega_signal, omega_rabi: float, tau: float):
    """|dp| per unit detuning amplitude for a sinusoidal signal at ``omega_signal``.

    ``sin(alpha)/2 * sqrt(2 pi) * K(w)``; at w = 0 this reduces to
    ``sin(alpha)(1 - cos(alpha)) / Om``, the magnitude of the analytic
    two-segment sensitivity at the optimal timeshare and phase.  Units:
    seconds.  Accepts arrays for ``omega_signal``.
    """
    alpha = 0.5 * omega_rabi * tau
    return 0.5 * math.sin(alpha) * math.sqrt(2.0 * math.pi) * transfer_value(
        omega_signal, omega_rabi, tau)


def scan_timeshare_phase(omega: float, tau: float, k_grid=None, theta_grid=None,
                         tol: float = 1e-9) -> tuple[float, float, float]:
    """Locate the (timeshare, phase-jump) pair maximizing |sensitivity|.

    Scans the grids (defaults: 41 points over [0, 1] and [0, pi]), then
    refines each axis with golden-section search.  The objective is
    separable in (k, theta), so one refinement pass per axis suffices.
    Returns (k*, theta*, |eta|*).
    """
    k_grid = np.linspace(0.0, 1.0, 41) if k_grid is None else np.asarray(k_grid, float)
    theta_grid = (np.linspace(0.0, math.pi, 41) if theta_grid is None
                  else np.asarray(theta_grid, float))
    # restricted grids are allowed (they find the restricted optimum), out-of-range ones are not
    if k_grid[0] < 0.0 or k_grid[-1] > 1.0:
        raise ValueError("k_grid must lie within [0, 1]")
    if theta_grid[0] < 0.0 or theta_grid[-1] > math.pi + 1e-12:
        raise ValueError("theta_grid must lie within [0, pi]")

    def objective(k: float, theta: float) -> float:
        return abs(bipartite_sensitivity(omega, tau, k, theta))

    vals = np.array([[objective(k, th) for th in theta_grid] for k in k_grid])
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    k_best, th_best = float(k_grid[i]), float(theta_grid[j])

    lo = k_grid[max(i - 1, 0)]
    hi = k_grid[min(i + 1, len(k_grid) - 1)]
    k_best, _ = golden_section_max(lambda k: objective(k, th_best), lo, hi, tol=tol)
    lo = theta_grid[max(j - 1, 0)]
    hi = theta_grid[min(j + 1, len(theta_grid) - 1)]
    th_best, eta_best = golden_section_max(lambda th: objective(k_best, th), lo, hi, tol=tol)
    return k_best, th_best, eta_best


def optimal_duration(omega_signal: float, omega_rabi: float, extended: bool = False,
                     n_coarse: int = 512, tol: float = 1e-10) -> tuple[float, bool]:
    """Duration maximizing :func:`sinusoid_sensitivity` at one signal frequency.

    Searches tau in (0, pi/Om] (flip angle capped at 90 degrees; the
    ``extended`` flag widens the cap to alpha <= pi).  Returns
    ``(tau*, low_confidence)``; the flag is set when the objective is flat
    over the whole domain (huge signal frequencies), in which case the
    smallest-tau maximizer is reported.
    """
    if omega_signal < 0:
        raise ValueError("signal frequency must be >= 0")
    tau_max = (2.0 * math.pi if extended else math.pi) / omega_rabi
    taus = np.linspace(tau_max / n_coarse, tau_max, n_coarse)
    vals = np.array([sinusoid_sensitivity(omega_signal, omega_rabi, t) for t in taus])
    top = float(vals.max())
    if top <= 0 or (top - float(vals.min())) <= 1e-12 * top:
        return float(taus[int(np.argmax(vals))]), True
    i = int(np.argmax(vals))
    lo = taus[max(i - 1, 0)]
    hi = taus[min(i + 1, len(taus) - 1)]
    tau_star, _ = golden_section_max(
        lambda t: sinusoid_sensitivity(omega_signal, omega_rabi, t), lo, hi, tol=tol)
    return float(tau_star), False


def sensitivity_surface(omega_rabi: float, omega_grid, tau_grid,
                        extended: bool = False) -> SensitivitySurface:
    """Sensitivity over the full (omega, tau) grid plus the optimal-duration ridge."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    tau_grid = np.asarray(tau_grid, dtype=float)
    tau_cap = (2.0 * math.pi if extended else math.pi) / omega_rabi
    if tau_grid[-1] > tau_cap * (1.0 + 1e-12):
        raise ValueError(
            f"tau grid exceeds the flip-angle cap {tau_cap:.3e} s; pass extended=True")
    values = np.empty((len(omega_grid), len(tau_grid)))
    for j, tau in enumerate(tau_grid):
        values[:, j] = sinusoid_sensitivity(omega_grid, omega_rabi, tau)
    ridge = np.array([[w, optimal_duration(w, omega_rabi, extended=extended)[0]]
                      for w in omega_grid])
    return SensitivitySurface(omega_grid, tau_grid, values, ridge)


def write_surface_csv(path, surface: SensitivitySurface) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("omega_rad_s,tau_s,eta_s\n")
        for i, w in enumerate(surface.omega_grid):
            for j, tau in enumerate(surface.tau_grid):
                fh.write("%.12g,%.12g,%.12g\n" % (w, tau, surface.values[i, j]))


def write_ridge_csv(path, surface: SensitivitySurface) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("omega_rad_s,tau_star_s\n")
        for w, tau in surface.ridge:
            fh.write("%.12g,%.12g\n" % (w, tau))
