"""Frequency inertia M, voltage inertia H_v, and the generalized-inertia
signal zeta = H_v*eps + j*M*domega/dt.

M maps active-power imbalance to angular acceleration (M = 2H/omega_s for a
synchronous machine); H_v maps reactive-power imbalance to the normalized rate
of change of voltage magnitude, motivated by the stored energy of an
equivalent capacitance at the bus. A single-bus capacitor model supports
sweeping H_v and checking the inverse-proportionality of the voltage response.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class EstimationError(ValueError):
    """Input series unsuitable for an inertia fit."""


@dataclass
class GeneralizedInertiaEstimate:
    bus_or_region: str
    m: float | None
    h_v: float | None
    residual_p: float | None
    residual_q: float | None
    window: tuple[float, float] | None
    zeta_series: np.ndarray | None = None  # complex, p.u. power


@dataclass
class CapacitorBusModel:
    c_eq: float          # equivalent capacitance, p.u.
    s_base: float
    v0: float            # pre-step equilibrium voltage, p.u.
    q_step: float        # reactive supply step magnitude, p.u.
    t_step: float        # step instant, s
    q_load_coeff: float  # B in Q_e = B * v^2

    def validate(self) -> None:
        if self.c_eq <= 0 or self.v0 <= 0 or self.s_base <= 0:
            raise ValueError("c_eq, v0, s_base must be > 0")
        if self.q_load_coeff <= 0:
            raise ValueError("q_load_coeff must be > 0 for an equilibrium")


@dataclass
class CapacitorSweepResult:
    times: np.ndarray
    h_v_values: list[float]
    v: np.ndarray    # (n_samples, n_hv)
    eps: np.ndarray  # (n_samples, n_hv)


def capacitor_voltage_inertia(v: float, c_eq: float, s_base: float) -> float:
    """Voltage inertia of an equivalent capacitance: v^2 * c_eq / (2 s_base)."""
    if v <= 0 or c_eq <= 0 or s_base <= 0:
        raise ValueError("v, c_eq, s_base must be > 0")
    return v * v * c_eq / (2.0 * s_base)


def _scalar_fit(y: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """Least-squares gain k for y = k*x, plus the normalized residual."""
    denom = float(np.dot(x, x))
    k = float(np.dot(y, x)) / denom
    scale = float(np.linalg.norm(y))
    res = float(np.linalg.norm(y - k * x)) / scale if scale > 0 else 0.0
    return k, res


def _window_mask(times: np.ndarray,
                 window: tuple[float, float] | None) -> np.ndarray:
    if window is None:
        return np.ones(len(times), dtype=bool)
    t0, t1 = window
    return (times >= t0 - 1e-9) & (times <= t1 + 1e-9)


def estimate_frequency_inertia(
    times: np.ndarray,
    omega: np.ndarray,
    dp: np.ndarray,
    window: tuple[float, float] | None = None,
    threshold: float = 1e-6,
) -> tuple[float, float]:
    """Fit M in dp = M * domega/dt over the window; returns (M, residual)."""
    times = np.asarray(times, dtype=float)
    omega_dot = np.gradient(np.asarray(omega, dtype=float), times,
                            edge_order=2)
    mask = _window_mask(times, window)
    wd, wp = omega_dot[mask], np.asarray(dp, dtype=float)[mask]
    if wd.size == 0 or np.max(np.abs(wd)) <= threshold:
        raise EstimationError("no frequency excursion in window")
    return _scalar_fit(wp, wd)


def estimate_voltage_inertia(
    times: np.ndarray,
    eps: np.ndarray,
    dq: np.ndarray,
    window: tuple[float, float] | None = None,
    threshold: float = 1e-6,
) -> tuple[float, float]:
    """Fit H_v in dq = H_v * eps over the window; returns (H_v, residual)."""
    times = np.asarray(times, dtype=float)
    mask = _window_mask(times, window)
    we = np.asarray(eps, dtype=float)[mask]
    wq = np.asarray(dq, dtype=float)[mask]
    if we.size == 0 or np.max(np.abs(we)) <= threshold:
        raise EstimationError("no voltage excursion in window")
    return _scalar_fit(wq, we)


def generalized_inertia_series(
    h_v: float,
    m: float,
    times: np.ndarray,
    eps: np.ndarray,
    omega: np.ndarray,
) -> np.ndarray:
    """zeta(t) = h_v*eps(t) + j*m*domega/dt; equals dQ + j*dP when the
    inertia pair matches the bus."""
    if not (math.isfinite(h_v) and math.isfinite(m)):
        raise ValueError("h_v and m must be finite")
    times = np.asarray(times, dtype=float)
    eps = np.asarray(eps, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if eps.shape != omega.shape or eps.shape != times.shape:
        raise ValueError("series must share one sample grid")
    omega_dot = np.gradient(omega, times, edge_order=2)
    return h_v * eps + 1j * m * omega_dot


def simulate_capacitor_bus(
    model: CapacitorBusModel,
    h_v_values: list[float],
    t_end: float,
    dt: float,
) -> CapacitorSweepResult:
    """Integrate the single-bus voltage ODE for each voltage-inertia value.

    dv/dt = v * (Q_m(t) - B v^2) / (2 s_base h_v), with Q_m stepping by
    q_step at t_step from the pre-step equilibrium B v0^2. The returned eps
    equals the instantaneous reactive imbalance over h_v, so eps right after
    the step is q_step / (2 s_base h_v)."""
    model.validate()
    if any(h <= 0 for h in h_v_values):
        raise ValueError("h_v values must be > 0")
    b = model.q_load_coeff
    q0 = b * model.v0 ** 2
    n = int(round(t_end / dt))
    times = np.arange(n + 1) * dt
    # snap the step to the grid; a whole RK4 step sees one q_m value so the
    # pre-step equilibrium is preserved exactly up to the step instant
    i_step = int(math.ceil(model.t_step / dt - 1e-9))

    v_out = np.empty((n + 1, len(h_v_values)))
    eps_out = np.empty_like(v_out)
    for j, h_v in enumerate(h_v_values):
        gain = 1.0 / (2.0 * model.s_base * h_v)

        def f(v: float, q: float) -> float:
            return v * (q - b * v * v) * gain

        v = model.v0
        for i in range(n + 1):
            q = q0 + (model.q_step if i >= i_step else 0.0)
            if not v > 0.0:  # also catches NaN from a blown-up step
                raise ValueError(f"voltage collapse at t={times[i]:.6g} s")
            v_out[i, j] = v
            eps_out[i, j] = (q - b * v * v) * gain
            if i < n:
                k1 = f(v, q)
                k2 = f(v + 0.5 * dt * k1, q)
                k3 = f(v + 0.5 * dt * k2, q)
                k4 = f(v + dt * k3, q)
                v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return CapacitorSweepResult(
        times=times, h_v_values=list(h_v_values), v=v_out, eps=eps_out)
