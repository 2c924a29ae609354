"""Per-bus complex frequency from sampled voltage trajectories.

The complex frequency at a bus is eps + j*omega with eps = d(ln v)/dt (the
normalized rate of change of the voltage magnitude) and omega = d(theta)/dt.
Differentiation is second-order central in the interior with one-sided stencils
at the ends, optionally followed by a centered moving average.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ComplexFrequencySample:
    eps: float    # 1/s
    omega: float  # rad/s

    @property
    def as_complex(self) -> complex:
        return complex(self.eps, self.omega)


@dataclass
class ComplexFrequencySeries:
    times: np.ndarray      # (n_samples,)
    bus_ids: list[int]
    eps: np.ndarray        # (n_samples, n_bus), 1/s
    omega: np.ndarray      # (n_samples, n_bus), rad/s
    smoothing_window: int
    scheme: str = "central_difference"
    omega_convention: str = "absolute"
    omega_s: float = 0.0

    @property
    def n_bus(self) -> int:
        return len(self.bus_ids)

    def column(self, bus_id: int) -> int:
        try:
            return self.bus_ids.index(bus_id)
        except ValueError:
            raise KeyError(f"unknown bus {bus_id}") from None

    def node(self, bus_id: int) -> tuple[np.ndarray, np.ndarray]:
        k = self.column(bus_id)
        return self.eps[:, k], self.omega[:, k]


def unwrap_angles(theta: np.ndarray) -> np.ndarray:
    """Remove 2*pi jumps so consecutive differences stay below pi in magnitude.

    Assumes successive samples genuinely differ by less than pi, which holds
    for grid trajectories sampled at dt <= 20 ms."""
    return np.unwrap(np.asarray(theta, dtype=float), axis=0)


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with edge truncation; window 1 is the identity."""
    if window <= 1:
        return x
    x = np.asarray(x, dtype=float)
    kernel = np.ones(window)
    flat = x.ndim == 1
    cols = x[:, None] if flat else x
    out = np.empty_like(cols, dtype=float)
    norm = np.convolve(np.ones(cols.shape[0]), kernel, mode="same")
    for j in range(cols.shape[1]):
        out[:, j] = np.convolve(cols[:, j], kernel, mode="same") / norm
    return out[:, 0] if flat else out


def estimate_complex_frequency(
    traj,
    smoothing_window: int = 5,
    absolute_omega: bool = True,
) -> ComplexFrequencySeries:
    """Differentiate a Trajectory into its per-bus complex-frequency series.

    With absolute_omega, trajectories recorded in the synchronous frame get
    the nominal speed added back so omega is in absolute rad/s.
    """
    times = np.asarray(traj.times, dtype=float)
    v = np.asarray(traj.v, dtype=float)
    theta = np.asarray(traj.theta, dtype=float)
    if len(times) < 3:
        raise ValueError("need at least 3 samples to differentiate")
    if smoothing_window < 1:
        raise ValueError("smoothing_window must be >= 1")
    bad = np.argwhere(v <= 0.0)
    if bad.size:
        i, k = bad[0]
        raise ValueError(
            f"non-positive voltage at bus {traj.bus_ids[k]}, t={times[i]:.6g} s"
        )

    eps = np.gradient(np.log(v), times, axis=0, edge_order=2)
    omega = np.gradient(unwrap_angles(theta), times, axis=0, edge_order=2)
    convention = "deviation"
    if absolute_omega:
        if getattr(traj, "frame", "synchronous") == "synchronous":
            omega = omega + traj.omega_s
        convention = "absolute"

    eps = moving_average(eps, smoothing_window)
    omega = moving_average(omega, smoothing_window)
    return ComplexFrequencySeries(
        times=times, bus_ids=list(traj.bus_ids),
        eps=eps, omega=omega,
        smoothing_window=smoothing_window,
        omega_convention=convention,
        omega_s=getattr(traj, "omega_s", 0.0),
    )
