"""Steady-state Kalman filter baseline and filtering metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StateSpaceModel:
    """Discrete model x+ = Ad x + Bd u, y = Cd x + v, with noise covariances."""

    Ad: np.ndarray
    Bd: np.ndarray
    Cd: np.ndarray
    process_cov: np.ndarray   # Q, n x n
    measurement_cov: float    # R > 0 (scalar output)

    def __post_init__(self):
        Ad = np.atleast_2d(np.asarray(self.Ad, dtype=float))
        Bd = np.atleast_2d(np.asarray(self.Bd, dtype=float))
        Cd = np.atleast_2d(np.asarray(self.Cd, dtype=float))
        Q = np.atleast_2d(np.asarray(self.process_cov, dtype=float))
        n = Ad.shape[0]
        if Ad.shape != (n, n) or Bd.shape[0] != n or Cd.shape != (1, n):
            raise ValueError("inconsistent state-space dimensions")
        if Q.shape != (n, n):
            raise ValueError("process_cov must be n x n")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("process_cov must be symmetric")
        if np.any(np.linalg.eigvalsh((Q + Q.T) / 2) < -1e-12):
            raise ValueError("process_cov must be positive semidefinite")
        if self.measurement_cov <= 0.0:
            raise ValueError("measurement_cov must be positive")
        for name, M in (("Ad", Ad), ("Bd", Bd), ("Cd", Cd), ("process_cov", Q)):
            object.__setattr__(self, name, M)

    @property
    def n_states(self) -> int:
        return self.Ad.shape[0]


def riccati_fixed_point(model: StateSpaceModel, tol: float = 1e-12,
                        max_iter: int = 100000,
                        P0: np.ndarray | None = None) -> np.ndarray:
    """A-priori covariance P solving the discrete algebraic Riccati equation.

    Fixed-point iteration P <- Ad (P - P C'(C P C' + R)^-1 C P) Ad' + Q
    until the sup-norm update falls below tol.
    """
    A, C, Q, R = model.Ad, model.Cd, model.process_cov, model.measurement_cov
    P = np.eye(model.n_states) * 1e3 if P0 is None else np.array(P0, dtype=float)
    for _ in range(max_iter):
        S = (C @ P @ C.T).item() + R
        K = (P @ C.T) / S
        P_next = A @ (P - K @ (C @ P)) @ A.T + Q
        P_next = (P_next + P_next.T) / 2
        if np.max(np.abs(P_next - P)) <= tol:
            return P_next
        P = P_next
    raise ArithmeticError(f"Riccati iteration did not converge in {max_iter} steps")


def dare_steady_gain(model: StateSpaceModel, tol: float = 1e-12,
                     max_iter: int = 100000) -> np.ndarray:
    """Steady-state Kalman gain K = P C' (C P C' + R)^-1 as an (n,) vector."""
    P = riccati_fixed_point(model, tol, max_iter)
    S = (model.Cd @ P @ model.Cd.T).item() + model.measurement_cov
    return (P @ model.Cd.T).ravel() / S


def kf_step(state, gain, model: StateSpaceModel, u, y: float):
    """Predict with (Ad, Bd), correct with the steady gain; returns
    (corrected state, output estimate)."""
    x = np.atleast_1d(np.asarray(state, dtype=float))
    if x.shape[0] != model.n_states:
        raise ValueError("state dimension mismatch")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    x_pred = model.Ad @ x + model.Bd @ u
    innov = y - (model.Cd @ x_pred).item()
    x_corr = x_pred + np.asarray(gain, dtype=float) * innov
    return x_corr, (model.Cd @ x_corr).item()


def run_kf(model: StateSpaceModel, gain, inputs, measurements,
           x0=None) -> np.ndarray:
    """Filter a whole record; estimate at k uses u(k-1) and y(k)."""
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    y = np.asarray(measurements, dtype=float)
    x = np.zeros(model.n_states) if x0 is None else np.array(x0, dtype=float)
    est = np.empty(len(y))
    u_prev = np.zeros(u.shape[1])
    for k in range(len(y)):
        x, est[k] = kf_step(x, gain, model, u_prev, y[k])
        u_prev = u[k]
    return est


@dataclass(frozen=True)
class FilterMetrics:
    rmse: float
    max_error: float
    avg_bound: float | None = None
    max_bound: float | None = None
    containment_rate: float | None = None


def compute_metrics(true_z, estimates, bounds=None) -> FilterMetrics:
    """RMSE, max |error|, bound statistics and containment rate."""
    z = np.asarray(true_z, dtype=float)
    zh = np.asarray(estimates, dtype=float)
    if z.shape != zh.shape:
        raise ValueError("true and estimated sequences must have equal length")
    err = z - zh
    rmse = float(np.sqrt(np.mean(err ** 2)))
    max_error = float(np.max(np.abs(err))) if err.size else 0.0
    if bounds is None:
        return FilterMetrics(rmse=rmse, max_error=max_error)
    tau = np.asarray(bounds, dtype=float)
    if tau.shape != z.shape:
        raise ValueError("bounds length mismatch")
    return FilterMetrics(
        rmse=rmse,
        max_error=max_error,
        avg_bound=float(np.mean(tau)),
        max_bound=float(np.max(tau)),
        containment_rate=float(np.mean(np.abs(err) <= tau)),
    )
