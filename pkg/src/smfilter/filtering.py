"""Online output filtering by intersection of per-horizon intervals.

The local variant solves, at each time step and for each horizon p, two
support LPs plus two interval LPs over the (reduced) feasible parameter
set, yielding a regressor-specific containment interval.  The global
variant evaluates precomputed predictors with constant bounds and performs
no optimization online.  Both return the interval midpoint (the central
estimate, minimizing the worst-case error) with the half-width as the
guaranteed bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .identify import (
    FeasibleParameterSet,
    GlobalPredictor,
    regressor_vector,
)
from .lpcore import (
    DEFAULT_FEAS_TOL,
    OPTIMAL,
    LinearProgram,
    SolverFailure,
    solve_lp,
    support_oracle,
    support_value,
    vertex_walk,
)


class EmptyIntersection(Exception):
    """The per-horizon intervals do not overlap.

    Signals violated working assumptions: the declared noise bound is too
    small, the scaling factors are too aggressive, or the identification
    data do not cover this trajectory.
    """

    def __init__(self, message, lower_horizon=None, upper_horizon=None):
        super().__init__(message)
        self.lower_horizon = lower_horizon
        self.upper_horizon = upper_horizon


@dataclass(frozen=True)
class OutputInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("interval lower bound exceeds upper bound")

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)


@dataclass(frozen=True)
class FilterReport:
    """One filtered sample: central estimate, guaranteed bound, interval."""

    time_index: int
    estimate: float
    bound: float
    interval: OutputInterval
    per_horizon: tuple = ()      # (p, zeta_min, zeta_max) per horizon
    mode: str = "local"
    clipped: bool = False


def local_interval_bounds(fps: FeasibleParameterSet, regressor, gamma: float,
                          feas_tol: float = DEFAULT_FEAS_TOL) -> tuple[float, float]:
    """Endpoints of the local containment interval for one regressor.

    Two support LPs give c1 = max phi' theta and c2 = max -phi' theta over
    the FPS; two LPs in (theta, tau) then minimize +/- phi' theta + gamma*tau
    subject to c1 - phi' theta <= tau and c2 + phi' theta <= tau.  Returns
    (zeta_min, zeta_max) including the +/- lambda offsets.
    """
    if gamma <= 1.0:
        raise ValueError("gamma must be > 1")
    phi = np.asarray(regressor, dtype=float)
    poly = fps.polytope
    lam = fps.lam.lam
    oracle = support_oracle(poly, feas_tol)
    c1, _, basis1 = oracle.support_with_vertex(phi)
    c2, _, basis2 = oracle.support_with_vertex(-phi)

    m = poly.n_rows
    A = np.vstack([
        np.hstack([poly.normals, np.zeros((m, 1))]),
        np.concatenate([-phi, [-1.0]])[None, :],
        np.concatenate([phi, [-1.0]])[None, :],
    ])
    b = np.concatenate([poly.offsets, [-c1, -c2]])

    def _solve(cost_sign: float, fps_basis, lift_row: int) -> float:
        c = np.concatenate([cost_sign * phi, [gamma]])
        if fps_basis is not None:
            # a support vertex plus its tight lifted row is a vertex of the
            # lifted polytope at tau = c1 + c2: walk from there
            walked = vertex_walk(A, b, -c, np.concatenate([fps_basis, [lift_row]]),
                                 feas_tol)
            if isinstance(walked, tuple):
                return float(c @ walked[0])
        out = solve_lp(LinearProgram(c, A, b), feas_tol)
        if out.status != OPTIMAL:
            raise SolverFailure(f"interval LP ended with status {out.status}")
        return float(out.optimal_value)

    zeta_max = _solve(+1.0, basis2, m) + lam
    zeta_min = -_solve(-1.0, basis1, m + 1) - lam
    if zeta_min > zeta_max:  # only possible at solver-tolerance level
        mid = 0.5 * (zeta_min + zeta_max)
        zeta_min = zeta_max = mid
    return zeta_min, zeta_max


def intersect_intervals(per_horizon) -> OutputInterval:
    """Componentwise intersection: max of lowers, min of uppers.

    `per_horizon` is a sequence of (lower, upper) pairs in horizon order.
    Raises EmptyIntersection (carrying the offending horizons, 1-based)
    when the result is empty.
    """
    pairs = list(per_horizon)
    if not pairs:
        raise ValueError("no intervals to intersect")
    lowers = np.array([lo for lo, _ in pairs])
    uppers = np.array([hi for _, hi in pairs])
    i_lo = int(np.argmax(lowers))
    i_hi = int(np.argmin(uppers))
    if lowers[i_lo] > uppers[i_hi]:
        raise EmptyIntersection(
            f"empty intersection: lower {lowers[i_lo]:.6g} from horizon "
            f"{i_lo + 1} exceeds upper {uppers[i_hi]:.6g} from horizon {i_hi + 1}",
            lower_horizon=i_lo + 1, upper_horizon=i_hi + 1)
    return OutputInterval(float(lowers[i_lo]), float(uppers[i_hi]))


def _finish_report(k, per_horizon, mode, on_empty) -> FilterReport:
    try:
        interval = intersect_intervals([(lo, hi) for _, lo, hi in per_horizon])
        clipped = False
    except EmptyIntersection:
        if on_empty != "clip":
            raise
        lowers = [lo for _, lo, _ in per_horizon]
        uppers = [hi for _, _, hi in per_horizon]
        mid = 0.5 * (max(lowers) + min(uppers))
        interval = OutputInterval(mid, mid)
        clipped = True
    return FilterReport(time_index=k, estimate=interval.center,
                        bound=interval.half_width, interval=interval,
                        per_horizon=tuple(per_horizon), mode=mode,
                        clipped=clipped)


def _check_history(k, p_bar, order, n_samples):
    if k < p_bar + order - 1:
        raise ValueError(
            f"index {k} has insufficient history for p_bar={p_bar}, order={order}"
            f" (first valid index is {p_bar + order - 1})")
    if k >= n_samples:
        raise ValueError(f"index {k} beyond available samples ({n_samples})")


def local_filter_step(bank: list[FeasibleParameterSet], y, u, k: int,
                      gamma: float, feas_tol: float = DEFAULT_FEAS_TOL,
                      on_empty: str = "error") -> FilterReport:
    """One local filtering step at time k using measurement/input history.

    `bank` holds the FPSs for p = 1..p_bar; `y` and `u` are the measured
    output and input sequences (u shaped (T, m)).
    """
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    p_bar = len(bank)
    order = _bank_order(bank, u.shape[1])
    _check_history(k, p_bar, order, len(y))
    per_horizon = []
    for p, fps in enumerate(bank, start=1):
        phi = regressor_vector(y, u, k, p, order)
        lo, hi = local_interval_bounds(fps, phi, gamma, feas_tol)
        per_horizon.append((p, lo, hi))
    return _finish_report(k, per_horizon, "local", on_empty)


def _bank_order(bank, input_dim: int) -> int:
    # param_dim = o + m*(o+p-1) => o = (param_dim - m*(p-1)) / (1+m)
    fps = bank[0]
    num = fps.param_dim - input_dim * (fps.horizon - 1)
    order, rem = divmod(num, 1 + input_dim)
    if rem != 0 or order < 1:
        raise ValueError(
            f"FPS dimension {fps.param_dim} inconsistent with input width {input_dim}")
    return order


@dataclass(frozen=True)
class GlobalPredictorBank:
    """Dense bank of fixed predictors for p = 1..p_bar."""

    predictors: tuple
    order: int
    input_dim: int

    def __post_init__(self):
        preds = tuple(self.predictors)
        for i, pred in enumerate(preds, start=1):
            if pred.horizon != i:
                raise ValueError("predictor horizons must be exactly 1..p_bar")
            if pred.tau_bar < 0.0:
                raise ValueError("tau_bar must be nonnegative")
            expect = self.order + self.input_dim * (self.order + i - 1)
            if pred.theta_hat.shape[0] != expect:
                raise ValueError(
                    f"predictor for p={i} has parameter length "
                    f"{pred.theta_hat.shape[0]}, expected {expect}")
        object.__setattr__(self, "predictors", preds)

    @property
    def p_bar(self) -> int:
        return len(self.predictors)

    @property
    def min_tau_bar(self) -> float:
        return min(pred.tau_bar for pred in self.predictors)


def global_interval_bounds(bank: GlobalPredictorBank, y, u, k: int) -> list[tuple[float, float]]:
    """Per-horizon intervals phi' theta_hat +/- tau_bar; no LPs involved."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    _check_history(k, bank.p_bar, bank.order, len(y))
    out = []
    for pred in bank.predictors:
        phi = regressor_vector(y, u, k, pred.horizon, bank.order)
        center = float(phi @ pred.theta_hat)
        out.append((center - pred.tau_bar, center + pred.tau_bar))
    return out

def global_filter_step(bank: GlobalPredictorBank, y, u, k: int,
                       on_empty: str = "error") -> FilterReport:
    """One constant-time filtering step with precomputed global bounds."""
    pairs = global_interval_bounds(bank, y, u, k)
    per_horizon = [(p, lo, hi) for p, (lo, hi) in enumerate(pairs, start=1)]
    return _finish_report(k, per_horizon, "global", on_empty)


class StreamFilter:
    """Streaming wrapper: feed (u(k), y(k)) records in order, get reports.

    Keeps a ring of the last p_bar + o - 1 samples; returns None until the
    history is deep enough to form every regressor.
    """

    def __init__(self, *, fps_bank=None, predictor_bank=None, order=None,
                 gamma=None, feas_tol=DEFAULT_FEAS_TOL, on_empty="error"):
        if (fps_bank is None) == (predictor_bank is None):
            raise ValueError("provide exactly one of fps_bank or predictor_bank")
        self._fps_bank = fps_bank
        self._pred_bank = predictor_bank
        if fps_bank is not None:
            if order is None or gamma is None:
                raise ValueError("local streaming needs order and gamma")
            self._p_bar = len(fps_bank)
            self._order = order
        else:
            self._p_bar = predictor_bank.p_bar
            self._order = predictor_bank.order
        self._gamma = gamma
        self._feas_tol = feas_tol
        self._on_empty = on_empty
        self._y: list[float] = []
        self._u: list[np.ndarray] = []
        self._k = -1

    def feed(self, u_k, y_k) -> FilterReport | None:
        self._k += 1
        self._u.append(np.atleast_1d(np.asarray(u_k, dtype=float)))
        self._y.append(float(y_k))
        depth = self._p_bar + self._order - 1
        if self._k < depth:
            return None
        # only the trailing window matters; local index within the window
        y = np.array(self._y[-(depth + 1):])
        u = np.vstack(self._u[-(depth + 1):])
        k_local = len(y) - 1
        if self._fps_bank is not None:
            rep = local_filter_step(self._fps_bank, y, u, k_local, self._gamma,
                                    self._feas_tol, self._on_empty)
        else:
            rep = global_filter_step(self._pred_bank, y, u, k_local,
                                     self._on_empty)
        return FilterReport(time_index=self._k, estimate=rep.estimate,
                            bound=rep.bound, interval=rep.interval,
                            per_horizon=rep.per_horizon, mode=rep.mode,
                            clipped=rep.clipped)
