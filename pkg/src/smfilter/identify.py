"""Offline Set Membership identification.

Per prediction horizon p this builds the regressor dataset, estimates the
worst-case multistep error bound by LP, assembles the feasible parameter
set (FPS) polytope, prunes its redundant facets, and optionally identifies
the fixed min-max predictor together with its precomputed global accuracy
bound.  A full per-run identification bundle can be persisted to JSON and
reloaded bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lpcore import (
    DEFAULT_FEAS_TOL,
    DEFAULT_SLACK_TOL,
    OPTIMAL,
    LinearProgram,
    Polytope,
    SolverFailure,
    UnboundedDirection,
    remove_redundant_constraints,
    solve_lp,
    support_value,
)
from .simharness import ExperimentData

BUNDLE_VERSION = 1


@dataclass(frozen=True)
class RegressorDataset:
    """N pairs (noisy p-step regressor, measured target output)."""

    horizon: int
    order: int
    input_dim: int
    regressors: np.ndarray   # (N, o + m*(o+p-1))
    targets: np.ndarray      # (N,)

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.regressors, dtype=float))
        y = np.atleast_1d(np.asarray(self.targets, dtype=float))
        if phi.shape[0] != y.shape[0]:
            raise ValueError("regressors and targets must have equal length")
        if phi.shape[1] != self.param_dim:
            raise ValueError(
                f"regressor length must be o + m*(o+p-1) = {self.param_dim}")
        object.__setattr__(self, "regressors", phi)
        object.__setattr__(self, "targets", y)

    @property
    def param_dim(self) -> int:
        o, m, p = self.order, self.input_dim, self.horizon
        return o + m * (o + p - 1)

    @property
    def count(self) -> int:
        return self.targets.shape[0]

    def truncated(self, n: int) -> "RegressorDataset":
        """Keep only the last n pairs (used to equalize N across horizons)."""
        if n > self.count:
            raise ValueError("cannot truncate to more samples than available")
        return RegressorDataset(self.horizon, self.order, self.input_dim,
                                self.regressors[self.count - n:],
                                self.targets[self.count - n:])


@dataclass(frozen=True)
class ErrorBoundLambda:
    """Scaled worst-case p-step prediction error bound."""

    horizon: int
    lam: float          # alpha * LP optimum
    alpha: float
    d_bar: float
    lp_optimum: float = 0.0

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ValueError("alpha must be > 1")
        if self.lam < 0.0:
            raise ValueError("lambda bound must be nonnegative")


@dataclass(frozen=True)
class FeasibleParameterSet:
    """Polytope of p-step predictor parameters consistent with the data."""

    horizon: int
    polytope: Polytope
    lam: ErrorBoundLambda
    reduced: bool = False

    @property
    def param_dim(self) -> int:
        return self.polytope.dim


@dataclass(frozen=True)
class GlobalPredictor:
    """Fixed parameter vector with precomputed trajectory-independent bound."""

    horizon: int
    theta_hat: np.ndarray
    tau_bar: float
    gamma_bar: float
    zeta_star: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta_hat",
                           np.atleast_1d(np.asarray(self.theta_hat, dtype=float)))


def regressor_vector(y: np.ndarray, u: np.ndarray, k: int, horizon: int,
                     order: int) -> np.ndarray:
    """Noisy p-step regressor at target index k.

    Stacks [y(k-p) .. y(k-p-o+1), u(k-1)' .. u(k-p-o+1)'].  Requires
    k >= p + o - 1 so every lag exists.
    """
    p, o = horizon, order
    if k < p + o - 1:
        raise ValueError(f"index {k} too early for horizon {p}, order {o}")
    ylags = y[k - p - o + 1: k - p + 1][::-1]
    ulags = u[k - p - o + 1: k][::-1]
    return np.concatenate([ylags, ulags.reshape(-1)])


def assemble_regressors(data: ExperimentData, order: int,
                        horizon: int) -> RegressorDataset:
    """All valid (regressor, target) pairs of the dataset for one horizon."""
    p, o, m = horizon, order, data.input_dim
    T = len(data)
    start = p + o - 1
    if T < start + 1:
        raise ValueError(
            f"need at least {start + 1} samples for horizon {p} and order {o}, got {T}")
    y = data.measured_outputs
    u = data.inputs
    N = T - start
    dim = o + m * (o + p - 1)
    phi = np.empty((N, dim))
    for i, k in enumerate(range(start, T)):
        phi[i] = regressor_vector(y, u, k, p, o)
    return RegressorDataset(horizon=p, order=o, input_dim=m,
                            regressors=phi, targets=y[start:].copy())


def estimate_lambda(dataset: RegressorDataset, d_bar: float, alpha: float,
                    feas_tol: float = DEFAULT_FEAS_TOL) -> ErrorBoundLambda:
    """Smallest lambda such that some predictor fits all data within lambda + d_bar.

    One LP in (theta, lambda) with 2N+1 constraints; the optimum is scaled
    by alpha (> 1) to cover finite-sample uncertainty.
    """
    if alpha <= 1.0:
        raise ValueError("alpha must be > 1")
    if dataset.count == 0:
        raise ValueError("empty dataset")
    phi, y = dataset.regressors, dataset.targets
    N, n = phi.shape
    ones = np.ones((N, 1))
    A = np.vstack([
        np.hstack([phi, -ones]),
        np.hstack([-phi, -ones]),
        np.concatenate([np.zeros(n), [-1.0]])[None, :],
    ])
    b = np.concatenate([y + d_bar, -y + d_bar, [0.0]])
    c = np.concatenate([np.zeros(n), [1.0]])
    out = solve_lp(LinearProgram(c, A, b), feas_tol)
    if out.status != OPTIMAL:
        raise SolverFailure(f"lambda LP ended with status {out.status}")
    lam_star = max(0.0, float(out.optimal_value))
    return ErrorBoundLambda(horizon=dataset.horizon, lam=alpha * lam_star,
                            alpha=alpha, d_bar=d_bar, lp_optimum=lam_star)


def build_fps(dataset: RegressorDataset, lam: ErrorBoundLambda) -> FeasibleParameterSet:
    """FPS polytope: 2N rows, |y - phi' theta| <= lambda + d_bar per data pair.

    Rows are ordered by sample index, positive inequality first.
    """
    if lam.horizon != dataset.horizon:
        raise ValueError(
            f"lambda horizon {lam.horizon} != dataset horizon {dataset.horizon}")
    phi, y = dataset.regressors, dataset.targets
    N, n = phi.shape
    bound = lam.lam + lam.d_bar
    H = np.empty((2 * N, n))
    h = np.empty(2 * N)
    H[0::2] = phi
    H[1::2] = -phi
    h[0::2] = y + bound
    h[1::2] = -y + bound
    return FeasibleParameterSet(horizon=dataset.horizon,
                                polytope=Polytope(H, h), lam=lam, reduced=False)


def reduce_fps(fps: FeasibleParameterSet,
               slack_tol: float = DEFAULT_SLACK_TOL,
               feas_tol: float = DEFAULT_FEAS_TOL) -> FeasibleParameterSet:
    """Redundancy-free FPS with the identical point set."""
    poly = remove_redundant_constraints(fps.polytope, slack_tol, feas_tol)
    return FeasibleParameterSet(horizon=fps.horizon, polytope=poly,
                                lam=fps.lam, reduced=True)


def precompute_support_constants(fps: FeasibleParameterSet, regressors,
                                 feas_tol: float = DEFAULT_FEAS_TOL) -> np.ndarray:
    """(max phi' theta, max -phi' theta) over the FPS for each regressor.

    Raises UnboundedDirection when the FPS is unbounded along a queried
    direction, meaning the data are not informative enough.
    """
    phi = np.atleast_2d(np.asarray(regressors, dtype=float))
    out = np.empty((phi.shape[0], 2))
    for i, row in enumerate(phi):
        out[i, 0] = support_value(fps.polytope, row, feas_tol)
        out[i, 1] = support_value(fps.polytope, -row, feas_tol)
    return out


def identify_min_global_bound_predictor(fps: FeasibleParameterSet,
                                        dataset: RegressorDataset,
                                        gamma_bar: float,
                                        feas_tol: float = DEFAULT_FEAS_TOL) -> GlobalPredictor:
    """Predictor minimizing the worst signed support gap over the dataset.

    Solves min zeta over theta in the FPS subject to
    c_k - phi_check_k' theta <= zeta for every signed regressor (+phi then
    -phi), where c_k is the FPS support value of phi_check_k.  The global
    bound is gamma_bar * zeta_star + lambda.
    """
    if gamma_bar <= 1.0:
        raise ValueError("gamma_bar must be > 1")
    if fps.horizon != dataset.horizon:
        raise ValueError("FPS and dataset horizons differ")
    signed = np.vstack([dataset.regressors, -dataset.regressors])
    consts = precompute_support_constants(fps, signed, feas_tol)[:, 0]
    H, h = fps.polytope.normals, fps.polytope.offsets
    n = fps.param_dim
    K = signed.shape[0]
    A = np.vstack([
        np.hstack([H, np.zeros((H.shape[0], 1))]),
        np.hstack([-signed, -np.ones((K, 1))]),
    ])
    b = np.concatenate([h, -consts])
    c = np.concatenate([np.zeros(n), [1.0]])
    out = solve_lp(LinearProgram(c, A, b), feas_tol)
    if out.status != OPTIMAL:
        raise SolverFailure(f"min-max predictor LP ended with status {out.status}")
    theta_hat = out.optimizer[:n].copy()
    zeta_star = max(0.0, float(out.optimizer[n]))
    return GlobalPredictor(horizon=fps.horizon, theta_hat=theta_hat,
                           tau_bar=gamma_bar * zeta_star + fps.lam.lam,
                           gamma_bar=gamma_bar, zeta_star=zeta_star)


@dataclass
class HorizonArtifacts:
    """Everything identified for one horizon p."""

    lam: ErrorBoundLambda
    fps: FeasibleParameterSet
    predictor: GlobalPredictor | None = None


@dataclass
class IdentificationBundle:
    """Persisted result of one offline identification run."""

    order: int
    input_dim: int
    p_bar: int
    alpha: float
    gamma: float
    gamma_bar: float
    d_bar: float
    horizons: dict[int, HorizonArtifacts]

    def fps_bank(self, p_bar: int | None = None) -> list[FeasibleParameterSet]:
        p_bar = p_bar or self.p_bar
        return [self.horizons[p].fps for p in range(1, p_bar + 1)]

    def predictor_bank(self, p_bar: int | None = None) -> list[GlobalPredictor]:
        p_bar = p_bar or self.p_bar
        preds = [self.horizons[p].predictor for p in range(1, p_bar + 1)]
        if any(pr is None for pr in preds):
            raise ValueError("bundle has no global predictors for some horizons")
        return preds


def save_bundle(bundle: IdentificationBundle, path) -> None:
    doc = {
        "version": BUNDLE_VERSION,
        "order": bundle.order,
        "input_dim": bundle.input_dim,
        "p_bar": bundle.p_bar,
        "alpha": bundle.alpha,
        "gamma": bundle.gamma,
        "gamma_bar": bundle.gamma_bar,
        "d_bar": bundle.d_bar,
        "horizons": [],
    }
    for p in sorted(bundle.horizons):
        art = bundle.horizons[p]
        entry = {
            "p": p,
            "lambda": art.lam.lam,
            "lambda_lp_optimum": art.lam.lp_optimum,
            "fps_normals": art.fps.polytope.normals.tolist(),
            "fps_offsets": art.fps.polytope.offsets.tolist(),
            "fps_reduced": art.fps.reduced,
        }
        if art.predictor is not None:
            entry["theta_hat"] = art.predictor.theta_hat.tolist()
            entry["tau_bar"] = art.predictor.tau_bar
            entry["zeta_star"] = art.predictor.zeta_star
        doc["horizons"].append(entry)
    with open(path, "w") as f:
        json.dump(doc, f)


def load_bundle(path) -> IdentificationBundle:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version: {doc.get('version')}")
    horizons: dict[int, HorizonArtifacts] = {}
    for entry in doc["horizons"]:
        p = entry["p"]
        lam = ErrorBoundLambda(horizon=p, lam=entry["lambda"], alpha=doc["alpha"],
                               d_bar=doc["d_bar"],
                               lp_optimum=entry["lambda_lp_optimum"])
        fps = FeasibleParameterSet(
            horizon=p,
            polytope=Polytope(np.array(entry["fps_normals"]),
                              np.array(entry["fps_offsets"])),
            lam=lam, reduced=entry["fps_reduced"])
        predictor = None
        if "theta_hat" in entry:
            predictor = GlobalPredictor(horizon=p,
                                        theta_hat=np.array(entry["theta_hat"]),
                                        tau_bar=entry["tau_bar"],
                                        gamma_bar=doc["gamma_bar"],
                                        zeta_star=entry["zeta_star"])
        horizons[p] = HorizonArtifacts(lam=lam, fps=fps, predictor=predictor)
    return IdentificationBundle(order=doc["order"], input_dim=doc["input_dim"],
                                p_bar=doc["p_bar"], alpha=doc["alpha"],
                                gamma=doc["gamma"], gamma_bar=doc["gamma_bar"],
                                d_bar=doc["d_bar"], horizons=horizons)
