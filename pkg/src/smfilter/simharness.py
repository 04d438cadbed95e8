"""Benchmark data generation and experiment I/O.

Discretizes a continuous-time plant under zero-order hold, converts it to
an ARX parameter vector, simulates the ARX recursion under a piecewise
constant three-level excitation, and corrupts the measurements according
to one of three noise scenarios (uniform measurement noise, Gaussian
measurement noise, Gaussian process + measurement noise).  Experiment
records can be exported/imported as CSV for external data.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

UNIFORM = "uniform"
GAUSSIAN = "gaussian"
GAUSSIAN_IO = "gaussian-io"
NOISE_KINDS = (UNIFORM, GAUSSIAN, GAUSSIAN_IO)


@dataclass(frozen=True)
class ContinuousStateSpace:
    """Continuous-time LTI system dx/dt = Ax + Bu, y = Cx + Du."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        if B.shape[0] != n:
            raise ValueError("B row count must match A")
        if C.shape != (1, n):
            raise ValueError("C must be 1 x n (single output)")
        if D.shape != (1, B.shape[1]):
            raise ValueError("D must be 1 x m")
        for name, M in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, M)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


def benchmark_plant() -> ContinuousStateSpace:
    """Third-order SISO test plant, G(s) = 160 / ((s+10)(s^2+0.8s+16)).

    Controllable canonical form; denominator s^3 + 10.8 s^2 + 24 s + 160.
    """
    A = np.array([[0.0, 1.0, 0.0],
                  [0.0, 0.0, 1.0],
                  [-160.0, -24.0, -10.8]])
    B = np.array([[0.0], [0.0], [1.0]])
    C = np.array([[160.0, 0.0, 0.0]])
    D = np.array([[0.0]])
    return ContinuousStateSpace(A, B, C, D)


@dataclass(frozen=True)
class DiscreteArxModel:
    """ARX recursion z(k+1) = [z-lags, u-lags]' params of order o.

    params holds the o output-lag coefficients first (multiplying
    z(k) ... z(k-o+1)), then m coefficients per input lag for
    u(k) ... u(k-o+1).
    """

    order: int
    input_dim: int
    params: np.ndarray
    sample_time: float

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.params, dtype=float))
        o, m = self.order, self.input_dim
        if theta.shape[0] != o + m * o:
            raise ValueError(f"params length must be o + m*o = {o + m * o}")
        object.__setattr__(self, "params", theta)
        # char poly z^o - a1 z^(o-1) - ... - ao; warn if any root leaves the unit disc
        a = theta[:o]
        roots = np.roots(np.concatenate([[1.0], -a]))
        if roots.size and np.max(np.abs(roots)) >= 1.0:
            warnings.warn("ARX output-lag polynomial has a root outside the unit circle",
                          stacklevel=2)

    @property
    def output_coeffs(self) -> np.ndarray:
        return self.params[: self.order]

    @property
    def input_coeffs(self) -> np.ndarray:
        return self.params[self.order:]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise scenario: kind, declared identification bound and std devs."""

    kind: str
    d_bar: float
    sigma_d: float = 0.0
    sigma_w: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"kind must be one of {NOISE_KINDS}")
        if self.d_bar <= 0.0:
            raise ValueError("d_bar must be positive")
        if self.sigma_d < 0.0 or self.sigma_w < 0.0:
            raise ValueError("sigma values must be nonnegative")


@dataclass
class ExperimentData:
    """Input, true output and measured output sequences of equal length."""

    inputs: np.ndarray          # (T, m)
    true_outputs: np.ndarray    # (T,)
    measured_outputs: np.ndarray
    sample_time: float = 1.0

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        z = np.atleast_1d(np.asarray(self.true_outputs, dtype=float))
        y = np.atleast_1d(np.asarray(self.measured_outputs, dtype=float))
        if not (u.shape[0] == z.shape[0] == y.shape[0]):
            raise ValueError("inputs, true_outputs, measured_outputs must have equal length")
        self.inputs, self.true_outputs, self.measured_outputs = u, z, y

    def __len__(self) -> int:
        return self.true_outputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]


def zoh_state_space(sys: ContinuousStateSpace, Ts: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization via the augmented matrix exponential."""
    if Ts <= 0.0:
        raise ValueError("Ts must be positive")
    n, m = sys.n_states, sys.n_inputs
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = sys.A
    aug[:n, n:] = sys.B
    M = expm(aug * Ts)
    if not np.all(np.isfinite(M)):
        raise ArithmeticError("matrix exponential did not converge to finite values")
    return M[:n, :n], M[:n, n:]


def zoh_discretize(sys: ContinuousStateSpace, Ts: float) -> DiscreteArxModel:
    """ZOH-discretize and convert to an ARX parameter vector of order n.

    The discrete transfer function per input is C adj(zI - Ad) Bd / det(zI - Ad);
    its coefficients give the ARX output and input lags directly.  Requires a
    strictly proper plant (D = 0): direct feedthrough has no ARX slot.
    """
    if np.any(sys.D != 0.0):
        raise ValueError("zoh_discretize requires D = 0 (strictly proper plant)")
    Ad, Bd = zoh_state_space(sys, Ts)
    n, m = sys.n_states, sys.n_inputs
    den = np.poly(Ad)                       # monic, length n+1
    a = -den[1:]                            # output-lag coefficients
    b = np.empty((n, m))
    for j in range(m):
        # numerator of output w.r.t. input j: det(zI - Ad + Bd_j C) - det(zI - Ad)
        num = np.poly(Ad - np.outer(Bd[:, j], sys.C[0])) - den
        b[:, j] = num[1:]
    return DiscreteArxModel(order=n, input_dim=m,
                            params=np.concatenate([a, b.reshape(-1)]),
                            sample_time=Ts)


def generate_three_level_input(length: int, hold: int,
                               levels=(-1.0, 0.0, 1.0), seed: int = 0) -> np.ndarray:
    """Piecewise-constant excitation: a fresh level drawn every `hold` samples."""
    if length <= 0:
        raise ValueError("length must be positive")
    if hold < 1:
        raise ValueError("hold must be >= 1")
    levels = np.asarray(list(levels), dtype=float)
    if levels.size == 0:
        raise ValueError("levels must be nonempty")
    rng = np.random.default_rng(seed)
    n_draws = -(-length // hold)
    draws = rng.choice(levels, size=n_draws)
    return np.repeat(draws, hold)[:length]


def simulate_arx(model: DiscreteArxModel, inputs,
                 initial_regressor=None,
                 noise: NoiseSpec | None = None) -> ExperimentData:
    """Run the ARX recursion and apply the noise scenario.

    `initial_regressor` is the pre-history regressor [z(-1)..z(-o),
    u(-1)..u(-o) flattened] that produces z(0); defaults to zeros.  For the
    Gaussian process-noise scenario the recursion consumes u(k) + w(k) but
    the stored input sequence remains the measured u(k).
    """
    o, m = model.order, model.input_dim
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[1] != m:
        raise ValueError(f"inputs must have {m} columns")
    T = u.shape[0]
    if T < o:
        raise ValueError("need at least `order` input samples")

    if initial_regressor is None:
        initial_regressor = np.zeros(o + m * o)
    phi0 = np.asarray(initial_regressor, dtype=float)
    if phi0.shape != (o + m * o,):
        raise ValueError(f"initial_regressor must have length o + m*o = {o + m * o}")

    rng = np.random.default_rng(noise.seed) if noise is not None else None
    u_sim = u
    if noise is not None and noise.kind == GAUSSIAN_IO:
        u_sim = u + rng.normal(0.0, noise.sigma_w, size=u.shape)

    a = model.output_coeffs
    bmat = model.input_coeffs.reshape(o, m)
    zlags = phi0[:o].copy()                    # z(-1) .. z(-o)
    ulags = phi0[o:].reshape(o, m).copy()      # u(-1) .. u(-o)
    z = np.empty(T)
    for k in range(T):
        zk = a @ zlags + np.sum(bmat * ulags)
        if not np.isfinite(zk):
            raise ArithmeticError(f"ARX recursion diverged at index {k}")
        z[k] = zk
        zlags[1:] = zlags[:-1]
        zlags[0] = zk
        ulags[1:] = ulags[:-1]
        ulags[0] = u_sim[k]

    if noise is None:
        d = np.zeros(T)
    elif noise.kind == UNIFORM:
        d = rng.uniform(-noise.d_bar, noise.d_bar, size=T)
    else:
        d = rng.normal(0.0, noise.sigma_d, size=T)
    return ExperimentData(inputs=u, true_outputs=z, measured_outputs=z + d,
                          sample_time=model.sample_time)


def save_csv(data: ExperimentData, path, header_comment: str | None = None) -> None:
    """Write `k, u_1..u_m, z, y` with 17-significant-digit floats."""
    m = data.input_dim
    with open(path, "w", newline="") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        w = csv.writer(f)
        w.writerow(["k"] + [f"u_{j + 1}" for j in range(m)] + ["z", "y"])
        for k in range(len(data)):
            row = [str(k)]
            row += [f"{v:.17g}" for v in data.inputs[k]]
            row += [f"{data.true_outputs[k]:.17g}", f"{data.measured_outputs[k]:.17g}"]
            w.writerow(row)


def load_csv(path, sample_time: float = 1.0) -> ExperimentData:
    """Read an experiment CSV written by save_csv (comment lines allowed)."""
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"no data rows in {path}")
    header = rows[0]
    if header[0] != "k" or header[-2:] != ["z", "y"]:
        raise ValueError(f"unexpected CSV header in {path}: {header}")
    m = len(header) - 3
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    return ExperimentData(inputs=body[:, 1:1 + m], true_outputs=body[:, 1 + m],
                          measured_outputs=body[:, 2 + m], sample_time=sample_time)
