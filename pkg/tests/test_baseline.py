"""Steady-state Kalman baseline and accuracy metric helpers."""

import numpy as np
import pytest

from smfilter.baseline import (
    FilterMetrics,
    StateSpaceModel,
    compute_metrics,
    dare_steady_gain,
    kf_step,
    riccati_fixed_point,
    run_kf,
)
from smfilter.simharness import benchmark_plant, zoh_state_space


def scalar_model(a=0.0, q=1.0, r=1.0):
    return StateSpaceModel(Ad=np.array([[a]]), Bd=np.array([[1.0]]),
                           Cd=np.array([[1.0]]),
                           process_cov=np.array([[q]]),
                           measurement_cov=r)


def test_scalar_dare_closed_form():
    # Ad = 0: P = q exactly, K = q / (q + r)
    q, r = 0.7, 0.3
    model = scalar_model(a=0.0, q=q, r=r)
    P = riccati_fixed_point(model)
    assert P[0, 0] == pytest.approx(q, abs=1e-10)
    K = dare_steady_gain(model)
    assert K[0] == pytest.approx(q / (q + r), abs=1e-10)


def test_scalar_dare_nonzero_a_closed_form():
    # stationary point of p = a^2 p r / (p + r) + q, solved by the quadratic
    a, q, r = 0.8, 0.5, 0.2
    model = scalar_model(a=a, q=q, r=r)
    # p^2 + (r - a^2 r - q) p - q r = 0, positive root
    bq = r - a * a * r - q
    p_star = (-bq + np.sqrt(bq * bq + 4 * q * r)) / 2.0
    P = riccati_fixed_point(model)
    assert P[0, 0] == pytest.approx(p_star, abs=1e-9)


def test_zero_process_noise_gain_vanishes():
    model = scalar_model(a=0.5, q=1e-14, r=1.0)
    K = dare_steady_gain(model)
    assert abs(K[0]) < 1e-6


def test_benchmark_dare_plug_back_residual():
    Ad, Bd = zoh_state_space(benchmark_plant(), 0.1)
    C = benchmark_plant().C
    Q = 1e-3 * (Bd @ Bd.T) + 1e-8 * np.eye(3)
    R = 0.01
    model = StateSpaceModel(Ad=Ad, Bd=Bd, Cd=C, process_cov=Q,
                            measurement_cov=R)
    P = riccati_fixed_point(model)
    S = (C @ P @ C.T).item() + R
    resid = Ad @ (P - (P @ C.T) @ (C @ P) / S) @ Ad.T + Q - P
    assert np.max(np.abs(resid)) <= 1e-10
    # P must be symmetric positive semidefinite
    assert np.allclose(P, P.T)
    assert np.min(np.linalg.eigvalsh(P)) >= -1e-12


def test_exact_model_kf_tracks_noise_free_output():
    # with no noise the innovations vanish asymptotically and the KF output
    # estimate converges to the true output
    Ad, Bd = zoh_state_space(benchmark_plant(), 0.1)
    C = benchmark_plant().C
    model = StateSpaceModel(Ad=Ad, Bd=Bd, Cd=C,
                            process_cov=1e-8 * np.eye(3),
                            measurement_cov=1e-2)
    gain = dare_steady_gain(model)
    rng = np.random.default_rng(2)
    u = rng.choice([-1.0, 0.0, 1.0], size=400)
    x = np.zeros(3)
    z = np.empty(400)
    for k in range(400):
        zk = (C @ x).item()
        z[k] = zk
        x = Ad @ x + Bd @ np.array([u[k]])
    est = run_kf(model, gain, u, z)
    assert np.max(np.abs(est[50:] - z[50:])) < 1e-6


def test_kf_step_state_dimension_check():
    model = scalar_model()
    with pytest.raises(ValueError):
        kf_step(np.zeros(2), np.array([0.5]), model, 0.0, 1.0)


def test_model_validation():
    with pytest.raises(ValueError):
        StateSpaceModel(Ad=np.eye(2), Bd=np.ones((2, 1)), Cd=np.ones((1, 2)),
                        process_cov=-np.eye(2), measurement_cov=1.0)


def test_metrics_trivial_values():
    z = np.array([1.0, 2.0, 3.0])
    zh = np.array([1.0, 2.5, 2.0])
    m = compute_metrics(z, zh)
    assert m.rmse == pytest.approx(np.sqrt((0 + 0.25 + 1.0) / 3))
    assert m.max_error == pytest.approx(1.0)
    assert m.avg_bound is None
    m2 = compute_metrics(z, zh, bounds=np.array([0.1, 0.4, 2.0]))
    assert m2.avg_bound == pytest.approx(np.mean([0.1, 0.4, 2.0]))
    assert m2.max_bound == pytest.approx(2.0)
    assert m2.containment_rate == pytest.approx(2.0 / 3.0)  # 0.5 > 0.4
    with pytest.raises(ValueError):
        compute_metrics(z, zh[:2])
