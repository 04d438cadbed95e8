"""Interval computation, intersection and the streaming filter."""

import numpy as np
import pytest

from smfilter.filtering import (
    EmptyIntersection,
    GlobalPredictorBank,
    OutputInterval,
    StreamFilter,
    global_filter_step,
    intersect_intervals,
    local_filter_step,
    local_interval_bounds,
)
from smfilter.identify import (
    ErrorBoundLambda,
    FeasibleParameterSet,
    GlobalPredictor,
    assemble_regressors,
    build_fps,
    estimate_lambda,
    identify_min_global_bound_predictor,
    reduce_fps,
)
from smfilter.lpcore import Polytope, support_value
from smfilter.simharness import (
    NoiseSpec,
    benchmark_plant,
    generate_three_level_input,
    simulate_arx,
    zoh_discretize,
)


def box_fps(lo, hi, lam_value=0.1, d_bar=0.05, horizon=1):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    H = np.vstack([np.eye(n), -np.eye(n)])
    h = np.concatenate([hi, -lo])
    lam = ErrorBoundLambda(horizon=horizon, lam=lam_value, alpha=1.2, d_bar=d_bar)
    return FeasibleParameterSet(horizon=horizon, polytope=Polytope(H, h), lam=lam)


def test_interval_point_fps():
    # FPS collapsed (numerically) to a point: both stages are exact and the
    # interval is phi' theta0 +/- lambda regardless of gamma
    theta0 = np.array([0.7, -0.4])
    eps = 1e-10
    fps = box_fps(theta0 - eps, theta0 + eps, lam_value=0.25)
    phi = np.array([2.0, 1.0])
    lo, hi = local_interval_bounds(fps, phi, gamma=1.1)
    c = float(phi @ theta0)
    assert lo == pytest.approx(c - 0.25, abs=1e-6)
    assert hi == pytest.approx(c + 0.25, abs=1e-6)


def test_interval_zero_regressor():
    fps = box_fps([-1.0, -1.0], [1.0, 1.0], lam_value=0.3)
    lo, hi = local_interval_bounds(fps, np.zeros(2), gamma=1.1)
    assert lo == pytest.approx(-0.3, abs=1e-9)
    assert hi == pytest.approx(0.3, abs=1e-9)


def test_interval_matches_grid_oracle():
    # with s = phi' theta ranging over [-c2, c1], the two-stage optimum is
    # min over s of -/+ s + gamma * max(c1 - s, c2 + s); grid search over s
    # is an independent oracle
    rng = np.random.default_rng(8)
    H = rng.normal(size=(30, 3))
    h = H @ np.array([0.2, -0.1, 0.4]) + rng.uniform(0.1, 1.0, size=30)
    lam = ErrorBoundLambda(horizon=1, lam=0.15, alpha=1.2, d_bar=0.1)
    fps = FeasibleParameterSet(horizon=1, polytope=Polytope(H, h), lam=lam)
    gamma = 1.1
    for _ in range(5):
        phi = rng.normal(size=3)
        c1 = support_value(fps.polytope, phi, cached=False)
        c2 = support_value(fps.polytope, -phi, cached=False)
        s = np.linspace(-c2, c1, 2000001)
        tau = gamma * np.maximum(c1 - s, c2 + s)
        hi_oracle = float(np.min(s + tau)) + lam.lam
        lo_oracle = -float(np.min(-s + tau)) - lam.lam
        lo, hi = local_interval_bounds(fps, phi, gamma)
        assert hi == pytest.approx(hi_oracle, abs=1e-5)
        assert lo == pytest.approx(lo_oracle, abs=1e-5)


def test_interval_closed_form():
    # the same two LPs have the closed-form solution
    # (c1 - c2)/2 +/- (gamma (c1 + c2)/2 + lambda)
    rng = np.random.default_rng(21)
    H = rng.normal(size=(25, 2))
    h = H @ np.array([0.5, 0.5]) + rng.uniform(0.2, 1.0, size=25)
    lam = ErrorBoundLambda(horizon=1, lam=0.2, alpha=1.2, d_bar=0.1)
    fps = FeasibleParameterSet(horizon=1, polytope=Polytope(H, h), lam=lam)
    for gamma in (1.05, 1.1, 1.5):
        phi = rng.normal(size=2)
        c1 = support_value(fps.polytope, phi, cached=False)
        c2 = support_value(fps.polytope, -phi, cached=False)
        mid = (c1 - c2) / 2.0
        half = gamma * (c1 + c2) / 2.0 + lam.lam
        lo, hi = local_interval_bounds(fps, phi, gamma)
        assert hi == pytest.approx(mid + half, abs=1e-7)
        assert lo == pytest.approx(mid - half, abs=1e-7)


def test_intersect_intervals():
    got = intersect_intervals([(-1.0, 2.0), (-0.5, 3.0), (-2.0, 1.5)])
    assert (got.lower, got.upper) == (-0.5, 1.5)
    assert got.center == pytest.approx(0.5)
    assert got.half_width == pytest.approx(1.0)
    with pytest.raises(EmptyIntersection) as exc:
        intersect_intervals([(0.0, 1.0), (2.0, 3.0)])
    assert exc.value.lower_horizon == 2
    assert exc.value.upper_horizon == 1
    with pytest.raises(ValueError):
        intersect_intervals([])


def test_gamma_must_exceed_one():
    fps = box_fps([-1.0], [1.0])
    with pytest.raises(ValueError):
        local_interval_bounds(fps, np.array([1.0]), gamma=1.0)


@pytest.fixture(scope="module")
def small_setup():
    model = zoh_discretize(benchmark_plant(), 0.1)
    u = generate_three_level_input(900, 4, seed=1)
    data = simulate_arx(model, u, noise=NoiseSpec(kind="uniform", d_bar=0.2, seed=1))
    banks = {}
    p_bar = 3
    fps_bank, pred_bank = [], []
    for p in range(1, p_bar + 1):
        ds = assemble_regressors(data, order=3, horizon=p)
        lam = estimate_lambda(ds, d_bar=0.2, alpha=1.2)
        fps = reduce_fps(build_fps(ds, lam))
        fps_bank.append(fps)
        pred_bank.append(identify_min_global_bound_predictor(fps, ds, gamma_bar=1.1))
    banks["fps"] = fps_bank
    banks["pred"] = GlobalPredictorBank(predictors=tuple(pred_bank), order=3,
                                        input_dim=1)
    banks["data"] = data
    return banks


def test_local_step_contains_truth_and_shrinks_with_horizons(small_setup):
    data = small_setup["data"]
    y, u = data.measured_outputs, data.inputs
    for k in range(500, 540):
        rep3 = local_filter_step(small_setup["fps"], y, u, k, gamma=1.1)
        rep1 = local_filter_step(small_setup["fps"][:1], y, u, k, gamma=1.1)
        z = data.true_outputs[k]
        assert rep3.interval.lower - 1e-9 <= z <= rep3.interval.upper + 1e-9
        # intersecting more horizons can only tighten the interval
        assert rep3.interval.lower >= rep1.interval.lower - 1e-9
        assert rep3.interval.upper <= rep1.interval.upper + 1e-9
        assert rep3.bound <= rep1.bound + 1e-9


def test_global_step_contains_truth_and_is_wider(small_setup):
    data = small_setup["data"]
    y, u = data.measured_outputs, data.inputs
    from smfilter.lpcore import reset_solve_calls, solve_calls
    reset_solve_calls()
    for k in range(500, 540):
        rep = global_filter_step(small_setup["pred"], y, u, k)
        z = data.true_outputs[k]
        assert rep.interval.lower - 1e-9 <= z <= rep.interval.upper + 1e-9
        loc = local_filter_step(small_setup["fps"], y, u, k, gamma=1.1)
        assert rep.bound >= loc.bound - 1e-9
    # the global pass itself performs no LP solves (the local calls do)
    assert solve_calls() > 0


def test_global_step_zero_lp_solves(small_setup):
    data = small_setup["data"]
    y, u = data.measured_outputs, data.inputs
    from smfilter.lpcore import reset_solve_calls, solve_calls
    # warm nothing: global filtering never touches the LP layer
    reset_solve_calls()
    for k in range(600, 650):
        global_filter_step(small_setup["pred"], y, u, k)
    assert solve_calls() == 0


def test_stream_filter_matches_batch(small_setup):
    data = small_setup["data"]
    y, u = data.measured_outputs, data.inputs
    stream = StreamFilter(predictor_bank=small_setup["pred"])
    reports = []
    for k in range(60):
        rep = stream.feed(u[k], y[k])
        if rep is not None:
            reports.append(rep)
    depth = small_setup["pred"].p_bar + 3 - 1
    assert reports[0].time_index == depth
    for rep in reports:
        batch = global_filter_step(small_setup["pred"], y, u, rep.time_index)
        assert rep.estimate == pytest.approx(batch.estimate, abs=1e-12)
        assert rep.bound == pytest.approx(batch.bound, abs=1e-12)


def test_history_validation(small_setup):
    data = small_setup["data"]
    y, u = data.measured_outputs, data.inputs
    with pytest.raises(ValueError):
        local_filter_step(small_setup["fps"], y, u, 2, gamma=1.1)
    with pytest.raises(ValueError):
        global_filter_step(small_setup["pred"], y, u, len(y))


def test_empty_intersection_clip_mode():
    # two inconsistent point FPSs force an empty intersection
    fps1 = box_fps([1.0, 0.0], [1.0, 0.0], lam_value=0.01, horizon=1)
    # horizon-2 FPS over the matching parameter dimension o + (o + 1) = 3
    lam2 = ErrorBoundLambda(horizon=2, lam=0.01, alpha=1.2, d_bar=0.05)
    H = np.vstack([np.eye(3), -np.eye(3)])
    t2 = np.array([-1.0, 0.0, 0.0])
    fps2 = FeasibleParameterSet(horizon=2, polytope=Polytope(H, np.concatenate([t2, -t2])),
                                lam=lam2)
    y = np.ones(6)
    u = np.zeros((6, 1))
    with pytest.raises(EmptyIntersection):
        local_filter_step([fps1, fps2], y, u, 5, gamma=1.1)
    rep = local_filter_step([fps1, fps2], y, u, 5, gamma=1.1, on_empty="clip")
    assert rep.clipped
    assert rep.interval.half_width == 0.0
