"""End-to-end orchestration: data generation, identification, filtering.

A RunConfig (flat key=value file or keyword arguments) drives the whole
experiment: generate or load data, identify the per-horizon bounds /
feasible sets / predictors on the identification split, persist the
bundle, stream the validation split through the selected filters, and
emit metrics tables, per-sample CSVs, plot data and timing statistics.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, field, replace
from pathlib import Path

import numpy as np

from . import baseline, filtering, identify, lpcore, simharness


class ConfigError(Exception):
    """Bad or inconsistent run configuration."""


SCENARIOS = ("a", "b", "c")
MODES = ("local", "global", "both", "kf-baseline")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "a"          # a | b | c | csv
    csv_path: str = ""
    seed: int = 1
    n_samples: int = 12000
    sample_time: float = 0.1
    hold: int = 4
    order: int = 3
    p_bar: int = 7
    alpha: float = 1.2
    gamma: float = 1.1
    gamma_bar: float = 1.1
    d_bar: float = 0.0           # 0 = scenario default (0.2 uniform, 3*sigma_d Gaussian)
    sigma_d: float = 0.1
    sigma_w: float = 0.0316227766016838    # sqrt(0.001)
    split: float = 0.5
    mode: str = "both"
    outdir: str = "out"
    feas_tol: float = 1e-9
    slack_tol: float = 1e-9
    workers: int = 1
    on_empty: str = "error"
    max_eval_samples: int = 0    # 0 = full validation split

    def __post_init__(self):
        if self.scenario not in SCENARIOS + ("csv",):
            raise ConfigError(f"scenario must be one of {SCENARIOS + ('csv',)}")
        if self.scenario == "csv" and not self.csv_path:
            raise ConfigError("scenario 'csv' requires csv_path")
        if self.p_bar < 1:
            raise ConfigError("p_bar must be >= 1")
        if not (0.0 < self.split < 1.0):
            raise ConfigError("split must be in (0, 1)")
        for name in ("alpha", "gamma", "gamma_bar"):
            if getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be > 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.on_empty not in ("error", "clip"):
            raise ConfigError("on_empty must be 'error' or 'clip'")

    @property
    def effective_d_bar(self) -> float:
        if self.d_bar > 0.0:
            return self.d_bar
        if self.scenario == "a":
            return 0.2
        return 3.0 * self.sigma_d

    def config_hash(self) -> str:
        doc = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()[:16]


_CONFIG_TYPES = {f.name: f.type for f in RunConfig.__dataclass_fields__.values()}


def parse_config_file(path) -> RunConfig:
    """Flat `key = value` file; '#' comments; unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in RunConfig.__dataclass_fields__:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, val)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _coerce(key: str, val: str):
    kind = _CONFIG_TYPES[key]
    if kind == "int":
        return int(val)
    if kind == "float":
        return float(val)
    return val


def noise_spec(cfg: RunConfig) -> simharness.NoiseSpec:
    kind = {"a": simharness.UNIFORM, "b": simharness.GAUSSIAN,
            "c": simharness.GAUSSIAN_IO}[cfg.scenario]
    return simharness.NoiseSpec(kind=kind, d_bar=cfg.effective_d_bar,
                                sigma_d=cfg.sigma_d if cfg.scenario != "a" else 0.0,
                                sigma_w=cfg.sigma_w if cfg.scenario == "c" else 0.0,
                                seed=cfg.seed)


def benchmark_model(cfg: RunConfig) -> simharness.DiscreteArxModel:
    return simharness.zoh_discretize(simharness.benchmark_plant(), cfg.sample_time)


def generate_data(cfg: RunConfig) -> simharness.ExperimentData:
    """Benchmark experiment for the configured scenario, or CSV load."""
    if cfg.scenario == "csv":
        return simharness.load_csv(cfg.csv_path, cfg.sample_time)
    model = benchmark_model(cfg)
    u = simharness.generate_three_level_input(cfg.n_samples, cfg.hold,
                                              seed=cfg.seed)
    return simharness.simulate_arx(model, u, noise=noise_spec(cfg))


def split_data(cfg: RunConfig, data: simharness.ExperimentData):
    cut = int(len(data) * cfg.split)
    ident = simharness.ExperimentData(data.inputs[:cut], data.true_outputs[:cut],
                                      data.measured_outputs[:cut], data.sample_time)
    valid = simharness.ExperimentData(data.inputs[cut:], data.true_outputs[cut:],
                                      data.measured_outputs[cut:], data.sample_time)
    return ident, valid


def identify_horizon(ident_data, order, p, p_bar, d_bar, alpha, gamma_bar,
                     feas_tol, slack_tol,
                     with_predictor: bool) -> identify.HorizonArtifacts:
    """Full offline pipeline for one horizon (truncated to a common N)."""
    dataset = identify.assemble_regressors(ident_data, order, p)
    n_common = len(ident_data) - (p_bar + order - 1)
    dataset = dataset.truncated(n_common)
    lam = identify.estimate_lambda(dataset, d_bar, alpha, feas_tol)
    fps = identify.build_fps(dataset, lam)
    reduced = identify.reduce_fps(fps, slack_tol, feas_tol)
    predictor = None
    if with_predictor:
        predictor = identify.identify_min_global_bound_predictor(
            reduced, dataset, gamma_bar, feas_tol)
    return identify.HorizonArtifacts(lam=lam, fps=reduced, predictor=predictor)


def _identify_job(args):
    (ident_data, order, p, p_bar, d_bar, alpha, gamma_bar,
     feas_tol, slack_tol, with_pred) = args
    try:
        art = identify_horizon(ident_data, order, p, p_bar, d_bar, alpha,
                               gamma_bar, feas_tol, slack_tol, with_pred)
    except lpcore.UnboundedDirection as exc:
        raise lpcore.UnboundedDirection(
            f"FPS for horizon {p} is unbounded: the data are not informative "
            "enough; new data should be acquired") from exc
    return p, art


def run_identification(cfg: RunConfig,
                       data: simharness.ExperimentData | None = None,
                       log=None) -> identify.IdentificationBundle:
    """Procedure step 1: identify all horizons and persist the bundle."""
    if data is None:
        data = generate_data(cfg)
    ident_data, _ = split_data(cfg, data)
    min_len = cfg.p_bar + cfg.order + 1
    if len(ident_data) < min_len:
        raise ConfigError(f"identification split too short (< {min_len} samples)")
    with_pred = cfg.mode in ("global", "both")
    d_bar = cfg.effective_d_bar

    jobs = [(ident_data, cfg.order, p, cfg.p_bar, d_bar, cfg.alpha,
             cfg.gamma_bar, cfg.feas_tol, cfg.slack_tol, with_pred)
            for p in range(1, cfg.p_bar + 1)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_identify_job, jobs))
    else:
        results = [_identify_job(job) for job in jobs]
    horizons = dict(results)
    if log:
        full_rows = 2 * (len(ident_data) - (cfg.p_bar + cfg.order - 1))
        for p in sorted(horizons):
            art = horizons[p]
            log(f"p={p}: lambda={art.lam.lam:.6g}, FPS rows "
                f"{full_rows} -> {art.fps.polytope.n_rows}"
                + (f", tau_bar={art.predictor.tau_bar:.6g}" if art.predictor else ""))
    m = ident_data.input_dim
    return identify.IdentificationBundle(order=cfg.order, input_dim=m,
                                         p_bar=cfg.p_bar, alpha=cfg.alpha,
                                         gamma=cfg.gamma, gamma_bar=cfg.gamma_bar,
                                         d_bar=d_bar, horizons=horizons)


def _predictor_bank(bundle, cfg, p_bar=None):
    return filtering.GlobalPredictorBank(
        predictors=tuple(bundle.predictor_bank(p_bar or cfg.p_bar)),
        order=bundle.order, input_dim=bundle.input_dim)


@dataclass
class FilterRun:
    """Per-sample outputs of one filtering pass over the validation split."""

    mode: str
    indices: np.ndarray
    estimates: np.ndarray
    bounds: np.ndarray
    lowers: np.ndarray
    uppers: np.ndarray
    step_times: np.ndarray
    lp_solves: int
    reports: list = field(default_factory=list)


def run_filter_pass(bundle, cfg: RunConfig, valid: simharness.ExperimentData,
                    mode: str, keep_reports: bool = False) -> FilterRun:
    """Stream the validation split through one filter variant."""
    y, u = valid.measured_outputs, valid.inputs
    start = bundle.p_bar + bundle.order - 1
    stop = len(valid)
    if cfg.max_eval_samples > 0:
        stop = min(stop, start + cfg.max_eval_samples)
    indices = np.arange(start, stop)
    if indices.size == 0:
        raise ConfigError("validation split too short for the configured p_bar")

    fps_bank = bundle.fps_bank(cfg.p_bar) if mode == "local" else None
    pred_bank = _predictor_bank(bundle, cfg) if mode == "global" else None

    est = np.empty(indices.size)
    bnd = np.empty(indices.size)
    lo = np.empty(indices.size)
    hi = np.empty(indices.size)
    times = np.empty(indices.size)
    reports = []
    lp_before = lpcore.solve_calls()
    for i, k in enumerate(indices):
        t0 = time.perf_counter()
        if mode == "local":
            rep = filtering.local_filter_step(fps_bank, y, u, int(k), cfg.gamma,
                                              cfg.feas_tol, cfg.on_empty)
        else:
            rep = filtering.global_filter_step(pred_bank, y, u, int(k),
                                               cfg.on_empty)
        times[i] = time.perf_counter() - t0
        est[i], bnd[i] = rep.estimate, rep.bound
        lo[i], hi[i] = rep.interval.lower, rep.interval.upper
        if keep_reports:
            reports.append(rep)
    return FilterRun(mode=mode, indices=indices, estimates=est, bounds=bnd,
                     lowers=lo, uppers=hi, step_times=times,
                     lp_solves=lpcore.solve_calls() - lp_before, reports=reports)


def kf_estimates(cfg: RunConfig, data: simharness.ExperimentData):
    """Exact-model steady-state KF run over the full record."""
    Ad, Bd = simharness.zoh_state_space(simharness.benchmark_plant(),
                                        cfg.sample_time)
    C = simharness.benchmark_plant().C
    if cfg.scenario == "c":
        Q = cfg.sigma_w ** 2 * (Bd @ Bd.T)
        R = cfg.sigma_d ** 2
    elif cfg.scenario == "b":
        Q = np.zeros_like(Ad)
        R = cfg.sigma_d ** 2
    else:
        Q = np.zeros_like(Ad)
        R = cfg.effective_d_bar ** 2 / 3.0
    # keep the DARE well-posed; must stay tiny relative to R/C scaling or the
    # regularization itself produces a gain that feeds noise into the state
    Q = Q + 1e-12 * np.eye(Ad.shape[0])
    model = baseline.StateSpaceModel(Ad=Ad, Bd=Bd, Cd=C, process_cov=Q,
                                     measurement_cov=R)
    gain = baseline.dare_steady_gain(model)
    return baseline.run_kf(model, gain, data.inputs, data.measured_outputs)


def run_filtering(cfg: RunConfig, bundle: identify.IdentificationBundle,
                  data: simharness.ExperimentData | None = None,
                  log=None) -> dict:
    """Procedure steps 2-3 plus reporting; returns the metrics document."""
    if bundle.p_bar < cfg.p_bar:
        raise ConfigError(f"bundle has p_bar={bundle.p_bar} < configured {cfg.p_bar}")
    if bundle.order != cfg.order or abs(bundle.d_bar - cfg.effective_d_bar) > 1e-12:
        raise ConfigError("bundle/config mismatch in order or d_bar")
    if data is None:
        data = generate_data(cfg)
    _, valid = split_data(cfg, data)
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    tag = cfg.config_hash()

    runs: dict[str, FilterRun] = {}
    if cfg.mode in ("local", "both"):
        runs["local"] = run_filter_pass(bundle, cfg, valid, "local")
    if cfg.mode in ("global", "both"):
        runs["global"] = run_filter_pass(bundle, cfg, valid, "global")

    metrics: dict = {"p_bar": cfg.p_bar, "config_hash": tag, "methods": {}}
    timing: dict = {}
    for mode, run in runs.items():
        z = valid.true_outputs[run.indices]
        m = baseline.compute_metrics(z, run.estimates, run.bounds)
        metrics["methods"][mode] = {
            "rmse": m.rmse, "max_error": m.max_error,
            "avg_bound": m.avg_bound, "max_bound": m.max_bound,
            "containment_rate": m.containment_rate,
        }
        timing[mode] = {
            "min_s": float(run.step_times.min()),
            "max_s": float(run.step_times.max()),
            "avg_s": float(run.step_times.mean()),
            "lp_solves": run.lp_solves,
        }
        _write_samples_csv(outdir / f"samples_{mode}.csv", run, tag)

    if cfg.scenario != "csv":
        kf = kf_estimates(cfg, data)
        offset = len(data) - len(valid)
        if runs:
            eval_idx = runs[next(iter(runs))].indices + offset
        else:
            eval_idx = np.arange(offset + cfg.p_bar + cfg.order - 1, len(data))
        mk = baseline.compute_metrics(data.true_outputs[eval_idx], kf[eval_idx])
        metrics["methods"]["kalman-exact"] = {"rmse": mk.rmse,
                                              "max_error": mk.max_error}

    if "global" in runs:
        bank = _predictor_bank(bundle, cfg)
        metrics["min_tau_bar"] = bank.min_tau_bar
        _write_plot_csv(outdir / "plot_tau_bar.csv", tag, ["p", "tau_bar"],
                        [(pred.horizon, pred.tau_bar) for pred in bank.predictors])

    for mode, run in runs.items():
        rows = zip(run.indices, valid.true_outputs[run.indices],
                   valid.measured_outputs[run.indices], run.estimates,
                   run.lowers, run.uppers)
        _write_plot_csv(outdir / f"plot_filtered_{mode}.csv", tag,
                        ["k", "z", "y", "z_hat", "z_min", "z_max"], rows)

    # per-horizon interval bars at a few validation instants (local diagnostics)
    if "local" in runs and runs["local"].indices.size:
        ks = runs["local"].indices[:: max(1, runs["local"].indices.size // 5)][:5]
        bars = []
        fps_bank = bundle.fps_bank(cfg.p_bar)
        for k in ks:
            rep = filtering.local_filter_step(fps_bank, valid.measured_outputs,
                                              valid.inputs, int(k), cfg.gamma,
                                              cfg.feas_tol, "clip")
            bars += [(int(k), p, lo, hi) for p, lo, hi in rep.per_horizon]
        _write_plot_csv(outdir / "plot_intervals.csv", tag,
                        ["k", "p", "zeta_min", "zeta_max"], bars)

    metrics["timing"] = timing
    with open(outdir / "metrics.json", "w") as f:
        json.dump(metrics, f, indent=2)
    if log:
        for mode, vals in metrics["methods"].items():
            log(f"{mode}: " + ", ".join(f"{k}={v:.6g}" for k, v in vals.items()
                                        if v is not None))
    return metrics


def _write_samples_csv(path, run: FilterRun, tag: str) -> None:
    with open(path, "w") as f:
        f.write(f"# config: {tag}\n")
        f.write("k,z_hat,tau_f,z_min,z_max,mode\n")
        for i, k in enumerate(run.indices):
            f.write(f"{k},{run.estimates[i]:.17g},{run.bounds[i]:.17g},"
                    f"{run.lowers[i]:.17g},{run.uppers[i]:.17g},{run.mode}\n")


def _write_plot_csv(path, tag: str, header, rows) -> None:
    with open(path, "w") as f:
        f.write(f"# config: {tag}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                             for v in row) + "\n")
