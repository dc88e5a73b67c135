"""Desk-scale experiment drivers.

Each runner consumes an ExperimentConfig, writes a trials CSV plus a
summary JSON under the output directory, and returns the summary dict.
Per-trial randomness comes from named streams keyed by (seed, trial,
purpose), so results are reproducible and independent of how many other
trials run. Wall-clock timing is recorded only when cfg.timing is true,
because timing breaks byte-level reproducibility of the outputs.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import zoo
from ..descent import DescentConfig
from ..errors import ConfigError
from ..flow import (FlowDiscretization, ParameterFlow, TrainConfig, discretize,
                    estimate_regularity, micro_train_flow)
from ..landscape import OracleConfig, brute_force_min, verify_descent_direction
from ..network import NetworkDims, batch_forward, forward, init_gaussian
from ..objective import MeasurementMatrix, Objective
from ..rng import stream
from ..surfing import SurfConfig, direct_descent, surf_projected, surf_simple
from .config import ExperimentConfig
from .reports import TrialReport, per_pixel_error, write_trials_csv
from .snapshots import read_snapshot_file, write_snapshot_file


def _dims_from(cfg: ExperimentConfig) -> NetworkDims:
    d = cfg.dims
    return NetworkDims(k=int(d["k"]), widths=tuple(d["widths"]), n=int(d["n"]))


def build_flow(cfg: ExperimentConfig) -> ParameterFlow:
    spec = cfg.flow
    if spec.type == "fold":
        return zoo.fold_flow(k=spec.k, eps=spec.eps, horizon=spec.horizon)
    if spec.type == "kink_cross":
        return zoo.kink_cross_flow(horizon=spec.horizon)
    if spec.type == "one_unit":
        return zoo.one_unit_flow(horizon=spec.horizon)
    if spec.type == "random_interpolation":
        return zoo.random_interpolation_flow(_dims_from(cfg), seed=spec.seed,
                                             drift=spec.drift, horizon=spec.horizon)
    if spec.type == "micro_train":
        dims = _dims_from(cfg)
        teacher = init_gaussian(dims, stream(spec.seed, 0, "teacher"))
        latents = stream(spec.seed, 1, "teacher-latents").uniform(
            -1.0, 1.0, size=(spec.n_targets, dims.k))
        targets = batch_forward(teacher, latents)
        train_cfg = TrainConfig(steps=spec.steps, cadence=spec.cadence,
                                lr=spec.lr, batch_size=spec.batch_size)
        return micro_train_flow(dims, targets, train_cfg, seed=spec.seed)
    if spec.type == "file":
        if not spec.path:
            raise ConfigError("flow type 'file' requires a path")
        if not Path(spec.path).exists():
            raise ConfigError(f"snapshot file not found: {spec.path}")
        flow, _, _ = read_snapshot_file(spec.path)
        return flow
    raise ConfigError(f"unknown flow type {spec.type!r}")


def _surf_cfg(cfg: ExperimentConfig) -> SurfConfig:
    return SurfConfig(descent=cfg.descent, tau=cfg.tau)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_summary(out: Path, summary: dict) -> None:
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _clock(enabled: bool):
    return time.perf_counter() if enabled else 0.0


def _run_trials(cfg: ExperimentConfig, worker) -> list[TrialReport]:
    """Run `worker(trial) -> list[TrialReport]` for every trial index.

    Trials may execute concurrently (cfg.jobs) but results are always
    assembled in trial order.
    """
    indices = range(cfg.trials)
    if cfg.jobs == 1:
        batches = [worker(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            batches = list(pool.map(worker, indices))
    return [row for batch in batches for row in batch]


def _recovery_trial(cfg: ExperimentConfig, disc: FlowDiscretization,
                    A: MeasurementMatrix, m: int, trial: int) -> list[TrialReport]:
    k = disc.dims.k
    final = disc.snapshots[-1]
    x_star = stream(cfg.seed, trial, "x-star").uniform(-1.0, 1.0, size=k)
    x_init = stream(cfg.seed, trial, "x-init").uniform(-1.0, 1.0, size=k)
    y = forward(final, x_star).output
    surf_cfg = _surf_cfg(cfg)

    t0 = _clock(cfg.timing)
    surf_res = surf_simple(disc, y, A, surf_cfg, x_init=x_init)
    t1 = _clock(cfg.timing)
    direct_res = direct_descent(final, y, A, surf_cfg, x_inits=[x_init])
    t2 = _clock(cfg.timing)

    rows = []
    for method, x_hat, f_final, iters, wall in (
        ("surfing", surf_res.x_final, surf_res.f_final,
         surf_res.total_inner_iterations, (t1 - t0) * 1e3),
        ("direct", direct_res.x_final, direct_res.f_final,
         direct_res.iterations, (t2 - t1) * 1e3),
    ):
        rows.append(TrialReport(
            method=method, trial=trial, seed=cfg.seed, m=m,
            distance=float(np.linalg.norm(x_hat - x_star)),
            f_final=f_final,
            per_pixel_error=per_pixel_error(forward(final, x_hat).output, y),
            iterations=iters,
            wall_ms=wall if cfg.timing else 0.0,
            x_star=x_star, x_hat=x_hat,
        ))
    return rows


def _success_rates(rows: list[TrialReport], threshold: float) -> dict:
    rates: dict = {}
    for r in rows:
        key = (r.method, r.m)
        total, good = rates.get(key, (0, 0))
        rates[key] = (total + 1, good + int(r.success(threshold)))
    return {
        f"{method}@m={m}": {"trials": total, "successes": good,
                            "success_rate": good / total}
        for (method, m), (total, good) in sorted(rates.items())
    }


def run_recovery(cfg: ExperimentConfig) -> dict:
    """Recover x_star from y = G_T(x_star): surfing vs direct descent."""
    flow = build_flow(cfg)
    disc = discretize(flow, cfg.flow.delta)
    A = MeasurementMatrix.identity(disc.dims.n)
    rows = _run_trials(cfg, lambda t: _recovery_trial(cfg, disc, A, disc.dims.n, t))
    out = _out_dir(cfg)
    write_trials_csv(out / "trials.csv", rows)
    summary = {
        "experiment": "recovery",
        "seed": cfg.seed,
        "trials": cfg.trials,
        "snapshots": disc.T + 1,
        "success_threshold": cfg.success_threshold,
        "rates": _success_rates(rows, cfg.success_threshold),
    }
    _write_summary(out, summary)
    return summary


def run_compressed_sensing(cfg: ExperimentConfig) -> dict:
    """Success-vs-m curve with a fresh Gaussian A per trial."""
    if not cfg.m_list:
        raise ConfigError("compressed sensing requires a nonempty m_list")
    flow = build_flow(cfg)
    disc = discretize(flow, cfg.flow.delta)
    n = disc.dims.n
    rows: list[TrialReport] = []
    for m in cfg.m_list:
        if not 1 <= m:
            raise ConfigError(f"measurement count must be >= 1, got {m}")

        def worker(trial: int, m: int = m) -> list[TrialReport]:
            A = MeasurementMatrix.gaussian(m, n, stream(cfg.seed, trial, f"A-m{m}"))
            return _recovery_trial(cfg, disc, A, m, trial)

        rows.extend(_run_trials(cfg, worker))
    out = _out_dir(cfg)
    write_trials_csv(out / "trials.csv", rows)
    rates = _success_rates(rows, cfg.success_threshold)
    summary = {
        "experiment": "compressed_sensing",
        "seed": cfg.seed,
        "trials_per_m": cfg.trials,
        "m_list": list(cfg.m_list),
        "success_threshold": cfg.success_threshold,
        "rates": rates,
    }
    _write_summary(out, summary)
    return summary


def _load_targets(cfg: ExperimentConfig, n: int) -> np.ndarray | None:
    if cfg.targets_path is None:
        return None
    path = Path(cfg.targets_path)
    if not path.exists():
        raise ConfigError(f"targets file not found: {path}")
    try:
        data = json.loads(path.read_text())
        targets = np.asarray(data["targets"], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed targets file {path}: {exc}") from exc
    if targets.ndim != 2 or targets.shape[1] != n:
        raise ConfigError(
            f"targets must be a (count, {n}) array, got shape {targets.shape}")
    return targets


def run_rate_distortion(cfg: ExperimentConfig) -> dict:
    """Per-pixel reconstruction error vs m for off-range targets.

    Targets come from cfg.targets_path when given; otherwise each trial
    synthesizes y = G_T(x_star) + noise * u with u a unit vector drawn
    orthogonal-ish to the range direction, so y is off-range by
    construction. Without a ground-truth x_star the distance column
    is nan.
    """
    if not cfg.m_list:
        raise ConfigError("rate distortion requires a nonempty m_list")
    flow = build_flow(cfg)
    disc = discretize(flow, cfg.flow.delta)
    n = disc.dims.n
    final = disc.snapshots[-1]
    file_targets = _load_targets(cfg, n)
    rows: list[TrialReport] = []
    surf_cfg = _surf_cfg(cfg)

    for m in cfg.m_list:
        def worker(trial: int, m: int = m) -> list[TrialReport]:
            k = disc.dims.k
            if file_targets is not None:
                y = file_targets[trial % len(file_targets)]
                x_star = None
            else:
                x_star = stream(cfg.seed, trial, "x-star").uniform(-1.0, 1.0, size=k)
                base = forward(final, x_star).output
                bump = stream(cfg.seed, trial, "target-noise").standard_normal(n)
                bump /= np.linalg.norm(bump)
                y = base + cfg.noise * bump
            x_init = stream(cfg.seed, trial, "x-init").uniform(-1.0, 1.0, size=k)
            A = MeasurementMatrix.gaussian(m, n, stream(cfg.seed, trial, f"A-m{m}"))

            t0 = _clock(cfg.timing)
            surf_res = surf_simple(disc, y, A, surf_cfg, x_init=x_init)
            t1 = _clock(cfg.timing)
            direct_res = direct_descent(final, y, A, surf_cfg, x_inits=[x_init])
            t2 = _clock(cfg.timing)

            out_rows = []
            for method, x_hat, f_final, iters, wall in (
                ("surfing", surf_res.x_final, surf_res.f_final,
                 surf_res.total_inner_iterations, (t1 - t0) * 1e3),
                ("direct", direct_res.x_final, direct_res.f_final,
                 direct_res.iterations, (t2 - t1) * 1e3),
            ):
                dist = (float(np.linalg.norm(x_hat - x_star))
                        if x_star is not None else math.nan)
                out_rows.append(TrialReport(
                    method=method, trial=trial, seed=cfg.seed, m=m,
                    distance=dist, f_final=f_final,
                    per_pixel_error=per_pixel_error(
                        forward(final, x_hat).output, y),
                    iterations=iters,
                    wall_ms=wall if cfg.timing else 0.0,
                ))
            return out_rows

        rows.extend(_run_trials(cfg, worker))

    out = _out_dir(cfg)
    write_trials_csv(out / "trials.csv", rows)
    dist_stats: dict = {}
    for m in cfg.m_list:
        for method in ("surfing", "direct"):
            errs = sorted(r.per_pixel_error for r in rows
                          if r.m == m and r.method == method)
            q = np.quantile(errs, [0.0, 0.25, 0.5, 0.75, 1.0])
            dist_stats[f"{method}@m={m}"] = {
                "min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4],
            }
    summary = {
        "experiment": "rate_distortion",
        "seed": cfg.seed,
        "trials_per_m": cfg.trials,
        "m_list": list(cfg.m_list),
        "noise": cfg.noise if file_targets is None else None,
        "per_pixel_error": dist_stats,
    }
    _write_summary(out, summary)
    return summary


def run_tracking(cfg: ExperimentConfig) -> dict:
    """Projected surfing against the grid oracle at a safe and an unsafe step.

    Estimates the flow's regularity constants, discretizes at half the
    implied safe step, and records the worst per-snapshot deviation of
    the projected-surfing iterate from the oracle minimizer. A second run
    at 20x the bound is reported (not asserted) to show where tracking
    can break. Oracle-to-oracle jumps above 10x the estimated speed are
    flagged: they indicate the minimizer path itself is discontinuous.
    """
    flow = build_flow(cfg)
    if flow.dims.k > 2:
        raise ConfigError("tracking experiments require k <= 2 for the grid oracle")
    if cfg.flow.type == "one_unit":
        y = zoo.one_unit_target()
    elif cfg.flow.type == "kink_cross":
        y = zoo.kink_cross_target()
    else:
        x_probe = stream(cfg.seed, 0, "tracking-target").uniform(
            -0.5, 0.5, size=flow.dims.k)
        y = forward(flow.at(flow.horizon), x_probe).output
    A = MeasurementMatrix.identity(flow.dims.n)
    oracle_cfg = OracleConfig(bound=cfg.oracle_bound, resolution=cfg.oracle_resolution)
    reg = estimate_regularity(flow, cfg.tau, y, A, oracle_cfg,
                              s_samples=cfg.s_samples)

    def deviation_run(delta: float) -> dict:
        disc = discretize(flow, delta)
        res = surf_projected(disc, y, A, _surf_cfg(cfg))
        worst = 0.0
        jumps = 0
        prev_oracle = None
        for t, x_t in enumerate(res.x_per_snapshot):
            oracle = brute_force_min(
                Objective(disc.snapshots[t], A, y), oracle_cfg)
            worst = max(worst, float(np.linalg.norm(x_t - oracle.x_min)))
            if prev_oracle is not None and reg.minimizer_lipschitz > 0:
                step = np.linalg.norm(oracle.x_min - prev_oracle)
                if step > 10.0 * reg.minimizer_lipschitz * delta:
                    jumps += 1
            prev_oracle = oracle.x_min
        return {
            "delta": delta,
            "snapshots": disc.T + 1,
            "max_deviation": worst,
            "tracked": worst <= 1e-6,
            "pieces_examined": res.pieces_examined_per_step,
            "minimizer_jumps": jumps,
        }

    if math.isinf(reg.step_bound):
        safe_delta = flow.horizon / 10.0
        runs = {"safe": deviation_run(safe_delta), "unsafe": None}
    else:
        runs = {
            "safe": deviation_run(0.5 * reg.step_bound),
            "unsafe": deviation_run(min(20.0 * reg.step_bound, flow.horizon)),
        }
    out = _out_dir(cfg)
    summary = {
        "experiment": "tracking",
        "seed": cfg.seed,
        "tau": cfg.tau,
        "max_weight_norm": reg.max_weight_norm,
        "minimizer_lipschitz": reg.minimizer_lipschitz,
        "step_bound": reg.step_bound if math.isfinite(reg.step_bound) else "inf",
        "near_ties": reg.near_ties,
        "runs": runs,
    }
    _write_summary(out, summary)
    return summary


def run_landscape(cfg: ExperimentConfig) -> dict:
    """Descent-direction frequency on spheres around a random init."""
    dims = _dims_from(cfg)
    out = _out_dir(cfg)
    lines = ["seed,radius,n_samples,fraction_negative,ball_estimate"]
    results = {}
    for seed in cfg.landscape_seeds:
        params = init_gaussian(dims, stream(seed, 0, "landscape-net"))
        y = stream(seed, 0, "landscape-target").standard_normal(dims.n)
        y /= np.linalg.norm(y)
        report = verify_descent_direction(params, y,
                                          MeasurementMatrix.identity(dims.n),
                                          cfg.radii, cfg.n_samples, seed)
        ball = "" if report.ball_estimate is None else f"{report.ball_estimate:.17g}"
        for r, frac in zip(report.radii, report.fractions):
            lines.append(f"{seed},{r:.17g},{report.n_samples},{frac:.17g},{ball}")
        results[str(seed)] = {
            "radii": list(report.radii),
            "fractions": list(report.fractions),
            "ball_estimate": report.ball_estimate,
        }
    (out / "landscape.csv").write_text("\n".join(lines) + "\n")
    summary = {
        "experiment": "landscape",
        "dims": cfg.dims,
        "n_samples": cfg.n_samples,
        "reports": results,
    }
    _write_summary(out, summary)
    return summary


def run_surf(cfg: ExperimentConfig) -> dict:
    """One surfing run over the configured flow; writes the trajectory."""
    flow = build_flow(cfg)
    disc = discretize(flow, cfg.flow.delta)
    k = disc.dims.k
    final = disc.snapshots[-1]
    x_star = stream(cfg.seed, 0, "x-star").uniform(-1.0, 1.0, size=k)
    y = forward(final, x_star).output
    A = MeasurementMatrix.identity(disc.dims.n)
    res = surf_simple(disc, y, A, _surf_cfg(cfg),
                      x_init=stream(cfg.seed, 0, "x-init").uniform(-1.0, 1.0, size=k))
    out = _out_dir(cfg)
    lines = ["snapshot,f_value," + ",".join(f"x{i}" for i in range(k))]
    for t, (x, f) in enumerate(zip(res.x_per_snapshot, res.f_per_snapshot)):
        coords = ",".join(f"{v:.17g}" for v in x)
        lines.append(f"{t},{f:.17g},{coords}")
    (out / "trajectory.csv").write_text("\n".join(lines) + "\n")
    summary = {
        "experiment": "surf",
        "seed": cfg.seed,
        "snapshots": disc.T + 1,
        "f_final": res.f_final,
        "distance_to_truth": float(np.linalg.norm(res.x_final - x_star)),
        "inner_iterations": res.total_inner_iterations,
    }
    _write_summary(out, summary)
    return summary


def run_train_flow(cfg: ExperimentConfig) -> dict:
    """Train a micro flow and persist it as a snapshot file."""
    spec = cfg.flow
    if spec.type != "micro_train":
        raise ConfigError("train-flow requires a micro_train flow spec")
    flow = build_flow(cfg)
    out = _out_dir(cfg)
    path = out / "flow.snap"
    metadata = {
        "seed": spec.seed,
        "trainer": {"steps": spec.steps, "cadence": spec.cadence, "lr": spec.lr,
                    "batch_size": spec.batch_size, "n_targets": spec.n_targets},
        "indices": list(flow.indices),
    }
    write_snapshot_file(path, list(flow.sequence), cadence=spec.cadence,
                        metadata=metadata)
    summary = {
        "experiment": "train_flow",
        "snapshots": len(flow.sequence),
        "path": str(path),
        "final_loss_index": flow.indices[-1],
    }
    _write_summary(out, summary)
    return summary


def run_report(out_dir: str | Path) -> dict:
    """Aggregate a results directory into summary tables.

    Reads trials.csv plus summary.json, writes report.csv with one row
    per (method, m) and prints the same table.
    """
    from .reports import read_trials_csv

    out = Path(out_dir)
    trials_path = out / "trials.csv"
    if not trials_path.exists():
        raise ConfigError(f"no trials.csv under {out}")
    rows = read_trials_csv(trials_path)
    threshold = 0.01
    summary_path = out / "summary.json"
    if summary_path.exists():
        threshold = json.loads(summary_path.read_text()).get(
            "success_threshold", threshold)

    groups: dict = {}
    for r in rows:
        groups.setdefault((r.method, r.m), []).append(r)
    lines = ["method,m,trials,success_rate,median_distance,median_per_pixel_error,"
             "mean_iterations"]
    table = []
    for (method, m), rs in sorted(groups.items()):
        dists = [r.distance for r in rs if math.isfinite(r.distance)]
        med_d = float(np.median(dists)) if dists else math.nan
        med_e = float(np.median([r.per_pixel_error for r in rs]))
        rate = sum(r.success(threshold) for r in rs) / len(rs)
        iters = float(np.mean([r.iterations for r in rs]))
        lines.append(f"{method},{m},{len(rs)},{rate:.17g},{med_d:.17g},"
                     f"{med_e:.17g},{iters:.17g}")
        table.append({"method": method, "m": m, "trials": len(rs),
                      "success_rate": rate, "median_distance": med_d,
                      "median_per_pixel_error": med_e})
    (out / "report.csv").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return {"rows": table, "success_threshold": threshold}
