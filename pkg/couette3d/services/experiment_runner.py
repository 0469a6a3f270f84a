"""
Reproducible experiment orchestration.

A run is staged in a temporary directory under the output root and moved to
``<kind>_<hash12>_<NNN>`` only once every artifact has been written, so a
failed run leaves nothing behind.
"""

from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
import time
import tomllib
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from pydantic import ValidationError

from couette3d.core import ConfigurationError, ParameterRangeError, get_logger, get_settings
from couette3d.schemas.experiment import ExperimentConfig
from couette3d.services import (
    checkpoint,
    coord_frame,
    diagnostics,
    initial_data,
    linear_theory,
    multipliers,
    streak_solver,
    toy_model,
)
from couette3d.services.nonlinear_solver import ShearFrameSolver, SimState
from couette3d.services.plot_scripts import PlotScriptRenderer
from couette3d.services.spectral_core import SpectralGrid, SpectralVectorField
from couette3d.utils import canonical_json, run_directory_name

logger = get_logger(__name__)

CSV_FORMAT = "%.17g"
DEFAULT_MULTIPLIER_ETAS = tuple(100.0 * 2 ** j for j in range(14))
DEFAULT_TOY_ETAS = (25.0, 100.0, 400.0)
WL_SAMPLE_K = (1, 2, 4)
WL_SAMPLE_L = (0, 1, 4)
WL_SAMPLE_ETA = (-50.0, 0.0, 10.0, 100.0)
CASCADE_FIT_START = 5.0
DTW_BAND_ETAS = (100.0, 400.0, 1600.0, 6400.0)
W_RATIO_TIMES = (1.0, 10.0, 50.0, 200.0)


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list[float]] = dataclass_field(default_factory=list)
    logscale: bool = False
    x_column: str = "t"

    def append(self, *values: float) -> None:
        self.rows.append([float(v) for v in values])


@dataclass
class KindResult:
    tables: list[Table] = dataclass_field(default_factory=list)
    fits: dict[str, Any] = dataclass_field(default_factory=dict)
    notes: dict[str, Any] = dataclass_field(default_factory=dict)


@dataclass(frozen=True)
class RunResult:
    run_id: str
    run_dir: Path
    manifest: dict
    artifacts: list[Path]


# -- configuration ---------------------------------------------------------------

def load_experiment_config(path: str | Path, kind: str | None = None, **overrides: Any) -> ExperimentConfig:
    """Parse a flat TOML file; ``None`` overrides are ignored and ``kind`` must agree with the file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"Config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"Invalid TOML in {path}: {exc}") from exc
    if kind is not None:
        declared = data.setdefault("kind", kind)
        if declared != kind:
            raise ConfigurationError(f"{path} declares kind '{declared}', not '{kind}'")
    data.update({key: value for key, value in overrides.items() if value is not None})
    return validate_config(data)


def validate_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        details = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in exc.errors())
        raise ConfigurationError(f"Invalid experiment configuration: {details}") from exc


# -- persistence -------------------------------------------------------------------

def write_csv(path: Path, table: Table) -> Path:
    data = np.asarray(table.rows, dtype=float).reshape(-1, len(table.columns))
    np.savetxt(path, data, fmt=CSV_FORMAT, delimiter=",", header=",".join(table.columns), comments="")
    return path


def _finite_or_none(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite_or_none(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_none(v) for v in value]
    return value


# -- initial data --------------------------------------------------------------------

def build_initial_field(config: ExperimentConfig, grid: SpectralGrid) -> SpectralVectorField:
    if config.initial == "random":
        field = initial_data.random_initial_data(
            config.seed, grid, config.eps, config.envelope, config.envelope_lambda, config.envelope_s, config.kappa0
        )
    elif config.initial == "cascade":
        field = initial_data.cascade_initial_data(
            config.seed, grid, config.eps, config.u2_ratio,
            config.envelope, config.envelope_lambda, config.envelope_s, config.kappa0,
        )
    elif config.initial == "streak_cos":
        field = initial_data.streak_cos(grid, config.eps)
    else:
        m = config.mode
        field = initial_data.mode_field(grid, m.k, m.eta, m.l, m.uhat())
    return field.with_coeffs(field.coeffs, time=config.t_start)


def _output_times(config: ExperimentConfig) -> np.ndarray:
    n = int(round((config.t_end - config.t_start) / config.dt_out))
    if n < 1:
        raise ConfigurationError("t_end - t_start must cover at least one output interval")
    if not math.isclose(config.t_start + n * config.dt_out, config.t_end, rel_tol=1e-9, abs_tol=1e-9):
        logger.warning(
            f"t_end={config.t_end} is not a whole number of outputs dt_out={config.dt_out}; "
            f"last output at t={config.t_start + n * config.dt_out:.6g}"
        )
    return config.t_start + config.dt_out * np.arange(n + 1)


def _try_fit(fits: dict, key: str, fit: Callable[[], Any]) -> None:
    try:
        result = fit()
    except ParameterRangeError as exc:
        logger.warning(f"Skipping fit '{key}': {exc.message}")
        return
    if isinstance(result, diagnostics.PowerLawFit):
        fits[key] = {"exponent": result.exponent, "r2": result.r2, "samples": result.samples}
    else:
        fits[key] = result


def _neq_norm(field: SpectralVectorField, component: int) -> float:
    return diagnostics.neq_sobolev_norm(field, 0.0, component)


# -- kinds -------------------------------------------------------------------------

def run_linear(config: ExperimentConfig) -> KindResult:
    result = KindResult()
    times = _output_times(config)
    if config.mode is not None:
        m = config.mode
        mode = linear_theory.LinearMode(m.k, m.eta, m.l, m.uhat(), config.nu, config.t_start)
        table = Table("mode.csv", ["t", "u1_re", "u1_im", "u2_re", "u2_im", "u3_re", "u3_im", "q2_abs", "closed_form_error"])
        current = mode
        for i, t in enumerate(times):
            if i:
                current = linear_theory.evolve_linear_mode(current, float(times[i - 1]), float(t), config.dt)
            exact = linear_theory.linear_mode_exact(mode, float(t))
            u = current.vector
            kv = current.wavevector()
            q2 = -float(kv @ kv) * u[1]
            error = float(np.max(np.abs(u - exact.vector)))
            table.append(t, u[0].real, u[0].imag, u[1].real, u[1].imag, u[2].real, u[2].imag, abs(q2), error)
        result.tables.append(table)
        result.fits["max_closed_form_error"] = max(row[-1] for row in table.rows)
        return result

    grid = SpectralGrid(config.grid)
    start = build_initial_field(config, grid)
    table = Table("timeseries.csv", ["t", "E_total", "E_neq", "u1_neq", "u2_neq", "u3_neq", "E0_1"])
    for t in times:
        field = linear_theory.evolve_linear_field(start, float(t), config.nu)
        e = diagnostics.component_energies(field)
        table.append(t, e.E_total, e.E_neq, _neq_norm(field, 0), _neq_norm(field, 1), _neq_norm(field, 2), e.E0_1)
    result.tables.append(table)
    series = diagnostics.TimeSeries("u2_neq", times, np.array([row[4] for row in table.rows]))
    _try_fit(result.fits, "u2_neq_decay", lambda: diagnostics.fit_power_law(series, (10.0, 100.0)))
    return result


def run_streak(config: ExperimentConfig) -> KindResult:
    grid = SpectralGrid(config.grid)
    state = streak_solver.streak_from_3d(build_initial_field(config, grid), config.nu)
    initial = state
    table = Table("streak.csv", ["t", "E1", "E23", "grad23_sq", "liftup_error"])

    def record(s: streak_solver.StreakState) -> None:
        e1, e23 = s.energies()
        reference = streak_solver.lift_up_reference(initial, s.time - initial.time, config.nu)
        table.append(s.time, e1, e23, s.gradient_norm_sq(), diagnostics.plane_l2(grid, s.u1 - reference))

    streak_solver.StreakSolver(grid, config.nu).run(state, config.t_end, config.time_step, config.dt_out, record)
    result = KindResult(tables=[table])
    result.fits["max_liftup_error"] = max(row[-1] for row in table.rows)
    return result


class _Sim3dRecorder:
    """Per-output diagnostics of a shear-frame run."""

    COLUMNS = ["t", "E_total", "E_neq", "E0_1", "E0_2", "E0_3", "Hs_u1", "Hs_u3", "div_residual", "budget_residual"]
    CASCADE_COLUMNS = ["t", "H1_u1", "H2_u1", "u2_neq"]

    def __init__(self, config: ExperimentConfig, solver: ShearFrameSolver, checkpoint_dir: Path | None):
        self.config = config
        self.solver = solver
        self.table = Table("timeseries.csv", list(self.COLUMNS))
        self.cascade = Table("cascade.csv", list(self.CASCADE_COLUMNS), logscale=True)
        self.checkpoint_dir = checkpoint_dir
        self.fields: list[SpectralVectorField] = []
        self.count = 0

    def __call__(self, state: SimState) -> None:
        field = state.uhat
        e = diagnostics.component_energies(field)
        sigma = self.config.sigma_prime
        budget = diagnostics.energy_budget_residual(state, self.solver)
        self.table.append(
            field.time, e.E_total, e.E_neq, e.E0_1, e.E0_2, e.E0_3,
            diagnostics.neq_sobolev_norm(field, sigma, 0, lab=True),
            diagnostics.neq_sobolev_norm(field, sigma, 2, lab=True),
            field.divergence_residual(),
            budget.relative,
        )
        self.cascade.append(
            field.time,
            diagnostics.neq_sobolev_norm(field, 1.0, 0, lab=True),
            diagnostics.neq_sobolev_norm(field, 2.0, 0, lab=True),
            diagnostics.neq_sobolev_norm(field, 0.0, 1),
        )
        self.fields.append(field)
        every = self.config.checkpoint_every
        if self.checkpoint_dir is not None and every and self.count % every == 0 and field.shear_origin == 0.0:
            checkpoint.write_checkpoint(state, self.checkpoint_dir / f"checkpoint_{self.count:04d}.bin")
        self.count += 1


def _simulate(config: ExperimentConfig, staging: Path | None) -> tuple[_Sim3dRecorder, SimState]:
    grid = SpectralGrid(config.grid)
    state = SimState(build_initial_field(config, grid), config.nu, config.eps)
    solver = ShearFrameSolver(grid, config.nu, nonlinear=config.nonlinear, cfl=config.cfl)
    recorder = _Sim3dRecorder(config, solver, staging)
    final = solver.run(state, config.t_end, config.time_step, config.dt_out, recorder, remap=config.remap)
    if staging is not None:
        if final.uhat.shear_origin == 0.0:
            checkpoint.write_checkpoint(final, staging / "checkpoint_final.bin")
        else:
            logger.warning("Final state was remapped; no checkpoint written")
    return recorder, final


def cascade_window(config: ExperimentConfig) -> tuple[float, float]:
    """Fit window [5, min(t_end, nu^{-1/3} / 4)] of the cascade growth exponents."""
    hi = config.t_end if config.nu <= 0 else min(config.t_end, config.nu ** (-1.0 / 3.0) / 4.0)
    return CASCADE_FIT_START, hi


def u2_growth_constant(t: np.ndarray, u2_neq: np.ndarray, eps: float, nu: float) -> float | None:
    """max ||u2_neq|| / (eps nu t) over t >= 1."""
    late = t >= 1.0
    if eps <= 0 or nu <= 0 or not np.any(late):
        return None
    return float(np.max(u2_neq[late] / (eps * nu * t[late])))


def run_sim3d(config: ExperimentConfig, staging: Path) -> KindResult:
    recorder, _ = _simulate(config, staging)
    table = recorder.table
    result = KindResult(tables=[table, recorder.cascade])
    t = np.array([row[0] for row in table.rows])
    fraction = np.array([row[2] / row[1] if row[1] > 0 else 0.0 for row in table.rows])
    result.fits["t_star"] = diagnostics.crossing_time(diagnostics.TimeSeries("neq_fraction", t, fraction), 0.01)

    window = cascade_window(config)
    inside = (t >= window[0]) & (t <= window[1])
    if window[1] <= window[0]:
        logger.warning(f"Cascade fit window {window} is empty; growth exponents skipped")
    norms = {
        "Hs_u1": np.array([row[6] for row in table.rows]),
        "H1_u1": np.array([row[1] for row in recorder.cascade.rows]),
        "H2_u1": np.array([row[2] for row in recorder.cascade.rows]),
    }
    for name, values in norms.items():
        if window[1] > window[0] and np.all(values[inside] > 0):
            series = diagnostics.TimeSeries(name, t, values)
            _try_fit(result.fits, f"{name}_growth", lambda s=series: diagnostics.fit_power_law(s, window))
    u2 = np.array([row[3] for row in recorder.cascade.rows])
    result.fits["u2_growth_constant"] = u2_growth_constant(t, u2, config.eps, config.nu)
    result.fits["max_budget_residual"] = max(row[-1] for row in table.rows)
    return result


def run_toy(config: ExperimentConfig) -> KindResult:
    etas = list(config.etas) or list(DEFAULT_TOY_ETAS)
    kappa = config.multiplier.kappa
    dt = min(config.time_step, 0.02)
    params = [config.toy_params(eta) for eta in etas]
    sweep = toy_model.sweep(params, kappa=kappa, dt=dt)
    table = Table("toy_sweep.csv", ["eta", "k", "t_start", "t_end", "K", "growth", "predicted_growth", "log_total_growth"], x_column="eta")
    for p, res in zip(params, sweep):
        predicted = toy_model.interval_growth_ratio(p.eta, p.k) if p.k * p.k <= p.eta else math.nan
        table.append(res.eta, res.k, res.t_start, res.t_end, res.K, res.growth, predicted, toy_model.stirling_total_growth(p.eta))

    first = sweep[0]
    traj = toy_model.integrate_toy(
        params[0], first.t_start, first.t_end, toy_model.ToyState(*([1.0] * 6)), dt=dt,
        dt_out=(first.t_end - first.t_start) / 200,
    )
    trajectory = Table("toy_trajectory.csv", ["t", *toy_model.COMPONENTS])
    for t, row in zip(traj.t, traj.states):
        trajectory.append(t, *row)

    result = KindResult(tables=[table, trajectory])
    result.fits["K"] = max(r.K for r in sweep)
    stirling_etas = [float(4 ** j) for j in range(2, 11)]
    result.fits["stirling_slope"] = toy_model.stirling_slope(stirling_etas)
    result.notes["regime"] = "below-threshold" if all(p.below_threshold for p in params) else "above-threshold"
    return result


def w_ratio_samples(etas) -> list[tuple[float, float, float]]:
    """(t, eta, xi) triples over the sample times and every ordered pair of frequencies, zero included."""
    freqs = [0.0, *etas]
    return [(t, eta, xi) for t in W_RATIO_TIMES for eta in freqs for xi in freqs if eta != xi]


def run_multiplier_table(config: ExperimentConfig) -> KindResult:
    etas = list(config.etas) or list(DEFAULT_MULTIPLIER_ETAS)
    kappa = config.multiplier.kappa
    table = Table("multipliers.csv", ["eta", "log_inv_w", "log_inv_w_bar", "normalized_loss"], logscale=True, x_column="eta")
    for eta in etas:
        log_inv_w = -float(multipliers.log_w(1.0, eta, kappa))
        log_inv_w_bar = -float(multipliers.log_w_bar(1.0, eta, kappa))
        table.append(eta, log_inv_w, log_inv_w_bar, log_inv_w / math.sqrt(eta))

    bound = Table("wl_bound.csv", ["k", "eta", "l", "total_variation", "closed_form_log_wL", "ode_log_wL"], x_column="eta")
    for k in WL_SAMPLE_K:
        for eta in WL_SAMPLE_ETA:
            for l in WL_SAMPLE_L:
                horizon = 2.0 * abs(eta) + 50.0
                tv = multipliers.wL_total_variation(k, eta, l)
                closed = float(multipliers.log_w_L(horizon, k, eta, l, kappa))
                ode = math.log(multipliers.w_L_by_ode(horizon, k, eta, l, kappa))
                bound.append(k, eta, l, tv, closed, ode)

    loss = multipliers.fit_total_loss(kappa, etas)
    result = KindResult(tables=[table, bound])
    result.fits["gevrey_exponent"] = {"exponent": loss.exponent, "prefactor": loss.prefactor, "r2": loss.r2}
    result.fits["mu"] = multipliers.resolved_mu(config.multiplier)
    result.fits["wL_total_variation_sup"] = max(row[3] for row in bound.rows)
    result.fits["wL_ode_mismatch"] = max(abs(row[4] - row[5]) for row in bound.rows)
    result.fits["dtw_band_B"] = multipliers.dtw_band(kappa, DTW_BAND_ETAS)
    result.fits["w_ratio_K"] = multipliers.w_ratio_constant(kappa, w_ratio_samples(etas))
    return result


def _coord_history(config: ExperimentConfig, staging: Path) -> list[SpectralVectorField]:
    if config.checkpoint_dir:
        paths = sorted(Path(config.checkpoint_dir).glob("checkpoint_[0-9]*.bin"))
        if not paths:
            raise ConfigurationError(f"No checkpoints found in {config.checkpoint_dir}")
        grid = SpectralGrid(config.grid)
        return [checkpoint.read_checkpoint(p, grid=grid).uhat for p in paths]
    recorder, _ = _simulate(config.model_copy(update={"checkpoint_every": 0}), None)
    return recorder.fields


def run_coord(config: ExperimentConfig, staging: Path) -> KindResult:
    fields = _coord_history(config, staging)
    grid = fields[0].grid
    times = np.array([f.time for f in fields])
    u0 = [f.coeffs[:, 0] for f in fields]
    late = times >= 1.0 - 1e-12
    late_fields = [f for f, keep in zip(fields, late) if keep]
    forcing = diagnostics.forcing_series(late_fields)

    state = coord_frame.initial_coord_state(grid, times, u0, config.nu)
    psi_times, psi = coord_frame.psi_from_history(times, u0, grid, config.nu)
    late_u0 = [u for u, keep in zip(u0, late) if keep]

    table = Table("coord.csv", ["t", "C_norm", "g_norm", "identity_residual", "psi_minus_u01", "sup_psi_y", "sup_psi_z", "sup_G"])
    samples: list[coord_frame.CoordState] = []
    coord_frame.coevolve(state, times[late], late_u0, forcing, callback=samples.append)
    for s, psi_t, u in zip(samples, psi, late_u0):
        jac = coord_frame.jacobians_from_C(s.C, grid, s.time)
        table.append(
            s.time,
            diagnostics.plane_l2(grid, s.C),
            diagnostics.plane_l2(grid, s.g),
            s.identity_residual(),
            diagnostics.plane_l2(grid, psi_t - u[0]),
            float(np.max(np.abs(jac.psi_y))),
            float(np.max(np.abs(jac.psi_z))),
            float(np.max(np.abs(jac.G))),
        )
    result = KindResult(tables=[table])
    result.fits["max_identity_residual"] = max(row[3] for row in table.rows)
    series = diagnostics.TimeSeries("psi_minus_u01", psi_times[: len(table.rows)], np.array([row[4] for row in table.rows]))
    if np.all(series.values > 0):
        _try_fit(result.fits, "psi_decay", lambda: diagnostics.fit_power_law(series))
    result.notes["forcing_gradient"] = "shear-frame"
    return result


KIND_HANDLERS: dict[str, Callable[..., KindResult]] = {
    "linear": lambda config, staging: run_linear(config),
    "streak": lambda config, staging: run_streak(config),
    "sim3d": run_sim3d,
    "toy": lambda config, staging: run_toy(config),
    "multiplier-table": lambda config, staging: run_multiplier_table(config),
    "coord": run_coord,
}


# -- orchestration -------------------------------------------------------------------

class ExperimentRunner:
    """Runs one :class:`ExperimentConfig` into its own run directory."""

    def __init__(self, output_root: str | Path | None = None, renderer: PlotScriptRenderer | None = None):
        self.output_root = Path(output_root) if output_root is not None else None
        self.renderer = renderer or PlotScriptRenderer()

    def _root(self, config: ExperimentConfig) -> Path:
        if self.output_root is not None:
            return self.output_root
        return Path(config.output_dir or get_settings().output_dir)

    def run(self, config: ExperimentConfig) -> RunResult:
        root = self._root(config)
        root.mkdir(parents=True, exist_ok=True)
        param_hash = config.parameter_hash
        logger.info(f"Running {config.kind} experiment (hash {param_hash[:12]}, {config.regime})")
        started = time.perf_counter()

        staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=root))
        try:
            outcome = KIND_HANDLERS[config.kind](config, staging)
            run_id = run_directory_name(config.kind, param_hash, root)
            for table in outcome.tables:
                write_csv(staging / table.name, table)
                self.renderer.write(
                    staging, table.name, table.columns,
                    run_id=run_id, kind=config.kind, parameter_hash=param_hash,
                    x_column=table.x_column, logscale=table.logscale,
                )
            artifacts = sorted(p.name for p in staging.iterdir()) + ["manifest.json"]
            manifest = {
                "kind": config.kind,
                "run_id": run_id,
                "parameter_hash": param_hash,
                "regime": outcome.notes.get("regime", config.regime),
                "config": config.model_dump(mode="json"),
                "artifacts": sorted(artifacts),
                "fits": _finite_or_none(outcome.fits),
                "notes": _finite_or_none({k: v for k, v in outcome.notes.items() if k != "regime"}),
            }
            (staging / "manifest.json").write_text(
                json.dumps(json.loads(canonical_json(manifest)), indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            run_dir = root / run_id
            os.replace(staging, run_dir)
        except BaseException:
            shutil.rmtree(staging, ignore_errors=True)
            raise

        logger.info(f"Run {run_id} finished in {time.perf_counter() - started:.2f}s")
        return RunResult(run_id, run_dir, manifest, sorted(run_dir.iterdir()))


def run(config: ExperimentConfig, output_root: str | Path | None = None) -> RunResult:
    return ExperimentRunner(output_root).run(config)
