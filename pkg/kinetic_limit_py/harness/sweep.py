"""
Оркестрация: хорошо подготовленные данные, сравнение с пределом и eps-сканирование.

Течение Эйлера-Максвелла не зависит от eps, поэтому считается один раз
и используется всеми кинетическими запусками только для чтения.
"""

import dataclasses
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..core.collision import CollisionKernel, build_kernel, nu_weight
from ..core.maxwellian import FluidMoments, discrete_maxwellian
from ..errors import KineticLimitError, PreconditionError
from ..solvers.em_fields import gauss_residual
from ..solvers.fluid_solver import FluidState, FluidTrajectory, density_perturbation_state, run_fluid
from ..solvers.kinetic_solver import KineticState, KineticTrajectory, Observer, run_kinetic
from .diagnostics import RateFit, energy_functionals, fit_rate, limit_error, perturbation_from, theta_residual_check
from .env_config import RunConfig
from .reports import (COMPARE_COLUMNS, SWEEP_COLUMNS, SWEEP_SUMMARY_COLUMNS, TIME_SERIES_COLUMNS,
                      report_metadata, write_csv)

logger = logging.getLogger('Sweep')

TOL_GAUSS = 1e-10
T_MAX_LABEL = "reference scale, C1 = 1 assumed"
RATE_NORMS = ("limit_l2", "limit_linf_x", "field_l2", "field_linf")


@dataclasses.dataclass(frozen=True)
class SweepPlan:
    """Убывающий список eps, показатель a, шаблон конфигурации и seed."""

    eps_list: Tuple[float, ...]
    template: RunConfig
    a_exp: float = 0.0
    seed: int = 0
    parallel_runs: int = 1
    with_energy: bool = False

    def __post_init__(self):
        eps_list = tuple(float(e) for e in self.eps_list)
        object.__setattr__(self, 'eps_list', eps_list)
        if len(eps_list) < 3:
            raise PreconditionError(f"Для сканирования нужно >= 3 значений eps, получено {len(eps_list)}")
        if any(not e > 0 for e in eps_list):
            raise PreconditionError(f"Все eps должны быть > 0: {eps_list}")
        if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
            raise PreconditionError(f"eps_list должен строго убывать: {eps_list}")
        if not 0.0 <= self.a_exp < 0.5:
            raise PreconditionError(f"a_exp должен лежать в [0, 1/2), получено {self.a_exp}")
        if self.parallel_runs < 1:
            raise PreconditionError("parallel_runs должно быть >= 1")

    @classmethod
    def from_config(cls, template: RunConfig, eps_list: Sequence[float], parallel_runs: int = 1,
                    with_energy: bool = False) -> "SweepPlan":
        return cls(tuple(eps_list), template, template.a_exp, template.seed, parallel_runs, with_energy)


def t_max_reference(eps: float, eta0: float, a_exp: float) -> float:
    """1 / (4 (eta0 eps^a + eps^(1/2 - a))) с константой C1 = 1."""
    return 1.0 / (4.0 * (eta0 * eps ** a_exp + eps ** (0.5 - a_exp)))


def prepare_well_prepared(config: RunConfig) -> Tuple[KineticState, FluidState]:
    """
    rho = 1 + eta0 cos(2 pi x / l_x), u = 0, theta = theta_of_rho(rho), E из уравнения Гаусса,
    B = (b_const, 0, 0); F(0) - дискретный максвеллиан этих моментов.
    """
    sgrid = config.spatial_grid()
    vgrid = config.velocity_grid()
    fluid = density_perturbation_state(sgrid, config.eta0, mode=1, isentropic_theta=True, b_const=config.b_const)
    F = discrete_maxwellian(fluid.moments(), vgrid)
    kinetic = KineticState(F, fluid.em, 0.0)

    gauss_e, gauss_b = gauss_residual(sgrid, fluid.em, vgrid.integrate_v(F))
    if max(gauss_e, gauss_b) > TOL_GAUSS:
        logger.warning(f"Невязки Гаусса начальных данных: {gauss_e:.3e}, {gauss_b:.3e}")
    logger.debug(f"Хорошо подготовленные данные: eta0={config.eta0}, min F={float(np.min(F)):.3e}")
    return kinetic, fluid


def snapshot_errors(kin: KineticState, fluid: FluidTrajectory, config: RunConfig) -> Dict[str, float]:
    """Четыре нормы расхождения со снимком течения того же момента."""
    try:
        flu = fluid.at(kin.t)
    except KeyError as e:
        raise PreconditionError(f"Нет снимка течения для t={kin.t:.6f}") from e
    error = limit_error(kin, flu, config.velocity_grid(), config.spatial_grid(), config.mu_floor)
    return {"limit_l2": error.l2, "limit_linf_x": error.linf_x,
            "field_l2": error.field_l2, "field_linf": error.field_linf}


def energy_record(state: KineticState, fluid: FluidTrajectory, config: RunConfig, kernel: CollisionKernel,
                  nu: np.ndarray) -> Dict[str, float]:
    """E_N и D_N возмущения относительно снимка течения того же момента."""
    sgrid = config.spatial_grid()
    p = perturbation_from(state, fluid.at(state.t), config.eps, kernel, sgrid, config.tol_micro, config.mu_floor,
                          tol_solve=config.tol_solve, max_iter=config.max_iter)
    energy = energy_functionals(p, config, nu, kernel.vgrid, sgrid)
    return {"e_n": energy.e_n, "d_n": energy.d_n}


def reference_observer(fluid: FluidTrajectory, config: RunConfig,
                       kernel: Optional[CollisionKernel] = None) -> Observer:
    """Наблюдатель run_kinetic: нормы расхождения со снимком течения, с ядром - еще E_N и D_N."""
    nu = nu_weight(kernel, FluidMoments.constant()).values if kernel is not None else None

    def observer(state: KineticState) -> Dict[str, Any]:
        record: Dict[str, Any] = snapshot_errors(state, fluid, config)
        if kernel is not None:
            record.update(energy_record(state, fluid, config, kernel, nu))
        return record

    return observer


def compare(kinetic: KineticTrajectory, fluid: FluidTrajectory, config: RunConfig,
            kernel: Optional[CollisionKernel] = None) -> List[Dict[str, float]]:
    """
    Строки COMPARE_COLUMNS для каждого кинетического снимка.

    С ядром столкновений добавляются E_N, D_N и невязка Theta во внутренних
    снимках с равным шагом по обе стороны (config.eps - eps кинетического запуска).
    """
    observer = reference_observer(fluid, config, kernel)
    rows = [{"t": float(state.t), **observer(state)} for state in kinetic.snapshots]
    if kernel is None:
        return rows

    sgrid = config.spatial_grid()
    snapshots = kinetic.snapshots
    for index in range(1, len(snapshots) - 1):
        try:
            rows[index]["theta_residual"] = theta_residual_check(
                snapshots[index - 1:index + 2], config.eps, kernel, sgrid, config.tol_micro,
                tol_solve=config.tol_solve, max_iter=config.max_iter)
        except PreconditionError as e:
            logger.debug(f"Невязка Theta при t={snapshots[index].t:.4f} не считается: {e}")
    return rows


@dataclasses.dataclass
class SweepRun:
    eps: float
    status: str = "ok"
    records: List[Dict[str, Any]] = dataclasses.field(default_factory=list)
    sup: Dict[str, float] = dataclasses.field(default_factory=dict)
    t_max_reference: float = float('nan')
    scaling_audit: float = float('nan')

    @property
    def complete(self) -> bool:
        return self.status == "ok"

    def row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {"eps": self.eps, "status": self.status, "t_max_reference": self.t_max_reference,
                               "scaling_audit": self.scaling_audit, "steps": len(self.records)}
        row.update({f"sup_{key}": value for key, value in self.sup.items()})
        return row


@dataclasses.dataclass
class SweepReport:
    runs: List[SweepRun]
    fits: Dict[str, Optional[RateFit]]
    target: float
    halving_ratios: List[float]
    metadata: Dict[str, Any]

    @property
    def complete(self) -> bool:
        return all(run.complete for run in self.runs)

    def summary_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for norm, fit in self.fits.items():
            target = 1.0 if norm == "micro_norm" else self.target
            if fit is None:
                rows.append({"norm": norm, "target": target})
            else:
                rows.append({"norm": norm, "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
                             "target": target, "rejected": len(fit.rejected)})
        return rows


def scaling_audit(records: Sequence[Dict[str, Any]], eps: float, a_exp: float) -> float:
    """sup_t (E_N(t) + 1/2 int_0^t D_N) / (1/2 eps^(2 - 2a))."""
    if not records or "e_n" not in records[0]:
        return float('nan')
    t = np.array([r["t"] for r in records])
    e_n = np.array([r["e_n"] for r in records])
    d_n = np.array([r["d_n"] for r in records])
    dissipated = cumulative_trapezoid(d_n, t, initial=0.0)
    return float(np.max(e_n + 0.5 * dissipated) / (0.5 * eps ** (2.0 - 2.0 * a_exp)))


def _run_one(plan: SweepPlan, eps: float, init: KineticState, fluid: FluidTrajectory,
             kernel: CollisionKernel, progress: bool) -> SweepRun:
    config = plan.template.replace(eps=eps)
    run = SweepRun(eps, t_max_reference=t_max_reference(eps, config.eta0, plan.a_exp))
    observer = reference_observer(fluid, config, kernel if plan.with_energy else None)
    try:
        trajectory = run_kinetic(config, init, kernel=kernel, observer=observer, progress=progress)
    except KineticLimitError as e:
        run.status = f"aborted: {type(e).__name__}"
        trajectory = getattr(e, "trajectory", None)
        logger.error(f"eps={eps:g}: запуск прерван ({e}), отчет будет неполным")
    if trajectory is not None:
        run.records = list(trajectory.records)
    if run.records:
        for key in RATE_NORMS + ("micro_norm",):
            run.sup[key] = float(max(r[key] for r in run.records))
        run.scaling_audit = scaling_audit(run.records, eps, plan.a_exp)
    return run


def _fit(runs: Sequence[SweepRun], key: str) -> Optional[RateFit]:
    pairs = [(run.eps, run.sup[key]) for run in runs if run.complete and key in run.sup]
    try:
        return fit_rate(pairs)
    except PreconditionError as e:
        logger.warning(f"Порядок по {key} не оценен: {e}")
        return None


def sweep_eps(plan: SweepPlan, kernel: Optional[CollisionKernel] = None, progress: bool = False) -> SweepReport:
    """Один расчет течения, кинетический запуск на каждое eps, sup по t и подгонка порядка."""
    template = plan.template
    kernel = kernel or build_kernel(template)
    init, fluid_init = prepare_well_prepared(template)
    fluid = run_fluid(template, fluid_init, progress=progress)
    logger.info(f"Сканирование eps={list(plan.eps_list)}, a={plan.a_exp}, параллельно {plan.parallel_runs}")

    if plan.parallel_runs > 1:
        with ThreadPoolExecutor(max_workers=plan.parallel_runs) as pool:
            futures = [pool.submit(_run_one, plan, eps, init, fluid, kernel, False) for eps in plan.eps_list]
            runs = [future.result() for future in futures]
    else:
        runs = [_run_one(plan, eps, init, fluid, kernel, progress) for eps in plan.eps_list]

    fits = {key: _fit(runs, key) for key in RATE_NORMS + ("micro_norm",)}
    halving = [
        later.sup["micro_norm"] / earlier.sup["micro_norm"]
        for earlier, later in zip(runs, runs[1:])
        if "micro_norm" in earlier.sup and "micro_norm" in later.sup and earlier.sup["micro_norm"] > 0
    ]
    metadata = report_metadata(template, a_exp=plan.a_exp, seed=plan.seed, t_max_label=T_MAX_LABEL)
    report = SweepReport(runs, fits, 1.0 - plan.a_exp, halving, metadata)
    report.metadata["complete"] = report.complete
    if not report.complete:
        logger.warning("Сканирование неполное: часть запусков прервана")
    main_fit = fits["limit_l2"]
    if main_fit is not None:
        logger.info(f"Порядок по eps: {main_fit.slope:.4f} (цель {report.target:.4f}), r2={main_fit.r2:.4f}")
    return report


def write_sweep_reports(report: SweepReport, out_dir: str):
    """sweep.csv, sweep_summary.csv и временные ряды по каждому eps."""
    write_csv(os.path.join(out_dir, "sweep.csv"), SWEEP_COLUMNS, [run.row() for run in report.runs], report.metadata)
    summary_meta = dict(report.metadata)
    summary_meta["micro_halving_ratios"] = " ".join(f"{ratio:.6e}" for ratio in report.halving_ratios)
    write_csv(os.path.join(out_dir, "sweep_summary.csv"), SWEEP_SUMMARY_COLUMNS, report.summary_rows(), summary_meta)
    for run in report.runs:
        meta = dict(report.metadata, eps=run.eps, status=run.status)
        write_csv(os.path.join(out_dir, f"timeseries_eps{run.eps:g}.csv"), TIME_SERIES_COLUMNS, run.records, meta)


def write_compare_report(rows: Sequence[Dict[str, float]], config: RunConfig, path: str):
    write_csv(path, COMPARE_COLUMNS, rows, report_metadata(config))
