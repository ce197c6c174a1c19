#!/usr/bin/env python3
"""
CLI интерфейс для Kinetic Limit Py

Подкоманды:
- transport-coeffs: mu(theta), kappa(theta) на решетке моментов
- burnett-check: структурные тождества функций Барнетта
- spectrum: коэрцитивность линеаризованного оператора
- run-kinetic / run-fluid: траектории кинетической и предельной систем
- compare: расхождение сохраненных снимков
- sweep-eps: измерение порядка сходимости по eps
"""

import argparse
import glob
import logging
import os
import sys
from itertools import product
from typing import List, Optional

from colorama import Fore, Style, init

from .core.burnett import burnett_identity_report, burnett_solve, transport_coeffs
from .core.collision import CollisionKernel, build_kernel
from .core.linearized import coercivity_gap
from .core.maxwellian import FluidMoments
from .errors import ConfigError, ConsistencyError, KineticLimitError
from .harness.env_config import EnvConfig, RunConfig, log_configuration
from .harness.reports import (COERCIVITY_COLUMNS, FLUID_SERIES_COLUMNS, IDENTITY_COLUMNS, TIME_SERIES_COLUMNS,
                              TRANSPORT_COLUMNS, coercivity_row, identity_rows, report_metadata, transport_row,
                              write_csv)
from .harness.snapshot_io import load_fluid, load_kernel, load_kinetic, save_fluid, save_kernel, save_kinetic
from .harness.sweep import (SweepPlan, compare, prepare_well_prepared, reference_observer, sweep_eps,
                            write_compare_report, write_sweep_reports)
from .solvers.fluid_solver import FluidTrajectory, run_fluid
from .solvers.kinetic_solver import KineticSolver, KineticTrajectory, run_kinetic

logger = logging.getLogger('CLI')

# Решетка моментов для проверок функций Барнетта
LATTICE_RHO = (1.0, 2.0)
LATTICE_U = ((0.0, 0.0, 0.0), (0.1, 0.0, 0.0))
LATTICE_THETA = (1.0, 1.5, 2.0)


def create_parser() -> argparse.ArgumentParser:
    """Создает парсер аргументов командной строки"""
    parser = argparse.ArgumentParser(
        prog="kinetic-limit",
        description="Kinetic-to-fluid limit toolkit for the Vlasov-Maxwell-Boltzmann system",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Примеры использования:
  kinetic-limit transport-coeffs --theta 1.0 1.5 2.0
  kinetic-limit --config run.conf run-kinetic --eps 0.05
  kinetic-limit --threads 8 --out results sweep-eps --eps-list 0.2 0.1 0.05 0.025
        """
    )
    parser.add_argument('--config', default=None, help='Файл конфигурации key=value')
    parser.add_argument('--out', default='results', help='Каталог для отчетов и снимков (по умолчанию: results)')
    parser.add_argument('--threads', type=int, default=None, help='Потоки FFT ядра столкновений')
    parser.add_argument('--seed', type=int, default=None, help='Seed случайных выборок')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='Отладочный вывод')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='Только предупреждения, без прогресса')

    commands = parser.add_subparsers(dest='command', required=True)

    transport = commands.add_parser('transport-coeffs', help='Вязкость и теплопроводность')
    transport.add_argument('--theta', type=float, nargs='+', default=list(LATTICE_THETA), help='Температуры')
    transport.add_argument('--rho', type=float, default=1.0, help='Плотность (по умолчанию: 1)')

    commands.add_parser('burnett-check', help='Структурные тождества функций Барнетта на решетке моментов')

    spectrum = commands.add_parser('spectrum', help='Коэрцитивность L на микро-подпространстве')
    spectrum.add_argument('--samples', type=int, default=6, help='Число выборок для подгонки (c2, C)')

    for name, help_text in (('run-kinetic', 'Кинетический запуск'), ('run-fluid', 'Решение Эйлера-Максвелла')):
        run = commands.add_parser(name, help=help_text)
        run.add_argument('--init', default=None, help='Начальный снимок (иначе хорошо подготовленные данные)')
        run.add_argument('--save-snapshots', action='store_true', help='Сохранять каждый снимок траектории')
        if name == 'run-kinetic':
            run.add_argument('--eps', type=float, default=None, help='Число Кнудсена (перекрывает конфигурацию)')
            run.add_argument('--kernel-cache', default=None, help='Файл таблиц ядра (читается или создается)')
            run.add_argument('--fluid', nargs='+', default=None,
                             help='Снимки течения для E_N, D_N (иначе решение Эйлера-Максвелла считается заново)')
        else:
            run.add_argument('--isentropic', action='store_true', help='Изэнтропическая система p = rho^(5/3)')

    comparison = commands.add_parser('compare', help='Расхождение кинетических и предельных снимков')
    comparison.add_argument('--kinetic', nargs='+', required=True, help='Кинетические снимки (допускаются маски)')
    comparison.add_argument('--fluid', nargs='+', required=True, help='Снимки течения (допускаются маски)')
    comparison.add_argument('--with-energy', action='store_true', help='E_N, D_N и невязка Theta (строит ядро)')

    sweep = commands.add_parser('sweep-eps', help='Порядок сходимости по eps')
    sweep.add_argument('--eps-list', type=float, nargs='+', default=None, help='Убывающий список eps')
    sweep.add_argument('--parallel', type=int, default=None, help='Число одновременных запусков')
    sweep.add_argument('--with-energy', action='store_true', help='Считать E_N, D_N в каждом снимке')
    return parser


def setup_logging(verbose: bool, quiet: bool):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format='%(message)s')


def status(message: str, color: str = Fore.GREEN):
    print(f"{color}{message}{Style.RESET_ALL}")


def load_settings(args) -> EnvConfig:
    settings = EnvConfig(args.config)
    settings.update('threads', args.threads)
    settings.update('seed', args.seed)
    if getattr(args, 'eps', None) is not None:
        settings.update('eps', args.eps)
    return settings


def _kernel(config: RunConfig, cache: Optional[str] = None) -> CollisionKernel:
    if cache and os.path.exists(cache):
        return load_kernel(cache, config.velocity_grid(), threads=config.threads)
    kernel = build_kernel(config)
    if cache:
        save_kernel(cache, kernel)
    return kernel


def _expand(patterns: List[str]) -> List[str]:
    paths: List[str] = []
    for pattern in patterns:
        paths.extend(sorted(glob.glob(pattern)) or [pattern])
    return paths


def cmd_transport_coeffs(args, config: RunConfig) -> int:
    kernel = _kernel(config)
    options = dict(tol_solve=config.tol_solve, max_iter=config.max_iter, mu_floor=config.mu_floor)
    rows = []
    for theta in args.theta:
        m = FluidMoments.constant(rho=args.rho, theta=theta)
        coeffs = transport_coeffs(kernel, m, **options)
        rows.append(transport_row(m, coeffs))
        message = f"theta={theta:g}: mu={coeffs.mu_theta:.10e}, kappa={coeffs.kappa_theta:.10e}"
        if coeffs.consistent:
            status(message)
        else:
            status(f"{message} (расхождение представителей: mu {coeffs.mu_spread:.2e}, "
                   f"kappa {coeffs.kappa_spread:.2e})", Fore.YELLOW)
    consistent = all(row["consistent"] for row in rows)
    write_csv(os.path.join(args.out, "transport.csv"), TRANSPORT_COLUMNS, rows,
              report_metadata(config, consistent=consistent))
    return 0


def cmd_burnett_check(args, config: RunConfig) -> int:
    kernel = _kernel(config)
    options = dict(tol_solve=config.tol_solve, max_iter=config.max_iter, mu_floor=config.mu_floor)
    rows = []
    failed = 0
    for rho, u, theta in product(LATTICE_RHO, LATTICE_U, LATTICE_THETA):
        m = FluidMoments.constant(rho=rho, u=u, theta=theta)
        entries = burnett_identity_report(burnett_solve(kernel, m, **options), kernel.vgrid)
        rows.extend(identity_rows(m, entries))
        bad = [entry.bullet for entry in entries if not entry.passed]
        failed += len(bad)
        if bad:
            status(f"rho={rho:g}, u1={u[0]:g}, theta={theta:g}: не выполнены пункты {bad}", Fore.YELLOW)
        else:
            status(f"rho={rho:g}, u1={u[0]:g}, theta={theta:g}: все пункты выполнены")
    write_csv(os.path.join(args.out, "burnett_identities.csv"), IDENTITY_COLUMNS, rows, report_metadata(config))
    if failed:
        raise ConsistencyError(f"Не выполнено {failed} проверок тождеств Барнетта, см. burnett_identities.csv")
    return 0


def cmd_spectrum(args, config: RunConfig) -> int:
    kernel = build_kernel(config, mode="direct")
    report = coercivity_gap(kernel, mu_floor=config.mu_floor, n_samples=args.samples, seed=config.seed,
                            progress=not args.quiet)
    status(f"c1={report.c1:.6e}, c2={report.c2:.6e}, C={report.c_const:.6e} (размерность {report.dimension})")
    write_csv(os.path.join(args.out, "coercivity.csv"), COERCIVITY_COLUMNS,
              [coercivity_row(config.n_v, report)], report_metadata(config))
    return 0


def cmd_run_kinetic(args, config: RunConfig) -> int:
    kernel = _kernel(config, args.kernel_cache)
    vgrid, sgrid = kernel.vgrid, config.spatial_grid()
    solver = KineticSolver.from_config(config, kernel)
    solver.check_cfl(config.dt)
    fluid: Optional[FluidTrajectory] = None
    if args.fluid:
        fluid = FluidTrajectory([load_fluid(path, sgrid) for path in _expand(args.fluid)])
    if args.init:
        init, saved_eps = load_kinetic(args.init, vgrid, sgrid)
        if saved_eps != config.eps:
            logger.warning(f"Снимок записан при eps={saved_eps}, запуск с eps={config.eps}")
        if fluid is None:
            logger.warning("Начальный снимок без --fluid: E_N, D_N и нормы расхождения не вычисляются")
    else:
        init, fluid_init = prepare_well_prepared(config)
        if fluid is None:
            fluid = run_fluid(config, fluid_init, progress=False)
    observer = reference_observer(fluid, config, kernel) if fluid is not None else None

    def on_snapshot(state):
        if args.save_snapshots:
            save_kinetic(os.path.join(args.out, f"kinetic_t{state.t:.6f}.snap"), state, vgrid, sgrid, config.eps)

    trajectory: Optional[KineticTrajectory] = None
    try:
        trajectory = run_kinetic(config, init, observer=observer, on_snapshot=on_snapshot, solver=solver,
                                 progress=not args.quiet)
    except KineticLimitError as e:
        trajectory = getattr(e, 'trajectory', None)
        raise
    finally:
        if trajectory is not None and trajectory.snapshots:
            meta = report_metadata(config, eps=config.eps, aborted=trajectory.aborted or "")
            write_csv(os.path.join(args.out, "kinetic_timeseries.csv"), TIME_SERIES_COLUMNS, trajectory.records, meta)
            save_kinetic(os.path.join(args.out, "kinetic_final.snap"), trajectory.final, vgrid, sgrid, config.eps)
    status(f"Кинетический запуск завершен: t={trajectory.final.t:.4f}, снимков {len(trajectory.snapshots)}")
    return 0


def cmd_run_fluid(args, config: RunConfig) -> int:
    sgrid = config.spatial_grid()
    if args.init:
        init = load_fluid(args.init, sgrid)
    else:
        _, init = prepare_well_prepared(config)
    trajectory = run_fluid(config, init, isentropic=args.isentropic, progress=not args.quiet)
    for state in trajectory.snapshots if args.save_snapshots else ():
        save_fluid(os.path.join(args.out, f"fluid_t{state.t:.6f}.snap"), state, sgrid, args.isentropic)
    save_fluid(os.path.join(args.out, "fluid_final.snap"), trajectory.final, sgrid, args.isentropic)
    write_csv(os.path.join(args.out, "fluid_timeseries.csv"), FLUID_SERIES_COLUMNS, trajectory.records,
              report_metadata(config, isentropic=args.isentropic))
    status(f"Решение Эйлера-Максвелла завершено: t={trajectory.final.t:.4f}")
    return 0


def cmd_compare(args, config: RunConfig) -> int:
    vgrid, sgrid = config.velocity_grid(), config.spatial_grid()
    loaded = [load_kinetic(path, vgrid, sgrid) for path in _expand(args.kinetic)]
    kinetic = KineticTrajectory([state for state, _ in loaded])
    fluid = FluidTrajectory([load_fluid(path, sgrid) for path in _expand(args.fluid)])
    kinetic.snapshots.sort(key=lambda state: state.t)
    saved_eps = {eps for _, eps in loaded}
    if len(saved_eps) > 1:
        raise ConfigError(f"Кинетические снимки записаны при разных eps: {sorted(saved_eps)}")
    config = config.replace(eps=saved_eps.pop())
    kernel = _kernel(config) if args.with_energy else None
    rows = compare(kinetic, fluid, config, kernel=kernel)
    write_compare_report(rows, config, os.path.join(args.out, "compare.csv"))
    worst = max(rows, key=lambda row: row["limit_l2"])
    status(f"sup_t ||F - M_bar||: {worst['limit_l2']:.6e} при t={worst['t']:.4f}")
    return 0


def cmd_sweep_eps(args, settings: EnvConfig, config: RunConfig) -> int:
    eps_list, parallel_runs = settings.sweep_settings()
    plan = SweepPlan.from_config(config, args.eps_list or eps_list, args.parallel or parallel_runs,
                                 with_energy=args.with_energy)
    report = sweep_eps(plan, progress=not args.quiet)
    write_sweep_reports(report, args.out)
    fit = report.fits["limit_l2"]
    if fit is not None:
        status(f"Порядок по eps: {fit.slope:.4f} (цель {report.target:.4f}), r2={fit.r2:.4f}")
    if not report.complete:
        status("Сканирование неполное: часть запусков прервана", Fore.YELLOW)
        return 3
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Основная точка входа для kinetic-limit команды"""
    init()
    args = create_parser().parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        settings = load_settings(args)
        config = settings.run_config()
        log_configuration(config)
        if args.command == 'transport-coeffs':
            code = cmd_transport_coeffs(args, config)
        elif args.command == 'burnett-check':
            code = cmd_burnett_check(args, config)
        elif args.command == 'spectrum':
            code = cmd_spectrum(args, config)
        elif args.command == 'run-kinetic':
            code = cmd_run_kinetic(args, config)
        elif args.command == 'run-fluid':
            code = cmd_run_fluid(args, config)
        elif args.command == 'compare':
            code = cmd_compare(args, config)
        else:
            code = cmd_sweep_eps(args, settings, config)
    except KineticLimitError as e:
        status(f"❌ {type(e).__name__}: {e}", Fore.RED)
        return e.exit_code
    except KeyboardInterrupt:
        status("Прервано пользователем", Fore.YELLOW)
        return 130
    return code


if __name__ == '__main__':
    sys.exit(main())
