"""
Тесты кинетического решателя: CFL, сохранение, релаксация к максвеллиану, уравнение Гаусса.
"""

import numpy as np
import pytest

from kinetic_limit_py.core.collision import CollisionKernel, entropy_production
from kinetic_limit_py.core.grids import SpatialGrid, VelocityGrid
from kinetic_limit_py.core.maxwellian import (FluidMoments, discrete_maxwellian, eval_maxwellian, macro_micro_split,
                                              moments_from_f)
from kinetic_limit_py.errors import CFLViolationError
from kinetic_limit_py.harness.env_config import RunConfig
from kinetic_limit_py.harness.sweep import prepare_well_prepared
from kinetic_limit_py.solvers.em_fields import EMField, field_energy
from kinetic_limit_py.solvers.kinetic_solver import KineticSolver, KineticState, imex_step, run_kinetic, vmb_rhs


def homogeneous(F_cell: np.ndarray, n_x: int) -> np.ndarray:
    return np.broadcast_to(F_cell, (n_x,) + F_cell.shape).copy()


def counter_beams(vgrid, speed: float = 0.5, theta: float = 1.0) -> np.ndarray:
    """1/2 M[1, (-speed, 0, 0), theta] + 1/2 M[1, (speed, 0, 0), theta]."""
    return 0.5 * sum(eval_maxwellian(FluidMoments.constant(1.0, (sign * speed, 0.0, 0.0), theta), vgrid)
                     for sign in (-1.0, 1.0))


def micro_fraction(F: np.ndarray, vgrid) -> float:
    _, G, _ = macro_micro_split(F, vgrid, tol_micro=np.inf)
    return float(np.linalg.norm(G.values) / np.linalg.norm(F))


@pytest.fixture
def solver(vgrid8, fast8):
    return KineticSolver(vgrid8, SpatialGrid(4, 1.0), fast8, eps=0.1)


class TestTimeStep:

    def test_admissible_dt(self, solver):
        assert solver.admissible_dt() == pytest.approx(0.5 * 0.25 / 5.0)

    def test_cfl_violation(self, solver):
        with pytest.raises(CFLViolationError) as info:
            solver.check_cfl(0.03)
        assert info.value.exit_code == 2
        assert info.value.admissible_dt == pytest.approx(0.025)

    @pytest.mark.parametrize("eps", [0.0, -0.1])
    def test_nonpositive_eps(self, vgrid8, fast8, eps):
        with pytest.raises(ValueError):
            KineticSolver(vgrid8, SpatialGrid(4, 1.0), fast8, eps=eps)


def test_rhs_at_global_equilibrium(solver, vgrid8):
    F = homogeneous(vgrid8.global_maxwellian(), 4)
    state = KineticState(F, EMField.zeros(4), 0.0)
    derivative = vmb_rhs(solver, state)
    assert derivative.t == 1.0
    np.testing.assert_allclose(derivative.F, solver.collide(F) / solver.eps, atol=1e-14)
    np.testing.assert_allclose(derivative.em.E, 0.0, atol=1e-14)
    np.testing.assert_allclose(derivative.em.B, 0.0)


def test_homogeneous_relaxation(fast8, vgrid8):
    """Однородная смесь двух пучков релаксирует к максвеллиану с теми же моментами."""
    config = RunConfig(n_v=8, l_v=5.0, n_x=4, l_x=1.0, eps=0.01, dt=0.025, t_end=0.5, snapshot_every=20,
                       tol_quad=1e-4)
    bumps = (eval_maxwellian(FluidMoments.constant(0.5, (-1.5, 0.0, 0.0), 0.7), vgrid8)
             + eval_maxwellian(FluidMoments.constant(0.5, (1.5, 0.0, 0.0), 0.7), vgrid8))
    F0 = homogeneous(bumps, 4)
    init = KineticState(F0, EMField.zeros(4), 0.0)
    trajectory = run_kinetic(config, init, kernel=fast8)
    final = trajectory.final.F

    m0 = moments_from_f(F0, vgrid8)
    np.testing.assert_allclose(moments_from_f(final, vgrid8).conserved(), m0.conserved(), atol=1e-10)

    M = discrete_maxwellian(m0, vgrid8)
    solver = KineticSolver.from_config(config, fast8)
    beta = solver.penalization(M)
    equilibrium_defect = np.linalg.norm(fast8.q(M[0], M[0]))
    for cell in range(4):
        distance = np.linalg.norm(final[cell] - M[cell])
        assert distance <= 0.05 * np.linalg.norm(F0[cell] - M[cell]) + 3.0 * equilibrium_defect / beta

    first, last = trajectory.records[0], trajectory.records[-1]
    assert last["micro_norm"] < first["micro_norm"]
    assert last["mass"] == pytest.approx(first["mass"], rel=1e-12)
    assert last["energy"] == pytest.approx(first["energy"], rel=1e-10)


def test_equilibrium_stays_put(fast8, vgrid8):
    config = RunConfig(n_v=8, l_v=5.0, n_x=4, l_x=1.0, eps=0.05, dt=0.02, t_end=0.1, snapshot_every=5,
                       tol_quad=1e-4)
    M = homogeneous(discrete_maxwellian(FluidMoments.constant(), vgrid8), 4)
    trajectory = run_kinetic(config, KineticState(M, EMField.zeros(4), 0.0), kernel=fast8)
    solver = KineticSolver.from_config(config, fast8)
    beta = solver.penalization(M)
    bound = 10.0 * np.linalg.norm(fast8.q(M[0], M[0])) / beta
    for cell in range(4):
        assert np.linalg.norm(trajectory.final.F[cell] - M[cell]) <= bound


def test_gauss_constraint_is_transported(small_config, fast8):
    init, _ = prepare_well_prepared(small_config)
    trajectory = run_kinetic(small_config, init, kernel=fast8)
    assert len(trajectory.snapshots) == 5
    for record in trajectory.records:
        assert record["gauss_e"] <= 1e-8
        assert record["gauss_b"] <= 1e-12
    masses = [record["mass"] for record in trajectory.records]
    assert max(masses) - min(masses) <= 1e-12 * masses[0]


def test_run_rejects_large_step(small_config, fast8):
    init, _ = prepare_well_prepared(small_config)
    with pytest.raises(CFLViolationError):
        run_kinetic(small_config.replace(dt=0.05), init, kernel=fast8)


def test_single_step_function(small_config, fast8):
    init, _ = prepare_well_prepared(small_config)
    solver = KineticSolver.from_config(small_config, fast8)
    state = imex_step(solver, init, small_config.dt)
    assert state.t == pytest.approx(small_config.dt)
    before = solver.observables(init)
    after = solver.observables(state)
    assert after["mass"] == pytest.approx(before["mass"], rel=1e-12)
    with pytest.raises(CFLViolationError):
        imex_step(solver, init, 0.05)


class TestForce:
    """Моменты силового члена (E + v x B) . grad_v F."""

    @pytest.fixture
    def setup(self, vgrid12, fast12):
        solver = KineticSolver(vgrid12, SpatialGrid(4, 1.0), fast12, eps=0.1)
        F = homogeneous(eval_maxwellian(FluidMoments.constant(1.0, (0.3, 0.0, 0.0), 1.5), vgrid12), 4)
        E = np.tile([0.2, 0.1, 0.0], (4, 1))
        B = np.tile([0.0, 0.0, 0.5], (4, 1))
        return solver, F, EMField(E, B)

    def test_mass_is_not_created(self, setup, vgrid12):
        solver, F, em = setup
        np.testing.assert_allclose(vgrid12.integrate_v(solver.force(F, em)), 0.0, atol=1e-8)

    def test_energy_moment_is_work_of_e(self, setup, vgrid12):
        solver, F, em = setup
        work = vgrid12.inner(solver.force(F, em), 0.5 * vgrid12.v_sq)
        expected = -np.sum(em.E * solver.current(F), axis=-1)
        np.testing.assert_allclose(work, expected, rtol=1e-4, atol=1e-8)
        np.testing.assert_allclose(expected, -0.06, rtol=1e-2)


class TestStiffLimit:
    """eps << dt: один шаг IMEX проектирует F на локальный максвеллиан."""

    def test_single_step_contracts_to_maxwellian(self, vgrid8, fast8):
        solver = KineticSolver(vgrid8, SpatialGrid(4, 1.0), fast8, eps=1e-8)
        F0 = homogeneous(counter_beams(vgrid8), 4)
        state = imex_step(solver, KineticState(F0, EMField.zeros(4), 0.0), 0.02)

        before, after = micro_fraction(F0, vgrid8), micro_fraction(state.F, vgrid8)
        assert after <= before
        assert after <= 1e-3
        np.testing.assert_allclose(moments_from_f(state.F, vgrid8).conserved(),
                                   moments_from_f(F0, vgrid8).conserved(), atol=1e-10)


@pytest.mark.slow
def test_counter_beams_relax_with_dissipated_entropy():
    """Пучки +-0.5, theta = 1, eps = 0.05: к t = 20 eps расстояние до M не больше 1e-4."""
    vgrid = VelocityGrid(16, 6.0)
    kernel = CollisionKernel(vgrid, mode="fast")
    solver = KineticSolver(vgrid, SpatialGrid(4, 1.0), kernel, eps=0.05)
    config = RunConfig(n_v=16, l_v=6.0, n_x=4, l_x=1.0, eps=0.05, dt=0.02, t_end=1.0, snapshot_every=25)
    F0 = homogeneous(counter_beams(vgrid), 4)
    trajectory = run_kinetic(config, KineticState(F0, EMField.zeros(4), 0.0), solver=solver)

    m0 = moments_from_f(F0, vgrid)
    for state in trajectory.snapshots:
        np.testing.assert_allclose(moments_from_f(state.F, vgrid).conserved(), m0.conserved(), atol=1e-10)
        assert entropy_production(kernel, state.F[0]) <= 0.0

    M = discrete_maxwellian(m0, vgrid)
    norm = np.sqrt(vgrid.weight)
    defect = norm * np.linalg.norm(kernel.q(M[0], M[0])) / solver.penalization(M)
    for cell in range(4):
        assert norm * np.linalg.norm(trajectory.final.F[cell] - M[cell]) <= 1e-4 + 3.0 * defect


def test_total_energy_with_fields(small_config, fast8):
    init, _ = prepare_well_prepared(small_config)
    assert field_energy(small_config.spatial_grid(), init.em) > 0.0
    trajectory = run_kinetic(small_config, init, kernel=fast8)
    energies = [record["energy"] for record in trajectory.records]
    assert max(energies) - min(energies) <= 1e-6 * abs(energies[0])


def test_negative_values_are_reported(solver, vgrid8, caplog):
    F = homogeneous(discrete_maxwellian(FluidMoments.constant(), vgrid8), 4)
    F[:, 0, 0, 0] = -1e-2 * F.max()
    with caplog.at_level("WARNING", logger="KineticSolver"):
        first = solver.collision_step(F, 1e-4)
        solver.collision_step(first, 1e-4)
    warnings = [record for record in caplog.records if "отрицательные" in record.getMessage()]
    assert len(warnings) == 1
    assert solver.min_f_seen < 0.0


def test_nonnegative_step_is_silent(solver, vgrid8, caplog):
    F = homogeneous(discrete_maxwellian(FluidMoments.constant(), vgrid8), 4)
    with caplog.at_level("WARNING", logger="KineticSolver"):
        solver.collision_step(F, 1e-4)
    assert "отрицательные" not in caplog.text
    assert solver.min_f_seen == 0.0
