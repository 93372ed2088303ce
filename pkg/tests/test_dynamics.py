"""Propagator, barrier, and detector-kick behavior."""

import math

import numpy as np
import pytest

from tsmu.dynamics import (
    DetectorCoupling,
    PacketSpec,
    PotentialField,
    Schedule,
    build_propagator,
    detector_kick,
    gaussian_packet,
    half_space_windows,
    propagate,
    run_tsmu,
    steps_between,
    two_slit_potential,
)
from tsmu.errors import ConfigError, ScheduleError
from tsmu.grid import (
    GridSpec,
    WaveFunction,
    apply_projector,
    inner_product,
    linear_combine,
    make_projector_family,
    norm_sq,
)


def _free_potential(grid):
    return PotentialField(np.zeros((grid.nx, grid.ny)), 1.0, None, (), None)


def _random_state(grid, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    a /= math.sqrt(float(np.vdot(a, a).real) * grid.cell_area)
    return WaveFunction(grid, a)


class TestPropagatorPlan:
    def test_box_eigenmode_acquires_closed_form_phase(self):
        # Dirichlet eigenvector sin(p pi (i+1)/(nx+1)) with the discrete
        # Laplacian eigenvalue E = (1 - cos(p pi/(nx+1)))/dx^2 picks up the
        # Cayley phase (1 - i dt E/2)/(1 + i dt E/2) per direction.
        grid = GridSpec(64, 48, 1.0, 1.0)
        plan = build_propagator(grid, _free_potential(grid), 1e-4)
        p, q = 3, 5
        i, j = np.arange(grid.nx), np.arange(grid.ny)
        mode = (
            np.sin(p * np.pi * (i + 1) / (grid.nx + 1))[:, None]
            * np.sin(q * np.pi * (j + 1) / (grid.ny + 1))[None, :]
        )
        amps = np.zeros(grid.shape, dtype=np.complex128)
        amps[:, :, 0] = mode
        out = propagate(plan, WaveFunction(grid, amps), 0.0, plan.dt)
        ex = (1 - np.cos(p * np.pi / (grid.nx + 1))) / grid.dx**2
        ey = (1 - np.cos(q * np.pi / (grid.ny + 1))) / grid.dy**2
        lam = (1 - 0.5j * plan.dt * ex) / (1 + 0.5j * plan.dt * ex)
        lam *= (1 - 0.5j * plan.dt * ey) / (1 + 0.5j * plan.dt * ey)
        assert np.max(np.abs(out.amps[:, :, 0] - lam * mode)) < 1e-13

    def test_single_step_preserves_norm(self):
        grid = GridSpec(96, 96, 1.0, 1.0)
        pot = two_slit_potential(grid, 0.35, 0.03, 9e4, 0.5, 0.25, 0.06)
        plan = build_propagator(grid, pot, 2e-5)
        psi = _random_state(grid, 5)
        out = propagate(plan, psi, 0.0, plan.dt)
        assert abs(norm_sq(out) - norm_sq(psi)) <= 1e-12

    def test_dt_composition_converges_to_continuum(self):
        # stepping twice with dt only equals one 2*dt step in the continuum
        # limit; the gap at this resolution is frozen and must shrink with dt
        grid = GridSpec(96, 96, 1.0, 1.0)
        pot = two_slit_potential(grid, 0.35, 0.03, 50 * (60.0**2 / 2), 0.5, 0.25, 0.06)
        psi0 = gaussian_packet(grid, PacketSpec(0.15, 0.04, 60.0))

        def gap(dt):
            fine = build_propagator(grid, pot, dt)
            coarse = build_propagator(grid, pot, 2 * dt)
            a = propagate(fine, propagate(fine, psi0, 0.0, dt), dt, 2 * dt)
            b = propagate(coarse, psi0, 0.0, 2 * dt)
            return norm_sq(linear_combine([(1.0, a), (-1.0, b)])) ** 0.5

        base = gap(1.4e-5)
        assert base < 5e-4
        assert gap(0.7e-5) < base / 3

    def test_free_gaussian_spreading_matches_analytic_width(self):
        # 1-D spreading law sigma(t) = sigma0 sqrt(1 + (t/(2 sigma0^2))^2)
        grid = GridSpec(256, 8, 1.0, 1.0)
        plan = build_propagator(grid, _free_potential(grid), 1e-5)
        sigma0, t = 0.05, 0.004
        psi = gaussian_packet(grid, PacketSpec(0.35, sigma0, 30.0))
        out = propagate(plan, psi, 0.0, 0.004)
        x = grid.x_centers()
        weights = np.sum(np.abs(out.amps) ** 2, axis=(1, 2))
        weights /= weights.sum()
        mean = float(np.sum(x * weights))
        sigma_t = math.sqrt(float(np.sum((x - mean) ** 2 * weights)))
        expected = sigma0 * math.sqrt(1 + (t / (2 * sigma0**2)) ** 2)
        assert sigma_t == pytest.approx(expected, rel=0.01)

    def test_solid_screen_blocks_at_default_barrier_height(self):
        # validates the default V0 = 50 * k^2/2: transmitted probability
        # beyond a slitless screen stays under 1e-3
        grid = GridSpec(256, 16, 1.0, 1.0)
        k_x = 150.0
        pot = two_slit_potential(grid, 0.5, 0.012, 50 * (k_x**2 / 2), 0.5, 0.25, 0.0)
        plan = build_propagator(grid, pot, 2e-6)
        psi = gaussian_packet(grid, PacketSpec(0.25, 0.05, k_x))
        n = steps_between(0.0, 0.0032, plan.dt)
        out = propagate(plan, psi, 0.0, n * plan.dt)
        beyond = grid.x_centers() > 0.5 + 0.012
        transmitted = float(np.sum(np.abs(out.amps[beyond]) ** 2)) * grid.cell_area
        assert transmitted < 1e-3

    def test_propagate_zero_steps_is_identity(self):
        grid = GridSpec(16, 16, 1.0, 1.0)
        plan = build_propagator(grid, _free_potential(grid), 1e-4)
        psi = _random_state(grid, 9)
        out = propagate(plan, psi, 0.5, 0.5)
        assert np.array_equal(out.amps, psi.amps)

    def test_non_multiple_interval_rejected(self):
        grid = GridSpec(16, 16, 1.0, 1.0)
        plan = build_propagator(grid, _free_potential(grid), 1e-4)
        with pytest.raises(ScheduleError):
            propagate(plan, _random_state(grid), 0.0, 2.5e-4)
        with pytest.raises(ScheduleError):
            propagate(plan, _random_state(grid), 1e-4, 0.0)

    def test_detector_index_conserved(self):
        # H is m-diagonal: evolving then projecting a level equals
        # projecting then evolving, bit for bit
        grid = GridSpec(32, 32, 1.0, 1.0)
        pot = two_slit_potential(grid, 0.5, 0.1, 1e4, 0.5, 0.4, 0.1)
        plan = build_propagator(grid, pot, 1e-5)
        psi = _random_state(grid, 10)
        level = make_projector_family(grid, "detector-levels")[1]
        a = apply_projector(level, propagate(plan, psi, 0.0, 20 * plan.dt))
        b = propagate(plan, apply_projector(level, psi), 0.0, 20 * plan.dt)
        assert np.array_equal(a.amps, b.amps)

    def test_jit_and_numpy_paths_agree(self):
        grid = GridSpec(48, 40, 1.0, 1.0)
        pot = two_slit_potential(grid, 0.5, 0.1, 1e5, 0.5, 0.4, 0.1)
        psi = _random_state(grid, 11)
        fast = build_propagator(grid, pot, 1e-5)
        slow = build_propagator(grid, pot, 1e-5)
        slow._step = __import__("tsmu.dynamics", fromlist=["_adi_step_numpy"])._adi_step_numpy
        a = propagate(fast, psi, 0.0, 50e-5)
        b = propagate(slow, psi, 0.0, 50e-5)
        assert np.max(np.abs(a.amps - b.amps)) < 1e-12

    def test_mirrored_apertures_mirror_the_arrival_density(self):
        # mirror the whole slit/window geometry about the box midline and
        # compare |psi|^2 flipped in y
        grid = GridSpec(64, 64, 1.0, 1.0)
        k_x = 40.0

        def run(center_y):
            pot = two_slit_potential(grid, 0.4, 0.05, 50 * (k_x**2 / 2), center_y, 0.3, 0.08)
            plan = build_propagator(grid, pot, 2e-5)
            up, lo = half_space_windows(grid, center_y)
            coupling = DetectorCoupling(math.pi / 2, up, lo)
            schedule = Schedule(0.0, 50 * 2e-5, 400 * 2e-5, 2e-5)
            psi0 = gaussian_packet(grid, PacketSpec(0.18, 0.05, k_x))

            class S:
                pass

            s = S()
            s.plan, s.coupling, s.schedule, s.psi0 = plan, coupling, schedule, psi0
            return run_tsmu(s).psi_at_td

        a = run(0.43)
        b = run(1.0 - 0.43)
        dens_a = np.sum(np.abs(a.amps) ** 2, axis=2)
        dens_b = np.sum(np.abs(b.amps) ** 2, axis=2)
        assert np.max(np.abs(dens_a - dens_b[:, ::-1])) < 1e-12


class TestDetectorKick:
    def _coupling(self, grid, theta):
        up, lo = half_space_windows(grid, 0.5)
        return DetectorCoupling(theta, up, lo)

    def test_theta_zero_is_identity(self):
        grid = GridSpec(16, 16, 1.0, 1.0)
        psi = _random_state(grid, 20)
        out = detector_kick(self._coupling(grid, 0.0), psi)
        assert np.array_equal(out.amps, psi.amps)

    def test_full_kick_moves_upper_amplitude_to_level_one(self):
        grid = GridSpec(16, 16, 1.0, 1.0)
        amps = np.zeros(grid.shape, dtype=np.complex128)
        amps[:, 8:, 0] = 1.0  # wholly inside the upper window, m = 0
        psi = WaveFunction(grid, amps)
        out = detector_kick(self._coupling(grid, math.pi / 2), psi)
        assert np.allclose(out.amps[:, 8:, 1], 1.0)
        assert np.max(np.abs(out.amps[:, :, 0])) < 1e-15

    def test_quarter_kick_hand_value(self):
        grid = GridSpec(16, 16, 1.0, 1.0)
        amps = np.zeros(grid.shape, dtype=np.complex128)
        amps[3, 2, 0] = 1.0  # lower window cell
        out = detector_kick(self._coupling(grid, math.pi / 4), WaveFunction(grid, amps))
        assert out.amps[3, 2, 0] == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
        assert out.amps[3, 2, 2] == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
        assert out.amps[3, 2, 1] == 0.0

    def test_kick_is_unitary_and_invertible(self):
        grid = GridSpec(16, 16, 1.0, 1.0)
        psi = _random_state(grid, 21)
        coupling = self._coupling(grid, 1.1)
        kicked = detector_kick(coupling, psi)
        assert norm_sq(kicked) == pytest.approx(norm_sq(psi), rel=1e-14)
        back = detector_kick(coupling, kicked, inverse=True)
        assert np.max(np.abs(back.amps - psi.amps)) < 1e-15

    def test_overlapping_windows_rejected(self):
        grid = GridSpec(16, 16, 1.0, 1.0)
        up, _ = half_space_windows(grid, 0.5)
        with pytest.raises(ConfigError):
            DetectorCoupling(0.3, up, up)

    def test_theta_out_of_range(self):
        grid = GridSpec(16, 16, 1.0, 1.0)
        up, lo = half_space_windows(grid, 0.5)
        with pytest.raises(ConfigError):
            DetectorCoupling(2.0, up, lo)


class TestRunPipeline:
    def test_checkpoints_and_unitarity(self, small_runtime):
        states = small_runtime.states()
        assert norm_sq(states.psi_at_td) == pytest.approx(1.0, abs=1e-8)
        assert small_runtime.norm_drift() <= 1e-8
        assert states.psi_at_ts_minus.time_tag == small_runtime.schedule.t_s
        assert states.psi_at_td.time_tag == small_runtime.schedule.t_d

    def test_perfect_record_components_orthogonal(self, small_runtime):
        psi = small_runtime.states().psi_at_td
        fam = make_projector_family(small_runtime.grid, "detector-levels")
        m1 = apply_projector(fam[1], psi)
        m2 = apply_projector(fam[2], psi)
        assert abs(inner_product(m1, m2)) == 0.0
        assert norm_sq(m1) + norm_sq(m2) == pytest.approx(1.0, abs=1e-8)

    def test_no_detector_leaves_ground_level(self, small_runtime_theta0):
        psi = small_runtime_theta0.states().psi_at_td
        assert float(np.max(np.abs(psi.amps[:, :, 1:]))) == 0.0

    def test_schedule_validation(self):
        with pytest.raises(ScheduleError):
            Schedule(0.0, 0.5, 0.4, 0.01)
        with pytest.raises(ScheduleError):
            Schedule(0.0, 0.35, 1.0, 0.015)  # t_s not on the step grid
