"""Hamiltonian construction and norm-preserving time evolution.

The closed-box Hamiltonian is H = -(1/2)(d2/dx2 + d2/dy2) + V(x, y) with
hard-wall (Dirichlet) boundaries, in units hbar = 1, mass = 1.  One time
step is the dimension-split Cayley scheme

    psi' = (1 + i dt Hy / 2)^-1 (1 - i dt Hy / 2)
           (1 + i dt Hx / 2)^-1 (1 - i dt Hx / 2) psi

with the potential shared half-and-half between Hx and Hy.  Each factor is
a Cayley transform of a Hermitian tridiagonal operator, so every step is
exactly unitary and total norm is conserved to roundoff over arbitrarily
many steps; the splitting costs accuracy, never norm.  The detector index
m is untouched by H.

The slit screen is a finite potential barrier (height V0, a few cells
thick) rather than interior Dirichlet holes, which keeps the evolution
exactly unitary: blocked amplitude reflects and stays in the box.

The tridiagonal solves run through a batched Thomas algorithm with the
forward-elimination coefficients precomputed once per plan.  A numba
kernel (cache-blocked, parallel over independent lines) is used when
available; a vectorized NumPy implementation of the same recurrences is
the fallback and reference.  Plans are immutable and shareable; each
propagate call owns its private scratch arrays.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, ScheduleError, UsageError
from .grid import GridSpec, WaveFunction, _frozen_array

try:
    import numba

    HAVE_NUMBA = True
    prange = numba.prange
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    prange = range

_BLK = 48  # j-block width for the x sweep; keeps the streamed window in L2


# ---------------------------------------------------------------------------
# scenario ingredients


@dataclass(frozen=True)
class PotentialField:
    """Box-interior potential: zero everywhere except the slit screen."""

    values: np.ndarray  # (nx, ny) real
    v0: float
    screen_cols: tuple[int, int] | None  # half-open column span of the screen
    apertures: tuple[tuple[float, float], ...]  # slit y-intervals (lo, hi)
    separation: float | None  # distance between slit centers

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, np.float64))


def two_slit_potential(
    grid: GridSpec,
    screen_x: float,
    thickness: float,
    v0: float,
    slit_center_y: float,
    slit_separation: float,
    slit_width: float,
) -> PotentialField:
    """Finite barrier on the screen columns with two open slit apertures.

    slit_width == 0 builds a solid screen (used by the transmission check
    that validates the default V0).  Cells belong to the screen / an
    aperture when their centers fall in the half-open interval.
    """
    if v0 <= 0:
        raise ConfigError("screen barrier height v0 must be positive")
    if thickness < grid.dx:
        raise ConfigError("screen thickness must be at least one grid cell")
    x = grid.x_centers()
    in_screen = (x >= screen_x - thickness / 2) & (x < screen_x + thickness / 2)
    if not in_screen.any():
        raise ConfigError("screen does not intersect the grid")
    i_lo = int(np.argmax(in_screen))
    i_hi = int(grid.nx - np.argmax(in_screen[::-1]))

    apertures: tuple[tuple[float, float], ...] = ()
    open_rows = np.zeros(grid.ny, dtype=bool)
    if slit_width > 0:
        y = grid.y_centers()
        for c in (slit_center_y + slit_separation / 2, slit_center_y - slit_separation / 2):
            lo, hi = c - slit_width / 2, c + slit_width / 2
            if lo < 0 or hi > grid.ly:
                raise ConfigError("slit aperture extends outside the box height")
            apertures += ((lo, hi),)
            open_rows |= (y >= lo) & (y < hi)

    values = np.zeros((grid.nx, grid.ny))
    values[i_lo:i_hi, :] = v0
    values[i_lo:i_hi, open_rows] = 0.0
    return PotentialField(
        values,
        v0,
        (i_lo, i_hi),
        apertures,
        slit_separation if slit_width > 0 else None,
    )


@dataclass(frozen=True)
class PacketSpec:
    """Rightward-moving Gaussian in x, uniform across the box height."""

    x0: float
    sigma_x: float
    k_x: float

    def __post_init__(self):
        if self.sigma_x <= 0:
            raise ConfigError("packet width sigma_x must be positive")
        if self.k_x <= 0:
            raise ConfigError("packet must move rightward: k_x > 0")


def gaussian_packet(grid: GridSpec, packet: PacketSpec) -> WaveFunction:
    """Initial state: narrow x packet, no y dependence, detector in m = 0."""
    x = grid.x_centers()
    phi = np.exp(-((x - packet.x0) ** 2) / (4 * packet.sigma_x**2) + 1j * packet.k_x * x)
    amps = np.zeros(grid.shape, dtype=np.complex128)
    amps[:, :, 0] = phi[:, None]
    amps /= math.sqrt(float(np.vdot(amps, amps).real) * grid.cell_area)
    return WaveFunction(grid, amps, 0.0)


def two_blob_packet(
    grid: GridSpec,
    x_center: float,
    sigma_x: float,
    k_x: float,
    blob_centers_y: Sequence[float],
    blob_std: float,
) -> WaveFunction:
    """Post-slit state: an x packet times a sum of Gaussian y apertures.

    Used by the strict oracle-match mode, which starts the numeric run just
    past the screen from the same Gaussian-aperture sources the closed-form
    route propagates.
    """
    x = grid.x_centers()
    y = grid.y_centers()
    phi = np.exp(-((x - x_center) ** 2) / (4 * sigma_x**2) + 1j * k_x * x)
    chi = np.zeros(grid.ny)
    for c in blob_centers_y:
        chi = chi + np.exp(-((y - c) ** 2) / (4 * blob_std**2))
    amps = np.zeros(grid.shape, dtype=np.complex128)
    amps[:, :, 0] = phi[:, None] * chi[None, :]
    amps /= math.sqrt(float(np.vdot(amps, amps).real) * grid.cell_area)
    return WaveFunction(grid, amps, 0.0)


@dataclass(frozen=True)
class Schedule:
    """Start, slit-transit, and arrival times on a uniform step grid."""

    t0: float
    t_s: float
    t_d: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ScheduleError("dt must be positive")
        # t0 == t_s only in the post-slit start mode, where the run begins
        # at the kick instant.
        if not (self.t0 <= self.t_s < self.t_d):
            raise ScheduleError("schedule must satisfy t0 <= t_s < t_d")
        steps_between(self.t0, self.t_s, self.dt)
        steps_between(self.t_s, self.t_d, self.dt)


def steps_between(t_from: float, t_to: float, dt: float) -> int:
    """Number of dt steps from t_from to t_to; errors unless it is a
    nonnegative whole number within tolerance."""
    span = t_to - t_from
    n = span / dt
    n_int = round(n)
    if n_int < 0 or abs(n - n_int) > 1e-6:
        raise ScheduleError(
            f"interval {t_from!r} -> {t_to!r} is not a nonnegative multiple of dt={dt!r}"
        )
    return n_int


@dataclass(frozen=True)
class DetectorCoupling:
    """Instantaneous record-creating unitary applied once at slit transit.

    Inside the upper window the detector rotates m=0 -> cos(theta) m0 +
    sin(theta) m1; inside the lower window likewise into m2.  theta = pi/2
    writes a perfect which-slit record, theta = 0 is no detector at all.
    lambda_u / lambda_l are the recorded radiation wavelengths; they set the
    level energies and are inert in the idealized dynamics.
    """

    theta: float
    upper_window: np.ndarray  # (nx, ny) bool
    lower_window: np.ndarray
    lambda_u: float = 0.04
    lambda_l: float = 0.06

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi / 2):
            raise ConfigError("coupling angle theta must lie in [0, pi/2]")
        up = _frozen_array(self.upper_window, bool)
        lo = _frozen_array(self.lower_window, bool)
        if up.shape != lo.shape:
            raise ConfigError("detector windows must share one grid shape")
        if np.any(up & lo):
            raise ConfigError("detector windows overlap")
        object.__setattr__(self, "upper_window", up)
        object.__setattr__(self, "lower_window", lo)

    @property
    def level_energies(self) -> tuple[float, float, float]:
        return (0.0, 1.0 / self.lambda_u, 1.0 / self.lambda_l)


def half_space_windows(grid: GridSpec, y_split: float) -> tuple[np.ndarray, np.ndarray]:
    """Default radiation-gas windows: the full half-spaces above and below
    the inter-slit midline, so the record classifies all amplitude exactly
    the way the slit-side history alternatives do."""
    above = grid.y_centers() > y_split
    upper = np.broadcast_to(above[None, :], (grid.nx, grid.ny)).copy()
    return upper, ~upper


def detector_kick(coupling: DetectorCoupling, psi: WaveFunction, inverse: bool = False) -> WaveFunction:
    """Apply the record-creating rotation; unitary for any theta.

    inverse=True applies the adjoint rotation, so kick followed by inverse
    kick is the identity inside the windows.
    """
    if coupling.upper_window.shape != (psi.grid.nx, psi.grid.ny):
        raise ConfigError("detector windows do not match the state grid")
    c = math.cos(coupling.theta)
    s = -math.sin(coupling.theta) if inverse else math.sin(coupling.theta)
    amps = psi.amps.copy()
    for window, level in ((coupling.upper_window, 1), (coupling.lower_window, 2)):
        m0 = amps[:, :, 0][window]
        ml = amps[:, :, level][window]
        amps[:, :, 0][window] = c * m0 - s * ml
        amps[:, :, level][window] = s * m0 + c * ml
    return WaveFunction(psi.grid, amps, psi.time_tag)


# ---------------------------------------------------------------------------
# the stepping kernel


def _thomas_coefficients(diag: np.ndarray, off: complex, axis: int):
    """Forward-elimination coefficients for the constant LHS tridiagonals.

    Returns (inv_den, cp) with the recurrence den[i] = diag[i] - off*cp[i-1],
    cp[i] = off/den[i], taken along the requested axis for every line.
    """
    diag = np.moveaxis(diag, axis, 0)
    n = diag.shape[0]
    inv_den = np.empty_like(diag)
    cp = np.empty_like(diag)
    inv_den[0] = 1.0 / diag[0]
    cp[0] = off * inv_den[0]
    for i in range(1, n):
        inv_den[i] = 1.0 / (diag[i] - off * cp[i - 1])
        cp[i] = off * inv_den[i]
    return np.moveaxis(inv_den, 0, axis), np.moveaxis(cp, 0, axis)


def _adi_step_numpy(a, out, ax, bxc, idx, cpx, ay, byc, idy, cpy):
    """One Cayley-split step, vectorized NumPy reference implementation."""
    nx, ny, _ = a.shape
    # x sweep: rhs (1 - i dt Hx / 2) a, then solve (1 + i dt Hx / 2) w = rhs
    d = bxc[:, :, None] * a
    d[1:-1] -= ax * (a[:-2] + a[2:])
    d[0] -= ax * a[1]
    d[-1] -= ax * a[-2]
    out[0] = d[0] * idx[0][:, None]
    for i in range(1, nx):
        out[i] = (d[i] - ax * out[i - 1]) * idx[i][:, None]
    for i in range(nx - 2, -1, -1):
        out[i] -= cpx[i][:, None] * out[i + 1]
    # y sweep
    d = byc[:, :, None] * out
    d[:, 1:-1] -= ay * (out[:, :-2] + out[:, 2:])
    d[:, 0] -= ay * out[:, 1]
    d[:, -1] -= ay * out[:, -2]
    a[:, 0] = d[:, 0] * idy[:, 0][:, None]
    for j in range(1, ny):
        a[:, j] = (d[:, j] - ay * a[:, j - 1]) * idy[:, j][:, None]
    for j in range(ny - 2, -1, -1):
        a[:, j] -= cpy[:, j][:, None] * a[:, j + 1]
    return a


def _adi_step_loops(a, out, ax, bxc, idx, cpx, ay, byc, idy, cpy):
    """Same recurrences as the NumPy path, written as loops for the JIT.

    The x sweep is blocked over j so each thread streams contiguous memory;
    parallelism is only ever across independent tridiagonal lines, so
    results do not depend on thread scheduling.
    """
    nx, ny, nm = a.shape
    nblk = (ny + _BLK - 1) // _BLK
    for b in prange(nblk):
        j0 = b * _BLK
        j1 = min(j0 + _BLK, ny)
        for j in range(j0, j1):
            for m in range(nm):
                d0 = bxc[0, j] * a[0, j, m] - ax * a[1, j, m]
                out[0, j, m] = d0 * idx[0, j]
        for i in range(1, nx):
            if i + 1 < nx:
                for j in range(j0, j1):
                    for m in range(nm):
                        di = bxc[i, j] * a[i, j, m] - ax * (a[i - 1, j, m] + a[i + 1, j, m])
                        out[i, j, m] = (di - ax * out[i - 1, j, m]) * idx[i, j]
            else:
                for j in range(j0, j1):
                    for m in range(nm):
                        di = bxc[i, j] * a[i, j, m] - ax * a[i - 1, j, m]
                        out[i, j, m] = (di - ax * out[i - 1, j, m]) * idx[i, j]
        for i in range(nx - 2, -1, -1):
            for j in range(j0, j1):
                for m in range(nm):
                    out[i, j, m] -= cpx[i, j] * out[i + 1, j, m]
    for i in prange(nx):
        for m in range(nm):
            a[i, 0, m] = (byc[i, 0] * out[i, 0, m] - ay * out[i, 1, m]) * idy[i, 0]
        for j in range(1, ny):
            if j + 1 < ny:
                for m in range(nm):
                    dj = byc[i, j] * out[i, j, m] - ay * (out[i, j - 1, m] + out[i, j + 1, m])
                    a[i, j, m] = (dj - ay * a[i, j - 1, m]) * idy[i, j]
            else:
                for m in range(nm):
                    dj = byc[i, j] * out[i, j, m] - ay * out[i, j - 1, m]
                    a[i, j, m] = (dj - ay * a[i, j - 1, m]) * idy[i, j]
        for j in range(ny - 2, -1, -1):
            for m in range(nm):
                a[i, j, m] -= cpy[i, j] * a[i, j + 1, m]
    return a


if HAVE_NUMBA:
    _adi_step_jit = numba.njit(parallel=True, cache=True)(_adi_step_loops)
else:  # pragma: no cover
    _adi_step_jit = None


class PropagatorPlan:
    """Reusable single-step plan for one (grid, potential, dt) triple.

    Immutable after construction and safe to share; propagate calls bring
    their own scratch arrays.
    """

    def __init__(self, grid: GridSpec, potential: PotentialField, dt: float, use_jit: bool | None = None):
        if dt <= 0:
            raise ScheduleError("dt must be positive")
        if potential.values.shape != (grid.nx, grid.ny):
            raise ConfigError("potential does not match the grid")
        self.grid = grid
        self.potential = potential
        self.dt = dt
        v = potential.values
        dx2 = grid.dx * grid.dx
        dy2 = grid.dy * grid.dy
        self._ax = -1j * dt / (4 * dx2)
        self._ay = -1j * dt / (4 * dy2)
        bx = 1.0 + 1j * (dt / 2) * (1.0 / dx2 + v / 2.0)
        by = 1.0 + 1j * (dt / 2) * (1.0 / dy2 + v / 2.0)
        self._bxc = np.conj(bx)
        self._byc = np.conj(by)
        self._idx, self._cpx = _thomas_coefficients(bx, self._ax, axis=0)
        self._idy, self._cpy = _thomas_coefficients(by, self._ay, axis=1)
        for arr in (self._bxc, self._byc, self._idx, self._cpx, self._idy, self._cpy):
            arr.setflags(write=False)
        if use_jit is None:
            use_jit = HAVE_NUMBA and os.environ.get("TSMU_FORCE_NUMPY", "") == ""
        self._step = _adi_step_jit if (use_jit and _adi_step_jit is not None) else _adi_step_numpy

    def run(self, amps: np.ndarray, n_steps: int) -> np.ndarray:
        """Advance a fresh copy of amps by n_steps; the input is untouched."""
        a = np.array(amps, dtype=np.complex128, copy=True, order="C")
        if n_steps == 0:
            return a
        out = np.empty_like(a)
        step = self._step
        args = (
            self._ax, self._bxc, self._idx, self._cpx,
            self._ay, self._byc, self._idy, self._cpy,
        )
        for _ in range(n_steps):
            a = step(a, out, *args)
        return a


def build_propagator(grid: GridSpec, potential: PotentialField, dt: float) -> PropagatorPlan:
    """One dt of unitary evolution under H = -(1/2) laplacian + V."""
    return PropagatorPlan(grid, potential, dt)


def propagate(plan: PropagatorPlan, psi: WaveFunction, t_from: float, t_to: float) -> WaveFunction:
    """Apply whole steps to reach t_to; norm is preserved to roundoff."""
    if psi.grid != plan.grid:
        raise UsageError("state grid does not match the plan")
    n = steps_between(t_from, t_to, plan.dt)
    return WaveFunction(plan.grid, plan.run(psi.amps, n), t_to)


def advance(
    plan: PropagatorPlan,
    coupling: DetectorCoupling,
    schedule: Schedule,
    psi: WaveFunction,
    t_from: float,
    t_to: float,
    kicked: bool,
) -> tuple[WaveFunction, bool]:
    """Propagate t_from -> t_to applying the one-shot detector kick when the
    path reaches t_s.  Returns the new state and the updated kick flag."""
    if t_to < t_from:
        raise ScheduleError("cannot advance backwards in time")
    if not kicked and t_from <= schedule.t_s <= t_to:
        psi = propagate(plan, psi, t_from, schedule.t_s)
        psi = detector_kick(coupling, psi)
        return propagate(plan, psi, schedule.t_s, t_to), True
    return propagate(plan, psi, t_from, t_to), kicked


@dataclass(frozen=True)
class RunStates:
    """Checkpoints of the canonical run: just before the kick, just after,
    and at arrival."""

    psi_at_ts_minus: WaveFunction
    psi_at_ts_plus: WaveFunction
    psi_at_td: WaveFunction


def run_tsmu(scenario) -> RunStates:
    """Full pipeline t0 -> t_s (kick) -> t_d for any object exposing
    .plan, .coupling, .schedule and .psi0."""
    plan: PropagatorPlan = scenario.plan
    schedule: Schedule = scenario.schedule
    psi_ts_minus = propagate(plan, scenario.psi0, schedule.t0, schedule.t_s)
    psi_ts_plus = detector_kick(scenario.coupling, psi_ts_minus)
    psi_td = propagate(plan, psi_ts_plus, schedule.t_s, schedule.t_d)
    return RunStates(psi_ts_minus, psi_ts_plus, psi_td)
