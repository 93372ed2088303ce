"""Discretized configuration space and state algebra.

The configuration space is a uniform cell-centered (x, y) grid over a
hard-walled box, times a three-level detector index m = 0, 1, 2.  A state is
a complex amplitude array over (x, y, m).  Inner products use plain
Riemann-sum quadrature with cell weight dx*dy, which makes mask projectors
exactly idempotent and self-adjoint, so exclusive-exhaustive families obey
their algebra to machine precision rather than approximately.

Everything here is a pure function of immutable values; amplitude and mask
arrays are frozen on construction, so states and projectors can be shared
freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GridMismatchError, PartitionError, UsageError

N_LEVELS = 3

_INT_TOL = 1e-9  # relative slack when a length must be a whole number of cells


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid over a box of width lx and height ly.

    Cell centers sit at (i + 1/2)*dx and (j + 1/2)*dy.  The hard walls are
    realized by the discrete Dirichlet stencil, whose zeros sit half a cell
    outside the first and last centers.
    """

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise GridMismatchError(f"grid must be at least 8x8, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise GridMismatchError("box dimensions must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def n_levels(self) -> int:
        return N_LEVELS

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, N_LEVELS)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WaveFunction:
    """State amplitudes over (x, y, m) at one instant of simulation time."""

    grid: GridSpec
    amps: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        amps = _frozen_array(self.amps, np.complex128)
        if amps.shape != self.grid.shape:
            raise GridMismatchError(
                f"amplitude shape {amps.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(amps.view(np.float64))):
            raise UsageError("amplitudes contain NaN or Inf")
        object.__setattr__(self, "amps", amps)

    def with_time(self, t: float) -> "WaveFunction":
        return WaveFunction(self.grid, self.amps, t)


@dataclass(frozen=True)
class Projector:
    """Configuration-diagonal projector: a boolean mask over (x, y, m) cells.

    kind is one of "y-interval", "slit-side", "detector-level", "x-window",
    "composite-product" or "identity"; label is a short stable identifier
    used for history bookkeeping (e.g. "Y=07", "U", "m=1").
    """

    kind: str
    label: str
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", _frozen_array(self.mask, bool))


def inner_product(a: WaveFunction, b: WaveFunction) -> complex:
    """Discrete quadrature inner product <a|b> = sum conj(a)*b * dx*dy.

    Conjugate-symmetric: inner_product(a, b) == conj(inner_product(b, a)).
    """
    if a.grid != b.grid:
        raise GridMismatchError("inner product requires states on the same grid")
    return complex(np.vdot(a.amps, b.amps)) * a.grid.cell_area


def norm_sq(a: WaveFunction) -> float:
    """Squared norm <a|a>; real and nonnegative."""
    return float(np.vdot(a.amps, a.amps).real) * a.grid.cell_area


def linear_combine(terms: Sequence[tuple[complex, WaveFunction]]) -> WaveFunction:
    """Pointwise weighted sum of states; exact to floating arithmetic.

    The result carries the time tag of the first term (all summands in a
    branch sum live at a common time).
    """
    if len(terms) == 0:
        raise UsageError("linear_combine needs at least one term")
    first = terms[0][1]
    acc = np.zeros(first.grid.shape, dtype=np.complex128)
    for coeff, wf in terms:
        if wf.grid != first.grid:
            raise GridMismatchError("linear_combine requires a common grid")
        acc += complex(coeff) * wf.amps
    return WaveFunction(first.grid, acc, first.time_tag)


def normalized(a: WaveFunction) -> WaveFunction:
    """Rescale to unit squared norm."""
    n = norm_sq(a)
    if n <= 0.0:
        raise UsageError("cannot normalize a zero state")
    return WaveFunction(a.grid, a.amps / math.sqrt(n), a.time_tag)


def apply_projector(p: Projector, a: WaveFunction) -> WaveFunction:
    """Zero all amplitudes outside the projector mask.  Idempotent."""
    if p.mask.shape != a.amps.shape:
        raise GridMismatchError(
            f"projector mask {p.mask.shape} does not match state {a.amps.shape}"
        )
    return WaveFunction(a.grid, np.where(p.mask, a.amps, 0.0 + 0.0j), a.time_tag)


def masked_norm_sq(p: Projector, a: WaveFunction) -> float:
    """norm_sq(apply_projector(p, a)) without materializing the projected state."""
    if p.mask.shape != a.amps.shape:
        raise GridMismatchError("projector mask does not match state shape")
    amps = a.amps
    return float(np.sum(amps.real[p.mask] ** 2 + amps.imag[p.mask] ** 2)) * a.grid.cell_area


def validate_family(grid: GridSpec, family: Sequence[Projector]) -> None:
    """Check a declared family is pairwise disjoint and covers every cell."""
    if len(family) == 0:
        raise PartitionError("empty projector family")
    cover = np.zeros(grid.shape, dtype=np.int64)
    for p in family:
        if p.mask.shape != grid.shape:
            raise PartitionError(f"projector {p.label!r} mask does not match the grid")
        cover += p.mask
    if cover.max() > 1:
        raise PartitionError("projector family has overlapping members")
    if cover.min() < 1:
        raise PartitionError("projector family does not cover the configuration space")


def _cells_per_interval(delta: float, d: float, what: str) -> int:
    k = delta / d
    k_int = round(k)
    if k_int < 1 or abs(k - k_int) > _INT_TOL * max(1.0, abs(k)):
        raise PartitionError(
            f"{what} width {delta!r} is not a positive integer multiple of the cell size {d!r}"
        )
    return k_int


def _row_mask(grid: GridSpec, j_lo: int, j_hi: int) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    mask[:, j_lo:j_hi, :] = True
    return mask


def y_interval_family(grid: GridSpec, delta: float) -> list[Projector]:
    """Arrival intervals: consecutive groups of grid rows of height delta.

    delta must be an integer multiple of dy so the partition is exact; the
    last interval is allowed to be narrower when ny is not divisible.
    Row j belongs to the interval whose half-open [y_lo, y_hi) contains
    its center.
    """
    k = _cells_per_interval(delta, grid.dy, "arrival interval")
    n_bins = math.ceil(grid.ny / k)
    width = len(str(max(n_bins - 1, 1)))
    family = []
    for b in range(n_bins):
        j_lo, j_hi = b * k, min((b + 1) * k, grid.ny)
        family.append(Projector("y-interval", f"Y={b:0{width}d}", _row_mask(grid, j_lo, j_hi)))
    return family


def detector_level_family(grid: GridSpec) -> list[Projector]:
    """The three detector-level alternatives m = 0, 1, 2."""
    family = []
    for m in range(N_LEVELS):
        mask = np.zeros(grid.shape, dtype=bool)
        mask[:, :, m] = True
        family.append(Projector("detector-level", f"m={m}", mask))
    return family


def slit_side_family(grid: GridSpec, y_split: float) -> list[Projector]:
    """Which-slit alternatives: upper/lower half-spaces split between the slits.

    Cells whose y center lies strictly above y_split belong to "U", the rest
    to "L".  Together with detector windows aligned to the same half-spaces
    this makes the slit record exact: every bit of amplitude is classified,
    including amplitude that reflects off the screen.
    """
    if not (0.0 < y_split < grid.ly):
        raise PartitionError("slit split must lie inside the box height")
    above = grid.y_centers() > y_split
    upper = np.zeros(grid.shape, dtype=bool)
    upper[:, above, :] = True
    lower = np.zeros(grid.shape, dtype=bool)
    lower[:, ~above, :] = True
    return [Projector("slit-side", "U", upper), Projector("slit-side", "L", lower)]


def arrival_family(grid: GridSpec, x_split: float) -> list[Projector]:
    """Arrived/blocked alternatives split at a plane past the screen."""
    if not (0.0 < x_split < grid.lx):
        raise PartitionError("arrival split must lie inside the box width")
    beyond = grid.x_centers() > x_split
    arr = np.zeros(grid.shape, dtype=bool)
    arr[beyond, :, :] = True
    blk = np.zeros(grid.shape, dtype=bool)
    blk[~beyond, :, :] = True
    return [Projector("x-window", "arrived", arr), Projector("x-window", "blocked", blk)]


def arrived_bin_family(grid: GridSpec, x_split: float, delta: float) -> list[Projector]:
    """Single blocked cell plus arrival intervals restricted to x > x_split.

    This realizes a branch-dependent refinement at a single time: the
    arrived alternative is resolved by Y, the blocked one is not.
    """
    arrived, blocked = arrival_family(grid, x_split)
    cells = [blocked]
    for p in y_interval_family(grid, delta):
        cells.append(
            Projector("composite-product", f"arrived&{p.label}", arrived.mask & p.mask)
        )
    return cells


def record_bin_family(grid: GridSpec, delta: float) -> list[Projector]:
    """Product family: detector level times arrival interval."""
    cells = []
    for pm in detector_level_family(grid):
        for py in y_interval_family(grid, delta):
            cells.append(
                Projector("composite-product", f"{pm.label}&{py.label}", pm.mask & py.mask)
            )
    return cells


def identity_family(grid: GridSpec) -> list[Projector]:
    return [Projector("identity", "all", np.ones(grid.shape, dtype=bool))]


_FAMILY_BUILDERS = {
    "y-bins": lambda grid, **kw: y_interval_family(grid, kw["delta"]),
    "detector-levels": lambda grid, **kw: detector_level_family(grid),
    "slit-sides": lambda grid, **kw: slit_side_family(grid, kw["y_split"]),
    "arrival-split": lambda grid, **kw: arrival_family(grid, kw["x_split"]),
    "arrived-y-bins": lambda grid, **kw: arrived_bin_family(grid, kw["x_split"], kw["delta"]),
    "record-y-bins": lambda grid, **kw: record_bin_family(grid, kw["delta"]),
    "identity": lambda grid, **kw: identity_family(grid),
}


def make_projector_family(grid: GridSpec, kind: str, **params) -> list[Projector]:
    """Build and validate an exclusive-exhaustive projector family.

    Supported kinds: "y-bins" (delta), "detector-levels", "slit-sides"
    (y_split), "arrival-split" (x_split), "arrived-y-bins" (x_split, delta),
    "record-y-bins" (delta), "identity".
    """
    try:
        builder = _FAMILY_BUILDERS[kind]
    except KeyError:
        raise PartitionError(f"unknown projector family kind {kind!r}") from None
    family = builder(grid, **params)
    validate_family(grid, family)
    return family
