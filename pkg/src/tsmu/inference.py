"""Conditional probabilities and arrival-pattern diagnostics.

An observer inside the box predicts with conditional probabilities: the
unconditioned branch probabilities, renormalized on the event describing
what the observer knows (a detector record, being past the screen, being
alive).  Conditioning is pure table arithmetic; the only state evolution
anywhere in the pipeline is the unitary propagator plus the unitary
detector kick.  The renormalized projected state appearing in the
two-route equivalence check below is bookkeeping inside the conditional
construction, not a second law of evolution - nothing ever overwrites the
global state.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dynamics import propagate
from .errors import ConditioningError, UsageError
from .grid import WaveFunction, apply_projector, masked_norm_sq, normalized
from .histories import Label, branch_probabilities, decoherence_functional

Event = Callable[[Label], bool]


def condition(p: Mapping[Label, float], event: Event | Iterable[Label]) -> dict[Label, float]:
    """First-person table: p(a | D) = p(a) / p(D) on the event, else 0.

    Projective: conditioning twice on the same event changes nothing.
    """
    if not callable(event):
        members = {tuple(label) for label in event}
        event = members.__contains__
    total = 0.0
    selected = {}
    for label, prob in p.items():
        if event(label):
            selected[label] = prob
            total += prob
    if total <= 0.0:
        raise ConditioningError("conditioning event has zero probability; observer cannot exist there")
    return {label: (selected[label] / total if label in selected else 0.0) for label in p}


def label_component_event(value: str) -> Event:
    """Event selecting histories whose label path contains `value`."""
    return lambda label: value in label


def fringe_visibility(table: Sequence[tuple[float, float]], window: tuple[float, float]) -> float:
    """(max - min) / (max + min) over the probabilities whose y centers fall
    inside the window; 0 when the window carries no weight."""
    lo, hi = window
    if not (hi > lo):
        raise UsageError("visibility window must have positive width")
    values = [p for y, p in table if lo <= y <= hi]
    if len(values) == 0:
        raise UsageError("visibility window contains no table entries")
    top, bottom = max(values), min(values)
    if top <= 0.0:
        return 0.0
    return (top - bottom) / (top + bottom)


def fringe_period(y: np.ndarray, density: np.ndarray, window: tuple[float, float]) -> float:
    """Fringe spacing measured as the distance between the two nulls that
    straddle the central maximum, with parabolic sub-sample refinement.

    Near-zero nulls are pinned by the oscillation itself, so this estimate
    is insensitive to the single-slit envelope, which drags the positions
    of outer intensity maxima inward.  Raises when the pattern has no
    interior nulls (no fringes).
    """
    y = np.asarray(y, dtype=np.float64)
    d = np.asarray(density, dtype=np.float64)
    lo, hi = window
    sel = (y >= lo) & (y <= hi)
    ys, ds = y[sel], d[sel]
    if ys.size < 7:
        raise UsageError("period window too small")
    peak = int(np.argmax(ds))

    def first_null(direction: int) -> float:
        i = peak + direction
        while 0 < i < ys.size - 1:
            if ds[i] <= ds[i - 1] and ds[i] <= ds[i + 1]:
                # demand a real rise past the minimum, not a flat tail
                ahead = ds[i:ds.size] if direction > 0 else ds[: i + 1][::-1]
                if np.max(ahead) >= ds[i] + 0.02 * ds[peak]:
                    denom = ds[i - 1] - 2 * ds[i] + ds[i + 1]
                    shift = 0.0 if denom == 0 else 0.5 * (ds[i - 1] - ds[i + 1]) / denom
                    return float(ys[i] + np.clip(shift, -1, 1) * (ys[1] - ys[0]))
            i += direction
        raise UsageError("no interior fringe null on one side of the peak")

    return first_null(+1) - first_null(-1)


def arrival_marginal(psi: WaveFunction, x_split: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-resolution arrival pattern: the y density of |psi|^2 restricted
    to x > x_split, normalized to unit sum times dy.

    This is the fine-grained version of conditioning on the arrived
    alternative; binned with any aligned intervals it reproduces the
    corresponding history-table values.
    """
    grid = psi.grid
    beyond = grid.x_centers() > x_split
    if not beyond.any():
        raise ConditioningError("arrival split leaves no cells past the screen")
    dens = np.abs(psi.amps[beyond, :, :]) ** 2
    rows = dens.sum(axis=(0, 2)) * grid.cell_area
    total = rows.sum()
    if total <= 0.0:
        raise ConditioningError("no arrival amplitude past the split plane")
    return grid.y_centers(), rows / (total * grid.dy)


def verify_reduction_equivalence(runtime, condition_label: str = "U") -> float:
    """Check the two routes to p(Y | went through `condition_label`).

    Route (a) conditions the slit-resolving history table.  Route (b)
    projects the post-kick state onto the slit branch, renormalizes it,
    propagates the renormalized state to t_d with the same unitary plan,
    and bins.  These agree identically; the return value is the max
    pointwise discrepancy.  Refuses (via branch_probabilities) when the
    slit set does not decohere, since route (a) has no meaning then.
    """
    if condition_label not in ("U", "L"):
        raise UsageError("reduction check conditions on a slit label, 'U' or 'L'")
    tree = runtime.tree("slit-ybins")
    table = branch_probabilities(decoherence_functional(tree), runtime.epsilon)
    cond = condition(table, label_component_event(condition_label))
    route_a = {
        label[-1]: p for label, p in cond.items() if condition_label in label
    }

    slit = {p.label: p for p in runtime.family("slit")}[condition_label]
    psi_branch = normalized(apply_projector(slit, runtime.states().psi_at_ts_plus))
    psi_final = propagate(runtime.plan, psi_branch, runtime.schedule.t_s, runtime.schedule.t_d)
    worst = 0.0
    for proj in runtime.family("ybins"):
        q = masked_norm_sq(proj, psi_final)
        worst = max(worst, abs(route_a[proj.label] - q))
    return worst
