"""History sets as branch-dependent projector trees.

A history set is declared as data: a tree of (time, projector-family)
nodes, where each branch may refine differently at later times.  Evolving
a schema alternates unitary propagation with projections, applying the
one-shot detector kick when a branch crosses the transit time, and carries
every leaf forward to the common final time t_d, where branch state
vectors are compared.  The decoherence functional is the matrix of
pairwise leaf overlaps; probabilities are its diagonal and are refused
when any off-diagonal exceeds the decoherence tolerance - that refusal is
the central rule of the whole construction, not an error path to paper
over.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .dynamics import DetectorCoupling, PropagatorPlan, Schedule, advance
from .errors import ConsistencyError, PartitionError, ScheduleError, StateError, UsageError
from .grid import (
    GridSpec,
    Projector,
    WaveFunction,
    apply_projector,
    inner_product,
    linear_combine,
    masked_norm_sq,
    validate_family,
)

Label = tuple[str, ...]


@dataclass(frozen=True)
class SchemaNode:
    """One branching point: at `time`, split with the named family, then
    refine each branch per `refine` (missing labels fall back to
    `refine_default`; None means the branch becomes a leaf)."""

    time: float | str
    family: str
    refine: Mapping[str, "SchemaNode | None"] | None = None
    refine_default: "SchemaNode | None" = None

    def child(self, label: str) -> "SchemaNode | None":
        if self.refine is not None and label in self.refine:
            return self.refine[label]
        return self.refine_default


@dataclass(frozen=True)
class BranchLeaf:
    """A single history: its label path and branch state at the final time."""

    label: Label
    state: WaveFunction


@dataclass(frozen=True)
class HistoryTree:
    """An evolved history set; immutable once built."""

    grid: GridSpec
    final_time: float
    leaves: tuple[BranchLeaf, ...]
    description: str = ""

    def labels(self) -> tuple[Label, ...]:
        return tuple(leaf.label for leaf in self.leaves)

    def states(self) -> tuple[WaveFunction, ...]:
        return tuple(leaf.state for leaf in self.leaves)


def _resolve_time(spec_time: float | str, schedule: Schedule) -> float:
    if isinstance(spec_time, str):
        named = {"t0": schedule.t0, "t_s": schedule.t_s, "t_d": schedule.t_d}
        if spec_time not in named:
            raise ScheduleError(f"unknown symbolic time {spec_time!r}")
        return named[spec_time]
    return float(spec_time)


def evolve_branch_tree(
    schema: SchemaNode,
    plan: PropagatorPlan,
    coupling: DetectorCoupling,
    schedule: Schedule,
    psi0: WaveFunction,
    families: Mapping[str, Sequence[Projector]],
    description: str = "",
) -> HistoryTree:
    """Realize a schema: for each leaf the branch state is the time-ordered
    alternation of unitary legs and projections, evolved to t_d.

    The detector kick fires exactly once per branch, at t_s, whether or not
    the schema branches there; at a node sitting exactly at t_s the kick is
    applied before the projections (the alternatives discriminate the
    post-record state).
    """
    leaves: list[BranchLeaf] = []

    def family_for(node: SchemaNode) -> Sequence[Projector]:
        try:
            fam = families[node.family]
        except KeyError:
            raise PartitionError(f"unknown projector family {node.family!r}") from None
        validate_family(psi0.grid, fam)
        return fam

    def walk(state: WaveFunction, t_now: float, kicked: bool, node: SchemaNode | None, label: Label):
        if node is None:
            state, _ = advance(plan, coupling, schedule, state, t_now, schedule.t_d, kicked)
            leaves.append(BranchLeaf(label, state))
            return
        t_node = _resolve_time(node.time, schedule)
        if not (schedule.t0 < t_node <= schedule.t_d):
            raise ScheduleError(f"branching time {t_node!r} outside (t0, t_d]")
        state, kicked = advance(plan, coupling, schedule, state, t_now, t_node, kicked)
        for proj in family_for(node):
            walk(apply_projector(proj, state), t_node, kicked, node.child(proj.label), label + (proj.label,))

    walk(psi0, schedule.t0, False, schema, ())
    return HistoryTree(psi0.grid, schedule.t_d, tuple(leaves), description)


def branch_sum(tree: HistoryTree) -> WaveFunction:
    """Sum of all branches; reconstructs the unprojected evolved state."""
    if len(tree.leaves) == 0:
        raise StateError("tree has no leaves; evolve a schema first")
    return linear_combine([(1.0, leaf.state) for leaf in tree.leaves])


@dataclass(frozen=True)
class DecoherenceFunctional:
    """Hermitian matrix of branch overlaps at the final time."""

    labels: tuple[Label, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def trace(self) -> float:
        return float(self.matrix.trace().real)

    def max_off_diagonal(self) -> tuple[float, tuple[Label, Label]]:
        """Largest off-diagonal modulus and the pair of histories it links."""
        n = len(self.labels)
        if n < 2:
            return 0.0, (self.labels[0], self.labels[0])
        mods = np.abs(self.matrix).copy()
        np.fill_diagonal(mods, -1.0)
        flat = int(np.argmax(mods))
        i, j = divmod(flat, n)
        return float(mods[i, j]), (self.labels[i], self.labels[j])


def decoherence_functional(tree: HistoryTree) -> DecoherenceFunctional:
    """Pairwise inner products of the leaf states, D(a'', a') = <a''|a'>."""
    states = tree.states()
    n = len(states)
    if n == 0:
        raise StateError("tree has no leaves")
    m = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        m[i, i] = inner_product(states[i], states[i]).real
        for j in range(i + 1, n):
            v = inner_product(states[i], states[j])
            m[i, j] = v
            m[j, i] = v.conjugate()
    return DecoherenceFunctional(tree.labels(), m)


@dataclass(frozen=True)
class DecoherenceVerdict:
    decoherent: bool
    max_off_diagonal: float
    worst_pair: tuple[Label, Label]
    threshold: float
    epsilon: float


def is_decoherent(d: DecoherenceFunctional, epsilon: float) -> DecoherenceVerdict:
    """Medium decoherence test: every off-diagonal modulus must not exceed
    epsilon times the largest diagonal.  Reports the worst offender."""
    if epsilon <= 0:
        raise UsageError("decoherence tolerance epsilon must be positive")
    worst, pair = d.max_off_diagonal()
    threshold = epsilon * float(np.max(d.diagonal(), initial=0.0))
    return DecoherenceVerdict(worst <= threshold, worst, pair, threshold, epsilon)


def branch_probabilities(d: DecoherenceFunctional, epsilon: float) -> dict[Label, float]:
    """Diagonal of the functional as a probability table.

    Refused outright when the set does not decohere: interfering branches
    have no consistent probabilities.
    """
    verdict = is_decoherent(d, epsilon)
    if not verdict.decoherent:
        a, b = verdict.worst_pair
        raise ConsistencyError(
            "history set does not decohere: "
            f"|D[{'/'.join(a)}, {'/'.join(b)}]| = {verdict.max_off_diagonal:.3e} "
            f"exceeds {verdict.threshold:.3e} (epsilon = {verdict.epsilon:g})"
        )
    return {label: float(p) for label, p in zip(d.labels, d.diagonal())}


def coarse_grain(tree: HistoryTree, partition: Mapping[str, Sequence[Label]]) -> HistoryTree:
    """Merge histories: each partition cell becomes one leaf whose state is
    the unit-coefficient sum of its members' branch states."""
    by_label = {leaf.label: leaf for leaf in tree.leaves}
    seen: set[Label] = set()
    new_leaves: list[BranchLeaf] = []
    for cell_name, members in partition.items():
        if len(members) == 0:
            raise PartitionError(f"partition cell {cell_name!r} is empty")
        states = []
        for label in members:
            label = tuple(label)
            if label not in by_label:
                raise PartitionError(f"unknown history label {label!r}")
            if label in seen:
                raise PartitionError(f"history label {label!r} assigned to two cells")
            seen.add(label)
            states.append((1.0, by_label[label].state))
        new_leaves.append(BranchLeaf((str(cell_name),), linear_combine(states)))
    if len(seen) != len(tree.leaves):
        raise PartitionError("partition does not cover every history")
    return HistoryTree(tree.grid, tree.final_time, tuple(new_leaves), f"{tree.description} (coarse-grained)")


def state_bin_table(
    psi: WaveFunction, family: Sequence[Projector]
) -> dict[str, float]:
    """Probabilities of a single-time family applied to one state: the
    squared norms of the projected components.  For a family applied at the
    state's own time this equals the corresponding history-tree diagonal."""
    return {p.label: masked_norm_sq(p, psi) for p in family}


# -- builtin schemas --------------------------------------------------------


def schema_y_bins() -> SchemaNode:
    """Arrival interval alone, no which-slit refinement."""
    return SchemaNode("t_d", "ybins")


def schema_slit_then_y() -> SchemaNode:
    """Which slit at t_s, then arrival interval at t_d, on every branch."""
    return SchemaNode("t_s", "slit", refine_default=SchemaNode("t_d", "ybins"))


def schema_adaptive_upper() -> SchemaNode:
    """Branch-dependent set: arrival interval is followed only on the
    upper-slit branch; the lower branch is left whole."""
    return SchemaNode(
        "t_s", "slit", refine={"U": SchemaNode("t_d", "ybins"), "L": None}
    )


def schema_arrived_y() -> SchemaNode:
    """Blocked amplitude in one cell; arrived amplitude refined by Y."""
    return SchemaNode("t_d", "arrived-ybins")


def schema_record_y() -> SchemaNode:
    """Detector level times arrival interval at t_d."""
    return SchemaNode("t_d", "record-ybins")


BUILTIN_SCHEMAS: dict[str, Callable[[], SchemaNode]] = {
    "ybins": schema_y_bins,
    "slit-ybins": schema_slit_then_y,
    "adaptive-upper": schema_adaptive_upper,
    "arrived-ybins": schema_arrived_y,
    "record-ybins": schema_record_y,
    "identity": lambda: SchemaNode("t_d", "identity"),
}
