"""Closed-box two-slit universe: unitary dynamics, branch histories,
decoherence tests, and conditional (first-person) probabilities."""

from .errors import (
    ConditioningError,
    ConfigError,
    ConsistencyError,
    GridMismatchError,
    PartitionError,
    ScheduleError,
    StateError,
    TsmuError,
    UsageError,
)
from .grid import (
    GridSpec,
    Projector,
    WaveFunction,
    apply_projector,
    inner_product,
    linear_combine,
    make_projector_family,
    norm_sq,
    normalized,
    validate_family,
)
from .dynamics import (
    DetectorCoupling,
    PacketSpec,
    PotentialField,
    PropagatorPlan,
    RunStates,
    Schedule,
    build_propagator,
    detector_kick,
    gaussian_packet,
    propagate,
    run_tsmu,
    two_slit_potential,
)
from .histories import (
    BranchLeaf,
    DecoherenceFunctional,
    DecoherenceVerdict,
    HistoryTree,
    SchemaNode,
    branch_probabilities,
    branch_sum,
    coarse_grain,
    decoherence_functional,
    evolve_branch_tree,
    is_decoherent,
    state_bin_table,
)
from .inference import (
    arrival_marginal,
    condition,
    fringe_period,
    fringe_visibility,
    verify_reduction_equivalence,
)
from .oracle import OracleSpec, oracle_amplitudes, oracle_distribution
from .scenario import ScenarioConfig, ScenarioRuntime, build_runtime, load_config, resolve_config

__version__ = "0.1.0"
