"""Surface-code memory simulator and decoders for correlated CZ-gate atom
loss with teleportation-based loss-detection units."""

from .circuit import (
    Circuit,
    CzSiteId,
    DetectorDef,
    HeraldKey,
    ObservableDef,
    Operation,
    OpKind,
    QubitId,
    QubitRole,
    SiteContext,
    build_memory_circuit,
    enumerate_cz_sites,
    serialize,
    validate,
)
from .noise import (
    FaultAssignment,
    LossConfig,
    LossEvent,
    NoiseParams,
    PauliChannel,
    decay_kraus,
    marginal_loss_probability,
    pauli_twirl,
    remaining_atom_channel,
    sample_losses,
    sample_pauli_faults,
)
from .sim import ShotRecord, run_batch, run_shot
from .dem import (
    DetectorErrorModel,
    ErrorMechanism,
    LossLocationDem,
    build_loss_dem,
    build_pauli_dem,
    decompose_to_graph,
    merge,
    mix_loss_dems,
)
from .lossgraph import (
    Edge,
    KMatchingSolution,
    LossGraph,
    accurate_posterior,
    build_loss_graph,
    connected_components,
    fast_posterior,
    independent_posterior,
    posterior_to_location_weights,
)
from .matching import MatchingGraph, Syndrome, decode
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    GridPoint,
    estimate_threshold,
    fit_powerlaw,
    gain,
    logical_error_per_round,
    run_experiment,
)

__version__ = "0.1.0"
