"""Qudit density-matrix simulation with noise tailoring and mitigation.

The package is organized around an Easy/Hard cycle circuit representation:
single-qudit (Easy) cycles are treated as cheap and clean, multi-qudit
(Hard) cycles carry the configurable noise.  On top of the simulator sit
randomized compiling, noiseless-output extrapolation, readout calibration,
state tomography, and transfer-matrix analytics, plus the study drivers
and command-line entry point that tie them together.
"""

from .algebra import (
    CapacityError,
    DensityMatrix,
    InvariantViolation,
    OutcomeDistribution,
    QuantumChannel,
    UnitaryMatrix,
    chain_channels,
    embed_channel,
    embed_operator,
    expectation,
    sample_counts,
    variation_distance,
)
from .weyl import (
    CliffordGate,
    NormalizerViolation,
    PhasedWeyl,
    WeylLabel,
    all_labels,
    clifford_conjugate,
    custom_clifford,
    cz_gate,
    czdag_gate,
    hadamard_clifford,
    sdiag_clifford,
    twirl_channel,
    weyl_commutator_phase,
    weyl_compose,
    weyl_eigenbasis,
    weyl_matrix,
)
from .circuit import (
    EASY,
    HARD,
    Circuit,
    CircuitParseError,
    CustomGate,
    Cycle,
    EigenbasisRotationGate,
    HaarUnitaryGate,
    HadamardGate,
    VirtualDiagGate,
    WeylGate,
    append_easy_gates,
    circuit_unitary,
    ghz_circuit,
    ghz_state,
    measure_distribution,
    parse,
    serialize,
    simulate,
    structurally_equal,
)
from .noise import (
    ConfusionMatrix,
    CrossKerrParams,
    NoiseModel,
    NoiseRule,
    PRESET_NAME,
    PRESET_VERSION,
    coherent_phase_error,
    cross_kerr_unitary,
    decay_channel,
    depolarizing_channel,
    paper_default_noise,
    rcal_circuits,
    rcal_confusion,
    rcal_correct,
    stochastic_weyl_channel,
    unitary_channel,
)
from .mitigation import (
    FoldSpec,
    INVERSE_PAIR,
    MitigatedEstimate,
    ORDER_POWER,
    RcConfig,
    bare_estimate,
    default_fold_specs,
    expectation_value,
    fold,
    fold_factor,
    hoeffding_bound,
    nox_distribution,
    nox_estimate,
    randomize,
    rc_distribution,
    rc_estimate,
)
from .tomography import (
    PurifyResult,
    ReconstructionResult,
    TomographyResult,
    TransferMatrix,
    coherent_fraction,
    decoherent_fidelity,
    expectation_from_distribution,
    fidelity,
    process_fidelity,
    project_state,
    purify,
    reconstruct,
    setting_circuit,
    state_tomography,
    tomo_settings,
    transfer_matrix,
    twirled_transfer,
    uhlmann_fidelity,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    characterize_entangling_phase,
    ghz_experiment,
    n_id_sweep,
    phase_characterization,
    rcs_circuit,
    rcs_experiment,
    run_experiment,
    twirl_decay_study,
)

__version__ = "0.1.0"
