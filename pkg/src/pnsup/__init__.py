"""Photon-number superposition toolkit.

Forward model of a coherently driven two-level emitter, exact and
closed-form beamsplitter interference of its photon-number
superpositions, a synthetic unbalanced Mach-Zehnder experiment, and the
inverse pipeline recovering the state from measured visibilities.
"""

__version__ = "0.1.0"

from .analysis import (
    AnalysisReport,
    InversionResult,
    LambdaFit,
    PhaseMapped,
    analyze_stream,
    extract_visibility,
    fit_lambda_linear,
    invert_two_photon,
    report,
    time_to_phase,
)
from .emitter import (
    PRESETS,
    EmissionState,
    PulseConfig,
    TwoLevelTrajectory,
    emission_state,
    evolve,
    rabi_frequency,
    rabi_sweep,
    two_photon_correlation,
)
from .errors import (
    DegenerateDataError,
    InfeasibleMeasurementsError,
    InsufficientContrastError,
    IntegrationError,
    MixedInputError,
    TruncationError,
    UndefinedObservableError,
    ValidationError,
)
from .fock import (
    DensityMatrix,
    NumberState,
    cat_fidelity,
    cat_populations,
    density_of,
    g2_zero,
    mean_photon,
    purity,
)
from .interference import (
    InterferenceObservables,
    JointFockState,
    bs_output,
    closed_coincidences,
    closed_singles,
    coincidence_visibility,
    coincidences_from_state,
    normalized_coincidence_curve,
    singles_from_state,
    singles_visibility,
    v1_with_phases,
    write_fringe_csv,
)
from .mzi import (
    DriftParams,
    ExperimentConfig,
    TagStream,
    apply_loss,
    phase_drift,
    read_stream,
    synthesize,
    theta_to_M,
    write_stream,
)
