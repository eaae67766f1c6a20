"""Secret key rates for CV-MDI QKD when sender and detector temporal modes are mismatched."""

from .errors import (
    CvmdiError,
    DegenerateWaveformError,
    DivergentGainError,
    DomainError,
    EstimationError,
    NoKeyError,
    NumericalError,
    UnphysicalStateError,
    ValidationError,
)
from .gaussian import (
    condition_on_heterodyne,
    entropy_g,
    holevo_bound_rr,
    mutual_information,
    symplectic_eigenvalues,
)
from .keyrate import (
    FiniteSizeParams,
    KeyRateResult,
    asymptotic_key_rate,
    finite_size_delta,
    finite_size_key_rate,
    worst_case_estimates,
)
from .protocol import (
    ChannelParams,
    EquivalentOneWay,
    GainSettings,
    ModeMatchingSet,
    ProtocolParams,
    Scenario,
    covariance_matrix,
    equivalent_channel,
    optimal_gains,
    pm_eb_gain,
    transmittance,
)
from .temporal import DetectorMode, TemporalMode, apply_mismatch, detector_tm, mode_match, normalize

__version__ = "0.1.0"
