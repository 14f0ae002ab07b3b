"""Randomized compiling for noisy qudit measurements.

The toolkit builds instruments from circuits, averages them over random
Weyl dressings and checks that the result has the uniform stochastic form.
"""

from .channels import (
    OneDesign,
    StochasticCertificate,
    Superoperator,
    choi_matrix,
    cp_tp_check,
    is_unnormalized_stochastic,
    kraus_to_superop,
    twirl,
    unitary_channel,
    weyl_channel,
    weyl_design,
    weyl_twirl,
)
from .errors import (
    DimensionCapError,
    DimensionError,
    DomainError,
    EnumerationCapError,
    RCMeasError,
    ResourceError,
    UnsupportedError,
)
from .instruments import (
    ConfusionMatrix,
    ExtractionFailure,
    Instrument,
    UniformStochasticForm,
    apply,
    confusion_matrix,
    extract_uniform_stochastic_form,
    ideal_subsystem_measurement,
    random_instrument,
)
from .noise import (
    IndirectMeasurementSpec,
    indirect_measurement,
    leakage_report,
    overrotated_readout_instrument,
    weyl_indirect_measurement,
)
from .rc import (
    DressingTuple,
    RCReport,
    dephasing_average,
    dress_instrument,
    rc_average_exact,
    rc_average_sampled,
    rc_clifford_average,
)
from .weyl import (
    QuditDims,
    WeylLabel,
    controlled_weyl,
    fourier,
    weyl_matrix,
    x_matrix,
    z_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ConfusionMatrix",
    "DimensionCapError",
    "DimensionError",
    "DomainError",
    "DressingTuple",
    "EnumerationCapError",
    "ExtractionFailure",
    "IndirectMeasurementSpec",
    "Instrument",
    "OneDesign",
    "QuditDims",
    "RCMeasError",
    "RCReport",
    "ResourceError",
    "StochasticCertificate",
    "Superoperator",
    "UniformStochasticForm",
    "UnsupportedError",
    "WeylLabel",
    "apply",
    "choi_matrix",
    "confusion_matrix",
    "controlled_weyl",
    "cp_tp_check",
    "dephasing_average",
    "dress_instrument",
    "extract_uniform_stochastic_form",
    "fourier",
    "ideal_subsystem_measurement",
    "indirect_measurement",
    "is_unnormalized_stochastic",
    "kraus_to_superop",
    "leakage_report",
    "overrotated_readout_instrument",
    "random_instrument",
    "rc_average_exact",
    "rc_average_sampled",
    "rc_clifford_average",
    "twirl",
    "unitary_channel",
    "weyl_channel",
    "weyl_design",
    "weyl_indirect_measurement",
    "weyl_matrix",
    "weyl_twirl",
    "x_matrix",
    "z_matrix",
]
