"""Ridge regression with random features: estimators, feature maps, leverage
sampling and a spline-kernel rate laboratory."""

from .errors import (
    CapabilityError,
    ConfigurationError,
    DegenerateDistributionError,
    DomainError,
    NumericalError,
    RFRidgeError,
    SaturationError,
)
from .feature_maps import (
    Family,
    FeatureMapSpec,
    Frequencies,
    SampledFeatures,
    approx_error_report,
    exact_kernel,
    feature_matrix,
    kernel_matrix,
    psi,
    sample_features,
)
from .ridge_solvers import (
    Dataset,
    KRRModel,
    RFModel,
    empirical_risk,
    fit_krr,
    fit_linear_ridge,
    fit_rf_ridge,
    predict,
)
from .spectral import (
    SpectralReport,
    empirical_effective_dimension,
    leverage_resample,
    leverage_scores,
    monte_carlo_effective_dimension,
)

__version__ = "0.1.0"
