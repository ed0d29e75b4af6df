"""cklab: spectra of nonlinear random-feature kernels.

Sample the kernel (1/m) f(WX/sqrt(n0)) f(WX/sqrt(n0))^T and its linear
surrogate ensembles, compute full or top-k spectra, predict bulk edges and
outlier positions in closed form or through the empirical D-transform, and
verify the moment combinatorics behind those predictions by brute force.
"""

from .activations import (
    Activation,
    ThetaParams,
    cos_family,
    even_centered_monomial,
    gaussian_expectation,
    hermite_mixture,
    identity,
    parse_activation,
    polynomial,
    relu,
    taylor_centered,
    theta_params,
)
from .combinatorics import (
    GraphCensus,
    enumerate_admissible,
    moment_formula,
    monte_carlo_moment,
    monte_carlo_moments,
    narayana,
    set_partitions,
)
from .config import ExperimentConfig, load_config, parse_config
from .distributions import (
    EntryDistribution,
    gaussian,
    mixture,
    moment_summary,
    parse_distribution,
    rademacher,
    sample_matrix,
    table,
)
from .ensemble import (
    FactorMatrix,
    Shape,
    conjugate_kernel_factor,
    linear_surrogate_factor,
    load_factor,
    save_factor,
)
from .errors import (
    CklabError,
    ConfigError,
    DimensionError,
    HypothesisError,
    NumericError,
    ParameterError,
    QuadratureError,
)
from .spectra import (
    SpectrumResult,
    companion_spectrum,
    empirical_stieltjes,
    full_spectrum,
    histogram,
    ridge_loss_spectral,
    spectrum_to_csv,
    spectrum_to_json,
    top_eigenvalues,
)
from .streams import stream
from .theory import (
    PredictionReport,
    bbp_prediction,
    classify_outliers,
    d_transform,
    ks_distance,
    mp_cdf,
    mp_density,
    mp_edges,
    mp_zero_mass,
    outlier_from_d_transform,
    wigner_identity_residual,
    wigner_rho,
)

__version__ = "0.1.0"
