"""Counting overlapping Gaussian clusters through interference of complex amplitudes.

The classical route smooths the data with a Gaussian kernel.  The quantum
route sums complex kernels ``exp(i A(x_i, y) / hbar + i phi_i)``, where ``A``
is half the squared Mahalanobis distance, and squares the modulus.  Clusters
given opposite phases cancel between their centres, which separates peaks
that the classical density merges.
"""

from .analytic import (
    InterferenceDiagnostics,
    Lemma1Params,
    interference_diagnostics,
    lemma1_classical,
    lemma1_quantum,
    multi_cluster_classical,
    multi_cluster_quantum,
    quadrature_oracle,
)
from .detection import PeakReport, count_peaks, field_entropy, field_metrics, field_sparsity
from .errors import ConfigError, DegenerateFieldError, NumericalError, QuadratureError
from .estimators import (
    AmplitudeField,
    DensityField,
    EvaluationGrid,
    PhaseStrategy,
    assign_phases,
    classical_density,
    default_grid,
    quantum_amplitude,
    quantum_density,
    quantum_density_pairwise,
)
from .gaussian_core import (
    ComplexGaussian,
    action,
    complex_gaussian_eval,
    gaussian_convolution,
    gaussian_pdf,
    gaussian_product,
)
from .harness import ExperimentConfig, parse_config, preset, run_experiment, sweep_report
from .synthesis import (
    ClusterSpec,
    Dataset,
    MixtureModel,
    sample_mixture,
    separation,
    stratified_sample,
)

__version__ = "0.1.0"
