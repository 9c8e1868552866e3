"""Rate-splitting transform coding for CSI feedback under basis mismatch.

Modules
-------
channel     structured covariances, eigenbases, Gaussian channel draws
rwf         reverse water-filling and the coefficient distortion
quantizers  Lloyd-Max / dithered scalar quantizers and Grassmannian RVQ
mismatch    end-to-end distortion model and the exact T1/T2/T3 split
ratesplit   optimal coefficient/basis split and the phase threshold
harness     configuration, Monte Carlo sweeps, moment matching, result files
dump        binary channel-dump and codebook formats
"""

from .channel import (
    ChannelBatch, eig_hermitian, exp_correlation, kron_covariance, kron_eigenbasis,
    kron_order, sample_channels,
)
from .errors import (
    CapacityError, ConvergenceError, DegenerateSourceError, FormatError, RSTCError,
    ValidationError,
)
from .mismatch import (
    DistortionReport, MismatchModel, d0_model, decompose_distortion, distortion_terms,
    e2e_model, estimate_cn, fit_rvq_scaling,
)
from .quantizers import (
    CoefficientCodeword, QuantizedBasis, QuantizerConfig, ScalarQuantizer,
    empirical_entropy, lloyd_max_design, quantize_basis, quantize_coeffs, quantize_columns,
    rvq_codebook, rvq_quantize, uniform_dithered,
)
from .ratesplit import (
    PhaseThreshold, RateSplit, effective_rate, optimal_split, phase_threshold,
    split_consistency_check,
)
from .rwf import BitAllocation, dq, mu_closed_form, water_level

__version__ = "0.1.0"
