"""Dense tensor decompositions (CP, Tucker, symmetric power iteration) and
method-of-moments estimation of spherical Gaussian mixtures and
single-topic models."""

__version__ = "0.1.0"

from .core import (
    DenseTensor,
    KruskalTensor,
    element,
    fiber,
    fold,
    frobenius_norm,
    inner,
    kruskal_to_dense,
    outer,
    slice_tensor,
    unfold,
    vectorize,
)
from .cpd import CpConfig, CpResult, als_update, check_sufficient_uniqueness, cp_als, fit, jennrich, k_rank
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DataError,
    DimensionError,
    IllConditionedError,
    ParseError,
    RankDeficiencyError,
    StageError,
    TensorDecompError,
)
from .moments import (
    GmmSpec,
    MixtureEstimate,
    MomentSet,
    TopicSpec,
    estimate_mixture,
    gmm_generate,
    gmm_moments,
    topic_generate,
    topic_moments,
    unwhiten,
    whitened_power_estimate,
    whitening_matrix,
)
from .power import EigenPair, PowerConfig, extract_eigenpairs, matrix_power_method, tensor_power_step
from .products import (
    IDENTITY,
    hadamard,
    khatri_rao,
    kronecker,
    mode_n_matrix_product,
    mode_n_vector_product,
    multilinear_transform,
)
from .tucker import TuckerTensor, hooi, hosvd, n_rank, tucker_to_dense
