"""Shallow binary stochastic feedforward networks: constructive
compilers for arbitrary Markov kernels, exact kernel evaluation, and
verification tooling."""

from .core import (
    BlockMeta,
    LayerParams,
    NetworkParams,
    all_states,
    bin_of,
    check_dist_vec,
    check_kernel,
    clamp_to_interior,
    highest_set,
    index_of,
    kernel_shape,
    kl_divergence,
    logit,
    orthant_index,
    sigmoid,
    tv_distance,
)
from .construct import (
    Bounds,
    ResidualReport,
    SplitterParams,
    chain_forward,
    compile_distribution,
    compile_fixed_output,
    compile_free_output,
    edge_unit,
    even_share,
    first_layer,
    fixed_output_layer,
    hidden_unit_bounds,
    invert_chain,
    orthant_weights,
    solve_splitter,
    weighted_pair_ratios,
)
from .evaluate import (
    ENUMERATION_CAP,
    EnumerationCapError,
    compose_row_blockwise,
    compose_row_naive,
    full_kernel,
    layer_row,
    product_mass,
)
from .estimators import (
    DistributionNetworkCompiler,
    GradientKernelFitter,
    KernelNetworkCompiler,
)
from .fitting import FitConfig, fit, gradient, objective, refine
from .harness import (
    CounterRng,
    VerifyReport,
    alpha_sweep,
    pairing_probe,
    sample_kernel,
    tightness_table,
    verify,
)

__all__ = [
    "BlockMeta", "Bounds", "CounterRng", "DistributionNetworkCompiler",
    "ENUMERATION_CAP", "EnumerationCapError", "FitConfig",
    "GradientKernelFitter", "KernelNetworkCompiler", "LayerParams",
    "NetworkParams", "ResidualReport", "SplitterParams", "VerifyReport",
    "all_states", "alpha_sweep", "bin_of", "chain_forward",
    "check_dist_vec", "check_kernel", "clamp_to_interior",
    "compile_distribution", "compile_fixed_output", "compile_free_output",
    "compose_row_blockwise", "compose_row_naive", "edge_unit",
    "even_share", "first_layer", "fit", "fixed_output_layer",
    "full_kernel", "gradient", "hidden_unit_bounds", "highest_set",
    "index_of", "invert_chain", "kernel_shape", "kl_divergence",
    "layer_row", "logit", "objective", "orthant_index",
    "orthant_weights", "pairing_probe", "product_mass", "refine",
    "sample_kernel", "sigmoid", "solve_splitter", "tightness_table",
    "tv_distance", "verify", "weighted_pair_ratios",
]
