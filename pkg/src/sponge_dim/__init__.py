"""Dimensions of self-affine sponges: Bernoulli, pseudo-Bernoulli and variational."""

from .cycles import (
    CircularCycle,
    ConstantCycle,
    Cycle,
    KnotCycle,
    ScaleSolution,
    accumulate,
    delta_r,
    delta_rB,
    delta_rB_forms,
    is_nondegenerate,
    solve_scale,
)
from .gap import (
    GapMatrices,
    GapParams,
    beta,
    build_gap_ifs,
    build_matrices,
    delta0,
    delta_gamma,
    eps_max,
    gap_report,
    quadratic_form_check,
    solve_t0,
)
from .ifs import (
    BaseMap,
    BlockIFS,
    Classification,
    DiagonalIFS,
    ValidationResult,
    classify,
    cylinder,
    is_good_measure,
    is_good_set,
    validate,
)
from .measure import (
    block_from_rates,
    cond_entropy,
    delta_p,
    delta_p_integral,
    delta_p_sorted,
    entropy,
    lyapunov,
)
from .optimize import DimensionReport, OptimizerConfig, dynamical_dimension, hausdorff_lb, verify_bounds
from .oracle import EmpiricalConfig, EmpiricalResult, empirical_pointwise_dim, mcmullen_dim, moran_dim
from .serialize import SpecError, dump_spec, load_spec, parse_spec

__version__ = "0.1.0"
