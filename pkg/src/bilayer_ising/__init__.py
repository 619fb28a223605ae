"""Bilayer hidden/observed Ising model on finite regular trees.

Solvers for the translation-invariant boundary-law recursion, exact
finite-volume measures with a compatibility oracle, edge conditionals,
forward sampling, and exact hidden-layer inference (sum-product /
max-product), plus a batch CLI.
"""

from .tree import TreeShape, ball, edges, generation, successors, parent
from .model import (
    BilayerConfig,
    DerivedParams,
    ModelParams,
    derive,
    energy_loss,
    flip_spins,
    hamiltonian,
    parse_params,
)
from .solver import (
    FixedPoint3,
    MultistartConfig,
    ScalarEqParams,
    SolutionSet,
    apply_F,
    classify_tigm_count,
    closed_form_k2,
    lemma_xy_z1,
    residual,
    solve_full_3d,
    solve_invariant_sets,
    solve_k1_symmetric,
    solve_scalar,
    solve_symmetric_diagonal,
)
from .measure import (
    BilayerKernel,
    BoundaryLaw,
    CapacityError,
    FiniteVolumeMeasure,
    VertexWeight,
    check_compatibility,
    curve_data,
    edge_conditional,
    finite_volume,
    markov_kernel,
    sample,
    sample_many,
)
from .inference import (
    InferenceProblem,
    MarginalTable,
    PosteriorTable,
    anomaly_scores,
    bp_marginals,
    denoise,
    exact_posterior,
    map_estimate,
)

__version__ = "0.1.0"
