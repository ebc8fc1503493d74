"""Lower bounds on LOCC-distillable GHZ rates of multipartite pure states,
with a simulator for the randomized partition protocol behind them."""

from .bounds import (
    BoundReport,
    OneShotParams,
    closed_form_k3,
    closed_form_k4,
    corollary_N,
    oneshot_N,
    subrank_rate_bound,
    symmetric_closed_form,
    theorem1_bound,
)
from .entropy import (
    ConditionalPair,
    EntropyProfile,
    binary_entropy,
    conditional_shannon,
    majorizes,
    max_entropy_conditional,
    maximize_conditional_entropy,
    min_entropy,
    purified_distance,
    renyi,
    renyi_down,
    renyi_up,
    shannon,
)
from .lp import CoveringLP, LpSolution, enumerate_dual_vertices, solve_dual, solve_primal
from .marginals import (
    DensityMatrix,
    concurrence,
    cut_upper_bound,
    eof,
    reduced_density,
    smolin_bound,
    streltsov_bound,
    von_neumann,
)
from .protocol import (
    GhzEnsemble,
    PartitionFamily,
    achievable_value,
    build_ensemble,
    collision_graph,
    exact_expectation,
    extract_ghz_count,
    isolated_vertices,
    meanbounds_sandwich,
    run_protocol,
    sample_partitions,
)
from .states import (
    JointDistribution,
    LocalUnitary,
    PureState,
    SupportSet,
    apply_local_unitary,
    asymmetric_w,
    distribution_of,
    family,
    ghz,
    ghz_p,
    load_state,
    permutation_superposition,
    rohrlich,
    support_of,
    tensor_power,
    truncate_to_typical,
    w,
)
from .subrank import brute_force_subrank, is_diagonal, is_free, product_set

__version__ = "0.1.0"
