"""Ordering, capacity and coding of hybrid classical-quantum memories."""

from .budget import BudgetExceeded
from .coding import (
    Channel,
    TypicalSummary,
    code_feasible,
    coding_fidelity,
    dense_sup,
    holder_bound,
    identity_channel,
    nogo_rate,
    random_subunital_channel,
    typical_algebra,
    verify_typical_bounds,
)
from .entropy import (
    CapacityRegion,
    DiagonalState,
    ThermalEnsemble,
    capacity_point,
    classical_entropy,
    make_state,
    quantum_entropy,
    realize_point,
    region_boundary,
    region_contains,
    region_subset,
    thermal_state,
)
from .largedev import (
    BulkConstruction,
    BulkVerdict,
    ClassicalPathError,
    LogLaplace,
    NotBulkEmbeddable,
    Status,
    analytic_n_bound,
    bulk_check,
    bulk_construct,
    chernoff_upper,
    cramer_lower,
    ell,
    exact_tail,
    legendre,
)
from .packing import BratteliDiagram, decide_embed, embed_search, greedy_embed, verify_diagram
from .shapes import (
    Shape,
    log_p_norm,
    make_shape,
    parse_shape,
    part_count_ge,
    repeat,
    supermajorizes,
    tail_ge,
    tensor,
    tensor_power,
)

__version__ = "0.1.0"
