"""Python bindings for the evoscale core operations."""

from ._evoscale import (  # noqa: F401
    UrnConfig,
    __version__,
    allocation_sweep,
    assign_credit_irft,
    extract_solution,
    first_peak_index,
    propagate_values,
    rpucg_score,
    simulate_chain,
    simulate_ensemble,
    token_partition_ok,
    urn_score,
    urn_step_probs,
)
