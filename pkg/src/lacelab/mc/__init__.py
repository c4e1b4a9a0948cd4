"""Monte Carlo percolation sampling on tori."""

from .core import (
    ClusterDecomposition,
    ObservableTable,
    SimulationPlan,
    active_kernel,
    estimate_pc,
    kernel_module,
    measure,
    sample_clusters,
    sample_rng,
    wrapping_probability,
)

__all__ = [
    "ClusterDecomposition",
    "ObservableTable",
    "SimulationPlan",
    "active_kernel",
    "estimate_pc",
    "kernel_module",
    "measure",
    "sample_clusters",
    "sample_rng",
    "wrapping_probability",
]
