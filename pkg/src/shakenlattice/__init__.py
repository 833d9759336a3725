"""Shaken optical-lattice beamsplitter simulations and waveform optimization."""

__version__ = "0.1.0"

from .lattice import (
    LatticeConfig,
    MomentumState,
    BlochSolution,
    PopulationVector,
    SplitTarget,
    build_hamiltonian,
    solve_bloch,
    ground_state,
    transition_frequency,
    make_split_state,
    population_vector,
    split_population,
    error_metric,
    split_overlap,
    extract_relative_phase,
)

__all__ = [
    "__version__",
    "LatticeConfig",
    "MomentumState",
    "BlochSolution",
    "PopulationVector",
    "SplitTarget",
    "build_hamiltonian",
    "solve_bloch",
    "ground_state",
    "transition_frequency",
    "make_split_state",
    "population_vector",
    "split_population",
    "error_metric",
    "split_overlap",
    "extract_relative_phase",
]
