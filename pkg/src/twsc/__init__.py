"""Sparsest cut on bounded-treewidth graphs: relaxation, rounding and analysis.

Modules
-------
instances   instances, tree decompositions, brute-force oracles, generators
simplex     LP model with an exact tableau solver and a certified HiGHS route
salp        the bag-local lift-and-project relaxation and its solutions
rounding    the bag-by-bag rounding, its exact law and derandomization
markov      separator chains as layered flow graphs and their potentials
lowerbound  the graph showing a factor-k loss and flows-to-instances conversion
cli         command-line driver
"""
from .instances import Instance, TreeDecomposition, brute_force_sparsest_cut
from .rounding import derandomize, exact_distribution, sc_round
from .salp import SaSolution, solve_relaxation

__all__ = [
    "Instance",
    "TreeDecomposition",
    "brute_force_sparsest_cut",
    "SaSolution",
    "solve_relaxation",
    "sc_round",
    "exact_distribution",
    "derandomize",
]
__version__ = "0.1.0"
