"""Path counting, branching graphs, central Markov chains and tree-walk simulation."""
from __future__ import annotations

__version__ = "0.1.0"

from .paths import catalan, count_ballot, count_motzkin, enumerate_paths, motzkin_number
from .graphs import (
    EndSpec,
    LeveledMultiGraph,
    bsharp_graph,
    dim_between,
    fc_tree,
    graphs_isomorphic_up_to,
    motzkin_graph,
    pascalize,
    semi_pascal,
)
from .fusscat import bracket_dim, bracket_dim_derooted, g_eval, lln_limit, power_coeff
from .chains import (
    aux_walk,
    ballot_chain,
    fib_walk,
    motzkin_chain,
    verify_centrality,
)

__all__ = [
    "EndSpec",
    "LeveledMultiGraph",
    "aux_walk",
    "ballot_chain",
    "bracket_dim",
    "bracket_dim_derooted",
    "bsharp_graph",
    "catalan",
    "count_ballot",
    "count_motzkin",
    "dim_between",
    "enumerate_paths",
    "fc_tree",
    "fib_walk",
    "g_eval",
    "graphs_isomorphic_up_to",
    "lln_limit",
    "motzkin_chain",
    "motzkin_graph",
    "motzkin_number",
    "pascalize",
    "power_coeff",
    "semi_pascal",
    "verify_centrality",
]
