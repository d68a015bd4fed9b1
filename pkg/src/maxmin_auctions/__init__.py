"""Worst-case revenue of standard auctions under rearrangement-invariant ambiguity."""

from .ambiguity import (
    AmbiguitySet,
    WorstCaseSolution,
    best_case_revenue,
    divergence_preference_value,
    gibbs_value,
    monotone_minimizer_diagnostic,
    parse_ambiguity,
    worst_case_revenue,
)
from .auctions import AuctionSpec, TransferFunction, parse_auction, transfer
from .comparison import (
    check_nwscc,
    check_rrc,
    check_scc,
    check_wscc,
    linkage_diagnostics,
    rank_auctions,
)
from .measure import (
    UNIFORM,
    Grid1D,
    PowerMarginal,
    ReferenceBelief,
    build_band_reference,
    build_iid_reference,
    divergence,
)

__all__ = [
    "AmbiguitySet", "WorstCaseSolution", "best_case_revenue", "divergence_preference_value",
    "gibbs_value", "monotone_minimizer_diagnostic", "parse_ambiguity", "worst_case_revenue",
    "AuctionSpec", "TransferFunction", "parse_auction", "transfer",
    "check_nwscc", "check_rrc", "check_scc", "check_wscc", "linkage_diagnostics", "rank_auctions",
    "UNIFORM", "Grid1D", "PowerMarginal", "ReferenceBelief", "build_band_reference",
    "build_iid_reference", "divergence",
]
