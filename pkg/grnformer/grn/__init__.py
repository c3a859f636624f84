"""Gene regulatory network model: linking, assembly, degree statistics and file formats."""

from grnformer.grn.network import (
    DegreeReport,
    build_co_expression_graph,
    degree_stats,
    grn_from_eregulons,
    merge_grns,
    link_eregulon,
    pearson,
)
from grnformer.grn.io import (
    read_coordinates,
    read_edge_list,
    read_enhancers,
    read_eregulons,
    write_coordinates,
    write_edge_list,
    write_enhancers,
    write_eregulons,
)

__all__ = [
    "DegreeReport",
    "build_co_expression_graph",
    "degree_stats",
    "grn_from_eregulons",
    "merge_grns",
    "link_eregulon",
    "pearson",
    "read_coordinates",
    "read_edge_list",
    "read_enhancers",
    "read_eregulons",
    "write_coordinates",
    "write_edge_list",
    "write_enhancers",
    "write_eregulons",
]
