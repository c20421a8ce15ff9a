"""Certificates, audits, dimension estimates, the Voronoi oracle and strata."""

from medax.analysis.certificate import (
    Certificate,
    LipschitzFit,
    chart_key,
    cone_avoidance_audit,
    lipschitz_graph_fit,
    make_certificate,
)
from medax.analysis.dimension import DimensionEstimate, box_dimension, set_dimension
from medax.analysis.oracle import equidistance_system, voronoi_mk_oracle
from medax.analysis.strata import StratumReport, stratification_report

__all__ = [
    "Certificate",
    "DimensionEstimate",
    "LipschitzFit",
    "StratumReport",
    "box_dimension",
    "chart_key",
    "cone_avoidance_audit",
    "equidistance_system",
    "lipschitz_graph_fit",
    "make_certificate",
    "set_dimension",
    "stratification_report",
    "voronoi_mk_oracle",
]
