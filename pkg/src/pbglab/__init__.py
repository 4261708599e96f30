"""Numerical toolkit for principal bundle groupoids and their Lie algebroids.

Matrix Lie groups, trivial-chart bundles with a fiber action, the trivial
PBG algebroid bracket, isometablic connections and their curvature,
transition data, path lifting and holonomy, and a JSON experiment runner.
"""
from . import (action, algebroid, bundle, checks, connection, expr, groupoid, holonomy, hopf, io,
               liegroup, transition)
from .algebroid import TrivialPBGAlgebroid, algebroid_laws
from .bundle import ChartedBundle, Domain, build_hopf, trivial_bundle
from .connection import ConnectionForm, curvature, standard_flat
from .holonomy import ambrose_singer_check, hat, lift, loop_holonomy
from .io import load_spec, run_spec, write_report
from .liegroup import MatrixLieGroup, builtin
from .result import CheckResult
from .transition import build_from_flats, hopf_transition_data

__version__ = "0.1.0"

__all__ = [
    "action", "algebroid", "bundle", "checks", "connection", "expr", "groupoid", "holonomy", "hopf",
    "io", "liegroup", "transition",
    "TrivialPBGAlgebroid", "algebroid_laws", "ChartedBundle", "Domain", "build_hopf", "trivial_bundle",
    "ConnectionForm", "curvature", "standard_flat", "ambrose_singer_check", "hat", "lift",
    "loop_holonomy", "load_spec", "run_spec", "write_report", "MatrixLieGroup", "builtin",
    "CheckResult", "build_from_flats", "hopf_transition_data",
]
