"""Radial feeder power flow, inverter reactive-power policies and loss-ordering checks."""

from .analysis import (
    CaseId,
    CaseVerdict,
    Mode,
    TwoBusCase,
    brute_force_best,
    build_canonical_feeder,
    certify_case,
    check_first_component_dominance,
    closed_form_loss,
    random_case,
)
from .control import Policy, apply_heuristic, apply_no_action, apply_policy
from .feeder import Bus, NodeClass, RadialFeeder, SetpointProfile, classify_node, validate_feeder
from .feederfile import dump_feeder, load_feeder, parse_feeder
from .powerflow import Diverged, SolvedState, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "Bus",
    "CaseId",
    "CaseVerdict",
    "Diverged",
    "Mode",
    "NodeClass",
    "Policy",
    "RadialFeeder",
    "SetpointProfile",
    "SolvedState",
    "SolverConfig",
    "TwoBusCase",
    "apply_heuristic",
    "apply_no_action",
    "apply_policy",
    "brute_force_best",
    "build_canonical_feeder",
    "certify_case",
    "check_first_component_dominance",
    "classify_node",
    "closed_form_loss",
    "dump_feeder",
    "load_feeder",
    "parse_feeder",
    "random_case",
    "solve",
    "validate_feeder",
]
