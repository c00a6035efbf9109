"""Anytime bounds on posterior CDFs in discrete Bayesian networks via state-space abstraction."""

__version__ = "0.1.0"

from .abstraction import AbstractionPlan, Bound, Direction, Partition, build_abn
from .decision import (
    DecisionSet,
    UtilityTable,
    admissible_decisions,
    admissible_decisions_from_bounds,
    expected_value,
    expected_value_interval,
    is_supermodular,
)
from .eligibility import Eligibility, Rejection, check_node, check_theorem1, check_theorem2, derived_sign
from .inference import ZeroProbabilityEvidence, brute_force_posterior, joint_posterior, posterior
from .issa import BoundsTrace, interval_probability, iterate_bounds, run_issa, select_abstraction_nodes, split
from .netmodel import BayesianNetwork, Cpt, Variable, load_network, parse_evidence, parse_network, serialize_network, validate
from .stochdom import Sign, detect_generalized_sign, detect_sign, fsd, monotonize_cpt
from .traceio import TraceWriter, parse_trace

__all__ = [
    "AbstractionPlan", "Bound", "Direction", "Partition", "build_abn",
    "DecisionSet", "UtilityTable", "admissible_decisions", "admissible_decisions_from_bounds",
    "expected_value", "expected_value_interval", "is_supermodular",
    "Eligibility", "Rejection", "check_node", "check_theorem1", "check_theorem2", "derived_sign",
    "ZeroProbabilityEvidence", "brute_force_posterior", "joint_posterior", "posterior",
    "BoundsTrace", "interval_probability", "iterate_bounds", "run_issa", "select_abstraction_nodes", "split",
    "BayesianNetwork", "Cpt", "Variable", "load_network", "parse_evidence", "parse_network", "serialize_network", "validate",
    "Sign", "detect_generalized_sign", "detect_sign", "fsd", "monotonize_cpt",
    "TraceWriter", "parse_trace",
]
