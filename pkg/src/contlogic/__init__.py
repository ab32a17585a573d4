"""Workbench for continuous infinitary logic over finite metric structures."""

__version__ = "0.1.0"

from .numerics import (
    INF,
    Interval,
    Modulus,
    Rational,
    UniversalModulus,
    WeakModulus,
    eval_modulus,
    format_rational,
    parse_modulus,
    parse_rational,
    rat,
    universal_modulus,
)
from .structures import (
    DiscreteEncoding,
    FunctionSymbol,
    MetricStructure,
    PredicateSymbol,
    Signature,
    encode_discrete,
    load_structure,
    load_structure_file,
    save_structure,
    save_structure_file,
    validate_structure,
)
from .formulas import (
    Formula,
    QuantRank,
    demorgan_dual,
    infer_bound,
    infer_modulus,
    parse_formula,
    prenex,
    quant_rank,
    regularize,
    tuple_distance_formula,
)
from .evaluator import Evaluator, audit_modulus, eval_all, eval_formula
from .fragments import DistinguishingFamily, qf_basis, qf_fragment, type_fragment
from .baf import (
    BafConfig,
    BafSet,
    BafWorkspace,
    approx_iso_decide,
    baf_compute,
    brute_force_isomorphic,
    extract_iso,
    k_set,
)
from .orbits import (
    ScottArtifacts,
    ScottRankResult,
    automorphisms,
    orbit_distance,
    orbit_of,
    orbit_predicates,
    scott_rank,
    scott_sentence,
    sentence_value,
    synthesize_orbit_formula,
)
from .types_support import (
    Condition,
    ConditionSet,
    PartialType,
    check_support,
    find_support,
    fragment_type,
    henkin_run,
    theta,
    theta_rank_bound,
    validate_conditions,
)
