"""STRIPS-style planning: parser, grounder, search, validation."""

from .errors import (
    PddlError,
    PddlSemanticError,
    PddlSyntaxError,
    UnknownActionError,
    UnsupportedFeatureError,
)
from .ground import GroundAction, GroundTask, ground
from .model import (
    ActionSchema,
    DomainDef,
    Literal,
    Predicate,
    ProblemDef,
    TypedVar,
    domain_to_pddl,
    problem_to_pddl,
)
from .parser import parse_domain, parse_goal, parse_problem
from .search import Plan, Unsolvable, ValidationResult, plan, progress, validate

__all__ = [
    "PddlError",
    "PddlSyntaxError",
    "PddlSemanticError",
    "UnsupportedFeatureError",
    "UnknownActionError",
    "TypedVar",
    "Predicate",
    "Literal",
    "ActionSchema",
    "DomainDef",
    "ProblemDef",
    "domain_to_pddl",
    "problem_to_pddl",
    "parse_domain",
    "parse_problem",
    "parse_goal",
    "GroundAction",
    "GroundTask",
    "ground",
    "Plan",
    "Unsolvable",
    "ValidationResult",
    "plan",
    "validate",
    "progress",
]
