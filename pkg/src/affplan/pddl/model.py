"""Typed model of the planning language subset, plus the unparser.

Supported subset: conjunctive preconditions and goals of possibly negated
atoms, add/delete effects, flat or hierarchical object types. Ground atoms
are plain tuples ('pred', 'arg1', ...) so states can be frozensets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "SUPPORTED_REQUIREMENTS",
    "GroundAtom",
    "TypedVar",
    "Predicate",
    "Literal",
    "ActionSchema",
    "DomainDef",
    "ProblemDef",
    "domain_to_pddl",
    "problem_to_pddl",
]

SUPPORTED_REQUIREMENTS = (":strips", ":typing", ":negative-preconditions")

GroundAtom = tuple  # ("pred", "obj1", ...) after grounding

ROOT_TYPE = "object"


@dataclass(frozen=True)
class TypedVar:
    """A ?variable with its type (defaults to the root type)."""

    name: str
    type: str = ROOT_TYPE


@dataclass(frozen=True)
class Predicate:
    name: str
    params: tuple[TypedVar, ...]

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class Literal:
    """A possibly negated atom over variables and/or constants."""

    pred: str
    args: tuple[str, ...]
    negated: bool = False

    def atom(self) -> GroundAtom:
        return (self.pred, *self.args)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[TypedVar, ...]
    precondition: tuple[Literal, ...]
    add: tuple[Literal, ...]
    delete: tuple[Literal, ...]


@dataclass(frozen=True)
class DomainDef:
    name: str
    requirements: tuple[str, ...]
    # type -> parent type (ROOT_TYPE's parent is None)
    types: dict[str, str | None] = field(default_factory=dict)
    predicates: dict[str, Predicate] = field(default_factory=dict)
    actions: dict[str, ActionSchema] = field(default_factory=dict)

    def is_subtype(self, t: str, ancestor: str) -> bool:
        if ancestor == ROOT_TYPE:
            return True
        cur: str | None = t
        while cur is not None:
            if cur == ancestor:
                return True
            cur = self.types.get(cur)
        return False

    def __eq__(self, other) -> bool:
        if not isinstance(other, DomainDef):
            return NotImplemented
        return (
            self.name == other.name
            and self.requirements == other.requirements
            and self.types == other.types
            and self.predicates == other.predicates
            and list(self.predicates) == list(other.predicates)
            and self.actions == other.actions
            and list(self.actions) == list(other.actions)
        )


@dataclass(frozen=True)
class ProblemDef:
    name: str
    domain: str
    objects: dict[str, str]  # object -> type
    init: frozenset  # of GroundAtom
    goal: tuple[Literal, ...]


# ---------------------------------------------------------------------------
# unparser


def _fmt_typed_list(items: tuple[TypedVar, ...]) -> str:
    """?x - t1 ?y ?z - t2 style.

    A type marker binds every name to its left back to the previous marker,
    so untyped (ROOT_TYPE) names may only drop their marker when nothing
    typed follows them; otherwise "- object" is written out.
    """
    parts: list[str] = []
    i = 0
    while i < len(items):
        j = i
        while j < len(items) and items[j].type == items[i].type:
            j += 1
        names = " ".join(tv.name for tv in items[i:j])
        if items[i].type == ROOT_TYPE and j == len(items):
            parts.append(names)
        else:
            parts.append(f"{names} - {items[i].type}")
        i = j
    return " ".join(parts)


def _fmt_literal(lit: Literal) -> str:
    atom = f"({lit.pred}{''.join(' ' + a for a in lit.args)})"
    return f"(not {atom})" if lit.negated else atom


def _fmt_conj(lits: tuple[Literal, ...]) -> str:
    return f"(and {' '.join(_fmt_literal(l) for l in lits)})" if lits else "(and)"


def domain_to_pddl(dom: DomainDef) -> str:
    """Render a domain back to source text.

    Parsing the output reproduces the input structure exactly (section
    order is canonical; init-style sets are not involved here).
    """
    out: list[str] = [f"(define (domain {dom.name})"]
    if dom.requirements:
        out.append(f"  (:requirements {' '.join(dom.requirements)})")
    declared = [t for t in dom.types if t != ROOT_TYPE]
    if declared:
        by_parent: dict[str, list[str]] = {}
        for t in declared:
            parent = dom.types[t] or ROOT_TYPE
            by_parent.setdefault(parent, []).append(t)
        chunks = []
        root_kids = by_parent.pop(ROOT_TYPE, None)
        for parent, kids in by_parent.items():
            chunks.append(f"{' '.join(kids)} - {parent}")
        if root_kids:
            # marker-less names would bind to a following "- parent" marker,
            # so the root-parented group must come last
            chunks.append(" ".join(root_kids))
        out.append(f"  (:types {' '.join(chunks)})")
    if dom.predicates:
        preds = " ".join(
            f"({p.name}{(' ' + _fmt_typed_list(p.params)) if p.params else ''})"
            for p in dom.predicates.values()
        )
        out.append(f"  (:predicates {preds})")
    for act in dom.actions.values():
        out.append(f"  (:action {act.name}")
        out.append(f"    :parameters ({_fmt_typed_list(act.params)})")
        out.append(f"    :precondition {_fmt_conj(act.precondition)}")
        effects = list(act.add) + [
            Literal(l.pred, l.args, negated=True) for l in act.delete
        ]
        out.append(f"    :effect {_fmt_conj(tuple(effects))})")
    out.append(")")
    return "\n".join(out) + "\n"


def problem_to_pddl(prob: ProblemDef) -> str:
    """Render a problem back to source text (init sorted for determinism)."""
    out: list[str] = [f"(define (problem {prob.name})"]
    out.append(f"  (:domain {prob.domain})")
    if prob.objects:
        groups: dict[str, list[str]] = {}
        for obj, typ in prob.objects.items():
            groups.setdefault(typ, []).append(obj)
        chunks = []
        untyped = groups.pop(ROOT_TYPE, None)
        for typ, objs in groups.items():
            chunks.append(f"{' '.join(objs)} - {typ}")
        if untyped:
            # as in the domain renderer: untyped names go last so they do
            # not bind to the next group's type marker
            chunks.append(" ".join(untyped))
        out.append(f"  (:objects {' '.join(chunks)})")
    atoms = sorted(prob.init)
    init = " ".join(f"({' '.join(a)})" for a in atoms)
    out.append(f"  (:init {init})")
    out.append(f"  (:goal {_fmt_conj(prob.goal)})")
    out.append(")")
    return "\n".join(out) + "\n"
