"""Grounding: schemas + objects -> integer-indexed ground task.

Predicates never touched by any effect are static. Static preconditions are
evaluated once against the initial state: bindings that violate one are
dropped, the rest lose the check. The remaining (dynamic) atoms get dense
integer ids, so search states are frozensets of ints.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import PddlSemanticError
from .model import ActionSchema, DomainDef, GroundAtom, ProblemDef

__all__ = ["GroundAction", "GroundTask", "ground"]


@dataclass(frozen=True)
class GroundAction:
    name: str  # "(pick fork)" style
    pre_pos: frozenset[int]
    pre_neg: frozenset[int]
    add: frozenset[int]
    delete: frozenset[int]


@dataclass
class GroundTask:
    """A grounded planning task over integer fact ids.

    facts maps id -> atom tuple; static_true holds the static atoms that
    were compiled out (true in every reachable state). impossible_goals
    lists goal literals already decided false by static analysis.
    """

    domain_name: str
    problem_name: str
    facts: list[GroundAtom]
    fact_ids: dict[GroundAtom, int]
    actions: list[GroundAction]
    action_ids: dict[str, int]
    init: frozenset[int]
    goal_pos: frozenset[int]
    goal_neg: frozenset[int]
    static_true: frozenset[GroundAtom]
    impossible_goals: tuple[GroundAtom, ...] = ()

    def atom_of(self, fact_id: int) -> GroundAtom:
        return self.facts[fact_id]

    def atoms_of(self, state: frozenset[int]) -> frozenset[GroundAtom]:
        """Full atom view of a search state, statics included."""
        return frozenset(self.facts[i] for i in state) | self.static_true

    def goal_satisfied(self, state: frozenset[int]) -> bool:
        return (
            not self.impossible_goals
            and self.goal_pos <= state
            and not (self.goal_neg & state)
        )


def _candidates(
    schema: ActionSchema, dom: DomainDef, objects_by_type: dict[str, list[str]]
) -> list[tuple[str, ...]]:
    pools = []
    for tv in schema.params:
        pool = objects_by_type.get(tv.type)
        if pool is None:
            pool = [
                o
                for o, t in objects_by_type["__all__"]
                if dom.is_subtype(t, tv.type)
            ]
            objects_by_type[tv.type] = pool
        if not pool:
            return []
        pools.append(pool)
    return list(itertools.product(*pools))


def ground(dom: DomainDef, prob: ProblemDef) -> GroundTask:
    """Instantiate every type-consistent binding of every schema.

    Deterministic: actions are ordered by schema declaration order, then by
    binding tuple in object declaration order; facts by first mention.
    """
    if prob.domain != dom.name:
        raise PddlSemanticError(
            f"problem {prob.name!r} is for domain {prob.domain!r}, "
            f"not {dom.name!r}"
        )

    # static = predicate absent from every add/delete list
    dynamic_preds = {
        lit.pred
        for schema in dom.actions.values()
        for lit in schema.add + schema.delete
    }

    object_order = {o: i for i, o in enumerate(prob.objects)}
    objects_by_type: dict[str, list] = {"__all__": list(prob.objects.items())}

    facts: list[GroundAtom] = []
    fact_ids: dict[GroundAtom, int] = {}

    def fact_id(atom: GroundAtom) -> int:
        fid = fact_ids.get(atom)
        if fid is None:
            fid = len(facts)
            fact_ids[atom] = fid
            facts.append(atom)
        return fid

    static_true = frozenset(a for a in prob.init if a[0] not in dynamic_preds)
    init_ids = frozenset(
        fact_id(a) for a in sorted(prob.init) if a[0] in dynamic_preds
    )

    actions: list[GroundAction] = []
    action_ids: dict[str, int] = {}
    for schema in dom.actions.values():
        cands = _candidates(schema, dom, objects_by_type)
        cands.sort(key=lambda b: tuple(object_order[o] for o in b))
        for binding in cands:
            env = {tv.name: obj for tv, obj in zip(schema.params, binding)}
            pre_pos: set[int] = set()
            pre_neg: set[int] = set()
            ok = True
            for lit in schema.precondition:
                atom = (lit.pred, *(env[a] for a in lit.args))
                if lit.pred not in dynamic_preds:
                    holds = atom in static_true
                    if holds == lit.negated:  # statically false precondition
                        ok = False
                        break
                    continue
                (pre_neg if lit.negated else pre_pos).add(fact_id(atom))
            if not ok:
                continue
            # effect predicates are dynamic by definition
            add = frozenset(
                fact_id((lit.pred, *(env[a] for a in lit.args)))
                for lit in schema.add
            )
            delete = frozenset(
                fact_id((lit.pred, *(env[a] for a in lit.args)))
                for lit in schema.delete
            )
            name = f"({schema.name}{''.join(' ' + o for o in binding)})"
            action_ids[name] = len(actions)
            actions.append(
                GroundAction(
                    name=name,
                    pre_pos=frozenset(pre_pos),
                    pre_neg=frozenset(pre_neg),
                    add=add,
                    delete=delete,
                )
            )

    goal_pos: set[int] = set()
    goal_neg: set[int] = set()
    impossible: list[GroundAtom] = []
    for lit in prob.goal:
        atom = lit.atom()
        if lit.pred not in dynamic_preds:
            holds = atom in static_true
            if holds == lit.negated:
                impossible.append(atom)
            continue
        (goal_neg if lit.negated else goal_pos).add(fact_id(atom))

    return GroundTask(
        domain_name=dom.name,
        problem_name=prob.name,
        facts=facts,
        fact_ids=fact_ids,
        actions=actions,
        action_ids=action_ids,
        init=init_ids,
        goal_pos=frozenset(goal_pos),
        goal_neg=frozenset(goal_neg),
        static_true=static_true,
        impossible_goals=tuple(impossible),
    )
