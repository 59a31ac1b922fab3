"""Plan search and plan validation over ground tasks.

Two modes:
  * fast: greedy best-first search on the additive delete-relaxation
    heuristic, duplicate detection, FIFO tie-breaking. Complete on finite
    task spaces (the heuristic only prunes states whose positive goal
    atoms are unreachable even ignoring deletes, which is sound).
  * optimal: breadth-first search; with unit costs the first goal state
    found is at minimum plan length.

Both are deterministic: actions are expanded in ground-task order and ties
fall back to insertion order.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

from .errors import UnknownActionError
from .ground import GroundAction, GroundTask

__all__ = ["Plan", "Unsolvable", "ValidationResult", "plan", "validate", "progress"]

INF = float("inf")


@dataclass(frozen=True)
class Plan:
    """A sequence of ground action names, e.g. ('(pick fork)', ...)."""

    steps: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def cost(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Unsolvable:
    """Search verdict: no plan exists.

    unreachable_goals lists the positive goal atoms that are unreachable
    even under delete relaxation (plus statically false goal literals); it
    can be empty when the goals are individually reachable but jointly
    unachievable.
    """

    unreachable_goals: tuple
    reason: str


@dataclass(frozen=True)
class ValidationResult:
    """ok, or the index of the first bad step.

    failure_index is the offending step's position, or len(steps) when
    every step applies but the terminal state misses the goal; None when ok.
    """

    ok: bool
    failure_index: int | None = None
    reason: str = ""


def _applicable(a: GroundAction, state: frozenset[int]) -> bool:
    return a.pre_pos <= state and not (a.pre_neg & state)


def _apply(a: GroundAction, state: frozenset[int]) -> frozenset[int]:
    return (state - a.delete) | a.add


def _h_add(task: GroundTask, state: frozenset[int]) -> float:
    """Additive heuristic under delete relaxation.

    Negative preconditions and negative goals are treated as already
    satisfied (cost 0): the relaxation may only underestimate reachability
    work for positive atoms, so an infinite value is a sound "never".
    """
    if not task.goal_pos:
        return 0.0
    cost = {f: 0.0 for f in state}
    changed = True
    while changed:
        changed = False
        for a in task.actions:
            c = 0.0
            for f in a.pre_pos:
                cf = cost.get(f)
                if cf is None:
                    c = INF
                    break
                c += cf
            if c == INF:
                continue
            for f in a.add:
                nc = c + 1.0
                if nc < cost.get(f, INF):
                    cost[f] = nc
                    changed = True
    total = 0.0
    for f in task.goal_pos:
        cf = cost.get(f)
        if cf is None:
            return INF
        total += cf
    return total


def _extract(parents: dict, task: GroundTask, state: frozenset[int]) -> Plan:
    steps: list[str] = []
    while True:
        prev, act_idx = parents[state]
        if prev is None:
            break
        steps.append(task.actions[act_idx].name)
        state = prev
    steps.reverse()
    return Plan(tuple(steps))


def _diagnose(task: GroundTask, reason: str) -> Unsolvable:
    """Name the goal atoms provably unreachable from the initial state."""
    cost = {f: 0.0 for f in task.init}
    changed = True
    while changed:
        changed = False
        for a in task.actions:
            if any(f not in cost for f in a.pre_pos):
                continue
            for f in a.add:
                if f not in cost:
                    cost[f] = 1.0
                    changed = True
    bad = [task.facts[f] for f in sorted(task.goal_pos) if f not in cost]
    bad.extend(task.impossible_goals)
    return Unsolvable(unreachable_goals=tuple(bad), reason=reason)


def plan(task: GroundTask, mode: str = "fast") -> Plan | Unsolvable:
    """Search for a plan. mode 'fast' (greedy) or 'optimal' (shortest).

    Returns Plan (possibly empty when the goal already holds) or
    Unsolvable. Deterministic for a fixed task.
    """
    if mode not in ("fast", "optimal"):
        raise ValueError(f"mode must be 'fast' or 'optimal', got {mode!r}")
    if task.impossible_goals:
        return _diagnose(task, "goal contains statically false atoms")

    init = task.init
    if task.goal_satisfied(init):
        return Plan(())
    parents: dict = {init: (None, None)}

    if mode == "optimal":
        queue = deque([init])
        while queue:
            state = queue.popleft()
            for idx, a in enumerate(task.actions):
                if not _applicable(a, state):
                    continue
                nxt = _apply(a, state)
                if nxt in parents:
                    continue
                parents[nxt] = (state, idx)
                if task.goal_satisfied(nxt):
                    return _extract(parents, task, nxt)
                queue.append(nxt)
        return _diagnose(task, "state space exhausted")

    h0 = _h_add(task, init)
    if h0 == INF:
        return _diagnose(task, "goal unreachable even ignoring deletes")
    open_heap: list[tuple[float, int, frozenset[int]]] = [(h0, 0, init)]
    counter = 1
    while open_heap:
        _, _, state = heapq.heappop(open_heap)
        for idx, a in enumerate(task.actions):
            if not _applicable(a, state):
                continue
            nxt = _apply(a, state)
            if nxt in parents:
                continue
            parents[nxt] = (state, idx)
            if task.goal_satisfied(nxt):
                return _extract(parents, task, nxt)
            h = _h_add(task, nxt)
            if h == INF:
                continue  # sound: positive goals unreachable from nxt
            heapq.heappush(open_heap, (h, counter, nxt))
            counter += 1
    return _diagnose(task, "state space exhausted")


def progress(task: GroundTask, plan_: Plan) -> frozenset[int]:
    """Terminal state of executing the plan from the initial state.

    Raises UnknownActionError on a step that names no ground action and
    ValueError when a precondition fails (use validate for a verdict).
    """
    state = task.init
    for i, step in enumerate(plan_.steps):
        idx = task.action_ids.get(step)
        if idx is None:
            raise UnknownActionError(f"step {i}: unknown action {step}")
        a = task.actions[idx]
        if not _applicable(a, state):
            raise ValueError(f"step {i}: precondition of {step} fails")
        state = _apply(a, state)
    return state


def validate(plan_: Plan, task: GroundTask) -> ValidationResult:
    """Check a plan step by step against the task.

    Fails on the first inapplicable step (its index), or with index
    len(steps) when the terminal state misses the goal. Unknown action
    names raise UnknownActionError.
    """
    state = task.init
    for i, step in enumerate(plan_.steps):
        idx = task.action_ids.get(step)
        if idx is None:
            raise UnknownActionError(f"step {i}: unknown action {step}")
        a = task.actions[idx]
        if not _applicable(a, state):
            missing = sorted(task.facts[f] for f in a.pre_pos - state)
            present = sorted(task.facts[f] for f in a.pre_neg & state)
            bits = []
            if missing:
                bits.append(f"missing {missing}")
            if present:
                bits.append(f"forbidden {present}")
            return ValidationResult(
                ok=False,
                failure_index=i,
                reason=f"precondition of {step} fails: {'; '.join(bits)}",
            )
        state = _apply(a, state)
    if not task.goal_satisfied(state):
        return ValidationResult(
            ok=False,
            failure_index=len(plan_.steps),
            reason="terminal state does not satisfy the goal",
        )
    return ValidationResult(ok=True)
