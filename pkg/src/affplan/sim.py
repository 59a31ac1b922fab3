"""Symbolic execution environment and scenario runner.

SimWorld models the tabletop directly (object locations, gripper content,
object states) and implements each action's physics independently of the
planning engine, so a plan that validates symbolically is still re-checked
against a second opinion. run_scenario drives the full loop over multiple
phases and trials: detect -> build problem -> plan -> execute -> remember,
with optional fault injection, and attributes every failure to perception,
planning or action.

Failure attribution rule:
  * the goal references an object the problem builder cannot name
    (missing detection, no keeper memory)            -> perception
  * the planner finds no plan, or its plan does not reach the goal in the
    world: perception when a perception fault (drop_detection or
    corrupt_mask) was injected for that trial, otherwise planning
  * an action fails during execution                 -> action
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .formats import FormatError, load_detections, load_objects
from .pddl.ground import ground
from .pddl.model import DomainDef, GroundAtom, Literal
from .pddl.parser import parse_domain, parse_goal
from .pddl.search import Plan, Unsolvable, plan as search_plan, validate
from .scene import (
    AffordanceAbsentError,
    AffordanceLabel,
    CAPABILITY_PREDICATES,
    DetectionRecord,
    ObjectDetection,
    Pose,
    StateKeeper,
    UngroundableGoalError,
    assign_names,
    associate,
    build_problem,
    grasp_pose,
    place_target,
    update_keeper,
)

__all__ = [
    "SimWorld",
    "ExecutionFailure",
    "execute",
    "Fault",
    "PhaseSpec",
    "ScenarioSpec",
    "TrialResult",
    "ScenarioReport",
    "load_scenario",
    "run_scenario",
    "FAULT_KINDS",
    "PERCEPTION_FAULTS",
]

_CAPABILITY_NAMES = set(CAPABILITY_PREDICATES.values())

FAULT_KINDS = ("drop_detection", "corrupt_mask", "action_fault")
PERCEPTION_FAULTS = ("drop_detection", "corrupt_mask")


@dataclass(frozen=True)
class ExecutionFailure:
    """An action could not run; index is its position in the plan."""

    index: int
    reason: str


@dataclass
class SimWorld:
    """Direct world model: capabilities per object, object locations,
    gripper content and applied-effect states."""

    capabilities: dict[str, set[str]]
    on_table: set[str] = field(default_factory=set)
    contained: dict[str, str] = field(default_factory=dict)  # obj -> container
    supported: dict[str, str] = field(default_factory=dict)  # obj -> supporter
    holding: str | None = None
    beans: set[str] = field(default_factory=set)  # containers with beans
    pounded: set[str] = field(default_factory=set)
    cut_done: set[str] = field(default_factory=set)

    @classmethod
    def from_atoms(
        cls, objects: Sequence[str], atoms: Sequence[GroundAtom]
    ) -> "SimWorld":
        w = cls(capabilities={o: set() for o in objects})
        for atom in atoms:
            pred, args = atom[0], atom[1:]
            for o in args:
                if o not in w.capabilities:
                    raise ValueError(f"atom {atom} names unknown object {o!r}")
            if pred in _CAPABILITY_NAMES:
                w.capabilities[args[0]].add(pred)
            elif pred == "on-table":
                w.on_table.add(args[0])
            elif pred == "in":
                w.contained[args[0]] = args[1]
            elif pred == "on":
                w.supported[args[0]] = args[1]
            elif pred == "holding":
                if w.holding is not None:
                    raise ValueError("two holding atoms")
                w.holding = args[0]
            elif pred == "beans-in":
                w.beans.add(args[0])
            elif pred == "pounded":
                w.pounded.add(args[0])
            elif pred == "cut":
                w.cut_done.add(args[0])
            elif pred in ("hand-empty", "empty"):
                pass  # derived from the fields above
            else:
                raise ValueError(f"unknown predicate {pred!r} in atom {atom}")
        w._check()
        return w

    def copy(self) -> "SimWorld":
        return SimWorld(
            capabilities={o: set(c) for o, c in self.capabilities.items()},
            on_table=set(self.on_table),
            contained=dict(self.contained),
            supported=dict(self.supported),
            holding=self.holding,
            beans=set(self.beans),
            pounded=set(self.pounded),
            cut_done=set(self.cut_done),
        )

    def _check(self) -> None:
        for o in self.capabilities:
            places = (
                (o in self.on_table)
                + (o in self.contained)
                + (o in self.supported)
                + (o == self.holding)
            )
            if places > 1:
                raise ValueError(f"object {o!r} is in {places} places at once")
        occupants: dict[str, str] = {}
        for o, c in self.contained.items():
            if c in occupants:
                raise ValueError(
                    f"container {c!r} holds {occupants[c]!r} and {o!r}"
                )
            occupants[c] = o

    def container_empty(self, c: str) -> bool:
        return all(target != c for target in self.contained.values())

    def to_atoms(self) -> frozenset:
        """Full symbolic view of the world, including derived facts."""
        atoms: set[GroundAtom] = set()
        for o, caps in self.capabilities.items():
            for cap in sorted(caps):
                atoms.add((cap, o))
        for o in self.on_table:
            atoms.add(("on-table", o))
        for o, c in self.contained.items():
            atoms.add(("in", o, c))
        for o, s in self.supported.items():
            atoms.add(("on", o, s))
        if self.holding is None:
            atoms.add(("hand-empty",))
        else:
            atoms.add(("holding", self.holding))
        for o, caps in self.capabilities.items():
            if "container" in caps and self.container_empty(o):
                atoms.add(("empty", o))
        for c in self.beans:
            atoms.add(("beans-in", c))
        for o in self.pounded:
            atoms.add(("pounded", o))
        for o in self.cut_done:
            atoms.add(("cut", o))
        return frozenset(atoms)

    def satisfies(self, goal: Sequence[Literal]) -> bool:
        atoms = self.to_atoms()
        for lit in goal:
            if lit.negated == (lit.atom() in atoms):
                return False
        return True


def _parse_step(step: str) -> tuple[str, list[str]]:
    parts = step.strip().strip("()").split()
    if not parts:
        raise ValueError(f"empty plan step {step!r}")
    return parts[0], parts[1:]


def execute(plan_: Plan, world: SimWorld) -> SimWorld | ExecutionFailure:
    """Run a plan against the world model.

    Returns the resulting world, or an ExecutionFailure naming the first
    step whose physical preconditions do not hold. The input world is not
    modified.
    """
    w = world.copy()
    for i, step in enumerate(plan_.steps):
        act, args = _parse_step(step)
        fail = _step(w, act, args)
        if fail is not None:
            return ExecutionFailure(index=i, reason=f"{step}: {fail}")
    return w


def _step(w: SimWorld, act: str, args: list[str]) -> str | None:
    """Apply one action in place; returns an error string when it cannot."""
    caps = w.capabilities

    def has(o: str, cap: str) -> bool:
        return cap in caps.get(o, set())

    if act == "pick":
        (o,) = args
        if not has(o, "graspable"):
            return f"{o} is not graspable"
        if o not in w.on_table:
            return f"{o} is not on the table"
        if w.holding is not None:
            return f"gripper already holds {w.holding}"
        w.on_table.discard(o)
        w.holding = o
    elif act == "take-out":
        o, c = args
        if not has(o, "graspable"):
            return f"{o} is not graspable"
        if not has(c, "container"):
            return f"{c} is not a container"
        if w.contained.get(o) != c:
            return f"{o} is not in {c}"
        if w.holding is not None:
            return f"gripper already holds {w.holding}"
        del w.contained[o]
        w.holding = o
    elif act == "place-in":
        o, c = args
        if w.holding != o:
            return f"gripper does not hold {o}"
        if not has(c, "container"):
            return f"{c} is not a container"
        if o == c:
            return "cannot place an object into itself"
        if not w.container_empty(c):
            return f"{c} already holds an object"
        w.holding = None
        w.contained[o] = c
    elif act == "place-on":
        o, s = args
        if w.holding != o:
            return f"gripper does not hold {o}"
        if not has(s, "supporter"):
            return f"{s} is not a supporter"
        if o == s:
            return "cannot place an object onto itself"
        w.holding = None
        w.supported[o] = s
    elif act == "scoop":
        t, src, dst = args
        if w.holding != t:
            return f"gripper does not hold {t}"
        if not has(t, "scooper"):
            return f"{t} cannot scoop"
        if not has(src, "container") or not has(dst, "container"):
            return "scoop needs two containers"
        if src == dst:
            return "scoop needs distinct containers"
        if src not in w.beans:
            return f"no beans in {src}"
        if dst in w.beans:
            return f"{dst} already has beans"
        w.beans.discard(src)
        w.beans.add(dst)
    elif act == "pound":
        t, x = args
        if w.holding != t:
            return f"gripper does not hold {t}"
        if not has(t, "pounder"):
            return f"{t} cannot pound"
        if x not in w.on_table:
            return f"{x} is not on the table"
        w.pounded.add(x)
    elif act == "cut":
        t, x = args
        if w.holding != t:
            return f"gripper does not hold {t}"
        if not has(t, "cutter"):
            return f"{t} cannot cut"
        if x not in w.on_table:
            return f"{x} is not on the table"
        w.cut_done.add(x)
    else:
        return f"unknown action {act!r}"
    return None


# ---------------------------------------------------------------------------
# scenario specs


@dataclass(frozen=True)
class Fault:
    """Injected defect: drop_detection/corrupt_mask (perception) need a
    target name; corrupt_mask needs a label; action_fault needs a step."""

    trial: int
    phase: int
    kind: str
    target: str | None = None
    label: AffordanceLabel | None = None
    step: int | None = None


@dataclass(frozen=True)
class PhaseSpec:
    detections: Path
    objects: Path | None


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    domain_path: Path
    trials: int
    seed: int
    use_keeper: bool
    planner: str
    initial_facts: tuple[GroundAtom, ...]
    phases: tuple[PhaseSpec, ...]
    # each choice is one goal conjunction per phase
    goal_choices: tuple[tuple[tuple[Literal, ...], ...], ...]
    faults: tuple[Fault, ...] = ()


def _goal_from_json(node) -> tuple[Literal, ...]:
    """Goal as a PDDL string or a list of [pred, args...] /
    ["not", [...]] literals."""
    if isinstance(node, str):
        return parse_goal(node)
    if not isinstance(node, list):
        raise FormatError(f"goal must be a string or list, got {type(node).__name__}")
    out = []
    for lit in node:
        if not isinstance(lit, list) or not lit:
            raise FormatError(f"bad goal literal {lit!r}")
        if lit[0] == "not":
            if len(lit) != 2 or not isinstance(lit[1], list) or not lit[1]:
                raise FormatError(f"bad negated literal {lit!r}")
            out.append(Literal(lit[1][0], tuple(lit[1][1:]), negated=True))
        else:
            out.append(Literal(lit[0], tuple(lit[1:]), negated=False))
    return tuple(out)


def load_scenario(path: str | Path) -> ScenarioSpec:
    """Read and validate a scenario spec file (JSON)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot read scenario {path}: {e}") from e
    try:
        name = raw["name"]
        trials = int(raw["trials"])
        phases_raw = raw["phases"]
        goals_raw = raw["goal_choices"]
        domain_rel = raw["domain"]
    except KeyError as e:
        raise FormatError(f"scenario {path} is missing key {e}") from e
    if trials < 1:
        raise FormatError("trials must be >= 1")
    if not phases_raw:
        raise FormatError("need at least one phase")
    if not goals_raw:
        raise FormatError("need at least one goal choice")
    planner = raw.get("planner", "fast")
    if planner not in ("fast", "optimal"):
        raise FormatError(f"planner must be fast or optimal, got {planner!r}")

    base = path.parent
    phases = []
    for ph in phases_raw:
        det = base / ph["detections"]
        obj = base / ph["objects"] if ph.get("objects") else None
        phases.append(PhaseSpec(detections=det, objects=obj))

    choices = []
    for choice in goals_raw:
        if not isinstance(choice, list) or len(choice) != len(phases):
            raise FormatError(
                "each goal choice needs exactly one goal per phase"
            )
        choices.append(tuple(_goal_from_json(g) for g in choice))

    init_facts = tuple(
        tuple(str(x) for x in atom) for atom in raw.get("initial_facts", [])
    )

    faults = []
    for f in raw.get("faults", []):
        kind = f.get("kind")
        if kind not in FAULT_KINDS:
            raise FormatError(f"unknown fault kind {kind!r}")
        label = None
        if kind == "corrupt_mask":
            try:
                label = AffordanceLabel[str(f["label"]).upper().replace("-", "_")]
            except KeyError as e:
                raise FormatError(f"unknown affordance label in fault: {f}") from e
        if kind in PERCEPTION_FAULTS and not f.get("target"):
            raise FormatError(f"fault {kind} needs a target: {f}")
        if kind == "action_fault" and "step" not in f:
            raise FormatError(f"action_fault needs a step: {f}")
        faults.append(
            Fault(
                trial=int(f["trial"]),
                phase=int(f.get("phase", 0)),
                kind=kind,
                target=f.get("target"),
                label=label,
                step=int(f["step"]) if "step" in f else None,
            )
        )

    return ScenarioSpec(
        name=str(name),
        domain_path=base / domain_rel,
        trials=trials,
        seed=int(raw.get("seed", 0)),
        use_keeper=bool(raw.get("use_keeper", True)),
        planner=planner,
        initial_facts=init_facts,
        phases=tuple(phases),
        goal_choices=tuple(choices),
        faults=tuple(faults),
    )


# ---------------------------------------------------------------------------
# scenario runner


@dataclass
class TrialResult:
    trial: int
    ok: bool
    stage: str | None = None  # perception | planning | action when failed
    phase: int | None = None
    detail: str = ""
    plan_lengths: list[int] = field(default_factory=list)


@dataclass
class ScenarioReport:
    name: str
    planner: str
    use_keeper: bool
    results: list[TrialResult]

    @property
    def trials(self) -> int:
        return len(self.results)

    @property
    def successes(self) -> int:
        return sum(1 for r in self.results if r.ok)

    def failure_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.results:
            if not r.ok and r.stage:
                out[r.stage] = out.get(r.stage, 0) + 1
        return out

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "name": self.name,
            "planner": self.planner,
            "use_keeper": self.use_keeper,
            "trials": self.trials,
            "successes": self.successes,
            "failures": self.failure_counts(),
            "results": [
                {
                    "trial": r.trial,
                    "ok": r.ok,
                    "stage": r.stage,
                    "phase": r.phase,
                    "detail": r.detail,
                    "plan_lengths": r.plan_lengths,
                }
                for r in self.results
            ],
        }

    def format_table(self) -> str:
        lines = [
            f"scenario {self.name}: {self.successes}/{self.trials} trials ok "
            f"(planner={self.planner}, keeper={'on' if self.use_keeper else 'off'})"
        ]
        lines.append(f"{'trial':>5}  {'result':<8} {'stage':<10} detail")
        for r in self.results:
            res = "ok" if r.ok else "failed"
            stage = r.stage or "-"
            detail = r.detail or f"plans: {','.join(map(str, r.plan_lengths))}"
            lines.append(f"{r.trial:>5}  {res:<8} {stage:<10} {detail}")
        return "\n".join(lines)


def _apply_faults(
    detections: list[DetectionRecord],
    objects: list[ObjectDetection],
    faults: list[Fault],
    iou_min: float,
) -> tuple[list[DetectionRecord], list[ObjectDetection]]:
    """Perception faults edit the detection lists before problem building."""
    for fault in faults:
        if fault.kind not in PERCEPTION_FAULTS:
            continue
        matches = associate(detections, objects, iou_min=iou_min)
        names = assign_names(detections, objects, matches)
        if fault.target not in names:
            raise FormatError(
                f"fault target {fault.target!r} is not a detected object "
                f"(have: {', '.join(names)})"
            )
        idx = names.index(fault.target)
        if fault.kind == "drop_detection":
            detections = [d for k, d in enumerate(detections) if k != idx]
        else:  # corrupt_mask: erase one affordance region
            rec = detections[idx]
            mask = rec.mask.copy()
            mask[mask == int(fault.label)] = 0
            ranked = tuple(
                np.where(rm == int(fault.label), 0, rm) for rm in rec.ranked_masks
            )
            detections = list(detections)
            detections[idx] = DetectionRecord(
                bbox=rec.bbox,
                objectness=rec.objectness,
                mask=mask,
                attributes=rec.attributes,
                ranked_masks=ranked,
                id=rec.id,
            )
    return detections, objects


def _anchor_for(rec: DetectionRecord) -> Pose:
    """Best available anchor pose for a detection."""
    for label in (
        AffordanceLabel.GRASP,
        AffordanceLabel.WRAP_GRASP,
        AffordanceLabel.CONTAIN,
        AffordanceLabel.SUPPORT,
    ):
        try:
            if label in (AffordanceLabel.GRASP, AffordanceLabel.WRAP_GRASP):
                return grasp_pose(rec, label)
            x, y = place_target(rec, label)
            return Pose(x, y, 0.0)
        except AffordanceAbsentError:
            continue
    x0, y0, x1, y1 = rec.bbox
    return Pose((x0 + x1) / 2.0, (y0 + y1) / 2.0, 0.0)


def run_scenario(
    spec: ScenarioSpec | str | Path,
    *,
    seed: int | None = None,
    iou_min: float = 0.5,
    pixel_threshold: int = 25,
) -> ScenarioReport:
    """Run all trials of a scenario spec; deterministic for a fixed seed."""
    if not isinstance(spec, ScenarioSpec):
        spec = load_scenario(spec)
    domain = parse_domain(spec.domain_path.read_text())
    base_seed = spec.seed if seed is None else seed

    seed_keeper = StateKeeper.empty()
    for atom in spec.initial_facts:
        seed_keeper.record(atom, 0)
    seed_keeper.check_invariants()

    # detection files are immutable during the run; load once
    det_cache: dict[Path, list[DetectionRecord]] = {}
    obj_cache: dict[Path, list[ObjectDetection]] = {}
    for ph in spec.phases:
        if ph.detections not in det_cache:
            det_cache[ph.detections] = load_detections(ph.detections)
        if ph.objects and ph.objects not in obj_cache:
            obj_cache[ph.objects] = load_objects(ph.objects)

    results: list[TrialResult] = []
    for trial in range(spec.trials):
        rng = np.random.default_rng([base_seed, trial])
        choice = spec.goal_choices[int(rng.integers(len(spec.goal_choices)))]
        keeper = seed_keeper.copy()
        result = TrialResult(trial=trial, ok=True)
        perception_faulted = False

        for phase_idx, phase in enumerate(spec.phases):
            phase_faults = [
                f for f in spec.faults if f.trial == trial and f.phase == phase_idx
            ]
            perception_faulted = perception_faulted or any(
                f.kind in PERCEPTION_FAULTS for f in phase_faults
            )

            detections = list(det_cache[phase.detections])
            objects = list(obj_cache[phase.objects]) if phase.objects else []
            detections, objects = _apply_faults(
                detections, objects, phase_faults, iou_min
            )
            goal = choice[phase_idx]

            def fail(stage: str, detail: str) -> None:
                result.ok = False
                result.stage = stage
                result.phase = phase_idx
                result.detail = detail

            try:
                prob = build_problem(
                    detections,
                    objects,
                    keeper if spec.use_keeper else seed_keeper.copy(),
                    goal,
                    domain,
                    iou_min=iou_min,
                    pixel_threshold=pixel_threshold,
                )
            except UngroundableGoalError as e:
                fail("perception", str(e))
                break

            task = ground(domain, prob)
            found = search_plan(task, mode=spec.planner)
            if isinstance(found, Unsolvable):
                fail(
                    "perception" if perception_faulted else "planning",
                    f"unsolvable: {found.reason}"
                    + (
                        f" (unreachable: {list(found.unreachable_goals)})"
                        if found.unreachable_goals
                        else ""
                    ),
                )
                break
            vr = validate(found, task)
            if not vr.ok:
                fail("planning", f"plan failed validation: {vr.reason}")
                break
            result.plan_lengths.append(len(found.steps))

            world = SimWorld.from_atoms(list(prob.objects), sorted(prob.init))
            action_faults = [f for f in phase_faults if f.kind == "action_fault"]
            if action_faults:
                k = min(
                    min(f.step for f in action_faults), len(found.steps)
                )
                prefix = execute(Plan(found.steps[:k]), world)
                assert not isinstance(prefix, ExecutionFailure)
                fail("action", f"actuator fault at step {k} (injected)")
                break
            outcome = execute(found, world)
            if isinstance(outcome, ExecutionFailure):
                fail(
                    "action",
                    f"step {outcome.index} failed: {outcome.reason}",
                )
                break
            if not outcome.satisfies(goal):
                fail(
                    "perception" if perception_faulted else "planning",
                    "executed plan does not reach the goal",
                )
                break

            if spec.use_keeper:
                matches = associate(detections, objects, iou_min=iou_min)
                names = assign_names(detections, objects, matches)
                for rec, nm in zip(detections, names):
                    keeper.anchors[nm] = _anchor_for(rec)
                keeper = update_keeper(keeper, task, found)

        results.append(result)

    return ScenarioReport(
        name=spec.name,
        planner=spec.planner,
        use_keeper=spec.use_keeper,
        results=results,
    )
