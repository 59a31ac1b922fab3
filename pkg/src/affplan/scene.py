"""From per-image detections to a symbolic planning problem.

An affordance detection carries a box, an objectness score and a label mask
over the box (0 = background, 1..7 = affordance labels). A separate object
detector contributes category names. The two streams are associated greedily
by box IoU; associated records take the category as their object name,
the rest get stable anonymous names.

Affordance regions with enough pixels become static capability facts
(grasp -> graspable, contain -> container, ...). A persistent StateKeeper
carries facts and metric anchor poses across sessions, so objects that a
later image no longer shows (typically: now inside a container) stay
plannable. Grasp poses come from the grasp region's pixel centroid and a
total-least-squares line fit for the orientation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .pddl.errors import PddlSemanticError
from .pddl.ground import GroundTask
from .pddl.model import DomainDef, GroundAtom, Literal, ProblemDef
from .pddl.search import Plan, progress, validate

__all__ = [
    "AffordanceLabel",
    "CAPABILITY_PREDICATES",
    "TRANSIENT_PREDICATES",
    "DEFAULT_IOU_MIN",
    "DEFAULT_PIXEL_THRESHOLD",
    "AffordanceAbsentError",
    "UngroundableGoalError",
    "KeeperInvariantError",
    "Pose",
    "DetectionRecord",
    "ObjectDetection",
    "StateKeeper",
    "box_iou",
    "associate",
    "grasp_pose",
    "place_target",
    "build_problem",
    "update_keeper",
]

DEFAULT_IOU_MIN = 0.5
DEFAULT_PIXEL_THRESHOLD = 25


class AffordanceLabel(IntEnum):
    """Mask label ids; 0 is background."""

    BACKGROUND = 0
    GRASP = 1
    CUT = 2
    SCOOP = 3
    CONTAIN = 4
    POUND = 5
    SUPPORT = 6
    WRAP_GRASP = 7


# capability fact emitted per affordance region (wrap-grasp maps to none:
# it marks holdable exteriors, not pick-up handles)
CAPABILITY_PREDICATES: dict[AffordanceLabel, str] = {
    AffordanceLabel.GRASP: "graspable",
    AffordanceLabel.CUT: "cutter",
    AffordanceLabel.SCOOP: "scooper",
    AffordanceLabel.CONTAIN: "container",
    AffordanceLabel.POUND: "pounder",
    AffordanceLabel.SUPPORT: "supporter",
}

# never persisted across sessions: gripper state, plus the derived
# container-emptiness facts (recomputed from `in` at build time)
TRANSIENT_PREDICATES = ("holding", "hand-empty", "empty")

_LOCATION_PREDICATES = ("on-table", "in", "on")


class AffordanceAbsentError(ValueError):
    """The record has no pixels of the requested affordance."""


class UngroundableGoalError(ValueError):
    """The goal references objects absent from detections and keeper."""

    def __init__(self, missing: Sequence[str]):
        self.missing = tuple(sorted(missing))
        super().__init__(
            "goal references unknown objects: " + ", ".join(self.missing)
        )


class KeeperInvariantError(ValueError):
    """Stored keeper facts violate a world invariant."""


@dataclass(frozen=True)
class Pose:
    """Planar pose: position in image coordinates, orientation in [0, pi)."""

    x: float
    y: float
    theta: float = 0.0


def _check_bbox(bbox) -> tuple[int, int, int, int]:
    if len(bbox) != 4:
        raise ValueError("bbox must be (x0, y0, x1, y1)")
    x0, y0, x1, y1 = (int(v) for v in bbox)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"degenerate bbox {(x0, y0, x1, y1)}")
    return x0, y0, x1, y1


@dataclass(frozen=True)
class DetectionRecord:
    """One affordance detection: box, objectness, label mask over the box.

    mask has shape (y1 - y0, x1 - x0) with entries in 0..7. ranked_masks
    optionally holds up to 3 alternative masks, best first. id gives the
    record a stable name when no object detection matches it.
    """

    bbox: tuple[int, int, int, int]
    objectness: float
    mask: np.ndarray
    attributes: tuple[float, ...] | None = None
    ranked_masks: tuple[np.ndarray, ...] = ()
    id: str | None = None

    def __post_init__(self):
        x0, y0, x1, y1 = _check_bbox(self.bbox)
        object.__setattr__(self, "bbox", (x0, y0, x1, y1))
        if not (0.0 <= self.objectness <= 1.0):
            raise ValueError(f"objectness must be in [0, 1], got {self.objectness}")
        m = np.asarray(self.mask)
        if m.shape != (y1 - y0, x1 - x0):
            raise ValueError(
                f"mask shape {m.shape} does not match bbox {self.bbox}"
            )
        if not np.issubdtype(m.dtype, np.integer) or m.min() < 0 or m.max() > 7:
            raise ValueError("mask entries must be integer labels in 0..7")
        m = m.astype(np.uint8)
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)
        if self.attributes is not None:
            attrs = tuple(float(v) for v in self.attributes)
            if len(attrs) != 7 or any(not 0.0 <= v <= 1.0 for v in attrs):
                raise ValueError("attributes must be 7 values in [0, 1]")
            object.__setattr__(self, "attributes", attrs)
        ranked = []
        if len(self.ranked_masks) > 3:
            raise ValueError("at most 3 ranked masks")
        for rm in self.ranked_masks:
            rm = np.asarray(rm)
            if rm.shape != m.shape:
                raise ValueError("ranked mask shape differs from the primary mask")
            if not np.issubdtype(rm.dtype, np.integer) or rm.min() < 0 or rm.max() > 7:
                raise ValueError("ranked mask entries must be labels in 0..7")
            rm = rm.astype(np.uint8)
            rm.flags.writeable = False
            ranked.append(rm)
        object.__setattr__(self, "ranked_masks", tuple(ranked))

    def label_counts(self) -> np.ndarray:
        """Pixel count per label id, length 8."""
        return np.bincount(self.mask.ravel(), minlength=8)


@dataclass(frozen=True)
class ObjectDetection:
    """One object-detector output: box, category name, confidence."""

    bbox: tuple[int, int, int, int]
    category: str
    score: float

    def __post_init__(self):
        object.__setattr__(self, "bbox", _check_bbox(self.bbox))
        if not self.category:
            raise ValueError("category must be non-empty")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


def box_iou(a: Sequence[int], b: Sequence[int]) -> float:
    """Intersection over union of two (x0, y0, x1, y1) boxes.

    Half-open convention: a box covers [x0, x1) x [y0, y1), so identical
    integer boxes give exactly 1.0.
    """
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def associate(
    detections: Sequence[DetectionRecord],
    objects: Sequence[ObjectDetection],
    iou_min: float = DEFAULT_IOU_MIN,
) -> list[int | None]:
    """Greedy one-to-one matching of affordance records to object boxes.

    Pairs are taken in decreasing IoU order; ties break on the lower
    record index, then the lower object index. Pairs with IoU below
    iou_min stay unmatched. Returns, per record, the matched object index
    or None.
    """
    if not (0.0 < iou_min <= 1.0):
        raise ValueError(f"iou_min must be in (0, 1], got {iou_min}")
    pairs = []
    for i, det in enumerate(detections):
        for j, obj in enumerate(objects):
            iou = box_iou(det.bbox, obj.bbox)
            if iou >= iou_min:
                pairs.append((-iou, i, j))
    pairs.sort()
    out: list[int | None] = [None] * len(detections)
    used: set[int] = set()
    for _, i, j in pairs:
        if out[i] is None and j not in used:
            out[i] = j
            used.add(j)
    return out


def _label_points(rec: DetectionRecord, label: AffordanceLabel) -> np.ndarray:
    """Image-frame centers (x, y) of the record's pixels with this label."""
    rr, cc = np.nonzero(rec.mask == int(label))
    if rr.size == 0:
        raise AffordanceAbsentError(
            f"record has no {AffordanceLabel(label).name.lower()} pixels"
        )
    x0, y0, _, _ = rec.bbox
    return np.stack([x0 + cc + 0.5, y0 + rr + 0.5], axis=1).astype(np.float64)


def grasp_pose(
    rec: DetectionRecord, label: AffordanceLabel = AffordanceLabel.GRASP
) -> Pose:
    """Gripper target for a record: centroid of the grasp region plus the
    orientation of a total-least-squares line fit through it.

    theta is the fitted line's angle in [0, pi), measured from the +x axis;
    an isotropic region (no preferred direction) gives 0.
    """
    pts = _label_points(rec, label)
    mean = pts.mean(axis=0)
    d = pts - mean
    sxx = float(np.sum(d[:, 0] * d[:, 0]))
    syy = float(np.sum(d[:, 1] * d[:, 1]))
    sxy = float(np.sum(d[:, 0] * d[:, 1]))
    if sxy == 0.0 and sxx == syy:
        theta = 0.0  # isotropic: no direction is better than another
    else:
        theta = 0.5 * math.atan2(2.0 * sxy, sxx - syy)
        if theta < 0.0:
            theta += math.pi
        if theta >= math.pi:
            theta -= math.pi
    return Pose(x=float(mean[0]), y=float(mean[1]), theta=theta)


def place_target(rec: DetectionRecord, label: AffordanceLabel) -> tuple[float, float]:
    """Placement point: centroid of the record's pixels with this label."""
    pts = _label_points(rec, label)
    mean = pts.mean(axis=0)
    return float(mean[0]), float(mean[1])


# ---------------------------------------------------------------------------
# state keeper


@dataclass
class StateKeeper:
    """Cross-session memory: facts with the session that established them,
    plus metric anchor poses per object. session counts completed plans."""

    facts: dict[GroundAtom, int] = field(default_factory=dict)
    anchors: dict[str, Pose] = field(default_factory=dict)
    session: int = 0

    @classmethod
    def empty(cls) -> "StateKeeper":
        return cls()

    def objects(self) -> set[str]:
        out = set(self.anchors)
        for atom in self.facts:
            out.update(atom[1:])
        return out

    def copy(self) -> "StateKeeper":
        return StateKeeper(dict(self.facts), dict(self.anchors), self.session)

    def record(self, atom: GroundAtom, session: int | None = None) -> None:
        if atom[0] in TRANSIENT_PREDICATES:
            raise KeeperInvariantError(
                f"transient predicate {atom[0]!r} cannot be stored"
            )
        self.facts.setdefault(tuple(atom), self.session if session is None else session)

    def check_invariants(self) -> None:
        """Every object sits in at most one place; containers hold at most
        one object."""
        location: dict[str, GroundAtom] = {}
        occupant: dict[str, str] = {}
        for atom in self.facts:
            pred = atom[0]
            if pred in TRANSIENT_PREDICATES:
                raise KeeperInvariantError(f"transient fact stored: {atom}")
            if pred in _LOCATION_PREDICATES:
                obj = atom[1]
                if obj in location:
                    raise KeeperInvariantError(
                        f"object {obj!r} has two locations: {location[obj]} and {atom}"
                    )
                location[obj] = atom
            if pred == "in":
                c = atom[2]
                if c in occupant:
                    raise KeeperInvariantError(
                        f"container {c!r} holds both {occupant[c]!r} and {atom[1]!r}"
                    )
                occupant[c] = atom[1]


_NAME_STRIP = re.compile(r"[^a-z0-9-]+")


def _sanitize(raw: str) -> str:
    name = _NAME_STRIP.sub("-", raw.strip().lower().replace("_", "-")).strip("-")
    name = re.sub(r"-{2,}", "-", name)
    if not name or not name[0].isalpha():
        name = "x" + name
    return name


def _unique(name: str, taken: set[str]) -> str:
    if name not in taken:
        return name
    k = 2
    while f"{name}-{k}" in taken:
        k += 1
    return f"{name}-{k}"


def assign_names(
    detections: Sequence[DetectionRecord],
    objects: Sequence[ObjectDetection],
    matches: Sequence[int | None],
) -> list[str]:
    """Stable object names: matched records take the detector category,
    unmatched ones take their id or an obj<N> fallback; all unique."""
    taken: set[str] = set()
    names: list[str] = []
    anon = 0
    for rec, m in zip(detections, matches):
        if m is not None:
            base = _sanitize(objects[m].category)
        elif rec.id:
            base = _sanitize(rec.id)
        else:
            anon += 1
            base = f"obj{anon}"
        name = _unique(base, taken)
        taken.add(name)
        names.append(name)
    return names


def build_problem(
    detections: Sequence[DetectionRecord],
    objects: Sequence[ObjectDetection],
    keeper: StateKeeper,
    goal: Sequence[Literal],
    domain: DomainDef,
    *,
    iou_min: float = DEFAULT_IOU_MIN,
    pixel_threshold: int = DEFAULT_PIXEL_THRESHOLD,
    problem_name: str = "scene",
) -> ProblemDef:
    """Assemble a planning problem from detections, keeper and goal.

    Facts:
      * capability facts from affordance regions with at least
        pixel_threshold pixels;
      * keeper facts (capabilities, locations, object states) unioned in;
        keeper objects missing from the detections are added, which is
        what keeps occluded objects plannable;
      * fresh objects with no location fact anywhere get on-table;
      * empty(c) derived for containers with no `in` occupant;
      * hand-empty.

    Raises UngroundableGoalError when the goal names unknown objects, and
    PddlSemanticError when it uses unknown predicates or wrong arities.
    """
    keeper.check_invariants()
    matches = associate(detections, objects, iou_min=iou_min)
    names = assign_names(detections, objects, matches)

    facts: set[GroundAtom] = set()
    for rec, name in zip(detections, names):
        counts = rec.label_counts()
        for label, pred in CAPABILITY_PREDICATES.items():
            if counts[int(label)] >= pixel_threshold:
                facts.add((pred, name))

    known = set(names)
    keeper_only = sorted(keeper.objects() - known)
    all_objects = list(names) + keeper_only
    known.update(keeper_only)

    for atom in keeper.facts:
        facts.add(atom)

    located = {a[1] for a in facts if a[0] in _LOCATION_PREDICATES}
    for name in all_objects:
        if name not in located:
            facts.add(("on-table", name))

    containers = {a[1] for a in facts if a[0] == "container"}
    occupied = {a[2] for a in facts if a[0] == "in"}
    for c in sorted(containers - occupied):
        facts.add(("empty", c))
    facts.add(("hand-empty",))

    missing = set()
    for lit in goal:
        pred = domain.predicates.get(lit.pred)
        if pred is None:
            raise PddlSemanticError(f"goal uses unknown predicate {lit.pred!r}")
        if len(lit.args) != pred.arity:
            raise PddlSemanticError(
                f"goal predicate {lit.pred!r} takes {pred.arity} arguments, "
                f"got {len(lit.args)}"
            )
        missing.update(a for a in lit.args if a not in known)
    if missing:
        raise UngroundableGoalError(missing)

    return ProblemDef(
        name=problem_name,
        domain=domain.name,
        objects={o: "object" for o in all_objects},
        init=frozenset(facts),
        goal=tuple(goal),
    )


def update_keeper(keeper: StateKeeper, task: GroundTask, plan_: Plan) -> StateKeeper:
    """Fold a validated plan's outcome into a new keeper.

    The plan is re-validated; the terminal state (statics included) is
    stored minus transient facts. An object still held at the end is
    normalized to on-table. Anchors of moved objects are re-targeted to
    their destination's anchor; objects whose final position is unknown
    lose their anchor. The session counter advances by one.
    """
    vr = validate(plan_, task)
    if not vr.ok:
        raise ValueError(f"plan does not validate: {vr.reason}")
    terminal = task.atoms_of(progress(task, plan_))

    new = keeper.copy()
    new.session = keeper.session + 1
    held = sorted(a[1] for a in terminal if a[0] == "holding")

    kept: set[GroundAtom] = {
        a for a in terminal if a[0] not in TRANSIENT_PREDICATES
    }
    for obj in held:
        kept.add(("on-table", obj))  # gripper state does not persist

    new.facts = {}
    for atom in sorted(kept):
        stamp = keeper.facts.get(atom, new.session)
        new.facts[atom] = stamp

    # follow placements to retarget anchors
    dest: dict[str, str | None] = {}
    for step in plan_.steps:
        parts = step.strip("()").split()
        if not parts:
            continue
        act, args = parts[0], parts[1:]
        if act in ("pick", "take-out"):
            dest[args[0]] = None
        elif act in ("place-in", "place-on"):
            dest[args[0]] = args[1]
    for obj, target in dest.items():
        if target is not None and target in new.anchors:
            t = new.anchors[target]
            new.anchors[obj] = Pose(t.x, t.y, 0.0)
        else:
            new.anchors.pop(obj, None)
    for obj in held:
        new.anchors.pop(obj, None)

    new.check_invariants()
    return new
