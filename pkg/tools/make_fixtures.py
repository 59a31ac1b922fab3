"""Regenerate the detection-scene and metrics-demo fixtures.

Deterministic: masks are drawn as labeled rectangles in a 100x100 frame,
so re-running produces byte-identical files. Run from the repo root:

    python3 tools/make_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from affplan.formats import save_detections, save_objects, write_pgm
from affplan.scene import AffordanceLabel as L
from affplan.scene import DetectionRecord, ObjectDetection

ROOT = Path(__file__).resolve().parents[1]
SCENES = ROOT / "fixtures" / "scenes"
METRICS = ROOT / "fixtures" / "metrics_demo"


def rec(bbox, regions, objectness=0.9, attrs=None, id=None):
    """regions: list of (label, r0, c0, r1, c1) rectangles in mask coords."""
    x0, y0, x1, y1 = bbox
    mask = np.zeros((y1 - y0, x1 - x0), dtype=np.int64)
    for label, r0, c0, r1, c1 in regions:
        mask[r0:r1, c0:c1] = int(label)
    return DetectionRecord(
        bbox=bbox, objectness=objectness, mask=mask, attributes=attrs, id=id
    )


def attr(*labels):
    """Attribute vector: 0.9 for present affordances, 0.05 otherwise."""
    out = [0.05] * 7
    for lab in labels:
        out[int(lab) - 1] = 0.9
    return tuple(out)


def obj(bbox, category, score=0.92):
    return ObjectDetection(bbox=bbox, category=category, score=score)


def shift(bbox, dx=1, dy=1):
    x0, y0, x1, y1 = bbox
    return (x0 + dx, y0 + dy, x1 + dx, y1 + dy)


# objects reused across scenes (bbox, regions); regions sized >= 25 px
KNIFE_BOX = (5, 8, 35, 20)
KNIFE_REG = [(L.GRASP, 0, 0, 12, 10), (L.CUT, 2, 12, 10, 30)]
SPOON_BOX = (45, 8, 73, 18)
SPOON_REG = [(L.GRASP, 2, 0, 8, 14), (L.SCOOP, 0, 16, 10, 28)]
TROWEL_BOX = (45, 28, 75, 40)
TROWEL_REG = [(L.GRASP, 3, 0, 9, 12), (L.SCOOP, 0, 14, 12, 30)]
BOWL_BOX = (10, 55, 44, 85)
BOWL_REG = [(L.CONTAIN, 4, 4, 26, 30)]
POT_BOX = (55, 52, 93, 88)
POT_REG = [(L.CONTAIN, 5, 5, 31, 33)]
PLATE_BOX = (8, 55, 46, 88)
PLATE_REG = [(L.CONTAIN, 5, 5, 28, 33)]
MUG_BOX = (12, 60, 30, 80)
MUG_REG = [(L.CONTAIN, 3, 3, 17, 15), (L.WRAP_GRASP, 3, 15, 17, 18)]
BOX_BOX = (60, 58, 92, 86)
BOX_REG = [(L.CONTAIN, 4, 4, 24, 28)]
FORK_BOX = (4, 30, 32, 40)
FORK_REG = [(L.GRASP, 2, 0, 8, 14), (L.GRASP, 2, 16, 8, 28)]
CUBE_BOX = (10, 10, 24, 24)
CUBE_REG = [(L.GRASP, 2, 2, 12, 12)]
ERASER_BOX = (40, 12, 56, 22)
ERASER_REG = [(L.GRASP, 1, 1, 9, 15)]


def scene_kitchen():
    dets = [
        rec(KNIFE_BOX, KNIFE_REG, 0.95, attr(L.GRASP, L.CUT)),
        rec(SPOON_BOX, SPOON_REG, 0.93, attr(L.GRASP, L.SCOOP)),
        rec(BOWL_BOX, BOWL_REG, 0.97, attr(L.CONTAIN)),
        rec(POT_BOX, POT_REG, 0.91, attr(L.CONTAIN)),
    ]
    objs = [
        obj(shift(KNIFE_BOX), "knife"),
        obj(shift(SPOON_BOX), "spoon"),
        obj(shift(BOWL_BOX), "bowl"),
        obj(shift(POT_BOX), "pot", 0.88),
    ]
    return dets, objs


def scene_scoop():
    dets = [
        rec(TROWEL_BOX, TROWEL_REG, 0.9, attr(L.GRASP, L.SCOOP)),
        rec(SPOON_BOX, SPOON_REG, 0.93, attr(L.GRASP, L.SCOOP)),
        rec(BOWL_BOX, BOWL_REG, 0.97, attr(L.CONTAIN)),
        rec(POT_BOX, POT_REG, 0.91, attr(L.CONTAIN)),
    ]
    objs = [
        obj(shift(TROWEL_BOX), "trowel", 0.85),
        obj(shift(SPOON_BOX), "spoon"),
        obj(shift(BOWL_BOX), "bowl"),
        obj(shift(POT_BOX), "pot", 0.88),
    ]
    return dets, objs


def scene_stash_full():
    dets = [
        rec(SPOON_BOX, SPOON_REG, 0.93, attr(L.GRASP, L.SCOOP)),
        rec(PLATE_BOX, PLATE_REG, 0.94, attr(L.CONTAIN)),
        rec(POT_BOX, POT_REG, 0.91, attr(L.CONTAIN)),
    ]
    objs = [
        obj(shift(SPOON_BOX), "spoon"),
        obj(shift(PLATE_BOX), "plate"),
        obj(shift(POT_BOX), "pot", 0.88),
    ]
    return dets, objs


def scene_stash_occluded():
    # the spoon sits inside the plate now; the detector misses it
    dets = [
        rec(PLATE_BOX, PLATE_REG, 0.94, attr(L.CONTAIN)),
        rec(POT_BOX, POT_REG, 0.91, attr(L.CONTAIN)),
    ]
    objs = [
        obj(shift(PLATE_BOX), "plate"),
        obj(shift(POT_BOX), "pot", 0.88),
    ]
    return dets, objs


def scene_two_and_two():
    dets = [
        rec(CUBE_BOX, CUBE_REG, 0.9, attr(L.GRASP)),
        rec(ERASER_BOX, ERASER_REG, 0.89, attr(L.GRASP)),
        rec(MUG_BOX, MUG_REG, 0.92, attr(L.CONTAIN, L.WRAP_GRASP)),
        rec(BOX_BOX, BOX_REG, 0.95, attr(L.CONTAIN)),
    ]
    objs = [
        obj(shift(CUBE_BOX), "toy-cube"),
        obj(shift(ERASER_BOX), "eraser", 0.84),
        obj(shift(MUG_BOX), "mug"),
        obj(shift(BOX_BOX), "box"),
    ]
    return dets, objs


def scene_tabletop():
    dets = [
        rec(FORK_BOX, FORK_REG, 0.94, attr(L.GRASP)),
        rec(BOWL_BOX, BOWL_REG, 0.97, attr(L.CONTAIN)),
        rec(SPOON_BOX, SPOON_REG, 0.93, attr(L.GRASP, L.SCOOP)),
        rec(MUG_BOX, MUG_REG, 0.92, attr(L.CONTAIN, L.WRAP_GRASP)),
    ]
    objs = [
        obj(shift(FORK_BOX), "fork"),
        obj(shift(BOWL_BOX), "bowl"),
        obj(shift(SPOON_BOX), "spoon"),
        obj(shift(MUG_BOX), "mug"),
    ]
    return dets, objs


def write_scenes():
    SCENES.mkdir(parents=True, exist_ok=True)
    for name, builder in [
        ("kitchen", scene_kitchen),
        ("scoop", scene_scoop),
        ("stash_full", scene_stash_full),
        ("stash_occluded", scene_stash_occluded),
        ("two_and_two", scene_two_and_two),
        ("tabletop", scene_tabletop),
    ]:
        dets, objs = builder()
        save_detections(SCENES / f"{name}_aff.json", dets)
        save_objects(SCENES / f"{name}_obj.json", objs)
        print(f"wrote {name}: {len(dets)} detections")


def write_metrics_demo():
    """Tiny pred/gt pairs for the metrics subcommand."""
    for sub in ("pred", "gt", "ranked/pred", "ranked/gt"):
        (METRICS / sub).mkdir(parents=True, exist_ok=True)

    gt_disk = np.zeros((24, 24))
    yy, xx = np.mgrid[0:24, 0:24]
    gt_disk[(yy - 12) ** 2 + (xx - 12) ** 2 <= 36] = 1.0
    pred_disk = np.clip(
        1.0 - np.sqrt((yy - 13.0) ** 2 + (xx - 11.0) ** 2) / 8.0, 0.0, 1.0
    )

    gt_bar = np.zeros((20, 30))
    gt_bar[8:13, 4:26] = 1.0
    pred_bar = np.zeros((20, 30))
    pred_bar[7:12, 6:28] = 0.85

    write_pgm(METRICS / "gt" / "cup_grasp.pgm", gt_disk)
    write_pgm(METRICS / "pred" / "cup_grasp.pgm", pred_disk)
    write_pgm(METRICS / "gt" / "knife_cut.pgm", gt_bar)
    write_pgm(METRICS / "pred" / "knife_cut.pgm", pred_bar)

    write_pgm(METRICS / "ranked" / "gt" / "cup_grasp.pgm", gt_disk)
    write_pgm(METRICS / "ranked" / "pred" / "cup_grasp_r1.pgm", pred_disk)
    write_pgm(METRICS / "ranked" / "pred" / "cup_grasp_r2.pgm", pred_disk * 0.7)
    write_pgm(
        METRICS / "ranked" / "pred" / "cup_grasp_r3.pgm", np.roll(pred_disk, 3, 1)
    )
    print("wrote metrics demo images")


if __name__ == "__main__":
    write_scenes()
    write_metrics_demo()
