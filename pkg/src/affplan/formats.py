"""On-disk formats: detection records, object detections, keeper state
(JSON), and grayscale masks/maps (PGM, types P2 and P5).

All JSON payloads carry a "version": 1 field. Loaders validate eagerly and
raise FormatError with the offending file in the message; writers produce
deterministic output (sorted facts, fixed key order) so files diff cleanly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .scene import DetectionRecord, ObjectDetection, Pose, StateKeeper

__all__ = [
    "FormatError",
    "load_detections",
    "save_detections",
    "load_objects",
    "save_objects",
    "load_keeper",
    "save_keeper",
    "read_pgm",
    "write_pgm",
]


class FormatError(ValueError):
    """A file does not conform to its documented format."""


def _load_json(path: Path, kind: str) -> dict:
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot read {kind} file {path}: {e}") from e
    if not isinstance(raw, dict):
        raise FormatError(f"{kind} file {path} must hold a JSON object")
    version = raw.get("version")
    if version != 1:
        raise FormatError(
            f"{kind} file {path} has unsupported version {version!r}"
        )
    return raw


def _mask_from_json(node, path: Path) -> np.ndarray:
    try:
        arr = np.asarray(node, dtype=np.int64)
    except (TypeError, ValueError) as e:
        raise FormatError(f"bad mask grid in {path}: {e}") from e
    if arr.ndim != 2:
        raise FormatError(f"mask in {path} must be a 2-d grid of labels")
    return arr


def load_detections(path: str | Path) -> list[DetectionRecord]:
    """Read affordance detection records from a JSON file."""
    path = Path(path)
    raw = _load_json(path, "detections")
    records = raw.get("detections")
    if not isinstance(records, list):
        raise FormatError(f"{path} needs a 'detections' list")
    out: list[DetectionRecord] = []
    for i, node in enumerate(records):
        try:
            rec = DetectionRecord(
                bbox=tuple(node["bbox"]),
                objectness=float(node["objectness"]),
                mask=_mask_from_json(node["mask"], path),
                attributes=tuple(node["attributes"])
                if node.get("attributes") is not None
                else None,
                ranked_masks=tuple(
                    _mask_from_json(m, path) for m in node.get("ranked_masks", [])
                ),
                id=node.get("id"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad detection #{i} in {path}: {e}") from e
        out.append(rec)
    return out


def save_detections(path: str | Path, records: Sequence[DetectionRecord]) -> None:
    payload = {
        "version": 1,
        "detections": [
            {
                "bbox": list(r.bbox),
                "objectness": r.objectness,
                "mask": r.mask.tolist(),
                **({"attributes": list(r.attributes)} if r.attributes else {}),
                **(
                    {"ranked_masks": [m.tolist() for m in r.ranked_masks]}
                    if r.ranked_masks
                    else {}
                ),
                **({"id": r.id} if r.id else {}),
            }
            for r in records
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_objects(path: str | Path) -> list[ObjectDetection]:
    """Read object-detector outputs from a JSON file."""
    path = Path(path)
    raw = _load_json(path, "objects")
    records = raw.get("detections")
    if not isinstance(records, list):
        raise FormatError(f"{path} needs a 'detections' list")
    out: list[ObjectDetection] = []
    for i, node in enumerate(records):
        try:
            out.append(
                ObjectDetection(
                    bbox=tuple(node["bbox"]),
                    category=str(node["category"]),
                    score=float(node["score"]),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad object #{i} in {path}: {e}") from e
    return out


def save_objects(path: str | Path, records: Sequence[ObjectDetection]) -> None:
    payload = {
        "version": 1,
        "detections": [
            {"bbox": list(r.bbox), "category": r.category, "score": r.score}
            for r in records
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_keeper(path: str | Path) -> StateKeeper:
    """Read keeper state; a missing file is not handled here (callers
    decide whether to start fresh)."""
    path = Path(path)
    raw = _load_json(path, "keeper")
    keeper = StateKeeper(session=int(raw.get("session", 0)))
    for i, node in enumerate(raw.get("facts", [])):
        try:
            atom = tuple(str(x) for x in node["atom"])
            if not atom:
                raise ValueError("empty atom")
            keeper.record(atom, int(node.get("session", 0)))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad keeper fact #{i} in {path}: {e}") from e
    for name, node in raw.get("anchors", {}).items():
        try:
            keeper.anchors[str(name)] = Pose(
                x=float(node["x"]),
                y=float(node["y"]),
                theta=float(node.get("theta", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad keeper anchor {name!r} in {path}: {e}") from e
    keeper.check_invariants()
    return keeper


def save_keeper(path: str | Path, keeper: StateKeeper) -> None:
    payload = {
        "version": 1,
        "session": keeper.session,
        "facts": [
            {"atom": list(atom), "session": stamp}
            for atom, stamp in sorted(keeper.facts.items())
        ],
        "anchors": {
            name: {"x": p.x, "y": p.y, "theta": p.theta}
            for name, p in sorted(keeper.anchors.items())
        },
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


# ---------------------------------------------------------------------------
# PGM


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a PGM image (P2 ASCII or P5 binary) as floats in [0, 1]."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read image {path}: {e}") from e

    # header: magic, width, height, maxval, with # comments allowed
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if i > start:
            tokens.append(data[start:i])
    if len(tokens) < 4:
        raise FormatError(f"{path}: truncated PGM header")
    magic = tokens[0]
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as e:
        raise FormatError(f"{path}: bad PGM header") from e
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"{path}: unsupported PGM type {magic!r}")
    if width < 1 or height < 1 or not (0 < maxval < 65536):
        raise FormatError(f"{path}: bad PGM dimensions or maxval")

    if magic == b"P5":
        i += 1  # single whitespace byte after maxval
        nbytes = width * height * (2 if maxval > 255 else 1)
        body = data[i : i + nbytes]
        if len(body) != nbytes:
            raise FormatError(f"{path}: truncated PGM data")
        dtype = ">u2" if maxval > 255 else np.uint8
        vals = np.frombuffer(body, dtype=dtype).astype(np.float64)
    else:
        try:
            vals = np.array(data[i:].split(), dtype=np.float64)
        except ValueError as e:
            raise FormatError(f"{path}: bad PGM pixel data") from e
        if vals.size != width * height:
            raise FormatError(
                f"{path}: expected {width * height} pixels, got {vals.size}"
            )
    if vals.size and (vals.min() < 0 or vals.max() > maxval):
        raise FormatError(f"{path}: pixel values outside 0..{maxval}")
    return (vals / float(maxval)).reshape(height, width)


def write_pgm(path: str | Path, values: np.ndarray, maxval: int = 255) -> None:
    """Write floats in [0, 1] as an ASCII (P2) PGM."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise FormatError("image must be a non-empty 2-d array")
    if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
        raise FormatError("image values must lie in [0, 1]")
    q = np.rint(a * maxval).astype(np.int64)
    lines = ["P2", f"{a.shape[1]} {a.shape[0]}", str(maxval)]
    for row in q:
        lines.append(" ".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
