"""Round-trip and validation tests for the on-disk formats."""

import json

import numpy as np
import pytest

from affplan.formats import (
    FormatError,
    load_detections,
    load_keeper,
    load_objects,
    read_pgm,
    save_detections,
    save_keeper,
    save_objects,
    write_pgm,
)
from affplan.scene import (
    DetectionRecord,
    KeeperInvariantError,
    ObjectDetection,
    Pose,
    StateKeeper,
)


# ---------------------------------------------------------------------------
# detections


def _sample_records():
    mask = np.zeros((3, 4), dtype=np.uint8)
    mask[1, :] = 1
    ranked = (np.roll(mask, 1, axis=0), mask.copy())
    return [
        DetectionRecord((2, 3, 6, 6), 0.75, mask),
        DetectionRecord(
            (0, 0, 4, 3),
            1.0,
            mask,
            attributes=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0),
            ranked_masks=ranked,
            id="left-thing",
        ),
    ]


def test_detections_round_trip(tmp_path):
    path = tmp_path / "dets.json"
    records = _sample_records()
    save_detections(path, records)
    loaded = load_detections(path)
    assert len(loaded) == len(records)
    for a, b in zip(records, loaded):
        assert a.bbox == b.bbox
        assert a.objectness == b.objectness
        assert np.array_equal(a.mask, b.mask)
        assert a.attributes == b.attributes
        assert a.id == b.id
        assert len(a.ranked_masks) == len(b.ranked_masks)
        for ra, rb in zip(a.ranked_masks, b.ranked_masks):
            assert np.array_equal(ra, rb)


def test_detections_save_is_deterministic(tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_detections(p1, _sample_records())
    save_detections(p2, _sample_records())
    assert p1.read_bytes() == p2.read_bytes()


def test_detections_load_errors(tmp_path):
    path = tmp_path / "bad.json"

    path.write_text("[1, 2]")
    with pytest.raises(FormatError):
        load_detections(path)

    path.write_text("{nope")
    with pytest.raises(FormatError):
        load_detections(path)

    path.write_text(json.dumps({"version": 2, "detections": []}))
    with pytest.raises(FormatError) as exc:
        load_detections(path)
    assert "version" in str(exc.value)

    path.write_text(json.dumps({"version": 1}))
    with pytest.raises(FormatError):
        load_detections(path)

    # a broken record reports its index and the file
    path.write_text(
        json.dumps({"version": 1, "detections": [{"objectness": 0.5}]})
    )
    with pytest.raises(FormatError) as exc:
        load_detections(path)
    assert "#0" in str(exc.value)
    assert "bad.json" in str(exc.value)

    # ragged mask
    path.write_text(
        json.dumps(
            {
                "version": 1,
                "detections": [
                    {"bbox": [0, 0, 2, 2], "objectness": 0.5, "mask": [[1], [1, 2]]}
                ],
            }
        )
    )
    with pytest.raises(FormatError):
        load_detections(path)

    with pytest.raises(FormatError):
        load_detections(tmp_path / "missing.json")


# ---------------------------------------------------------------------------
# objects


def test_objects_round_trip_and_errors(tmp_path):
    path = tmp_path / "objs.json"
    objs = [
        ObjectDetection((0, 0, 5, 5), "mug", 0.9),
        ObjectDetection((10, 2, 14, 9), "cutting board", 0.35),
    ]
    save_objects(path, objs)
    assert load_objects(path) == objs

    path.write_text(
        json.dumps(
            {"version": 1, "detections": [{"bbox": [0, 0, 1, 1], "score": 0.2}]}
        )
    )
    with pytest.raises(FormatError) as exc:
        load_objects(path)
    assert "#0" in str(exc.value)

    path.write_text(
        json.dumps(
            {
                "version": 1,
                "detections": [{"bbox": [0, 0, 1, 1], "category": "x", "score": 7}],
            }
        )
    )
    with pytest.raises(FormatError):
        load_objects(path)


# ---------------------------------------------------------------------------
# keeper


def test_keeper_round_trip(tmp_path):
    keeper = StateKeeper.empty()
    keeper.record(("graspable", "fork"), session=0)
    keeper.record(("in", "fork", "bowl"), session=2)
    keeper.record(("container", "bowl"), session=1)
    keeper.session = 3
    keeper.anchors["fork"] = Pose(3.25, 8.5, 1.25)
    keeper.anchors["bowl"] = Pose(10.0, 20.0, 0.0)

    path = tmp_path / "keeper.json"
    save_keeper(path, keeper)
    loaded = load_keeper(path)
    assert loaded.session == 3
    assert loaded.facts == keeper.facts
    assert loaded.anchors == keeper.anchors

    # writing the loaded keeper back reproduces the file byte for byte
    path2 = tmp_path / "keeper2.json"
    save_keeper(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()


def test_keeper_load_errors(tmp_path):
    path = tmp_path / "keeper.json"

    path.write_text(json.dumps({"version": 1, "facts": [{"atom": []}]}))
    with pytest.raises(FormatError):
        load_keeper(path)

    path.write_text(json.dumps({"version": 1, "facts": [{"sess": 1}]}))
    with pytest.raises(FormatError):
        load_keeper(path)

    # transient predicates are rejected at record time
    path.write_text(
        json.dumps({"version": 1, "facts": [{"atom": ["holding", "fork"]}]})
    )
    with pytest.raises(FormatError):
        load_keeper(path)

    # invariant violations surface as such
    path.write_text(
        json.dumps(
            {
                "version": 1,
                "facts": [
                    {"atom": ["on-table", "fork"]},
                    {"atom": ["in", "fork", "bowl"]},
                ],
            }
        )
    )
    with pytest.raises(KeeperInvariantError):
        load_keeper(path)

    path.write_text(
        json.dumps({"version": 1, "anchors": {"fork": {"y": 1.0}}})
    )
    with pytest.raises(FormatError) as exc:
        load_keeper(path)
    assert "fork" in str(exc.value)


def test_keeper_anchor_theta_defaults_to_zero(tmp_path):
    path = tmp_path / "keeper.json"
    path.write_text(
        json.dumps({"version": 1, "anchors": {"mug": {"x": 1.5, "y": 2.5}}})
    )
    keeper = load_keeper(path)
    assert keeper.anchors["mug"] == Pose(1.5, 2.5, 0.0)


# ---------------------------------------------------------------------------
# PGM


def test_pgm_write_read_round_trip(tmp_path):
    rng = np.random.default_rng(77)
    img = rng.random((9, 13))
    path = tmp_path / "map.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert back.shape == img.shape
    # 8-bit quantization
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-12
    # higher maxval tightens the error
    write_pgm(path, img, maxval=65535)
    back16 = read_pgm(path)
    assert np.max(np.abs(back16 - img)) <= 0.5 / 65535 + 1e-12


def test_pgm_exact_values(tmp_path):
    path = tmp_path / "tiny.pgm"
    path.write_text("P2\n# a comment\n3 2\n10\n0 5 10\n1 2 3\n")
    img = read_pgm(path)
    assert img.shape == (2, 3)
    assert np.array_equal(img, np.array([[0, 5, 10], [1, 2, 3]]) / 10.0)


def test_pgm_p5_binary(tmp_path):
    path = tmp_path / "bin.pgm"
    body = bytes([0, 128, 255, 64])
    path.write_bytes(b"P5\n2 2\n255\n" + body)
    img = read_pgm(path)
    assert np.array_equal(img, np.array([[0, 128], [255, 64]]) / 255.0)


def test_pgm_p5_sixteen_bit(tmp_path):
    path = tmp_path / "deep.pgm"
    vals = np.array([[0, 32768], [65535, 1]], dtype=">u2")
    path.write_bytes(b"P5 2 2 65535\n" + vals.tobytes())
    img = read_pgm(path)
    assert np.array_equal(img, vals.astype(np.float64) / 65535.0)


def test_pgm_read_errors(tmp_path):
    path = tmp_path / "bad.pgm"

    path.write_bytes(b"P3\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(FormatError):
        read_pgm(path)

    path.write_bytes(b"P2\n2 2\n")
    with pytest.raises(FormatError) as exc:
        read_pgm(path)
    assert "truncated" in str(exc.value)

    path.write_bytes(b"P5\n2 2\n255\n\x00\x01")
    with pytest.raises(FormatError):
        read_pgm(path)

    path.write_bytes(b"P2\n2 2\n255\n0 1 2\n")
    with pytest.raises(FormatError):
        read_pgm(path)

    path.write_bytes(b"P2\n2 2\n255\n0 1 2 300\n")
    with pytest.raises(FormatError):
        read_pgm(path)

    path.write_bytes(b"P2\n0 2\n255\n\n")
    with pytest.raises(FormatError):
        read_pgm(path)

    path.write_bytes(b"P2\n2 2\n70000\n0 0 0 0\n")
    with pytest.raises(FormatError):
        read_pgm(path)

    with pytest.raises(FormatError):
        read_pgm(tmp_path / "absent.pgm")


def test_pgm_write_errors(tmp_path):
    path = tmp_path / "x.pgm"
    with pytest.raises(FormatError):
        write_pgm(path, np.zeros((0, 3)))
    with pytest.raises(FormatError):
        write_pgm(path, np.zeros(4))
    with pytest.raises(FormatError):
        write_pgm(path, np.array([[0.0, 1.5]]))
    with pytest.raises(FormatError):
        write_pgm(path, np.array([[np.nan, 0.5]]))


def test_fixture_pgms_load(fixtures_dir):
    pred = read_pgm(fixtures_dir / "metrics_demo" / "pred" / "cup_grasp.pgm")
    gt = read_pgm(fixtures_dir / "metrics_demo" / "gt" / "cup_grasp.pgm")
    assert pred.shape == gt.shape
    assert 0.0 <= pred.min() and pred.max() <= 1.0
    assert set(np.unique(gt)) <= {0.0, 1.0}
