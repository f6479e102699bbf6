import logging

import numpy as np
import pytest

from blobcanvas.blobdb import BlobDatabase, BlobRecord, extract_blobs
from blobcanvas.canvas import (
    CanvasError,
    CompositionPlan,
    IrreparableCanvasError,
    PasteItem,
    compose,
    hole_boundary_map,
    make_canvas,
    plan_composition,
    repair_holes,
)
from blobcanvas.classes import cityscapes_classes
from blobcanvas.fixtures import BUILDING, CAR, PERSON, ROAD, SIDEWALK, SKY, VEGETATION
from blobcanvas.raster import RgbCanvas
from blobcanvas.shape import hu_descriptor

CLASSES = cityscapes_classes(remap=False)
STATIC = CLASSES.static_ids


def _db_from(labels, instances=None):
    from blobcanvas.dataset import SceneAnnotation

    rgb = np.full(labels.shape + (3,), 100, np.uint8)
    db = BlobDatabase(CLASSES, min_blob_area=1)
    db.extend(extract_blobs(SceneAnnotation("g", rgb, labels, instances), min_area=1))
    return db


def test_plan_tiers():
    labels = np.full((40, 60), SKY, np.uint8)
    labels[25:, :] = ROAD
    inst = np.zeros(labels.shape, np.int32)
    labels[28:36, 10:30] = CAR
    inst[28:36, 10:30] = CAR * 1000 + 1
    plan = plan_composition(labels, inst, CLASSES)
    assert [it.cls for it in plan.items] == [SKY, ROAD, CAR]


def test_plan_area_order_within_tier():
    labels = np.zeros((100, 201), np.uint8)
    labels[0:50, 0:100] = BUILDING  # 5000
    labels[0:90, 101:201] = BUILDING  # 9000
    plan = plan_composition(labels, None, CLASSES)
    assert [it.area for it in plan.items] == [9000, 5000]


def test_plan_static_before_dynamic_regardless_of_area():
    labels = np.zeros((50, 50), np.uint8)
    labels[:, :40] = PERSON
    labels[:, 45:] = VEGETATION
    assert [it.cls for it in plan_composition(labels, None, CLASSES).items] == [VEGETATION, PERSON]


def test_plan_empty_guide():
    assert len(plan_composition(np.zeros((8, 8), np.uint8), None, CLASSES)) == 0


def test_self_reconstruction_small():
    labels = np.full((40, 60), SKY, np.uint8)
    labels[20:, :] = ROAD
    labels[5:20, 5:25] = BUILDING
    inst = np.zeros(labels.shape, np.int32)
    labels[25:35, 30:50] = CAR
    inst[25:35, 30:50] = CAR * 1000 + 1
    bundle = make_canvas(labels, inst, _db_from(labels, inst), CLASSES)
    assert np.array_equal(bundle.semantic_raw, labels)
    assert all(it.iou == 1.0 for it in bundle.plan.items)
    assert bundle.rgb.coverage.all()


def test_missing_class_skipped(caplog):
    labels = np.zeros((20, 20), np.uint8)
    labels[5:15, 5:15] = CAR
    db = BlobDatabase(CLASSES, min_blob_area=1)
    with caplog.at_level(logging.INFO, logger="blobcanvas.canvas"):
        bundle = compose(plan_composition(labels, None, CLASSES), db)
    assert not bundle.semantic.any() and bundle.holes_boundaries.all()
    assert bundle.plan.items[0].skipped == "EmptyClassError"
    assert "left as hole" in caplog.text
    assert "skipped=EmptyClassError" in bundle.plan.to_text()


def test_dynamic_overwrites_static():
    labels = np.zeros((30, 30), np.uint8)
    labels[:, :] = ROAD
    m = np.ones((10, 10), bool)
    db = BlobDatabase(CLASSES, min_blob_area=1)
    for cls, mask in ((ROAD, np.ones((30, 30), bool)), (CAR, m)):
        db.add(BlobRecord(None, cls, np.zeros(mask.shape + (3,), np.uint8), mask, hu_descriptor(mask), ("a", str(cls)), int(mask.sum())))
    plan = CompositionPlan((30, 30), [
        PasteItem(np.ones((30, 30), bool), ROAD, (0, 0, 30, 30)),
        PasteItem(m, CAR, (5, 5, 10, 10)),
    ])
    bundle = compose(plan, db)
    assert (bundle.semantic[5:15, 5:15] == CAR).all() and (bundle.semantic == ROAD).sum() == 800


def test_overflow_is_an_error():
    db = _db_from(np.full((4, 4), ROAD, np.uint8))
    plan = CompositionPlan((4, 4), [PasteItem(np.ones((3, 3), bool), ROAD, (2, 2, 3, 3))])
    with pytest.raises(CanvasError, match="plan item 0"):
        compose(plan, db)


def test_compose_deterministic(scenes):
    scene, _ = scenes[0]
    db = BlobDatabase(CLASSES, min_blob_area=50)
    for s, _ in scenes[1:]:
        db.extend(extract_blobs(s, min_area=50))
    a = make_canvas(scene.labels, scene.instances, db, CLASSES)
    b = make_canvas(scene.labels, scene.instances, db, CLASSES)
    for x, y in ((a.rgb.pixels, b.rgb.pixels), (a.semantic, b.semantic), (a.holes_boundaries, b.holes_boundaries), (a.edges, b.edges)):
        assert np.array_equal(x, y)
    assert a.plan.to_text() == b.plan.to_text()
    assert not (a.semantic == 0).any()
    assert (~a.rgb.coverage & ~a.holes_boundaries).sum() == 0


def test_repair_rule_one():
    aligned = np.full((5, 5), CAR, np.uint8)
    guide = np.full((5, 5), ROAD, np.uint8)
    aligned[1:3, 1:3] = 0
    out = repair_holes(aligned, guide, STATIC)
    assert (out[1:3, 1:3] == ROAD).all() and (out[aligned != 0] == CAR).all()


def test_repair_rule_two_nearest_static():
    aligned = np.full((9, 9), CAR, np.uint8)
    aligned[:, :2] = BUILDING
    aligned[:, -1] = SIDEWALK
    aligned[4, 3] = 0
    guide = np.full((9, 9), CAR, np.uint8)
    out = repair_holes(aligned, guide, STATIC)
    assert out[4, 3] == BUILDING
    assert np.array_equal(out[aligned != 0], aligned[aligned != 0])


def test_repair_lower_id_wins_ties():
    aligned = np.full((1, 5), CAR, np.uint8)
    aligned[0, 0] = BUILDING
    aligned[0, 4] = SIDEWALK
    aligned[0, 2] = 0
    out = repair_holes(aligned, np.full((1, 5), CAR, np.uint8), STATIC)
    assert out[0, 2] == min(BUILDING, SIDEWALK)


def test_repair_identity_and_irreparable():
    aligned = np.full((4, 4), ROAD, np.uint8)
    assert np.array_equal(repair_holes(aligned, aligned, STATIC), aligned)
    dyn = np.full((4, 4), CAR, np.uint8)
    dyn[0, 0] = 0
    with pytest.raises(IrreparableCanvasError):
        repair_holes(dyn, dyn, STATIC)


def _bundle(shape, pasted):
    from blobcanvas.canvas import CanvasBundle

    canvas = RgbCanvas.blank(*shape)
    for mask, (top, left, h, w) in pasted:
        canvas.paste(np.zeros((h, w, 3), np.uint8), mask, top, left)
    z = np.zeros(shape, np.uint8)
    return CanvasBundle(canvas, z, z.astype(bool), z.astype(bool), CompositionPlan(shape), z.astype(np.int32), pasted)


def test_hole_map_single_blob_ring():
    m = np.ones((6, 6), bool)
    b = _bundle((10, 10), [(m, (2, 2, 6, 6))])
    h1 = hole_boundary_map(b, 1)
    ring = np.zeros((10, 10), bool)
    ring[2:8, 2:8] = True
    ring[3:7, 3:7] = False
    assert np.array_equal(h1, ring | ~b.rgb.coverage)
    assert hole_boundary_map(b, 2).sum() > h1.sum()


def test_hole_map_no_blobs():
    assert hole_boundary_map(_bundle((5, 7), []), 2).all()


def test_hole_map_two_adjacent_blobs():
    left, right = np.ones((6, 4), bool), np.ones((6, 4), bool)
    b = _bundle((6, 8), [(left, (0, 0, 6, 4)), (right, (0, 4, 6, 4))])
    h = hole_boundary_map(b, 1)
    expected = np.zeros((6, 8), bool)
    expected[:, 3:5] = True  # the canvas frame is not a boundary
    assert np.array_equal(h, expected)
