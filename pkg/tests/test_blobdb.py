import numpy as np
import pytest

from blobcanvas.blobdb import (
    BlobDatabase,
    BlobRecord,
    CorruptIndexError,
    EmptyClassError,
    MissingIndexError,
    MissingPatchError,
    VersionMismatchError,
    extract_blobs,
    segments,
)
from blobcanvas.classes import cityscapes_classes
from blobcanvas.dataset import SceneAnnotation
from blobcanvas.fixtures import CAR, VEGETATION
from blobcanvas.raster import flip_horizontal
from blobcanvas.shape import descriptor_distance, hu_descriptor

CLASSES = cityscapes_classes(remap=False)


def _scene(labels, instances=None, key="s"):
    h, w = labels.shape
    rgb = np.random.default_rng(0).integers(1, 256, (h, w, 3), dtype=np.uint8)
    return SceneAnnotation(key, rgb, labels, instances)


def test_single_car_instance():
    labels = np.zeros((60, 80), np.uint8)
    inst = np.zeros((60, 80), np.int32)
    labels[10:40, 10:60] = CAR  # 1500 px
    inst[10:40, 10:60] = CAR * 1000 + 1
    recs = extract_blobs(_scene(labels, inst))
    assert len(recs) == 1 and recs[0].area == 1500 and recs[0].cls == CAR
    assert recs[0].source == ("s", f"i{CAR * 1000 + 1}")


def test_small_instance_dropped():
    labels = np.zeros((60, 80), np.uint8)
    inst = np.zeros((60, 80), np.int32)
    labels[10:40, 10:40] = CAR  # 900 px
    inst[10:40, 10:40] = CAR * 1000 + 1
    assert extract_blobs(_scene(labels, inst)) == []


def test_stuff_components():
    labels = np.zeros((60, 120), np.uint8)
    labels[0:30, 0:40] = VEGETATION
    labels[30:60, 60:100] = VEGETATION
    recs = extract_blobs(_scene(labels))
    assert [r.area for r in recs] == [1200, 1200]


def test_occluded_instance_kept_whole():
    labels = np.zeros((40, 120), np.uint8)
    inst = np.zeros((40, 120), np.int32)
    labels[0:40, 0:100] = CAR
    inst[0:40, 0:100] = CAR * 1000 + 3
    labels[:, 40:60] = 6  # a pole cuts the car in two
    inst[:, 40:60] = 0
    recs = [r for r in extract_blobs(_scene(labels, inst), min_area=1) if r.cls == CAR]
    assert len(recs) == 1 and recs[0].area == 3200


def test_dimension_mismatch():
    s = _scene(np.zeros((10, 10), np.uint8))
    s.rgb = s.rgb[:, :5]
    with pytest.raises(ValueError):
        extract_blobs(s)


def test_record_invariants_and_union(scenes):
    for scene, _ in scenes:
        recs = extract_blobs(scene, min_area=1)
        rebuilt = np.zeros(scene.labels.shape, np.uint8)
        segs = segments(scene.labels, scene.instances)
        assert len(segs) == len(recs)
        for rec, seg in zip(recs, segs):
            m = rec.mask
            assert m[0].any() and m[-1].any() and m[:, 0].any() and m[:, -1].any()
            assert rec.area == m.sum()
            assert not rec.rgb[~m].any()
            top, left, h, w = seg.box
            window = rebuilt[top:top + h, left:left + w]
            assert not window[m].any()  # no pixel written twice
            window[m] = rec.cls
        assert np.array_equal(rebuilt, scene.labels)


def _db(scenes, min_area=1):
    db = BlobDatabase(CLASSES, min_blob_area=min_area, dataset="toy")
    for scene, _ in scenes:
        db.extend(extract_blobs(scene, min_area=min_area))
    return db


def test_add_validation():
    db = BlobDatabase(CLASSES, min_blob_area=10)
    m = np.ones((2, 2), bool)
    rec = BlobRecord(None, CAR, np.zeros((2, 2, 3), np.uint8), m, hu_descriptor(m), ("a", "b"), 4)
    with pytest.raises(ValueError):
        db.add(rec)
    db.min_blob_area = 1
    assert db.add(rec).id == 0 and db.add(rec).id == 1
    with pytest.raises(ValueError):
        db.add(BlobRecord(1, CAR, rec.rgb, m, rec.descriptor, ("a", "b"), 4))


def test_save_load_bit_exact(tmp_path, scenes):
    db = _db(scenes[:2])
    db.save(tmp_path / "db")
    back = BlobDatabase.load(tmp_path / "db")
    assert back.ids() == db.ids() and back.classes == db.classes
    assert back.min_blob_area == db.min_blob_area and back.dataset == "toy"
    for a, b in zip(db.records(), back.records()):
        assert a.same_content(b)
    # saving the loaded copy reproduces the index byte for byte
    back.save(tmp_path / "db2")
    assert (tmp_path / "db" / "index.txt").read_bytes() == (tmp_path / "db2" / "index.txt").read_bytes()


def test_load_errors(tmp_path, scenes):
    with pytest.raises(MissingIndexError):
        BlobDatabase.load(tmp_path)
    db = _db(scenes[:1])
    db.save(tmp_path / "db")
    index = tmp_path / "db" / "index.txt"
    text = index.read_text()

    index.write_text(text.replace("format = 1", "format = 2"))
    with pytest.raises(VersionMismatchError):
        BlobDatabase.load(tmp_path / "db")

    lines = text.splitlines()
    index.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(CorruptIndexError):
        BlobDatabase.load(tmp_path / "db")

    index.write_text(text)
    next((tmp_path / "db" / "patches").glob("*_mask.png")).unlink()
    with pytest.raises(MissingPatchError):
        BlobDatabase.load(tmp_path / "db")


def _single(mask, cls=CAR):
    db = BlobDatabase(CLASSES, min_blob_area=1)
    rgb = np.full(mask.shape + (3,), 50, np.uint8) * mask[..., None]
    db.add(BlobRecord(None, cls, rgb, mask, hu_descriptor(mask), ("x", "y"), int(mask.sum())))
    return db


def _l_shape():
    m = np.zeros((30, 20), bool)
    m[:, :6] = True
    m[-6:, :] = True
    return m


def test_retrieve_exact_and_mirror():
    m = _l_shape()
    db = _single(m)
    hit = db.retrieve(m, CAR)
    assert hit.record.id == 0 and not hit.flipped and hit.iou == 1.0
    hit = db.retrieve(np.pad(flip_horizontal(m), 3), CAR)
    assert hit.flipped and hit.iou == 1.0
    rgb, mask = hit.oriented()
    assert np.array_equal(mask, flip_horizontal(m))


def test_retrieve_symmetric_prefers_unflipped():
    m = np.zeros((9, 9), bool)
    m[2:7, :] = True
    m[:, 3:6] = True
    assert not _single(m).retrieve(m, CAR).flipped


def test_retrieve_vertical_option():
    m = _l_shape()
    db = _single(m)
    up = m[::-1]
    assert db.retrieve(up, CAR).iou < 1.0
    hit = db.retrieve(up, CAR, vertical=True)
    assert hit.vflipped and hit.iou == 1.0


def test_retrieve_empty_class():
    with pytest.raises(EmptyClassError):
        _single(_l_shape()).retrieve(_l_shape(), 12)


def test_ties_prefer_larger_area():
    m = np.ones((4, 4), bool)
    d = hu_descriptor(m)
    db = BlobDatabase(CLASSES, min_blob_area=1)
    rgb = np.zeros((4, 4, 3), np.uint8)
    db.add(BlobRecord(None, CAR, rgb, m, d, ("a", "0"), 16))
    db.add(BlobRecord(None, CAR, rgb, m, d, ("a", "1"), 40))
    db.add(BlobRecord(None, CAR, rgb, m, d, ("a", "2"), 40))
    assert db.candidate(d, CAR) == (1, 0.0)


def test_self_retrieval(scenes):
    db = _db(scenes)
    for rec in db.records():
        hit = db.retrieve(rec.mask, rec.cls)
        assert descriptor_distance(hit.record.descriptor, rec.descriptor) == 0.0


def test_lazy_load_serves_pixels(tmp_path, scenes):
    db = _db(scenes[:1])
    db.save(tmp_path / "db")
    back = BlobDatabase.load(tmp_path / "db")
    assert back._records == {}
    rec = back.get(back.ids()[0])
    assert rec.rgb.shape[:2] == rec.mask.shape
