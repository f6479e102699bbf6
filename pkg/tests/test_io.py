import numpy as np
import pytest

from blobcanvas import io


def test_rgb_round_trip(tmp_path):
    rgb = np.random.default_rng(0).integers(0, 256, (6, 9, 3), dtype=np.uint8)
    io.write_rgb(tmp_path / "a.png", rgb)
    assert np.array_equal(io.read_rgb(tmp_path / "a.png"), rgb)


def test_labels_and_instances_round_trip(tmp_path):
    labels = np.arange(60, dtype=np.uint8).reshape(6, 10)
    inst = (np.arange(60, dtype=np.uint16) * 1000 + 7).reshape(6, 10)
    io.write_labels(tmp_path / "l.png", labels)
    io.write_instances(tmp_path / "i.png", inst)
    assert np.array_equal(io.read_labels(tmp_path / "l.png"), labels)
    assert np.array_equal(io.read_instances(tmp_path / "i.png"), inst)
    with pytest.raises(ValueError):
        io.write_labels(tmp_path / "x.png", np.array([[300]]))


def test_mask_encoding(tmp_path):
    m = np.eye(4, dtype=bool)
    io.write_mask(tmp_path / "m.png", m)
    raw = io.read_gray(tmp_path / "m.png")
    assert set(np.unique(raw)) == {0, 255}
    assert np.array_equal(io.read_mask(tmp_path / "m.png"), m)


def test_depth_fixed_point(tmp_path):
    depth = np.array([[0.0, 1.0, 0.001], [12.34, 300.0, 1e6]])
    raw = io.depth_to_png(depth)
    assert raw.dtype == np.uint16
    assert raw[0, 0] == 0 and raw[0, 1] == 256
    assert raw[0, 2] == 1  # positive values never encode as "no measurement"
    assert raw[1, 2] == 65535
    io.write_depth(tmp_path / "d.png", depth)
    back = io.read_depth(tmp_path / "d.png")
    assert back[0, 1] == 1.0 and abs(back[1, 0] - 12.34) <= 0.5 / 256
    assert back[1, 1] == 65535 / 256  # 16 bits at 1/256 m top out just below 256 m
    assert ((back > 0) == (depth > 0)).all()


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        io.read_rgb(tmp_path / "nope.png")
