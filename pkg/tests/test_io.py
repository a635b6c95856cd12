import json

import numpy as np
import pytest
from PIL import Image

from xviewbev import io
from xviewbev.panorama import PanoramaDepth


@pytest.mark.parametrize("dtype", [np.uint8, np.float32, np.float64])
@pytest.mark.parametrize("shape", [(5,), (3, 4), (2, 3, 4)])
def test_cvbr_round_trip(tmp_path, rng, dtype, shape):
    a = (rng.uniform(0, 200, size=shape)).astype(dtype)
    io.write_cvbr(tmp_path / "a.cvbr", a)
    b = io.read_cvbr(tmp_path / "a.cvbr")
    assert b.shape == (1,) * (3 - len(shape)) + shape
    assert b.dtype == np.dtype(dtype) and b.tobytes() == a.tobytes()


def test_cvbr_header_layout(tmp_path):
    io.write_cvbr(tmp_path / "a.cvbr", np.array([[1.5]], dtype=np.float32))
    blob = (tmp_path / "a.cvbr").read_bytes()
    assert blob[:4] == b"CVBR" and blob[4] == 1
    assert blob[5:17] == (1).to_bytes(4, "little") * 3
    assert blob[17] == 2
    assert blob[18:] == np.float32(1.5).tobytes()


def test_cvbr_rejects_garbage(tmp_path):
    (tmp_path / "bad.cvbr").write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(io.FormatError):
        io.read_cvbr(tmp_path / "bad.cvbr")
    io.write_cvbr(tmp_path / "t.cvbr", np.zeros(4, dtype=np.uint8))
    (tmp_path / "t.cvbr").write_bytes((tmp_path / "t.cvbr").read_bytes()[:-1])
    with pytest.raises(io.FormatError):
        io.read_cvbr(tmp_path / "t.cvbr")
    with pytest.raises(io.FormatError):
        io.write_cvbr(tmp_path / "x.cvbr", np.zeros(3, dtype=np.int32))


def test_depth_png_scale(tmp_path):
    raw = np.array([[256, 0], [512, 65535]], dtype=np.uint16)
    Image.fromarray(raw).save(tmp_path / "d.png")
    d = io.load_depth_png(tmp_path / "d.png")
    assert d.depth[0, 0] == 1.0 and d.depth[1, 0] == 2.0
    assert np.isnan(d.depth[0, 1])
    assert not d.valid[0, 1]


def test_depth_png_round_trip(tmp_path, canonical_render):
    depth = canonical_render.depth
    io.save_depth_png(tmp_path / "d.png", depth)
    back = io.load_depth_png(tmp_path / "d.png")
    assert np.array_equal(back.valid, depth.valid)
    top = 65535 * io.DEFAULT_DEPTH_SCALE
    fits = depth.valid & (depth.depth <= top)
    err = np.abs(back.depth[fits] - depth.depth[fits])
    assert err.max() <= io.DEFAULT_DEPTH_SCALE / 2
    # out-of-range depths saturate at the largest code
    far = depth.valid & (depth.depth > top)
    assert far.any() and np.all(back.depth[far] == top)


def test_depth_png_rejects_8bit(tmp_path):
    Image.fromarray(np.zeros((2, 2), dtype=np.uint8)).save(tmp_path / "d8.png")
    with pytest.raises(io.FormatError, match="d8.png"):
        io.load_depth_png(tmp_path / "d8.png")
    (tmp_path / "junk.png").write_bytes(b"not a png")
    with pytest.raises(io.FormatError, match="junk.png"):
        io.load_depth_png(tmp_path / "junk.png")


def test_mask_any_nonzero_is_building(tmp_path):
    Image.fromarray(np.array([[0, 255], [3, 0]], dtype=np.uint8)).save(tmp_path / "m.png")
    assert io.load_mask_png(tmp_path / "m.png").tolist() == [[0, 1], [1, 0]]


def test_manifest_round_trip(tmp_path):
    entry = io.PairManifest("p1", "pano.png", "depth.png", "fp.png", "sat.png", gsd=0.5,
                            offset_east=1.0, offset_north=-2.0)
    io.write_manifests(tmp_path / "m.jsonl", [entry, entry])
    lines = (tmp_path / "m.jsonl").read_text().splitlines()
    assert len(lines) == 2 and json.loads(lines[0])["pair_id"] == "p1"
    back = io.read_manifests(tmp_path / "m.jsonl")
    assert back[0].panorama_path == str(tmp_path / "pano.png")
    assert back[0].offset_north == -2.0


@pytest.mark.parametrize("bad", [{"gsd": 0.0}, {"tile_size": 0}, {"depth_path": ""}, {"bogus": 1}])
def test_manifest_validation(bad):
    data = dict(pair_id="p", panorama_path="a", depth_path="b", footprint_path="c",
                satellite_label_path="d", gsd=1.0)
    data.update(bad)
    with pytest.raises((ValueError, TypeError)):
        io.PairManifest.from_dict(data)
