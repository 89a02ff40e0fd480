import numpy as np
import pytest
from hypothesis import given, strategies as st

from aerialsynth.errors import ConfigError, DataError
from aerialsynth.geometry import AABB, Point2, RotatedRect
from aerialsynth.ingest import AnnotatedSample
from aerialsynth.manifest import Annotation, DatasetManifest, ImageRecord
from aerialsynth.tiler import TilingSpec, clip_annotation, resample, split, subsample, tile, tile_positions


def box(x0, y0, x1, y1):
    return Annotation.from_obb(RotatedRect(Point2((x0 + x1) / 2, (y0 + y1) / 2), x1 - x0, y1 - y0, 0))


def dummy_manifest(n):
    return DatasetManifest({}, [ImageRecord(f"img{i:05d}", f"img{i:05d}.png", 10, 10) for i in range(n)])


def test_positions_examples():
    assert len(tile_positions(6000, 600, 200)) ** 2 == 225
    assert tile_positions(1000, 600, 200) == [0, 400]
    assert tile_positions(600, 600, 200) == [0]
    with pytest.raises(DataError):
        tile_positions(599, 600, 200)


@given(st.integers(1, 400), st.data())
def test_positions_cover_extent(patch, data):
    overlap = data.draw(st.integers(0, patch - 1))
    extent = data.draw(st.integers(patch, 5000))
    pos = tile_positions(extent, patch, overlap)
    assert pos[0] == 0 and pos[-1] + patch == extent
    assert all(0 <= p <= extent - patch for p in pos)
    # consecutive windows overlap by at least the requested amount
    assert all(b - a <= patch - overlap for a, b in zip(pos, pos[1:]))
    assert pos == sorted(set(pos))


def test_spec_validation():
    with pytest.raises(ConfigError):
        TilingSpec(patch_px=100, overlap_px=100)
    with pytest.raises(ConfigError):
        TilingSpec(output_px=700)
    with pytest.raises(ConfigError):
        TilingSpec.from_dict({"patch": 3})
    assert TilingSpec.from_dict(TilingSpec().to_dict()) == TilingSpec()


def test_inside_annotation_carried_unmodified():
    a = box(100, 100, 200, 160)
    got = clip_annotation(a, AABB(0, 0, 600, 600))
    assert got == a and not got.is_partial
    shifted = clip_annotation(a, AABB(50, 40, 650, 640))
    assert shifted.aabb.as_list() == [50, 60, 150, 120]


def test_clipped_annotation():
    a = box(580, 100, 640, 130)
    got = clip_annotation(a, AABB(0, 0, 600, 600))
    assert got.is_partial and got.provenance["clipped"]
    assert got.aabb.as_list() == pytest.approx([580, 100, 600, 130])
    assert (got.obb.width, got.obb.height) in [pytest.approx((20, 30)), pytest.approx((30, 20))]
    assert clip_annotation(a, AABB(700, 0, 800, 100)) is None


def test_sliver_dropped_and_empty_dropped():
    px = np.zeros((1000, 1000, 3), np.uint8)
    # straddles x=600: 18 px land in the first column of patches, 42 px in the second
    s = AnnotatedSample("s", px, [box(582, 100, 642, 140)])
    patches = tile(s, TilingSpec(600, 200))
    got = {p.id: p.annotations for p in patches}
    assert set(got) == {"s_0_1"}          # patch (0, 0) only had the sliver; lower row empty
    (a,) = got["s_0_1"]
    assert a.aabb.as_list() == pytest.approx([182, 100, 242, 140])
    assert len(tile(s, TilingSpec(600, 200, drop_empty=False))) == 4


@given(st.lists(st.tuples(st.integers(0, 900), st.integers(0, 900), st.integers(5, 90), st.integers(5, 90)),
                max_size=6))
def test_kept_annotations_large_enough_and_inside(raw):
    px = np.zeros((1000, 1000, 3), np.uint8)
    anns = [box(x, y, min(x + w, 1000), min(y + h, 1000)) for x, y, w, h in raw]
    for p in tile(AnnotatedSample("s", px, anns), TilingSpec(600, 200, min_annotation_px=20)):
        assert p.pixels.shape == (600, 600, 3)
        for a in p.annotations:
            assert min(a.aabb.width, a.aabb.height) >= 20
            assert a.aabb.x_min >= 0 and a.aabb.y_min >= 0 and a.aabb.x_max <= 600 and a.aabb.y_max <= 600


def test_resample():
    px = np.arange(600 * 600 * 3, dtype=np.uint32).reshape(600, 600, 3) % 251
    s = AnnotatedSample("p", px.astype(np.uint8), [box(100, 100, 200, 160)], gsd=0.05)
    assert resample(s, 600) is s
    out = resample(s, 300)
    assert out.pixels.shape == (300, 300, 3)
    assert out.gsd == pytest.approx(0.10)
    assert out.annotations[0].aabb.as_list() == pytest.approx([50, 50, 100, 80])
    assert (out.annotations[0].obb.width, out.annotations[0].obb.height) == pytest.approx((50, 30))
    flat = AnnotatedSample("f", np.full((600, 600, 3), 90, np.uint8), [])
    assert (resample(flat, 300).pixels == 90).all()


def test_split_sizes():
    m = dummy_manifest(2946)
    tr, va = split(m, 0.3, seed=0)
    assert len(va) == 884 and len(tr) == 2062
    assert {r.id for r in tr.images}.isdisjoint(r.id for r in va.images)
    assert len(split(m, 0.0)[1]) == 0
    assert all(r.split == "val" for r in va.images)
    assert tr.extra["split_seed"] == 0


def test_split_deterministic_and_order_free():
    m = dummy_manifest(50)
    a = split(m, 0.3, 4)[1]
    shuffled = m.with_images(list(reversed(m.images)))
    b = split(shuffled, 0.3, 4)[1]
    assert [r.id for r in a.images] == [r.id for r in b.images]
    assert [r.id for r in a.images] != [r.id for r in split(m, 0.3, 5)[1].images]


def test_subsample():
    m = dummy_manifest(300)
    assert [r.id for r in subsample(m, 300, 1).images] == [r.id for r in m.images]
    a, b = subsample(m, 8, 3), subsample(m, 8, 3)
    assert [r.id for r in a.images] == [r.id for r in b.images]
    draws = {tuple(r.id for r in subsample(m, 8, s).images) for s in range(100)}
    assert len(draws) == 100
    with pytest.raises(DataError):
        subsample(m, 301, 0)
