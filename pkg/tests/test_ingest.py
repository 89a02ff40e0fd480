import numpy as np
import pytest
from hypothesis import given, strategies as st

from aerialsynth.errors import ConfigError, DataError
from aerialsynth.geometry import Point2, RotatedRect, points_in_rect, same_pose
from aerialsynth.ingest import (POTSDAM_CAR, ClassColorMap, convert_tile, extract_class_regions,
                                regions_to_annotations)

YELLOW = np.array(POTSDAM_CAR, np.uint8)


def blank(h, w):
    return np.full((h, w, 3), 255, np.uint8)


def paint_rect(lab, rect):
    h, w = lab.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w] + 0.5
    lab[points_in_rect(rect, xs, ys)] = YELLOW
    return lab


def test_background_only():
    assert extract_class_regions(blank(50, 50), POTSDAM_CAR) == []


def test_two_blocks_exact_counts():
    lab = blank(60, 60)
    lab[5:15, 5:25] = YELLOW
    lab[30:50, 40:47] = YELLOW
    regs = extract_class_regions(lab, POTSDAM_CAR)
    assert sorted(r.area for r in regs) == [140, 200]


def test_diagonal_touch_is_one_region():
    lab = blank(20, 20)
    lab[2:6, 2:6] = YELLOW
    lab[6:10, 6:10] = YELLOW
    assert [r.area for r in extract_class_regions(lab, POTSDAM_CAR)] == [32]


def test_tolerance():
    lab = blank(10, 10)
    lab[2:4, 2:4] = (250, 248, 6)
    assert extract_class_regions(lab, POTSDAM_CAR, 0) == []
    assert len(extract_class_regions(lab, POTSDAM_CAR, 10)) == 1


def test_axis_aligned_block_recovered():
    lab = blank(60, 80)
    lab[10:30, 20:60] = YELLOW
    (a,) = regions_to_annotations(extract_class_regions(lab, POTSDAM_CAR))
    assert (a.obb.width, a.obb.height, a.obb.angle) == pytest.approx((40, 20, 0), abs=1e-9)
    assert a.obb.center == pytest.approx((40, 20))
    assert a.aabb.as_list() == pytest.approx([20, 10, 60, 30])


def test_rotated_block_recovered():
    truth = RotatedRect(Point2(50.3, 49.6), 40, 20, 30)
    lab = paint_rect(blank(100, 100), truth)
    (a,) = regions_to_annotations(extract_class_regions(lab, POTSDAM_CAR))
    dc, dd, da = same_pose(a.obb, truth)
    assert dc <= 1 and dd <= 1 and da <= 2


def test_min_area_filter():
    lab = blank(40, 40)
    lab[2:4, 2:4] = YELLOW
    lab[10:30, 10:20] = YELLOW
    regs = extract_class_regions(lab, POTSDAM_CAR)
    assert len(regions_to_annotations(regs, min_area_px=5)) == 1
    assert len(regions_to_annotations(regs, min_area_px=0)) == 2


def scattered_blocks(seed, k=8):
    rng = np.random.default_rng(seed)
    lab = blank(200, 200)
    for i in range(k):
        r, c = divmod(i, 4)
        h, w = rng.integers(1, 20, 2)
        lab[10 + 45 * r:10 + 45 * r + h, 10 + 45 * c:10 + 45 * c + w] = YELLOW
    return extract_class_regions(lab, POTSDAM_CAR)


@given(st.integers(0, 1000), st.integers(0, 200), st.integers(0, 200))
def test_min_area_monotone(seed, a, b):
    regs = scattered_blocks(seed)
    lo, hi = sorted((a, b))
    assert len(regions_to_annotations(regs, hi)) <= len(regions_to_annotations(regs, lo))


@given(st.integers(0, 1000), st.sets(st.integers(1, 8)))
def test_exclusions_remove_exactly(seed, excluded):
    regs = scattered_blocks(seed)
    kept = {a.provenance["region_id"] for a in regions_to_annotations(regs, 0, sorted(excluded))}
    assert kept == {r.id for r in regs} - excluded


def test_exclusion_by_point():
    lab = blank(60, 60)
    lab[5:15, 5:25] = YELLOW
    lab[30:50, 40:47] = YELLOW
    regs = extract_class_regions(lab, POTSDAM_CAR)
    anns = regions_to_annotations(regs, 0, [{"x": 43.0, "y": 40.0}])
    assert len(anns) == 1 and anns[0].aabb.as_list() == pytest.approx([5, 5, 25, 15])


def test_convert_tile_shapes_and_empty():
    with pytest.raises(DataError):
        convert_tile(np.zeros((10, 10, 3), np.uint8), blank(10, 12))
    assert convert_tile(np.zeros((30, 30, 3), np.uint8), blank(30, 30)).annotations == []


def test_convert_tile_large_fixture():
    n = 6000
    lab = blank(n, n)
    rng = np.random.default_rng(4)
    k = 0
    for r in range(6):
        for c in range(7):
            cx, cy = 400 + 850 * c + rng.uniform(-50, 50), 400 + 950 * r + rng.uniform(-50, 50)
            rect = RotatedRect(Point2(cx, cy), rng.uniform(60, 100), rng.uniform(30, 45), rng.uniform(0, 180))
            sub = lab[int(cy) - 80:int(cy) + 80, int(cx) - 80:int(cx) + 80]
            paint_rect(sub, rect.shifted(-(int(cx) - 80), -(int(cy) - 80)))
            k += 1
    s = convert_tile(np.zeros((n, n, 3), np.uint8), lab, tile_id="big")
    assert len(s.annotations) == k


def test_class_map_separation():
    with pytest.raises(ConfigError):
        ClassColorMap({(255, 255, 0): 0, (250, 250, 0): 1}, tolerance=5)
    m = ClassColorMap.from_dict({"tolerance": 3, "classes": [{"color": [255, 255, 0], "class_id": 0},
                                                             {"color": [0, 0, 255], "class_id": 1}]})
    assert ClassColorMap.from_dict(m.to_dict()) == m
