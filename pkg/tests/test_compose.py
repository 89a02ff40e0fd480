import hashlib
import math
from itertools import combinations

import numpy as np
import pytest
from scipy import ndimage

from aerialsynth.compose import (BackgroundPool, VehicleCropPool, compose_dataset, compose_image, crop_obb,
                                 harvest_backgrounds, harvest_vehicles)
from aerialsynth.errors import ConfigError, EmptyPoolError
from aerialsynth.geometry import Point2, RotatedRect, points_in_rect
from aerialsynth.manifest import Annotation, DatasetManifest, ImageRecord
from aerialsynth.raster import bilinear_sample, write_png
from aerialsynth.scene import GeneratorConfig, generate_dataset
from oracles import inside, overlap_by_sampling


def smooth_texture(seed, n=300):
    noise = np.random.default_rng(seed).normal(size=(n, n, 3))
    f = ndimage.gaussian_filter(noise, (6, 6, 0))
    f = (f - f.min()) / np.ptp(f)
    return (40 + 170 * f).astype(np.uint8)


@pytest.fixture(scope="module")
def real_manifest(tmp_path_factory):
    """Eight 300x300 patches; the first five hold one 45x20 vehicle each."""
    root = tmp_path_factory.mktemp("real")
    recs = []
    for i in range(8):
        px = smooth_texture(i)
        anns = []
        if i < 5:
            obb = RotatedRect(Point2(150 + i, 140), 45, 20, 20 * i)
            ys, xs = np.mgrid[0:300, 0:300] + 0.5
            px[points_in_rect(obb, xs, ys)] = (200, 30 + 20 * i, 30)
            anns = [Annotation.from_obb(obb)]
        write_png(root / f"p{i}.png", px)
        recs.append(ImageRecord(f"p{i}", f"p{i}.png", 300, 300, 0.1, None, anns))
    m = DatasetManifest({}, recs, {}, root)
    m.save(root / "manifest.json")
    return DatasetManifest.load(root / "manifest.json")


def test_pools(real_manifest):
    bg = harvest_backgrounds(real_manifest)
    assert bg.image_ids == ["p5", "p6", "p7"]
    veh = harvest_vehicles(real_manifest)
    assert len(veh) == 5
    assert all(c.pixels.shape == (20, 45, 4) for c in veh.crops)
    assert all((c.pixels[..., 3] == 255).all() for c in veh.crops)


def test_pool_errors(real_manifest, tmp_path):
    full = real_manifest.with_images([r for r in real_manifest.images if r.annotations])
    with pytest.raises(EmptyPoolError):
        harvest_backgrounds(full)
    assert len(harvest_vehicles(DatasetManifest({}, [], {}, tmp_path))) == 0


def test_pool_index_roundtrip(real_manifest, tmp_path):
    path = real_manifest.root / "manifest.json"
    bg = harvest_backgrounds(real_manifest, path)
    bg.save(tmp_path / "bg.json")
    assert BackgroundPool.load_index(tmp_path / "bg.json") == bg
    veh = harvest_vehicles(real_manifest, path)
    veh.save(tmp_path / "veh.json")
    back = VehicleCropPool.load_index(tmp_path / "veh.json")
    assert [(c.image_id, c.annotation_index) for c in back.crops] == [(c.image_id, 0) for c in veh.crops]
    with pytest.raises(ConfigError):
        VehicleCropPool.load_index(tmp_path / "bg.json")


def test_crop_of_painted_block_is_uniform(real_manifest):
    veh = harvest_vehicles(real_manifest)
    c = veh.crops[2]
    inner = c.pixels[2:-2, 2:-2, :3].reshape(-1, 3)
    assert (np.abs(inner.astype(int) - (200, 70, 30)).max()) <= 1


@pytest.mark.parametrize("angle", [0, 17, 45, 130])
def test_crop_pastes_back(angle):
    img = smooth_texture(42, 200)
    obb = RotatedRect(Point2(100.3, 99.7), 45, 20, angle)
    crop = crop_obb(img, obb).astype(float)
    ys, xs = np.mgrid[0:200, 0:200] + 0.5
    sel = points_in_rect(obb, xs, ys, tol=-1.0)
    t = math.radians(angle)
    dx, dy = xs[sel] - obb.center.x, ys[sel] - obb.center.y
    u = dx * math.cos(t) + dy * math.sin(t)
    v = -dx * math.sin(t) + dy * math.cos(t)
    back = bilinear_sample(crop[..., :3], u + 45 / 2, v + 20 / 2, clamp=True)
    assert np.abs(back - img[sel]).mean() < 2


def test_artificial_artificial_matches_generate(tmp_path):
    cfg = GeneratorConfig(canvas_px=160, image_count=3, seed=9)
    generate_dataset(cfg, tmp_path / "g")
    compose_dataset("artificial", "artificial", cfg, tmp_path / "c")
    g, c = (sorted((tmp_path / d).iterdir()) for d in ("g", "c"))
    assert [p.name for p in g] == [p.name for p in c] and len(g) == 7
    for a, b in zip(g, c):
        assert hashlib.sha256(a.read_bytes()).digest() == hashlib.sha256(b.read_bytes()).digest(), a.name


def as_tuple(r):
    return (r.center.x, r.center.y, r.width, r.height, r.angle)


@pytest.mark.parametrize("vsrc,bsrc", [("artificial", "artificial"), ("artificial", "real"),
                                       ("real", "artificial"), ("real", "real")])
def test_four_variants_obey_scene_rules(real_manifest, vsrc, bsrc):
    cfg = GeneratorConfig(canvas_px=300, image_count=4, seed=1, vehicles_per_image=6, partial_per_image=2)
    veh, bg = harvest_vehicles(real_manifest), harvest_backgrounds(real_manifest)
    for i in range(4):
        img, bg_id = compose_image(cfg, i, vsrc, bsrc, veh, bg)
        assert img.pixels.shape == (300, 300, 3)
        assert (bg_id is not None) == (bsrc == "real")
        assert img.annotations
        for a in img.annotations:
            assert a.aabb.x_min >= -1e-9 and a.aabb.y_min >= -1e-9
            assert a.aabb.x_max <= 300 + 1e-9 and a.aabb.y_max <= 300 + 1e-9
            if vsrc == "real":
                assert a.provenance["image_id"] in {f"p{k}" for k in range(5)}
                assert not a.is_partial
        for a, b in combinations(img.annotations, 2):
            assert not overlap_by_sampling(as_tuple(a.obb), as_tuple(b.obb))


def test_real_background_preserved_away_from_vehicles(real_manifest):
    cfg = GeneratorConfig(canvas_px=300, seed=2)
    bg = harvest_backgrounds(real_manifest)
    img, bg_id = compose_image(cfg, 0, "artificial", "real", None, bg)
    src = bg.load(bg.image_ids.index(bg_id))
    ys, xs = np.mgrid[0:300, 0:300] + 0.5
    pts = np.stack([xs.ravel(), ys.ravel()], 1)
    near = np.zeros(300 * 300, bool)
    for a in img.annotations:
        near |= inside(as_tuple(a.obb), pts, tol=2.0)
    far = ~near.reshape(300, 300)
    assert np.array_equal(img.pixels[far], src[far])


def test_compose_dataset_records_provenance(real_manifest, tmp_path):
    path = real_manifest.root / "manifest.json"
    cfg = GeneratorConfig(canvas_px=300, image_count=2, seed=3)
    m = compose_dataset("real", "real", cfg, tmp_path, harvest_vehicles(real_manifest, path),
                        harvest_backgrounds(real_manifest, path))
    assert m.extra["kind"] == "composed"
    assert m.extra["vehicle_source"] == "real" and m.extra["background_source"] == "real"
    assert m.extra["vehicle_pool"] == str(path.resolve())
    assert all(r.extra["background_image_id"] in {"p5", "p6", "p7"} for r in m.images)


def test_compose_dataset_errors(real_manifest, tmp_path):
    cfg = GeneratorConfig(image_count=1)
    with pytest.raises(ConfigError):
        compose_dataset("synthetic", "real", cfg, tmp_path)
    with pytest.raises(EmptyPoolError):
        compose_dataset("real", "artificial", cfg, tmp_path, vehicles=None)
    with pytest.raises(EmptyPoolError):
        compose_dataset("artificial", "real", cfg, tmp_path, backgrounds=None)
