import numpy as np
import pytest

from bgattack import (CapacityError, DimensionError, PhysicalAdaptation,
                      apply_pa, compose_adversarial, generate_scene,
                      make_sprite)
from bgattack.scene import IDENTITY_PA, Sprite


def test_full_coverage_sprite_mask_area():
    # an 8x8 full-square sprite marks exactly 64 mask pixels
    sp = make_sprite("checker", 8, 0)
    scn = generate_scene(42, [sp], (64, 64, 3), 0.5)
    assert scn.object_mask.sum() == 64.0
    assert len(scn.ground_truth) == 1
    g = scn.ground_truth[0]
    assert (g.x2 - g.x1, g.y2 - g.y1) == (8, 8)


def test_zero_sprites():
    scn = generate_scene(0, [], (32, 32, 3), 0.25)
    assert scn.object_mask.sum() == 0.0
    assert scn.ground_truth == []
    assert np.all(scn.image == 0.25)


def test_determinism():
    sp = make_sprite("disk", 10, 1)
    a = generate_scene(7, [sp, sp], (48, 48, 3), 0.5)
    b = generate_scene(7, [sp, sp], (48, 48, 3), 0.5)
    assert np.array_equal(a.image, b.image)
    assert np.array_equal(a.object_mask, b.object_mask)
    assert a.ground_truth == b.ground_truth


def test_disk_coverage_is_tight():
    sp = make_sprite("disk", 16, 0)
    scn = generate_scene(3, [sp], (64, 64, 3), 0.5)
    assert scn.object_mask.sum() == sp.coverage.sum()
    g = scn.ground_truth[0]
    sub = scn.object_mask[g.y1:g.y2, g.x1:g.x2, 0]
    assert sub[0].any() and sub[-1].any() and sub[:, 0].any() and sub[:, -1].any()


def test_mask_matches_placements_exactly():
    sp = make_sprite("cross", 9, 2)
    scn = generate_scene(11, [sp], (40, 40, 3), 0.5)
    g = scn.ground_truth[0]
    inside = scn.object_mask[g.y1:g.y2, g.x1:g.x2, 0]
    assert inside.sum() == scn.object_mask.sum()


def test_nonoverlap_and_capacity_error():
    sp = make_sprite("checker", 16, 0)
    with pytest.raises(CapacityError):
        generate_scene(1, [sp] * 20, (34, 34, 3), 0.5)
    scn = generate_scene(1, [sp, sp], (64, 64, 3), 0.5)
    a, b = scn.ground_truth
    disjoint_x = a.x2 <= b.x1 or b.x2 <= a.x1
    disjoint_y = a.y2 <= b.y1 or b.y2 <= a.y1
    assert disjoint_x or disjoint_y


def test_sprite_must_fit():
    sp = make_sprite("checker", 16, 0)
    with pytest.raises(DimensionError):
        generate_scene(0, [sp], (16, 64, 3), 0.5)


def test_aligned_placement():
    sp = make_sprite("disk", 16, 0)
    for seed in range(10):
        scn = generate_scene(seed, [sp], (64, 64, 3), 0.5,
                             place_align=16, place_offset=0)
        g = scn.ground_truth[0]
        # the template rectangle sits on the 16-grid; coverage is inset
        rows = np.flatnonzero(sp.coverage.any(axis=1))
        assert (g.y1 - rows[0]) % 16 == 0


def test_compose_partition_identity():
    sp = make_sprite("disk", 12, 0)
    scn = generate_scene(5, [sp], (32, 32, 3), 0.5)
    out = compose_adversarial(scn, np.asarray(scn.image))
    assert np.array_equal(out, scn.image)


def scene_with_mask(image, mask):
    from bgattack.scene import Scene
    return Scene(image=image, object_mask=mask, ground_truth=[])


def test_compose_mask_extremes():
    rng = np.random.default_rng(6)
    image = rng.random((16, 16, 3))
    p = rng.random((16, 16, 3))
    all_obj = scene_with_mask(image, np.ones((16, 16, 1)))
    assert np.array_equal(compose_adversarial(all_obj, p), image)
    no_obj = scene_with_mask(image, np.zeros((16, 16, 1)))
    assert np.array_equal(compose_adversarial(no_obj, p), p)


def test_compose_shape_mismatch():
    scn = generate_scene(0, [], (16, 16, 3), 0.5)
    with pytest.raises(DimensionError):
        compose_adversarial(scn, np.zeros((16, 17, 3)))


def test_compose_stays_in_unit_box():
    rng = np.random.default_rng(7)
    sp = make_sprite("disk", 8, 0)
    scn = generate_scene(8, [sp], (24, 24, 3), 0.3)
    out = compose_adversarial(scn, rng.random((24, 24, 3)))
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_pa_identity():
    rng = np.random.default_rng(8)
    img = rng.uniform(0.01, 0.99, (12, 12, 3))
    out, jac = apply_pa(IDENTITY_PA, img, 3)
    assert np.array_equal(out, img)
    assert jac.contrast == 1.0
    assert jac.active.all()
    up = rng.random(img.shape)
    assert np.array_equal(jac.backward(up), up)


def test_pa_pure_contrast():
    pa = PhysicalAdaptation(contrast_range=(2.0, 2.0),
                            brightness_range=(0.0, 0.0), noise_sigma=0.0)
    img = np.full((8, 8, 3), 0.25)
    out, jac = apply_pa(pa, img, 0)
    assert np.allclose(out, 0.5)
    assert jac.contrast == 2.0


def test_pa_determinism_and_iteration_keying():
    pa = PhysicalAdaptation(rng_seed=5)
    img = np.random.default_rng(9).random((10, 10, 3))
    a1, _ = apply_pa(pa, img, 7)
    a2, _ = apply_pa(pa, img, 7)
    b, _ = apply_pa(pa, img, 8)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)


def test_pa_clamp_zeroes_saturated_gradient():
    pa = PhysicalAdaptation(contrast_range=(1.0, 1.0),
                            brightness_range=(0.5, 0.5), noise_sigma=0.0)
    img = np.array([[[0.2, 0.7, 0.9]]])
    out, jac = apply_pa(pa, img, 0)
    assert np.allclose(out, [[[0.7, 1.0, 1.0]]])
    assert jac.active.tolist() == [[[True, False, False]]]
    g = jac.backward(np.ones_like(img))
    assert g.tolist() == [[[1.0, 0.0, 0.0]]]


def test_pa_jacobian_matches_finite_differences():
    pa = PhysicalAdaptation(contrast_range=(1.1, 1.1),
                            brightness_range=(-0.05, -0.05), noise_sigma=0.0)
    rng = np.random.default_rng(10)
    img = rng.uniform(0.2, 0.7, (6, 6, 3))
    _, jac = apply_pa(pa, img, 2)
    h = 1e-6
    for idx in [(0, 0, 0), (3, 2, 1), (5, 5, 2)]:
        up = np.zeros_like(img)
        up[idx] = 1.0
        ip, im = img.copy(), img.copy()
        ip[idx] += h
        im[idx] -= h
        fd = (apply_pa(pa, ip, 2)[0][idx] - apply_pa(pa, im, 2)[0][idx]) / (2 * h)
        assert abs(jac.backward(up)[idx] - fd) <= 1e-6 * max(1.0, abs(fd))


def test_sprite_validation():
    with pytest.raises(Exception):
        Sprite(template=np.full((4, 4, 3), 1.5), class_id=0)
    with pytest.raises(Exception):
        PhysicalAdaptation(contrast_range=(0.0, 1.0))
