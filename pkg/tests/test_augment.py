"""Grid partitioning and salt-and-pepper corruption statistics."""

import numpy as np
import pytest

from gabordefect.augment import (
    GridSpec,
    NoiseSpec,
    make_training_pair,
    partition_grid,
    sp_mask,
)
from gabordefect.errors import ShapeError
from gabordefect.imgcore import Image


def gray(rng, h=16, w=16):
    return Image(rng.random((1, h, w)))


# ------------------------------------------------------------------- configs

def test_grid_spec_validation():
    GridSpec(1)
    GridSpec(8)
    with pytest.raises(ValueError):
        GridSpec(0)
    with pytest.raises(ValueError):
        GridSpec(-3)


def test_noise_spec_validation():
    NoiseSpec(0.0, 0.0, 0.0)
    NoiseSpec(0.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        NoiseSpec(-0.1, 0.2)
    with pytest.raises(ValueError):
        NoiseSpec(0.2, 1.3)
    with pytest.raises(ValueError):
        NoiseSpec(0.6, 0.6)  # sum over 1
    with pytest.raises(ValueError):
        NoiseSpec(0.1, 0.1, 1.5)


# ----------------------------------------------------------------- partition

def test_partition_shapes_and_order():
    img = Image(np.zeros((1, 4, 6)))
    rects = partition_grid(img, GridSpec(2))
    assert rects == [(0, 0, 2, 3), (0, 3, 2, 6), (2, 0, 4, 3), (2, 3, 4, 6)]


def test_partition_k1_is_whole_image():
    img = Image(np.zeros((3, 5, 7)))
    assert partition_grid(img, GridSpec(1)) == [(0, 0, 5, 7)]


def test_partition_tiles_exactly():
    img = Image(np.zeros((1, 12, 8)))
    cover = np.zeros((12, 8), dtype=int)
    for y0, x0, y1, x1 in partition_grid(img, GridSpec(4)):
        cover[y0:y1, x0:x1] += 1
    assert np.all(cover == 1)


def test_partition_requires_divisibility():
    img = Image(np.zeros((1, 10, 10)))
    with pytest.raises(ShapeError):
        partition_grid(img, GridSpec(3))


# ------------------------------------------------------------------- masking

def test_zero_noise_is_identity():
    rng = np.random.default_rng(31)
    img = gray(rng)
    out, mask = sp_mask(img, GridSpec(4), NoiseSpec(0.0, 0.0, 1.0), seed=0)
    assert np.array_equal(out.data, img.data)
    assert not mask.any()


def test_zero_patch_probability_is_identity():
    rng = np.random.default_rng(32)
    img = gray(rng)
    out, mask = sp_mask(img, GridSpec(4), NoiseSpec(0.5, 0.5, 0.0), seed=0)
    assert np.array_equal(out.data, img.data)
    assert not mask.any()


def test_full_salt_saturates():
    rng = np.random.default_rng(33)
    img = gray(rng)
    out, mask = sp_mask(img, GridSpec(2), NoiseSpec(1.0, 0.0, 1.0), seed=0)
    assert np.all(out.data == 1.0)
    assert mask.all()


def test_full_pepper_saturates():
    rng = np.random.default_rng(34)
    img = gray(rng)
    out, mask = sp_mask(img, GridSpec(2), NoiseSpec(0.0, 1.0, 1.0), seed=0)
    assert np.all(out.data == 0.0)
    assert mask.all()


def test_masked_pixels_are_extremes_and_rest_untouched():
    rng = np.random.default_rng(35)
    img = Image(rng.uniform(0.1, 0.9, size=(3, 16, 16)))  # interior values only
    out, mask = sp_mask(img, GridSpec(4), NoiseSpec(0.15, 0.15, 0.7), seed=9)
    assert mask.any()
    changed = out.data[:, mask]
    assert np.all((changed == 0.0) | (changed == 1.0))
    assert np.array_equal(out.data[:, ~mask], img.data[:, ~mask])


def test_salt_hits_all_channels_together():
    rng = np.random.default_rng(36)
    img = Image(rng.uniform(0.2, 0.8, size=(3, 8, 8)))
    out, mask = sp_mask(img, GridSpec(1), NoiseSpec(0.5, 0.5, 1.0), seed=3)
    for c in range(1, 3):
        assert np.array_equal(out.data[0][mask] == 1.0, out.data[c][mask] == 1.0)
        assert np.array_equal(out.data[0][mask] == 0.0, out.data[c][mask] == 0.0)


def test_determinism_and_seed_sensitivity():
    rng = np.random.default_rng(37)
    img = gray(rng)
    spec = NoiseSpec(0.1, 0.1, 0.5)
    a1, m1 = sp_mask(img, GridSpec(4), spec, seed=42)
    a2, m2 = sp_mask(img, GridSpec(4), spec, seed=42)
    b, mb = sp_mask(img, GridSpec(4), spec, seed=43)
    assert np.array_equal(a1.data, a2.data) and np.array_equal(m1, m2)
    assert not np.array_equal(a1.data, b.data)


def test_list_seeds_accepted():
    rng = np.random.default_rng(38)
    img = gray(rng)
    a, _ = sp_mask(img, GridSpec(2), NoiseSpec(0.2, 0.2, 1.0), seed=[7, 0, 3])
    b, _ = sp_mask(img, GridSpec(2), NoiseSpec(0.2, 0.2, 1.0), seed=[7, 0, 3])
    c, _ = sp_mask(img, GridSpec(2), NoiseSpec(0.2, 0.2, 1.0), seed=[7, 1, 3])
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


# ---------------------------------------------------------------- statistics

def test_salt_pepper_rates_within_3_sigma():
    # whole image as one always-selected patch: pixel fates are iid
    p_s, p_p = 0.1, 0.2
    n = 64 * 64
    img = Image(np.full((1, 64, 64), 0.5))
    salt_frac = []
    pepper_frac = []
    for seed in range(10):
        out, _ = sp_mask(img, GridSpec(1), NoiseSpec(p_s, p_p, 1.0), seed=seed)
        salt_frac.append(np.mean(out.data == 1.0))
        pepper_frac.append(np.mean(out.data == 0.0))
    for frac, p in ((salt_frac, p_s), (pepper_frac, p_p)):
        sigma = (p * (1 - p) / n) ** 0.5
        assert abs(np.mean(frac) - p) < 3 * sigma / (10 ** 0.5), (np.mean(frac), p)


def test_patch_selection_rate_within_3_sigma():
    # with heavy pixel noise, a selected patch almost surely shows it,
    # so counting noisy patches estimates p_patch
    img = Image(np.full((1, 64, 64), 0.5))
    grid = GridSpec(8)
    p_patch = 0.5
    counts = []
    for seed in range(20):
        _, mask = sp_mask(img, grid, NoiseSpec(0.3, 0.3, p_patch), seed=seed)
        noisy = sum(
            mask[y0:y1, x0:x1].any()
            for y0, x0, y1, x1 in
            [(gy * 8, gx * 8, gy * 8 + 8, gx * 8 + 8)
             for gy in range(8) for gx in range(8)]
        )
        counts.append(noisy / 64.0)
    sigma = (p_patch * (1 - p_patch) / 64.0) ** 0.5
    assert abs(np.mean(counts) - p_patch) < 3 * sigma / (20 ** 0.5)


def test_unselected_patches_fully_clean():
    rng = np.random.default_rng(39)
    img = Image(rng.uniform(0.3, 0.7, size=(1, 32, 32)))
    out, mask = sp_mask(img, GridSpec(4), NoiseSpec(0.9, 0.1, 0.4), seed=11)
    dirty = ~np.isclose(out.data[0], img.data[0])
    for y0, x0, y1, x1 in partition_grid(img, GridSpec(4)):
        patch_dirty = dirty[y0:y1, x0:x1].any()
        patch_masked = mask[y0:y1, x0:x1].any()
        if not patch_masked:
            assert not patch_dirty


# ------------------------------------------------------------ training pairs

def test_training_pair_clean_target():
    rng = np.random.default_rng(40)
    img = gray(rng)
    pair = make_training_pair(img, GridSpec(4), NoiseSpec(0.2, 0.2, 1.0), seed=5)
    assert pair.target is img
    assert pair.mask_map.shape == (16, 16)
    assert pair.mask_map.dtype == bool
    assert pair.mask_map.any()
    assert not np.array_equal(pair.input.data, pair.target.data)
    # reproducible from the same seed
    again = make_training_pair(img, GridSpec(4), NoiseSpec(0.2, 0.2, 1.0), seed=5)
    assert np.array_equal(pair.input.data, again.input.data)


def test_training_pair_masked_target_mode():
    rng = np.random.default_rng(41)
    img = gray(rng)
    pair = make_training_pair(
        img, GridSpec(4), NoiseSpec(0.2, 0.2, 1.0), seed=5, masked_target=True
    )
    assert pair.target is pair.input
    assert np.array_equal(pair.input.data, pair.target.data)
