"""Augmentation invariants, batching, and PPM/PGM dataset round-trips."""

import numpy as np
import pytest

from pyrseg import pnm
from pyrseg.data import (
    IGNORE_LABEL,
    AugmentConfig,
    SegSample,
    augment,
    augment_all,
    class_palette,
    collate,
    gaussian_blur,
    load_dataset,
    load_sample,
    make_batches,
    pad_and_crop,
    resize_image,
    resize_labels,
    rotate_pair,
    save_sample,
    write_dataset,
)


def _sample(rng, h=48, w=40, k=4):
    img = rng.uniform(size=(3, h, w)).astype(np.float32)
    labels = rng.integers(0, k, size=(h, w)).astype(np.uint8)
    labels[0, 0] = IGNORE_LABEL
    return SegSample(img, labels)


# -- geometric primitives -------------------------------------------------


def test_resize_image_identity_and_arithmetic():
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(3, 10, 8)).astype(np.float32)
    same = resize_image(img, (10, 8))
    assert np.array_equal(same, img)
    assert same is not img  # copy, not alias
    up = resize_image(img, (19, 15))
    assert up.shape == (3, 19, 15)
    # align-corners keeps the four corners exactly
    assert np.allclose(up[:, 0, 0], img[:, 0, 0])
    assert np.allclose(up[:, -1, -1], img[:, -1, -1])
    down = resize_image(img, (5, 4))
    assert down.shape == (3, 5, 4)


def test_resize_labels_nearest_preserves_values():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 4, size=(9, 9)).astype(np.uint8)
    labels[2, 3] = 255
    out = resize_labels(labels, (17, 13))
    assert out.dtype == labels.dtype
    assert set(np.unique(out)) <= set(np.unique(labels))  # no invented classes


def test_rotate_zero_degrees_is_identity():
    rng = np.random.default_rng(2)
    img = rng.uniform(size=(3, 12, 12)).astype(np.float32)
    labels = rng.integers(0, 3, size=(12, 12)).astype(np.uint8)
    rimg, rlab = rotate_pair(img, labels, 0.0)
    assert np.allclose(rimg, img, atol=1e-6)
    assert np.array_equal(rlab, labels)


def test_rotate_labels_use_ignore_outside():
    labels = np.zeros((12, 12), dtype=np.uint8)
    img = np.ones((3, 12, 12), dtype=np.float32)
    _, rlab = rotate_pair(img, labels, 45.0)
    assert (rlab == IGNORE_LABEL).any()  # corners leave the frame
    assert set(np.unique(rlab)) <= {0, IGNORE_LABEL}


def test_blur_preserves_constant_and_mass():
    img = np.full((3, 16, 16), 0.25, dtype=np.float32)
    out = gaussian_blur(img, 0.8)
    assert np.allclose(out, 0.25, atol=1e-6)
    rng = np.random.default_rng(3)
    noisy = rng.uniform(size=(3, 32, 32)).astype(np.float32)
    blurred = gaussian_blur(noisy, 1.0)
    assert blurred.std() < noisy.std()  # smoothing reduces variance


def test_pad_and_crop_pads_small_inputs_with_ignore():
    cfg = AugmentConfig(crop_size=16)
    rng = np.random.default_rng(4)
    img = np.zeros((3, 8, 8), dtype=np.float32)
    labels = np.ones((8, 8), dtype=np.uint8)
    cimg, clab = pad_and_crop(img, labels, cfg, rng)
    assert cimg.shape == (3, 16, 16)
    assert clab.shape == (16, 16)
    assert (clab[8:, :] == IGNORE_LABEL).all()  # padded region carries ignore
    assert np.allclose(cimg[:, 8:, :], 0.5)  # image pad value


def test_crop_is_a_window_of_the_source():
    cfg = AugmentConfig(crop_size=8)
    rng = np.random.default_rng(5)
    img = np.arange(3 * 20 * 20, dtype=np.float32).reshape(3, 20, 20)
    labels = np.arange(400, dtype=np.float64).reshape(20, 20).astype(np.uint8)
    cimg, clab = pad_and_crop(img, labels, cfg, rng)
    # every cropped value exists in the source at a consistent offset
    first = cimg[0, 0, 0]
    idx = np.argwhere(img[0] == first)
    y0, x0 = idx[0]
    assert np.array_equal(cimg, img[:, y0 : y0 + 8, x0 : x0 + 8])


# -- full augment ----------------------------------------------------------


def test_augment_output_contract():
    cfg = AugmentConfig(crop_size=32)
    rng = np.random.default_rng(6)
    data_rng = np.random.default_rng(7)
    for _ in range(20):
        s = _sample(data_rng)
        out = augment(s, cfg, rng)
        assert out.image.shape == (3, 32, 32)
        assert out.labels.shape == (32, 32)
        assert out.image.dtype == np.float32
        assert out.labels.dtype == np.uint8
        assert out.image.min() >= 0.0 and out.image.max() <= 1.0
        valid = out.labels != IGNORE_LABEL
        assert valid.size == 0 or set(np.unique(out.labels[valid])) <= {0, 1, 2, 3}


def test_augment_deterministic_per_generator():
    cfg = AugmentConfig(crop_size=32)
    s = _sample(np.random.default_rng(8))
    a = augment(s, cfg, np.random.default_rng(99))
    b = augment(s, cfg, np.random.default_rng(99))
    assert np.array_equal(a.image, b.image)
    assert np.array_equal(a.labels, b.labels)


def test_mirror_only_config_is_involution():
    cfg = AugmentConfig(mirror_prob=1.0, resize_range=(1.0, 1.0), rotation_deg=0.0,
                        blur_prob=0.0, crop_size=48)
    s = SegSample(
        np.random.default_rng(9).uniform(size=(3, 48, 48)).astype(np.float32),
        np.random.default_rng(10).integers(0, 3, size=(48, 48)).astype(np.uint8),
    )
    once = augment(s, cfg, np.random.default_rng(0))
    twice = augment(once, cfg, np.random.default_rng(0))
    assert np.array_equal(twice.image, s.image)
    assert np.array_equal(twice.labels, s.labels)


def test_augment_all_order_preserving_and_worker_independent():
    cfg = AugmentConfig(crop_size=32)
    data_rng = np.random.default_rng(11)
    samples = [_sample(data_rng) for _ in range(6)]
    rngs1 = [np.random.default_rng([5, i]) for i in range(6)]
    rngs2 = [np.random.default_rng([5, i]) for i in range(6)]
    serial = augment_all(samples, cfg, rngs1, workers=1)
    threaded = augment_all(samples, cfg, rngs2, workers=3)
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.labels, b.labels)


# -- batching ---------------------------------------------------------------


def test_make_batches_10_over_4():
    rng = np.random.default_rng(12)
    data_rng = np.random.default_rng(13)
    samples = [_sample(data_rng, h=16, w=16) for _ in range(10)]
    sizes = [b.images.shape[0] for b in make_batches(samples, 4, rng)]
    assert sizes == [4, 4, 2]


def test_make_batches_shuffles_and_covers_everything():
    # Tag each sample by a unique constant image so we can track coverage.
    samples = [
        SegSample(np.full((3, 8, 8), i, dtype=np.float32),
                  np.zeros((8, 8), dtype=np.uint8))
        for i in range(10)
    ]
    seen1 = [int(b.images[j, 0, 0, 0]) for b in make_batches(samples, 3, np.random.default_rng(1))
             for j in range(b.images.shape[0])]
    seen2 = [int(b.images[j, 0, 0, 0]) for b in make_batches(samples, 3, np.random.default_rng(2))
             for j in range(b.images.shape[0])]
    assert sorted(seen1) == list(range(10))
    assert sorted(seen2) == list(range(10))
    assert seen1 != seen2  # different generators, different order


def test_make_batches_validation():
    with pytest.raises(ValueError, match="empty"):
        list(make_batches([], 4, np.random.default_rng(0)))
    s = [_sample(np.random.default_rng(0), h=8, w=8)]
    with pytest.raises(ValueError, match="batch_size"):
        list(make_batches(s, 0, np.random.default_rng(0)))


def test_collate_types_and_mismatch():
    data_rng = np.random.default_rng(14)
    batch = collate([_sample(data_rng, h=16, w=16) for _ in range(3)])
    assert batch.images.shape == (3, 3, 16, 16)
    assert batch.images.dtype == np.float32
    assert batch.labels.shape == (3, 16, 16)
    assert batch.labels.dtype == np.int64
    with pytest.raises(ValueError, match="identical sizes"):
        collate([_sample(data_rng, h=16, w=16), _sample(data_rng, h=8, w=8)])


# -- sample validation -------------------------------------------------------


def test_sample_validate():
    good = _sample(np.random.default_rng(15))
    good.validate(4)
    with pytest.raises(ValueError, match=r"\(3, H, W\)"):
        SegSample(np.zeros((1, 4, 4), np.float32), np.zeros((4, 4), np.uint8)).validate(2)
    with pytest.raises(ValueError, match="dim mismatch"):
        SegSample(np.zeros((3, 4, 4), np.float32), np.zeros((5, 4), np.uint8)).validate(2)
    bad = SegSample(np.zeros((3, 4, 4), np.float32), np.full((4, 4), 7, np.uint8))
    with pytest.raises(ValueError, match="label 7 out of range"):
        bad.validate(4)


# -- file io ------------------------------------------------------------------


def test_ppm_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(16)
    arr = rng.integers(0, 256, size=(9, 7, 3)).astype(np.uint8)
    pnm.write_ppm(tmp_path / "x.ppm", arr)
    assert np.array_equal(pnm.read_ppm(tmp_path / "x.ppm"), arr)
    gray = rng.integers(0, 256, size=(9, 7)).astype(np.uint8)
    pnm.write_pgm(tmp_path / "x.pgm", gray)
    assert np.array_equal(pnm.read_pgm(tmp_path / "x.pgm"), gray)


def test_sample_round_trip_quantizes_to_8bit(tmp_path):
    rng = np.random.default_rng(17)
    s = _sample(rng, h=12, w=10)
    save_sample(s, tmp_path / "i.ppm", tmp_path / "l.pgm")
    back = load_sample(tmp_path / "i.ppm", tmp_path / "l.pgm", 4)
    assert np.array_equal(back.labels, s.labels)
    assert np.abs(back.image - s.image).max() <= 0.5 / 255.0 + 1e-6


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(18)
    samples = [_sample(rng, h=16, w=16) for _ in range(3)]
    write_dataset(tmp_path / "ds", samples)
    assert (tmp_path / "ds" / "manifest.txt").read_text().splitlines() == [
        "0000", "0001", "0002"
    ]
    back = load_dataset(tmp_path / "ds", 4)
    assert len(back) == 3
    for a, b in zip(samples, back):
        assert np.array_equal(a.labels, b.labels)


def test_load_dataset_requires_manifest(tmp_path):
    with pytest.raises(FileNotFoundError, match="manifest"):
        load_dataset(tmp_path, 4)


def test_class_palette_shape_and_distinct():
    pal = class_palette(6)
    assert pal.shape == (6, 3)
    assert pal.dtype == np.uint8
    assert len({tuple(row) for row in pal}) == 6
