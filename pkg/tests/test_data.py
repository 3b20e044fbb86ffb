from __future__ import annotations

import csv

import numpy as np
import pytest

from src.data.dataset import Dataset, iterate_batches, one_hot
from src.data.storage import (
    MANIFEST,
    dataset_split,
    datasets_from_config,
    disjoint_synthetic,
    load_dataset,
    load_splits,
    save_dataset,
)
from src.data.synthetic import class_cues, generate_splits, generate_synthetic, split_seeds
from src.data.transforms import (
    CORRUPTION_GRID,
    DEFORMATION_GRID,
    corrupt,
    deform,
    standard_augment,
)
from src.errors import ConfigError, DatasetError
from src.models.schemas import CorruptionSpec, DataConfig, DeformSpec


class TestSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(classes=4, per_class=3, image_size=8, seed=7)
        b = generate_synthetic(classes=4, per_class=3, image_size=8, seed=7)
        assert a.content_hash() == b.content_hash()

    def test_seed_changes_content(self):
        a = generate_synthetic(classes=4, per_class=3, image_size=8, seed=7)
        b = generate_synthetic(classes=4, per_class=3, image_size=8, seed=8)
        assert a.content_hash() != b.content_hash()

    def test_balanced(self, small_dataset):
        np.testing.assert_array_equal(small_dataset.class_counts(), [6, 6, 6, 6])
        assert small_dataset.image_shape == (3, 8, 8)

    def test_pixels_in_unit_range_and_quantized(self, small_dataset):
        images = small_dataset.images
        assert images.min() >= 0.0 and images.max() <= 1.0
        np.testing.assert_allclose(images * 255.0, np.round(images * 255.0), atol=1e-3)

    def test_cues_cover_classes(self):
        cues = {class_cues(c) for c in range(8)}
        assert len(cues) == 8

    @pytest.mark.parametrize("classes, size, key", [(1, 8, "data.classes"), (4, 4, "data.image_size")])
    def test_invalid_arguments(self, classes, size, key):
        with pytest.raises(ConfigError) as err:
            generate_synthetic(classes=classes, per_class=2, image_size=size, seed=0)
        assert err.value.key == key

    def test_split_seeds_are_distinct(self):
        seeds = split_seeds(0)
        assert set(seeds) == {"train", "val", "test"}
        assert len(set(seeds.values())) == 3
        assert split_seeds(0) == seeds

    def test_generate_splits_sizes(self):
        splits = generate_splits(3, 4, 2, 3, 8, seed=1)
        assert {name: len(d) for name, d in splits.items()} == {"train": 12, "val": 6, "test": 9}

    def test_dataset_split_matches_full_generation(self):
        config = DataConfig(classes=3, per_class_train=4, per_class_val=2, per_class_test=3, image_size=8)
        full = datasets_from_config(config, seed=5)
        assert dataset_split(config, 5, "test").content_hash() == full["test"].content_hash()

    def test_disjoint_set_is_new_content(self):
        config = DataConfig(classes=3, per_class_train=4, per_class_val=2, per_class_test=3, image_size=8)
        ood = disjoint_synthetic(config, seed=5)
        assert ood.split == "ood"
        assert len(ood) == 9
        assert ood.content_hash() != dataset_split(config, 5, "test").content_hash()


class TestDataset:
    def test_rejects_out_of_range_labels(self):
        with pytest.raises(DatasetError):
            Dataset(np.zeros((2, 3, 4, 4)), np.array([0, 5]), num_classes=3, split="test")

    def test_rejects_pixels_outside_unit_range(self):
        with pytest.raises(DatasetError):
            Dataset(np.full((1, 3, 4, 4), 1.5), np.array([0]), num_classes=2, split="test")

    def test_train_split_needs_every_class(self):
        with pytest.raises(DatasetError):
            Dataset(np.zeros((2, 3, 4, 4)), np.array([0, 0]), num_classes=2, split="train")

    def test_one_hot(self):
        np.testing.assert_array_equal(one_hot(np.array([2, 0]), 3), [[0, 0, 1], [1, 0, 0]])

    def test_subset(self, small_dataset):
        sub = small_dataset.subset([0, 6, 12], split="test")
        np.testing.assert_array_equal(sub.labels, [0, 1, 2])
        assert sub.split == "test"


class TestIterateBatches:
    def test_sequential_covers_everything(self, small_dataset):
        batches = list(iterate_batches(small_dataset, 10))
        assert [len(labels) for _, labels in batches] == [10, 10, 4]
        np.testing.assert_array_equal(np.concatenate([labels for _, labels in batches]), small_dataset.labels)

    def test_shuffle_is_seeded(self, small_dataset):
        first = [labels for _, labels in iterate_batches(small_dataset, 5, np.random.default_rng(3))]
        second = [labels for _, labels in iterate_batches(small_dataset, 5, np.random.default_rng(3))]
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)

    def test_small_tail_dropped(self, small_dataset):
        sizes = [len(labels) for _, labels in iterate_batches(small_dataset, 10, min_size=5)]
        assert sizes == [10, 10]

    def test_augment_applied_per_image(self, small_dataset):
        calls = []

        def augment(img, rng):
            calls.append(img.shape)
            return img

        list(iterate_batches(small_dataset, 8, np.random.default_rng(0), augment=augment))
        assert len(calls) == len(small_dataset)


class TestStorage:
    def test_packed_round_trip(self, tmp_path, small_dataset):
        written = save_dataset(small_dataset, tmp_path / "train")
        assert all(p.is_file() for p in written)
        loaded = load_dataset(tmp_path / "train")
        assert loaded.content_hash() == small_dataset.content_hash()
        assert loaded.split == "train"
        assert loaded.num_classes == 4

    def test_png_round_trip_is_exact(self, tmp_path, small_eval_dataset):
        save_dataset(small_eval_dataset, tmp_path / "test", fmt="png")
        loaded = load_dataset(tmp_path / "test" / MANIFEST, num_classes=4)
        np.testing.assert_array_equal(loaded.labels, small_eval_dataset.labels)
        np.testing.assert_array_equal(loaded.images, small_eval_dataset.images)

    def test_load_splits(self, tmp_path):
        for name, data in generate_splits(2, 2, 1, 1, 8, seed=0).items():
            save_dataset(data, tmp_path / name)
        splits = load_splits(tmp_path)
        assert {name: len(d) for name, d in splits.items()} == {"train": 4, "val": 2, "test": 2}

    def test_unknown_format(self, tmp_path, small_dataset):
        with pytest.raises(ValueError):
            save_dataset(small_dataset, tmp_path / "x", fmt="jpeg")

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "nowhere")

    def test_directory_without_data(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "empty")

    def test_empty_manifest(self, tmp_path):
        (tmp_path / MANIFEST).write_text("relative_path,label\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="vazio"):
            load_dataset(tmp_path)

    def _png_split(self, tmp_path, dataset):
        save_dataset(dataset, tmp_path / "split", fmt="png")
        manifest = tmp_path / "split" / MANIFEST
        with open(manifest, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        return manifest, rows

    def _rewrite(self, manifest, rows):
        with open(manifest, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerows(rows)

    def test_bad_label_names_line(self, tmp_path, small_eval_dataset):
        manifest, rows = self._png_split(tmp_path, small_eval_dataset)
        rows[3][1] = "abc"
        self._rewrite(manifest, rows)
        with pytest.raises(DatasetError, match="linha 4"):
            load_dataset(manifest, num_classes=4)

    def test_label_out_of_range_names_line(self, tmp_path, small_eval_dataset):
        manifest, rows = self._png_split(tmp_path, small_eval_dataset)
        rows[2][1] = "9"
        self._rewrite(manifest, rows)
        with pytest.raises(DatasetError, match="linha 3"):
            load_dataset(manifest, num_classes=4)

    def test_missing_image(self, tmp_path, small_eval_dataset):
        manifest, rows = self._png_split(tmp_path, small_eval_dataset)
        (manifest.parent / rows[1][0]).unlink()
        with pytest.raises(DatasetError, match="ausente"):
            load_dataset(manifest, num_classes=4)

    def test_corrupted_image(self, tmp_path, small_eval_dataset):
        manifest, rows = self._png_split(tmp_path, small_eval_dataset)
        (manifest.parent / rows[1][0]).write_bytes(b"not a png")
        with pytest.raises(DatasetError, match="corrompida"):
            load_dataset(manifest, num_classes=4)

    def test_corrupted_packed_tensor(self, tmp_path, small_dataset):
        save_dataset(small_dataset, tmp_path / "train")
        (tmp_path / "train" / "images.cumten").write_bytes(b"garbage")
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "train")


class TestDeform:
    def test_grid_has_eight_entries(self):
        labels = [spec.label for spec in DEFORMATION_GRID]
        assert len(labels) == len(set(labels)) == 8

    @pytest.mark.parametrize(
        "spec",
        [DeformSpec(kind="rotate", magnitude=0), DeformSpec(kind="zoom", magnitude=100), DeformSpec(kind="shear", magnitude=0)],
    )
    def test_neutral_parameters_are_identity(self, spec, small_dataset):
        img = small_dataset.images[0]
        np.testing.assert_allclose(deform(img, spec), img, atol=1e-6)

    @pytest.mark.parametrize("angle", [20, -20])
    def test_rotation_keeps_center_and_clears_corners(self, angle):
        img = np.full((3, 16, 16), 0.5, dtype=np.float32)
        out = deform(img, DeformSpec(kind="rotate", magnitude=angle))
        np.testing.assert_allclose(out[:, 6:10, 6:10], 0.5, atol=1e-6)
        assert np.all(out[:, 0, 0] == 0.0)
        assert out.dtype == np.float32

    def test_zoom_out_leaves_border_empty(self):
        img = np.full((1, 16, 16), 0.8, dtype=np.float32)
        out = deform(img, DeformSpec(kind="zoom", magnitude=60))
        assert out[0, 0, 0] == 0.0
        assert out[0, 8, 8] == pytest.approx(0.8, abs=1e-6)

    def test_randomized_needs_generator(self):
        with pytest.raises(ValueError):
            deform(np.zeros((1, 8, 8)), DeformSpec(kind="rotate", magnitude=20, randomized=True))

    def test_randomized_is_seeded(self, small_dataset):
        spec = DeformSpec(kind="shear", magnitude=28.6, randomized=True)
        img = small_dataset.images[1]
        np.testing.assert_array_equal(
            deform(img, spec, np.random.default_rng(4)),
            deform(img, spec, np.random.default_rng(4)),
        )


class TestCorrupt:
    def test_grid(self):
        assert len(CORRUPTION_GRID) == 20
        assert {spec.severity for spec in CORRUPTION_GRID} == {1, 2, 3, 4, 5}

    def test_noise_grows_with_severity(self):
        img = np.full((3, 16, 16), 0.5, dtype=np.float32)
        errors = [
            float(np.mean((corrupt(img, CorruptionSpec(kind="gaussian_noise", severity=s), np.random.default_rng(0)) - img) ** 2))
            for s in range(1, 6)
        ]
        assert errors == sorted(errors)
        assert len(set(errors)) == 5

    def test_brightness_shift(self, rng):
        img = np.full((3, 4, 4), 0.5, dtype=np.float32)
        out = corrupt(img, CorruptionSpec(kind="brightness", severity=1), rng)
        np.testing.assert_allclose(out, 0.55, atol=1e-6)

    def test_brightness_clipped(self, rng):
        img = np.full((3, 4, 4), 0.9, dtype=np.float32)
        assert corrupt(img, CorruptionSpec(kind="brightness", severity=5), rng).max() == 1.0

    @pytest.mark.parametrize("kind", ["gaussian_blur", "contrast"])
    def test_constant_image_unchanged(self, rng, kind):
        img = np.full((3, 8, 8), 0.3, dtype=np.float32)
        np.testing.assert_allclose(corrupt(img, CorruptionSpec(kind=kind, severity=3), rng), img, atol=1e-6)

    def test_contrast_pulls_towards_mean(self, rng):
        img = np.zeros((1, 2, 2), dtype=np.float32)
        img[0, 0, 0] = 1.0
        out = corrupt(img, CorruptionSpec(kind="contrast", severity=2), rng)
        np.testing.assert_allclose(out[0, 0, 0], 0.25 + 0.75 * 0.5, atol=1e-6)


class TestAugment:
    def test_center_crop_without_flip_is_identity(self, small_dataset, rng):
        img = small_dataset.images[0]
        np.testing.assert_array_equal(standard_augment(img, rng, flip=False, offset=(4, 4)), img)

    def test_double_flip(self, small_dataset, rng):
        img = small_dataset.images[0]
        once = standard_augment(img, rng, flip=True, offset=(4, 4))
        np.testing.assert_array_equal(once, img[..., ::-1])
        np.testing.assert_array_equal(standard_augment(once, rng, flip=True, offset=(4, 4)), img)

    def test_corner_offset_pads_with_zeros(self, small_dataset, rng):
        img = small_dataset.images[0]
        out = standard_augment(img, rng, flip=False, offset=(0, 0))
        assert np.all(out[:, :4, :] == 0) and np.all(out[:, :, :4] == 0)
        np.testing.assert_array_equal(out[:, 4:, 4:], img[:, :-4, :-4])

    def test_random_draw_keeps_shape(self, small_dataset, rng):
        img = small_dataset.images[0]
        for _ in range(10):
            assert standard_augment(img, rng).shape == img.shape
