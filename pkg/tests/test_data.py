"""IDX container parsing, scaling, and losslessness."""

import gzip
import struct

import numpy as np
import pytest

from drnlab.data import (IMAGES_MAGIC, LABELS_MAGIC, dataset_available, load_pair,
                         load_split, parse_idx, resolve_dataset_dir, write_idx)
from drnlab.errors import DatasetError, FormatError

from conftest import write_synthetic_dataset


def image_bytes(shape, payload):
    return struct.pack(">IIII", IMAGES_MAGIC, *shape) + bytes(payload)


class TestParse:
    def test_accepts_image_magic(self, tmp_path):
        path = tmp_path / "img"
        path.write_bytes(image_bytes((2, 2, 2), range(8)))
        arr = parse_idx(path)
        assert arr.shape == (2, 2, 2)
        assert arr.dtype == np.uint8

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(struct.pack(">IIII", 0x00000802, 2, 2, 2) + bytes(8))
        with pytest.raises(FormatError, match="0x00000802 at offset 0"):
            parse_idx(path)

    def test_rejects_truncated_payload(self, tmp_path):
        path = tmp_path / "short"
        path.write_bytes(image_bytes((2, 2, 2), range(7)))
        with pytest.raises(FormatError, match="offset"):
            parse_idx(path)

    def test_scaling_endpoints(self, tmp_path):
        path = tmp_path / "img"
        path.write_bytes(image_bytes((2, 1, 2), [0, 255, 17, 34]))
        labels = tmp_path / "lab"
        labels.write_bytes(struct.pack(">II", LABELS_MAGIC, 2) + bytes([3, 9]))
        ds = load_pair(path, labels, "train")
        np.testing.assert_allclose(ds.images[0], [0.0, 1.0])
        np.testing.assert_allclose(ds.images[1], [17 / 255, 34 / 255])
        np.testing.assert_array_equal(ds.labels, [3, 9])

    def test_gzip_transparent(self, tmp_path):
        raw = image_bytes((1, 2, 2), [1, 2, 3, 4])
        path = tmp_path / "img.gz"
        with gzip.open(path, "wb") as f:
            f.write(raw)
        arr = parse_idx(path)
        assert arr.shape == (1, 2, 2)

    def test_count_mismatch_is_dataset_error(self, tmp_path):
        img = tmp_path / "img"
        img.write_bytes(image_bytes((2, 1, 1), [5, 6]))
        lab = tmp_path / "lab"
        lab.write_bytes(struct.pack(">II", LABELS_MAGIC, 3) + bytes([0, 1, 2]))
        with pytest.raises(DatasetError, match="2 items"):
            load_pair(img, lab, "train")


class TestRoundTrip:
    def test_reencoding_reproduces_source_bytes(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, (5, 4, 3)).astype(np.uint8)
        src = tmp_path / "src"
        write_idx(src, images)
        parsed = parse_idx(src)
        out = tmp_path / "out"
        write_idx(out, parsed)
        assert src.read_bytes() == out.read_bytes()

    def test_scaled_values_recover_bytes(self, tmp_path):
        # the /255 scaling is lossless: round(v*255) returns the byte
        rng = np.random.default_rng(1)
        images = rng.integers(0, 256, (4, 2, 2)).astype(np.uint8)
        lab = rng.integers(0, 10, 4).astype(np.uint8)
        write_idx(tmp_path / "i", images)
        write_idx(tmp_path / "l", lab)
        ds = load_pair(tmp_path / "i", tmp_path / "l", "train")
        rebuilt = np.round(ds.images * 255).astype(np.uint8).reshape(images.shape)
        assert rebuilt.tobytes() == images.tobytes()


class TestSplits:
    def test_load_split_and_availability(self, tmp_path):
        directory = write_synthetic_dataset(tmp_path / "ds", n_train=12, n_test=6)
        train = load_split(directory, "train")
        test = load_split(directory, "test")
        assert len(train) == 12 and len(test) == 6
        assert train.images.shape == (12, 36)
        assert 0.0 <= train.images.min() and train.images.max() <= 1.0
        assert dataset_available(str(directory))

    def test_missing_files_reported(self, tmp_path):
        with pytest.raises(DatasetError, match="missing"):
            load_split(tmp_path, "train")
        assert not dataset_available(str(tmp_path / "nope"))

    def test_resolve_uses_env_root(self, tmp_path, monkeypatch):
        write_synthetic_dataset(tmp_path / "root" / "mnist", n_train=4, n_test=2)
        monkeypatch.setenv("DRN_DATA_DIR", str(tmp_path / "root"))
        assert resolve_dataset_dir("mnist") == str(tmp_path / "root" / "mnist")
        assert dataset_available("mnist")
