"""Container format and dataset assembly checks."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distprobe.containers import (
    BadMagicError,
    NonFiniteDataError,
    ShapeMismatchError,
    TruncatedPayloadError,
    assemble_dataset,
    load_container,
    load_labels,
    make_latent_set,
    save_container,
    save_labels,
)


def test_round_trip_basic(tmp_path):
    arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    path = tmp_path / "a.hdat"
    save_container(arr, path)
    back = load_container(path)
    assert back.shape == arr.shape
    assert back.dtype == np.float32
    np.testing.assert_array_equal(back, arr)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 4))
def test_round_trip_property(tmp_path_factory, fuzz_seed, rank):
    rng = np.random.Generator(np.random.PCG64(fuzz_seed))
    shape = tuple(int(v) for v in rng.integers(1, 6, size=rank))
    arr = rng.normal(scale=100.0, size=shape).astype(np.float32)
    path = tmp_path_factory.mktemp("rt") / "x.hdat"
    save_container(arr, path)
    back = load_container(path)
    assert back.shape == arr.shape
    np.testing.assert_array_equal(back, arr)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.hdat"
    path.write_bytes(b"NOPE1" + b"\x00" * 32)
    with pytest.raises(BadMagicError):
        load_container(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.hdat"
    save_container(np.ones((4, 4), dtype=np.float32), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(TruncatedPayloadError):
        load_container(path)


def test_trailing_bytes(tmp_path):
    path = tmp_path / "t.hdat"
    save_container(np.ones(3, dtype=np.float32), path)
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(TruncatedPayloadError, match="trailing"):
        load_container(path)


def test_nonfinite_rejected_on_save(tmp_path):
    arr = np.array([1.0, np.nan], dtype=np.float32)
    with pytest.raises(NonFiniteDataError):
        save_container(arr, tmp_path / "n.hdat")


def test_nonfinite_rejected_on_load(tmp_path):
    path = tmp_path / "n.hdat"
    save_container(np.zeros(2, dtype=np.float32), path)
    raw = bytearray(path.read_bytes())
    raw[-4:] = np.array([np.inf], dtype="<f4").tobytes()
    path.write_bytes(bytes(raw))
    with pytest.raises(NonFiniteDataError):
        load_container(path)


def test_labels_round_trip(tmp_path):
    labels = np.array([0, 3, 1, 2], dtype=np.int64)
    path = tmp_path / "labels.txt"
    save_labels(labels, path)
    np.testing.assert_array_equal(load_labels(path), labels)


def test_labels_reject_garbage(tmp_path):
    path = tmp_path / "labels.txt"
    path.write_text("0\ntwo\n1\n")
    with pytest.raises(ShapeMismatchError):
        load_labels(path)


def test_assemble_dataset_validation():
    images = np.zeros((3, 1, 2, 2), dtype=np.float32)
    labels = np.array([0, 1, 0])
    ds = assemble_dataset(images, labels, 2)
    assert len(ds) == 3 and ds.class_count == 2

    with pytest.raises(ShapeMismatchError):
        assemble_dataset(images[:, 0], labels, 2)  # not 4-d
    with pytest.raises(ShapeMismatchError):
        assemble_dataset(images, labels[:2], 2)  # count mismatch
    with pytest.raises(ValueError):
        assemble_dataset(images + 2.0, labels, 2)  # out of pixel range
    with pytest.raises(ValueError):
        assemble_dataset(images, np.array([0, 1, 5]), 2)  # label out of range


def test_latent_set_validation():
    means = np.zeros((4, 3))
    stds = np.ones((4, 3))
    lat = make_latent_set(means, stds)
    assert len(lat) == 4

    with pytest.raises(ValueError):
        make_latent_set(means, stds * 0.0)  # nonpositive stds
    with pytest.raises(ShapeMismatchError):
        make_latent_set(means, stds[:2])
