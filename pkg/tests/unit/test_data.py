from collections import OrderedDict

import numpy as np
import pytest

from hgcnet.core.exceptions import CheckpointError, DataFormatError, ValidationError
from hgcnet.data import (
    Checkpoint,
    DataConfig,
    Dataset,
    NormStats,
    apply_checkpoint,
    capture_checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    load_cifar,
    load_datasets,
    read_cifar_file,
    save_checkpoint,
    synth_dataset,
)
from hgcnet.data.cifar import LAYOUTS
from hgcnet.netbuilder.network import build_network

RECORD = 3073


def _write(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(records))
    return path


# --- CIFAR ---


def test_read_cifar10_records(tmp_path, cifar_record):
    """Test labels, value scaling and the red-green-blue plane order."""
    path = _write(
        tmp_path / "batch.bin",
        [cifar_record([3], [255]), cifar_record([7], [0] * 1024 + [51])],
    )

    images, labels = read_cifar_file(path)

    assert labels.tolist() == [3, 7]
    assert images.shape == (2, 3, 32, 32)
    assert images.dtype == np.float32
    assert images[0, 0, 0, 0] == 1.0
    assert images[1, 1, 0, 0] == pytest.approx(0.2)
    assert images[1, 0].max() == 0.0


def test_read_cifar100_uses_fine_label(tmp_path, cifar_record):
    """Test the second label byte is the class."""
    path = _write(tmp_path / "train.bin", [cifar_record([5, 42])])

    _, labels = read_cifar_file(path, "cifar100")

    assert labels.tolist() == [42]


@pytest.mark.parametrize(
    "labels, value, offset",
    [([25, 3], 25, 3074), ([5, 120], 120, 3075)],
    ids=["coarse", "fine"],
)
def test_cifar100_label_bytes_are_range_checked(tmp_path, cifar_record, labels, value, offset):
    """Test a coarse label of 20 or more is rejected like a fine label of 100 or more."""
    path = _write(tmp_path / "train.bin", [cifar_record([5, 42]), cifar_record(labels)])

    with pytest.raises(DataFormatError, match=f"label {value} .* byte offset {offset}"):
        read_cifar_file(path, "cifar100")


def test_truncated_file_reports_offset(tmp_path, cifar_record):
    """Test a partial trailing record is rejected with its byte offset."""
    path = _write(tmp_path / "batch.bin", [cifar_record([1]), b"\x00" * 100])

    with pytest.raises(DataFormatError, match=f"byte offset {RECORD}"):
        read_cifar_file(path)


@pytest.mark.parametrize("chunk_records", [None, 1, 2, 1000])
def test_out_of_range_label_reports_offset(tmp_path, cifar_record, chunk_records):
    """Test the offending label byte is located in the file whichever way it is read."""
    records = [cifar_record([i]) for i in range(3)] + [cifar_record([12])]
    path = _write(tmp_path / "batch.bin", records)

    with pytest.raises(DataFormatError, match=f"label 12 .* byte offset {3 * RECORD}"):
        read_cifar_file(path, chunk_records=chunk_records)


def test_chunked_read_equals_whole_read(tmp_path, cifar_record):
    """Test streaming in chunks gives bit-identical arrays."""
    rng = np.random.default_rng(0)
    records = [
        cifar_record([int(rng.integers(10))], rng.integers(0, 256, size=3072).tolist())
        for _ in range(7)
    ]
    path = _write(tmp_path / "batch.bin", records)

    whole = read_cifar_file(path)
    for chunk in (1, 3, 7, 50):
        streamed = read_cifar_file(path, chunk_records=chunk)
        np.testing.assert_array_equal(streamed[0], whole[0])
        np.testing.assert_array_equal(streamed[1], whole[1])


def test_missing_file_and_unknown_variant(tmp_path):
    """Test absent files and unknown variants are format errors."""
    with pytest.raises(DataFormatError, match="not found"):
        read_cifar_file(tmp_path / "absent.bin")
    with pytest.raises(DataFormatError, match="unknown CIFAR variant"):
        read_cifar_file(tmp_path / "absent.bin", "svhn")


def _fake_cifar10(root, cifar_record):
    layout = LAYOUTS["cifar10"]
    for index, name in enumerate(layout.train_files):
        _write(root / name, [cifar_record([index]), cifar_record([index + 5])])
    _write(root / layout.test_files[0], [cifar_record([9])])


def test_load_cifar_finds_the_batch_directory(tmp_path, cifar_record):
    """Test both the extracted directory and its parent are accepted."""
    _fake_cifar10(tmp_path / "cifar-10-batches-bin", cifar_record)

    for root in (tmp_path, tmp_path / "cifar-10-batches-bin"):
        train, test = load_cifar(root)
        assert len(train) == 10 and len(test) == 1
        assert train.labels.tolist() == [0, 5, 1, 6, 2, 7, 3, 8, 4, 9]
        assert (train.split, test.split) == ("train", "test")

    with pytest.raises(DataFormatError, match="no cifar100 binary files"):
        load_cifar(tmp_path, "cifar100")


def test_load_datasets_reads_cifar_through_config(tmp_path, cifar_record):
    """Test a cifar10 data config loads the test split as validation."""
    _fake_cifar10(tmp_path, cifar_record)

    train, val = load_datasets(DataConfig(source="cifar10", path=str(tmp_path)))

    assert (len(train), len(val), val.class_count) == (10, 1, 10)
    with pytest.raises(ValueError, match="data.path"):
        DataConfig(source="cifar100")


# --- datasets and normalization ---


def test_dataset_validation():
    """Test shape, emptiness and label range checks."""
    images = np.zeros((2, 3, 4, 4))
    with pytest.raises(DataFormatError, match="must lie in"):
        Dataset(images, [0, 3], class_count=3)
    with pytest.raises(DataFormatError, match="2 images"):
        Dataset(images, [0], class_count=3)
    with pytest.raises(DataFormatError, match="empty"):
        Dataset(np.zeros((0, 3, 4, 4)), [], class_count=3)
    assert Dataset(images, [2, 2], 3).class_counts().tolist() == [0, 0, 2]


def test_norm_stats_center_and_scale():
    """Test per-channel statistics and the constant-channel guard."""
    rng = np.random.default_rng(4)
    images = rng.uniform(size=(20, 3, 4, 4))
    images[:, 2] = 0.5
    dataset = Dataset(images, np.zeros(20, dtype=int), 2)

    norm = NormStats.from_dataset(dataset)
    normalized = norm.apply(dataset.images)

    np.testing.assert_allclose(normalized[:, :2].mean(axis=(0, 2, 3)), 0, atol=1e-5)
    np.testing.assert_allclose(normalized[:, :2].std(axis=(0, 2, 3)), 1, atol=1e-4)
    assert norm.std[2] == 1.0
    assert not normalized[:, 2].any()
    restored = NormStats.from_dict(norm.to_dict())
    np.testing.assert_array_equal(restored.mean, norm.mean)


# --- synthetic data ---


def test_synthetic_is_a_pure_function_of_its_arguments():
    """Test equal arguments give equal data and different splits different samples."""
    a = synth_dataset(3, 50, split="train")
    b = synth_dataset(3, 50, split="train")
    val = synth_dataset(3, 50, split="val")

    np.testing.assert_array_equal(a.images, b.images)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.images, val.images)
    assert not np.array_equal(a.images, synth_dataset(4, 50).images)


def test_synthetic_labels_are_balanced():
    """Test class counts differ by at most one."""
    counts = synth_dataset(0, 103, classes=10).class_counts()

    assert counts.max() - counts.min() <= 1
    assert counts.sum() == 103


def test_synthetic_classes_are_separable_at_zero_difficulty():
    """Test a nearest class-mean rule trained on one split labels another perfectly."""
    train = synth_dataset(0, 200, split="train")
    val = synth_dataset(0, 100, split="val")
    flat_train = train.images.reshape(len(train), -1)
    means = np.stack([flat_train[train.labels == c].mean(axis=0) for c in range(10)])

    distances = ((val.images.reshape(len(val), 1, -1) - means[None]) ** 2).sum(axis=2)

    assert (distances.argmin(axis=1) == val.labels).all()


def test_synthetic_argument_checks():
    """Test invalid sizes, difficulty and split names."""
    with pytest.raises(ValidationError):
        synth_dataset(0, 5, classes=10)
    with pytest.raises(ValidationError):
        synth_dataset(0, 20, classes=1)
    with pytest.raises(ValidationError):
        synth_dataset(0, 20, difficulty=-1)
    with pytest.raises(ValidationError, match="unknown split"):
        synth_dataset(0, 20, split="holdout")


# --- checkpoints ---


def _tiny_checkpoint(tiny_net):
    velocities = {
        name: np.full(p.shape, 0.5, np.float32) for name, p in tiny_net.named_parameters()
    }
    return capture_checkpoint(tiny_net, velocities, {"epoch": 2, "note": "x"})


def test_checkpoint_bytes_round_trip(tiny_net):
    """Test decoding then encoding reproduces the exact bytes."""
    data = encode_checkpoint(_tiny_checkpoint(tiny_net))

    decoded = decode_checkpoint(data)

    assert encode_checkpoint(decoded) == data
    assert data.startswith(b"HGCNETCK")
    assert decoded.epoch == 2
    assert set(decoded.section("velocity:")) == {n for n, _ in tiny_net.named_parameters()}


def test_checkpoint_restores_parameters_and_buffers(tmp_path, tiny_spec, tiny_net):
    """Test applying a saved checkpoint makes another network identical."""
    tiny_net.child("norm").state.running_mean[:] = 0.25
    path = tmp_path / "nested" / "checkpoint.hgc"
    save_checkpoint(path, _tiny_checkpoint(tiny_net))
    other = build_network(tiny_spec, seed=99)

    velocities = apply_checkpoint(load_checkpoint(path), other)

    for (name, a), (_, b) in zip(tiny_net.named_parameters(), other.named_parameters()):
        np.testing.assert_array_equal(a.value, b.value, err_msg=name)
    np.testing.assert_array_equal(other.child("norm").state.running_mean, 0.25)
    assert all((v == 0.5).all() for v in velocities.values())
    assert not (tmp_path / "nested" / "checkpoint.hgc.tmp").exists()


def test_corrupt_checkpoints_name_the_problem(tiny_net):
    """Test bad magic, versions, truncation and trailing bytes are reported."""
    data = encode_checkpoint(_tiny_checkpoint(tiny_net))
    last = list(decode_checkpoint(data).blobs)[-1]

    with pytest.raises(CheckpointError, match="bad magic"):
        decode_checkpoint(b"NOTACKPT" + data[8:])
    with pytest.raises(CheckpointError, match="version 7"):
        decode_checkpoint(data[:8] + (7).to_bytes(4, "little") + data[12:])
    with pytest.raises(CheckpointError, match=f"data of {last}"):
        decode_checkpoint(data[:-4])
    with pytest.raises(CheckpointError, match="trailing"):
        decode_checkpoint(data + b"\x00")


def test_checkpoint_must_fit_the_model(tmp_path, tiny_net):
    """Test missing, foreign and misshapen blobs are refused before anything is loaded."""
    good = _tiny_checkpoint(tiny_net)

    missing = Checkpoint(good.metadata, OrderedDict(list(good.blobs.items())[1:]))
    with pytest.raises(CheckpointError, match="param:stem.weight' missing"):
        apply_checkpoint(missing, tiny_net)

    foreign = Checkpoint(good.metadata, OrderedDict(good.blobs, **{"param:extra": np.zeros(1)}))
    with pytest.raises(CheckpointError, match="does not belong"):
        apply_checkpoint(foreign, tiny_net)

    reshaped = OrderedDict(good.blobs)
    reshaped["param:stem.weight"] = np.zeros((1, 1, 1, 1), np.float32)
    with pytest.raises(CheckpointError, match="has shape"):
        apply_checkpoint(Checkpoint(good.metadata, reshaped), tiny_net)

    with pytest.raises(CheckpointError, match="not found"):
        load_checkpoint(tmp_path / "absent.hgc")
