import csv
import math

import numpy as np
import pytest

from hgcnet.data.checkpoint import load_checkpoint
from hgcnet.data.synthetic import synth_dataset
from hgcnet.netbuilder.network import build_network
from hgcnet.training import TrainConfig, Trainer, train
from hgcnet.training.trainer import CHECKPOINT_FILE, METRICS_FILE, PROMETHEUS_FILE

pytestmark = pytest.mark.integration


def _weights(model):
    return {name: param.value.copy() for name, param in model.named_parameters()}


def _assert_same_weights(a, b):
    assert a.keys() == b.keys()
    for name in a:
        np.testing.assert_array_equal(a[name], b[name], err_msg=name)


@pytest.mark.slow
def test_tiny_network_learns_synthetic_classes(tiny_spec):
    """Test desk-scale training starts at chance and fits the training set to under 5% error."""
    train_set = synth_dataset(seed=0, n=512, split="train")
    val_set = synth_dataset(seed=0, n=256, split="val")
    cfg = TrainConfig(epochs=30, batch_size=64, seed=0, eval_every=10)

    metrics = train(build_network(tiny_spec, seed=0), train_set, cfg, val_set=val_set)

    assert len(metrics.records) == 30
    assert metrics.initial_loss == pytest.approx(math.log(10), abs=0.1)
    assert metrics.records[-1].train_top1 < 5.0
    assert metrics.records[-1].train_loss < metrics.initial_loss
    assert metrics.last.val_top1 < 5.0
    # validation ran on epochs 9, 19 and the last one only
    assert [r.epoch for r in metrics.records if r.val_top1 is not None] == [9, 19, 29]


def test_same_seed_same_run(tiny_spec, small_train_set, small_val_set, quick_train_config):
    """Test two runs with one seed produce identical metrics and weights."""
    runs = []
    for _ in range(2):
        model = build_network(tiny_spec, seed=1)
        metrics = train(model, small_train_set, quick_train_config, val_set=small_val_set)
        runs.append((metrics.stream(), _weights(model)))

    assert runs[0][0] == runs[1][0]
    _assert_same_weights(runs[0][1], runs[1][1])


def test_prefetch_thread_matches_inline(
    tiny_spec, small_train_set, small_val_set, quick_train_config
):
    """Test training with the batch producer thread is bit-identical to inline batches."""
    inline_model = build_network(tiny_spec, seed=2)
    threaded_model = build_network(tiny_spec, seed=2)

    inline = train(inline_model, small_train_set, quick_train_config, small_val_set, threads=0)
    threaded = train(threaded_model, small_train_set, quick_train_config, small_val_set, threads=2)

    assert inline.stream() == threaded.stream()
    _assert_same_weights(_weights(inline_model), _weights(threaded_model))


def test_resume_continues_exactly(
    tmp_path, tiny_spec, small_train_set, small_val_set, quick_train_config
):
    """Test stopping after epoch 2 and resuming reproduces the uninterrupted run."""
    full_model = build_network(tiny_spec, seed=4)
    full = Trainer(full_model, small_train_set, quick_train_config, small_val_set).fit()

    first = Trainer(
        build_network(tiny_spec, seed=4),
        small_train_set,
        quick_train_config,
        small_val_set,
        out_dir=tmp_path / "interrupted",
    )
    first.fit(until=2)
    # a fresh process: new network, new trainer, state only from the checkpoint
    resumed_model = build_network(tiny_spec, seed=99)
    second = Trainer(resumed_model, small_train_set, quick_train_config, small_val_set)
    second.resume(load_checkpoint(tmp_path / "interrupted" / CHECKPOINT_FILE))
    resumed = second.fit()

    assert second.epoch == 3
    assert resumed.initial_loss == full.initial_loss
    assert resumed.stream() == full.stream()
    _assert_same_weights(_weights(resumed_model), _weights(full_model))


def test_outputs_are_written_each_epoch(
    tmp_path, tiny_spec, small_train_set, small_val_set, quick_train_config
):
    """Test the metrics CSV, prometheus textfile and checkpoint in the output directory."""
    out = tmp_path / "run"
    trainer = Trainer(
        build_network(tiny_spec), small_train_set, quick_train_config, small_val_set, out_dir=out
    )

    trainer.fit()

    rows = list(csv.reader((out / METRICS_FILE).open()))
    assert [row[0] for row in rows[1:]] == ["0", "1", "2"]
    assert all(row[5] for row in rows[1:])
    assert 'hgc_epoch{run="train"} 2.0' in (out / PROMETHEUS_FILE).read_text()
    checkpoint = load_checkpoint(out / CHECKPOINT_FILE)
    assert checkpoint.epoch == 3
    assert checkpoint.metadata["spec"]["preset"] == "tiny"
    assert len(checkpoint.metadata["metrics"]["records"]) == 3
    assert set(checkpoint.section("velocity:")) == set(_weights(trainer.model))
