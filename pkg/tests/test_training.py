import numpy as np
import pytest
from hypothesis import given, strategies as st

from vsentinel.data.manifest import split_dataset
from vsentinel.data.synth import generate_dataset
from vsentinel.nn.model import AnomalyNet, ModelConfig
from vsentinel.pipeline.generator import load_sequence, plan_sequences
from vsentinel.training import (
    CheckpointError, CurveRow, LearningCurve, MetricsReport, evaluate, f1_score, load_checkpoint, run_matrix,
    save_checkpoint, train,
)
from vsentinel.training.checkpoint import MAGIC, decode_checkpoint, encode_checkpoint
from vsentinel.training.matrix import CSV_FIELDS, config_key

# --- metrics --------------------------------------------------------------------------


def test_all_correct():
    r = MetricsReport.from_predictions([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])
    assert r.accuracy == r.precision == r.recall == r.f1 == 1.0


def test_all_positive_half_true():
    r = MetricsReport.from_predictions([0.9] * 4, [1, 1, 0, 0])
    assert r.recall == 1.0 and r.precision == 0.5
    assert r.f1 == pytest.approx(2 / 3)


def test_f1_from_published_scores():
    # VGG19 + GRU + pred model: P=87.1%, R=85.7%, F1=86.4%
    assert f1_score(0.871, 0.857) == pytest.approx(0.864, abs=5e-4)


def test_undefined_scores_are_none():
    r = MetricsReport.from_predictions([0.1, 0.2], [0, 0])
    assert r.precision is None and r.recall is None and r.f1 is None
    assert r.accuracy == 1.0
    assert r.as_row()["precision"] == "n/a"
    assert MetricsReport().accuracy is None
    assert f1_score(0.0, 0.0) is None


def test_threshold_is_inclusive():
    assert MetricsReport.from_predictions([0.5], [1]).tp == 1


def test_label_validation():
    with pytest.raises(ValueError):
        MetricsReport.from_predictions([0.5], [2])
    with pytest.raises(ValueError):
        MetricsReport.from_predictions([0.5, 0.1], [1])


@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_metric_identities(pairs):
    p, y = zip(*pairs)
    r = MetricsReport.from_predictions(p, y)
    assert r.total == len(pairs)
    if r.f1 is not None:
        assert min(r.precision, r.recall) - 1e-12 <= r.f1 <= max(r.precision, r.recall) + 1e-12
        if r.precision + r.recall > 0:
            assert r.f1 == pytest.approx(f1_score(r.precision, r.recall), abs=1e-12)


# --- checkpoint -----------------------------------------------------------------------


def _small_cfg(**kw):
    return ModelConfig(**{"backbone": "conv3", "cell": "gru", "seq_len": 4, "frame_size": 16, "hidden_size": 8,
                          "batch": 4, **kw})


def _probe(cfg, seed=0):
    return np.random.default_rng(seed).random((2, cfg.seq_len, 3, cfg.frame_size, cfg.frame_size)).astype(np.float32)


@pytest.mark.parametrize("cell", ["gru", "lstm"])
def test_checkpoint_round_trip_bitwise(tmp_path, cell):
    cfg = _small_cfg(cell=cell, with_pred_head=cell == "gru")
    model = AnomalyNet(cfg, seed=11)
    save_checkpoint(model, tmp_path / "m.vsnt", seed=11, epoch=3, classes=["calm", "agitated"])
    ckpt = load_checkpoint(tmp_path / "m.vsnt")
    assert ckpt.epoch == 3 and ckpt.classes == ["calm", "agitated"] and ckpt.config == cfg
    x = _probe(cfg)
    assert model.predict_proba(x).tobytes() == ckpt.model.predict_proba(x).tobytes()


def test_checkpoint_resave_byte_identical(tmp_path):
    model = AnomalyNet(_small_cfg(), seed=2)
    save_checkpoint(model, tmp_path / "a.vsnt", seed=2)
    save_checkpoint(load_checkpoint(tmp_path / "a.vsnt").model, tmp_path / "b.vsnt", seed=2)
    assert (tmp_path / "a.vsnt").read_bytes() == (tmp_path / "b.vsnt").read_bytes()


def test_checkpoint_keeps_frozen_flags():
    cfg = _small_cfg(freeze_boundary=2)
    ckpt = decode_checkpoint(encode_checkpoint(AnomalyNet(cfg)))
    assert [p.trainable for p in ckpt.model.parameters()] == [p.trainable for p in AnomalyNet(cfg).parameters()]


@pytest.fixture
def blob():
    return encode_checkpoint(AnomalyNet(_small_cfg(), seed=0))


def test_bad_magic(blob):
    with pytest.raises(CheckpointError, match="bad magic"):
        decode_checkpoint(b"XXXX" + blob[4:])


def test_version_mismatch(blob):
    with pytest.raises(CheckpointError, match="version 7"):
        decode_checkpoint(MAGIC + (7).to_bytes(4, "little") + blob[8:])


@pytest.mark.parametrize("cut", [2, 10, 40, -1, -300])
def test_truncated(blob, cut):
    with pytest.raises(CheckpointError, match="truncated"):
        decode_checkpoint(blob[:cut])


def test_corrupt_header(blob):
    n = int.from_bytes(blob[8:12], "little")
    bad = blob[:12] + b"{" * n + blob[12 + n:]
    with pytest.raises(CheckpointError, match="corrupt config header"):
        decode_checkpoint(bad)


def test_shape_mismatch(blob):
    other = encode_checkpoint(AnomalyNet(_small_cfg(hidden_size=9)))
    # header of the 8-unit config followed by the 9-unit parameters
    n_a = int.from_bytes(blob[8:12], "little")
    n_b = int.from_bytes(other[8:12], "little")
    with pytest.raises(CheckpointError, match="shape mismatch"):
        decode_checkpoint(blob[:12 + n_a] + other[12 + n_b:])


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError, match="cannot read"):
        load_checkpoint(tmp_path / "nope.vsnt")


# --- curves ---------------------------------------------------------------------------


def test_curve_csv_round_trip(tmp_path):
    curve = LearningCurve()
    for e in range(1, 4):
        curve.append(CurveRow(e, 1 / e, 0.5, 0.1 * e, 1 / 3))
    curve.write_csv(tmp_path / "c.csv")
    assert LearningCurve.read_csv(tmp_path / "c.csv") == curve
    assert curve.to_csv().splitlines()[0] == "epoch,train_loss,train_acc,val_loss,val_acc"
    with pytest.raises(ValueError):
        curve.append(CurveRow(7, 0, 0, 0, 0))


def test_curve_svg():
    curve = LearningCurve([CurveRow(1, 0.7, 0.5, 0.69, 0.5), CurveRow(2, 0.5, 0.8, 0.6, 0.7)])
    svg = curve.to_svg()
    assert svg.startswith("<svg") and svg.count("<polyline") == 4
    assert LearningCurve().to_svg().count("<polyline") == 0


# --- training -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    return split_dataset(generate_dataset(root, 4, n_frames=12, side=16, seed=5), 0.5, seed=0)


@pytest.fixture(scope="module")
def pair(tmp_path_factory):
    root = tmp_path_factory.mktemp("pair")
    return split_dataset(generate_dataset(root, 2, n_frames=8, side=16, seed=1), 0.5, seed=0)


def test_zero_lr_leaves_parameters(tiny):
    cfg = _small_cfg(lr=0.0)
    result = train(cfg, tiny, epochs=3, seed=4)
    fresh = AnomalyNet(result.model.cfg, seed=4)
    for (_, a), (_, b) in zip(fresh.named_parameters(), result.model.named_parameters()):
        assert a.data.tobytes() == b.data.tobytes()
    losses = {r.train_loss for r in result.curve.rows}
    assert len(losses) == 1


def test_one_video_per_class_two_epochs(pair):
    assert len(train(_small_cfg(lr=0.01), pair, epochs=2).curve) == 2


def test_small_lr_loss_mostly_non_increasing(tiny):
    curve = train(_small_cfg(lr=1e-4, batch=8), tiny, epochs=30, seed=0).curve
    losses = [r.train_loss for r in curve.rows]
    violations = sum(b > a for a, b in zip(losses, losses[1:]))
    assert violations <= 2, losses


def test_training_is_seed_deterministic(tiny, tmp_path):
    a = train(_small_cfg(lr=0.05), tiny, epochs=2, seed=3, checkpoint_path=tmp_path / "a.vsnt")
    b = train(_small_cfg(lr=0.05), tiny, epochs=2, seed=3, checkpoint_path=tmp_path / "b.vsnt")
    assert a.curve.to_csv() == b.curve.to_csv()
    assert (tmp_path / "a.vsnt").read_bytes() == (tmp_path / "b.vsnt").read_bytes()


def test_train_requires_split(tiny):
    with pytest.raises(ValueError, match="split"):
        train(_small_cfg(), tiny.with_split({}), epochs=1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_diverges_with_named_epoch(tiny):
    from vsentinel.training import TrainingDiverged
    with pytest.raises(TrainingDiverged, match="epoch 1"):
        train(_small_cfg(lr=1e30), tiny, epochs=2)


def test_evaluate_sources_agree(tiny, tmp_path):
    result = train(_small_cfg(lr=0.05), tiny, epochs=1, checkpoint_path=tmp_path / "m.vsnt")
    a = evaluate(result, tiny)
    b = evaluate(tmp_path / "m.vsnt", tiny)
    assert (a.tp, a.fp, a.tn, a.fn) == (b.tp, b.fp, b.tn, b.fn)
    assert a.total == len(tiny.records_in("test"))
    assert [p.probability for p in a.predictions] == [p.probability for p in b.predictions]


def test_evaluate_sliding_takes_max(tiny):
    model = AnomalyNet(_small_cfg(window_seconds=0.1), seed=0)  # step 1, several windows per video
    report = evaluate(model, tiny, mode="sliding")
    for rec, pred in zip(tiny.records_in("test"), report.predictions):
        refs = plan_sequences(rec, 4, "sliding", model.cfg.window_seconds)
        windows = [model.predict_proba(load_sequence(tiny.video_dir(rec), r, 16).frames[None])[0] for r in refs]
        assert len(windows) > 1 and pred.probability == max(windows)


# --- matrix ---------------------------------------------------------------------------


def test_matrix_single_row(tiny):
    res = run_matrix(_small_cfg(), tiny, ["conv3"], ["gru"], [True])
    assert len(res) == 1 and res.rows[0].config == "conv3+gru+pred"
    assert res.to_csv().splitlines()[0] == ",".join(CSV_FIELDS)
    table = res.to_table().splitlines()
    assert "conv3 + GRU + pred model" in table[-1]


def test_matrix_deterministic(tiny):
    a = run_matrix(_small_cfg(), tiny, ["conv3"], ["gru", "lstm"], [False], seed=1)
    b = run_matrix(_small_cfg(), tiny, ["conv3"], ["gru", "lstm"], [False], seed=1)
    assert a.to_csv() == b.to_csv() and a.to_table() == b.to_table()


def test_matrix_records_failure_and_continues(tiny):
    # vgg19 cannot pool a 16 px frame five times
    res = run_matrix(_small_cfg(), tiny, ["vgg19", "conv3"], ["gru"], [True])
    assert [r.config for r in res.rows] == ["vgg19+gru+pred", "conv3+gru+pred"]
    assert [r.config for r in res.failures] == ["vgg19+gru+pred"]
    assert res.rows[0].as_csv_row()["f1"] == "n/a"
    assert res.rows[1].report is not None


def test_config_key():
    assert config_key("vgg19", "lstm", False) == "vgg19+lstm"
