import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bilinear_sample
from vsentinel.data.synth import generate_dataset
from vsentinel.data.manifest import split_dataset
from vsentinel.nn.model import ModelConfig
from vsentinel.pipeline.frames import (
    PPMError, VideoMeta, encode_ppm, iter_ppm_stream, load_frames, read_ppm, read_ppm_from, to_chw,
    to_hwc_uint8, write_ppm, write_video, read_meta,
)
from vsentinel.pipeline.generator import BatchGenerator, plan_sequences
from vsentinel.pipeline.sampling import compute_step, sample_whole_video, sliding_starts
from vsentinel.pipeline.transforms import AugmentSpec, FrameSequence, augment, resize_bilinear, resize_frame

SEQ_LEN = 30
PROPERTY_EXAMPLES = 10_000

fps_st = st.floats(1.0, 240.0, allow_nan=False)
window_st = st.floats(0.1, 10.0, allow_nan=False)
frames_st = st.integers(1, 20_000)


# --- compute_step ---------------------------------------------------------------------


@pytest.mark.parametrize("fps,window,want", [(30, 1.0, 1), (60, 1.0, 2), (25, 2.0, 2)])
def test_compute_step_fixtures(fps, window, want):
    assert compute_step(fps, window, 30) == want


def test_compute_step_oracle_enumeration():
    # 30 frames at step 2 cover timestamps 0 .. 58/60 s
    step = compute_step(60, 1.0, 30)
    stamps = [k * step / 60 for k in range(30)]
    assert stamps[-1] == pytest.approx(58 / 60)


def test_compute_step_rounds_half_up():
    assert compute_step(45, 1.0, 30) == 2  # 1.5
    assert compute_step(75, 1.0, 30) == 3  # 2.5


@pytest.mark.parametrize("args", [(0, 1, 30), (30, 0, 30), (30, 1, 0), (-1, 1, 30)])
def test_compute_step_rejects_non_positive(args):
    with pytest.raises(ValueError):
        compute_step(*args)


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(fps_st, window_st)
def test_compute_step_properties(fps, window):
    step = compute_step(fps, window, SEQ_LEN)
    exact = fps * window / SEQ_LEN
    assert isinstance(step, int) and step >= 1
    assert step == max(1, math.floor(exact + 0.5))
    if exact >= 0.5:
        # the window of SEQ_LEN samples spans the requested duration within half a step per sample
        assert abs(step * SEQ_LEN - fps * window) <= SEQ_LEN / 2 + 1e-9


# --- sample_whole_video ---------------------------------------------------------------


def test_whole_video_fixtures():
    assert sample_whole_video(300, 30) == list(range(0, 300, 10))
    assert sample_whole_video(30, 30) == list(range(30))
    assert sample_whole_video(20, 30) == list(range(20)) + [19] * 10
    meta = VideoMeta("v", 30.0, 300, "calm")
    assert sample_whole_video(meta, 30) == list(range(0, 300, 10))


def test_whole_video_rejects_empty():
    with pytest.raises(ValueError):
        sample_whole_video(0, 30)


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(fps_st, window_st, frames_st)
def test_whole_video_structural_invariants(fps, window, n):
    compute_step(fps, window, SEQ_LEN)
    idx = sample_whole_video(n, SEQ_LEN)
    assert len(idx) == SEQ_LEN
    assert idx[0] == 0 and max(idx) <= n - 1
    if n >= SEQ_LEN:
        step = n // SEQ_LEN
        assert all(b - a == step for a, b in zip(idx, idx[1:]))
    else:
        assert idx == list(range(n)) + [n - 1] * (SEQ_LEN - n)


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(fps_st, window_st, frames_st)
def test_whole_video_coverage(fps, window, n):
    # Stated coverage guarantee for n >= L. With step = floor(n / L) it cannot
    # hold for n in roughly [L + 2, L^2 / 2): e.g. n = 2L - 2 gives step 1 and
    # the sequence covers only about half of the video.
    compute_step(fps, window, SEQ_LEN)
    if n < SEQ_LEN:
        return
    idx = sample_whole_video(n, SEQ_LEN)
    step = n // SEQ_LEN
    assert idx[-1] >= n - 2 * step
    assert (idx[-1] + 1) / n >= 1 - 2 / SEQ_LEN


# --- sliding windows ------------------------------------------------------------------


def test_sliding_enumeration():
    starts = sliding_starts(300, 30, 1, 15)
    assert starts == list(range(0, 271, 15)) and len(starts) == 19
    assert sliding_starts(29, 30, 1, 15) == []


@settings(max_examples=500, deadline=None)
@given(st.integers(1, 2000), st.integers(1, 40), st.integers(1, 5), st.integers(1, 50))
def test_sliding_windows_fit(n, length, step, stride):
    for s in sliding_starts(n, length, step, stride):
        assert s % stride == 0
        assert s + length * step <= n


def test_plan_sequences_modes():
    meta = VideoMeta("v", 30.0, 300, "calm")
    refs = plan_sequences(meta, 30, "sliding", 1.0)
    assert len(refs) == 19 and refs[1].indices[0] == 15
    short = plan_sequences(VideoMeta("s", 30.0, 12, "calm"), 30, "sliding", 1.0)
    assert len(short) == 1 and short[0].padded
    single = plan_sequences(meta, 30, "single_sequence")
    assert len(single) == 1 and single[0].step == 10
    with pytest.raises(ValueError):
        plan_sequences(meta, 30, "random")


# --- resize ---------------------------------------------------------------------------


def test_resize_constant_frame():
    frame = np.full((3, 7, 5), 0.25, dtype=np.float32)
    frame[1] = 0.5
    out = resize_frame(frame, 11)
    assert out.shape == (3, 11, 11)
    np.testing.assert_array_equal(out[0], 0.25)
    np.testing.assert_array_equal(out[1], 0.5)


def test_resize_identity():
    frame = np.random.default_rng(0).random((3, 6, 6)).astype(np.float32)
    np.testing.assert_array_equal(resize_frame(frame, 6), frame)


def test_resize_known_gradient():
    img = np.arange(16, dtype=np.float64).reshape(4, 4)
    out = resize_bilinear(img[None], 2, 2)[0]
    # half-pixel centres sample the middle of each 2x2 block
    np.testing.assert_allclose(out, [[2.5, 4.5], [10.5, 12.5]])


@pytest.mark.parametrize("seed", range(4))
def test_resize_matches_bilinear_oracle(seed):
    rng = np.random.default_rng(seed)
    h, w, oh, ow = rng.integers(2, 9, size=4)
    img = rng.random((h, w))
    got = resize_bilinear(img[None], oh, ow)[0]
    for i in range(oh):
        for j in range(ow):
            y = (i + 0.5) * h / oh - 0.5
            x = (j + 0.5) * w / ow - 0.5
            assert got[i, j] == pytest.approx(bilinear_sample(img, y, x), abs=1e-12)


def test_resize_rejects_bad_sizes():
    with pytest.raises(ValueError):
        resize_frame(np.zeros((3, 4, 4)), 0)
    with pytest.raises(ValueError):
        resize_frame(np.zeros((3, 0, 4)), 4)


# --- augment --------------------------------------------------------------------------


def _seq(frames):
    return FrameSequence(np.asarray(frames, dtype=np.float32), "v", 0, 1)


def test_flip_involution():
    seq = _seq(np.random.default_rng(0).random((4, 3, 8, 8)))
    twice = augment(augment(seq, AugmentSpec(flip=True)), AugmentSpec(flip=True))
    assert np.array_equal(twice.frames, seq.frames)


def test_neutral_spec_is_identity():
    seq = _seq(np.random.default_rng(1).random((2, 3, 8, 8)))
    assert np.array_equal(augment(seq, AugmentSpec()).frames, seq.frames)


def test_flip_moves_marker():
    s, x, y = 8, 2, 5
    frames = np.zeros((1, 3, s, s))
    frames[0, :, y, x] = 1.0
    out = augment(_seq(frames), AugmentSpec(flip=True)).frames
    assert np.argwhere(out[0, 0] == 1.0).tolist() == [[y, s - 1 - x]]


def test_augment_spec_validation():
    with pytest.raises(ValueError):
        AugmentSpec(crop_fraction=0.5)
    with pytest.raises(ValueError):
        AugmentSpec(zoom=1.6)


@settings(max_examples=60, deadline=None)
@given(st.booleans(), st.floats(0.51, 1.0), st.floats(1.0, 1.5), st.integers(0, 1000), st.booleans())
def test_augment_temporal_consistency_and_range(flip, crop, zoom, seed, offset):
    rng = np.random.default_rng(seed)
    frames = rng.random((5, 3, 12, 12)).astype(np.float32)
    frames[:, :, 4, 7] = 1.0  # shared marker
    spec = AugmentSpec(flip, crop, zoom, seed, offset)
    out = augment(_seq(frames), spec).frames
    assert out.shape == frames.shape
    assert out.min() >= 0.0 and out.max() <= 1.0
    for t in range(5):
        alone = augment(_seq(frames[t:t + 1]), spec).frames[0]
        assert np.array_equal(out[t], alone)


# --- PPM codec ------------------------------------------------------------------------


def test_ppm_roundtrip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
    write_ppm(tmp_path / "a.ppm", img)
    assert np.array_equal(read_ppm(tmp_path / "a.ppm"), img)


def test_ppm_header_comments_and_maxval():
    payload = bytes([0, 50, 100] * 2)
    img = read_ppm_from(io.BytesIO(b"P6\n# a comment\n2 1\n# another\n100\n" + payload))
    np.testing.assert_array_equal(img[0, 0], [0, 128, 255])


def test_ppm_sixteen_bit():
    raw = np.array([[[0, 32768, 65535]]], dtype=">u2").tobytes()
    img = read_ppm_from(io.BytesIO(b"P6 1 1 65535\n" + raw))
    np.testing.assert_array_equal(img[0, 0], [0, 128, 255])


def test_ppm_errors():
    with pytest.raises(PPMError, match="magic"):
        read_ppm_from(io.BytesIO(b"P3\n1 1\n255\n0 0 0"))
    with pytest.raises(PPMError, match="truncated"):
        read_ppm_from(io.BytesIO(b"P6\n2 2\n255\n\x00\x00"))
    with pytest.raises(PPMError):
        read_ppm_from(io.BytesIO(b"P6\nx 2\n255\n"))


def test_ppm_stream_iteration():
    imgs = [np.full((2, 3, 3), v, dtype=np.uint8) for v in (0, 100, 255)]
    out = list(iter_ppm_stream(io.BytesIO(b"".join(encode_ppm(i) for i in imgs))))
    assert len(out) == 3 and all(np.array_equal(a, b) for a, b in zip(out, imgs))


def test_chw_conversion_range():
    img = np.array([[[0, 128, 255]]], dtype=np.uint8)
    chw = to_chw(img)
    assert chw.shape == (3, 1, 1) and chw.dtype == np.float32
    assert chw.min() == 0.0 and chw.max() == 1.0
    assert np.array_equal(to_hwc_uint8(chw), img)


def test_video_directory_roundtrip(tmp_path):
    frames = [np.full((4, 4, 3), 10 * i, dtype=np.uint8) for i in range(5)]
    meta = VideoMeta("clip", 25.0, 5, "calm")
    write_video(tmp_path / "clip", frames, meta)
    assert read_meta(tmp_path / "clip") == meta
    out = load_frames(tmp_path / "clip", [4, 0, 4])
    assert out.shape == (3, 3, 4, 4)
    assert np.array_equal(out[0], out[2]) and out[1].max() == 0.0


# --- batch generator ------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_set(tmp_path_factory):
    root = tmp_path_factory.mktemp("gen")
    manifest = generate_dataset(root, 16, n_frames=12, side=8, seed=3)
    return split_dataset(manifest, 0.5, seed=0)


def _cfg(**kw):
    return ModelConfig(**{"backbone": "conv3", "frame_size": 8, "seq_len": 4, "batch": 16, **kw})


def test_generator_batch_count(small_set):
    gen = BatchGenerator(small_set, _cfg(), "single_sequence", partition=None)
    batches = list(gen)
    assert len(gen) == 2 and [x.shape[0] for x, _, _ in batches] == [16, 16]
    x, y, refs = batches[0]
    assert x.shape == (16, 4, 3, 8, 8) and x.dtype == np.float32
    assert x.min() >= 0 and x.max() <= 1


def test_generator_determinism(small_set):
    def run(seed):
        gen = BatchGenerator(small_set, _cfg(batch=5), "single_sequence", "train", seed=seed, epoch=2, augment=True)
        return [(x.tobytes(), y.tobytes(), [r.video_id for r in refs]) for x, y, refs in gen]

    assert run(1) == run(1)
    assert run(1) != run(2)


def test_generator_threaded_equals_inline(small_set):
    cfg = _cfg(batch=3)
    kw = dict(mode="sliding", partition="train", seed=4, epoch=1)
    a = [x.tobytes() for x, _, _ in BatchGenerator(small_set, cfg, threaded=True, **kw)]
    b = [x.tobytes() for x, _, _ in BatchGenerator(small_set, cfg, threaded=False, **kw)]
    assert a == b


def test_generator_bounded_buffer(small_set):
    gen = BatchGenerator(small_set, _cfg(batch=2), "single_sequence", None, buffer_size=2)
    for _ in gen:
        pass
    assert 1 <= gen.max_queued <= 2


def test_generator_skips_unreadable_video(small_set, tmp_path):
    import shutil
    root = tmp_path / "copy"
    shutil.copytree(small_set.root, root)
    broken = small_set.records[0]
    (root / broken.source_path / "frame_000000.ppm").write_bytes(b"junk")
    manifest = type(small_set)(small_set.records, small_set.classes, small_set.split, root)
    gen = BatchGenerator(manifest, _cfg(batch=4), "single_sequence", None)
    n = sum(len(y) for _, y, _ in gen)
    assert n == len(small_set) - 1
    assert [vid for vid, _ in gen.errors] == [broken.id]


def test_generator_empty_partition(small_set):
    with pytest.raises(ValueError):
        BatchGenerator(small_set.with_split({}), _cfg(), "single_sequence", "train")
