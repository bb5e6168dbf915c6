from .frames import PPMError, VideoMeta, iter_ppm_stream, load_frames, read_ppm, write_ppm, write_video
from .generator import BatchGenerator, SequenceRef, batch_generator, load_sequence, plan_sequences
from .sampling import compute_step, sample_whole_video, sliding_starts, window_indices
from .transforms import AugmentSpec, FrameSequence, augment, resize_frame

__all__ = [
    "AugmentSpec", "BatchGenerator", "FrameSequence", "PPMError", "SequenceRef", "VideoMeta", "augment",
    "batch_generator", "compute_step", "iter_ppm_stream", "load_frames", "load_sequence", "plan_sequences",
    "read_ppm", "resize_frame", "sample_whole_video", "sliding_starts", "window_indices", "write_ppm",
    "write_video",
]
