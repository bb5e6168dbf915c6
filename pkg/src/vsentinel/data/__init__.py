from .manifest import DatasetManifest, ManifestError, ingest_manifest, split_dataset, write_manifest
from .synth import MotionEnergyClassifier, SynthSpec, generate_dataset, generate_synthetic_video, motion_energy, render_synthetic

__all__ = [
    "DatasetManifest", "ManifestError", "MotionEnergyClassifier", "SynthSpec", "generate_dataset",
    "generate_synthetic_video", "ingest_manifest", "motion_energy", "render_synthetic", "split_dataset",
    "write_manifest",
]
