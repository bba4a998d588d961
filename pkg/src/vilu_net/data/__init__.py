"""Volume I/O, preprocessing, manifests and the synthetic dataset generator."""

from .manifest import (
    IMAGE_DIR,
    LABEL_DIR,
    MANIFEST_NAME,
    ManifestEntry,
    assign_split,
    discover_cases,
    load_entries,
    load_sample,
    load_samples,
    read_manifest,
    write_manifest,
)
from .nrrd import NrrdHeader, read_label_nrrd, read_nrrd, read_nrrd_array, write_nrrd
from .preprocess import (
    CLIP_HIGH,
    CLIP_LOW,
    DEFAULT_SPACING,
    EXCLUDED_NAME,
    Exclusion,
    PreprocessResult,
    canonicalize_orientation,
    clip_normalize,
    output_extents,
    preprocess_case,
    preprocess_directory,
    resample_array,
    respace,
    respace_labels,
)
from .synth import SynthConfig, synth_case, synth_dataset, write_dataset
from .types import SPLITS, LabelMap, Sample, Volume

__all__ = [
    "CLIP_HIGH",
    "CLIP_LOW",
    "DEFAULT_SPACING",
    "EXCLUDED_NAME",
    "IMAGE_DIR",
    "LABEL_DIR",
    "MANIFEST_NAME",
    "SPLITS",
    "Exclusion",
    "LabelMap",
    "ManifestEntry",
    "NrrdHeader",
    "PreprocessResult",
    "Sample",
    "SynthConfig",
    "Volume",
    "assign_split",
    "canonicalize_orientation",
    "clip_normalize",
    "discover_cases",
    "load_entries",
    "load_sample",
    "load_samples",
    "output_extents",
    "preprocess_case",
    "preprocess_directory",
    "read_label_nrrd",
    "read_manifest",
    "read_nrrd",
    "read_nrrd_array",
    "resample_array",
    "respace",
    "respace_labels",
    "synth_case",
    "synth_dataset",
    "write_dataset",
    "write_manifest",
    "write_nrrd",
]
