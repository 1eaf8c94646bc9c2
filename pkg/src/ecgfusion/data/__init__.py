from .io import dataset_from_bytes, dataset_to_bytes, import_csv, read_dataset, write_dataset
from .ops import (
    augment_shift,
    fit_length,
    max_level,
    rotate,
    segment,
    segment_samples,
    segments_per_level,
    split_folds,
)
from .records import Dataset, EcgRecord
from .synth import (
    CATALOG,
    CLASS_NAMES,
    NORMAL_BEAT,
    VENTRICULAR_BEAT,
    BeatTemplate,
    Ectopy,
    NoiseConfig,
    RhythmClass,
    Wave,
    generate_dataset,
    rhythm_class,
    synth_beat,
    synth_record,
)

__all__ = [
    "EcgRecord", "Dataset", "Wave", "BeatTemplate", "Ectopy", "RhythmClass", "NoiseConfig",
    "NORMAL_BEAT", "VENTRICULAR_BEAT", "CATALOG", "CLASS_NAMES", "rhythm_class",
    "synth_beat", "synth_record", "generate_dataset",
    "rotate", "augment_shift", "segment", "segment_samples", "segments_per_level", "max_level",
    "fit_length", "split_folds",
    "write_dataset", "read_dataset", "dataset_to_bytes", "dataset_from_bytes", "import_csv",
]
