from src.data.dataset import Dataset, Sample, iterate_batches, one_hot
from src.data.storage import (
    dataset_split,
    datasets_from_config,
    disjoint_synthetic,
    load_dataset,
    load_splits,
    save_dataset,
)
from src.data.synthetic import generate_splits, generate_synthetic
from src.data.transforms import (
    CORRUPTION_GRID,
    CORRUPTION_LEVELS,
    DEFORMATION_GRID,
    apply_transform,
    corrupt,
    deform,
    standard_augment,
)

__all__ = [
    "Dataset",
    "Sample",
    "iterate_batches",
    "one_hot",
    "dataset_split",
    "datasets_from_config",
    "disjoint_synthetic",
    "load_dataset",
    "load_splits",
    "save_dataset",
    "generate_splits",
    "generate_synthetic",
    "CORRUPTION_GRID",
    "CORRUPTION_LEVELS",
    "DEFORMATION_GRID",
    "apply_transform",
    "corrupt",
    "deform",
    "standard_augment",
]
