"""Random forest classification with OOB estimation, casewise importance,
memory-bounded proximity backends, and factor-space MDS embeddings."""

__version__ = "0.1.0"

from .dataset import ColumnKind, Dataset, from_arrays, load_csv, read_schema
from .errors import BudgetError, DataError, RfxError
from .forest import (
    BootstrapRecord,
    Forest,
    OobReport,
    TrainConfig,
    Tree,
    best_garside_split,
    best_threshold_split,
    bootstrap_sample,
    classify,
    classify_all,
    gini,
    grow_tree,
    load_forest,
    oob_report,
    save_forest,
    train,
)

__all__ = [
    "BootstrapRecord",
    "BudgetError",
    "ColumnKind",
    "DataError",
    "Dataset",
    "Forest",
    "OobReport",
    "RfxError",
    "TrainConfig",
    "Tree",
    "best_garside_split",
    "best_threshold_split",
    "bootstrap_sample",
    "classify",
    "classify_all",
    "from_arrays",
    "gini",
    "grow_tree",
    "load_csv",
    "load_forest",
    "oob_report",
    "read_schema",
    "save_forest",
    "train",
]
