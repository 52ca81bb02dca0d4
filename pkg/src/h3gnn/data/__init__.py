from .loaders import IntegrityError, ParseError, load_actor, load_planetoid, load_webkb, row_normalize
from .convert import convert_planetoid, read_planetoid_pickles, write_plain_text
from .manifest import (
    DATASETS,
    DatasetInfo,
    build_manifest,
    check_stats,
    dataset_info,
    load_checked,
    load_dataset,
    read_manifest,
    verify_checksums,
    write_manifest,
)
from .splits import SplitSpec, make_splits, per_class_split, standard_splits
from .synth import random_split, synth_graph
