"""DWnet: deep-wide 3D skeleton action recognition.

A hierarchical co-occurrence CNN (HCN) is trained with momentum SGD, its
classifier tail is pruned off (PruHCN), and the remaining deep feature
extractor feeds a broad learning system head: random tansig enhancement
nodes plus a ridge-regression output layer. Baselines (plain HCN, a flat
BLS over raw coordinates, and an ensemble of untrained mappers) and a
cross-validation harness with published reference tables are included.
"""

from . import fixtures, nn
from .fixtures import reference_diff
from .bls import (
    BlsConfig,
    BlsHead,
    FlatBlsConfig,
    FlatBlsModel,
    bls_fit,
    bls_predict,
    bls_scores,
    enhance,
    flat_bls_fit,
    flat_bls_predict,
    flatten_clips,
    gen_enhancement_params,
    load_flat,
    load_head,
    one_hot,
    ridge_fit,
    save_flat,
    save_head,
    tansig,
)
from .cli import main
from .data import (
    ClipTensors,
    DatasetManifest,
    FoldSplit,
    ManifestEntry,
    NTU_CLIP_SIZE,
    SBU_CLIP_SIZE,
    SkeletonSequence,
    SynthConfig,
    compute_motion,
    encode_batch,
    encode_clip,
    kfold_splits,
    load_sbu_dir,
    manifest_from_sequences,
    parse_jsonl,
    parse_sbu,
    random_crop,
    resample,
    stack_clips,
    synth_generate,
    write_jsonl,
    write_sbu,
)
from .estimators import (
    BlsClassifier,
    DwnetClassifier,
    FlatBlsClassifier,
    HcnClassifier,
    HcnblsClassifier,
    PruHcnFeatures,
)
from .evaluate import (
    EvalReport,
    MODEL_KINDS,
    ModelRunner,
    SweepReport,
    TimingReport,
    confusion_matrix,
    dwnet_fold_features,
    load_schema,
    make_runner,
    normalize_confusion,
    run_cv,
    strip_wallclock,
    sweep_enhancement,
    time_inference,
    validate_report,
)
from .hcn import (
    HcnConfig,
    HcnModel,
    PruHcn,
    assign_params,
    build_hcn,
    config_hash,
    evaluate_accuracy,
    forward_batch,
    hcn_forward,
    hcn_train,
    load_hcn,
    named_params,
    prune,
    pruhcn_features,
    save_hcn,
    weights_hash,
)
from .models import (
    DwnetModel,
    HcnblsModel,
    StageError,
    dwnet_fit,
    dwnet_predict,
    hcnbls_features,
    hcnbls_fit,
    hcnbls_predict,
    load_dwnet,
    load_hcnbls,
    save_dwnet,
    save_hcnbls,
)

__version__ = "0.1.0"

__all__ = [
    "BlsClassifier",
    "BlsConfig",
    "BlsHead",
    "ClipTensors",
    "DatasetManifest",
    "DwnetClassifier",
    "DwnetModel",
    "EvalReport",
    "FlatBlsClassifier",
    "FlatBlsConfig",
    "FlatBlsModel",
    "FoldSplit",
    "HcnClassifier",
    "HcnConfig",
    "HcnModel",
    "HcnblsClassifier",
    "HcnblsModel",
    "MODEL_KINDS",
    "ManifestEntry",
    "ModelRunner",
    "NTU_CLIP_SIZE",
    "PruHcn",
    "PruHcnFeatures",
    "SBU_CLIP_SIZE",
    "SkeletonSequence",
    "StageError",
    "SweepReport",
    "SynthConfig",
    "TimingReport",
    "assign_params",
    "bls_fit",
    "bls_predict",
    "bls_scores",
    "build_hcn",
    "compute_motion",
    "config_hash",
    "confusion_matrix",
    "dwnet_fit",
    "dwnet_fold_features",
    "dwnet_predict",
    "encode_batch",
    "encode_clip",
    "enhance",
    "evaluate_accuracy",
    "fixtures",
    "reference_diff",
    "flat_bls_fit",
    "flat_bls_predict",
    "flatten_clips",
    "forward_batch",
    "gen_enhancement_params",
    "hcn_forward",
    "hcn_train",
    "hcnbls_features",
    "hcnbls_fit",
    "hcnbls_predict",
    "kfold_splits",
    "load_dwnet",
    "load_flat",
    "load_hcn",
    "load_hcnbls",
    "load_head",
    "load_sbu_dir",
    "load_schema",
    "main",
    "make_runner",
    "manifest_from_sequences",
    "named_params",
    "nn",
    "normalize_confusion",
    "one_hot",
    "parse_jsonl",
    "parse_sbu",
    "prune",
    "pruhcn_features",
    "random_crop",
    "resample",
    "ridge_fit",
    "run_cv",
    "save_dwnet",
    "save_flat",
    "save_hcn",
    "save_hcnbls",
    "save_head",
    "stack_clips",
    "strip_wallclock",
    "sweep_enhancement",
    "synth_generate",
    "tansig",
    "time_inference",
    "validate_report",
    "weights_hash",
    "write_jsonl",
    "write_sbu",
]
