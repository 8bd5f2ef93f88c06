"""Python bindings for the semlink C++ core."""

from ._semlink import (
    BaselineModel,
    Classifier,
    DetBox,
    FusionModel,
    KnowledgeBase,
    NtlModel,
    NtlRelationParams,
    SemlinkError,
    Triple,
    WordVectorTable,
    build_baseline,
    build_fusion,
    cross_entropy,
    embed_entity,
    embed_entity_set,
    entities_from_boxes,
    grad_check,
    hits_at_n,
    iou,
    kfold_indices,
    nms,
    ntl_gradients,
    ntl_score,
    ntl_score_vector,
    read_detections,
    run_cli,
    softmax,
    split_kb,
    train_ntl,
)

__all__ = [
    "BaselineModel",
    "Classifier",
    "DetBox",
    "FusionModel",
    "KnowledgeBase",
    "NtlModel",
    "NtlRelationParams",
    "SemlinkError",
    "Triple",
    "WordVectorTable",
    "build_baseline",
    "build_fusion",
    "cross_entropy",
    "embed_entity",
    "embed_entity_set",
    "entities_from_boxes",
    "grad_check",
    "hits_at_n",
    "iou",
    "kfold_indices",
    "nms",
    "ntl_gradients",
    "ntl_score",
    "ntl_score_vector",
    "read_detections",
    "run_cli",
    "softmax",
    "split_kb",
    "train_ntl",
]
