"""Bottleneck text adapter, confidence-weighted TTA and class-aware metrics."""

from ._camadapt import (
    AdapterParams,
    ConfigError,
    DataError,
    DomainError,
    EmbeddingRecord,
    Error,
    FormatError,
    IoError,
    PromptTable,
    ShapeError,
    UsageError,
    backward,
    batch_loss_and_grad,
    class_aware_report,
    class_logits,
    classify,
    classify_frozen,
    cosine_logits,
    cross_entropy,
    e_measure,
    encode_pgm,
    evaluate_accuracy,
    f_beta,
    f_weighted_beta,
    file_digest,
    forward,
    gradcheck,
    iou,
    lai_init,
    load_checkpoint,
    load_embeddings,
    load_gt_mask,
    load_mask,
    load_prompts,
    mae,
    param_count,
    parse_pgm,
    prompt_for_class,
    run_cli,
    s_measure,
    save_checkpoint,
    save_embeddings,
    save_mask,
    save_prompts,
    segmentation_metrics,
    softmax,
    standard_init,
    synth_generate,
    train,
    tta_aggregate,
    wide_bottleneck,
)

__version__ = "0.1.0"
