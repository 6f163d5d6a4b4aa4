"""One-stage spine keypoint localization and classification."""

from ._spineone import (  # noqa: F401
    SpineOneError,
    __version__,
    config_hash,
    default_config,
    encode_targets,
    evaluate,
    focal_loss,
    hough_vote,
    infer,
    micro_ap_score,
    pck,
    phantom_exam,
    select_top_keypoints,
    train,
    write_phantom_dataset,
)
