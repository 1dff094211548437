"""Residual SIFT keypoint coding for video coding for machines.

The encoder extracts keypoints from an original frame and from its decoded
(compressed) counterpart and sends only the difference; the decoder re-extracts
keypoints from the decoded frame and merges the residual back in.
"""

__version__ = "0.1.0"

from .analysis import (
    FitResult,
    FrameResult,
    RunStats,
    avg_transmitted_params_per_keypoint,
    fit_l_vs_qp,
    loss_count,
    summarize_run,
)
from .bitstream import deserialize, serialize
from .correspondence import (
    Category,
    MatchConfig,
    MatchReport,
    Param,
    SameRule,
    categorize,
    match_sets,
    param_deltas,
    unchanged_param_histogram,
)
from .degrade import DegradeParams, SequenceSource, degrade_frame, load_external_sequence
from .residual import (
    CodecConfig,
    Correction,
    ResidualFrame,
    ResidualStream,
    StreamHeader,
    ToleranceMode,
    decode_merge,
    encode_residual,
    side_info_ratio,
)
from .sift import Image, Keypoint, KeypointSet, SiftParams, extract_keypoints, image_psnr
