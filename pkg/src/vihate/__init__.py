"""Non-neural machinery for Vietnamese hate-speech detection with text-to-text models."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AlignmentFailure,
    DataError,
    InvalidSpan,
    LabelTaskMismatch,
    OddTagCount,
    RemoteUnavailable,
)
from .normalize import NormalizeConfig, RawComment, is_effectively_empty, normalize, normalize_text  # noqa: E402
from .spans import (  # noqa: E402
    decode_tags,
    encode_tags,
    iob_to_spans,
    mask_to_spans,
    recover_spans,
    spans_to_iob,
    spans_to_mask,
)
from .tasks import (  # noqa: E402
    BinaryLabel,
    HateLabel,
    Task,
    ToxicLabel,
    collapse_to_binary,
    decode_prediction,
    encode_source,
    encode_target,
)
