from .crosscorr import summarize_crosscorr, summarize_crosscorr_diff
from .engine import summarize, summarize_batch
from .signature import chen_product, flatten_signature, segment_signature, signature_levels, summarize_signature
from .snippets import summarize_start, summarize_waypoints
from .spec import SUMMARIZER_KINDS, SummarizerMismatchError, SummarizerSpec, canonical_kind, summary_dim

__all__ = [
    "SUMMARIZER_KINDS",
    "SummarizerMismatchError",
    "SummarizerSpec",
    "canonical_kind",
    "chen_product",
    "flatten_signature",
    "segment_signature",
    "signature_levels",
    "summarize",
    "summarize_batch",
    "summarize_crosscorr",
    "summarize_crosscorr_diff",
    "summarize_signature",
    "summarize_start",
    "summarize_waypoints",
    "summary_dim",
]
