"""Segmentation sidecar for the patch-defense toolkit.

Serves region masks over HTTP in the run-length wire format, either from
the builtin training-free segmenter or from canned stub responses.
"""

from .app import DEFAULT_MAX_PIXELS, create_app
from .rle import decode_mask, encode_mask
from .segmenter import builtin_segment
from .stub import StubStore, image_key, write_stub_entry

__version__ = "0.1.0"
