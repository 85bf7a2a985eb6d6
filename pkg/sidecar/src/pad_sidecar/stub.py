"""Canned-response mode for protocol testing without any model.

The stub answers each request with the response stored for the request
image's content hash: ``<sha256-of-image-bytes>.json`` inside the stub
directory, holding a complete ``{"masks": [...]}`` object. Unknown hashes
get an empty mask list.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

__all__ = ["image_key", "write_stub_entry", "StubStore"]


def image_key(image_bytes: bytes) -> str:
    """Content hash of the encoded image bytes carried by a request."""
    return hashlib.sha256(image_bytes).hexdigest()


def write_stub_entry(directory, image_bytes: bytes, response: dict) -> Path:
    """Store a canned response for an image; returns the entry path."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{image_key(image_bytes)}.json"
    path.write_text(json.dumps(response, sort_keys=True), encoding="utf-8")
    return path


class StubStore:
    """Reads canned responses from a stub directory."""

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ValueError(f"stub directory not found: {self.directory}")

    def lookup(self, image_bytes: bytes) -> dict:
        path = self.directory / f"{image_key(image_bytes)}.json"
        if not path.is_file():
            return {"masks": []}
        return json.loads(path.read_text(encoding="utf-8"))
