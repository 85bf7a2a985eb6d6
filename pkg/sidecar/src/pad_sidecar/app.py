"""HTTP service implementing the region-provider wire protocol.

Routes:
  POST /segment  body {"width": W, "height": H, "image_b64": "<base64 PNG>"}
                 reply {"masks": [{"rle": [[start, len], ...]}, ...]}
  GET  /healthz  "ok"

Malformed requests answer 400, images beyond the pixel limit 413, and
segmentation failures 500. Responses never carry masks of a size other
than the request's width and height.
"""

from __future__ import annotations

import base64
import binascii
import io

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from PIL import Image

from .rle import encode_mask
from .segmenter import builtin_segment
from .stub import StubStore

__all__ = ["create_app"]

DEFAULT_MAX_PIXELS = 4_000_000


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)


def create_app(
    model: str = "builtin",
    stub_dir=None,
    max_pixels: int = DEFAULT_MAX_PIXELS,
) -> FastAPI:
    """Build the service. ``stub_dir`` switches to canned-response mode."""
    if model != "builtin":
        raise ValueError(
            f"unknown model {model!r}; 'builtin' is the only bundled segmenter"
        )
    stub = StubStore(stub_dir) if stub_dir is not None else None
    app = FastAPI(title="pad-sidecar", docs_url=None, redoc_url=None)

    @app.get("/healthz")
    async def healthz() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.post("/segment")
    async def segment(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body must be a JSON object")
        if not isinstance(body, dict):
            return _bad_request("body must be a JSON object")
        width = body.get("width")
        height = body.get("height")
        image_b64 = body.get("image_b64")
        if not isinstance(width, int) or not isinstance(height, int) \
                or isinstance(width, bool) or isinstance(height, bool):
            return _bad_request("width and height must be integers")
        if width < 1 or height < 1:
            return _bad_request("width and height must be positive")
        if not isinstance(image_b64, str):
            return _bad_request("image_b64 must be a base64 string")
        if width * height > max_pixels:
            return JSONResponse(
                {"error": f"image exceeds the {max_pixels}-pixel limit"},
                status_code=413,
            )
        try:
            image_bytes = base64.b64decode(image_b64, validate=True)
        except (binascii.Error, ValueError):
            return _bad_request("image_b64 is not valid base64")

        if stub is not None:
            return JSONResponse(stub.lookup(image_bytes))

        try:
            with Image.open(io.BytesIO(image_bytes)) as im:
                pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except Exception:
            return _bad_request("image_b64 does not decode to an image")
        if pixels.shape[0] != height or pixels.shape[1] != width:
            return _bad_request(
                f"declared size {width}x{height} does not match "
                f"image {pixels.shape[1]}x{pixels.shape[0]}"
            )
        try:
            masks = builtin_segment(pixels)
            payload = {"masks": [{"rle": encode_mask(m)} for m in masks]}
        except Exception:  # model failure, keep the service alive
            return JSONResponse({"error": "segmentation failed"}, status_code=500)
        return JSONResponse(payload)

    return app
