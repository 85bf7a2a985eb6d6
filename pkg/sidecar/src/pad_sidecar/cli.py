"""Service launcher: ``pad-sidecar --port 8765`` (add ``--stub DIR`` for
canned-response mode)."""

from __future__ import annotations

import argparse

import uvicorn

from .app import DEFAULT_MAX_PIXELS, create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pad-sidecar",
        description="Segmentation sidecar speaking the region-provider protocol.",
    )
    parser.add_argument("--port", type=int, default=8765, help="listen port")
    parser.add_argument("--host", default="127.0.0.1", help="bind address")
    parser.add_argument("--model", default="builtin",
                        help="segmenter to serve (builtin: palette + components)")
    parser.add_argument("--stub", default=None, metavar="DIR",
                        help="serve canned responses from DIR instead of a model")
    parser.add_argument("--max-pixels", type=int, default=DEFAULT_MAX_PIXELS,
                        help="reject requests larger than this many pixels (413)")
    return parser


def serve(model: str, port: int, host: str = "127.0.0.1",
          stub_dir=None, max_pixels: int = DEFAULT_MAX_PIXELS) -> None:
    """Run the service until interrupted."""
    app = create_app(model=model, stub_dir=stub_dir, max_pixels=max_pixels)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        serve(args.model, args.port, host=args.host,
              stub_dir=args.stub, max_pixels=args.max_pixels)
    except ValueError as exc:
        print(f"error: {exc}")
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
