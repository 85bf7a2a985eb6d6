"""Run-length coding of binary masks over their row-major flattening.

Wire format: a mask is ``[[start, length], ...]`` with starts ascending
and runs non-overlapping, indexing set pixels of the flattened mask.
"""

from __future__ import annotations

import numpy as np

__all__ = ["encode_mask", "decode_mask"]


def encode_mask(bits: np.ndarray) -> list[list[int]]:
    """Encode a 2-d boolean array into sorted, non-overlapping runs."""
    flat = np.asarray(bits, dtype=bool).ravel()
    if flat.size == 0:
        return []
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    boundaries = np.concatenate(([0], changes, [flat.size]))
    runs = []
    for start, end in zip(boundaries[:-1], boundaries[1:]):
        if flat[start]:
            runs.append([int(start), int(end - start)])
    return runs


def decode_mask(runs, width: int, height: int) -> np.ndarray:
    """Decode runs into a (height, width) boolean array.

    Raises ValueError for malformed, unsorted, overlapping, or
    out-of-range runs.
    """
    total = width * height
    flat = np.zeros(total, dtype=bool)
    prev_end = 0
    for run in runs:
        try:
            start, length = int(run[0]), int(run[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise ValueError(f"malformed run {run!r}") from exc
        if start < 0 or length < 1:
            raise ValueError(f"invalid run {run!r}")
        if start < prev_end:
            raise ValueError("runs must be sorted and non-overlapping")
        if start + length > total:
            raise ValueError(f"run {run!r} exceeds {width}x{height} mask")
        flat[start : start + length] = True
        prev_end = start + length
    return flat.reshape(height, width)
