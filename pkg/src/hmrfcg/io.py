"""Image and label file formats.

2D data uses binary PGM (``P5``, maxval <= 255).  3D data uses a raw volume::

    HMRFVOL <dx> <dy> <dz> <sx> <sy> <sz>\\n
    <dx*dy*dz bytes, x fastest, then y, then z>

Label images store class ``j`` of ``K`` as gray ``floor(255*(j-1)/(K-1))``
(0 when K = 1), with a ``<path>.classes`` sidecar listing ``gray class``
pairs so the mapping can be inverted.
"""

from __future__ import annotations

import os
import re
from pathlib import Path

import numpy as np

from .grid import LatticeShape
from .model import ImageVolume, Labeling

__all__ = [
    "FormatError",
    "load_image",
    "save_image",
    "save_labeling",
    "load_labeling",
    "label_gray_levels",
    "sidecar_path",
]

VOLUME_MAGIC = b"HMRFVOL"


class FormatError(ValueError):
    """Malformed image file; ``offset`` is the byte position where parsing failed."""

    def __init__(self, path, offset: int, message: str):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{path}: byte {offset}: {message}")


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _pgm_header(data: bytes, path):
    pos = 2
    fields = []
    for _ in range(3):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError(path, pos, "truncated PGM header")
        tok = m.group(1)
        if not tok.isdigit():
            raise FormatError(path, m.start(1), f"expected an integer, got {tok[:16]!r}")
        fields.append(int(tok))
        pos = m.end(1)
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise FormatError(path, pos, "missing whitespace after PGM header")
    return fields, pos + 1


def _read_pgm(data: bytes, path) -> ImageVolume:
    (width, height, maxval), start = _pgm_header(data, path)
    if width <= 0 or height <= 0:
        raise FormatError(path, 2, f"image dimensions must be positive, got {width}x{height}")
    if not 0 < maxval <= 255:
        raise FormatError(path, start - 1, f"only 8-bit PGM is supported (maxval {maxval})")
    n = width * height
    payload = data[start:start + n]
    if len(payload) < n:
        raise FormatError(path, start + len(payload), f"truncated payload: expected {n} bytes, got {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    if pixels.max(initial=0) > maxval:
        raise FormatError(path, start + int(np.argmax(pixels.ravel() > maxval)), "pixel exceeds maxval")
    return ImageVolume(LatticeShape((height, width)), pixels.astype(np.float64))


def _read_volume(data: bytes, path) -> ImageVolume:
    end = data.find(b"\n")
    if end < 0:
        raise FormatError(path, len(data), "unterminated HMRFVOL header")
    parts = data[:end].split()
    if len(parts) != 7:
        raise FormatError(path, 0, f"HMRFVOL header needs 6 fields, got {len(parts) - 1}")
    try:
        dx, dy, dz = (int(p) for p in parts[1:4])
        sx, sy, sz = (float(p) for p in parts[4:7])
    except ValueError:
        raise FormatError(path, 0, "non-numeric HMRFVOL header field") from None
    if min(dx, dy, dz) <= 0:
        raise FormatError(path, 0, f"volume dims must be positive, got {dx} {dy} {dz}")
    if not min(sx, sy, sz) > 0:
        raise FormatError(path, 0, "voxel spacing must be positive")
    n = dx * dy * dz
    start = end + 1
    payload = data[start:start + n]
    if len(payload) < n:
        raise FormatError(path, start + len(payload), f"truncated payload: expected {n} bytes, got {len(payload)}")
    voxels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    return ImageVolume(LatticeShape((dz, dy, dx), (sz, sy, sx)), voxels)


def load_image(path) -> ImageVolume:
    """Read a P5 PGM or HMRFVOL file.

    Raises
    ------
    FormatError
        Bad magic number, malformed header, non-positive dims or short payload.
    OSError
        The file cannot be read.
    """
    data = Path(path).read_bytes()
    if data.startswith(b"P5"):
        return _read_pgm(data, path)
    if data.startswith(VOLUME_MAGIC):
        return _read_volume(data, path)
    raise FormatError(path, 0, f"unrecognized magic number {data[:8]!r}")


def _encode(shape: LatticeShape, values: np.ndarray) -> bytes:
    payload = np.asarray(values, dtype=np.uint8).tobytes()
    if shape.ndim == 2:
        height, width = shape.dims
        return b"P5\n%d %d\n255\n" % (width, height) + payload
    dz, dy, dx = shape.dims
    sz, sy, sx = shape.spacing
    header = f"HMRFVOL {dx} {dy} {dz} {sx!r} {sy!r} {sz!r}\n".encode()
    return header + payload


def _write(path, blob: bytes):
    with open(path, "wb") as fh:
        fh.write(blob)


def save_image(image: ImageVolume, path):
    """Write intensities rounded to whole gray levels (PGM for 2D, HMRFVOL for 3D)."""
    values = np.clip(np.rint(image.intensities), 0, 255)
    _write(path, _encode(image.shape, values))


def label_gray_levels(num_classes: int) -> np.ndarray:
    """Gray value for each class 1..K."""
    if not 1 <= num_classes <= 256:
        raise ValueError(f"label files hold at most 256 classes, got {num_classes}")
    if num_classes == 1:
        return np.zeros(1, dtype=np.int64)
    j = np.arange(num_classes)
    return (255 * j) // (num_classes - 1)


def sidecar_path(path) -> str:
    return os.fspath(path) + ".classes"


def save_labeling(labeling: Labeling, path):
    """Write a label image plus its ``.classes`` sidecar."""
    grays = label_gray_levels(labeling.num_classes)
    _write(path, _encode(labeling.shape, grays[labeling.labels - 1]))
    lines = ["# gray class"] + [f"{g} {j}" for j, g in enumerate(grays.tolist(), start=1)]
    with open(sidecar_path(path), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_sidecar(path) -> dict:
    mapping = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                gray, cls = (int(v) for v in line.split())
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'gray class'") from None
            mapping[gray] = cls
    return mapping


def load_labeling(path, num_classes: int | None = None) -> Labeling:
    """Read a label image.

    With a ``.classes`` sidecar the gray values are mapped back to class
    indices.  Without one, byte values are taken as class indices directly.
    """
    image = load_image(path)
    values = image.intensities.astype(np.int64)
    side = sidecar_path(path)
    if os.path.exists(side):
        mapping = _read_sidecar(side)
        lut = np.zeros(256, dtype=np.int64)
        for gray, cls in mapping.items():
            lut[gray] = cls
        labels = lut[values]
        if np.any(labels == 0):
            bad = int(np.argmax(labels == 0))
            raise ValueError(f"{path}: site {bad} has gray value {values[bad]} missing from {side}")
        k = max(mapping.values()) if num_classes is None else num_classes
    else:
        labels = values
        if labels.min() < 1:
            raise ValueError(f"{path}: class indices must be >= 1 when no sidecar is present")
        k = int(labels.max()) if num_classes is None else num_classes
    return Labeling(image.shape, labels, k)
