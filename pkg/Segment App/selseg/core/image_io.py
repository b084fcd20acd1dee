"""Reading and writing greyscale images and marker files.

PGM (P2 and P5, 8 or 16 bit) is handled natively; PNG input goes through
Pillow when it is installed.
"""

from __future__ import annotations

import logging
import pickle
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, ParameterError
from .grid import Field2D, FieldLike, _as_array
from .model import MarkerSet

logger = logging.getLogger("selseg")

_WHITESPACE = b" \t\r\n\v\f"
_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _header_tokens(data: bytes, count: int, pos: int) -> tuple[list[tuple[int, int]], int]:
    """Read ``count`` integers after the magic number, skipping comments.

    Returns ``(value, offset)`` pairs and the position right after the last
    token.
    """
    tokens: list[tuple[int, int]] = []
    size = len(data)
    while len(tokens) < count:
        while pos < size and data[pos] in _WHITESPACE:
            pos += 1
        if pos >= size:
            raise FormatError("unexpected end of header", offset=pos)
        if data[pos] == ord("#"):
            while pos < size and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < size and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        word = data[start:pos]
        if not word.isdigit():
            raise FormatError(f"expected an integer, got {word[:16]!r}", offset=start)
        tokens.append((int(word), start))
    return tokens, pos


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode a P2/P5 file into a row-major array normalised to ``[0, 1]``."""
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"unsupported magic number {magic!r}", offset=0)
    if len(data) < 3 or data[2] not in _WHITESPACE:
        raise FormatError("missing whitespace after magic number", offset=2)
    tokens, pos = _header_tokens(data, 3, 2)
    (width, w_at), (height, h_at), (maxval, v_at) = tokens
    if width < 1:
        raise FormatError("width must be positive", offset=w_at)
    if height < 1:
        raise FormatError("height must be positive", offset=h_at)
    if not 0 < maxval < 65536:
        raise FormatError(f"maxval {maxval} outside 1..65535", offset=v_at)
    count = width * height

    if magic == b"P5":
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise FormatError("missing whitespace before raster", offset=pos)
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        needed = count * dtype.itemsize
        if len(data) - pos < needed:
            raise FormatError(f"truncated raster: {needed} bytes expected, "
                              f"{len(data) - pos} present", offset=len(data))
        samples = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(float)
        bad = np.flatnonzero(samples > maxval)
        if bad.size:
            raise FormatError(f"sample exceeds maxval {maxval}",
                              offset=pos + int(bad[0]) * dtype.itemsize)
    else:
        words = data[pos:].split()
        if len(words) < count:
            raise FormatError(f"truncated raster: {count} samples expected, {len(words)} present",
                              offset=len(data))
        try:
            samples = np.array([int(w) for w in words[:count]], dtype=float)
        except ValueError:
            raise FormatError("non-numeric sample in ASCII raster", offset=pos) from None
        if np.any(samples > maxval):
            raise FormatError(f"sample exceeds maxval {maxval}", offset=pos)
    return samples.reshape(height, width) / maxval


def _load_png(path: Path) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise FormatError("PNG input needs Pillow (pip install selective-mg[png])") from exc
    with Image.open(path) as img:
        if img.mode in ("I;16", "I;16B", "I"):
            values = np.asarray(img, dtype=float) / 65535.0
        else:
            values = np.asarray(img.convert("L"), dtype=float) / 255.0
    return values


def load_image(path: str | Path) -> Field2D:
    """Read a greyscale image as a field with intensities in ``[0, 1]``."""
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(_PNG_SIGNATURE):
        image = _load_png(path)
    else:
        image = decode_pgm(data)
    logger.debug("Loaded %s: %dx%d", path, image.shape[1], image.shape[0])
    return Field2D.from_image(image)


def encode_pgm(field_: FieldLike, maxval: int = 255, *, ascii: bool = False) -> bytes:
    """Encode field values in ``[0, 1]`` (indexed ``[i, j]``) as a PGM file."""
    if not 0 < maxval < 65536:
        raise ParameterError(f"maxval must be in 1..65535, got {maxval}")
    image = np.asarray(_as_array(field_), dtype=float).T
    height, width = image.shape
    samples = np.rint(np.clip(image, 0.0, 1.0) * maxval).astype(np.int64)
    if ascii:
        body = "\n".join(" ".join(str(v) for v in row) for row in samples)
        return f"P2\n{width} {height}\n{maxval}\n{body}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    return header + samples.astype(dtype).tobytes()


def save_pgm(path: str | Path, field_: FieldLike, maxval: int = 255, *,
             ascii: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_pgm(field_, maxval, ascii=ascii))
    logger.debug("Wrote %s", path)
    return path


def parse_markers(text: str, n: int | None = None, m: int | None = None) -> MarkerSet:
    """Parse ``x y`` integer pairs, one per line; ``#`` starts a comment."""
    points = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParameterError(f"line {lineno}: expected 'x y', got {raw.strip()!r}")
        try:
            x, y = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParameterError(f"line {lineno}: marker coordinates must be integers") from None
        if n is not None and m is not None and not (0 <= x < n and 0 <= y < m):
            raise ParameterError(f"line {lineno}: marker ({x}, {y}) outside the {n}x{m} image")
        points.append((x, y))
    return MarkerSet(points)


def load_markers(path: str | Path, n: int | None = None, m: int | None = None) -> MarkerSet:
    """Read a marker file; with ``n`` and ``m`` every point is bounds-checked."""
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParameterError(f"{path}: marker file is not UTF-8 text (byte {exc.start})") from None
    markers = parse_markers(text, n, m)
    logger.debug("Loaded %d markers from %s", len(markers), path)
    return markers


def save_markers(path: str | Path, markers: MarkerSet) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{int(round(x))} {int(round(y))}" for x, y in markers.points]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_level_set(path: str | Path, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Read a level set saved with :func:`numpy.save`.

    Raises
    ------
    FormatError
        If the file is not a plain numeric ``.npy`` array.
    DimensionError
        If the array is not 2-D or does not match ``shape``.
    """
    path = Path(path)
    try:
        values = np.load(path, allow_pickle=False)
    except (ValueError, EOFError, pickle.UnpicklingError) as exc:
        raise FormatError(f"{path}: not a numeric .npy array ({exc})") from None
    if not isinstance(values, np.ndarray) or values.dtype.kind not in "biuf":
        raise FormatError(f"{path}: not a numeric .npy array")
    values = values.astype(float)
    if values.ndim != 2 or (shape is not None and values.shape != tuple(shape)):
        expected = "2-D" if shape is None else f"{shape[0]}x{shape[1]}"
        raise DimensionError(f"level set shape {values.shape} does not match {expected}")
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: level set contains non-finite values")
    return values
