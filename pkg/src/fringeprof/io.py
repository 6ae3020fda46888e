"""Raster and point-cloud file I/O.

Three formats are supported:

* binary PGM (``P5``) with 8- or 16-bit samples, intensities normalized to
  ``[0, 1]`` on read;
* ``FRF``, a minimal float raster: the ASCII line ``"FRF <width> <height>\\n"``
  followed by ``width * height`` little-endian float32 values, row-major. NaN
  is allowed and marks invalid pixels;
* ASCII PLY 1.0 point clouds (vertices only).

Rasters are plain 2-D numpy arrays of shape ``(height, width)``.
"""

import logging
import re
from pathlib import Path

import numpy as np

from ._validation import check_raster

logger = logging.getLogger(__name__)

__all__ = [
    "RasterFormatError",
    "RasterRangeError",
    "read_pgm",
    "write_pgm",
    "read_raster",
    "write_raster",
    "write_ply",
    "read_ply",
]


class RasterFormatError(ValueError):
    """Malformed or truncated raster file."""


class RasterRangeError(ValueError):
    """A value cannot be represented in the requested format."""

    def __init__(self, message, x=None, y=None):
        super().__init__(message)
        self.x = x
        self.y = y


_WS = b" \t\n\r\v\f"


def _pgm_token(data, pos):
    """Read one whitespace-delimited header token, skipping ``#`` comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in (b" ", b"\t", b"\n", b"\r", b"\v", b"\f"):
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in _WS and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise RasterFormatError(f"PGM header truncated at byte offset {start}")
    return data[start:pos], start, pos


def read_pgm(path):
    """Read a binary PGM and return values scaled to ``[0, 1]``.

    Parameters
    ----------
    path : str or Path
        File with magic ``P5`` and maxval 255 or 65535.

    Returns
    -------
    ndarray of float64, shape (height, width)
    """
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise RasterFormatError("PGM magic 'P5' not found at byte offset 0")
    pos = 2
    fields = []
    for label in ("width", "height", "maxval"):
        tok, start, pos = _pgm_token(data, pos)
        if not tok.isdigit():
            raise RasterFormatError(f"PGM {label} is not an integer at byte offset {start}")
        fields.append((int(tok), start))
    (width, w_off), (height, h_off), (maxval, m_off) = fields
    if width < 1:
        raise RasterFormatError(f"PGM width must be >= 1 at byte offset {w_off}")
    if height < 1:
        raise RasterFormatError(f"PGM height must be >= 1 at byte offset {h_off}")
    if maxval not in (255, 65535):
        raise RasterFormatError(f"PGM maxval {maxval} unsupported at byte offset {m_off}")
    if pos >= len(data) or data[pos] not in _WS:
        raise RasterFormatError(f"PGM header not terminated by whitespace at byte offset {pos}")
    pos += 1
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    need = width * height * dtype.itemsize
    have = len(data) - pos
    if have < need:
        raise RasterFormatError(
            f"PGM payload truncated at byte offset {pos + have}: expected {need} bytes, found {have}"
        )
    samples = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return samples.reshape(height, width).astype(np.float64) / maxval


def write_pgm(r, path, maxval=255, nan_value=None):
    """Write a raster with values in ``[0, 1]`` as binary PGM.

    Samples are ``round(v * maxval)`` with halves rounded up; 16-bit samples
    are big-endian. NaN raises unless `nan_value` gives a substitute.
    """
    if maxval not in (255, 65535):
        raise ValueError(f"maxval must be 255 or 65535, got {maxval}")
    arr = check_raster(r, "raster")
    if nan_value is not None:
        arr = np.where(np.isnan(arr), nan_value, arr)
    bad = ~((arr >= 0.0) & (arr <= 1.0))
    if bad.any():
        y, x = (int(i) for i in np.argwhere(bad)[0])
        raise RasterRangeError(f"value {arr[y, x]!r} outside [0, 1] at (x={x}, y={y})", x=x, y=y)
    q = np.floor(arr * maxval + 0.5)
    dtype = ">u2" if maxval == 65535 else "u1"
    height, width = arr.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + q.astype(dtype).tobytes())


_FRF_HEADER = re.compile(rb"FRF (\d+) (\d+)\n")


def read_raster(path):
    """Read an ``FRF`` float raster (float32 payload, returned as float64)."""
    data = Path(path).read_bytes()
    m = _FRF_HEADER.match(data)
    if m is None:
        raise RasterFormatError("FRF header 'FRF <width> <height>\\n' not found at byte offset 0")
    width, height = int(m.group(1)), int(m.group(2))
    if width < 1 or height < 1:
        raise RasterFormatError(f"FRF dimensions must be >= 1, got {width}x{height}")
    payload = data[m.end() :]
    need = width * height * 4
    if len(payload) != need:
        raise RasterFormatError(
            f"FRF size mismatch: header declares {width}x{height} ({need} bytes), "
            f"payload has {len(payload)} bytes starting at byte offset {m.end()}"
        )
    values = np.frombuffer(payload, dtype="<f4")
    return values.reshape(height, width).astype(np.float64)


def write_raster(r, path):
    arr = check_raster(r, "raster")
    height, width = arr.shape
    header = f"FRF {width} {height}\n".encode("ascii")
    Path(path).write_bytes(header + arr.astype("<f4").tobytes())


def write_ply(points, path):
    """Write points as an ASCII PLY vertex list.

    Points with any non-finite coordinate are skipped. Returns the number of
    dropped points.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    keep = np.isfinite(pts).all(axis=1)
    dropped = int((~keep).sum())
    pts = pts[keep]
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pts)}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    lines.extend(f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in pts)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
    if dropped:
        logger.info("write_ply: %d dropped (non-finite)", dropped)
    return dropped


def read_ply(path):
    """Read back an ASCII PLY written by :func:`write_ply`; returns ``(n, 3)``."""
    text = Path(path).read_text(encoding="ascii").splitlines()
    try:
        end = text.index("end_header")
    except ValueError:
        raise RasterFormatError("PLY 'end_header' line missing") from None
    count = None
    for line in text[:end]:
        if line.startswith("element vertex"):
            count = int(line.split()[2])
    if count is None:
        raise RasterFormatError("PLY has no vertex element")
    body = text[end + 1 : end + 1 + count]
    if len(body) != count:
        raise RasterFormatError(f"PLY declares {count} vertices, found {len(body)}")
    if count == 0:
        return np.empty((0, 3))
    return np.array([[float(t) for t in line.split()] for line in body])
