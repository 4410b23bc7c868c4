"""Image file I/O: binary PGM (P5) / PPM (P6) parsed here, 8-bit PNG through Pillow.

Images are returned as (H, W, C) float64 tensors scaled to [0, 1].  Saving
quantises to the container's bit depth (8 or 16 for PNM, 8 for PNG), so a
save/load round trip of data already on that grid is lossless.
"""

import logging
import os

import numpy as np

from .tensorcore import InvalidArgument, as_image

log = logging.getLogger(__name__)


class ImageFormatError(InvalidArgument):
    """Malformed image data (the message carries the byte offset)."""


class UnsupportedFormat(InvalidArgument):
    """Well-formed but unsupported image (extension, bit depth, channels)."""


_WS = b" \t\n\r\v\f"


def _read_token(data, pos):
    """Next whitespace-delimited header token, skipping ``#`` comments."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c[0] in _WS:
            pos += 1
        elif c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in _WS and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ImageFormatError(f"unexpected end of header at byte {start}")
    return data[start:pos], start, pos


def _header_int(data, pos, what):
    tok, start, pos = _read_token(data, pos)
    if not tok.isdigit():
        raise ImageFormatError(f"invalid {what} {tok[:16]!r} at byte {start}")
    return int(tok), pos


def parse_pnm(data):
    """Decode binary P5/P6 bytes into an (H, W, C) float tensor in [0, 1]."""
    if len(data) < 2 or data[:1] != b"P":
        raise ImageFormatError("missing PNM magic at byte 0")
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedFormat(f"unsupported PNM type {magic!r} at byte 0 (only P5/P6)")
    pos = 2
    if pos >= len(data) or data[pos] not in _WS:
        raise ImageFormatError(f"expected whitespace after magic at byte {pos}")
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise ImageFormatError(f"non-positive image size {width}x{height}")
    if maxval not in (255, 65535):
        raise UnsupportedFormat(f"unsupported maxval {maxval} (bit depth must be 8 or 16)")
    if pos >= len(data) or data[pos] not in _WS:
        raise ImageFormatError(f"expected single whitespace after maxval at byte {pos}")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    bytes_per = 1 if maxval == 255 else 2
    expected = width * height * channels * bytes_per
    actual = len(data) - pos
    if actual < expected:
        raise ImageFormatError(
            f"truncated payload starting at byte {pos}: expected {expected} bytes, found {actual}")
    if actual > expected:
        log.warning("ignoring %d trailing bytes after PNM payload", actual - expected)
    dtype = np.uint8 if bytes_per == 1 else np.dtype(">u2")
    raw = np.frombuffer(data, dtype=dtype, count=width * height * channels, offset=pos)
    return raw.reshape(height, width, channels).astype(np.float64) / maxval


def encode_pnm(t, bits=8):
    t = as_image(t)
    if bits not in (8, 16):
        raise UnsupportedFormat(f"unsupported bit depth {bits}")
    H, W, C = t.shape
    if C not in (1, 3):
        raise UnsupportedFormat(f"PNM stores 1 or 3 channels, not {C}")
    maxval = 255 if bits == 8 else 65535
    q = np.round(np.clip(t, 0.0, 1.0) * maxval)
    payload = q.astype(np.uint8 if bits == 8 else ">u2").tobytes()
    magic = "P5" if C == 1 else "P6"
    return f"{magic}\n{W} {H}\n{maxval}\n".encode("ascii") + payload


def _format(path):
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in (".pgm", ".ppm", ".pnm", ".png"):
        raise UnsupportedFormat(f"unsupported image extension {ext!r} (use .pgm, .ppm or .png)")
    return ext


def load_image(path):
    ext = _format(path)
    if ext == ".png":
        return _load_png(path)
    with open(path, "rb") as fh:
        return parse_pnm(fh.read())


def save_image(path, t, bits=8):
    """Write ``t`` (clipped to [0, 1]); .pgm needs 1 channel, .ppm gets 3."""
    ext = _format(path)
    t = as_image(t)
    C = t.shape[2]
    if ext == ".ppm" and C == 1:
        t = np.repeat(t, 3, axis=2)
    elif ext == ".pgm" and C != 1:
        raise UnsupportedFormat(f".pgm holds one channel; image has {C}")
    if ext == ".png":
        _save_png(path, t)
        return
    with open(path, "wb") as fh:
        fh.write(encode_pnm(t, bits))


def _load_png(path):
    from PIL import Image

    with Image.open(path) as im:
        mode = im.mode
        if mode in ("P", "RGBA", "LA", "1"):
            im = im.convert("RGB" if mode in ("P", "RGBA") else "L")
            mode = im.mode
        if mode not in ("L", "RGB"):
            raise UnsupportedFormat(f"unsupported PNG mode {mode!r} (8-bit gray or RGB only)")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.astype(np.float64) / 255.0


def _save_png(path, t):
    from PIL import Image

    C = t.shape[2]
    if C not in (1, 3):
        raise UnsupportedFormat(f"PNG output holds 1 or 3 channels, not {C}")
    q = np.round(np.clip(t, 0.0, 1.0) * 255).astype(np.uint8)
    img = Image.fromarray(q[:, :, 0] if C == 1 else q)
    img.save(path, format="PNG")
