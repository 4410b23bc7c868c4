"""Numeric substrate: unitary FFTs, 2D convolution, PSF/OTF conversion and resampling.

Complex matrices are plain ``complex128`` numpy arrays of shape ``(rows, cols)``;
image tensors are ``float64`` arrays of shape ``(height, width, channels)``.
All Fourier transforms use the unitary (1/sqrt(N) both ways) convention.
The OTF returned by :func:`psf_to_otf` is the *non-unitary* transform of the
shifted kernel, so that a 1x1 identity kernel has an all-ones OTF and

    fft2d(convolve2d(a, k)) == fft2d(a) * psf_to_otf(k, *a.shape)

holds with scale 1.
"""

import numpy as np


class InvalidArgument(ValueError):
    """Raised when an operation receives arguments violating its preconditions."""


def as_complex_matrix(m):
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidArgument(f"expected a non-empty 2D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgument("matrix contains non-finite samples")
    return m


def as_image(t):
    """Coerce to a finite (H, W, C) float64 tensor; 2D input gains a channel axis."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 2:
        t = t[:, :, None]
    if t.ndim != 3 or min(t.shape) < 1:
        raise InvalidArgument(f"expected an (H, W, C) tensor, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise InvalidArgument("image contains non-finite samples")
    return t


def fft1d(x, inverse=False):
    """Unitary DFT of a vector of any length >= 1.

    numpy's pocketfft handles non power-of-two lengths (Bluestein for awkward
    primes), so no separate chirp-z reduction is carried here.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise InvalidArgument("fft1d needs a non-empty vector")
    if inverse:
        return np.fft.ifft(x, norm="ortho")
    return np.fft.fft(x, norm="ortho")


def fft2d(m, inverse=False):
    """Separable unitary 2D DFT (rows, then columns)."""
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.size == 0:
        raise InvalidArgument("fft2d needs a non-empty matrix")
    if inverse:
        return np.fft.ifft2(m, norm="ortho")
    return np.fft.fft2(m, norm="ortho")


def _kernel_offsets(kshape):
    return kshape[0] // 2, kshape[1] // 2


def convolve2d(image, kernel, mode="fft", boundary="circular"):
    """Convolve ``image`` with a centred ``kernel``; output has the image's shape.

    The kernel origin is at ``(kh // 2, kw // 2)``.  ``boundary='circular'``
    wraps; ``'zero-pad'`` treats samples outside the image as zero.
    """
    image = np.asarray(image)
    kernel = np.asarray(kernel)
    if image.ndim != 2 or kernel.ndim != 2:
        raise InvalidArgument("convolve2d works on 2D matrices")
    if mode not in ("direct", "fft"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    if boundary not in ("circular", "zero-pad"):
        raise InvalidArgument(f"unknown boundary {boundary!r}")
    H, W = image.shape
    kh, kw = kernel.shape
    if mode == "direct" and (kh > H or kw > W):
        raise InvalidArgument("kernel larger than image in direct mode")
    real = np.isrealobj(image) and np.isrealobj(kernel)
    cy, cx = _kernel_offsets(kernel.shape)

    if boundary == "circular":
        if mode == "fft":
            if kh > H or kw > W:
                raise InvalidArgument("kernel larger than image")
            out = np.fft.ifft2(np.fft.fft2(image) * psf_to_otf(kernel, H, W))
        else:
            out = np.zeros((H, W), dtype=np.result_type(image, kernel, np.float64))
            for i in range(kh):
                for j in range(kw):
                    out += kernel[i, j] * np.roll(image, (i - cy, j - cx), axis=(0, 1))
    else:
        if mode == "fft":
            ph, pw = H + kh - 1, W + kw - 1
            full = np.fft.ifft2(np.fft.fft2(image, s=(ph, pw)) * np.fft.fft2(kernel, s=(ph, pw)))
            out = full[cy:cy + H, cx:cx + W]
        else:
            padded = np.pad(image, ((kh - 1 - cy, cy), (kw - 1 - cx, cx)))
            out = np.zeros((H, W), dtype=np.result_type(image, kernel, np.float64))
            for i in range(kh):
                for j in range(kw):
                    out += kernel[i, j] * padded[kh - 1 - i:kh - 1 - i + H, kw - 1 - j:kw - 1 - j + W]
    return out.real if real else out


def pad_and_center(kernel, rows, cols):
    """Zero-pad ``kernel`` to ``rows x cols`` and roll its centre to index (0, 0)."""
    kernel = np.asarray(kernel)
    if kernel.ndim != 2:
        raise InvalidArgument("kernel must be 2D")
    kh, kw = kernel.shape
    if kh > rows or kw > cols:
        raise InvalidArgument(f"kernel {kernel.shape} does not fit target {(rows, cols)}")
    padded = np.zeros((rows, cols), dtype=kernel.dtype)
    padded[:kh, :kw] = kernel
    cy, cx = _kernel_offsets(kernel.shape)
    return np.roll(padded, (-cy, -cx), axis=(0, 1))


def psf_to_otf(kernel, rows, cols):
    """Optical transfer function of a centred PSF on a ``rows x cols`` grid.

    Non-unitary: equals ``sqrt(rows * cols) * fft2d(pad_and_center(kernel))``.
    """
    return np.fft.fft2(pad_and_center(kernel, rows, cols))


def edge_taper(image, width=8):
    """Blend the borders towards the wrapped mean so circular deconvolution rings less."""
    image = np.asarray(image, dtype=np.float64)
    H, W = image.shape
    def ramp(n):
        w = np.ones(n)
        k = min(width, n // 2)
        if k > 0:
            t = 0.5 - 0.5 * np.cos(np.pi * (np.arange(k) + 0.5) / k)
            w[:k] = t
            w[n - k:] = t[::-1]
        return w
    win = np.outer(ramp(H), ramp(W))
    return win * image + (1 - win) * image.mean()


def resample(t, direction, method="average"):
    """Scale an (H, W, C) tensor by a factor of two.

    ``down2`` supports ``average`` (2x2 box mean) and ``pixel_unshuffle``;
    ``up2`` supports ``pixel_shuffle`` and ``average`` (nearest replication).
    """
    t = as_image(t)
    H, W, C = t.shape
    if direction == "down2":
        if H % 2 or W % 2:
            raise InvalidArgument(f"down2 needs even spatial dims, got {H}x{W}")
        blocks = t.reshape(H // 2, 2, W // 2, 2, C)
        if method == "average":
            return blocks.mean(axis=(1, 3))
        if method == "pixel_unshuffle":
            # channel layout: c * 4 + (dy * 2 + dx)
            return blocks.transpose(0, 2, 4, 1, 3).reshape(H // 2, W // 2, 4 * C)
        raise InvalidArgument(f"method {method!r} cannot downsample")
    if direction == "up2":
        if method == "pixel_shuffle":
            if C % 4:
                raise InvalidArgument(f"pixel_shuffle needs channels divisible by 4, got {C}")
            blocks = t.reshape(H, W, C // 4, 2, 2)
            return blocks.transpose(0, 3, 1, 4, 2).reshape(2 * H, 2 * W, C // 4)
        if method == "average":
            return np.repeat(np.repeat(t, 2, axis=0), 2, axis=1)
        raise InvalidArgument(f"method {method!r} cannot upsample")
    raise InvalidArgument(f"unknown direction {direction!r}")
