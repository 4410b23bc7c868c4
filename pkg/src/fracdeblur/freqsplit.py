"""Complementary low/high frequency split with radial filter banks.

Responses live on centred frequency coordinates (DC at ``(rows // 2, cols // 2)``)
with radius ``u = sqrt(j^2 + k^2)`` in integer frequency-index units.  The
high-pass response is always ``1 - w_low``, so splitting then summing is an
exact identity up to FFT round-off.

Kinds
-----
cosine_bell
    1 below ``u_c - u_s/2``, 0 above ``u_c + u_s/2``, raised cosine between.
    ``u_s = 0`` gives the ideal brick-wall low-pass.
butterworth
    Order 2: ``1 / (1 + (u/u_c)^4)``; ``u_s`` is ignored.
hanning
    A raised cosine spanning ``[0, 2 u_c]`` (half-value at ``u_c``); ``u_s``
    is ignored.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation

from .tensorcore import InvalidArgument, as_complex_matrix, fft2d

KINDS = ("cosine_bell", "butterworth", "hanning")
BUTTERWORTH_ORDER = 2
DEFAULT_UC = 10.0
DEFAULT_US = 29.0


@dataclass(frozen=True)
class FilterBank:
    w_low: np.ndarray
    w_high: np.ndarray
    kind: str
    u_c: float
    u_s: float

    @property
    def shape(self):
        return self.w_low.shape


def radial_frequency(rows, cols):
    j = np.arange(rows) - rows // 2
    k = np.arange(cols) - cols // 2
    return np.sqrt(j[:, None] ** 2 + k[None, :] ** 2)


def _raised_cosine(u, lo, hi):
    w = np.where(u <= lo, 1.0, 0.0)
    band = (u > lo) & (u < hi)
    w[band] = 0.5 * (1.0 + np.cos(np.pi * (u[band] - lo) / (hi - lo)))
    return w


def build_filter(rows, cols, kind="cosine_bell", u_c=DEFAULT_UC, u_s=DEFAULT_US):
    """Low/high response pair of the requested kind on a ``rows x cols`` grid."""
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise InvalidArgument(f"filter dims must be positive integers, got {rows}x{cols}")
    if kind not in KINDS:
        raise InvalidArgument(f"unknown filter kind {kind!r}")
    if not u_c > 0 or u_s < 0:
        raise InvalidArgument("need u_c > 0 and u_s >= 0")
    u = radial_frequency(int(rows), int(cols))
    if kind == "cosine_bell":
        if u_s == 0:
            w = (u <= u_c).astype(np.float64)
        else:
            w = _raised_cosine(u, u_c - u_s / 2.0, u_c + u_s / 2.0)
    elif kind == "butterworth":
        w = 1.0 / (1.0 + (u / u_c) ** (2 * BUTTERWORTH_ORDER))
    else:
        w = _raised_cosine(u, 0.0, 2.0 * u_c)
    w_low = np.clip(w, 0.0, 1.0)
    return FilterBank(w_low=w_low, w_high=1.0 - w_low, kind=kind, u_c=float(u_c), u_s=float(u_s))


def apply_response(x, response):
    """Filter a matrix by a centred frequency response (unitary FFT round trip)."""
    spec = fft2d(x) * np.fft.ifftshift(response)
    return fft2d(spec, inverse=True)


def split_frequencies(x, bank):
    """Return ``(x_low, x_high)``; both are real when ``x`` is real."""
    real = np.isrealobj(x)
    m = as_complex_matrix(x)
    if m.shape != bank.shape:
        raise InvalidArgument(f"input {m.shape} does not match filter {bank.shape}")
    spec = fft2d(m)
    low = fft2d(spec * np.fft.ifftshift(bank.w_low), inverse=True)
    high = fft2d(spec * np.fft.ifftshift(bank.w_high), inverse=True)
    if real:
        return low.real, high.real
    return low, high


def step_image(rows=128, cols=128, low=0.0, high=1.0):
    """Centred square of value ``high`` on a ``low`` background."""
    img = np.full((rows, cols), float(low))
    img[rows // 4: 3 * rows // 4, cols // 4: 3 * cols // 4] = high
    return img


def ringing_score(x_low, reference_step, band=2):
    """Ringing of a low-passed step image; 0 for the step itself, lower is better.

    Sum of overshoot above ``max(reference)`` and undershoot below
    ``min(reference)``, plus the squared deviation from the reference on all
    pixels farther than ``band`` samples from a step edge (oscillation that
    leaks away from the transition).
    """
    x = np.real(np.asarray(x_low))
    ref = np.real(np.asarray(reference_step))
    if x.shape != ref.shape:
        raise InvalidArgument("x_low and reference_step shapes differ")
    over = np.maximum(0.0, x - ref.max()).sum() + np.maximum(0.0, ref.min() - x).sum()
    edges = np.zeros(ref.shape, dtype=bool)
    for axis in (0, 1):
        for shift in (1, -1):
            edges |= np.roll(ref, shift, axis=axis) != ref
    near = binary_dilation(edges, iterations=band) if band > 0 and edges.any() else edges
    far = ~near
    oscillation = np.sum((x[far] - ref[far]) ** 2)
    return float(over + oscillation)
