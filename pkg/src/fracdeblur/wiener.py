"""Classical and fractional (FRFT-domain) Wiener deconvolution.

The fractional operator is diagonal in the FRFT domain of order ``alpha``.
The blur enters through its FRFT-domain response

    K_a = chirp * sqrt(H W) * frft2d(pad_and_center(k), alpha)

which at ``alpha = (1, 1)`` is the ordinary OTF.  The restoration is

    x_hat = frft2d^-1( chirp * G * frft2d(y) ),
    G = conj(chirp * K_a) * S_xx / (|K_a|^2 S_xx + S_nn).

For a blur realised under the same convention (:func:`fractional_blur`) and no
noise this inverts exactly at any order; at ``alpha = (1, 1)`` it is the
textbook Wiener filter.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .dfrft import FracOrder, chirp_matrix, frft2d
from .tensorcore import InvalidArgument, as_complex_matrix, as_image, pad_and_center, psf_to_otf

log = logging.getLogger(__name__)

MAD_SCALE = 1.4826
# kernel-aware noise estimate: bins where the blur response is below this
# fraction of its peak carry (almost) only noise
SUPPRESSED_LEVEL = 0.05
SUPPRESSED_MIN_FRACTION = 0.02


@dataclass(frozen=True)
class SpectralDensities:
    s_xx: np.ndarray
    s_nn: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        for name in ("s_xx", "s_nn"):
            m = getattr(self, name)
            if np.any(m < 0) or not np.all(np.isfinite(m)):
                raise InvalidArgument(f"{name} must be finite and nonnegative")
        if not np.any(self.s_xx > 0):
            raise InvalidArgument("s_xx needs at least one positive entry")


@dataclass(frozen=True)
class FracWienerOp:
    gains: np.ndarray
    order: FracOrder
    chirp: np.ndarray


def noise_sigma(observed):
    """Robust noise level from the finest-scale diagonal high-pass residual."""
    y = np.real(np.asarray(observed))
    # Haar HH detail: orthonormal, so white noise keeps its variance
    hh = (y[:-1:2, :-1:2] - y[1::2, :-1:2] - y[:-1:2, 1::2] + y[1::2, 1::2]) / 2.0
    return MAD_SCALE * float(np.median(np.abs(hh - np.median(hh))))


def suppressed_noise_variance(power, response):
    """Noise variance from periodogram bins the blur has (nearly) removed.

    Returns None when too few bins are suppressed.  For white noise each bin's
    power is exponential with mean s2, so the median is divided by ln 2.
    """
    mag = np.abs(response)
    sel = mag <= SUPPRESSED_LEVEL * mag.max()
    if sel.mean() < SUPPRESSED_MIN_FRACTION:
        return None
    return float(np.median(power[sel]) / np.log(2.0))


def estimate_spectra(observed, nsr_override=None, order=(1, 1), kernel=None):
    """Signal and noise power spectra of ``observed`` in the FRFT domain of ``order``.

    Spectra use the unitary convention: white noise of variance s2 has a flat
    spectrum equal to s2.  Without an NSR override the noise variance comes
    from the bins suppressed by ``kernel`` when it is given and suppresses
    enough of them, otherwise from a wavelet MAD estimate.
    """
    y = as_complex_matrix(observed)
    if min(y.shape) < 8:
        raise InvalidArgument("estimate_spectra needs at least an 8x8 input")
    power = np.abs(frft2d(y, order)) ** 2
    smoothed = uniform_filter(power, size=3, mode="wrap")
    eps = 1e-8 * power.mean()
    degenerate = bool(np.ptp(y.real) == 0 and np.ptp(y.imag) == 0)
    if degenerate:
        floor = eps if eps > 0 else 1e-8
        log.warning("constant input: signal spectrum set to the floor")
        return SpectralDensities(np.full(y.shape, floor), np.zeros(y.shape), degenerate=True)
    if nsr_override is not None:
        if nsr_override < 0:
            raise InvalidArgument("nsr_override must be nonnegative")
        s_xx = np.maximum(smoothed, eps)
        s_nn = np.full(y.shape, float(nsr_override) * s_xx.mean())
    else:
        sigma2 = None
        if kernel is not None:
            sigma2 = suppressed_noise_variance(power, kernel_response(kernel, y.shape, order))
        if sigma2 is None:
            sigma2 = noise_sigma(y) ** 2
        s_xx = np.maximum(smoothed - sigma2, eps)
        s_nn = np.full(y.shape, sigma2)
    return SpectralDensities(s_xx, s_nn)


def kernel_response(kernel, shape, order):
    """FRFT-domain transfer function of a centred kernel, chirp included."""
    order = FracOrder.of(order)
    rows, cols = shape
    if order.as_tuple() == (1.0, 1.0):
        return psf_to_otf(kernel, rows, cols).astype(np.complex128)
    k = pad_and_center(np.asarray(kernel, dtype=np.float64), rows, cols)
    return chirp_matrix(rows, cols, order) * np.sqrt(rows * cols) * frft2d(k, order)


def fractional_blur(image, kernel, order):
    """Blur realised in the FRFT domain; ordinary circular convolution at (1, 1).

    At fractional orders the result is complex even for real input.
    """
    x = as_complex_matrix(image)
    order = FracOrder.of(order)
    resp = kernel_response(kernel, x.shape, order)
    out = frft2d(resp * frft2d(x, order), order.inverse())
    if np.isrealobj(image) and order.as_tuple() == (1.0, 1.0):
        return out.real
    return out


def build_fwd(kernel, spectra, order, shape):
    kernel = np.asarray(kernel, dtype=np.float64)
    if not np.any(kernel):
        raise InvalidArgument("all-zero kernel")
    order = FracOrder.of(order)
    shape = tuple(shape)
    if spectra.s_xx.shape != shape or spectra.s_nn.shape != shape:
        raise InvalidArgument("spectra do not match the requested shape")
    resp = kernel_response(kernel, shape, order)
    chirp = chirp_matrix(shape[0], shape[1], order)
    num = np.conj(chirp * resp) * spectra.s_xx
    den = np.abs(resp) ** 2 * spectra.s_xx + spectra.s_nn
    floor = 1e-12 * np.abs(num).max()
    gains = num / np.maximum(den, floor) if floor > 0 else np.zeros(shape, dtype=np.complex128)
    return FracWienerOp(gains=gains, order=order, chirp=chirp)


def apply_fwd(op, observed):
    y = as_complex_matrix(observed)
    if y.shape != op.gains.shape:
        raise InvalidArgument(f"observed {y.shape} does not match operator {op.gains.shape}")
    out = frft2d(op.chirp * op.gains * frft2d(y, op.order), op.order.inverse())
    return out


def classical_wiener(observed, kernel, s_xx, s_nn):
    """Textbook Wiener restoration with numpy FFTs (reference path)."""
    y = np.asarray(observed, dtype=np.complex128)
    otf = np.fft.fft2(pad_and_center(np.asarray(kernel, dtype=np.float64), *y.shape))
    g = np.conj(otf) * s_xx / (np.abs(otf) ** 2 * s_xx + s_nn)
    return np.fft.ifft2(g * np.fft.fft2(y))


def wiener_deconvolve(observed, kernel, order=(1, 1), nsr=None):
    """Spectra estimate, operator build and application for one 2D channel."""
    y = as_complex_matrix(observed)
    spectra = estimate_spectra(y, nsr_override=nsr, order=order, kernel=kernel)
    op = build_fwd(kernel, spectra, order, y.shape)
    return apply_fwd(op, y)


def f2wd_deblur(features, kernel, order=(1, 1), nsr=None, return_residual=False):
    """Per-channel fractional Wiener deconvolution of an (H, W, C) feature stack.

    Returns the real part; with ``return_residual`` also the RMS of the
    discarded imaginary part relative to the signal RMS.
    """
    t = as_image(features)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape[0] > t.shape[0] or kernel.shape[1] > t.shape[1]:
        raise InvalidArgument("kernel does not fit the feature maps")
    out = np.empty_like(t)
    imag_energy = 0.0
    for c in range(t.shape[2]):
        restored = wiener_deconvolve(t[:, :, c], kernel, order, nsr)
        out[:, :, c] = restored.real
        imag_energy += float(np.sum(restored.imag ** 2))
    if not return_residual:
        return out
    rms = np.sqrt(np.mean(out ** 2))
    residual = np.sqrt(imag_energy / out.size) / rms if rms > 0 else 0.0
    return out, residual
