"""Degradation, end-to-end deblurring pipelines, image metrics and synthetic images."""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import correlate1d, map_coordinates

from .blocks import BlockConfig, f2former_forward, image_pyramid, init_params
from .kernel import KebParams, estimate_kernel, validate_kernel
from .tensorcore import InvalidArgument, as_image, convolve2d
from .wiener import f2wd_deblur

log = logging.getLogger(__name__)

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True)
class DegradeSpec:
    kernel: np.ndarray
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.noise_sigma >= 0:
            raise InvalidArgument("noise_sigma must be >= 0")


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    mae: float

    def csv_fields(self):
        return [f"{self.psnr:.6f}", f"{self.ssim:.6f}", f"{self.mae:.6f}"]


def degrade(image, spec):
    """Circular blur of every channel, then seeded Gaussian noise, clipped to [0, 1]."""
    x = as_image(image)
    k = validate_kernel(spec.kernel, tol=1e-6)
    out = np.stack([convolve2d(x[:, :, c], k, mode="fft") for c in range(x.shape[2])], axis=2)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        out = out + spec.noise_sigma * rng.standard_normal(out.shape)
    return np.clip(out, 0.0, 1.0)


def sigma_for_snr(clean, snr_db):
    """Noise standard deviation giving ``snr_db`` relative to the signal's std."""
    return float(np.std(clean)) / 10.0 ** (snr_db / 20.0)


def _gray(t):
    return as_image(t).mean(axis=2)


def deblur_classical(blurry, kernel=None, order=(1, 1), nsr=None, keb=None):
    """Fractional Wiener deblurring of every channel, clipped to [0, 1].

    With ``kernel=None`` the kernel is estimated blind from the channel mean.
    Returns ``(restored, kernel)``.
    """
    y = as_image(blurry)
    if kernel is None:
        kernel = estimate_kernel(_gray(y), keb or KebParams())
    kernel = validate_kernel(kernel, tol=1e-6)
    restored = f2wd_deblur(y, kernel, order=order, nsr=nsr)
    return np.clip(restored, 0.0, 1.0), kernel


def scale_kernels(image, keb=None, scales=3):
    """Independent blind kernel estimates on each level of the average pyramid.

    The kernel side halves with each scale and is capped at a quarter of the
    image side; levels too small for a 3x3 kernel get the identity kernel.
    """
    keb = keb or KebParams()
    kernels = []
    for p, level in enumerate(image_pyramid(image, scales)):
        side = keb.kernel_side // 2 ** p
        side = min(side, min(level.shape[:2]) // 4)
        side -= 1 - side % 2
        if side < 3:
            kernels.append(np.ones((1, 1)))
            continue
        kernels.append(estimate_kernel(_gray(level), replace(keb, kernel_side=side)))
    return kernels


def pyramid_kernels(kernel, scales=3):
    """Known-kernel counterpart of :func:`scale_kernels`.

    Level ``p`` resamples the kernel at stride ``2**p`` about its centre
    (bilinear, after a 2**p box average), keeping the side odd; a kernel that
    shrinks below 3x3 becomes the identity.
    """
    k = validate_kernel(kernel, tol=1e-6)
    out = [k]
    for p in range(1, scales):
        f = 2 ** p
        side = k.shape[0] // f
        side -= 1 - side % 2
        if side < 3:
            out.append(np.ones((1, 1)))
            continue
        c0, c1 = k.shape[0] // 2, k.shape[1] // 2
        r = (np.arange(side) - side // 2) * f
        acc = np.zeros((side, side))
        # average f x f fine samples around each coarse centre
        for dy in np.arange(f) - (f - 1) / 2:
            for dx in np.arange(f) - (f - 1) / 2:
                yy, xx = np.meshgrid(c0 + r + dy, c1 + r + dx, indexing="ij")
                acc += map_coordinates(k, [yy, xx], order=1, mode="constant")
        acc = np.clip(acc, 0.0, None)
        out.append(acc / acc.sum() if acc.sum() > 0 else np.pad([[1.0]], side // 2))
    return out


def deblur_full(blurry, params=None, cfg=None, kernels=None, keb=None, seed=0):
    """Full toy forward pass; returns the full-resolution prediction clipped to [0, 1]."""
    cfg = cfg or BlockConfig(image_channels=as_image(blurry).shape[2])
    params = params or init_params(cfg, seed)
    if kernels is None:
        kernels = scale_kernels(blurry, keb)
    preds = f2former_forward(blurry, kernels, params, cfg)
    return np.clip(preds[0], 0.0, 1.0)


def wiener_forward(kernel):
    """Wiener-only forward ``(blurry, store) -> [prediction]`` for parameter fitting.

    Reads ``wiener.nsr`` and the order pair ``wiener.s1.alpha`` from the store.
    """
    def forward(blurry, store):
        alpha = store["wiener.s1.alpha"]
        return [f2wd_deblur(blurry, kernel, order=(float(alpha[0]), float(alpha[1])),
                            nsr=float(store["wiener.nsr"]))]
    return forward


# --------------------------------------------------------------------------
# metrics

def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = np.arange(size) - size // 2
    g = np.exp(-r ** 2 / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(x, g):
    h = len(g) // 2
    out = correlate1d(correlate1d(x, g, axis=0, mode="constant"), g, axis=1, mode="constant")
    return out[h:x.shape[0] - h, h:x.shape[1] - h]


def ssim_channel(a, b, size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Mean SSIM over all fully-contained Gaussian windows (data range 1)."""
    size = min(size, a.shape[0], a.shape[1])
    size -= 1 - size % 2
    g = gaussian_window(size, sigma)
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    saa = _filter_valid(a * a, g) - mu_a ** 2
    sbb = _filter_valid(b * b, g) - mu_b ** 2
    sab = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * sab + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (saa + sbb + SSIM_C2)
    return float(np.mean(num / den))


def psnr(a, b):
    mse = float(np.mean((as_image(a) - as_image(b)) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def compute_metrics(a, b):
    """PSNR (capped at 99 dB), channel-averaged SSIM and MAE of two [0, 1] images."""
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch {a.shape} vs {b.shape}")
    s = float(np.mean([ssim_channel(a[:, :, c], b[:, :, c]) for c in range(a.shape[2])]))
    return MetricReport(psnr=psnr(a, b), ssim=min(s, 1.0), mae=float(np.mean(np.abs(a - b))))


# --------------------------------------------------------------------------
# synthetic images

def smooth_periodic(n=64, seed=0, channels=1, terms=6, max_freq=6):
    """Band-limited periodic image: a few low-frequency cosines in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:n, 0:n] / n
    out = np.empty((n, n, channels))
    for c in range(channels):
        img = np.zeros((n, n))
        for _ in range(terms):
            fy, fx = rng.integers(-max_freq, max_freq + 1, 2)
            img += rng.uniform(0.5, 1.0) * np.cos(2 * np.pi * (fy * y + fx * x) + rng.uniform(0, 2 * np.pi))
        img -= img.min()
        img /= img.max() if img.max() > 0 else 1.0
        out[:, :, c] = 0.1 + 0.8 * img
    return out


def shapes(n=128, seed=0, channels=1, count=12):
    """Piecewise-constant image of overlapping discs and rectangles."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:n, 0:n]
    img = np.full((n, n), 0.5)
    lo = min(8, max(1, n // 4))
    for _ in range(count):
        v = rng.uniform(0, 1)
        if rng.random() < 0.5:
            cy, cx = rng.uniform(0, n, 2)
            r = rng.uniform(n / 16, n / 5)
            img[(y - cy) ** 2 + (x - cx) ** 2 < r * r] = v
        else:
            y0, x0 = rng.integers(0, max(1, n - lo), 2)
            h, w = rng.integers(lo, max(lo + 1, n // 3), 2)
            img[y0:y0 + h, x0:x0 + w] = v
    return np.repeat(img[:, :, None], channels, axis=2)


def chirp_texture(n=64, seed=0, channels=1):
    """Separable linear-chirp texture with seeded rates and offsets, in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) - n / 2
    out = np.empty((n, n, channels))
    for c in range(channels):
        ry, rx = rng.uniform(0.2, 0.45, 2) * np.pi / n
        py, px = rng.uniform(0, 2 * np.pi, 2)
        img = np.cos(ry * t[:, None] ** 2 + py) * np.cos(rx * t[None, :] ** 2 + px)
        out[:, :, c] = 0.5 + 0.4 * img
    return out


SYNTHETICS = {"smooth": smooth_periodic, "shapes": shapes, "chirp": chirp_texture}


def synthetic(kind, n=64, seed=0, channels=1):
    if kind not in SYNTHETICS:
        raise InvalidArgument(f"unknown synthetic {kind!r}; choose from {sorted(SYNTHETICS)}")
    return SYNTHETICS[kind](n=n, seed=seed, channels=channels)


def standard_suite(n=64, seed=0):
    """The synthetic images used for pipeline margins, keyed by kind."""
    return {kind: synthetic(kind, n, seed) for kind in SYNTHETICS}
