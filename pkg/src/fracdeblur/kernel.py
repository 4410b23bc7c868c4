"""Blur-kernel estimation from salient edges, plus synthetic PSF generators.

The estimator alternates two closed-form ridge problems,

    K   = argmin ||d(X_e) * K - d(X)||^2 + eta ||K||^2        (kernel step)
    X_l = argmin ||K * X_l - X||^2 + gamma ||X_l||^2            (latent step)

where ``d`` is a forward difference, ``X`` the blurry observation and ``X_e``
a sharpened edge map.  Edge maps come from a shock filter followed by a
magnitude quantile threshold (no learned edge network is used).  Both steps
are elementwise divisions in the (non-unitary) DFT domain, i.e. everything is
circular.

Kernels are plain ``(side, side)`` float64 arrays that are nonnegative, sum to
one and have their centre of mass within half a pixel of the middle cell.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .tensorcore import InvalidArgument, as_complex_matrix, psf_to_otf

log = logging.getLogger(__name__)

SHOCK_ITERATIONS = 5
SHOCK_DT = 0.1
PRUNE_FRACTION = 0.05
# The ridge latent rings at kernel-spectrum zeros; without a light denoise the
# shock filter turns that ringing into false edges and the alternation drifts.
LATENT_SMOOTHING_SIGMA = 1.0
# Alternation stops early once successive kernels differ by less than this in
# L1 (kernels have unit mass, so this is a relative change); tau is the cap.
CONVERGENCE_TOL = 1e-2


class InvalidInput(InvalidArgument):
    """The data cannot support an estimate (flat image, empty edge maps)."""


@dataclass(frozen=True)
class KebParams:
    eta: float = 1.0
    gamma: float = 0.002
    tau: int = 15
    edge_threshold_quantile: float = 0.9
    kernel_side: int = 15
    latent_smoothing: float = LATENT_SMOOTHING_SIGMA
    tol: float = CONVERGENCE_TOL

    def __post_init__(self):
        if not self.eta > 0 or not self.gamma > 0:
            raise InvalidArgument("eta and gamma must be positive")
        if int(self.tau) != self.tau or self.tau < 1:
            raise InvalidArgument("tau must be an integer >= 1")
        if not 0 < self.edge_threshold_quantile < 1:
            raise InvalidArgument("edge_threshold_quantile must lie in (0, 1)")
        _check_side(self.kernel_side)
        if self.latent_smoothing < 0:
            raise InvalidArgument("latent_smoothing must be nonnegative")


def _check_side(side):
    if int(side) != side or side < 1 or side % 2 == 0:
        raise InvalidArgument(f"kernel side must be a positive odd integer, got {side}")
    return int(side)


def center_of_mass(kernel):
    """Centre of mass of ``kernel`` relative to its middle cell, as (dy, dx)."""
    k = np.asarray(kernel, dtype=np.float64)
    total = k.sum()
    ys = np.arange(k.shape[0]) - k.shape[0] // 2
    xs = np.arange(k.shape[1]) - k.shape[1] // 2
    return float(ys @ k.sum(axis=1) / total), float(xs @ k.sum(axis=0) / total)


def validate_kernel(kernel, tol=1e-9):
    """Raise unless ``kernel`` is a valid blur kernel; return it as float64."""
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise InvalidArgument(f"kernel must be square, got shape {k.shape}")
    _check_side(k.shape[0])
    if not np.all(np.isfinite(k)) or np.any(k < 0):
        raise InvalidArgument("kernel weights must be finite and nonnegative")
    if abs(k.sum() - 1.0) > tol:
        raise InvalidArgument(f"kernel sums to {k.sum()!r}, not 1")
    dy, dx = center_of_mass(k)
    if abs(dy) > 0.5 or abs(dx) > 0.5:
        raise InvalidArgument(f"kernel is off-centre by ({dy:.3f}, {dx:.3f})")
    return k


# --------------------------------------------------------------------------
# gradients and salient edges

def gradients(image):
    """Circular forward differences ``(gx, gy)``: along columns, then rows."""
    x = np.asarray(image)
    if x.ndim != 2 or min(x.shape) < 3:
        raise InvalidArgument("gradients need a 2D image of at least 3x3")
    gx = np.roll(x, -1, axis=1) - x
    gy = np.roll(x, -1, axis=0) - x
    return gx, gy


def _difference_responses(shape):
    rows, cols = shape
    dx = np.exp(2j * np.pi * np.arange(cols) / cols) - 1.0
    dy = np.exp(2j * np.pi * np.arange(rows) / rows) - 1.0
    return dx[None, :], dy[:, None]


def integrate_gradients(gx, gy):
    """Least-squares (Poisson) image whose forward differences best match (gx, gy).

    The result has zero mean, which the gradients cannot determine.
    """
    dx, dy = _difference_responses(gx.shape)
    num = np.conj(dx) * np.fft.fft2(gx) + np.conj(dy) * np.fft.fft2(gy)
    den = np.abs(dx) ** 2 + np.abs(dy) ** 2
    den[0, 0] = 1.0
    spec = num / den
    spec[0, 0] = 0.0
    out = np.fft.ifft2(spec)
    if np.isrealobj(gx) and np.isrealobj(gy):
        return out.real
    return out


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def shock_filter(image, iterations=SHOCK_ITERATIONS, dt=SHOCK_DT):
    """Osher-Rudin shock filter, ``I_t = -sign(lap I) |grad I|`` with minmod slopes.

    Ideal two-level steps are fixed points: at every sample either the forward
    or the backward difference vanishes, so the minmod gradient is zero.
    """
    u = np.array(np.real(image), dtype=np.float64)
    for _ in range(iterations):
        fx = np.roll(u, -1, axis=1) - u
        bx = u - np.roll(u, 1, axis=1)
        fy = np.roll(u, -1, axis=0) - u
        by = u - np.roll(u, 1, axis=0)
        mag = np.hypot(_minmod(fx, bx), _minmod(fy, by))
        lap = fx - bx + fy - by
        u = u - dt * np.sign(lap) * mag
    return u


def salient_edges(gx, gy, quantile=0.9):
    """Shock-sharpened gradient field keeping only its strongest magnitudes.

    The gradients are integrated to an image, shock filtered, differentiated
    again, and every sample outside the top ``floor((1 - quantile) * N)``
    magnitudes is zeroed.  ``quantile=0`` disables thresholding.
    """
    if not 0 <= quantile < 1:
        raise InvalidArgument("quantile must lie in [0, 1)")
    gx = np.asarray(gx)
    gy = np.asarray(gy)
    if gx.shape != gy.shape:
        raise InvalidArgument("gx and gy shapes differ")
    sharp = shock_filter(integrate_gradients(gx, gy))
    sx, sy = gradients(sharp)
    if quantile == 0:
        return sx, sy
    mag = np.hypot(sx, sy).ravel()
    keep = int(np.floor((1.0 - quantile) * mag.size))
    if keep == 0:
        return np.zeros_like(sx), np.zeros_like(sy)
    threshold = np.partition(mag, mag.size - keep - 1)[mag.size - keep - 1]
    mask = (mag > threshold).reshape(sx.shape)
    return sx * mask, sy * mask


# --------------------------------------------------------------------------
# closed-form solves

def kernel_spectrum_solve(gx_e, gy_e, gx, gy, eta):
    """Unprojected kernel estimate on the full grid (origin at index (0, 0)).

    Evaluates ``ifft2[(conj(Fgx_e) Fgx + conj(Fgy_e) Fgy) / (|Fgx_e|^2 + |Fgy_e|^2 + eta)]``.
    """
    mats = [np.asarray(m) for m in (gx_e, gy_e, gx, gy)]
    if len({m.shape for m in mats}) != 1 or mats[0].ndim != 2:
        raise InvalidArgument("edge and gradient maps must share one 2D shape")
    if not eta > 0:
        raise InvalidArgument("eta must be positive")
    fxe, fye, fx, fy = (np.fft.fft2(m) for m in mats)
    num = np.conj(fxe) * fx + np.conj(fye) * fy
    den = np.abs(fxe) ** 2 + np.abs(fye) ** 2 + eta
    return np.fft.ifft2(num / den)


def _crop_wrapped(full, cy, cx, side):
    r = side // 2
    rows = np.arange(cy - r, cy + r + 1) % full.shape[0]
    cols = np.arange(cx - r, cx + r + 1) % full.shape[1]
    return full[np.ix_(rows, cols)]


def _subpixel_shift(k, dy, dx):
    """Shift by |d| < 1 per axis with linear interpolation (moves the mean exactly)."""
    for axis, d in ((0, dy), (1, dx)):
        if d == 0:
            continue
        moved = np.roll(k, int(np.sign(d)), axis=axis)
        edge = [slice(None)] * 2
        edge[axis] = 0 if d > 0 else -1
        moved[tuple(edge)] = 0.0
        k = (1 - abs(d)) * k + abs(d) * moved
    return k


def project_kernel(full, side):
    """Turn a full-grid kernel estimate into a valid ``side x side`` blur kernel.

    Clip negatives, prune entries below 5% of the peak, crop a window around
    the mass, normalise, and re-centre (integer re-crop, then a sub-pixel
    linear shift for any remaining offset).
    """
    side = _check_side(side)
    rows, cols = full.shape
    if side > rows or side > cols:
        raise InvalidArgument("kernel side exceeds the image")
    k = np.clip(np.real(full), 0.0, None)
    peak = k.max()
    if not peak > 0:
        raise InvalidInput("kernel estimate has no positive mass")
    k = np.where(k >= PRUNE_FRACTION * peak, k, 0.0)
    cy, cx = np.unravel_index(int(np.argmax(k)), k.shape)
    seen = set()
    for _ in range(2 * side):
        win = _crop_wrapped(k, cy, cx, side)
        dy, dx = center_of_mass(win)
        step = (int(np.round(dy)), int(np.round(dx)))
        if step == (0, 0) or (cy, cx) in seen:
            break
        seen.add((cy, cx))
        cy, cx = (cy + step[0]) % rows, (cx + step[1]) % cols
    win = win / win.sum()
    dy, dx = center_of_mass(win)
    if abs(dy) > 0.5 or abs(dx) > 0.5:
        win = _subpixel_shift(win, -float(np.clip(dy, -0.999, 0.999)) if abs(dy) > 0.5 else 0.0,
                              -float(np.clip(dx, -0.999, 0.999)) if abs(dx) > 0.5 else 0.0)
        win = win / win.sum()
    return win


def solve_kernel(gx_e, gy_e, gx, gy, eta, side):
    """Closed-form ridge kernel estimate from edge and observed gradients."""
    if not (np.any(gx_e) or np.any(gy_e)):
        raise InvalidInput("edge maps carry no energy; cannot estimate a kernel")
    full = kernel_spectrum_solve(gx_e, gy_e, gx, gy, eta)
    return project_kernel(np.fft.fftshift(full.real), side)


def solve_latent(observed, kernel, gamma):
    """Ridge deconvolution ``ifft2[conj(K) F(X) / (|K|^2 + gamma)]``."""
    if not gamma > 0:
        raise InvalidArgument("gamma must be positive")
    y = np.asarray(observed)
    otf = psf_to_otf(np.asarray(kernel, dtype=np.float64), *y.shape)
    out = np.fft.ifft2(np.conj(otf) * np.fft.fft2(y) / (np.abs(otf) ** 2 + gamma))
    return out.real if np.isrealobj(y) else out


def estimate_kernel(blurry, params=None):
    """Alternate edge extraction, kernel solve and latent solve ``tau`` times.

    Edges are taken from a Gaussian-smoothed copy of the current latent
    (``params.latent_smoothing``; 0 disables it); the first pass uses the
    blurry input itself.  The loop ends after ``tau`` kernel solves or once
    successive kernels differ by less than ``params.tol`` in L1.
    """
    params = params or KebParams()
    y = as_complex_matrix(blurry)
    y = y.real if not np.any(y.imag) else y
    side = params.kernel_side
    if min(y.shape) < 4 * side:
        raise InvalidArgument(f"image {y.shape} too small for a {side}x{side} kernel")
    if np.ptp(np.real(y)) == 0 and np.ptp(np.imag(y)) == 0:
        raise InvalidInput("flat image: no structure to estimate a kernel from")
    gx, gy = gradients(y)
    latent = y
    kernel = None
    for it in range(params.tau):
        guide = np.real(latent)
        if params.latent_smoothing > 0:
            guide = gaussian_filter(guide, params.latent_smoothing, mode="wrap")
        ex, ey = salient_edges(*gradients(guide), params.edge_threshold_quantile)
        previous = kernel
        kernel = solve_kernel(ex, ey, gx, gy, params.eta, side)
        change = np.inf if previous is None else float(np.abs(kernel - previous).sum())
        log.debug("kernel iteration %d: L1 change %.3g", it, change)
        if change < params.tol:
            break
        latent = solve_latent(y, kernel, params.gamma)
    return kernel


# --------------------------------------------------------------------------
# synthetic kernels

def make_kernel(kind, side, supersample=16, **params):
    """Normalised, centred synthetic PSF.

    ``kind='gaussian'`` takes ``sigma`` (point sampled); ``'motion'`` takes
    ``length`` and ``angle`` in degrees (a segment of ``length`` pixels,
    bilinearly splatted); ``'disk'`` takes ``radius`` (area sampled by
    ``supersample`` x ``supersample`` sub-cells).
    """
    side = _check_side(side)
    r = side // 2
    ys, xs = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    if kind == "gaussian":
        sigma = float(params["sigma"])
        if not sigma > 0:
            raise InvalidArgument("sigma must be positive")
        k = np.exp(-(xs ** 2 + ys ** 2) / (2 * sigma ** 2))
    elif kind == "motion":
        length = float(params["length"])
        angle = np.deg2rad(float(params.get("angle", 0.0)))
        if not length > 0:
            raise InvalidArgument("length must be positive")
        half = max(length - 1.0, 0.0) / 2.0
        n = max(2, int(np.ceil(8 * (2 * half + 1))))
        t = np.linspace(-half, half, n) if half > 0 else np.zeros(1)
        px = r + t * np.cos(angle)
        py = r - t * np.sin(angle)
        k = np.zeros((side, side))
        x0 = np.floor(px).astype(int)
        y0 = np.floor(py).astype(int)
        fx, fy = px - x0, py - y0
        for oy, ox, w in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                          (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
            yy, xx = y0 + oy, x0 + ox
            ok = (yy >= 0) & (yy < side) & (xx >= 0) & (xx < side)
            np.add.at(k, (yy[ok], xx[ok]), w[ok])
    elif kind == "disk":
        radius = float(params["radius"])
        if not radius > 0:
            raise InvalidArgument("radius must be positive")
        s = int(supersample)
        sub = (np.arange(s) + 0.5) / s - 0.5
        k = np.zeros((side, side))
        for a in sub:
            for b in sub:
                k += (ys + a) ** 2 + (xs + b) ** 2 <= radius ** 2
        k /= s * s
    else:
        raise InvalidArgument(f"unknown kernel kind {kind!r}")
    total = k.sum()
    if not total > 0:
        raise InvalidArgument("kernel parameters give an empty support")
    return k / total


# --------------------------------------------------------------------------
# scoring and I/O

def ncc(a, b, max_shift=0):
    """Normalised cross-correlation of two kernels (Pearson, zero-mean).

    Kernels of different sides are compared after zero-padding the smaller
    one about its centre.  With ``max_shift > 0`` the best score over integer
    shifts up to that size is returned.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = max(a.shape + b.shape) + 2 * max_shift
    def embed(k):
        out = np.zeros((n, n))
        oy, ox = (n - k.shape[0]) // 2, (n - k.shape[1]) // 2
        out[oy:oy + k.shape[0], ox:ox + k.shape[1]] = k
        return out
    a, b = embed(a), embed(b)
    a = a - a.mean()
    best = -1.0
    for dy in range(-max_shift, max_shift + 1):
        for dx in range(-max_shift, max_shift + 1):
            bs = np.roll(b, (dy, dx), axis=(0, 1))
            bs = bs - bs.mean()
            den = np.linalg.norm(a) * np.linalg.norm(bs)
            if den > 0:
                best = max(best, float(np.sum(a * bs) / den))
    return best


def format_kern(kernel):
    k = validate_kernel(kernel, tol=1e-6)
    lines = ["KERN 1", f"{k.shape[0]} {k.shape[1]}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in k]
    return "\n".join(lines) + "\n"


def parse_kern(text):
    """Parse the ``KERN 1`` text format; the weights are renormalised to sum 1."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != ["KERN", "1"]:
        raise InvalidArgument("line 1: expected 'KERN 1'")
    try:
        dims = [int(v) for v in lines[1].split()]
    except (IndexError, ValueError):
        raise InvalidArgument("line 2: expected '<side> <side>'") from None
    if len(dims) != 2 or dims[0] != dims[1]:
        raise InvalidArgument("line 2: kernel must be square")
    side = dims[0]
    if side < 1 or side % 2 == 0:
        raise InvalidArgument(f"line 2: side {side} is not a positive odd number")
    rows = lines[2:]
    if len(rows) != side:
        raise InvalidArgument(f"expected {side} kernel rows, found {len(rows)}")
    k = np.empty((side, side))
    for i, row in enumerate(rows):
        try:
            vals = [float(v) for v in row.split()]
        except ValueError:
            raise InvalidArgument(f"line {i + 3}: non-numeric entry") from None
        if len(vals) != side:
            raise InvalidArgument(f"line {i + 3}: expected {side} values, found {len(vals)}")
        k[i] = vals
    if not np.all(np.isfinite(k)) or np.any(k < 0):
        raise InvalidArgument("kernel entries must be finite and nonnegative")
    if not k.sum() > 0:
        raise InvalidArgument("kernel has no mass")
    return validate_kernel(k / k.sum())


def load_kern(path):
    with open(path, "r", encoding="ascii") as fh:
        return parse_kern(fh.read())


def save_kern(path, kernel):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_kern(kernel))
