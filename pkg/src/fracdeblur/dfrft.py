"""Discrete fractional Fourier transforms.

The eigen-method builds discrete Hermite-Gauss vectors from a symmetric matrix
that commutes with the unitary DFT, split into its even and odd invariant
subspaces so that eigenvectors of the two parities never mix.  Eigenvector
``l`` of the plan carries the eigenvalue ``exp(-1j * pi * alpha * l / 2)``.

Spatial origin is index 0 (same layout as :func:`numpy.fft.fft`), so that
``frft_matrix(plan, 1)`` is exactly the unitary DFT matrix and
``frft_matrix(plan, 2)`` the circular reversal ``x[n] -> x[-n mod N]``.
"""

import threading
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.ndimage import map_coordinates

from .tensorcore import InvalidArgument


def canonical_alpha(alpha):
    """Reduce a fractional order modulo 4 into (-2, 2]; canonical values pass unchanged."""
    a = float(alpha)
    if -2.0 < a <= 2.0:
        return a
    a = (a + 2.0) % 4.0 - 2.0
    return 2.0 if a == -2.0 else a


@dataclass(frozen=True)
class FracOrder:
    """Per-axis fractional orders; ``alpha_x`` acts along rows (horizontal)."""

    alpha_x: float
    alpha_y: float

    def __post_init__(self):
        object.__setattr__(self, "alpha_x", canonical_alpha(self.alpha_x))
        object.__setattr__(self, "alpha_y", canonical_alpha(self.alpha_y))

    @classmethod
    def of(cls, order):
        if isinstance(order, FracOrder):
            return order
        if np.ndim(order) == 0:
            return cls(float(order), float(order))
        ax, ay = order
        return cls(float(ax), float(ay))

    @property
    def theta_x(self):
        return self.alpha_x * np.pi / 2

    @property
    def theta_y(self):
        return self.alpha_y * np.pi / 2

    def inverse(self):
        return FracOrder(-self.alpha_x, -self.alpha_y)

    def as_tuple(self):
        return (self.alpha_x, self.alpha_y)


@dataclass(frozen=True, eq=False)
class FrftPlan:
    n: int
    basis: np.ndarray
    eigen_indices: np.ndarray
    accuracy: int = 8


def _difference_stencil(accuracy):
    """Central second-difference coefficients c_1..c_k of the given accuracy order."""
    k = accuracy // 2
    c = np.array([
        2.0 * (-1) ** (m + 1) * factorial(k) ** 2 / (m * m * factorial(k - m) * factorial(k + m))
        for m in range(1, k + 1)
    ])
    return c


def commuting_matrix(n, accuracy=2):
    """Symmetric matrix commuting with the unitary DFT.

    Circulant second-difference operator plus its DFT-conjugate (a diagonal).
    ``accuracy=2`` gives the classic tridiagonal-plus-corners form with diagonal
    ``2 cos(2 pi k / n) - 4``.
    """
    c = _difference_stencil(accuracy)
    row = np.zeros(n)
    row[0] = -2.0 * c.sum()
    for m, cm in enumerate(c, start=1):
        row[m % n] += cm
        row[-m % n] += cm
    idx = np.arange(n)
    circ = row[(idx[None, :] - idx[:, None]) % n]
    diag = np.real(np.fft.fft(row))
    return circ + np.diag(diag)


def _parity_bases(n):
    half = (n - 1) // 2
    even = np.zeros((n, n // 2 + 1))
    odd = np.zeros((n, n - (n // 2 + 1)))
    even[0, 0] = 1.0
    r = 1 / np.sqrt(2)
    for k in range(1, half + 1):
        even[k, k] = even[n - k, k] = r
        odd[k, k - 1] = r
        odd[n - k, k - 1] = -r
    if n % 2 == 0:
        even[n // 2, n // 2] = 1.0
    return even, odd


def _fix_sign(v):
    tol = 1e-9 * np.max(np.abs(v))
    first = v[np.flatnonzero(np.abs(v) > tol)[0]]
    return v if first > 0 else -v


def build_plan(n, accuracy=8):
    """Construct the DFRFT eigenbasis for length ``n`` (deterministic)."""
    n = int(n)
    if n < 2:
        raise InvalidArgument("DFRFT plan needs n >= 2")
    S = commuting_matrix(n, accuracy)
    pe, po = _parity_bases(n)
    ev_e, vec_e = np.linalg.eigh(pe.T @ S @ pe)
    vec_e = pe @ vec_e[:, np.argsort(-ev_e, kind="stable")]
    if po.shape[1]:
        ev_o, vec_o = np.linalg.eigh(po.T @ S @ po)
        vec_o = po @ vec_o[:, np.argsort(-ev_o, kind="stable")]
    else:
        vec_o = np.zeros((n, 0))

    basis = np.empty((n, n))
    basis[:, 0::2] = vec_e[:, : (n + 1) // 2]
    basis[:, 1: 2 * vec_o.shape[1]: 2] = vec_o
    indices = np.arange(n)
    if n % 2 == 0:
        # the surplus even vector takes Hermite index n; index n - 1 is absent
        basis[:, n - 1] = vec_e[:, n // 2]
        indices[n - 1] = n
    for k in range(n):
        basis[:, k] = _fix_sign(basis[:, k])
    basis.setflags(write=False)
    indices.setflags(write=False)
    return FrftPlan(n=n, basis=basis, eigen_indices=indices, accuracy=accuracy)


_plans = {}
_plans_lock = threading.Lock()


def get_plan(n, accuracy=8):
    """Cached :func:`build_plan`; concurrent first builders produce identical plans."""
    key = (int(n), accuracy)
    plan = _plans.get(key)
    if plan is None:
        plan = build_plan(n, accuracy)
        with _plans_lock:
            _plans.setdefault(key, plan)
    return plan


def frft_matrix(plan, alpha):
    phases = np.exp(-0.5j * np.pi * canonical_alpha(alpha) * plan.eigen_indices)
    return (plan.basis * phases) @ plan.basis.T


@lru_cache(maxsize=256)
def cached_frft_matrix(n, alpha):
    """Read-only F^alpha matrix of size n, memoised per (n, alpha)."""
    m = frft_matrix(get_plan(n), alpha)
    m.setflags(write=False)
    return m


def frft_eigen(plan, x, alpha):
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.shape[0] != plan.n:
        raise InvalidArgument(f"expected a vector of length {plan.n}, got shape {x.shape}")
    phases = np.exp(-0.5j * np.pi * canonical_alpha(alpha) * plan.eigen_indices)
    return plan.basis @ (phases * (plan.basis.T @ x))


def _upsample2(x):
    """Periodic band-limited interpolation to twice the rate along the last axis."""
    n = x.shape[-1]
    X = np.fft.fft(x, axis=-1)
    Y = np.zeros(x.shape[:-1] + (2 * n,), dtype=np.complex128)
    h = (n + 1) // 2
    Y[..., :h] = X[..., :h]
    Y[..., 2 * n - (n - h):] = X[..., h:]
    if n % 2 == 0:
        # split the Nyquist bin so real signals stay real
        Y[..., h] = 0.5 * X[..., h]
        Y[..., 2 * n - h] = 0.5 * X[..., h]
    return 2 * np.fft.ifft(Y, axis=-1)


def _chirp_core(xc, a):
    """Chirp multiply / convolve / multiply for 0.5 <= a <= 1.5 on centred data.

    ``xc`` has its origin at index ``n // 2``; samples are spaced 1/sqrt(n) in the
    dimensionless coordinate, and the work is done on a 2x oversampled grid.
    """
    n = xc.shape[-1]
    phi = a * np.pi / 2
    cot, csc = 1 / np.tan(phi), 1 / np.sin(phi)
    y = _upsample2(xc)
    origin = 2 * (n // 2)
    j = np.arange(2 * n) - origin
    step2 = 1.0 / (4 * n)  # squared half-sample spacing
    outer = np.exp(1j * np.pi * (cot - csc) * step2 * j ** 2)
    lags = np.arange(-(2 * n - 1), 2 * n)
    h = np.exp(1j * np.pi * csc * step2 * lags ** 2)
    size = 1 << int(np.ceil(np.log2(2 * n + lags.size - 1)))
    conv = np.fft.ifft(np.fft.fft(y * outer, size, axis=-1) * np.fft.fft(h, size), axis=-1)
    conv = conv[..., 2 * n - 1: 4 * n - 1]
    amp = np.sqrt(1 - 1j * cot) * np.sqrt(step2)
    out = amp * outer * conv
    return out[..., 0::2]


def _frft_fast_lastaxis(x, alpha):
    n = x.shape[-1]
    a = canonical_alpha(alpha) % 4.0
    if a == 0.0:
        return x.copy()
    if a == 1.0:
        return np.fft.fft(x, axis=-1, norm="ortho")
    if a == 2.0:
        return np.roll(x[..., ::-1], 1, axis=-1)
    if a == 3.0:
        return np.fft.ifft(x, axis=-1, norm="ortho")
    if n < 8:
        return x @ cached_frft_matrix(n, a).T
    if a > 2.0:
        x = np.roll(x[..., ::-1], 1, axis=-1)
        a -= 2.0
    if a > 1.5:
        x = np.fft.fft(x, axis=-1, norm="ortho")
        a -= 1.0
    if a < 0.5:
        x = np.fft.ifft(x, axis=-1, norm="ortho")
        a += 1.0
    xc = np.fft.fftshift(x, axes=-1)
    return np.fft.ifftshift(_chirp_core(xc, a), axes=-1)


def frft_fast(x, alpha, axis=-1):
    """O(N log N) FRFT by chirp decomposition; approximates :func:`frft_eigen`.

    Orders outside 0.5 <= |alpha| <= 1.5 are brought into that band by
    composing with exact unitary DFTs; integer orders are handled exactly.
    """
    x = np.asarray(x, dtype=np.complex128)
    x = np.moveaxis(x, axis, -1)
    return np.moveaxis(_frft_fast_lastaxis(x, alpha), -1, axis)


def frft2d(m, order, method="eigen"):
    """Separable 2D FRFT: rows with ``alpha_x``, then columns with ``alpha_y``.

    Works on the two leading axes of ``m``; extra trailing axes (channels)
    are transformed independently.
    """
    order = FracOrder.of(order)
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim < 2:
        raise InvalidArgument("frft2d needs at least two axes")
    if method == "eigen":
        rows, cols = m.shape[0], m.shape[1]
        out = m
        if order.alpha_x != 0.0:
            mx = cached_frft_matrix(cols, order.alpha_x) if cols >= 2 else None
            if mx is not None:
                out = np.tensordot(mx, out, axes=([1], [1])).swapaxes(0, 1)
        if order.alpha_y != 0.0 and rows >= 2:
            my = cached_frft_matrix(rows, order.alpha_y)
            out = np.tensordot(my, out, axes=([1], [0]))
        return np.array(out, dtype=np.complex128)
    if method == "fast":
        out = frft_fast(m, order.alpha_x, axis=1)
        return frft_fast(out, order.alpha_y, axis=0)
    raise InvalidArgument(f"unknown method {method!r}")


def chirp_degenerate(alpha):
    """True when theta = alpha*pi/2 is a multiple of pi (cot undefined)."""
    return canonical_alpha(alpha) % 2.0 == 0.0


def chirp_vector(n, alpha):
    """m_N = exp(-1j * k**2 * cot(theta) / 2) for k = 1..n; all ones when degenerate."""
    if chirp_degenerate(alpha):
        return np.ones(n, dtype=np.complex128)
    a = canonical_alpha(alpha)
    if abs(a) == 1.0:
        # cot(pi/2) = 0 exactly; np.tan would leave a ~1e-16 phase
        return np.ones(n, dtype=np.complex128)
    k = np.arange(1, n + 1, dtype=np.float64)
    return np.exp(-0.5j * k ** 2 / np.tan(a * np.pi / 2))


def chirp_matrix(rows, cols, order):
    """Rank-one chirp mask ``m_H m_W^T`` (rows use alpha_y, columns alpha_x)."""
    if rows < 1 or cols < 1:
        raise InvalidArgument("chirp_matrix needs positive dims")
    order = FracOrder.of(order)
    return np.outer(chirp_vector(rows, order.alpha_y), chirp_vector(cols, order.alpha_x))


def frft_convolve(x, y, alpha, plan=None):
    """Transform of a circular convolution via the chirp-product rule.

    Returns ``sqrt(N) * chirp * F_a{x} * F_a{y}``; the sqrt(N) is the unitary
    scale of the ordinary product theorem (alpha = 1).
    """
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgument("frft_convolve needs two vectors of equal length")
    n = x.shape[0]
    plan = plan or get_plan(n)
    return np.sqrt(n) * chirp_vector(n, alpha) * frft_eigen(plan, x, alpha) * frft_eigen(plan, y, alpha)


def lag_limit(n):
    return max(2, n // 4)


def wigner(x):
    """Discrete pseudo-Wigner distribution, shape (N, N), rows = position.

    Uses circular indexing with the symmetric lag window |tau| < N/4 (see
    :func:`lag_limit`), which suppresses cross-term aliasing. Column
    ``k`` corresponds to frequency ``k / (2N)`` cycles/sample (period 1/2, so
    signals must occupy |f| < 1/4 to avoid aliasing).
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[0]
    if x.ndim != 1 or n < 4:
        raise InvalidArgument("wigner needs a vector of length >= 4")
    tau = np.arange(n)
    tau = np.where(tau > n // 2, tau - n, tau)
    pos = np.arange(n)[:, None]
    r = x[(pos + tau) % n] * np.conj(x[(pos - tau) % n])
    r[:, np.abs(tau) >= lag_limit(n)] = 0.0
    w = np.fft.fft(r, axis=1)
    return w.real


def _centred_wigner(x):
    """Wigner on centred axes: rows n in [-N/2, N/2), columns DFT-bin units m = k/2."""
    w = wigner(x)
    n = x.shape[0]
    k = np.arange(n)
    k = np.where(k >= n // 2 + n % 2, k - n, k)  # signed lag-frequency index
    freq = k / 2.0
    order = np.argsort(freq, kind="stable")
    rows = np.fft.fftshift(np.arange(n))
    return w[rows][:, order], np.fft.fftshift(np.arange(n)) - 0, freq[order]


def wigner_rotation_check(x, alpha):
    """Normalised correlation between W[frft(x)] and W[x] rotated by theta.

    The rotation is about the transform origin, index 0, so test signals
    should be concentrated around it (e.g. ``np.fft.ifftshift`` of a centred
    window) to stay inside the circular grid.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[0]
    if n < 32:
        raise InvalidArgument("wigner_rotation_check needs length >= 32")
    plan = get_plan(n)
    w0, _, freq = _centred_wigner(x)
    w1, _, _ = _centred_wigner(frft_eigen(plan, x, alpha))
    theta = canonical_alpha(alpha) * np.pi / 2
    pos = np.arange(n) - n // 2
    s, f = np.meshgrid(pos, freq, indexing="ij")
    src_s = s * np.cos(theta) - f * np.sin(theta)
    src_f = s * np.sin(theta) + f * np.cos(theta)
    # fractional array coordinates on w0's grid (row step 1, column step 1/2)
    row_c = src_s + n // 2
    col_c = (src_f - freq[0]) * 2.0
    rotated = map_coordinates(w0, [row_c, col_c], order=1, mode="constant", cval=0.0)
    a = w1 - w1.mean()
    b = rotated - rotated.mean()
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        return 0.0
    return float(np.clip(np.sum(a * b) / denom, -1.0, 1.0))
