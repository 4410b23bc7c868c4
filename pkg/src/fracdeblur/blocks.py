"""Toy-scale forward passes of the fractional-Fourier transformer blocks.

Everything here is untrained: weights come from a seeded fan-in-scaled uniform
initialisation held in a :class:`ParamStore`.  The blocks are

* ``shallow_extract`` -- conv3x3 -> GELU -> conv3x3
* ``f2sa_forward``    -- product attention in the FRFT domain of 8x8 patches
  with a phase-modulated key
* ``fmffn_forward``   -- low/high frequency split with softmax channel weights
* ``f3rb_forward``    -- parallel FRFT -> conv -> ReLU -> inverse FRFT branches
* ``fhtb_forward``    -- one F3RB followed by ``depth`` transformer layers
* ``f2former_forward``-- three-scale encoder/decoder producing one image per scale

Every block ends in a bias-free projection added to its input, so zeroing
that projection turns the block into the identity map exactly.

Scalar learnables (FRFT orders, filter cut-offs, Wiener NSR) are fitted
derivative-free with :func:`fit_scalar_params`.
"""

import io
import logging
import math
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erf, expit

from .dfrft import FracOrder, cached_frft_matrix, canonical_alpha, chirp_matrix, frft2d
from .freqsplit import DEFAULT_UC, DEFAULT_US, build_filter
from .tensorcore import InvalidArgument, as_image, resample
from .wiener import f2wd_deblur

log = logging.getLogger(__name__)

F3RB_ORDERS = (0.0, 0.25, 0.5, 0.75)
DILATIONS = (3, 5, 7)
LN_EPS = 1e-6
SCALES = 3


@dataclass(frozen=True)
class BlockConfig:
    channels: int = 48
    heads: int = 1
    attn_patch: int = 8
    depths: tuple = (2, 4, 8)
    image_channels: int = 3

    def __post_init__(self):
        if self.channels < 1 or self.heads < 1 or self.attn_patch < 1:
            raise InvalidArgument("channels, heads and attn_patch must be positive")
        if self.channels % self.heads:
            raise InvalidArgument(f"channels {self.channels} not divisible by heads {self.heads}")
        if len(self.depths) != SCALES or min(self.depths) < 1:
            raise InvalidArgument("depths must hold three counts >= 1")

    def width(self, scale):
        """Feature channels at scale 1, 2 or 3."""
        return self.channels * 2 ** (scale - 1)


@dataclass(frozen=True)
class ObjectiveWeights:
    lambda_t1: float = 0.1
    lambda_t_alpha: float = 0.1
    loss_alpha: float = 0.5

    def __post_init__(self):
        if min(self.lambda_t1, self.lambda_t_alpha, self.loss_alpha) < 0:
            raise InvalidArgument("objective weights must be nonnegative")


# --------------------------------------------------------------------------
# parameter store

MAGIC = b"F2P1"
SEED_KEY = "__seed__"


class ParamStore:
    """Named float64 arrays plus the seed they were initialised from.

    Entries named ``*.alpha`` hold FRFT order pairs and are kept canonical in
    (-2, 2].  Stores are treated as immutable; :meth:`with_value` returns a
    modified copy.
    """

    def __init__(self, params, seed=0):
        self._params = {}
        for name, value in params.items():
            self._params[name] = self._normalise(name, value)
        self.seed = int(seed)

    @staticmethod
    def _normalise(name, value):
        arr = np.array(value, dtype=np.float64)
        if name.endswith(".alpha"):
            arr = np.vectorize(canonical_alpha, otypes=[np.float64])(arr) if arr.size else arr
        arr.setflags(write=False)
        return arr

    def __getitem__(self, name):
        try:
            return self._params[name]
        except KeyError:
            raise KeyError(f"no parameter named {name!r}") from None

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return sorted(self._params)

    def items(self):
        return ((n, self._params[n]) for n in self.names())

    def with_value(self, name, value):
        if name not in self._params:
            raise KeyError(f"no parameter named {name!r}")
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._params[name].shape:
            raise InvalidArgument(f"{name}: shape {value.shape} != {self._params[name].shape}")
        new = dict(self._params)
        new[name] = value
        return ParamStore(new, self.seed)

    def with_zeroed(self, predicate):
        """Copy with every entry whose name satisfies ``predicate`` set to zero."""
        new = {n: (np.zeros_like(v) if predicate(n) else v) for n, v in self._params.items()}
        return ParamStore(new, self.seed)

    def __eq__(self, other):
        if not isinstance(other, ParamStore) or self.seed != other.seed:
            return False
        if self.names() != other.names():
            return False
        return all(self[n].shape == other[n].shape and self[n].tobytes() == other[n].tobytes()
                   for n in self.names())

    # ---- F2P1 container
    def to_bytes(self):
        entries = list(self.items()) + [(SEED_KEY, np.array(float(self.seed)))]
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<I", len(entries)))
        for name, arr in entries:
            raw = name.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
            buf.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                buf.write(struct.pack("<Q", d))
            buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data):
        view = memoryview(data)
        pos = 0

        def take(n, what):
            nonlocal pos
            if pos + n > len(view):
                raise InvalidArgument(f"truncated F2P1 data reading {what} at byte {pos}")
            chunk = view[pos:pos + n]
            pos += n
            return chunk

        if bytes(take(4, "magic")) != MAGIC:
            raise InvalidArgument("not an F2P1 parameter file")
        (count,) = struct.unpack("<I", take(4, "entry count"))
        params = {}
        seed = 0
        for _ in range(count):
            (nlen,) = struct.unpack("<I", take(4, "name length"))
            name = bytes(take(nlen, "name")).decode("utf-8")
            (rank,) = struct.unpack("<I", take(4, "rank"))
            dims = tuple(struct.unpack("<Q", take(8, "dims"))[0] for _ in range(rank))
            size = int(np.prod(dims)) if dims else 1
            arr = np.frombuffer(bytes(take(8 * size, f"payload of {name}")), dtype="<f8")
            arr = arr.astype(np.float64).reshape(dims)
            if name == SEED_KEY:
                seed = int(arr)
            else:
                params[name] = arr
        if pos != len(view):
            raise InvalidArgument(f"{len(view) - pos} trailing bytes after F2P1 entries")
        return cls(params, seed)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


class _Init:
    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)
        self.params = {}

    def conv(self, name, kh, kw, cin, cout, bias=True):
        bound = 1.0 / math.sqrt(kh * kw * cin)
        self.params[name + ".w"] = self.rng.uniform(-bound, bound, (kh, kw, cin, cout))
        if bias:
            self.params[name + ".b"] = self.rng.uniform(-bound, bound, cout)

    def depthwise(self, name, c):
        bound = 1.0 / 3.0
        self.params[name + ".w"] = self.rng.uniform(-bound, bound, (3, 3, c))
        self.params[name + ".b"] = self.rng.uniform(-bound, bound, c)


def _init_f2tb(init, prefix, c, heads):
    init.conv(prefix + ".sa.qkv", 1, 1, c, 3 * c)
    init.depthwise(prefix + ".sa.dw", 3 * c)
    init.conv(prefix + ".sa.proj", 1, 1, c, c, bias=False)
    init.params[prefix + ".sa.alpha"] = np.full((heads, 2), 0.5)
    init.conv(prefix + ".ffn.proj_in", 1, 1, c, c)
    for d in DILATIONS:
        init.conv(f"{prefix}.ffn.dil{d}", 3, 3, c, c)
    init.conv(prefix + ".ffn.wd", 1, 1, len(DILATIONS) * c, 2 * c)
    init.conv(prefix + ".ffn.proj_out", 1, 1, c, c, bias=False)
    init.params[prefix + ".ffn.filter"] = np.array([DEFAULT_UC, DEFAULT_US])


def _init_fhtb(init, prefix, c, depth, heads):
    for i in range(len(F3RB_ORDERS)):
        init.conv(f"{prefix}.f3rb.b{i}", 3, 3, 2 * c, 2 * c)
    init.conv(prefix + ".f3rb.fuse", 1, 1, len(F3RB_ORDERS) * c, c, bias=False)
    for j in range(depth):
        _init_f2tb(init, f"{prefix}.t{j}", c, heads)


BLOCK_SCALES = {"enc1": 1, "enc2": 2, "bott": 3, "dec2": 2, "dec1": 1}


def block_depth(name, cfg):
    return cfg.depths[BLOCK_SCALES[name] - 1]


def init_params(cfg=None, seed=0, nsr=1e-2):
    """Seeded initial store for the full three-scale network of ``cfg``."""
    cfg = cfg or BlockConfig()
    init = _Init(seed)
    cin = cfg.image_channels
    for p in range(1, SCALES + 1):
        c = cfg.width(p)
        init.conv(f"shallow.s{p}.conv1", 3, 3, cin, c)
        init.conv(f"shallow.s{p}.conv2", 3, 3, c, c)
        init.params[f"wiener.s{p}.alpha"] = np.array([0.5, 0.5])
    init.params["wiener.nsr"] = np.array(float(nsr))
    for name, scale in BLOCK_SCALES.items():
        _init_fhtb(init, name, cfg.width(scale), block_depth(name, cfg), cfg.heads)
    init.conv("down1", 1, 1, 4 * cfg.width(1), cfg.width(2))
    init.conv("down2", 1, 1, 4 * cfg.width(2), cfg.width(3))
    init.conv("up3", 1, 1, cfg.width(3), 4 * cfg.width(2))
    init.conv("up2", 1, 1, cfg.width(2), 4 * cfg.width(1))
    for p in range(1, SCALES + 1):
        init.conv(f"head.s{p}", 3, 3, cfg.width(p), cin)
    return ParamStore(init.params, seed)


# --------------------------------------------------------------------------
# primitive layers

def conv2d(x, w, b=None, dilation=1, padding="edge"):
    """Same-size 2D convolution (correlation form) of an (H, W, Cin) tensor.

    ``w`` has shape (kh, kw, Cin, Cout); ``padding`` is ``'edge'`` or ``'zero'``.
    """
    kh, kw, cin, cout = w.shape
    H, W, C = x.shape
    if C != cin:
        raise InvalidArgument(f"conv expects {cin} input channels, got {C}")
    ph, pw = dilation * (kh // 2), dilation * (kw // 2)
    if ph or pw:
        if padding == "edge":
            xp = np.pad(x, ((ph, ph), (pw, pw), (0, 0)), mode="edge")
        elif padding == "zero":
            xp = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
        else:
            raise InvalidArgument(f"unknown padding {padding!r}")
    else:
        xp = x
    out = np.zeros((H, W, cout))
    for i in range(kh):
        for j in range(kw):
            patch = xp[i * dilation:i * dilation + H, j * dilation:j * dilation + W, :]
            out += patch @ w[i, j]
    if b is not None:
        out += b
    return out


def depthwise3x3(x, w, b):
    H, W, _ = x.shape
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    out = np.zeros_like(x)
    for i in range(3):
        for j in range(3):
            out += xp[i:i + H, j:j + W, :] * w[i, j]
    return out + b


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def layer_norm(x):
    """Normalise each pixel's channel vector to zero mean and unit variance."""
    mu = x.mean(axis=2, keepdims=True)
    var = x.var(axis=2, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS)


def softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def _conv(params, name, x, **kw):
    b = params[name + ".b"] if (name + ".b") in params else None
    return conv2d(x, params[name + ".w"], b, **kw)


# --------------------------------------------------------------------------
# blocks

def shallow_extract(image, params, scale=1):
    x = as_image(image)
    h = gelu(_conv(params, f"shallow.s{scale}.conv1", x))
    return _conv(params, f"shallow.s{scale}.conv2", h)


def _pad_to_patch(x, patch):
    H, W, _ = x.shape
    ph, pw = (-H) % patch, (-W) % patch
    if ph == 0 and pw == 0:
        return x
    mode = "reflect" if ph < H and pw < W else "symmetric"
    return np.pad(x, ((0, ph), (0, pw), (0, 0)), mode=mode)


def _patches(x, patch):
    H, W, C = x.shape
    return x.reshape(H // patch, patch, W // patch, patch, C)


def _unpatch(t):
    nh, p, nw, q, C = t.shape
    return t.reshape(nh * p, nw * q, C)


def patch_frft(t, order):
    """FRFT of every (patch x patch) tile of a patched tensor, per-axis orders."""
    order = FracOrder.of(order)
    p = t.shape[1]
    my = cached_frft_matrix(p, order.alpha_y)
    mx = cached_frft_matrix(p, order.alpha_x)
    t = np.einsum("ar,irjsc->iajsc", my, t)
    return np.einsum("bs,iajsc->iajbc", mx, t)


def sigmoid(x):
    return expit(x)


PHASE_SNAP = 1e-12


def principal_phase(z):
    """Phase in (-pi, pi], with round-off imaginary parts snapped to +0.

    Real-valued bins (DC, Nyquist) of real data otherwise land on either side
    of the branch cut depending on the transform's rounding, which flips
    ``sigmoid(arg)`` between ~0.04 and ~0.96.
    """
    z = np.asarray(z)
    small = np.abs(z.imag) <= PHASE_SNAP * np.abs(z)
    return np.angle(np.where(small, z.real + 0j, z))


def _attention_map(q, k, order, patch, transform):
    """sigma(Re A) for one head; ``transform(t, order)`` is the tile FRFT."""
    qt = transform(_patches(q, patch), order)
    kt = transform(_patches(k, patch), order)
    k_ref = sigmoid(principal_phase(kt)) * kt
    m = chirp_matrix(patch, patch, order)[None, :, None, :, None]
    # attention product with both Hermitian marks read as elementwise conjugation:
    # (Q (.) K_ref^H)^H = conj(Q) (.) K_ref
    prod = m * np.conj(qt) * k_ref
    a = transform(prod, FracOrder.of(order).inverse())
    return sigmoid(_unpatch(a).real)


def _fft_tiles(t, order):
    order = FracOrder.of(order)
    if order.as_tuple() == (1.0, 1.0):
        return np.fft.fft2(t, axes=(1, 3), norm="ortho")
    if order.as_tuple() == (-1.0, -1.0):
        return np.fft.ifft2(t, axes=(1, 3), norm="ortho")
    raise InvalidArgument("the Fourier reference path only supports orders (+-1, +-1)")


def f2sa_forward(x, params, cfg, prefix="t", reference=False):
    """Fractional-domain product self-attention with a residual connection.

    ``reference=True`` uses plain FFTs on the tiles and requires all head
    orders to be (1, 1); it exists to cross-check the fractional path.
    """
    x = as_image(x)
    H, W, C = x.shape
    if C % cfg.heads:
        raise InvalidArgument(f"channels {C} not divisible by heads {cfg.heads}")
    y = layer_norm(x)
    qkv = depthwise3x3(_conv(params, prefix + ".sa.qkv", y), params[prefix + ".sa.dw.w"],
                       params[prefix + ".sa.dw.b"])
    q, k, v = qkv[..., :C], qkv[..., C:2 * C], qkv[..., 2 * C:]
    patch = cfg.attn_patch
    qp, kp = _pad_to_patch(q, patch), _pad_to_patch(k, patch)
    alphas = params[prefix + ".sa.alpha"]
    hc = C // cfg.heads
    attn = np.empty(qp.shape)
    for h in range(cfg.heads):
        sl = slice(h * hc, (h + 1) * hc)
        order = FracOrder(float(alphas[h, 0]), float(alphas[h, 1]))
        transform = _fft_tiles if reference else patch_frft
        attn[..., sl] = _attention_map(qp[..., sl], kp[..., sl], order, patch, transform)
    attn = attn[:H, :W]
    return x + _conv(params, prefix + ".sa.proj", attn * v)


def _split_channels(p, bank):
    spec = np.fft.fft2(p, axes=(0, 1), norm="ortho")
    low = np.fft.ifft2(spec * np.fft.ifftshift(bank.w_low)[:, :, None], axes=(0, 1), norm="ortho").real
    high = np.fft.ifft2(spec * np.fft.ifftshift(bank.w_high)[:, :, None], axes=(0, 1), norm="ortho").real
    return low, high


def fmffn_weights(x, params, cfg, prefix="t"):
    """Intermediate FM-FFN quantities: projected input, bands and softmax weights."""
    x = as_image(x)
    H, W, C = x.shape
    proj = _conv(params, prefix + ".ffn.proj_in", layer_norm(x))
    u_c, u_s = (float(v) for v in params[prefix + ".ffn.filter"])
    bank = build_filter(H, W, "cosine_bell", max(u_c, 1e-6), max(u_s, 0.0))
    low, high = _split_channels(proj, bank)
    z = (low + high).mean(axis=(0, 1))[None, None, :]
    feats = [_conv(params, f"{prefix}.ffn.dil{d}", z, dilation=d, padding="zero") for d in DILATIONS]
    logits = _conv(params, prefix + ".ffn.wd", np.concatenate(feats, axis=2))[0, 0]
    w = softmax(logits)
    return {"proj": proj, "low": low, "high": high, "weights": w, "w_high": w[:C], "w_low": w[C:]}


def fmffn_forward(x, params, cfg, prefix="t"):
    """Frequency-multiplexed feed-forward block with a residual connection."""
    x = as_image(x)
    parts = fmffn_weights(x, params, cfg, prefix)
    mixed = parts["w_low"] * parts["low"] + parts["w_high"] * parts["high"]
    return x + _conv(params, prefix + ".ffn.proj_out", mixed)


def f3rb_branch(x, params, prefix, index, alpha):
    """One F3RB branch: FRFT -> conv on stacked (Re, Im) -> ReLU -> inverse FRFT."""
    C = x.shape[2]
    z = frft2d(x, (alpha, alpha)) if alpha != 0 else x.astype(np.complex128)
    stacked = np.concatenate([z.real, z.imag], axis=2)
    h = np.maximum(_conv(params, f"{prefix}.f3rb.b{index}", stacked), 0.0)
    back = h[..., :C] + 1j * h[..., C:]
    if alpha != 0:
        back = frft2d(back, (-alpha, -alpha))
    return back.real


def f3rb_forward(x, params, prefix="enc1"):
    x = as_image(x)
    branches = [f3rb_branch(x, params, prefix, i, a) for i, a in enumerate(F3RB_ORDERS)]
    return x + _conv(params, prefix + ".f3rb.fuse", np.concatenate(branches, axis=2))


def fhtb_forward(x, depth, params, cfg, prefix="enc1"):
    if depth < 1:
        raise InvalidArgument("depth must be >= 1")
    h = f3rb_forward(x, params, prefix)
    for j in range(depth):
        tb = f"{prefix}.t{j}"
        h = f2sa_forward(h, params, cfg, tb)
        h = fmffn_forward(h, params, cfg, tb)
    return h


def image_pyramid(image, scales=SCALES):
    out = [as_image(image)]
    for _ in range(scales - 1):
        out.append(resample(out[-1], "down2", "average"))
    return out


def _f2wd(features, kernel, params, scale):
    alpha = params[f"wiener.s{scale}.alpha"]
    nsr = float(params["wiener.nsr"])
    return f2wd_deblur(features, kernel, order=(float(alpha[0]), float(alpha[1])), nsr=nsr)


def f2former_forward(image, kernels, params, cfg=None):
    """Three-scale encoder/decoder; returns ``[Y1, Y2, Y3]`` at full, half, quarter size."""
    cfg = cfg or BlockConfig()
    x = as_image(image)
    H, W, _ = x.shape
    if H % 4 or W % 4:
        raise InvalidArgument(f"image dims must be divisible by 4, got {H}x{W}")
    if len(kernels) != SCALES:
        raise InvalidArgument("need one kernel per scale")
    pyr = image_pyramid(x)
    feats = [_f2wd(shallow_extract(pyr[p], params, p + 1), kernels[p], params, p + 1)
             for p in range(SCALES)]

    e1 = fhtb_forward(feats[0], block_depth("enc1", cfg), params, cfg, "enc1")
    d = _conv(params, "down1", resample(e1, "down2", "pixel_unshuffle")) + feats[1]
    e2 = fhtb_forward(d, block_depth("enc2", cfg), params, cfg, "enc2")
    d = _conv(params, "down2", resample(e2, "down2", "pixel_unshuffle")) + feats[2]
    b = fhtb_forward(d, block_depth("bott", cfg), params, cfg, "bott")
    y3 = _conv(params, "head.s3", b)

    u = resample(_conv(params, "up3", b), "up2", "pixel_shuffle") + e2
    d2 = fhtb_forward(u, block_depth("dec2", cfg), params, cfg, "dec2")
    y2 = _conv(params, "head.s2", d2)
    u = resample(_conv(params, "up2", d2), "up2", "pixel_shuffle") + e1
    d1 = fhtb_forward(u, block_depth("dec1", cfg), params, cfg, "dec1")
    y1 = _conv(params, "head.s1", d1)
    return [y1, y2, y3]


# --------------------------------------------------------------------------
# objective, fitting, sensitivity

def _channel_frft(t, alpha):
    return frft2d(t, (alpha, alpha))


def loss_terms(predictions, targets, weights=None):
    """Per-domain L1 terms ``{'s', 't1', 't_alpha'}`` summed over scales."""
    weights = weights or ObjectiveWeights()
    if len(predictions) != len(targets):
        raise InvalidArgument("predictions and targets differ in scale count")
    terms = {"s": 0.0, "t1": 0.0, "t_alpha": 0.0}
    for yh, y in zip(predictions, targets):
        yh, y = as_image(yh), as_image(y)
        if yh.shape != y.shape:
            raise InvalidArgument(f"shape mismatch {yh.shape} vs {y.shape}")
        n = y.size
        diff = yh - y
        terms["s"] += np.abs(diff).sum() / n
        terms["t1"] += np.abs(np.fft.fft2(diff, axes=(0, 1), norm="ortho")).sum() / n
        terms["t_alpha"] += np.abs(_channel_frft(diff, weights.loss_alpha)).sum() / n
    return terms


def total_loss(predictions, targets, weights=None):
    """Spatial L1 plus weighted FFT-domain and FRFT-domain L1 (per-scale means).

    The transforms are linear, so the transform of the difference is used.
    """
    weights = weights or ObjectiveWeights()
    t = loss_terms(predictions, targets, weights)
    return float(t["s"] + weights.lambda_t1 * t["t1"] + weights.lambda_t_alpha * t["t_alpha"])


# search domains by parameter-name suffix: (low, high, log10 domain)
SEARCH_DOMAINS = {
    "nsr": (-8.0, 0.0, True),
    "alpha": (0.0, 1.0, False),
    "filter[0]": (1.0, 32.0, False),
    "filter[1]": (0.0, 48.0, False),
}

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _coordinates(store, names):
    """Expand parameter names into (name, flat index) scalar coordinates."""
    coords = []
    for name in names:
        base, _, idx = name.partition("[")
        if base not in store:
            raise KeyError(f"no parameter named {base!r}")
        size = store[base].size
        if idx:
            coords.append((base, int(idx.rstrip("]"))))
        else:
            coords.extend((base, i) for i in range(size))
    return coords


def _domain(name, index):
    leaf = name.rsplit(".", 1)[-1]
    key = f"{leaf}[{index}]" if f"{leaf}[{index}]" in SEARCH_DOMAINS else leaf
    if key not in SEARCH_DOMAINS:
        raise InvalidArgument(f"parameter {name!r} is not a fittable scalar")
    return SEARCH_DOMAINS[key]


def _set_coord(store, name, index, value):
    arr = np.array(store[name], dtype=np.float64)
    arr.flat[index] = value
    return store.with_value(name, arr)


def pair_targets(sharp, count):
    return image_pyramid(sharp, count)


def make_objective(pair, forward, weights=None):
    """Loss of ``forward(blurry, store)`` against the sharp image's pyramid."""
    blurry, sharp = pair
    weights = weights or ObjectiveWeights()

    def objective(store, w=None):
        preds = forward(blurry, store)
        value = total_loss(preds, pair_targets(sharp, len(preds)), w or weights)
        if not math.isfinite(value):
            raise FloatingPointError(f"non-finite loss {value!r}")
        return value
    return objective


def fit_scalar_params(pair, names, budget, store, forward, weights=None, info=None):
    """Coordinate descent with golden-section line searches on scalar learnables.

    Each coordinate is searched over its domain (NSR in log10 over [-8, 0]
    plus the exact value 0; orders in [0, 1]; cut-off and width in index
    units); both endpoints are evaluated too.  The best store seen is kept,
    so the returned loss never exceeds the initial one.  ``info`` (a dict)
    receives the losses, evaluation count and each coordinate's final bracket.
    """
    if budget < 10:
        raise InvalidArgument("budget must be at least 10 evaluations")
    objective = make_objective(pair, forward, weights)
    coords = _coordinates(store, names)
    best = store
    best_loss = objective(store)
    initial = best_loss
    evals = 1
    brackets = {}
    per = max(4, (budget - 1) // max(1, len(coords)))
    for name, index in coords:
        lo, hi, logdom = _domain(name, index)

        def value_of(t):
            return 10.0 ** t if logdom else t

        def evaluate(v):
            nonlocal best, best_loss, evals
            candidate = _set_coord(best, name, index, v)
            loss = objective(candidate)
            evals += 1
            if loss < best_loss:
                best, best_loss = candidate, loss
            return loss

        remaining = per
        if logdom:
            evaluate(0.0)
            remaining -= 1
        evaluate(value_of(lo))
        evaluate(value_of(hi))
        remaining -= 2
        a, b = lo, hi
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc, fd = evaluate(value_of(c)), evaluate(value_of(d))
        remaining -= 2
        while remaining > 0:
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = evaluate(value_of(c))
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = evaluate(value_of(d))
            remaining -= 1
        brackets[f"{name}[{index}]"] = (a, b)
        log.debug("fit %s[%d]: bracket [%g, %g], loss %.6g", name, index, a, b, best_loss)
    if info is not None:
        info.update(loss=best_loss, initial_loss=initial, evaluations=evals, brackets=brackets)
    return best


def fd_sensitivity(pair, param_name, h1, h2, store, forward, weights=None):
    """Central-difference derivatives of the loss at steps ``h1 = 2 h2`` and ``h2``.

    ``param_name`` is a store entry (optionally ``name[i]``) or one of the
    objective weights ``lambda_t1`` / ``lambda_t_alpha``.
    """
    if not (h1 > 0 and h2 > 0) or not math.isclose(h1, 2 * h2, rel_tol=1e-12):
        raise InvalidArgument("need h1 = 2 * h2 > 0")
    weights = weights or ObjectiveWeights()
    objective = make_objective(pair, forward, weights)
    if param_name in ("lambda_t1", "lambda_t_alpha"):
        base = getattr(weights, param_name)

        def at(v):
            return objective(store, replace(weights, **{param_name: v}))
    else:
        (name, index), = _coordinates(store, [param_name if "[" in param_name else param_name + "[0]"])
        base = float(store[name].flat[index])

        def at(v):
            return objective(_set_coord(store, name, index, v))

    return tuple((at(base + h) - at(base - h)) / (2 * h) for h in (h1, h2))
