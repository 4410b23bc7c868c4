"""In-package invariant checks, runnable without pytest (``fracdeblur selftest``).

Each check returns a short detail string and raises ``AssertionError`` on
failure.  They are small versions of the test-suite properties, sized to run
in a few seconds in total.
"""

import time

import numpy as np

from . import blocks, dfrft, freqsplit, kernel, pipeline, tensorcore, wiener

CHECKS = []


def check(module):
    def register(fn):
        CHECKS.append((module, fn.__name__.replace("_", " "), fn))
        return fn
    return register


def _rng():
    return np.random.default_rng(1234)


@check("tensorcore")
def fft_matches_naive_dft():
    x = _rng().standard_normal(12) + 1j * _rng().standard_normal(12)
    n = np.arange(12)
    naive = np.exp(-2j * np.pi * np.outer(n, n) / 12) @ x / np.sqrt(12)
    err = np.abs(tensorcore.fft1d(x) - naive).max()
    assert err <= 1e-10, err
    return f"max err {err:.1e}"


@check("tensorcore")
def convolution_modes_agree():
    rng = _rng()
    a, k = rng.random((16, 16)), rng.random((3, 3))
    err = np.abs(tensorcore.convolve2d(a, k, "fft") - tensorcore.convolve2d(a, k, "direct")).max()
    assert err <= 1e-9, err
    return f"max err {err:.1e}"


@check("tensorcore")
def pixel_shuffle_inverts_unshuffle():
    t = _rng().random((8, 6, 3))
    back = tensorcore.resample(tensorcore.resample(t, "down2", "pixel_unshuffle"), "up2", "pixel_shuffle")
    assert np.array_equal(back, t)
    return "exact"


@check("dfrft")
def plan_orthonormal_and_dft_limit():
    plan = dfrft.get_plan(64)
    orth = np.abs(plan.basis.T @ plan.basis - np.eye(64)).max()
    dft = np.abs(dfrft.frft_matrix(plan, 1.0) - np.fft.fft(np.eye(64), norm="ortho")).max()
    assert orth <= 1e-10 and dft <= 1e-8, (orth, dft)
    return f"orth {orth:.1e}, dft {dft:.1e}"


@check("dfrft")
def index_additivity():
    plan = dfrft.get_plan(32)
    err = np.abs(dfrft.frft_matrix(plan, 0.3) @ dfrft.frft_matrix(plan, 0.4)
                 - dfrft.frft_matrix(plan, 0.7)).max()
    assert err <= 1e-8, err
    return f"max err {err:.1e}"


@check("dfrft")
def fast_matches_eigen():
    t = (np.arange(128) - 64) / np.sqrt(128)
    x = np.fft.ifftshift(np.exp(-np.pi * t ** 2))
    err = np.abs(dfrft.frft_fast(x, 0.5) - dfrft.frft_eigen(dfrft.get_plan(128), x, 0.5)).max()
    assert err <= 1e-3, err
    return f"max err {err:.1e}"


@check("wiener")
def unit_order_is_classical_wiener():
    rng = _rng()
    y = rng.random((32, 32))
    k = kernel.make_kernel("gaussian", 5, sigma=1.0)
    spectra = wiener.estimate_spectra(y, nsr_override=1e-3)
    op = wiener.build_fwd(k, spectra, (1, 1), y.shape)
    ref = wiener.classical_wiener(y, k, spectra.s_xx, spectra.s_nn)
    err = np.abs(wiener.apply_fwd(op, y) - ref).max()
    assert err <= 1e-8, err
    return f"max err {err:.1e}"


@check("wiener")
def fractional_noiseless_inversion():
    x = pipeline.smooth_periodic(32, seed=3)[:, :, 0]
    k = 0.4 * kernel.make_kernel("gaussian", 3, sigma=1.0) + 0.6 * np.pad([[1.0]], 1)
    y = wiener.fractional_blur(x, k, (0.6, 0.8))
    rec = wiener.wiener_deconvolve(y, k, (0.6, 0.8), nsr=0.0)
    err = np.linalg.norm(rec - x) / np.linalg.norm(x)
    assert err <= 1e-6, err
    return f"rel err {err:.1e}"


@check("kernel")
def synthetic_kernels_valid():
    for kind, p in (("gaussian", {"sigma": 1.5}), ("motion", {"length": 7, "angle": 30}),
                    ("disk", {"radius": 2})):
        kernel.validate_kernel(kernel.make_kernel(kind, 11, **p))
    return "3 families"


@check("kernel")
def blind_gaussian_estimate():
    k = kernel.make_kernel("gaussian", 9, sigma=1.5)
    x = pipeline.shapes(96, seed=0)[:, :, 0]
    y = tensorcore.convolve2d(x, k)
    est = kernel.estimate_kernel(y, kernel.KebParams(kernel_side=15, tau=5))
    score = kernel.ncc(est, k)
    assert score >= 0.9, score
    return f"NCC {score:.3f}"


@check("freqsplit")
def perfect_reconstruction():
    x = _rng().random((32, 32))
    worst = 0.0
    for kind in freqsplit.KINDS:
        lo, hi = freqsplit.split_frequencies(x, freqsplit.build_filter(32, 32, kind, 6.0, 8.0))
        worst = max(worst, np.abs(lo + hi - x).max())
    assert worst <= 1e-9, worst
    return f"max err {worst:.1e}"


@check("blocks")
def residual_identity_and_softmax():
    cfg = blocks.BlockConfig(channels=4, depths=(1, 1, 1))
    params = blocks.init_params(cfg, seed=5)
    x = _rng().random((16, 16, 4))
    zeroed = params.with_zeroed(lambda n: n.endswith(".sa.proj.w") or n.endswith(".ffn.proj_out.w")
                                or n.endswith(".f3rb.fuse.w"))
    out = blocks.fhtb_forward(x, 1, zeroed, cfg, "enc1")
    assert np.array_equal(out, x)
    mass = blocks.fmffn_weights(x, params, cfg, "enc1.t0")["weights"].sum()
    assert abs(mass - 1) <= 1e-9, mass
    return "identity exact, softmax mass 1"


@check("blocks")
def param_store_roundtrip():
    params = blocks.init_params(blocks.BlockConfig(channels=4, depths=(1, 1, 1)), seed=9)
    assert blocks.ParamStore.from_bytes(params.to_bytes()) == params
    return f"{len(params)} entries"


@check("pipeline_metrics")
def metric_closed_forms():
    a = _rng().random((16, 16, 1)) * 0.8
    same = pipeline.compute_metrics(a, a)
    shifted = pipeline.compute_metrics(a, a + 0.1)
    assert same.psnr == pipeline.PSNR_CAP and abs(same.ssim - 1) < 1e-12 and same.mae == 0
    assert abs(shifted.psnr - 20.0) < 1e-9 and abs(shifted.mae - 0.1) < 1e-12
    return "PSNR cap, 20 dB, MAE 0.1"


@check("pipeline_metrics")
def known_kernel_margin():
    k = kernel.make_kernel("motion", 11, length=7, angle=30)
    x = pipeline.shapes(64, seed=0)
    y = pipeline.degrade(x, pipeline.DegradeSpec(k))
    r, _ = pipeline.deblur_classical(y, k)
    gain = pipeline.psnr(r, x) - pipeline.psnr(y, x)
    assert gain >= 5.0, gain
    return f"+{gain:.2f} dB"


def run(out=None):
    """Run every check, print a table, return True iff all pass."""
    import sys

    out = out or sys.stdout
    ok = True
    width = max(len(name) for _, name, _ in CHECKS)
    for module, name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            detail = fn()
            status = "PASS"
        except Exception as exc:  # report and keep going
            detail = f"{type(exc).__name__}: {exc}"
            status = "FAIL"
            ok = False
        dt = time.perf_counter() - t0
        out.write(f"{module:<17} {name:<{width}}  {status}  {dt:6.2f}s  {detail}\n")
    out.write(f"{'all checks passed' if ok else 'some checks FAILED'}\n")
    return ok
