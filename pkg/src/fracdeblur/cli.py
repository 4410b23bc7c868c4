"""Command-line front end: ``fracdeblur <subcommand> ...``.

Exit codes: 0 success, 1 usage/configuration error, 2 processing error.

Option values resolve in three layers: built-in defaults, then an optional
``--config`` file of ``key = value`` lines, then explicit flags.  Config keys
are option names with dashes or underscores (``nsr``, ``alpha``, ``kernel-side``);
a ``[subcommand]`` section limits the keys below it to that subcommand.
"""

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .blocks import BlockConfig, ParamStore, fit_scalar_params, init_params
from .dfrft import frft2d
from .freqsplit import KINDS, build_filter, split_frequencies
from .imageio import load_image, save_image
from .kernel import KebParams, load_kern, make_kernel, save_kern
from .pipeline import (DegradeSpec, compute_metrics, deblur_classical, deblur_full, degrade,
                       pyramid_kernels, scale_kernels, wiener_forward)
from .tensorcore import InvalidArgument

log = logging.getLogger("fracdeblur")

SUBCOMMANDS = ("degrade", "estimate-kernel", "deblur", "transform", "split", "metrics", "fit",
               "selftest")


class UsageError(Exception):
    pass


def parse_pair(text):
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two numbers, got {text!r}") from None


def parse_depths(text):
    try:
        vals = tuple(int(v) for v in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three integers, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three integers, got {text!r}")
    return vals


def parse_psf(text):
    """``kind,key=value,...`` e.g. ``gaussian,sigma=1.5,side=9``."""
    kind, *rest = str(text).split(",")
    params = {}
    for item in rest:
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"bad PSF parameter {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad PSF value {item!r}") from None
    side = int(params.pop("side", 15))
    return kind.strip(), side, params


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# per-subcommand option registry: dest -> (type, default)
OPTIONS = {}


def _opt(sub, parser, flag, default=None, type=str, **kw):
    dest = flag.lstrip("-").replace("-", "_")
    OPTIONS.setdefault(sub, {})[dest] = (type, default)
    parser.add_argument(flag, dest=dest, type=type, default=argparse.SUPPRESS, **kw)


def _keb_options(sub, p):
    _opt(sub, p, "--kernel-side", 15, int, help="odd side of estimated kernels")
    _opt(sub, p, "--eta", 1.0, float, help="ridge weight of the kernel solve")
    _opt(sub, p, "--gamma", 0.002, float, help="ridge weight of the latent solve")
    _opt(sub, p, "--tau", 15, int, help="maximum alternation count")
    _opt(sub, p, "--quantile", 0.9, float, help="edge magnitude quantile")


def build_parser():
    OPTIONS.clear()
    parser = _Parser(prog="fracdeblur", description="Fractional-Fourier image deblurring tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    def sub(name, help):
        p = subs.add_parser(name, help=help)
        p.add_argument("--config", default=None, help="INI-style key = value defaults")
        _opt(name, p, "--seed", 0, int, help="seed for all randomness")
        p.add_argument("-v", "--verbose", action="count", default=0)
        return p

    p = sub("degrade", "blur an image and add seeded Gaussian noise")
    p.add_argument("paths", nargs="+", help="input output  |  inputs... with --out-dir")
    _opt("degrade", p, "--kernel", None, str, help="KERN v1 kernel file")
    _opt("degrade", p, "--psf", None, str, help="synthetic PSF, e.g. gaussian,sigma=1.5,side=9")
    _opt("degrade", p, "--sigma", 0.0, float, help="noise standard deviation")
    _opt("degrade", p, "--out-dir", None, str, help="batch mode output directory")

    p = sub("estimate-kernel", "blind kernel estimate written as KERN v1")
    p.add_argument("input")
    p.add_argument("output")
    _keb_options("estimate-kernel", p)

    p = sub("deblur", "restore a blurry image")
    p.add_argument("input")
    p.add_argument("output")
    _opt("deblur", p, "--mode", "classical", str, choices=("classical", "full"))
    _opt("deblur", p, "--kernel", None, str, help="known kernel (blind estimate if absent)")
    _opt("deblur", p, "--psf", None, str, help="known synthetic PSF instead of --kernel")
    _opt("deblur", p, "--alpha", (1.0, 1.0), parse_pair, help="FRFT order 'x,y'")
    _opt("deblur", p, "--nsr", None, float, help="noise-to-signal override")
    _opt("deblur", p, "--params", None, str, help="F2P1 parameter file for --mode full")
    _opt("deblur", p, "--channels", 48, int, help="feature channels for --mode full")
    _opt("deblur", p, "--depths", (2, 4, 8), parse_depths, help="blocks per scale, 'a,b,c'")
    _keb_options("deblur", p)

    p = sub("transform", "write FRFT magnitude and phase as PGM")
    p.add_argument("input")
    p.add_argument("prefix")
    _opt("transform", p, "--alpha", (0.5, 0.5), parse_pair)
    _opt("transform", p, "--method", "eigen", str, choices=("eigen", "fast"))

    p = sub("split", "write low/high frequency bands as PGM")
    p.add_argument("input")
    p.add_argument("prefix")
    _opt("split", p, "--kind", "cosine_bell", str, choices=KINDS)
    _opt("split", p, "--uc", 10.0, float, help="cut-off radius")
    _opt("split", p, "--us", 29.0, float, help="transition width")

    p = sub("metrics", "PSNR/SSIM/MAE of images against a reference, as CSV")
    p.add_argument("reference")
    p.add_argument("images", nargs="+")
    _opt("metrics", p, "--out", None, str, help="CSV path (stdout if absent)")
    _opt("metrics", p, "--workers", 4, int)

    p = sub("fit", "fit Wiener NSR / order on a blurry-sharp pair (classical pipeline)")
    p.add_argument("blurry")
    p.add_argument("sharp")
    _opt("fit", p, "--kernel", None, str)
    _opt("fit", p, "--psf", None, str, help="known synthetic PSF instead of --kernel")
    _opt("fit", p, "--names", "wiener.nsr", str, help="comma-separated parameters to fit")
    _opt("fit", p, "--budget", 30, int)
    _opt("fit", p, "--alpha", (1.0, 1.0), parse_pair, help="initial FRFT order")
    _opt("fit", p, "--nsr", 1e-2, float, help="initial NSR")
    _opt("fit", p, "--out", None, str, help="F2P1 output path")
    _keb_options("fit", p)

    sub("selftest", "run the in-package invariant checks")
    return parser


# --------------------------------------------------------------------------
# configuration

def read_config(path, command):
    """Parse ``key = value`` lines; returns raw strings for ``command``."""
    all_keys = {k for opts in OPTIONS.values() for k in opts}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    section = None
    values = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if text.startswith("[") and text.endswith("]"):
            section = text[1:-1].strip()
            if section not in SUBCOMMANDS:
                raise UsageError(f"{path}:{lineno}: unknown section [{section}]")
            continue
        key, sep, value = text.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        if key not in all_keys:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if section not in (None, command):
            continue
        if key in OPTIONS.get(command, {}):
            values[key] = (value.strip(), lineno)
    return values


def resolve(args, command):
    """Defaults < config file < flags."""
    opts = OPTIONS.get(command, {})
    merged = {dest: default for dest, (_, default) in opts.items()}
    if getattr(args, "config", None):
        for key, (raw, lineno) in read_config(args.config, command).items():
            conv = opts[key][0]
            try:
                merged[key] = conv(raw)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"{args.config}:{lineno}: bad value for {key}: {exc}") from None
    for dest in opts:
        if hasattr(args, dest):
            merged[dest] = getattr(args, dest)
    for key, value in vars(args).items():
        merged.setdefault(key, value)
    return argparse.Namespace(**merged)


# --------------------------------------------------------------------------
# subcommands

def _keb(o):
    return KebParams(eta=o.eta, gamma=o.gamma, tau=o.tau, edge_threshold_quantile=o.quantile,
                     kernel_side=o.kernel_side)


def _kernel_from(o):
    if getattr(o, "kernel", None) and getattr(o, "psf", None):
        raise UsageError("give either --kernel or --psf, not both")
    if getattr(o, "kernel", None):
        return load_kern(o.kernel)
    if getattr(o, "psf", None):
        try:
            kind, side, params = parse_psf(o.psf)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from None
        return make_kernel(kind, side, **params)
    return None


def cmd_degrade(o, out):
    k = _kernel_from(o)
    if k is None:
        raise UsageError("degrade needs --kernel or --psf")
    if o.out_dir:
        inputs = o.paths
        os.makedirs(o.out_dir, exist_ok=True)
        outputs = [os.path.join(o.out_dir, os.path.basename(p)) for p in inputs]
    else:
        if len(o.paths) != 2:
            raise UsageError("degrade takes 'input output' (or inputs with --out-dir)")
        inputs, outputs = [o.paths[0]], [o.paths[1]]

    def work(i):
        img = load_image(inputs[i])
        save_image(outputs[i], degrade(img, DegradeSpec(k, o.sigma, o.seed + i)))
        return outputs[i]

    with ThreadPoolExecutor(max_workers=min(4, len(inputs))) as pool:
        for path in pool.map(work, range(len(inputs))):
            log.info("wrote %s", path)
    return 0


def cmd_estimate_kernel(o, out):
    img = load_image(o.input).mean(axis=2)
    save_kern(o.output, _keb_estimate(img, o))
    return 0


def _keb_estimate(gray, o):
    from .kernel import estimate_kernel

    return estimate_kernel(gray, _keb(o))


def cmd_deblur(o, out):
    img = load_image(o.input)
    k = _kernel_from(o)
    if o.mode == "classical":
        restored, k = deblur_classical(img, k, order=o.alpha, nsr=o.nsr, keb=_keb(o))
    else:
        cfg = BlockConfig(channels=o.channels, depths=o.depths, image_channels=img.shape[2])
        params = ParamStore.load(o.params) if o.params else init_params(cfg, o.seed)
        kernels = pyramid_kernels(k) if k is not None else scale_kernels(img, _keb(o))
        restored = deblur_full(img, params, cfg, kernels)
    save_image(o.output, restored)
    return 0


def cmd_transform(o, out):
    gray = load_image(o.input).mean(axis=2)
    spec = frft2d(gray, o.alpha, method=o.method)
    mag = np.log1p(np.abs(spec))
    mag = mag / mag.max() if mag.max() > 0 else mag
    phase = (np.angle(spec) + np.pi) / (2 * np.pi)
    save_image(o.prefix + "_mag.pgm", mag)
    save_image(o.prefix + "_phase.pgm", phase)
    return 0


def cmd_split(o, out):
    gray = load_image(o.input).mean(axis=2)
    bank = build_filter(gray.shape[0], gray.shape[1], o.kind, o.uc, o.us)
    low, high = split_frequencies(gray, bank)
    save_image(o.prefix + "_low.pgm", np.clip(low, 0, 1))
    save_image(o.prefix + "_high.pgm", np.clip(high + 0.5, 0, 1))
    return 0


def metrics_rows(reference, images, workers=4):
    ref = load_image(reference)

    def one(path):
        return path, compute_metrics(ref, load_image(path))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(one, images))


def cmd_metrics(o, out):
    rows = metrics_rows(o.reference, o.images, o.workers)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["file", "psnr", "ssim", "mae"])
    for path, rep in rows:
        writer.writerow([path] + rep.csv_fields())
    if o.out:
        with open(o.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        out.write(buf.getvalue())
    return 0


def cmd_fit(o, out):
    blurry, sharp = load_image(o.blurry), load_image(o.sharp)
    if blurry.shape != sharp.shape:
        raise InvalidArgument(f"blurry {blurry.shape} and sharp {sharp.shape} differ in shape")
    k = _kernel_from(o)
    if k is None:
        k = _keb_estimate(blurry.mean(axis=2), o)
    store = ParamStore({"wiener.nsr": o.nsr, "wiener.s1.alpha": list(o.alpha)}, o.seed)
    names = [n.strip() for n in o.names.split(",") if n.strip()]
    info = {}
    fitted = fit_scalar_params((blurry, sharp), names, o.budget, store, wiener_forward(k), info=info)
    out.write(f"loss {info['initial_loss']:.6g} -> {info['loss']:.6g} "
              f"({info['evaluations']} evaluations)\n")
    for name, value in fitted.items():
        out.write(f"{name} = {np.array2string(value, precision=6)}\n")
    if o.out:
        fitted.save(o.out)
    return 0


def cmd_selftest(o, out):
    from .selftest import run

    return 0 if run(out) else 2


COMMANDS = {
    "degrade": cmd_degrade, "estimate-kernel": cmd_estimate_kernel, "deblur": cmd_deblur,
    "transform": cmd_transform, "split": cmd_split, "metrics": cmd_metrics, "fit": cmd_fit,
    "selftest": cmd_selftest,
}


def dispatch(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("fracdeblur: a subcommand is required "
                             f"({', '.join(SUBCOMMANDS)})")
        opts = resolve(args, args.command)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return 1
    if opts.verbose:
        logging.basicConfig(level=logging.DEBUG if opts.verbose > 1 else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](opts, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return 1
    except (InvalidArgument, ValueError, OSError, FloatingPointError, KeyError) as exc:
        msg = exc.strerror if isinstance(exc, OSError) and exc.strerror else str(exc)
        where = f" ({exc.filename})" if isinstance(exc, OSError) and exc.filename else ""
        err.write(f"error: {msg}{where}\n")
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))
