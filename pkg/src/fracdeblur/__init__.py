"""Fractional-Fourier image deblurring: DFRFT transforms, fractional Wiener
deconvolution, blind kernel estimation, frequency splitting and toy-scale
transformer blocks."""

__version__ = "0.1.0"

from .tensorcore import InvalidArgument  # noqa: E402

__all__ = ["InvalidArgument", "__version__"]
