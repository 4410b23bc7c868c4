"""Seeded test signals shared by the test modules."""

import numpy as np


def confined_signal(n, seed, parts=3, spread=0.5):
    """Sum of Gaussian-windowed chirps concentrated near the transform origin.

    Coordinates are dimensionless (sample spacing 1/sqrt(n)); centres,
    modulation frequencies and chirp rates are drawn from [-spread, spread],
    so the signal's spatial-frequency support stays well inside the grid.
    The result is laid out with its origin at index 0.
    """
    rng = np.random.default_rng(seed)
    u = (np.arange(n) - n // 2) / np.sqrt(n)
    x = np.zeros(n, dtype=complex)
    for _ in range(parts):
        u0, f = rng.uniform(-spread, spread, 2)
        w = rng.uniform(0.8, 1.2)
        c = rng.uniform(-spread, spread)
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        x += amp * np.exp(-np.pi * ((u - u0) / w) ** 2 + 1j * np.pi * c * (u - u0) ** 2
                          + 2j * np.pi * f * u)
    return np.fft.ifftshift(x)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
