"""Convergence-rate estimates for oscillating residual profiles.

A Cesaro residual ``r(N) = |sum_pairs c (1 - e^{-i N d}) / (N (1 - e^{-i d}))|``
decays like 1/N only on average: each pair contributes ``|sin(N d / 2)|``, so
``r(2N) / r(N)`` at single points scatters widely. Comparing RMS values over
the dyadic windows ``[N, 2N)`` and ``[2N, 4N)`` removes the oscillation; for a
pure ``c / N`` envelope the ratio is exactly 1/2.
"""

import numpy as np


def window_rms(profile, lo: int, hi: int) -> float:
    """RMS of ``profile[lo:hi]``; ``profile`` is indexed by horizon."""
    seg = np.asarray(profile[lo:hi], dtype=float)
    if len(seg) == 0:
        raise ValueError(f"empty window [{lo}, {hi})")
    return float(np.sqrt(np.mean(seg ** 2)))


def doubling_ratio(profile, n: int) -> float:
    """RMS over ``[2n, 4n)`` divided by RMS over ``[n, 2n)``.

    ``profile`` must cover indices up to ``4n - 1``.
    """
    if len(profile) < 4 * n:
        raise ValueError(f"profile of length {len(profile)} too short for n={n}")
    a = window_rms(profile, n, 2 * n)
    b = window_rms(profile, 2 * n, 4 * n)
    return b / a if a > 0 else 0.0


def continuous_doubling_ratio(fn, t: float, samples: int = 4096) -> float:
    """:func:`doubling_ratio` for a residual defined on continuous time."""
    a = np.sqrt(np.mean(fn(np.linspace(t, 2 * t, samples, endpoint=False)) ** 2))
    b = np.sqrt(np.mean(fn(np.linspace(2 * t, 4 * t, samples, endpoint=False)) ** 2))
    return float(b / a) if a > 0 else 0.0
