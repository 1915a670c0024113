"""Reference implementations used only by the tests.

They are written independently of the package: high-precision arithmetic for
the channel gains, exhaustive enumeration for detection.
"""

from __future__ import annotations

import itertools

import mpmath as mp
import numpy as np


def lambertian_gain_mp(led, pd, psi_deg=60, rho=1, area="1e-4", ts="0.9", n="1.5", fov_deg=72, dps=40):
    with mp.workdps(dps):
        led = [mp.mpf(str(v)) for v in led]
        pd = [mp.mpf(str(v)) for v in pd]
        vec = [a - b for a, b in zip(led, pd)]
        d = mp.sqrt(sum(x * x for x in vec))
        # emitter points down, receiver points up
        phi = mp.acos(vec[2] / d)
        theta = mp.acos(vec[2] / d)
        if theta > mp.radians(fov_deg):
            return mp.mpf(0)
        order = -mp.log(2) / mp.log(mp.cos(mp.radians(psi_deg)))
        lens = mp.mpf(n) ** 2 / mp.sin(mp.radians(fov_deg)) ** 2
        return (order + 1) * rho * mp.mpf(area) / (2 * mp.pi * d**2) * mp.cos(phi) ** order * mp.mpf(ts) * lens * mp.cos(theta)


def brute_force_axis(values, patterns, levels):
    """Argmin over (pattern, level) of sum_t (v_t - m 1{t in p})^2, first-found tie-break."""
    best = None
    for pi, p in enumerate(patterns):
        for li, m in enumerate(levels):
            x = np.zeros(len(values))
            x[list(p)] = m
            cost = float(np.sum((np.asarray(values) - x) ** 2))
            if best is None or cost < best[0]:
                best = (cost, pi, li)
    return best[1], best[2]


def all_bit_blocks(width: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=width)), dtype=np.uint8)
