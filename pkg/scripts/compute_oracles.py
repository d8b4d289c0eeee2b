"""Recompute the frozen oracle values used by the unit tests (30-digit arithmetic).

Independent of the library: survival is integrated from the Gaussian law of
U_s rather than taken from the erf closed form, and bump derivatives come
from numerical differentiation.

    python scripts/compute_oracles.py
"""

import mpmath as mp

mp.mp.dps = 30


def ou_survival_by_integration(b, s, noise):
    m = b * mp.e ** (-s)
    v = noise * (1 - mp.e ** (-2 * s)) / 2
    dens = lambda u: mp.e ** (-((u - m) ** 2) / (2 * v)) / mp.sqrt(2 * mp.pi * v)  # noqa: E731
    return mp.quad(dens, [0, m, mp.inf]) - mp.quad(dens, [-mp.inf, 0])


def bump(y):
    u = (y - 1) / 2
    return mp.e ** (-1 / (1 - u * u)) if abs(u) < 1 else mp.mpf(0)


if __name__ == "__main__":
    for b, s, noise in [(1, 1, 1), (1, 0.5, 1), (2, 1, 1), (1, 1, 2)]:
        print(f"survival b={b} s={s} noise={noise}:", ou_survival_by_integration(b, mp.mpf(s), noise))
    mean = mp.quad(lambda u: mp.erf(u / mp.sqrt(1 - u * u)) / u, [0, 0.5, 0.9, 0.99, 1])
    print("mean passage from 1:", mean)
    for y in (mp.mpf("0.5"), mp.mpf("2.2")):
        print(f"bump y={y}:", [mp.diff(bump, y, k) for k in range(4)])
    print("H_10:", mp.fsum(mp.mpf(1) / k for k in range(1, 11)))
