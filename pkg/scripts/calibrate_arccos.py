"""Brute-force check of the arc-cosine kernel constant.

Estimates E[relu(w.x)^p relu(w.z)^p] with w ~ N(0, I_2) from 10^7 draws and
compares it with |x|^p |z|^p J_p(theta) to read off the constant in front.

    python3 scripts/calibrate_arccos.py [--samples 10000000]
"""

import argparse

import numpy as np

from rfridge.feature_maps import ARCCOS_CONSTANT, FeatureMapSpec, kernel_matrix
from rfridge.seeding import rng_for

ANGLES = (0.0, np.pi / 3, np.pi / 2, 2.0)


def monte_carlo(p: int, x: np.ndarray, z: np.ndarray, samples: int, seed: int, chunk: int = 1_000_000):
    total, total_sq, done = 0.0, 0.0, 0
    rng = rng_for(seed, "arccos", p)
    while done < samples:
        m = min(chunk, samples - done)
        w = rng.standard_normal((m, 2))
        a, b = w @ x, w @ z
        if p == 0:
            v = (a > 0) * (b > 0) * 1.0
        else:
            v = np.maximum(a, 0.0) ** p * np.maximum(b, 0.0) ** p
        total += v.sum()
        total_sq += (v * v).sum()
        done += m
    mean = total / samples
    se = np.sqrt(max(total_sq / samples - mean**2, 0.0) / samples)
    return mean, se


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=10_000_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"implemented constant: {ARCCOS_CONSTANT:.6f} (1/pi = {1 / np.pi:.6f}, 1/(2pi) = {1 / (2 * np.pi):.6f})")
    print("p  theta   MC mean      stderr     closed form  implied constant")
    for p in (0, 1, 2):
        spec = FeatureMapSpec.arc_cosine(degree=p, dim=2)
        for theta in ANGLES:
            x = np.array([1.0, 0.0])
            z = 1.3 * np.array([np.cos(theta), np.sin(theta)])
            mean, se = monte_carlo(p, x, z, args.samples, args.seed)
            closed = kernel_matrix(spec, x[None], z[None])[0, 0]
            implied = mean / closed * ARCCOS_CONSTANT if closed > 0 else float("nan")
            print(f"{p}  {theta:5.3f}  {mean:.6f}  {se:.1e}  {closed:.6f}    {implied:.6f}")


if __name__ == "__main__":
    main()
