#!/usr/bin/env python3
"""Generate the demo equirectangular texture at scenes/earth.png."""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))


def main():
    h, w = 128, 256
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    lat = np.pi / 2 - ii / h * np.pi
    lon = jj / w * 2 * np.pi
    land = (np.sin(3 * lon + 2 * np.sin(2 * lat)) * np.cos(2 * lat)
            + 0.3 * np.sin(7 * lon) * np.sin(3 * lat)) > 0.25
    img = np.zeros((h, w, 3))
    img[..., 0] = 0.05
    img[..., 1] = 0.2
    img[..., 2] = 0.65
    img[land] = [0.15, 0.55, 0.2]
    polar = np.abs(lat) > 1.32
    img[polar] = [0.92, 0.93, 0.95]
    # graticule for orientation
    grid = (np.abs((np.degrees(lon) % 30)) < 1.2) | (np.abs((np.degrees(lat) % 30)) < 1.2)
    img[grid] = 0.75 * img[grid] + 0.25

    from PIL import Image

    out = os.path.join(os.path.dirname(__file__), "..", "scenes", "earth.png")
    Image.fromarray((img * 255).astype(np.uint8)).save(out)
    print("wrote", out)


if __name__ == "__main__":
    main()
