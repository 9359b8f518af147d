"""Comparing two configurations with BD-rate.

Both curves come from the same codec with different DCT block sizes; the
Bjontegaard delta says how many more (or fewer) bits one needs than the
other at equal PSNR, averaged over the overlapping quality range.

Run:  python3 demos/04_bd_rate.py
"""

from pathlib import Path

import numpy as np

from qvrf import codec, metrics
from qvrf.transform import read_image

img = read_image(Path(__file__).parents[1] / "tests/data/camera_512.pgm")
a_values = np.geomspace(1, 10, 6)

curves = {}
for block in (4, 8, 16):
    pts = codec.rd_sweep([img], a_values, block=block)
    curves[block] = metrics.RDCurve.from_points(pts)
    print(f"B={block:2d}  " + "  ".join(f"{r:.3f}bpp/{q:.2f}dB"
                                      for r, q in zip(curves[block].rates, curves[block].qualities)))

anchor = curves[8]
for block in (4, 16):
    print(f"BD-rate of B={block} against B=8: {metrics.bd_rate(anchor, curves[block]):+.2f}%")

# sanity: the same curve scaled by 10% in rate is exactly +10%
scaled = metrics.RDCurve(tuple(1.1 * r for r in anchor.rates), anchor.qualities)
print(f"anchor with rates x1.1: {metrics.bd_rate(anchor, scaled):+.6f}%")
