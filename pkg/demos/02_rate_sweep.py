"""Sweeping the regulator on a real image.

The block-DCT latent and its per-band scales are computed once; only the
quantizer changes with `a`.  The side information (one scale index per band)
is therefore byte-for-byte the same at every rate.

Run:  python3 demos/02_rate_sweep.py [image.pgm]
"""

import sys
from pathlib import Path

import numpy as np

from qvrf import codec, metrics
from qvrf.transform import read_image

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "tests/data/rocket_768x512.pgm"
img = read_image(path)
print(f"{path.name}: {img.shape[1]}x{img.shape[0]}\n")

# bit consumption per a, split into latent, side and total
print(codec.bits_table(img, [1, 1.5, 2, 3, 4, 6, 8, 10]))

# continuity: a fine sweep gives a smooth, monotone curve
a_values = np.geomspace(1, 10, 32)
points = codec.rd_sweep([img], a_values, names=[path.stem])
bpp = np.array([p.bpp_total for p in points])
psnr = np.array([p.psnr_db for p in points])
print(f"\n32 regulators: bpp {bpp.min():.3f}..{bpp.max():.3f} ({bpp.max() / bpp.min():.1f}x), "
      f"PSNR {psnr.min():.2f}..{psnr.max():.2f} dB")
print("bpp strictly increasing:", bool(np.all(np.diff(bpp) > 0)))
print("largest PSNR step: %.3f dB" % np.max(np.abs(np.diff(psnr))))

# decoder output equals what the encoder predicted
enc = codec.analyze(img, 3.3)
rec = codec.decode_image(enc.bitstream.to_bytes())
print("\ndecode == encoder reconstruction:", np.array_equal(rec, enc.reconstruction),
      f"({len(enc.bitstream)} bytes, {metrics.psnr(img, rec):.2f} dB, "
      f"MS-SSIM {metrics.ms_ssim(img, rec):.4f})")
