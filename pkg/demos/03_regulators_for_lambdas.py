"""Choosing `a` for a Lagrange multiplier.

For each lambda we look for the regulator minimizing bpp + lambda * MSE on a
small calibration set.  The optimal regulators grow with lambda and lie close
to a straight line in sqrt(lambda / lambda_ref), which lets a single fitted
line map any lambda to a regulator.

Uses table-mass bit estimates (cost_mode="estimate") to keep it quick; they
sit within half a percent of the real coded size.

Run:  python3 demos/03_regulators_for_lambdas.py
"""

from pathlib import Path

from qvrf import codec, metrics
from qvrf import rate_control as rc
from qvrf.transform import read_image

data = Path(__file__).parents[1] / "tests/data"
calib_images = [read_image(p) for p in sorted(data.glob("*.pgm"))]
calib = rc.Calibration(calib_images, cost_mode="estimate")

print(f"{'lambda':>8} {'a*':>7} {'cost':>8} {'grid a':>7} fallback")
results = [rc.optimize_regulator(lam, calib) for lam in rc.LAMBDAS]
for r in results:
    print(f"{r.lam:8.4f} {r.a:7.3f} {r.cost:8.4f} {r.grid_a:7.3f} {r.fallback}")

vec = rc.RegulatorVector(rc.LAMBDAS, tuple(r.a for r in results))
fit = rc.fit_sqrt_lambda_line(vec)
print(f"\nsqrt(lambda/{fit.lambda_ref}) = {fit.slope:.4f} * a + {fit.intercept:.4f}   "
      f"r2 = {fit.r_squared:.4f}")

# a lambda that was never optimized: read a off the line and encode
lam = 0.04
a = rc.lambda_to_regulator(lam, fit)
img = calib_images[0]
enc = codec.analyze(img, a)
bpp = codec.account_bits(enc.bitstream).total_bpp
print(f"\nlambda={lam} -> a={a:.3f}: {bpp:.3f} bpp, {metrics.psnr(img, enc.reconstruction):.2f} dB")
