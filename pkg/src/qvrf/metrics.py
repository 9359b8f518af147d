"""Quality metrics and Bjontegaard rate difference."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import QVRFError

PSNR_CAP = 99.0

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
MS_SSIM_MIN_SIZE = SSIM_WINDOW * 2 ** (len(MS_SSIM_WEIGHTS) - 1)  # 176


class ImageTooSmallError(QVRFError, ValueError):
    pass


class BDRateError(QVRFError, ValueError):
    pass


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    return x, y


def mse(x, y) -> float:
    x, y = _pair(x, y)
    return float(np.mean((x - y) ** 2))


def psnr(x, y, peak: float = 255.0) -> float:
    """PSNR in dB; identical images give PSNR_CAP instead of infinity."""
    err = mse(x, y)
    if err == 0.0:
        return PSNR_CAP
    return float(10.0 * np.log10(peak * peak / err))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    w = np.exp(-(r**2) / (2 * sigma**2))
    return w / w.sum()


def _filter_valid(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = correlate1d(img, w, axis=0, mode="constant")
    out = correlate1d(out, w, axis=1, mode="constant")
    h = len(w) // 2
    return out[h:-h, h:-h]


def _ssim_terms(x, y, w, peak):
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mx = _filter_valid(x, w)
    my = _filter_valid(y, w)
    sxx = _filter_valid(x * x, w) - mx * mx
    syy = _filter_valid(y * y, w) - my * my
    sxy = _filter_valid(x * y, w) - mx * my
    cs = (2 * sxy + c2) / (sxx + syy + c2)
    lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def ssim(x, y, peak: float = 255.0) -> float:
    """Single-scale SSIM, Gaussian window, mean over the valid region."""
    x, y = _pair(x, y)
    if min(x.shape) < SSIM_WINDOW:
        raise ImageTooSmallError(f"SSIM needs at least {SSIM_WINDOW} pixels per side")
    return _ssim_terms(x, y, _gaussian_window(), peak)[0]


def _downsample(x: np.ndarray) -> np.ndarray:
    h, w = x.shape[0] // 2 * 2, x.shape[1] // 2 * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(x, y, peak: float = 255.0) -> float:
    """Five-scale MS-SSIM.

    Contrast-structure terms of scales 1-4 and the full SSIM of scale 5 are
    combined with the standard exponents; negative terms are clipped to zero
    before exponentiation.
    """
    x, y = _pair(x, y)
    if x.ndim != 2 or min(x.shape) < MS_SSIM_MIN_SIZE:
        raise ImageTooSmallError(
            f"MS-SSIM needs a 2-D image of at least {MS_SSIM_MIN_SIZE} pixels per side, "
            f"got {x.shape}")
    w = _gaussian_window()
    result = 1.0
    last = len(MS_SSIM_WEIGHTS) - 1
    for scale, weight in enumerate(MS_SSIM_WEIGHTS):
        full, cs = _ssim_terms(x, y, w, peak)
        term = full if scale == last else cs
        result *= max(term, 0.0) ** weight
        if scale != last:
            x, y = _downsample(x), _downsample(y)
    return float(result)


@dataclass(frozen=True)
class RDCurve:
    """Rate (bpp) / quality (dB) operating points, rate strictly increasing."""

    rates: tuple
    qualities: tuple

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=np.float64)
        q = np.asarray(self.qualities, dtype=np.float64)
        if r.shape != q.shape or r.ndim != 1:
            raise BDRateError("rates and qualities must be 1-D and of equal length")
        if len(r) < 4:
            raise BDRateError(f"BD-rate needs at least 4 RD points, got {len(r)}")
        if np.any(r <= 0) or not np.all(np.isfinite(r)) or not np.all(np.isfinite(q)):
            raise BDRateError("rates must be positive and all values finite")
        if np.any(np.diff(r) <= 0):
            raise BDRateError("rates must be strictly increasing")
        object.__setattr__(self, "rates", tuple(float(v) for v in r))
        object.__setattr__(self, "qualities", tuple(float(v) for v in q))

    @classmethod
    def from_points(cls, points, quality: str = "psnr_db") -> "RDCurve":
        pts = sorted(points, key=lambda p: p.bpp_total)
        return cls(tuple(p.bpp_total for p in pts), tuple(getattr(p, quality) for p in pts))


def _fit_log_rate(curve: RDCurve) -> np.polynomial.Polynomial:
    # Cubic in quality, fitted on a domain scaled to [-1, 1]; raw PSNR powers
    # up to 45**3 would cost several digits in the normal equations.
    q = np.asarray(curve.qualities)
    if len(np.unique(q)) < 4:
        raise BDRateError("cubic fit needs at least 4 distinct quality values")
    with warnings.catch_warnings():
        warnings.simplefilter("error", np.exceptions.RankWarning)
        try:
            return np.polynomial.Polynomial.fit(q, np.log(curve.rates), 3)
        except np.exceptions.RankWarning:
            cond = np.linalg.cond(np.vander(q - q.mean(), 4))
            raise BDRateError(f"ill-conditioned cubic fit (condition number {cond:.3g})") from None


def bd_rate(anchor: RDCurve, test: RDCurve) -> float:
    """Average bitrate difference of ``test`` against ``anchor`` at equal quality, in percent.

    Log-rate (natural log) is fitted as a cubic in quality for each curve; the
    fitted difference is averaged over the shared quality interval and mapped
    back with ``exp``.  Negative values mean ``test`` needs fewer bits.
    """
    lo = max(min(anchor.qualities), min(test.qualities))
    hi = min(max(anchor.qualities), max(test.qualities))
    if not lo < hi:
        raise BDRateError(f"quality ranges do not overlap ([{lo:g}, {hi:g}])")
    pa = _fit_log_rate(anchor).integ()
    pt = _fit_log_rate(test).integ()
    mean_diff = ((pt(hi) - pt(lo)) - (pa(hi) - pa(lo))) / (hi - lo)
    return float(np.expm1(mean_diff) * 100.0)
