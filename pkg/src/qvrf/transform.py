"""Block-DCT analysis/synthesis and per-band scale side information.

Images are 2-D ``uint8`` luma arrays.  :func:`forward` applies an orthonormal
B x B DCT-II to each block, divides by ``step`` (pixel levels per latent
unit) and regroups coefficients into ``B*B`` band planes.  The DC plane is
replaced by DPCM residuals: left neighbour within a row, the block above for
the first column, mid-gray for the origin.

Scales are estimated once per image from the unquantized latent, so the side
information never depends on the quantization regulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from .entropy_model import SIGMA_MIN
from .errors import ConfigurationError

BLOCK = 8
BLOCK_SIZES = (4, 8, 16)
LATENT_STEP = 64.0
SCALE_LOG_STEP = 0.25
SCALE_LEVELS = 64
SIDE_BITS_PER_BAND = int(np.ceil(np.log2(SCALE_LEVELS)))


@dataclass
class LatentTensor:
    bands: np.ndarray  # (B*B, rows, cols); band 0 holds DC DPCM residuals
    block: int
    width: int
    height: int
    step: float = LATENT_STEP

    @property
    def pad(self) -> tuple[int, int]:
        """Replicated columns and rows added on the right and bottom."""
        return (-self.width % self.block, -self.height % self.block)

    @property
    def grid(self) -> tuple[int, int]:
        return self.bands.shape[1], self.bands.shape[2]

    @property
    def dc_prediction(self) -> float:
        return 128.0 * self.block / self.step


def check_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ConfigurationError(f"expected a 2-D luma image, got shape {img.shape}")
    if img.size == 0:
        raise ConfigurationError("zero-size image")
    if img.dtype != np.uint8:
        if not np.issubdtype(img.dtype, np.integer) or img.min() < 0 or img.max() > 255:
            raise ConfigurationError("image samples must be 8-bit integers")
        img = img.astype(np.uint8)
    return img


def _check_block(block: int):
    if block not in BLOCK_SIZES:
        raise ConfigurationError(f"block size {block} not in {BLOCK_SIZES}")


def dpcm_residuals(dc: np.ndarray, prediction: float) -> np.ndarray:
    res = np.empty_like(dc)
    res[:, 1:] = dc[:, 1:] - dc[:, :-1]
    res[1:, 0] = dc[1:, 0] - dc[:-1, 0]
    res[0, 0] = dc[0, 0] - prediction
    return res


def dpcm_reconstruct(res: np.ndarray, prediction: float) -> np.ndarray:
    """Inverse of :func:`dpcm_residuals`, accumulated in coding order."""
    dc = np.empty_like(res)
    prev = prediction
    for i in range(res.shape[0]):
        prev = prev + res[i, 0]
        dc[i, 0] = prev
    for j in range(1, res.shape[1]):
        dc[:, j] = dc[:, j - 1] + res[:, j]
    return dc


def _to_blocks(x: np.ndarray, block: int) -> np.ndarray:
    h, w = x.shape
    return x.reshape(h // block, block, w // block, block).transpose(0, 2, 1, 3)


def forward(img, block: int = BLOCK, step: float = LATENT_STEP) -> LatentTensor:
    img = check_image(img)
    _check_block(block)
    height, width = img.shape
    pad_h, pad_w = -height % block, -width % block
    x = np.pad(img.astype(np.float64), ((0, pad_h), (0, pad_w)), mode="edge")
    coeffs = dctn(_to_blocks(x, block), type=2, axes=(2, 3), norm="ortho") / step
    rows, cols = coeffs.shape[:2]
    bands = coeffs.transpose(2, 3, 0, 1).reshape(block * block, rows, cols).copy()
    lat = LatentTensor(bands, block, width, height, step)
    bands[0] = dpcm_residuals(bands[0], lat.dc_prediction)
    return lat


def coefficients(lat: LatentTensor) -> np.ndarray:
    """Band planes with the DC plane turned back into absolute DC values."""
    out = lat.bands.copy()
    out[0] = dpcm_reconstruct(lat.bands[0], lat.dc_prediction)
    return out


def synthesize(lat: LatentTensor) -> np.ndarray:
    """Inverse DCT to float pixels, cropped to the image size, no rounding or clipping."""
    b = lat.block
    rows, cols = lat.grid
    if lat.bands.shape[0] != b * b:
        raise ConfigurationError(f"expected {b * b} bands, got {lat.bands.shape[0]}")
    if rows * b < lat.height or cols * b < lat.width or rows * b - lat.height >= b \
            or cols * b - lat.width >= b:
        raise ConfigurationError(f"band grid {rows}x{cols} does not match a "
                                 f"{lat.width}x{lat.height} image with block {b}")
    blocks = coefficients(lat).reshape(b, b, rows, cols).transpose(2, 3, 0, 1)
    x = idctn(blocks * lat.step, type=2, axes=(2, 3), norm="ortho")
    x = x.transpose(0, 2, 1, 3).reshape(rows * b, cols * b)
    return x[: lat.height, : lat.width]


def inverse(lat: LatentTensor) -> np.ndarray:
    x = synthesize(lat)
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def estimate_scales(lat: LatentTensor) -> np.ndarray:
    """Per-band standard deviation, floored at SIGMA_MIN; all means are zero."""
    flat = lat.bands.reshape(lat.bands.shape[0], -1)
    return np.maximum(SIGMA_MIN, flat.std(axis=1))


def quantize_scales(scales) -> np.ndarray:
    """Log-domain scale indices, clamped into the codebook."""
    s = np.maximum(np.asarray(scales, dtype=np.float64), SIGMA_MIN)
    idx = np.rint(np.log(s / SIGMA_MIN) / SCALE_LOG_STEP)
    return np.clip(idx, 0, SCALE_LEVELS - 1).astype(np.int64)


def dequantize_scales(indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if np.any((idx < 0) | (idx >= SCALE_LEVELS)):
        raise ConfigurationError("scale index outside the codebook")
    return SIGMA_MIN * np.exp(SCALE_LOG_STEP * idx)


def read_image(path) -> np.ndarray:
    """Load a PGM/PPM (or anything Pillow reads) as 8-bit luma.

    Colour input is converted with the BT.601 luma weights.
    """
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "P", "1", "LA", "RGBA"):
            raise ConfigurationError(f"{path}: unsupported sample format {im.mode!r}")
        return np.asarray(im.convert("L"), dtype=np.uint8).copy()


def write_pgm(path, img):
    img = check_image(img)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(img.tobytes())
