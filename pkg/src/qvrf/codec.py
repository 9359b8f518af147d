"""Variable-rate image codec: one transform, one entropy model, any ``a``.

Container layout (big-endian, 24-byte header)::

    offset  size  field
    0       4     magic b"QVRF"
    4       1     version (1)
    5       1     block size B
    6       1     right padding (columns replicated to reach a multiple of B)
    7       1     bottom padding
    8       4     width
    12      4     height
    16      4     regulator a, IEEE-754 binary32 bit pattern
    20      4     side segment length in bytes
    24      ...   side segment, then latent segment up to end of data

The side segment holds one 6-bit scale index per band; the latent segment
holds every quantized coefficient, band-major and raster order within a band,
each coded with the table for ``N(0, a*sigma_band)``.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import metrics
from .entropy_model import GaussianParams, build_symbol_table, check_regulator, quantize
from .errors import ConfigurationError, DecodeError, NonEncodableError, QVRFError
from .range_coder import RangeDecoder, RangeEncoder, ideal_bits
from .transform import (BLOCK, BLOCK_SIZES, SIDE_BITS_PER_BAND, LatentTensor, dequantize_scales,
                        estimate_scales, forward, inverse, quantize_scales)

MAGIC = b"QVRF"
VERSION = 1
HEADER = struct.Struct(">4sBBBBIIII")
HEADER_SIZE = HEADER.size

assert HEADER_SIZE == 24


def a_to_bits(a: float) -> int:
    return int(np.float32(a).view(np.uint32))


def bits_to_a(bits: int) -> float:
    return float(np.uint32(bits).view(np.float32))


def as_float32(a: float) -> float:
    """The value of ``a`` the decoder will see after header transport."""
    return bits_to_a(a_to_bits(a))


@dataclass
class Bitstream:
    width: int
    height: int
    block: int
    a_bits: int
    side: bytes
    latent: bytes
    version: int = VERSION

    @property
    def a(self) -> float:
        return bits_to_a(self.a_bits)

    @property
    def pad(self) -> tuple[int, int]:
        return (-self.width % self.block, -self.height % self.block)

    def to_bytes(self) -> bytes:
        pad_w, pad_h = self.pad
        head = HEADER.pack(MAGIC, self.version, self.block, pad_w, pad_h, self.width,
                           self.height, self.a_bits, len(self.side))
        return head + self.side + self.latent

    def __bytes__(self):
        return self.to_bytes()

    def __len__(self):
        return HEADER_SIZE + len(self.side) + len(self.latent)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        data = bytes(data)
        if len(data) < HEADER_SIZE:
            raise DecodeError(f"stream of {len(data)} bytes is shorter than the header")
        magic, version, block, pad_w, pad_h, width, height, a_bits, side_len = \
            HEADER.unpack_from(data)
        if magic != MAGIC:
            raise DecodeError(f"bad magic {magic!r}")
        if version != VERSION:
            raise DecodeError(f"unsupported version {version}")
        if block not in BLOCK_SIZES:
            raise DecodeError(f"unsupported block size {block}")
        if width == 0 or height == 0:
            raise DecodeError("zero image dimension")
        if (pad_w, pad_h) != (-width % block, -height % block):
            raise DecodeError("padding fields inconsistent with image size")
        if HEADER_SIZE + side_len > len(data):
            raise DecodeError("side segment runs past the end of the stream")
        bs = cls(width, height, block, a_bits, data[HEADER_SIZE:HEADER_SIZE + side_len],
                 data[HEADER_SIZE + side_len:], version)
        a = bs.a
        try:
            check_regulator(a)
        except ConfigurationError as exc:
            raise DecodeError(f"header regulator invalid: {exc}") from None
        return bs


@dataclass
class BitBreakdown:
    total_bpp: float
    latent_bpp: float
    side_bpp: float
    header_bpp: float
    pixels: int


@dataclass
class Encoding:
    """Everything the encoder knows about one coded image."""

    bitstream: Bitstream
    symbols: np.ndarray
    latent: LatentTensor  # closed-loop latent that was quantized
    dequantized: LatentTensor
    scale_indices: np.ndarray
    latent_bits_estimate: float  # sum of -log2(table mass) plus escape bypass bits
    reconstruction: np.ndarray = field(repr=False)


@lru_cache(maxsize=4096)
def _table(scale_index: int, a: float):
    sigma = float(dequantize_scales(scale_index))
    return build_symbol_table(GaussianParams(0.0, sigma), a)


def band_table(scale_index: int, a: float):
    """Symbol table used for a band with the given side-info index."""
    return _table(int(scale_index), float(a))


def _quantize_dc(res: np.ndarray, prediction: float, a: float):
    # Closed-loop DPCM: predict from reconstructed neighbours so the DC error
    # never accumulates.  Mirrors transform.dpcm_reconstruct term by term.
    dc = np.empty_like(res)
    prev = prediction
    for i in range(res.shape[0]):
        prev = prev + res[i, 0]
        dc[i, 0] = prev
    for j in range(1, res.shape[1]):
        dc[:, j] = dc[:, j - 1] + res[:, j]

    k = np.empty(res.shape, dtype=np.int64)
    closed = np.empty_like(res)
    rec = np.empty_like(res)
    prev = prediction
    for i in range(res.shape[0]):
        closed[i, 0] = dc[i, 0] - prev
        k[i, 0] = quantize(closed[i, 0], a)
        prev = prev + k[i, 0] / a
        rec[i, 0] = prev
    for j in range(1, res.shape[1]):
        closed[:, j] = dc[:, j] - rec[:, j - 1]
        k[:, j] = quantize(closed[:, j], a)
        rec[:, j] = rec[:, j - 1] + k[:, j] / a
    return k, closed


def quantize_latent(lat: LatentTensor, a: float):
    """Symbols for every band and the latent they were computed from.

    AC bands are quantized directly; the DC band is re-predicted in closed loop
    so that its returned residuals, not the open-loop ones, are what ``k/a``
    approximates.
    """
    symbols = np.empty(lat.bands.shape, dtype=np.int64)
    closed = lat.bands.copy()
    symbols[1:] = quantize(lat.bands[1:], a)
    symbols[0], closed[0] = _quantize_dc(lat.bands[0], lat.dc_prediction, a)
    return symbols, LatentTensor(closed, lat.block, lat.width, lat.height, lat.step)


def dequantize_latent(symbols: np.ndarray, a: float, like: LatentTensor) -> LatentTensor:
    return LatentTensor(symbols / a, like.block, like.width, like.height, like.step)


def _encode_side(indices: np.ndarray) -> bytes:
    enc = RangeEncoder()
    for i in indices:
        enc.encode_raw_bits(int(i), SIDE_BITS_PER_BAND)
    return enc.finish()


def _decode_side(data: bytes, count: int) -> np.ndarray:
    dec = RangeDecoder(data)
    return np.array([dec.decode_raw_bits(SIDE_BITS_PER_BAND) for _ in range(count)],
                    dtype=np.int64)


@dataclass
class Prepared:
    """Regulator-independent part of encoding: latent and side information."""

    latent: LatentTensor
    scale_indices: np.ndarray
    side: bytes

    @property
    def pixels(self) -> int:
        return self.latent.width * self.latent.height


def prepare(img, block: int = BLOCK) -> Prepared:
    lat = forward(img, block)
    if lat.width > 0xFFFFFFFF or lat.height > 0xFFFFFFFF:
        raise NonEncodableError("image too large for the container")
    indices = quantize_scales(estimate_scales(lat))
    return Prepared(lat, indices, _encode_side(indices))


def encode_prepared(prep: Prepared, a: float, entropy_code: bool = True) -> Encoding:
    """Quantize and code a prepared image at regulator ``a``.

    With ``entropy_code=False`` the range coder is skipped and the latent
    segment is left empty; the table-mass estimate is still filled in.
    """
    a = as_float32(check_regulator(a))
    check_regulator(a)
    lat = prep.latent
    symbols, closed = quantize_latent(lat, a)
    enc = RangeEncoder() if entropy_code else None
    estimate = 0.0
    for b in range(symbols.shape[0]):
        table = band_table(prep.scale_indices[b], a)
        ks = symbols[b].ravel()
        if enc is not None:
            enc.encode_symbols(table, ks)
        estimate += ideal_bits(table, ks)
    latent = enc.finish() if enc is not None else b""
    bs = Bitstream(lat.width, lat.height, lat.block, a_to_bits(a), prep.side, latent)
    deq = dequantize_latent(symbols, a, lat)
    return Encoding(bs, symbols, closed, deq, prep.scale_indices, estimate, inverse(deq))


def analyze(img, a: float, block: int = BLOCK) -> Encoding:
    """Encode ``img`` at regulator ``a`` and keep all intermediate results."""
    check_regulator(a)
    return encode_prepared(prepare(img, block), a)


def encode_image(img, a: float, block: int = BLOCK) -> Bitstream:
    return analyze(img, a, block).bitstream


def decode_latent(bs: Bitstream | bytes) -> LatentTensor:
    if not isinstance(bs, Bitstream):
        bs = Bitstream.from_bytes(bs)
    a = bs.a
    nb = bs.block * bs.block
    rows = -(-bs.height // bs.block)
    cols = -(-bs.width // bs.block)
    indices = _decode_side(bs.side, nb)
    dec = RangeDecoder(bs.latent)
    symbols = np.empty((nb, rows, cols), dtype=np.int64)
    for b in range(nb):
        symbols[b] = dec.decode_symbols(band_table(indices[b], a), rows * cols).reshape(rows, cols)
    return LatentTensor(symbols / a, bs.block, bs.width, bs.height)


def decode_image(bs: Bitstream | bytes) -> np.ndarray:
    """Reconstruct the image; malformed input raises :class:`DecodeError`."""
    return inverse(decode_latent(bs))


def account_bits(bs: Bitstream | bytes) -> BitBreakdown:
    if not isinstance(bs, Bitstream):
        bs = Bitstream.from_bytes(bs)
    px = bs.width * bs.height
    side = 8 * len(bs.side) / px
    latent = 8 * len(bs.latent) / px
    header = 8 * HEADER_SIZE / px
    return BitBreakdown(8 * len(bs) / px, latent, side, header, px)


def bits_table(img, a_values, block: int = BLOCK) -> str:
    """Per-``a`` bit consumption report: latent bpp, side bpp, total bpp, PSNR."""
    lines = [f"{'a':>10} {'latent bpp':>12} {'side bpp':>10} {'total bpp':>10} {'PSNR dB':>8}"]
    for a in a_values:
        enc = analyze(img, a, block)
        br = account_bits(enc.bitstream)
        q = metrics.psnr(img, enc.reconstruction)
        lines.append(f"{enc.bitstream.a:>10.4f} {br.latent_bpp:>12.5f} {br.side_bpp:>10.5f} "
                     f"{br.total_bpp:>10.5f} {q:>8.3f}")
    return "\n".join(lines)


class SweepError(QVRFError):
    """A single (image, a) evaluation inside a sweep failed."""


CSV_FIELDS = ("image", "a", "lambda", "bpp_total", "bpp_latent", "bpp_side", "psnr_db", "ms_ssim")


@dataclass
class RDPoint:
    image: str
    a: float
    bpp_total: float
    bpp_latent: float
    bpp_side: float
    psnr_db: float
    ms_ssim: float
    lam: float | None = None

    @property
    def bpp(self) -> float:
        return self.bpp_total

    def row(self) -> dict:
        return {"image": self.image, "a": repr(self.a),
                "lambda": "" if self.lam is None else repr(self.lam),
                "bpp_total": repr(self.bpp_total), "bpp_latent": repr(self.bpp_latent),
                "bpp_side": repr(self.bpp_side), "psnr_db": repr(self.psnr_db),
                "ms_ssim": repr(self.ms_ssim)}


def evaluate(img, a: float, name: str = "", block: int = BLOCK, lam: float | None = None) -> RDPoint:
    """Encode, decode and score one image at one regulator value."""
    img = np.asarray(img)
    bs = encode_image(img, a, block)
    rec = decode_image(bs.to_bytes())
    br = account_bits(bs)
    try:
        ms = metrics.ms_ssim(img, rec)
    except metrics.ImageTooSmallError:
        ms = math.nan
    return RDPoint(name, bs.a, br.total_bpp, br.latent_bpp, br.side_bpp,
                   metrics.psnr(img, rec), ms, lam)


def rd_sweep(images, a_values, names=None, block: int = BLOCK, lambda_of=None) -> list[RDPoint]:
    """RD points for every (image, a) pair, plus per-``a`` means over images.

    ``images`` is a sequence of arrays; ``names`` labels them in the output.
    ``lambda_of`` optionally maps ``a`` to the lambda recorded in the CSV.
    Mean rows are labelled ``"mean"`` and only emitted for more than one image.
    """
    images = list(images)
    a_values = list(a_values)
    if not images or not a_values:
        raise ValueError("rd_sweep needs at least one image and one regulator value")
    names = list(names) if names is not None else [f"image{i}" for i in range(len(images))]
    points = []
    for name, img in zip(names, images):
        for a in a_values:
            lam = None if lambda_of is None else float(lambda_of(a))
            try:
                points.append(evaluate(img, a, name, block, lam))
            except QVRFError as exc:
                raise SweepError(f"{name} at a={a}: {exc}") from exc
    if len(images) > 1:
        per_image = list(points)
        for i in range(len(a_values)):
            group = per_image[i::len(a_values)]
            points.append(RDPoint(
                "mean", group[0].a,
                *(float(np.mean([getattr(p, f) for p in group]))
                  for f in ("bpp_total", "bpp_latent", "bpp_side", "psnr_db", "ms_ssim")),
                lam=group[0].lam))
    return points


def write_rd_csv(points, path):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for p in points:
            w.writerow(p.row())


def read_rd_csv(path) -> list[RDPoint]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing CSV columns {sorted(missing)}")
        return [RDPoint(r["image"], float(r["a"]), float(r["bpp_total"]), float(r["bpp_latent"]),
                        float(r["bpp_side"]), float(r["psnr_db"]), float(r["ms_ssim"]),
                        float(r["lambda"]) if r["lambda"] else None)
                for r in reader]
