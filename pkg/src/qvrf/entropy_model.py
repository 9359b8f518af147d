"""Gaussian conditional entropy model with a quantization regulator.

A latent coefficient ``y`` with conditional density N(mu, sigma) is quantized
with bin width ``1/a``.  Two equivalent ways of computing the probability of
symbol ``k`` are provided:

* :func:`pmf_direct` integrates N(mu, sigma) over ``[k/a - 1/(2a), k/a + 1/(2a)]``;
* :func:`pmf_reparam` integrates N(a*mu, a*sigma) over ``[k - 1/2, k + 1/2]``,
  which is what a plain round quantizer applied to ``a*y`` needs.

:func:`build_symbol_table` turns the reparameterized masses into the integer
CDF consumed by :mod:`qvrf.range_coder`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, NonEncodableError

SIGMA_MIN = 0.11
A_MIN = 0.25
A_MAX = 32.0
PRECISION = 16
TAIL = 6.0
MAX_WINDOW = 4096
MIN_COUNT = 0.5  # window slots must expect at least this many counts out of 2**precision
SYMBOL_LIMIT = 2**31 - 1


def std_normal_cdf(x):
    """Standard normal CDF.

    Evaluated as ``0.5 * erfc(-x / sqrt(2))`` by :func:`scipy.special.ndtr`,
    whose absolute error is at the level of double rounding (well below
    1e-12) over the whole real line.
    """
    return ndtr(x)


def _interval_mass(lo, hi):
    # Phi(hi) - Phi(lo), evaluated on the upper tail when both bounds are
    # positive so that masses far from the mean keep their relative precision.
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    upper = lo > 0
    mass = np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))
    return mass if mass.ndim else float(mass)


@dataclass(frozen=True)
class GaussianParams:
    """Mean and scale of a conditional Gaussian; ``sigma`` is clamped to SIGMA_MIN."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ConfigurationError(f"non-finite Gaussian parameters ({self.mu}, {self.sigma})")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", max(float(self.sigma), SIGMA_MIN))


def check_regulator(a: float, a_min: float = A_MIN, a_max: float = A_MAX) -> float:
    a = float(a)
    if not (math.isfinite(a) and a > 0 and a_min <= a <= a_max):
        raise ConfigurationError(f"regulator a={a!r} outside [{a_min}, {a_max}]")
    return a


def pmf_direct(k, mu, sigma, a):
    """Mass of N(mu, sigma) over the bin of width 1/a centred on k/a."""
    k = np.asarray(k, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    centre = k / a
    half = 1.0 / (2.0 * a)
    return _interval_mass((centre - half - mu) / sigma, (centre + half - mu) / sigma)


def pmf_reparam(k, mu, sigma, a):
    """Mass of N(a*mu, a*sigma) over the unit bin centred on integer k."""
    k = np.asarray(k, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    loc = a * mu
    scale = a * sigma
    return _interval_mass((k - 0.5 - loc) / scale, (k + 0.5 - loc) / scale)


def round_half_away(v):
    """Round to the nearest integer, ties away from zero (exact, no ``+0.5`` drift)."""
    v = np.asarray(v, dtype=np.float64)
    t = np.trunc(v)
    return t + np.sign(v) * (np.abs(v - t) >= 0.5)


def quantize(y, a):
    """Symbol index ``round(a * y)`` as int64.

    Raises :class:`NonEncodableError` for non-finite input or when the scaled
    value leaves the signed 32-bit symbol range.
    """
    v = np.asarray(y, dtype=np.float64) * a
    if not np.all(np.isfinite(v)):
        raise NonEncodableError("non-finite latent coefficient")
    k = round_half_away(v)
    if k.size and np.max(np.abs(k)) > SYMBOL_LIMIT:
        raise NonEncodableError(f"|a*y| exceeds symbol range {SYMBOL_LIMIT}")
    k = k.astype(np.int64)
    return k if k.ndim else int(k)


def dequantize(k, a):
    """Reconstruction ``k / a``; the error against y is at most ``1/(2a)``."""
    out = np.asarray(k, dtype=np.float64) / a
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class SymbolDistribution:
    """Fixed-precision CDF over symbols ``k_min..k_max`` plus one escape slot.

    ``cdf`` has ``k_max - k_min + 3`` entries: one boundary per in-window
    symbol, then the escape slot, closing at ``2**precision``.  ``mps`` is the
    most probable slot (lowest index on ties).
    """

    k_min: int
    k_max: int
    cdf: np.ndarray = field(repr=False)
    precision: int = PRECISION
    mps: int = field(init=False)

    def __post_init__(self):
        cdf = np.asarray(self.cdf, dtype=np.int64)
        if len(cdf) != self.k_max - self.k_min + 3:
            raise ConfigurationError("cdf length does not match the symbol window")
        freqs = np.diff(cdf)
        if cdf[0] != 0 or cdf[-1] != 1 << self.precision or np.any(freqs < 1):
            raise ConfigurationError("cdf must rise strictly from 0 to 2**precision")
        cdf.flags.writeable = False
        object.__setattr__(self, "cdf", cdf)
        object.__setattr__(self, "mps", int(np.argmax(freqs)))

    @property
    def total(self) -> int:
        return 1 << self.precision

    @property
    def num_slots(self) -> int:
        return len(self.cdf) - 1

    @property
    def escape_slot(self) -> int:
        return self.num_slots - 1

    @property
    def escape_symbol(self) -> int:
        """Sentinel returned by the decoder when the escape slot is hit."""
        return self.k_max + 1

    @property
    def escape_mass(self) -> int:
        return int(self.cdf[-1] - self.cdf[-2])

    @property
    def freqs(self) -> np.ndarray:
        return np.diff(self.cdf)

    def mass(self, k: int) -> int:
        if self.k_min <= k <= self.k_max:
            i = k - self.k_min
            return int(self.cdf[i + 1] - self.cdf[i])
        return self.escape_mass

    def to_bytes(self) -> bytes:
        head = np.array([self.k_min, self.k_max, self.precision], dtype=">i8").tobytes()
        return head + self.cdf.astype(">u4").tobytes()

    def __eq__(self, other):
        if not isinstance(other, SymbolDistribution):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    def __hash__(self):
        return hash(self.to_bytes())


def _integer_masses(p: np.ndarray, total: int) -> np.ndarray:
    # Largest-remainder rounding of p * total with every slot >= 1.
    raw = p * total
    counts = np.maximum(np.floor(raw), 1.0).astype(np.int64)
    diff = total - int(counts.sum())
    if diff > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:diff]] += 1
    while diff < 0:
        i = int(np.argmax(counts))
        take = min(-diff, int(counts[i]) - 1)
        if take <= 0:
            raise ConfigurationError("symbol table cannot give every slot a non-zero mass")
        counts[i] -= take
        diff += take
    return counts


def symbol_window(params: GaussianParams, a: float, tail: float = TAIL,
                  max_window: int = MAX_WINDOW) -> tuple[int, int]:
    """Symbol range covering ``a*mu +- tail*a*sigma``, capped at ``max_window`` symbols."""
    centre = a * params.mu
    spread = tail * a * params.sigma
    k_min = math.floor(centre - spread)
    k_max = math.ceil(centre + spread)
    if k_max - k_min + 1 > max_window:
        mode = int(round_half_away(centre))
        k_min = mode - (max_window - 1) // 2
        k_max = k_min + max_window - 1
    return k_min, k_max


def build_symbol_table(params: GaussianParams, a: float, precision: int = PRECISION,
                       tail: float = TAIL, max_window: int = MAX_WINDOW) -> SymbolDistribution:
    """Integer CDF for ``round(a*y)`` under N(mu, sigma).

    Window masses come from :func:`pmf_reparam`.  Edge symbols whose mass
    would round to less than MIN_COUNT table units are dropped from the
    window, since a forced minimum count there costs more than escaping;
    whatever lies outside the window goes to the escape slot.  The table is a
    pure function of its arguments, so encoder and decoder build identical
    copies.
    """
    if not 2 <= max_window < (1 << precision) // 2:
        raise ConfigurationError(f"max_window={max_window} incompatible with {precision}-bit tables")
    total = 1 << precision
    k_min, k_max = symbol_window(params, a, tail, max_window)
    ks = np.arange(k_min, k_max + 1, dtype=np.float64)
    p = pmf_reparam(ks, params.mu, params.sigma, a)
    keep = np.flatnonzero(p >= min(MIN_COUNT / total, 0.5 * p.max()))
    lo, hi = int(keep[0]), int(keep[-1])
    k_min, k_max = k_min + lo, k_min + hi
    p = p[lo:hi + 1]
    escape = max(0.0, 1.0 - float(p.sum()))
    counts = _integer_masses(np.append(p, escape), total)
    cdf = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=cdf[1:])
    return SymbolDistribution(k_min, k_max, cdf, precision)


def table_kl_bits(params: GaussianParams, a: float, table: SymbolDistribution) -> float:
    """KL divergence (bits/symbol) from the exact window+escape masses to the table."""
    ks = np.arange(table.k_min, table.k_max + 1, dtype=np.float64)
    p = pmf_reparam(ks, params.mu, params.sigma, a)
    p = np.append(p, max(0.0, 1.0 - float(p.sum())))
    q = table.freqs / table.total
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / q[nz])))
