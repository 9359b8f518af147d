"""Byte-oriented range coder driven by fixed-precision CDF tables.

The coder keeps a 32-bit ``range`` register and a 64-bit ``low`` accumulator
holding 33 significant bits; a carry out of bit 32 is propagated into the
pending bytes (``cache`` plus a run of 0xFF bytes).  All arithmetic is on
integers, so the output is identical on every platform.

Per symbol, ``r = range >> precision`` and the symbol's interval is
``[r*cum, r*(cum+freq))``.  The remainder ``range - r*total`` is added to the
table's most probable slot (``dist.mps``) and every slot above it is shifted
up by the same amount, so no code space is thrown away and escape slots cost
exactly what their table mass says.

Raw (bypass) bits are coded as uniform symbols of at most 16 bits each.

The hot loops are compiled with numba; :class:`RangeEncoder` and
:class:`RangeDecoder` are thin stateful wrappers around them.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .entropy_model import SymbolDistribution
from .errors import StreamExhaustedError

OVERHEAD = 8
TOP = 1 << 24
RANGE_INIT = (1 << 32) - 1
_LOW_MASK = (1 << 32) - 1

# encoder state slots
_LOW, _RANGE, _CACHE, _CACHE_SIZE, _POS = range(5)
# decoder state slots
_CODE, _DRANGE, _DPOS, _EXHAUSTED = range(4)


@njit(cache=True)
def _shift_low(st, buf):
    low = st[_LOW]
    if low < 0xFF000000 or low > _LOW_MASK:
        carry = low >> 32
        temp = st[_CACHE]
        pos = st[_POS]
        while True:
            buf[pos] = (temp + carry) & 0xFF
            pos += 1
            temp = 0xFF
            st[_CACHE_SIZE] -= 1
            if st[_CACHE_SIZE] == 0:
                break
        st[_POS] = pos
        st[_CACHE] = (low >> 24) & 0xFF
    st[_CACHE_SIZE] += 1
    st[_LOW] = (low & 0x00FFFFFF) << 8


@njit(cache=True)
def _enc_interval(st, buf, cum, freq, precision, s, mps):
    r = st[_RANGE] >> precision
    rem = st[_RANGE] - (r << precision)
    start = r * cum
    width = r * freq
    if s > mps:
        start += rem
    elif s == mps:
        width += rem
    st[_LOW] += start
    st[_RANGE] = width
    while st[_RANGE] < TOP:
        st[_RANGE] <<= 8
        _shift_low(st, buf)


@njit(cache=True)
def _enc_raw(st, buf, value, nbits):
    while nbits > 0:
        n = 16 if nbits > 16 else nbits
        nbits -= n
        chunk = (value >> nbits) & ((1 << n) - 1)
        r = st[_RANGE] >> n
        st[_LOW] += r * chunk
        st[_RANGE] = r
        while st[_RANGE] < TOP:
            st[_RANGE] <<= 8
            _shift_low(st, buf)


@njit(cache=True)
def _bit_length(v):
    n = 0
    while v > 0:
        v >>= 1
        n += 1
    return n


@njit(cache=True)
def _enc_escape_payload(st, buf, k, k_min, k_max):
    # sign bit, then exp-Golomb (order 0) of the distance beyond the window
    if k > k_max:
        _enc_raw(st, buf, 0, 1)
        d = k - k_max - 1
    else:
        _enc_raw(st, buf, 1, 1)
        d = k_min - 1 - k
    m = d + 1
    nb = _bit_length(m)
    _enc_raw(st, buf, nb - 1, 5)
    _enc_raw(st, buf, m - (1 << (nb - 1)), nb - 1)


@njit(cache=True)
def _enc_symbols(st, buf, cdf, mps, k_min, k_max, precision, ks, with_payload):
    esc = len(cdf) - 2
    for i in range(len(ks)):
        k = ks[i]
        if k_min <= k <= k_max:
            s = k - k_min
        else:
            s = esc
        _enc_interval(st, buf, cdf[s], cdf[s + 1] - cdf[s], precision, s, mps)
        if s == esc and with_payload:
            _enc_escape_payload(st, buf, k, k_min, k_max)


@njit(cache=True)
def _enc_finish(st, buf):
    for _ in range(5):
        _shift_low(st, buf)


@njit(cache=True)
def _next_byte(st, data):
    pos = st[_DPOS]
    if pos >= len(data):
        st[_EXHAUSTED] = 1
        return 0
    st[_DPOS] = pos + 1
    return data[pos]


@njit(cache=True)
def _dec_init(st, data):
    st[_CODE] = 0
    st[_DRANGE] = RANGE_INIT
    for _ in range(5):
        st[_CODE] = ((st[_CODE] << 8) | _next_byte(st, data)) & _LOW_MASK


@njit(cache=True)
def _dec_normalize(st, data):
    while st[_DRANGE] < TOP:
        st[_DRANGE] <<= 8
        st[_CODE] = ((st[_CODE] << 8) | _next_byte(st, data)) & _LOW_MASK


@njit(cache=True)
def _dec_slot(st, data, cdf, mps, precision):
    r = st[_DRANGE] >> precision
    rem = st[_DRANGE] - (r << precision)
    code = st[_CODE]
    if code < r * cdf[mps]:
        s = np.searchsorted(cdf, code // r, side="right") - 1
    elif code < r * cdf[mps + 1] + rem:
        s = mps
    else:
        v = (code - rem) // r
        s = np.searchsorted(cdf, v, side="right") - 1
        if s > len(cdf) - 2:
            s = len(cdf) - 2
    start = r * cdf[s]
    width = r * (cdf[s + 1] - cdf[s])
    if s > mps:
        start += rem
    elif s == mps:
        width += rem
    st[_CODE] = code - start
    st[_DRANGE] = width
    _dec_normalize(st, data)
    return s


@njit(cache=True)
def _dec_raw(st, data, nbits):
    value = 0
    while nbits > 0:
        n = 16 if nbits > 16 else nbits
        nbits -= n
        r = st[_DRANGE] >> n
        v = st[_CODE] // r
        if v >= (1 << n):
            v = (1 << n) - 1
        st[_CODE] -= v * r
        st[_DRANGE] = r
        _dec_normalize(st, data)
        value = (value << n) | v
    return value


@njit(cache=True)
def _dec_escape_payload(st, data, k_min, k_max):
    below = _dec_raw(st, data, 1)
    nb = _dec_raw(st, data, 5) + 1
    m = (1 << (nb - 1)) + _dec_raw(st, data, nb - 1)
    d = m - 1
    if below:
        return k_min - 1 - d
    return k_max + 1 + d


@njit(cache=True)
def _dec_symbols(st, data, cdf, mps, k_min, k_max, precision, out, with_payload):
    esc = len(cdf) - 2
    for i in range(len(out)):
        s = _dec_slot(st, data, cdf, mps, precision)
        if s == esc:
            if with_payload:
                out[i] = _dec_escape_payload(st, data, k_min, k_max)
            else:
                out[i] = k_max + 1
        else:
            out[i] = k_min + s
        if st[_EXHAUSTED]:
            return


class RangeEncoder:
    """Accumulates coded symbols; call :meth:`finish` to obtain the bytes."""

    def __init__(self):
        self._st = np.array([0, RANGE_INIT, 0, 1, 0], dtype=np.int64)
        self._buf = np.zeros(256, dtype=np.uint8)
        self._done = False

    def _reserve(self, nbytes: int):
        need = int(self._st[_POS]) + nbytes + 16
        if need > len(self._buf):
            grown = np.zeros(max(need, 2 * len(self._buf)), dtype=np.uint8)
            grown[: len(self._buf)] = self._buf
            self._buf = grown

    def _check_open(self):
        if self._done:
            raise RuntimeError("encoder already finished")

    def encode_symbol(self, dist: SymbolDistribution, k: int):
        """Code ``k``; any value just outside the window selects the escape slot."""
        self._check_open()
        k = int(k)
        if not dist.k_min - 1 <= k <= dist.k_max + 1:
            raise ValueError(f"symbol {k} outside [{dist.k_min - 1}, {dist.k_max + 1}]")
        self._reserve(8)
        _enc_symbols(self._st, self._buf, dist.cdf, dist.mps, dist.k_min, dist.k_max, dist.precision,
                     np.array([k], dtype=np.int64), False)

    def encode_symbols(self, dist: SymbolDistribution, ks: np.ndarray):
        """Code a run of symbols with one table.

        Out-of-window values take the escape slot followed by a sign bit and an
        exp-Golomb code of their distance from the window, as bypass bits.
        """
        self._check_open()
        ks = np.ascontiguousarray(ks, dtype=np.int64).ravel()
        self._reserve(16 * len(ks))
        _enc_symbols(self._st, self._buf, dist.cdf, dist.mps, dist.k_min, dist.k_max, dist.precision,
                     ks, True)

    def encode_raw_bits(self, value: int, n_bits: int):
        self._check_open()
        if not 0 <= n_bits <= 32:
            raise ValueError(f"n_bits={n_bits} outside [0, 32]")
        if not 0 <= value < (1 << n_bits) or (n_bits == 0 and value):
            raise ValueError(f"value {value} does not fit in {n_bits} bits")
        self._reserve(8)
        _enc_raw(self._st, self._buf, int(value), int(n_bits))

    def finish(self) -> bytes:
        self._check_open()
        self._reserve(8)
        _enc_finish(self._st, self._buf)
        self._done = True
        return self._buf[: self._st[_POS]].tobytes()


class RangeDecoder:
    """Mirror of :class:`RangeEncoder` over a byte string."""

    def __init__(self, data: bytes):
        self._data = np.frombuffer(bytes(data), dtype=np.uint8)
        self._st = np.zeros(4, dtype=np.int64)
        _dec_init(self._st, self._data)
        self._check()

    def _check(self):
        if self._st[_EXHAUSTED]:
            raise StreamExhaustedError(
                f"range decoder ran past the end of a {len(self._data)}-byte stream")

    @property
    def bytes_consumed(self) -> int:
        return int(self._st[_DPOS])

    def decode_symbol(self, dist: SymbolDistribution) -> int:
        """Next symbol; the escape slot comes back as ``dist.escape_symbol``."""
        out = np.zeros(1, dtype=np.int64)
        _dec_symbols(self._st, self._data, dist.cdf, dist.mps, dist.k_min, dist.k_max, dist.precision,
                     out, False)
        self._check()
        return int(out[0])

    def decode_symbols(self, dist: SymbolDistribution, count: int) -> np.ndarray:
        out = np.zeros(int(count), dtype=np.int64)
        _dec_symbols(self._st, self._data, dist.cdf, dist.mps, dist.k_min, dist.k_max, dist.precision,
                     out, True)
        self._check()
        return out

    def decode_raw_bits(self, n_bits: int) -> int:
        if not 0 <= n_bits <= 32:
            raise ValueError(f"n_bits={n_bits} outside [0, 32]")
        value = _dec_raw(self._st, self._data, int(n_bits))
        self._check()
        return int(value)


def ideal_bits(dist: SymbolDistribution, ks: np.ndarray) -> float:
    """Sum of ``-log2(mass/total)`` for ``ks`` plus the bypass bits escapes need."""
    ks = np.asarray(ks, dtype=np.int64).ravel()
    inside = (ks >= dist.k_min) & (ks <= dist.k_max)
    slots = np.where(inside, ks - dist.k_min, dist.escape_slot)
    freqs = dist.freqs[slots]
    bits = float(np.sum(dist.precision - np.log2(freqs)))
    esc = ks[~inside]
    if esc.size:
        d = np.where(esc > dist.k_max, esc - dist.k_max - 1, dist.k_min - 1 - esc)
        nb = np.floor(np.log2(d + 1.0)).astype(np.int64) + 1
        bits += float(np.sum(1 + 5 + nb - 1))
    return bits
