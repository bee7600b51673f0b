"""Maximal-length LFSR pseudorandom bit generator.

Fibonacci form: the register shifts left, the parity of the tapped bits is
shifted into bit 0, and the emitted bit is bit 0 *before* the shift. A tap
mask bit ``t - 1`` corresponds to the polynomial term ``x^t``, so the mask of
a width-``w`` polynomial always has bit ``w - 1`` set.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

# x^7+x^6+1, x^15+x^14+1, x^23+x^18+1
DEFAULT_POLYNOMIALS = {
    7: (7, 6),
    15: (15, 14),
    23: (23, 18),
}

MIN_WIDTH = 3
MAX_WIDTH = 64


def taps_to_mask(exponents) -> int:
    """Convert polynomial exponents (the ``+1`` term omitted) to a tap mask."""
    mask = 0
    for e in exponents:
        if e < 1:
            raise ValueError(f"tap exponent must be >= 1, got {e}")
        mask |= 1 << (e - 1)
    return mask


def parse_polynomial(text: str) -> tuple[int, int]:
    """Parse ``"x^7+x^6+1"`` into ``(width, mask)``."""
    terms = [t.strip() for t in text.replace(" ", "").split("+") if t.strip()]
    exps = []
    for t in terms:
        if t == "1":
            continue
        m = re.fullmatch(r"x(?:\^(\d+))?", t)
        if not m:
            raise ValueError(f"bad polynomial term {t!r} in {text!r}")
        exps.append(int(m.group(1) or 1))
    if not exps:
        raise ValueError(f"polynomial {text!r} has no x terms")
    return max(exps), taps_to_mask(exps)


def default_mask(width: int) -> int:
    try:
        return taps_to_mask(DEFAULT_POLYNOMIALS[width])
    except KeyError:
        raise ValueError(
            f"no shipped polynomial for width {width}; "
            f"available: {sorted(DEFAULT_POLYNOMIALS)}"
        ) from None


@dataclass(frozen=True, slots=True)
class LfsrState:
    width: int
    taps: int
    state: int

    def __post_init__(self):
        if not MIN_WIDTH <= self.width <= MAX_WIDTH:
            raise ValueError(f"width must be in [{MIN_WIDTH}, {MAX_WIDTH}], got {self.width}")
        if self.taps == 0:
            raise ValueError("empty tap mask")
        if self.taps.bit_length() != self.width:
            raise ValueError(
                f"tap mask {self.taps:#x} must have its highest bit at position {self.width - 1}"
            )
        if not 0 < self.state < (1 << self.width):
            raise ValueError(f"state must be nonzero and < 2^{self.width}, got {self.state}")

    @classmethod
    def default(cls, width: int = 23, seed: int = 1) -> "LfsrState":
        """Shipped polynomial for ``width``; ``seed`` is folded into a nonzero state."""
        return cls(width, default_mask(width), seed_state(width, seed))


def seed_state(width: int, seed: int) -> int:
    """Map an arbitrary integer seed onto a valid nonzero register value."""
    s = seed % ((1 << width) - 1)
    return s + 1 if s == 0 else s


def lfsr_step(s: LfsrState) -> tuple[int, LfsrState]:
    """Emit one bit and advance one step."""
    w, taps, x = s.width, s.taps, s.state
    fb = (x & taps).bit_count() & 1
    return x & 1, LfsrState(w, taps, ((x << 1) | fb) & ((1 << w) - 1))


def _advance(width: int, taps: int, x: int, k: int) -> tuple[int, int]:
    # Tight loop shared by lfsr_word; returns (word, new_state)
    full = (1 << width) - 1
    word = 0
    for i in range(k):
        word |= (x & 1) << i
        x = ((x << 1) | ((x & taps).bit_count() & 1)) & full
    return word, x


def lfsr_word(s: LfsrState, k: int) -> tuple[int, LfsrState]:
    """Pack ``k`` consecutive emitted bits, first emitted bit in bit 0."""
    if not 1 <= k <= 64:
        raise ValueError(f"word size must be in [1, 64], got {k}")
    word, x = _advance(s.width, s.taps, s.state, k)
    return word, LfsrState(s.width, s.taps, x)


def lfsr_bits(s: LfsrState, n: int) -> tuple[np.ndarray, LfsrState]:
    """Emit ``n`` bits at once as a uint8 array.

    Bit-identical to ``n`` calls of :func:`lfsr_step`. Works on the feedback
    history held in one big integer: the history obeys the recurrence
    ``f[t] = XOR_i f[t - lag_i]`` and also the recurrence with every lag
    multiplied by ``2^j`` (squaring a GF(2) polynomial), so whole blocks of
    bits are produced per shift-and-xor once enough history exists.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.zeros(0, dtype=np.uint8), s
    w = s.width
    lags = [i + 1 for i in range(w) if (s.taps >> i) & 1]
    # bit t of hist is f[t - w]; the seed supplies f[-w .. -1]
    hist = 0
    for t in range(w):
        hist |= ((s.state >> (w - 1 - t)) & 1) << t
    length = w
    need = w + n - 1 + 1  # outputs are hist bits w-1 .. w+n-2, state needs up to w+n-1
    scale = 1
    while length < need:
        # grow the lag multiplier while history allows it
        while lags[-1] * scale * 2 <= length:
            scale *= 2
        block = min(lags[0] * scale, need - length)
        bmask = (1 << block) - 1
        new = 0
        for lag in lags:
            new ^= (hist >> (length - lag * scale)) & bmask
        hist |= new << length
        length += block
    out_int = hist >> (w - 1)
    nbytes = (n + 7) // 8
    raw = np.frombuffer((out_int & ((1 << (8 * nbytes)) - 1)).to_bytes(nbytes, "little"), dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")[:n].copy()
    # state after n steps: bit i is f[n - 1 - i] = hist bit (n - 1 - i + w)
    x = 0
    for i in range(w):
        x |= ((hist >> (n - 1 - i + w)) & 1) << i
    return bits, LfsrState(w, s.taps, x)


def lfsr_words(s: LfsrState, count: int, k: int = 64) -> tuple[np.ndarray, LfsrState]:
    """``count`` consecutive ``k``-bit words as uint64, same packing as :func:`lfsr_word`."""
    if not 1 <= k <= 64:
        raise ValueError(f"word size must be in [1, 64], got {k}")
    bits, s = lfsr_bits(s, count * k)
    if count == 0:
        return np.zeros(0, dtype=np.uint64), s
    b = bits.reshape(count, k).astype(np.uint64)
    words = (b << np.arange(k, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)
    return words, s


def period(s: LfsrState, limit: int | None = None) -> int:
    """Number of steps until the state recurs (brute force)."""
    w, taps, x0 = s.width, s.taps, s.state
    full = (1 << w) - 1
    limit = limit if limit is not None else full + 1
    x = x0
    for n in range(1, limit + 1):
        x = ((x << 1) | ((x & taps).bit_count() & 1)) & full
        if x == x0:
            return n
    raise RuntimeError(f"no recurrence within {limit} steps")


class Prbs:
    """Mutable convenience wrapper for simulator components that own a generator."""

    __slots__ = ("width", "taps", "state")

    def __init__(self, width: int = 23, seed: int = 1, taps: int | None = None):
        st = LfsrState(width, default_mask(width) if taps is None else taps, seed_state(width, seed))
        self.width, self.taps, self.state = st.width, st.taps, st.state

    @property
    def lfsr(self) -> LfsrState:
        return LfsrState(self.width, self.taps, self.state)

    def word(self, k: int = 64) -> int:
        word, self.state = _advance(self.width, self.taps, self.state, k)
        return word

    def words(self, count: int, k: int = 64) -> np.ndarray:
        out, st = lfsr_words(self.lfsr, count, k)
        self.state = st.state
        return out

    def bits(self, n: int) -> np.ndarray:
        out, st = lfsr_bits(self.lfsr, n)
        self.state = st.state
        return out
