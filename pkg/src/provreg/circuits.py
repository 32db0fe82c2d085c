"""Boolean circuits for the private match, defined over an abstract
encrypted-bit backend.

Everything the evaluator does to decide "is a close hash present?" is
expressed as XOR/AND/OR/NOT gates on opaque encrypted bits: a per-bit XOR
array, a layered popcount adder tree, a borrow-chain comparator against an
encrypted threshold, and OR/SUM reductions across database entries.  The
same circuit definitions run against a cleartext simulation backend (for
exhaustive oracle testing) or a real boolean-FHE backend.
"""

from __future__ import annotations

import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass

from .errors import (
    BackendMismatch,
    EmptyInput,
    EmptyVector,
    LengthMismatch,
    WidthOverflow,
)


@dataclass
class GateCounts:
    """Telemetry: number of gates evaluated per type."""

    xor: int = 0
    and_: int = 0
    or_: int = 0
    not_: int = 0

    @property
    def total(self) -> int:
        return self.xor + self.and_ + self.or_ + self.not_

    def snapshot(self) -> "GateCounts":
        return GateCounts(self.xor, self.and_, self.or_, self.not_)

    def __sub__(self, other: "GateCounts") -> "GateCounts":
        return GateCounts(
            self.xor - other.xor,
            self.and_ - other.and_,
            self.or_ - other.or_,
            self.not_ - other.not_,
        )

    def as_dict(self) -> dict:
        return {"xor": self.xor, "and": self.and_, "or": self.or_, "not": self.not_}


class BitBackend(ABC):
    """Gate evaluator over opaque encrypted bits.

    Implementations must be safe to call from multiple threads; results
    must not depend on evaluation order of independent gates.
    """

    def __init__(self):
        self.counts = GateCounts()
        self._lock = threading.Lock()

    def _tally(self, kind: str):
        with self._lock:
            setattr(self.counts, kind, getattr(self.counts, kind) + 1)

    def reset_counts(self):
        with self._lock:
            self.counts = GateCounts()

    @abstractmethod
    def xor(self, a, b): ...

    @abstractmethod
    def and_(self, a, b): ...

    @abstractmethod
    def or_(self, a, b): ...

    @abstractmethod
    def not_(self, a): ...

    @abstractmethod
    def constant(self, value: bool): ...


class CleartextBackend(BitBackend):
    """Simulation backend: "encrypted" bits are plain bools.

    Exists so every circuit can be checked exhaustively against its
    plaintext oracle; carries no key material.
    """

    def xor(self, a, b):
        self._tally("xor")
        return bool(a) ^ bool(b)

    def and_(self, a, b):
        self._tally("and_")
        return bool(a) and bool(b)

    def or_(self, a, b):
        self._tally("or_")
        return bool(a) or bool(b)

    def not_(self, a):
        self._tally("not_")
        return not a

    def constant(self, value: bool):
        return bool(value)

    def decrypt_bit(self, bit) -> bool:
        return bool(bit)


@dataclass(frozen=True)
class EncBitVector:
    """Fixed-length vector of encrypted bits from one backend."""

    bits: tuple
    backend: BitBackend

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def encrypt_cleartext(cls, backend: CleartextBackend, bits) -> "EncBitVector":
        return cls(tuple(backend.constant(bool(b)) for b in bits), backend)


@dataclass(frozen=True)
class EncUInt:
    """Unsigned integer as a little-endian list of encrypted bits."""

    bits: tuple  # bits[0] is the least significant
    backend: BitBackend

    @property
    def width(self) -> int:
        return len(self.bits)

    def zero_extend(self, width: int) -> "EncUInt":
        if width < self.width:
            raise WidthOverflow(f"cannot narrow {self.width} bits to {width}")
        zero = self.backend.constant(False)
        return EncUInt(self.bits + (zero,) * (width - self.width), self.backend)

    @classmethod
    def encrypt_cleartext(cls, backend: CleartextBackend, value: int, width: int) -> "EncUInt":
        if value < 0 or value >= (1 << width):
            raise WidthOverflow(f"value {value} does not fit in {width} bits")
        return cls(
            tuple(backend.constant(bool((value >> i) & 1)) for i in range(width)),
            backend,
        )


def decrypt_uint(backend: CleartextBackend, v: EncUInt) -> int:
    """Read back a simulated encrypted integer (cleartext backend only)."""
    return sum(int(backend.decrypt_bit(b)) << i for i, b in enumerate(v.bits))


def width_for_count(n: int) -> int:
    """Bits needed to represent counts 0..n."""
    return max(1, math.ceil(math.log2(n + 1)))


def _check_same_backend(a, b):
    if a.backend is not b.backend:
        raise BackendMismatch("operands come from different backend instances")


def xor_array(a: EncBitVector, b: EncBitVector) -> EncBitVector:
    """Elementwise XOR of two equal-length bit vectors; exactly len(a)
    XOR gates."""
    if len(a) != len(b):
        raise LengthMismatch(f"vector lengths differ: {len(a)} != {len(b)}")
    _check_same_backend(a, b)
    be = a.backend
    return EncBitVector(tuple(be.xor(x, y) for x, y in zip(a.bits, b.bits)), be)


def _full_adder(be: BitBackend, a, b, cin):
    """One-bit addition with carry: returns (sum, carry_out)."""
    axb = be.xor(a, b)
    s = be.xor(axb, cin)
    cout = be.or_(be.and_(a, b), be.and_(axb, cin))
    return s, cout


def _ripple_add(x: EncUInt, y: EncUInt) -> EncUInt:
    """Add two equal-width numbers into a (width+1)-bit result."""
    if x.width != y.width:
        raise WidthOverflow("ripple_add requires equal widths")
    be = x.backend
    carry = be.constant(False)
    out = []
    for a, b in zip(x.bits, y.bits):
        s, carry = _full_adder(be, a, b, carry)
        out.append(s)
    out.append(carry)
    return EncUInt(tuple(out), be)


@dataclass(frozen=True)
class PopcountResult:
    value: EncUInt
    addition_layers: int


def popcount_tree(v: EncBitVector) -> EncUInt:
    return popcount_tree_detail(v).value


def popcount_tree_detail(v: EncBitVector) -> PopcountResult:
    """Count the 1-bits of a vector with a layered adder tree.

    Layer 1 compresses triples of input bits into 2-bit sums with single
    full adders (a pair uses a half adder, a lone leftover is
    zero-extended).  Every later layer pairwise ripple-adds equal-width
    partial sums into one-bit-wider sums; an odd leftover is zero-extended
    and promoted.  For 96 inputs this gives exactly 6 addition layers and
    a 7-bit result.
    """
    if len(v) == 0:
        raise EmptyVector("cannot popcount an empty vector")
    be = v.backend
    zero = be.constant(False)
    if len(v) == 1:
        return PopcountResult(EncUInt((v.bits[0],), be), 0)

    # Layer 1: 3:2 compression of raw bits.
    sums: list[EncUInt] = []
    bits = v.bits
    for i in range(0, len(bits) - len(bits) % 3, 3):
        s, c = _full_adder(be, bits[i], bits[i + 1], bits[i + 2])
        sums.append(EncUInt((s, c), be))
    rem = len(bits) % 3
    if rem == 2:
        a, b = bits[-2], bits[-1]
        sums.append(EncUInt((be.xor(a, b), be.and_(a, b)), be))
    elif rem == 1:
        sums.append(EncUInt((bits[-1], zero), be))
    layers = 1

    # Pairwise addition layers.
    while len(sums) > 1:
        nxt = []
        for i in range(0, len(sums) - 1, 2):
            nxt.append(_ripple_add(sums[i], sums[i + 1]))
        if len(sums) % 2:
            nxt.append(sums[-1].zero_extend(sums[0].width + 1))
        sums = nxt
        layers += 1
    return PopcountResult(sums[0], layers)


def leq_threshold(count: EncUInt, threshold: EncUInt) -> object:
    """Encrypted bit that decrypts to 1 iff value(count) <= value(threshold).

    Borrow chain of the subtraction threshold - count; a final borrow
    means count exceeded the threshold.
    """
    w = max(count.width, threshold.width)
    count = count.zero_extend(w)
    threshold = threshold.zero_extend(w)
    _check_same_backend(count, threshold)
    be = count.backend
    borrow = be.constant(False)
    for t, c in zip(threshold.bits, count.bits):
        # borrow_out = (~t & c) | (~(t ^ c) & borrow_in)
        diff = be.xor(t, c)
        borrow = be.or_(be.and_(be.not_(t), c), be.and_(be.not_(diff), borrow))
    return be.not_(borrow)


def or_tree(backend: BitBackend, bits: list) -> object:
    """Balanced OR reduction over encrypted bits; depth ceil(log2(n))."""
    if not bits:
        raise EmptyInput("or_tree needs at least one bit")
    items = list(bits)
    while len(items) > 1:
        nxt = [backend.or_(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def sum_tree(backend: BitBackend, bits: list) -> EncUInt:
    """Count the 1-bits among per-entry match bits; width ceil(log2(n+1))."""
    if not bits:
        raise EmptyInput("sum_tree needs at least one bit")
    return popcount_tree(EncBitVector(tuple(bits), backend))


def or_tree_depth(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


def match_circuit(query: EncBitVector, entry: EncBitVector, threshold: EncUInt) -> object:
    """Encrypted bit: 1 iff the Hamming distance between query and entry
    is at most the (encrypted) threshold."""
    return leq_threshold(popcount_tree(xor_array(query, entry)), threshold)
