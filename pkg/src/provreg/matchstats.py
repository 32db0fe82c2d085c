"""Exact binomial statistics for the bit-match test.

For two unrelated images the hash bits are modeled as i.i.d. fair coin
flips, so the number of matching bits follows Binomial(k, 0.5).  False
positive rates at high thresholds (down to 2^-96) underflow any float
accumulation, so everything here is exact integer arithmetic over the
denominator 2^k.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import EmptyInput, OutOfRange, Unachievable
from .hashing import PerceptualHash, match_score


@dataclass(frozen=True)
class MatchThreshold:
    """Minimum number of matching bits for two hashes to count as the
    same image.  ``distance_form`` is the equivalent maximum Hamming
    distance."""

    tau: int
    k: int

    def __post_init__(self):
        if not 0 <= self.tau <= self.k:
            raise OutOfRange(f"tau={self.tau} not in [0, {self.k}]")

    @property
    def distance_form(self) -> int:
        return self.k - self.tau

    @classmethod
    def from_distance(cls, t: int, k: int) -> "MatchThreshold":
        return cls(tau=k - t, k=k)


@dataclass(frozen=True)
class ExactProbability:
    """A probability numerator / 2^k held exactly."""

    numerator: int
    k: int

    def __post_init__(self):
        if self.numerator < 0 or self.numerator > self.denominator:
            raise OutOfRange("numerator outside [0, 2^k]")

    @property
    def denominator(self) -> int:
        return 1 << self.k

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def as_float(self) -> float:
        if self.numerator == 0:
            return 0.0
        # Fraction -> float is correctly rounded even when 2^k overflows.
        return float(self.as_fraction())

    def __str__(self) -> str:
        return f"{self.numerator}/2^{self.k}"


def fpr(tau: int, k: int) -> ExactProbability:
    """Exact tail probability P(matching bits >= tau) for unrelated hashes."""
    if not 0 <= tau <= k:
        raise OutOfRange(f"tau={tau} not in [0, {k}]")
    num = sum(math.comb(k, i) for i in range(tau, k + 1))
    return ExactProbability(numerator=num, k=k)


def threshold_for_fpr(target: float, k: int) -> MatchThreshold:
    """Smallest tau whose exact FPR does not exceed ``target``."""
    if not 0 < target <= 1:
        raise OutOfRange(f"target={target} not in (0, 1]")
    goal = Fraction(target)
    if goal < Fraction(1, 1 << k):
        raise Unachievable(f"target {target} below 2^-{k}")
    # Tail is monotone in tau; bisect for the smallest achieving tau.
    lo, hi = 0, k
    while lo < hi:
        mid = (lo + hi) // 2
        if fpr(mid, k).as_fraction() <= goal:
            hi = mid
        else:
            lo = mid + 1
    return MatchThreshold(tau=lo, k=k)


def tpr_empirical(pairs: list[tuple[PerceptualHash, PerceptualHash]], tau: int) -> float:
    """Fraction of hash pairs whose match score reaches tau."""
    if not pairs:
        raise EmptyInput("no hash pairs")
    hits = sum(1 for a, b in pairs if match_score(a, b) >= tau)
    return hits / len(pairs)


def bit_accuracy(pairs: list[tuple[PerceptualHash, PerceptualHash]]) -> float:
    """Mean fraction of agreeing bits over the pairs."""
    if not pairs:
        raise EmptyInput("no hash pairs")
    return sum(match_score(a, b) / a.k for a, b in pairs) / len(pairs)


def roc_curve(
    pairs: list[tuple[PerceptualHash, PerceptualHash]], k: int
) -> list[tuple[int, float, ExactProbability]]:
    """(tau, empirical TPR, exact FPR) for every tau in 0..k.

    TPR comes from the supplied transformed/original pairs; FPR from the
    exact binomial tail, since it is far too small to measure empirically
    at useful thresholds.
    """
    if not pairs:
        raise EmptyInput("no hash pairs")
    scores = sorted(match_score(a, b) for a, b in pairs)
    n = len(scores)
    out = []
    import bisect
    for tau in range(k + 1):
        hits = n - bisect.bisect_left(scores, tau)
        out.append((tau, hits / n, fpr(tau, k)))
    return out


def write_roc_csv(path, curve: list[tuple[int, float, ExactProbability]]) -> None:
    """Emit the ROC report: decimal FPR to 6 significant digits plus the
    exact num/2^k form."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["tau", "tpr", "fpr", "fpr_exact"])
        for tau, tpr, p in curve:
            w.writerow([tau, repr(tpr), f"{p.as_float():.6g}", str(p)])
