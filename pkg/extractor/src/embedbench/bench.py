"""Robustness benchmark: original vs. transformed embeddings.

Hashing goes through the registry tooling's command line (`provreg
fit-pca` / `provreg hash`) so this package only touches the other
component through its public file formats and CLI.  The report gives the
per-variant bit accuracy (fraction of hash bits preserved by a
transform) and a 97-point ROC over the match-score threshold tau, with
the exact Binomial(k, 1/2) false-positive tail in the last CSV column.
"""

from __future__ import annotations

import csv
import math
import os
import shutil
import subprocess
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

HASH_BITS = 96


def _provreg_cmd() -> str:
    exe = os.environ.get("EMBEDBENCH_PROVREG") or shutil.which("provreg")
    if not exe:
        raise RuntimeError("provreg CLI not found on PATH; install the registry package")
    return exe


def _run(args: list[str]) -> None:
    proc = subprocess.run(args, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"{' '.join(args)} failed: {proc.stderr.strip()}")


def fit_model(embeddings_path, model_path, dim: int = HASH_BITS) -> None:
    """Fit the whitening model through the registry CLI."""
    _run([_provreg_cmd(), "fit-pca", "--embeddings", str(embeddings_path),
          "--out", str(model_path), "--dim", str(dim)])


def hash_embeddings(model_path, embeddings_path, work_dir) -> dict[str, str]:
    """Hash a PHEM file through the registry CLI; returns {id: hex hash}."""
    out = Path(work_dir) / (Path(embeddings_path).name + ".hashes.csv")
    _run([_provreg_cmd(), "hash", "--model", str(model_path),
          "--embeddings", str(embeddings_path), "--out", str(out)])
    with open(out, newline="") as f:
        return {row["id"]: row["hash"] for row in csv.DictReader(f)}


def _bits(hex_hash: str, k: int = HASH_BITS) -> int:
    return int(hex_hash, 16)


def match_score(a_hex: str, b_hex: str, k: int = HASH_BITS) -> int:
    """Matching bits between two hex-encoded hashes."""
    return k - bin(_bits(a_hex) ^ _bits(b_hex)).count("1")


def bit_accuracy(pairs: list[tuple[str, str]], k: int = HASH_BITS) -> float:
    """Mean fraction of agreeing bits over hex-hash pairs."""
    if not pairs:
        raise ValueError("no pairs")
    return sum(match_score(a, b, k) for a, b in pairs) / (k * len(pairs))


def exact_fpr_numerator(tau: int, k: int = HASH_BITS) -> int:
    """Count of the 2^k equally likely hash pairs scoring >= tau."""
    return sum(math.comb(k, i) for i in range(tau, k + 1))


def exact_fpr(tau: int, k: int = HASH_BITS) -> Fraction:
    """P[match score >= tau] for independent hashes: Binomial(k, 1/2) tail."""
    return Fraction(exact_fpr_numerator(tau, k), 2**k)


@dataclass(frozen=True)
class BenchReport:
    variant: str
    pairs: int
    accuracy: float
    tpr_at: dict[int, float]  # tau -> empirical true-positive rate

    def line(self) -> str:
        marks = "  ".join(f"TPR@{t}={v:.3f}" for t, v in sorted(self.tpr_at.items()))
        return (f"{self.variant:12s} pairs={self.pairs:5d} "
                f"bit-accuracy={100 * self.accuracy:6.2f}%  {marks}")


def run_bench(original: dict[str, str], transformed: dict[str, str],
              variant: str = "none", k: int = HASH_BITS,
              taus: tuple[int, ...] = (80, 88)) -> BenchReport:
    """Pair hashes by id and measure how well bits survive the transform."""
    common = [i for i in original if i in transformed]
    pairs = [(original[i], transformed[i]) for i in common]
    if not pairs:
        raise ValueError("no common ids between the two embedding files")
    scores = [match_score(a, b, k) for a, b in pairs]
    tpr_at = {t: sum(s >= t for s in scores) / len(scores) for t in taus}
    return BenchReport(variant=variant, pairs=len(pairs),
                       accuracy=sum(scores) / (k * len(pairs)), tpr_at=tpr_at)


def write_roc_csv(path, pairs: list[tuple[str, str]], k: int = HASH_BITS) -> None:
    """97-point ROC CSV: tau, empirical TPR, exact FPR (float and num/2^k)."""
    scores = sorted(match_score(a, b, k) for a, b in pairs)
    n = len(scores)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["tau", "tpr", "fpr", "fpr_exact"])
        import bisect
        for tau in range(k + 1):
            tpr = (n - bisect.bisect_left(scores, tau)) / n
            num = exact_fpr_numerator(tau, k)
            # Numerator kept unreduced so the column always reads num/2^k.
            w.writerow([tau, f"{tpr:.6g}", f"{num / 2**k:.6g}", f"{num}/2^{k}"])
