"""Latency and gate-count benchmark for the private-match query.

Reports the same phase breakdown as the reference hardware measurements:
"XOR" (per-bit XOR arrays), "HD" (XOR plus Hamming-distance popcounts),
and "Full Query" (everything through the OR tree).  Phase times are
cumulative, so Full Query >= HD >= XOR by construction.

The published hardware numbers were taken with a real boolean-FHE
backend; the simulation backend here is orders of magnitude faster and
only the gate counts and phase structure are comparable.
"""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass

import numpy as np

from . import mpenc
from .circuits import width_for_count
from .hashing import DEFAULT_HASH_BITS, PerceptualHash

# Published reference rows (real boolean-FHE backend), for comparison only.
REFERENCE_ROWS = [
    {"system": "Laptop (12th Gen i5, 4 cores)", "xor_ms": 200.0, "hd_ms": 1290.0, "full_ms": 1300.0},
    {"system": "Laptop (12th Gen i5, 8 cores)", "xor_ms": 105.0, "hd_ms": 747.0, "full_ms": 773.0},
    {"system": "Laptop (12th Gen i5, 16 threads)", "xor_ms": 67.0, "hd_ms": 467.0, "full_ms": 472.0},
    {"system": "MacBook Pro (Apple M4, 10 cores)", "xor_ms": 59.0, "hd_ms": 421.0, "full_ms": 440.0},
    {"system": "Server (AMD EPYC 7B13, 56 cores)", "xor_ms": 26.0, "hd_ms": 134.0, "full_ms": 137.0},
]


@dataclass
class BenchReport:
    entries: int
    trials: int
    threads: int
    k: int
    xor_ms: float  # median over trials
    hd_ms: float
    full_ms: float
    gates: dict
    xor_phase_gates: dict
    hd_phase_gates: dict

    def as_dict(self) -> dict:
        return {
            "entries": self.entries,
            "trials": self.trials,
            "threads": self.threads,
            "k": self.k,
            "xor_ms": self.xor_ms,
            "hd_ms": self.hd_ms,
            "full_ms": self.full_ms,
            "gates": self.gates,
            "xor_phase_gates": self.xor_phase_gates,
            "hd_phase_gates": self.hd_phase_gates,
        }


def random_hash(rng: random.Random, k: int = DEFAULT_HASH_BITS) -> PerceptualHash:
    return PerceptualHash(np.array([rng.randint(0, 1) for _ in range(k)], dtype=np.uint8))


def run_bench(entries: int = 1000, trials: int = 3, threads: int = 1,
              k: int = DEFAULT_HASH_BITS, threshold: int = 8,
              seed: int = 0, mode: str = "or") -> BenchReport:
    """Time one encrypted query against a synthetic database."""
    rng = random.Random(seed)
    _, key = mpenc.setup(n=2, m=2, rng_seed=seed)
    backend = mpenc.SimulationBackend(key.public)

    db = [mpenc.encrypt_hash(backend, random_hash(rng, k)) for _ in range(entries)]
    q = mpenc.encrypt_hash(backend, random_hash(rng, k))
    t_enc = mpenc.encrypt_threshold(backend, threshold, width_for_count(k))

    xor_times, hd_times, full_times = [], [], []
    telemetry = None
    for _ in range(trials):
        _, telemetry = mpenc.evaluate_query_instrumented(
            db, q, t_enc, mode=mode, workers=threads)
        xor_times.append(telemetry.timings.xor_ms)
        hd_times.append(telemetry.timings.hd_ms)
        full_times.append(telemetry.timings.full_ms)

    return BenchReport(
        entries=entries,
        trials=trials,
        threads=threads,
        k=k,
        xor_ms=statistics.median(xor_times),
        hd_ms=statistics.median(hd_times),
        full_ms=statistics.median(full_times),
        gates=telemetry.gates.as_dict(),
        xor_phase_gates=telemetry.xor_phase_gates.as_dict(),
        hd_phase_gates=telemetry.hd_phase_gates.as_dict(),
    )


def format_report(report: BenchReport) -> str:
    lines = [
        f"entries={report.entries} trials={report.trials} threads={report.threads} k={report.k}",
        "",
        f"{'system':<42} {'XOR':>10} {'HD':>10} {'Full Query':>12}",
        f"{'this machine (simulation backend)':<42} "
        f"{report.xor_ms:>8.1f}ms {report.hd_ms:>8.1f}ms {report.full_ms:>10.1f}ms",
    ]
    for row in REFERENCE_ROWS:
        lines.append(
            f"{row['system'] + ' [reported, real FHE]':<42} "
            f"{row['xor_ms']:>8.1f}ms {row['hd_ms']:>8.1f}ms {row['full_ms']:>10.1f}ms"
        )
    lines += [
        "",
        f"XOR-phase gates: {report.xor_phase_gates}",
        f"HD-phase gates:  {report.hd_phase_gates}",
        f"total gates:     {report.gates}",
    ]
    return "\n".join(lines)
