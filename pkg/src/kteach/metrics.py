"""Evaluation utilities: Wilcoxon signed-rank comparison of paired conditions,
paired-duration differentials, and per-session result records."""

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import DegenerateError, InputError, InsufficientDataError

# One-tailed critical values W_c for the signed-rank statistic W = min(W+, W-):
# reject when W <= W_c. Largest w with P(W <= w) <= alpha under the exact null
# distribution (signs equiprobable over ranks 1..n). n = 6..25. At alpha = 0.01
# no critical value exists below n = 7.
CRITICAL_ONE_TAILED = {
    0.05: {6: 2, 7: 3, 8: 5, 9: 8, 10: 10, 11: 13, 12: 17, 13: 21, 14: 25,
           15: 30, 16: 35, 17: 41, 18: 47, 19: 53, 20: 60, 21: 67, 22: 75,
           23: 83, 24: 91, 25: 100},
    0.01: {7: 0, 8: 1, 9: 3, 10: 5, 11: 7, 12: 9, 13: 12, 14: 15, 15: 19,
           16: 23, 17: 27, 18: 32, 19: 37, 20: 43, 21: 49, 22: 55, 23: 62,
           24: 69, 25: 76},
}


@dataclass(frozen=True)
class PairedSample:
    """One subject measured under both conditions."""

    subject_id: str
    value_c1: float
    value_c2: float

    def __post_init__(self):
        if not (math.isfinite(self.value_c1) and math.isfinite(self.value_c2)):
            raise InputError(f"subject {self.subject_id!r}: values must be finite")


@dataclass(frozen=True)
class WilcoxonResult:
    w: float
    w_critical: float
    reject: bool
    n: int
    w_plus: float
    w_minus: float


def _average_ranks(values: list[float]) -> list[float]:
    """Ranks 1..n of |values|, ties sharing the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # positions are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def signed_rank_statistic(differences: list[float]) -> tuple[float, float, float, int]:
    """(W, W+, W-, n) over nonzero differences; zero differences are dropped
    and tied magnitudes get average ranks."""
    nonzero = [d for d in differences if d != 0.0]
    if not nonzero:
        raise DegenerateError("all paired differences are zero")
    ranks = _average_ranks([abs(d) for d in nonzero])
    w_plus = sum(r for d, r in zip(nonzero, ranks) if d > 0)
    w_minus = sum(r for d, r in zip(nonzero, ranks) if d < 0)
    return min(w_plus, w_minus), w_plus, w_minus, len(nonzero)


def wilcoxon_signed_rank(samples: list[PairedSample], alpha: float = 0.05,
                         tail: str = "one_tailed") -> WilcoxonResult:
    """One-tailed Wilcoxon signed-rank decision via the critical-value table.

    W = min(W+, W-) over signed ranks of the nonzero c2 - c1 differences.
    The null hypothesis is rejected when W <= W_c(n, alpha).

    Raises:
        DegenerateError: every difference is zero.
        InsufficientDataError: retained n outside the table range, or no
            critical value exists for (n, alpha).
    """
    if tail != "one_tailed":
        raise InputError(f"unsupported tail {tail!r}")
    table = CRITICAL_ONE_TAILED.get(alpha)
    if table is None:
        raise InputError(f"alpha must be one of {sorted(CRITICAL_ONE_TAILED)}, got {alpha}")
    if len(samples) < 6:
        raise InsufficientDataError(f"need at least 6 paired samples, got {len(samples)}")
    diffs = [s.value_c2 - s.value_c1 for s in samples]
    w, w_plus, w_minus, n = signed_rank_statistic(diffs)
    if n not in table:
        covered = f"{min(table)}..{max(table)}"
        raise InsufficientDataError(
            f"{n} nonzero differences outside the critical-value table range {covered} "
            f"at alpha={alpha}")
    w_critical = table[n]
    return WilcoxonResult(w=w, w_critical=float(w_critical), reject=w <= w_critical,
                          n=n, w_plus=w_plus, w_minus=w_minus)


@dataclass(frozen=True)
class DurationOverhead:
    mean_diff: float       # seconds, mean of c2 - c1
    mean_relative: float   # fraction, mean of (c2 - c1) / c1


def duration_overhead(samples: list[PairedSample]) -> DurationOverhead:
    """Mean absolute and relative session-duration overhead of C2 over C1."""
    if not samples:
        raise InputError("need at least one paired sample")
    for s in samples:
        if s.value_c1 <= 0:
            raise InputError(f"subject {s.subject_id!r}: c1 duration must be positive")
    diffs = [s.value_c2 - s.value_c1 for s in samples]
    rels = [(s.value_c2 - s.value_c1) / s.value_c1 for s in samples]
    return DurationOverhead(mean_diff=sum(diffs) / len(diffs),
                            mean_relative=sum(rels) / len(rels))


def session_report(trajectory, playback_report, scene, *,
                   subject: str | None = None, condition: str | None = None) -> dict:
    """One result record for a completed teach-and-replay session."""
    from .scene import count_stacked  # deferred: metrics stays import-light

    if trajectory is None or not trajectory.states:
        raise InputError("session report requires a finalized trajectory")
    record = {
        "session_id": trajectory.session_id,
        "duration_s": trajectory.duration_ms / 1000.0,
        "states": len(trajectory.states),
        "cubes_stacked": count_stacked(scene) if scene is not None else None,
    }
    if playback_report is not None:
        record["playback_duration_s"] = playback_report.duration_s
        record["playback_faults"] = playback_report.faults
    if subject is not None:
        record["subject"] = subject
    if condition is not None:
        record["condition"] = condition
    return record


def append_report(log_path, record: dict) -> None:
    path = Path(log_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")


def read_report_log(log_path) -> list[dict]:
    path = Path(log_path)
    if not path.exists():
        raise InputError(f"results log {path} does not exist")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    if not records:
        raise InputError(f"results log {path} is empty")
    return records
