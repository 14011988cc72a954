"""Trajectory files: JSON Lines with a header, gapless state records, and a
count-carrying footer.

Line 1:   {"session_id", "robot", "dof", "joint_names", "rate_hz"}
Body:     {"seq", "timestamp_ms", "q", "gripper"}  (seq gapless from 0)
Last line: {"count": N, "finalized": true}

A file without a footer is unfinalized: the writer crashed or the session was
aborted. Such files load only in salvage mode.
"""

import json
import logging
import math
from dataclasses import dataclass, asdict
from pathlib import Path

from .errors import CorruptFileError, SchemaError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrajectoryHeader:
    session_id: str
    robot: str
    dof: int
    joint_names: tuple[str, ...]
    rate_hz: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["joint_names"] = list(self.joint_names)
        return d


@dataclass(frozen=True)
class TrajRecord:
    seq: int
    timestamp_ms: int
    q: tuple[float, ...]
    gripper: str


class TrajectoryWriter:
    """Append-only writer. Call finalize() to stamp the footer; closing
    without it leaves a salvageable, unfinalized file."""

    def __init__(self, path, header: TrajectoryHeader):
        self.path = Path(path)
        self.header = header
        self._count = 0
        self._finalized = False
        self._fh = open(self.path, "w", encoding="utf-8")
        self._fh.write(json.dumps(header.to_json()) + "\n")

    def append(self, seq: int, timestamp_ms: int, q, gripper: str) -> None:
        if self._finalized:
            raise SchemaError("cannot append to a finalized trajectory file")
        if seq != self._count:
            raise SchemaError(f"gap in seq numbers: expected {self._count}, got {seq}")
        q = [float(v) for v in q]
        if len(q) != self.header.dof:
            raise SchemaError(f"record q length {len(q)} != header dof {self.header.dof}")
        if not all(math.isfinite(v) for v in q):
            raise SchemaError("record q contains non-finite values")
        self._fh.write(json.dumps({"seq": seq, "timestamp_ms": int(timestamp_ms),
                                   "q": q, "gripper": gripper}) + "\n")
        self._count += 1

    @property
    def count(self) -> int:
        return self._count

    def finalize(self) -> None:
        if not self._finalized:
            self._fh.write(json.dumps({"count": self._count, "finalized": True}) + "\n")
            self._finalized = True
        self.close()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            self._fh.close()
        if not self._finalized:
            logger.warning("trajectory file %s closed without footer (unfinalized)", self.path)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        # footer only on a clean exit; errors leave the file salvageable
        if exc_type is None:
            self.finalize()
        else:
            self.close()


def _parse_header(line: str, path) -> TrajectoryHeader:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptFileError(f"{path}: header line is not valid JSON: {exc}") from exc
    try:
        return TrajectoryHeader(session_id=str(obj["session_id"]), robot=str(obj["robot"]),
                                dof=int(obj["dof"]),
                                joint_names=tuple(obj["joint_names"]),
                                rate_hz=float(obj["rate_hz"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: bad header: {exc}") from exc


def read_trajectory_file(path, salvage: bool = False
                         ) -> tuple[TrajectoryHeader, list[TrajRecord], bool]:
    """Parse a trajectory file, cross-checking the footer against the body.

    Returns (header, records, finalized).

    Raises:
        CorruptFileError: missing/mismatched footer without salvage, or a
            body line that is not valid JSON.
        SchemaError: structurally valid file whose records violate the
            header (q length, seq gaps, bad gripper).
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise CorruptFileError(f"{path}: empty file")

    header = _parse_header(lines[0], path)

    footer = None
    body_lines = lines[1:]
    if body_lines:
        try:
            last = json.loads(body_lines[-1])
        except json.JSONDecodeError as exc:
            raise CorruptFileError(f"{path}: trailing line is not valid JSON: {exc}") from exc
        if isinstance(last, dict) and "finalized" in last:
            footer = last
            body_lines = body_lines[:-1]

    records = []
    for i, line in enumerate(body_lines):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptFileError(f"{path}: body line {i + 2} is not valid JSON: {exc}") from exc
        try:
            rec = TrajRecord(seq=int(obj["seq"]), timestamp_ms=int(obj["timestamp_ms"]),
                             q=tuple(float(v) for v in obj["q"]), gripper=str(obj["gripper"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: bad record on line {i + 2}: {exc}") from exc
        if len(rec.q) != header.dof:
            raise SchemaError(f"{path}: record {rec.seq} has q length {len(rec.q)}, "
                              f"header dof {header.dof}")
        if rec.seq != i:
            raise SchemaError(f"{path}: seq gap: expected {i}, got {rec.seq}")
        if rec.gripper not in ("open", "closed"):
            raise SchemaError(f"{path}: record {rec.seq} has unknown gripper {rec.gripper!r}")
        records.append(rec)

    if footer is None:
        if not salvage:
            raise CorruptFileError(f"{path}: no footer (unfinalized); pass salvage to load anyway")
        logger.warning("salvage-loading unfinalized trajectory file %s (%d records)",
                       path, len(records))
        return header, records, False

    if int(footer.get("count", -1)) != len(records):
        raise CorruptFileError(f"{path}: footer count {footer.get('count')} != "
                               f"body record count {len(records)}")
    return header, records, bool(footer.get("finalized", False))
