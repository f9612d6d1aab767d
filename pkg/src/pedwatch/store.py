"""Durable report store: one append-only line-delimited JSON file, fsynced per
append, with an in-memory key index rebuilt on open.

Single writer (the reporting pipeline), many concurrent readers; readers only
ever see fully appended lines.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Dict, List, Optional, Tuple


class DuplicateReportError(ValueError):
    """A report for this (intersection, hour) is already stored."""


Key = Tuple[str, str]  # (intersection_id, hour_start RFC3339)


class ReportStore:
    def __init__(self, path: os.PathLike | str):
        self.path = Path(path)
        self._records: Dict[Key, dict] = {}
        if self.path.exists():
            self._replay()

    def _replay(self) -> None:
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._records[self._key(record)] = record

    @staticmethod
    def _key(record: dict) -> Key:
        return (record["intersection_id"], record["hour_start"])

    def __len__(self) -> int:
        return len(self._records)

    def append(self, record: dict) -> Key:
        """Durably append one report record; duplicate keys are rejected."""
        key = self._key(record)
        if key in self._records:
            raise DuplicateReportError(f"report already stored for {key}")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        line = json.dumps(record, sort_keys=True, separators=(",", ":"))
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._records[key] = record
        return key

    def get(self, intersection_id: str, hour_start: str) -> Optional[dict]:
        return self._records.get((intersection_id, hour_start))

    def query(
        self,
        intersection_id: Optional[str] = None,
        start: Optional[str] = None,
        end: Optional[str] = None,
    ) -> List[dict]:
        """Records with hour_start in [start, end], key-ordered.

        RFC3339 strings compare lexicographically, so the range check is a
        plain string comparison.
        """
        if start is not None and end is not None and start > end:
            raise ValueError(f"inverted range {start} > {end}")
        out = []
        for (iid, hour_start), record in sorted(self._records.items()):
            if intersection_id is not None and iid != intersection_id:
                continue
            if start is not None and hour_start < start:
                continue
            if end is not None and hour_start > end:
                continue
            out.append(record)
        return out

    def intersections(self) -> List[str]:
        return sorted({iid for iid, _ in self._records})
