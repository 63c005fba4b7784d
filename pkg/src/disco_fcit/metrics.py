"""Continual-learning metrics over a lower-triangular stage x task accuracy table."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence


@dataclass
class ResultsMatrix:
    """Row ``i`` holds accuracies (percent) for the tasks seen through stage ``i``.

    ``tasks`` lists column names in order of first appearance; row ``i`` has
    one value per task seen so far, so rows only ever grow.
    """

    tasks: list[str] = field(default_factory=list)
    rows: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        width = 0
        for r in self.rows:
            if len(r) < width:
                raise ValueError("rows may not shrink")
            width = len(r)
            for v in r:
                if not (0.0 <= v <= 100.0) or math.isnan(v):
                    raise ValueError(f"accuracy {v} outside [0, 100]")
        if width > len(self.tasks) and self.tasks:
            raise ValueError("more columns than task names")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], tasks: Sequence[str] = ()) -> "ResultsMatrix":
        rows = [list(map(float, r)) for r in rows]
        tasks = list(tasks) or [f"task{j}" for j in range(max(len(r) for r in rows))]
        return cls(tasks, rows)

    def append(self, row: Sequence[float], new_tasks: Sequence[str] = ()) -> None:
        self.tasks.extend(new_tasks)
        if self.rows and len(row) < len(self.rows[-1]):
            raise ValueError("rows may not shrink")
        if len(row) > len(self.tasks):
            raise ValueError("row wider than known tasks")
        self.rows.append([float(v) for v in row])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stage"] + self.tasks)
            for i, r in enumerate(self.rows):
                w.writerow([i] + [repr(v) for v in r] + [""] * (len(self.tasks) - len(r)))

    @classmethod
    def from_csv(cls, path) -> "ResultsMatrix":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in line[1:] if v != ""] for line in reader]
        return cls(header[1:], rows)


def last_metric(m: ResultsMatrix) -> float:
    if not m.rows:
        raise ValueError("empty results matrix")
    final = m.rows[-1]
    return sum(final) / len(final)


def avg_metric(m: ResultsMatrix) -> float:
    if not m.rows:
        raise ValueError("empty results matrix")
    return sum(sum(r) / len(r) for r in m.rows) / len(m.rows)


def forgetting(m: ResultsMatrix) -> dict[str, float]:
    """Per task: best accuracy over stages minus final accuracy."""
    if not m.rows:
        raise ValueError("empty results matrix")
    final = m.rows[-1]
    out = {}
    for j, name in enumerate(m.tasks[:len(final)]):
        history = [r[j] for r in m.rows if len(r) > j]
        out[name] = max(history) - final[j]
    return out


def mean_forgetting(m: ResultsMatrix) -> float:
    """Average drop over the tasks learned before the final stage."""
    drops = forgetting(m)
    earlier = m.tasks[:len(m.rows[-2])] if len(m.rows) > 1 else []
    if not earlier:
        return 0.0
    return sum(drops[t] for t in earlier) / len(earlier)
