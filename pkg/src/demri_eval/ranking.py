"""Leaderboard construction: per-metric competition ranks summed over nine metrics."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .metrics import RANKED_METRICS, RANKED_NAMES, SubmissionMetrics, fmt_float

LEADERBOARD_SCHEMA = "demri-eval-leaderboard/1"
TIE_BREAK = ("myo_dice", "infarct_dice", "pmo_dice")


def rank_metric(values: Sequence[float], direction: str = "higher_better") -> list[int]:
    """Competition ranks (1, 1, 3, ...): the best value is 1, ties share the lowest rank."""
    if direction not in ("higher_better", "lower_better"):
        raise ValueError(f"unknown direction {direction!r}")
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or len(v) == 0:
        raise ValueError("need a non-empty 1D sequence of values")
    key = -v if direction == "higher_better" else v
    return [int(np.count_nonzero(key < k)) + 1 for k in key]


@dataclass(frozen=True)
class LeaderboardEntry:
    submission_id: str
    values: dict
    subranks: dict
    rank_sum: int
    position: int


@dataclass(frozen=True)
class Leaderboard:
    entries: tuple

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def order(self) -> list[str]:
        return [e.submission_id for e in self.entries]

    def to_rows(self) -> list[dict]:
        rows = []
        for e in self.entries:
            row = {"position": e.position, "submission_id": e.submission_id}
            row.update({name: fmt_float(e.values[name]) for name in RANKED_NAMES})
            row.update({f"rank_{name}": e.subranks[name] for name in RANKED_NAMES})
            row["rank_sum"] = e.rank_sum
            rows.append(row)
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.to_rows()
        columns = ["position", "submission_id", *RANKED_NAMES, *(f"rank_{n}" for n in RANKED_NAMES), "rank_sum"]
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in columns})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"schema": LEADERBOARD_SCHEMA, "entries": self.to_rows()}, indent=2) + "\n"


def build_leaderboard(metrics: Sequence[SubmissionMetrics]) -> Leaderboard:
    """Rank submissions by the sum of their nine per-metric ranks.

    Equal rank sums are separated by myocardium, infarct, then PMO Dice;
    submissions equal on all of those share a position.
    """
    if not metrics:
        raise ValueError("need at least one submission")
    subranks = {
        name: rank_metric([m.mean[name] for m in metrics], direction) for name, direction in RANKED_METRICS
    }
    rows = []
    for i, m in enumerate(metrics):
        ranks = {name: subranks[name][i] for name in RANKED_NAMES}
        total = sum(ranks.values())
        key = (total, *(-m.mean[k] for k in TIE_BREAK))
        rows.append((key, i, m, ranks, total))
    rows.sort(key=lambda r: (r[0], r[1]))
    entries = []
    for pos, (key, _, m, ranks, total) in enumerate(rows):
        position = pos + 1
        if entries and rows[pos - 1][0] == key:
            position = entries[-1].position
        entries.append(LeaderboardEntry(m.submission_id, dict(m.mean), ranks, total, position))
    return Leaderboard(tuple(entries))
