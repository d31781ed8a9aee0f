"""Collaboration measures computed from a committed event log.

Counts, per user, how many bits they completed entirely on their own and
how many they completed after a takeover (ownership changed hands at least
once). The engine only ever has one owner per bit, so "collaborative" here
means exactly that takeover case, attributed to the completing owner.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import session as session_mod
from .bits import Status
from .canonical import canonical_json
from .errors import CorruptLog, RejectReason
from .session import Committed, SetStatus


@dataclass(frozen=True)
class UserTally:
    completed_solo: int
    completed_collaborative: int

    @property
    def total_completed(self) -> int:
        return self.completed_solo + self.completed_collaborative


@dataclass(frozen=True)
class BitOutcome:
    owners: int
    time_to_complete_ms: Optional[int]


@dataclass(frozen=True)
class MetricsReport:
    per_user: dict[str, UserTally]
    distribution_gap: int
    session_duration_ms: Optional[int]
    per_bit: dict[str, BitOutcome]

    def to_canonical(self) -> dict:
        return {
            "per_user": {
                uid: {
                    "completed_solo": t.completed_solo,
                    "completed_collaborative": t.completed_collaborative,
                    "total_completed": t.total_completed,
                }
                for uid, t in self.per_user.items()
            },
            "distribution_gap": self.distribution_gap,
            "session_duration_ms": self.session_duration_ms,
            "per_bit": {
                bid: {
                    "owners": o.owners,
                    "time_to_complete_ms": o.time_to_complete_ms,
                }
                for bid, o in self.per_bit.items()
            },
        }

    def to_json(self) -> str:
        return canonical_json(self.to_canonical())

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([
            "user", "completed_solo", "completed_collaborative",
            "total_completed", "distribution_gap", "session_duration_ms",
        ])
        for uid, t in self.per_user.items():
            w.writerow([
                uid, t.completed_solo, t.completed_collaborative,
                t.total_completed, "", "",
            ])
        total = sum(t.total_completed for t in self.per_user.values())
        w.writerow([
            "summary",
            sum(t.completed_solo for t in self.per_user.values()),
            sum(t.completed_collaborative for t in self.per_user.values()),
            total,
            self.distribution_gap,
            "" if self.session_duration_ms is None else self.session_duration_ms,
        ])
        return out.getvalue()


def compute_metrics(events: list[Committed]) -> MetricsReport:
    """Replay the log and tally completion attribution.

    A bit is solo-completed when its owner history has a single entry at
    completion time, collaborative when it changed hands first; duration
    runs from the first commit to the last completion.
    """
    state = session_mod.empty_state()
    created_at: dict[str, int] = {}
    completions: list[tuple[int, str, str]] = []  # (ts, bit_id, completer)
    expected = 1
    for ev in events:
        if ev.seq != expected:
            raise CorruptLog(f"expected seq {expected}, log has {ev.seq}")
        before = set(state.bits)
        result = session_mod.apply(state, ev.actor, ev.event, ev.seq, ev.ts)
        if isinstance(result, RejectReason):
            raise CorruptLog(f"committed event seq {ev.seq} rejected: {result}")
        state = result
        expected += 1
        for bid in state.bits.keys() - before:
            created_at[bid] = ev.ts
        if isinstance(ev.event, SetStatus) and ev.event.status is Status.COMPLETED:
            completions.append((ev.ts, ev.event.bit_id, ev.actor))

    solo: dict[str, int] = {}
    collab: dict[str, int] = {}
    completed_ts: dict[str, int] = {}
    for ts, bid, completer in completions:
        completed_ts[bid] = ts
        if len(state.bits[bid].owner_history) == 1:
            solo[completer] = solo.get(completer, 0) + 1
        else:
            collab[completer] = collab.get(completer, 0) + 1

    users_in_order = sorted(state.users, key=lambda uid: state.users[uid].order)
    per_user = {
        uid: UserTally(solo.get(uid, 0), collab.get(uid, 0))
        for uid in users_in_order
    }
    totals = [t.total_completed for t in per_user.values()]
    gap = (max(totals) - min(totals)) if totals else 0

    duration = None
    if completions and events:
        duration = max(ts for ts, _, _ in completions) - events[0].ts

    per_bit = {}
    for bid in sorted(state.bits, key=lambda b: int(b.lstrip("b"))):
        bit = state.bits[bid]
        done = completed_ts.get(bid)
        per_bit[bid] = BitOutcome(
            owners=len(bit.owner_history),
            time_to_complete_ms=None if done is None else done - created_at[bid],
        )
    return MetricsReport(
        per_user=per_user,
        distribution_gap=gap,
        session_duration_ms=duration,
        per_bit=per_bit,
    )


def render_figures(report: MetricsReport, outdir: str | Path) -> list[Path]:
    """Render the report as figures next to the delimited output.

    Writes task_distribution.png (stacked solo/collaborative bars per user)
    and completion_times.png (per-bit time to completion) into `outdir`.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    users = list(report.per_user)
    solo = [report.per_user[u].completed_solo for u in users]
    collab = [report.per_user[u].completed_collaborative for u in users]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(users, solo, label="solo", color="#4878cf")
    ax.bar(users, collab, bottom=solo, label="collaborative", color="#ee854a")
    ax.set_ylabel("completed bits")
    ax.set_title(f"Task distribution (gap = {report.distribution_gap})")
    ax.legend()
    fig.tight_layout()
    path = outdir / "task_distribution.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    done = {
        bid: o.time_to_complete_ms
        for bid, o in report.per_bit.items()
        if o.time_to_complete_ms is not None
    }
    fig, ax = plt.subplots(figsize=(6, 4))
    if done:
        ax.bar(list(done), [v / 1000.0 for v in done.values()], color="#6acc65")
    ax.set_ylabel("seconds to complete")
    ax.set_title("Per-bit completion time")
    fig.tight_layout()
    path = outdir / "completion_times.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
