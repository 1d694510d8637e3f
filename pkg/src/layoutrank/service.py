"""HTTP labeling service: serves chart pairs to people, enforces quality control.

Protocol per session batch: 10 comparison tasks plus one duplicated task
with its sides swapped, inserted at a random position and never revealed
to the client.  A batch is accepted only when the duplicate's answer
matches the original's; accepted batches persist one choice record per
real task.  A pair joins the labeled dataset once three distinct
sessions judge it unanimously; split decisions discard it.

State lives in an append-only JSONL event log; replaying the log at
startup reconstructs the exact store state.  All mutations serialize
through one lock, so concurrent sessions never lease the same pair.
"""

import json
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pairs import ComparisonPair, Dataset
from .render import render

BATCH_PAIRS = 10
REQUIRED_JUDGMENTS = 3
DEFAULT_LEASE_SECONDS = 600.0


@dataclass
class ChoiceRecord:
    pair_id: str
    session: str
    chosen: str  # "a" | "b"
    presented_first: str  # side shown on top
    timestamp: float
    is_quality_control: bool = False

    def to_json_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "session": self.session,
            "chosen": self.chosen,
            "presented_first": self.presented_first,
            "timestamp": self.timestamp,
            "is_quality_control": self.is_quality_control,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ChoiceRecord":
        return cls(**d)


@dataclass
class _Task:
    task_id: str
    pair_id: str
    first: str  # which side renders on top: "a" | "b"
    duplicate_of: str | None = None  # task_id of the original


@dataclass
class _ServedBatch:
    batch_id: str
    session: str
    tasks: list[_Task]
    expires: float


class LabelStore:
    """Pair queue, leases, and the append-only choice log."""

    def __init__(
        self,
        pairs: list[ComparisonPair],
        log_path,
        experiment: str = "exp2",
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        seed: int = 0,
        base_height_px: int = 300,
        clock=time.time,
    ):
        self.experiment = experiment
        self.lease_seconds = lease_seconds
        self.base_height_px = base_height_px
        self._clock = clock
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        self._pairs: dict[str, ComparisonPair] = {}
        for p in pairs:
            if p.id in self._pairs:
                raise ValueError(f"duplicate pair id {p.id}")
            if p.label is None:
                self._pairs[p.id] = p
        self._records: dict[str, list[ChoiceRecord]] = {pid: [] for pid in self._pairs}
        self._resolved: dict[str, str | None] = {}  # pair_id -> "a"|"b"|None(discarded)
        self._batches: dict[str, _ServedBatch] = {}
        self._rejected_batches = 0
        self._accepted_batches = 0
        self._log_path = Path(log_path)
        if self._log_path.exists():
            self._replay()
        self._log = open(self._log_path, "a")

    # -- persistence -----------------------------------------------------------

    def _replay(self) -> None:
        with open(self._log_path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event["type"] == "batch_accepted":
                    for rd in event["records"]:
                        self._apply_record(ChoiceRecord.from_json_dict(rd))
                    self._accepted_batches += 1
                elif event["type"] == "batch_rejected":
                    self._rejected_batches += 1

    def _append_event(self, event: dict) -> None:
        self._log.write(json.dumps(event) + "\n")
        self._log.flush()

    def _apply_record(self, record: ChoiceRecord) -> None:
        pid = record.pair_id
        if pid in self._resolved:
            return
        self._records[pid].append(record)
        if len(self._records[pid]) >= REQUIRED_JUDGMENTS:
            choices = {r.chosen for r in self._records[pid]}
            self._resolved[pid] = choices.pop() if len(choices) == 1 else None

    # -- queries ---------------------------------------------------------------

    def _expire_leases(self, now: float) -> None:
        dead = [bid for bid, b in self._batches.items() if b.expires <= now]
        for bid in dead:
            del self._batches[bid]

    def _leased_pair_ids(self) -> set[str]:
        return {t.pair_id for b in self._batches.values() for t in b.tasks}

    def _available(self, session: str) -> list[str]:
        leased = self._leased_pair_ids()
        out = []
        for pid in self._pairs:
            if pid in self._resolved or pid in leased:
                continue
            if any(r.session == session for r in self._records[pid]):
                continue
            out.append(pid)
        return out

    def progress(self) -> dict:
        with self._lock:
            labeled = len(self._resolved)
            unanimous = sum(1 for v in self._resolved.values() if v is not None)
            return {
                "pending": len(self._pairs) - labeled,
                "labeled": labeled,
                "unanimous": unanimous,
                "rejected": self._rejected_batches,
                "accepted": self._accepted_batches,
            }

    def labeled_dataset(self) -> Dataset:
        """Pairs promoted by three unanimous judgments, labeled as human data."""
        with self._lock:
            out = []
            for pid, side in sorted(self._resolved.items()):
                if side is None:
                    continue
                src = self._pairs[pid]
                out.append(
                    ComparisonPair(
                        id=src.id,
                        data=src.data,
                        params_a=src.params_a,
                        params_b=src.params_b,
                        label=side,
                        provenance="human",
                        label_via="human",
                    )
                )
            return Dataset(pairs=out, experiment=self.experiment)

    # -- protocol ----------------------------------------------------------------

    def serve_batch(self, session: str) -> dict:
        """Lease 10 pairs and serve 11 presentation tasks (one hidden duplicate)."""
        if not session:
            raise ServiceError(400, "session id required")
        with self._lock:
            now = self._clock()
            self._expire_leases(now)
            for b in self._batches.values():
                if b.session == session:  # idempotent re-fetch
                    return self._batch_payload(b)
            available = self._available(session)
            if len(available) < BATCH_PAIRS:
                raise ServiceError(
                    409,
                    f"insufficient pending pairs: {len(available)} available, "
                    f"{BATCH_PAIRS} required",
                )
            chosen = [available[int(i)] for i in self._rng.choice(len(available), size=BATCH_PAIRS, replace=False)]
            batch_id = uuid.uuid4().hex
            tasks = []
            for k, pid in enumerate(chosen):
                first = "a" if self._rng.random() < 0.5 else "b"
                tasks.append(_Task(task_id=f"{batch_id}-{k}", pair_id=pid, first=first))
            dup_src = tasks[int(self._rng.integers(0, BATCH_PAIRS))]
            dup = _Task(
                task_id=f"{batch_id}-dup",
                pair_id=dup_src.pair_id,
                first="b" if dup_src.first == "a" else "a",
                duplicate_of=dup_src.task_id,
            )
            tasks.insert(int(self._rng.integers(0, BATCH_PAIRS + 1)), dup)
            batch = _ServedBatch(
                batch_id=batch_id,
                session=session,
                tasks=tasks,
                expires=now + self.lease_seconds,
            )
            self._batches[batch_id] = batch
            return self._batch_payload(batch)

    def _batch_payload(self, batch: _ServedBatch) -> dict:
        tasks = []
        for t in batch.tasks:
            pair = self._pairs[t.pair_id]
            svg_a = render(pair.data, pair.params_a, self.base_height_px).svg
            svg_b = render(pair.data, pair.params_b, self.base_height_px).svg
            first_svg, second_svg = (svg_a, svg_b) if t.first == "a" else (svg_b, svg_a)
            tasks.append(
                {"task_id": t.task_id, "first_svg": first_svg, "second_svg": second_svg}
            )
        return {
            "batch_id": batch.batch_id,
            "session": batch.session,
            "layout": "stacked",
            "tasks": tasks,
        }

    def submit_batch(self, session: str, batch_id: str, choices: list[dict]) -> dict:
        """Accept or reject a full batch of choices.

        ``choices`` maps every served task to "first" or "second".  The
        batch is accepted iff the duplicate's resolved side equals the
        original task's; rejection persists nothing and re-queues the
        pairs.
        """
        with self._lock:
            now = self._clock()
            self._expire_leases(now)
            batch = self._batches.get(batch_id)
            if batch is None or batch.session != session:
                raise ServiceError(404, f"no outstanding batch {batch_id!r} for session")
            by_task = {}
            for c in choices:
                if c.get("choice") not in ("first", "second"):
                    raise ServiceError(400, f"bad choice {c.get('choice')!r}")
                by_task[c.get("task_id")] = c["choice"]
            expected = {t.task_id for t in batch.tasks}
            if set(by_task) != expected:
                raise ServiceError(400, "choices must cover the full served batch")

            def resolved_side(task: _Task) -> str:
                pick = by_task[task.task_id]
                return task.first if pick == "first" else ("b" if task.first == "a" else "a")

            dup = next(t for t in batch.tasks if t.duplicate_of is not None)
            original = next(t for t in batch.tasks if t.task_id == dup.duplicate_of)
            del self._batches[batch_id]  # lease released either way
            if resolved_side(dup) != resolved_side(original):
                self._rejected_batches += 1
                self._append_event({"type": "batch_rejected", "session": session, "batch_id": batch_id})
                return {"verdict": "rejected", "reason": "inconsistent"}

            records = []
            for t in batch.tasks:
                if t.duplicate_of is not None:
                    continue
                records.append(
                    ChoiceRecord(
                        pair_id=t.pair_id,
                        session=session,
                        chosen=resolved_side(t),
                        presented_first=t.first,
                        timestamp=now,
                        is_quality_control=(t.task_id == dup.duplicate_of),
                    )
                )
            self._append_event(
                {
                    "type": "batch_accepted",
                    "session": session,
                    "batch_id": batch_id,
                    "records": [r.to_json_dict() for r in records],
                }
            )
            for r in records:
                self._apply_record(r)
            self._accepted_batches += 1
            return {"verdict": "accepted"}

    def close(self) -> None:
        self._log.close()


class ServiceError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def create_app(store: LabelStore, ui_dir=None):
    """FastAPI app exposing the labeling protocol over HTTP+JSON."""
    from fastapi import FastAPI
    from fastapi.responses import JSONResponse, PlainTextResponse
    from pydantic import BaseModel

    class ChoiceIn(BaseModel):
        task_id: str
        choice: str

    class SubmitIn(BaseModel):
        session: str
        batch_id: str
        choices: list[ChoiceIn]

    app = FastAPI(title="layoutrank labeling service")

    @app.exception_handler(ServiceError)
    async def _service_error(request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/progress")
    def progress():
        return store.progress()

    @app.get("/api/batch")
    def get_batch(session: str):
        return store.serve_batch(session)

    @app.post("/api/batch")
    def post_batch(body: SubmitIn):
        choices = [{"task_id": c.task_id, "choice": c.choice} for c in body.choices]
        return store.submit_batch(body.session, body.batch_id, choices)

    @app.get("/api/export")
    def export():
        ds = store.labeled_dataset()
        lines = [json.dumps(p.to_json_dict(ds.experiment)) for p in ds.pairs]
        return PlainTextResponse("\n".join(lines) + ("\n" if lines else ""))

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
