"""Disk-backed state for the review service.

Layout under the data root (GESA_DATA_DIR):
    datasets/{id}/dataset.json      canonical dataset document
    jobs/{id}/job.json              status, request, timestamps
    jobs/{id}/front.json            serialized Pareto front
    jobs/{id}/selection.json        working plan: base + current assignments
    jobs/{id}/overrides.log         append-only JSON lines
    feedback.json                   selection weights + override counters
    tokens/{token}.json             idempotency snapshots

Documents are written in canonical form (sorted keys) so identical state is
byte-identical on disk. Writes are serialized per job or dataset; reads are
lock-free.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path

from gesa.model import (
    AllocationPlan,
    Dataset,
    ObjectiveVector,
    canonical_json,
    dataset_from_dict,
    dataset_to_dict,
    validate_dataset,
)
from gesa.optimizer import GenerationStats, Individual, ParetoFront

DEFAULT_ETA = 0.2
_STATUS_ORDER = {"queued": 0, "running": 1, "done": 2, "failed": 2}


class NotFound(KeyError):
    pass


class Conflict(RuntimeError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_doc(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(doc))


def _read_doc(path: Path):
    return json.loads(path.read_text())


def front_to_doc(front: ParetoFront) -> dict:
    return {
        "diversity_weight": front.diversity_weight,
        "escalations": list(front.escalations),
        "members": [
            {
                "assignments": dict(sorted(m.plan.assignments.items())),
                "raw": list(m.raw.as_tuple()),
                "penalized": list(m.penalized.as_tuple()),
                "violations": [[cid, mag] for cid, mag in m.violations],
            }
            for m in front.members
        ],
        "history": [
            {
                "generation": g.generation,
                "front1_size": g.front1_size,
                "hypervolume": g.hypervolume,
                "diversity_weight": g.diversity_weight,
                "violations": g.violations,
            }
            for g in front.history
        ],
    }


def front_from_doc(doc: dict) -> ParetoFront:
    members = tuple(
        Individual(
            plan=AllocationPlan(assignments=dict(m["assignments"])),
            raw=ObjectiveVector(*m["raw"]),
            penalized=ObjectiveVector(*m["penalized"]),
            violations=tuple((cid, float(mag)) for cid, mag in m["violations"]),
            rank=1,
            crowding=0.0,
        )
        for m in doc["members"]
    )
    history = tuple(GenerationStats(**row) for row in doc["history"])
    return ParetoFront(
        members=members,
        history=history,
        diversity_weight=doc["diversity_weight"],
        escalations=tuple(doc["escalations"]),
    )


class Store:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "datasets").mkdir(exist_ok=True)
        (self.root / "jobs").mkdir(exist_ok=True)
        (self.root / "tokens").mkdir(exist_ok=True)
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._registry = threading.Lock()
        self._fail_interrupted_jobs()

    def lock(self, key: str) -> threading.Lock:
        with self._registry:
            return self._locks[key]

    def _fail_interrupted_jobs(self) -> None:
        # A restart orphans anything that was mid-flight.
        for job_file in self.root.glob("jobs/*/job.json"):
            doc = _read_doc(job_file)
            if doc["status"] in ("queued", "running"):
                doc["status"] = "failed"
                doc["error"] = "interrupted by service restart"
                doc["finished_at"] = _now()
                _write_doc(job_file, doc)

    # -- datasets -----------------------------------------------------------

    def _dataset_path(self, dataset_id: str) -> Path:
        return self.root / "datasets" / dataset_id / "dataset.json"

    def put_dataset(self, doc: dict) -> str:
        """Store a dataset document under a content-derived id."""
        dataset = dataset_from_dict(doc)
        issues = validate_dataset(dataset)
        if issues:
            raise ValueError("; ".join(i.message for i in issues))
        canonical = dataset_to_dict(dataset)
        digest = hashlib.sha256(canonical_json(canonical).encode()).hexdigest()[:12]
        dataset_id = f"ds-{digest}"
        with self.lock(dataset_id):
            _write_doc(self._dataset_path(dataset_id), canonical)
        return dataset_id

    def put_dataset_as(self, dataset_id: str, dataset: Dataset) -> None:
        doc = dataset_to_dict(dataset)
        path = self._dataset_path(dataset_id)
        with self.lock(dataset_id):
            if path.exists() and _read_doc(path) != doc:
                raise Conflict(f"dataset {dataset_id} exists with different content")
            _write_doc(path, doc)

    def has_dataset(self, dataset_id: str) -> bool:
        return self._dataset_path(dataset_id).exists()

    def dataset_doc(self, dataset_id: str) -> dict:
        path = self._dataset_path(dataset_id)
        if not path.exists():
            raise NotFound(f"dataset {dataset_id} not found")
        return _read_doc(path)

    def get_dataset(self, dataset_id: str) -> Dataset:
        return dataset_from_dict(self.dataset_doc(dataset_id))

    # -- jobs ---------------------------------------------------------------

    def _job_dir(self, job_id: str) -> Path:
        return self.root / "jobs" / job_id

    def create_job(self, dataset_id: str, request: dict) -> str:
        with self._registry:
            active = self._active_job_for(dataset_id)
            if active is not None:
                raise Conflict(
                    f"dataset {dataset_id} already has job {active} in flight"
                )
            job_id = "job-" + uuid.uuid4().hex[:12]
            doc = {
                "job_id": job_id,
                "dataset_id": dataset_id,
                "request": request,
                "status": "queued",
                "error": None,
                "created_at": _now(),
                "finished_at": None,
            }
            _write_doc(self._job_dir(job_id) / "job.json", doc)
        return job_id

    def _active_job_for(self, dataset_id: str) -> str | None:
        for job_file in self.root.glob("jobs/*/job.json"):
            doc = _read_doc(job_file)
            if doc["dataset_id"] == dataset_id and doc["status"] in ("queued", "running"):
                return doc["job_id"]
        return None

    def get_job(self, job_id: str) -> dict:
        path = self._job_dir(job_id) / "job.json"
        if not path.exists():
            raise NotFound(f"job {job_id} not found")
        return _read_doc(path)

    def update_job(self, job_id: str, status: str, error: str | None = None) -> dict:
        with self.lock(job_id):
            doc = self.get_job(job_id)
            if _STATUS_ORDER[status] < _STATUS_ORDER[doc["status"]]:
                raise Conflict(
                    f"job {job_id} cannot move {doc['status']} -> {status}"
                )
            doc["status"] = status
            if error is not None:
                doc["error"] = error
            if status in ("done", "failed"):
                doc["finished_at"] = _now()
            _write_doc(self._job_dir(job_id) / "job.json", doc)
        return doc

    # -- fronts and selections ------------------------------------------------

    def save_front(self, job_id: str, front: ParetoFront) -> None:
        _write_doc(self._job_dir(job_id) / "front.json", front_to_doc(front))

    def load_front(self, job_id: str) -> ParetoFront:
        path = self._job_dir(job_id) / "front.json"
        if not path.exists():
            raise NotFound(f"job {job_id} has no front")
        return front_from_doc(_read_doc(path))

    def save_selection(self, job_id: str, doc: dict) -> None:
        _write_doc(self._job_dir(job_id) / "selection.json", doc)

    def load_selection(self, job_id: str) -> dict:
        path = self._job_dir(job_id) / "selection.json"
        if not path.exists():
            raise NotFound(f"job {job_id} has no selected plan")
        return _read_doc(path)

    # -- overrides ------------------------------------------------------------

    def append_override(self, job_id: str, record: dict) -> dict:
        path = self._job_dir(job_id) / "overrides.log"
        record = dict(record, sequence=len(self.read_overrides(job_id)), logged_at=_now())
        with open(path, "a") as fh:
            # one compact record per line so the log stays appendable
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        return record

    def read_overrides(self, job_id: str) -> list[dict]:
        path = self._job_dir(job_id) / "overrides.log"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line]

    # -- feedback ---------------------------------------------------------------

    def _feedback_path(self) -> Path:
        return self.root / "feedback.json"

    def feedback_state(self) -> dict:
        path = self._feedback_path()
        if not path.exists():
            return {
                "weights": [1 / 3, 1 / 3, 1 / 3],
                "eta": DEFAULT_ETA,
                "override_counts": {},
            }
        return _read_doc(path)

    def apply_feedback(self, adjusted: tuple[float, float, float], eta: float | None) -> dict:
        if any(w < 0 for w in adjusted):
            raise ValueError("weights must be non-negative")
        if abs(sum(adjusted) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        with self.lock("feedback"):
            state = self.feedback_state()
            rate = state["eta"] if eta is None else eta
            old = state["weights"]
            new = [(1 - rate) * o + rate * a for o, a in zip(old, adjusted)]
            total = sum(new)
            state["weights"] = [w / total for w in new]
            state["eta"] = rate
            _write_doc(self._feedback_path(), state)
        return state

    def count_override(self, reason: str) -> None:
        with self.lock("feedback"):
            state = self.feedback_state()
            counts = state.get("override_counts", {})
            counts[reason] = counts.get(reason, 0) + 1
            state["override_counts"] = counts
            _write_doc(self._feedback_path(), state)

    # -- idempotency tokens ------------------------------------------------------

    def recall_token(self, token: str, endpoint: str) -> dict | None:
        path = self.root / "tokens" / f"{token}.json"
        if not path.exists():
            return None
        doc = _read_doc(path)
        if doc["endpoint"] != endpoint:
            raise Conflict(f"request token {token} was used on {doc['endpoint']}")
        return doc["payload"]

    def store_token(self, token: str, endpoint: str, payload: dict) -> None:
        _write_doc(
            self.root / "tokens" / f"{token}.json",
            {"endpoint": endpoint, "payload": payload},
        )
