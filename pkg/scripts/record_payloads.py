"""Capture real service responses for the web client's contract tests.

Run from the repository root; rewrites frontend/tests/recorded/*.json.
The instance is small and fully seeded, so the files only change when the
service itself does.
"""

import json
import sys
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from gesa.service.app import create_app

OUT = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "recorded"

GEN_BODY = {
    "candidates": 24,
    "roles": 4,
    "skills": 10,
    "organizations": 2,
    "locations": 2,
    "domains": 2,
    "skills_per_candidate": [2, 4],
    "skills_per_role": [1, 2],
    "bias_strength": 0.2,
    "seed": 11,
    "preference_list_length": 2,
}
ALLOC_BODY = {
    "dataset_id": "demo",
    "population": 16,
    "max_generations": 8,
    "seed": 3,
    "embed_dim": 32,
}


def wait_done(client, job_id):
    for _ in range(1200):
        doc = client.get(f"/allocations/{job_id}").json()
        if doc["status"] in ("done", "failed"):
            assert doc["status"] == "done", doc
            return doc
        time.sleep(0.05)
    raise RuntimeError(f"job {job_id} did not finish")


def dump(name, payload):
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {name}")


def main() -> int:
    with tempfile.TemporaryDirectory() as root:
        client = TestClient(create_app(root))
        assert client.post("/datasets/demo/generate", json=GEN_BODY).status_code == 200
        job_id = client.post("/allocations", json=ALLOC_BODY).json()["job_id"]
        dump("job_done.json", wait_done(client, job_id))
        dump("front.json", client.get(f"/allocations/{job_id}/front").json())

        r = client.post(
            f"/allocations/{job_id}/select", json={"weights": [0.45, 0.35, 0.2]}
        )
        assert r.status_code == 200, r.text
        before = r.json()
        dump("selection_before.json", before)
        dump(
            "fairness_before.json",
            client.get(f"/allocations/{job_id}/fairness-report").json(),
        )

        cid, rid = sorted(before["assignments"].items())[0]
        dump(
            "explanation.json",
            client.get(f"/allocations/{job_id}/explanations/{cid}/{rid}").json(),
        )

        # A capacity rejection for the pass-through test: push an outsider
        # into a role the selection already fills. Rejections leave no state
        # behind, so this cannot disturb the before/after pair below.
        dataset = client.get("/datasets/demo").json()["dataset"]
        capacities = {role["id"]: role["capacity"] for role in dataset["roles"]}
        by_role: dict[str, list[str]] = {}
        for c, assigned_role in before["assignments"].items():
            by_role.setdefault(assigned_role, []).append(c)
        full = next(
            (role for role, members in by_role.items() if len(members) >= capacities[role]),
            None,
        )
        if full is None:
            print("no saturated role; capacity_error.json left as-is", file=sys.stderr)
        else:
            outsider = next(
                c["id"]
                for c in dataset["candidates"]
                if before["assignments"].get(c["id"]) != full
            )
            r = client.post(
                f"/allocations/{job_id}/overrides",
                json={
                    "candidate_id": outsider,
                    "to_role": full,
                    "justification": "squeeze one more in",
                },
            )
            assert r.status_code == 409, r.text
            dump("capacity_error.json", {"status": r.status_code, "body": r.json()})

        ack = client.post(
            f"/allocations/{job_id}/overrides",
            json={
                "candidate_id": cid,
                "to_role": None,
                "justification": "manual review: conflict of interest",
                "actor": "reviewer-1",
                "reason": "conflict",
            },
        )
        assert ack.status_code == 200, ack.text
        dump("override_ack.json", ack.json())
        dump(
            "selection_after.json",
            client.get(f"/allocations/{job_id}/selection").json(),
        )
        dump(
            "fairness_after.json",
            client.get(f"/allocations/{job_id}/fairness-report").json(),
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
