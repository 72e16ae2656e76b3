"""FastAPI surface over the allocation engine.

Long-running optimizations run as background jobs, one in flight per
dataset. Dataset posts are content-addressed (naturally idempotent); the
other mutating endpoints accept a client request token and replay the
original response on retry.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from gesa.datagen import GenSpec, generate_dataset
from gesa.debias import build_fairness_report
from gesa.embed import HashingEmbedder, embed_dataset_entities
from gesa.explain import ExplainContext, explain_allocation
from gesa.model import (
    AllocationPlan,
    DatasetFormatError,
    FloorConstraint,
    QuotaConstraint,
)
from gesa.objectives import MeritWeights, evaluate_constraints, evaluate_objectives
from gesa.optimizer import (
    AllocationProblem,
    InfeasibleProblem,
    NoCompliantSolution,
    OptimizerConfig,
    SelectionPolicy,
    run_nsga2,
    select_solution,
)
from gesa.scoring import build_problem
from gesa.service import schemas
from gesa.service.store import Conflict, NotFound, Store, front_to_doc

_DEFAULT_DATA_DIR = "./gesa-data"


def _problem_for(store: Store, cache: dict, job: dict) -> AllocationProblem:
    job_id = job["job_id"]
    if job_id in cache:
        return cache[job_id]
    req = job["request"]
    dataset = store.get_dataset(job["dataset_id"])
    vectors = embed_dataset_entities(HashingEmbedder(dim=req["embed_dim"]), dataset)
    mw = MeritWeights(*req["merit_weights"]) if req.get("merit_weights") else None
    floors = [FloorConstraint(f["category"], f["label"], f["count"]) for f in req.get("floors", [])]
    quotas = [QuotaConstraint(q["category"], q["label"], q["count"]) for q in req.get("quotas", [])]
    problem = build_problem(dataset, vectors, merit_weights=mw, floors=floors, quotas=quotas)
    cache[job_id] = problem
    return problem


def _score_plan(problem: AllocationProblem, assignments: dict) -> tuple[list, list]:
    plan = AllocationPlan(assignments=dict(assignments))
    vec, _ = evaluate_objectives(plan, problem.context)
    violations = evaluate_constraints(
        plan, problem.constraints, problem.context.candidates, problem.roles_by_id()
    )
    return list(vec.as_tuple()), [[cid, mag] for cid, mag in violations]


def _selection_payload(job_id: str, doc: dict) -> schemas.SelectionPayload:
    merit, diversity, preference = doc["objectives"]
    return schemas.SelectionPayload(
        job_id=job_id,
        policy_weights=tuple(doc["policy_weights"]),
        mandatory=list(doc["mandatory"]),
        selection_epoch=doc["selection_epoch"],
        assignments=dict(doc["assignments"]),
        objectives=schemas.ObjectivesBody(
            merit=merit, diversity=diversity, preference=preference
        ),
        violations=[(cid, mag) for cid, mag in doc["violations"]],
        overrides_applied=doc["overrides_applied"],
    )


def _execute_job(store: Store, cache: dict, job_id: str) -> None:
    try:
        store.update_job(job_id, "running")
        job = store.get_job(job_id)
        req = job["request"]
        problem = _problem_for(store, cache, job)
        config = OptimizerConfig(
            population=req["population"],
            max_generations=req["max_generations"],
            crossover_rate=req["crossover_rate"],
            mutation_rate=req["mutation_rate"],
            penalty=req["penalty"],
            rho=req["rho"],
            seed=req["seed"],
        )
        front = run_nsga2(problem, config)
        store.save_front(job_id, front)
        weights = tuple(store.feedback_state()["weights"])
        plan = select_solution(front, SelectionPolicy(weights=weights))
        objectives, violations = _score_plan(problem, plan.assignments)
        store.save_selection(
            job_id,
            {
                "job_id": job_id,
                "policy_weights": list(weights),
                "mandatory": [],
                "selection_epoch": 1,
                "base_assignments": dict(sorted(plan.assignments.items())),
                "assignments": dict(sorted(plan.assignments.items())),
                "objectives": objectives,
                "violations": violations,
                "overrides_applied": 0,
            },
        )
        store.update_job(job_id, "done")
    except InfeasibleProblem as exc:
        if exc.front is not None:
            store.save_front(job_id, exc.front)
        store.update_job(job_id, "failed", error=str(exc))
    except Exception as exc:  # job isolation: failures land in status, not logs
        store.update_job(job_id, "failed", error=f"{type(exc).__name__}: {exc}")


def create_app(data_dir: str | Path | None = None) -> FastAPI:
    root = Path(data_dir or os.environ.get("GESA_DATA_DIR", _DEFAULT_DATA_DIR))
    store = Store(root)
    problems: dict[str, AllocationProblem] = {}
    app = FastAPI(title="gesa review service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store

    def _job_or_404(job_id: str) -> dict:
        try:
            return store.get_job(job_id)
        except NotFound as exc:
            raise HTTPException(404, str(exc))

    def _done_job(job_id: str) -> dict:
        job = _job_or_404(job_id)
        if job["status"] != "done":
            raise HTTPException(409, f"job {job_id} is {job['status']}, not done")
        return job

    # -- datasets --------------------------------------------------------

    @app.post("/datasets", response_model=schemas.DatasetCreated)
    def create_dataset(doc: dict = Body(...)):
        try:
            dataset_id = store.put_dataset(doc)
        except (DatasetFormatError, ValueError, KeyError) as exc:
            raise HTTPException(400, f"invalid dataset: {exc}")
        return schemas.DatasetCreated(dataset_id=dataset_id)

    @app.get("/datasets/{dataset_id}", response_model=schemas.DatasetSummary)
    def get_dataset(dataset_id: str):
        try:
            doc = store.dataset_doc(dataset_id)
            dataset = store.get_dataset(dataset_id)
        except NotFound as exc:
            raise HTTPException(404, str(exc))
        return schemas.DatasetSummary(
            dataset_id=dataset_id,
            candidates=len(dataset.candidates),
            roles=len(dataset.roles),
            skills=len(dataset.skills),
            total_capacity=sum(r.capacity for r in dataset.roles),
            demographic_categories={
                k: list(v) for k, v in dataset.demographic_categories.items()
            },
            ground_truth_pairs=len(dataset.ground_truth),
            dataset=doc,
        )

    @app.post("/datasets/{dataset_id}/generate", response_model=schemas.DatasetCreated)
    def generate(dataset_id: str, body: schemas.GenerateRequest):
        try:
            spec = GenSpec.from_dict(body.gen_doc())
            dataset = generate_dataset(spec)
            store.put_dataset_as(dataset_id, dataset)
        except Conflict as exc:
            raise HTTPException(409, str(exc))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return schemas.DatasetCreated(dataset_id=dataset_id)

    # -- allocation jobs ---------------------------------------------------

    @app.post("/allocations", response_model=schemas.JobCreated)
    def submit_allocation(body: schemas.AllocationRequest):
        if body.request_token:
            try:
                prior = store.recall_token(body.request_token, "allocations")
            except Conflict as exc:
                raise HTTPException(409, str(exc))
            if prior is not None:
                return schemas.JobCreated(**prior)
        if not store.has_dataset(body.dataset_id):
            raise HTTPException(404, f"dataset {body.dataset_id} not found")
        request = body.model_dump(exclude={"request_token"})
        try:
            OptimizerConfig(
                population=body.population,
                max_generations=body.max_generations,
                crossover_rate=body.crossover_rate,
                mutation_rate=body.mutation_rate,
                penalty=body.penalty,
                rho=body.rho,
                seed=body.seed,
            )
            if body.merit_weights:
                MeritWeights(*body.merit_weights)
        except ValueError as exc:
            raise HTTPException(400, f"invalid config: {exc}")
        try:
            job_id = store.create_job(body.dataset_id, request)
        except Conflict as exc:
            raise HTTPException(409, str(exc))
        threading.Thread(
            target=_execute_job, args=(store, problems, job_id), daemon=True
        ).start()
        payload = {"job_id": job_id}
        if body.request_token:
            store.store_token(body.request_token, "allocations", payload)
        return schemas.JobCreated(**payload)

    @app.get("/allocations/{job_id}", response_model=schemas.JobStatus)
    def job_status(job_id: str):
        job = _job_or_404(job_id)
        return schemas.JobStatus(
            job_id=job["job_id"],
            dataset_id=job["dataset_id"],
            status=job["status"],
            error=job["error"],
            created_at=job["created_at"],
            finished_at=job["finished_at"],
        )

    @app.get("/allocations/{job_id}/front", response_model=schemas.FrontPayload)
    def job_front(job_id: str):
        _done_job(job_id)
        doc = front_to_doc(store.load_front(job_id))
        members = [
            schemas.FrontMember(
                index=i,
                assignments=m["assignments"],
                objectives=schemas.ObjectivesBody(
                    merit=m["raw"][0], diversity=m["raw"][1], preference=m["raw"][2]
                ),
                violations=[(cid, mag) for cid, mag in m["violations"]],
                feasible=not m["violations"],
            )
            for i, m in enumerate(doc["members"])
        ]
        return schemas.FrontPayload(
            job_id=job_id,
            diversity_weight=doc["diversity_weight"],
            escalations=doc["escalations"],
            members=members,
            history=[schemas.HistoryRow(**row) for row in doc["history"]],
        )

    @app.post("/allocations/{job_id}/select", response_model=schemas.SelectionPayload)
    def select(job_id: str, body: schemas.SelectRequest):
        if body.request_token:
            try:
                prior = store.recall_token(body.request_token, f"select:{job_id}")
            except Conflict as exc:
                raise HTTPException(409, str(exc))
            if prior is not None:
                return schemas.SelectionPayload(**prior)
        job = _done_job(job_id)
        front = store.load_front(job_id)
        weights = body.weights or tuple(store.feedback_state()["weights"])
        try:
            policy = SelectionPolicy(weights=tuple(weights), mandatory=tuple(body.mandatory))
            plan = select_solution(front, policy)
        except NoCompliantSolution as exc:
            raise HTTPException(409, str(exc))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        problem = _problem_for(store, problems, job)
        objectives, violations = _score_plan(problem, plan.assignments)
        with store.lock(job_id):
            epoch = 0
            try:
                epoch = store.load_selection(job_id)["selection_epoch"]
            except NotFound:
                pass
            doc = {
                "job_id": job_id,
                "policy_weights": list(weights),
                "mandatory": list(body.mandatory),
                "selection_epoch": epoch + 1,
                "base_assignments": dict(sorted(plan.assignments.items())),
                "assignments": dict(sorted(plan.assignments.items())),
                "objectives": objectives,
                "violations": violations,
                "overrides_applied": 0,
            }
            store.save_selection(job_id, doc)
        payload = _selection_payload(job_id, doc)
        if body.request_token:
            store.store_token(body.request_token, f"select:{job_id}", payload.model_dump())
        return payload

    @app.get("/allocations/{job_id}/selection", response_model=schemas.SelectionPayload)
    def get_selection(job_id: str):
        _done_job(job_id)
        try:
            return _selection_payload(job_id, store.load_selection(job_id))
        except NotFound as exc:
            raise HTTPException(404, str(exc))

    # -- overrides ----------------------------------------------------------

    @app.post("/allocations/{job_id}/overrides", response_model=schemas.OverrideAck)
    def record_override(job_id: str, body: schemas.OverrideRequest):
        if body.request_token:
            try:
                prior = store.recall_token(body.request_token, f"override:{job_id}")
            except Conflict as exc:
                raise HTTPException(409, str(exc))
            if prior is not None:
                return schemas.OverrideAck(**prior)
        job = _done_job(job_id)
        dataset = store.get_dataset(job["dataset_id"])
        if body.candidate_id not in {c.id for c in dataset.candidates}:
            raise HTTPException(404, f"candidate {body.candidate_id} not in dataset")
        roles = {r.id: r for r in dataset.roles}
        if body.to_role is not None and body.to_role not in roles:
            raise HTTPException(404, f"role {body.to_role} not in dataset")
        problem = _problem_for(store, problems, job)
        with store.lock(job_id):
            try:
                doc = store.load_selection(job_id)
            except NotFound as exc:
                raise HTTPException(404, str(exc))
            assignments = dict(doc["assignments"])
            from_role = assignments.get(body.candidate_id)
            if body.to_role is not None:
                occupancy = sum(
                    1
                    for cid, rid in assignments.items()
                    if rid == body.to_role and cid != body.candidate_id
                )
                if occupancy >= roles[body.to_role].capacity:
                    raise HTTPException(
                        409,
                        f"role {body.to_role} is at capacity "
                        f"({roles[body.to_role].capacity}); override rejected",
                    )
                assignments[body.candidate_id] = body.to_role
            else:
                assignments.pop(body.candidate_id, None)
            objectives, violations = _score_plan(problem, assignments)
            record = store.append_override(
                job_id,
                {
                    "job_id": job_id,
                    "selection_epoch": doc["selection_epoch"],
                    "candidate_id": body.candidate_id,
                    "from_role": from_role,
                    "to_role": body.to_role,
                    "justification": body.justification,
                    "actor": body.actor,
                    "reason": body.reason,
                },
            )
            doc["assignments"] = dict(sorted(assignments.items()))
            doc["objectives"] = objectives
            doc["violations"] = violations
            doc["overrides_applied"] += 1
            store.save_selection(job_id, doc)
        store.count_override(body.reason)
        ack = schemas.OverrideAck(
            applied=True, record=record, selection=_selection_payload(job_id, doc)
        )
        if body.request_token:
            store.store_token(body.request_token, f"override:{job_id}", ack.model_dump())
        return ack

    @app.get("/allocations/{job_id}/overrides")
    def list_overrides(job_id: str):
        _job_or_404(job_id)
        return {"job_id": job_id, "records": store.read_overrides(job_id)}

    # -- explanations and fairness -------------------------------------------

    @app.get(
        "/allocations/{job_id}/explanations/{candidate_id}/{role_id}",
        response_model=schemas.ExplanationPayload,
    )
    def explanation(job_id: str, candidate_id: str, role_id: str):
        job = _done_job(job_id)
        try:
            doc = store.load_selection(job_id)
        except NotFound as exc:
            raise HTTPException(404, str(exc))
        problem = _problem_for(store, problems, job)
        if candidate_id not in problem.context.candidates:
            raise HTTPException(404, f"candidate {candidate_id} not in dataset")
        if role_id not in problem.roles_by_id():
            raise HTTPException(404, f"role {role_id} not in dataset")
        front = store.load_front(job_id)
        ctx = ExplainContext(
            problem=problem,
            plan=AllocationPlan(assignments=dict(doc["assignments"])),
            policy=SelectionPolicy(weights=tuple(doc["policy_weights"])),
            diversity_weight=front.diversity_weight,
        )
        bundle = explain_allocation(candidate_id, role_id, ctx)
        return schemas.ExplanationPayload(**bundle.to_dict())

    @app.get("/allocations/{job_id}/fairness-report", response_model=schemas.FairnessPayload)
    def fairness(job_id: str):
        job = _done_job(job_id)
        try:
            doc = store.load_selection(job_id)
        except NotFound as exc:
            raise HTTPException(404, str(exc))
        dataset = store.get_dataset(job["dataset_id"])
        problem = _problem_for(store, problems, job)
        assigned = set(doc["assignments"])
        qualified_ids = {cid for cid, _ in dataset.ground_truth}
        cids = sorted(c.id for c in dataset.candidates)
        by_id = {c.id: c for c in dataset.candidates}
        role_ids = [r.id for r in dataset.roles]
        selected = [cid in assigned for cid in cids]
        qualified = [cid in qualified_ids for cid in cids]
        scores = [
            max(problem.context.pair_merit(cid, rid) for rid in role_ids)
            for cid in cids
        ]
        labels = {
            cat: [
                by_id[cid].demographics.group_memberships.get(cat, "unlabeled")
                for cid in cids
            ]
            for cat in sorted(dataset.demographic_categories)
        }
        try:
            report = build_fairness_report(selected, qualified, scores, labels)
        except ValueError as exc:
            raise HTTPException(409, f"fairness report undefined: {exc}")
        return schemas.FairnessPayload(
            job_id=job_id,
            per_category={k: dict(v) for k, v in report.per_category.items()},
            demographic_parity=report.demographic_parity,
            equalized_opportunity=report.equalized_opportunity,
            calibration=report.calibration,
            composite=report.composite,
        )

    # -- feedback -------------------------------------------------------------

    @app.post("/feedback/weights", response_model=schemas.FeedbackPayload)
    def feedback_weights(body: schemas.FeedbackRequest):
        if body.request_token:
            try:
                prior = store.recall_token(body.request_token, "feedback")
            except Conflict as exc:
                raise HTTPException(409, str(exc))
            if prior is not None:
                return schemas.FeedbackPayload(**prior)
        try:
            state = store.apply_feedback(tuple(body.weights), body.eta)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        payload = schemas.FeedbackPayload(
            weights=tuple(state["weights"]),
            eta=state["eta"],
            override_counts=dict(state.get("override_counts", {})),
        )
        if body.request_token:
            store.store_token(body.request_token, "feedback", payload.model_dump())
        return payload

    @app.get("/feedback/weights", response_model=schemas.FeedbackPayload)
    def get_feedback():
        state = store.feedback_state()
        return schemas.FeedbackPayload(
            weights=tuple(state["weights"]),
            eta=state["eta"],
            override_counts=dict(state.get("override_counts", {})),
        )

    return app


def serve(host: str = "0.0.0.0", port: int | None = None, data_dir: str | None = None) -> None:
    import uvicorn

    if port is None:
        port = int(os.environ.get("GESA_PORT", "8080"))
    uvicorn.run(create_app(data_dir), host=host, port=port)
