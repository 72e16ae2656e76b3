"""Batch entry points over the allocation engine.

Every randomized subcommand takes its seed from a flag or the config file it
reads; nothing is seeded from the clock, so a command is reproducible from
its arguments and inputs alone. Diagnostics go to stderr; exit codes are
0 (success), 1 (validation failure), 2 (usage error).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .datagen import GenSpec, generate_dataset
from .debias import DebiasConfig, train_adversarial
from .embed import HashingEmbedder, embed_dataset_entities, load_embeddings, save_embeddings
from .explain import ExplainContext, explain_allocation
from .hetgraph import GnnConfig, LayerState, build_graph, train_link_prediction, write_loss_csv
from .model import (
    Dataset,
    FloorConstraint,
    QuotaConstraint,
    canonical_json,
    dataset_from_dict,
    dataset_to_dict,
    plan_from_dict,
    plan_to_dict,
    validate_dataset,
)
from .objectives import MeritWeights, evaluate_constraints, evaluate_objectives
from .optimizer import (
    InfeasibleProblem,
    NoCompliantSolution,
    OptimizerConfig,
    SelectionPolicy,
    run_nsga2,
    select_solution,
    write_trace_csv,
)
from .recsys import IvfConfig, ann_query, build_ivfpq, load_index, save_index
from .scoring import build_problem


def _read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(path, doc) -> None:
    Path(path).write_text(canonical_json(doc))


def _load_dataset(path) -> Dataset:
    ds = dataset_from_dict(_read_json(path))
    issues = validate_dataset(ds)
    if issues:
        raise ValueError(f"dataset invalid: {[str(i) for i in issues[:3]]}")
    return ds


def _vectors_for(ds: Dataset, embeddings_path, embed_dim: int):
    if embeddings_path:
        return load_embeddings(embeddings_path)
    return embed_dataset_entities(HashingEmbedder(dim=embed_dim), ds)


def _state_from(path) -> LayerState | None:
    if not path:
        return None
    vectors = load_embeddings(path)
    ids = tuple(sorted(vectors))
    return LayerState(ids, np.stack([vectors[i] for i in ids]))


def _problem_from_args(ds: Dataset, args, merit=None, floors=(), quotas=()):
    vectors = _vectors_for(ds, getattr(args, "embeddings", None), args.embed_dim)
    state = _state_from(getattr(args, "graph_state", None))
    return build_problem(ds, vectors, node_state=state, merit_weights=merit,
                         floors=floors, quotas=quotas)


# -- subcommands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    spec = GenSpec.from_dict(_read_json(args.spec))
    ds = generate_dataset(spec)
    _write_json(args.out, dataset_to_dict(ds))
    print(f"wrote {args.out}: {len(ds.candidates)} candidates, {len(ds.roles)} roles",
          file=sys.stderr)
    return 0


def cmd_train_graph(args) -> int:
    ds = _load_dataset(args.data)
    graph = build_graph(ds, HashingEmbedder(dim=args.embed_dim),
                        skill_sim_threshold=args.skill_threshold)
    config = GnnConfig(layers=args.layers, hidden_dim=args.hidden_dim,
                       epochs=args.epochs, learning_rate=args.learning_rate,
                       seed=args.seed)
    _, state, history = train_link_prediction(graph, config)
    save_embeddings(state.to_dict(), args.out)
    if args.loss_csv:
        write_loss_csv(history, args.loss_csv)
    print(f"trained {config.epochs} epochs, final loss {history[-1]:.6f}", file=sys.stderr)
    return 0


def cmd_debias(args) -> int:
    ds = _load_dataset(args.data)
    emb = load_embeddings(args.embeddings)
    if not ds.ground_truth:
        raise ValueError("dataset has no planted ground-truth pairs to learn from")
    missing = [i for pair in ds.ground_truth for i in pair if i not in emb]
    if missing:
        raise ValueError(f"embeddings file is missing entities: {missing[:3]}")

    # Positives are the planted pairs; negatives are seeded uniform
    # candidate-role draws outside that set.
    rng = np.random.default_rng(args.seed + 1)
    positives = list(ds.ground_truth)
    gt = set(positives)
    cand_ids = [c.id for c in ds.candidates]
    role_ids = [r.id for r in ds.roles]
    negatives: list[tuple[str, str]] = []
    while len(negatives) < len(positives):
        cid = cand_ids[int(rng.integers(0, len(cand_ids)))]
        rid = role_ids[int(rng.integers(0, len(role_ids)))]
        if (cid, rid) not in gt:
            negatives.append((cid, rid))
    pairs = [(c, r, 1) for c, r in positives] + [(c, r, 0) for c, r in negatives]

    sensitive = {c.id: dict(c.demographics.group_memberships) for c in ds.candidates}
    config = DebiasConfig(lam=args.lam, epochs=args.epochs, seed=args.seed,
                          repr_dim=args.repr_dim)
    model, history = train_adversarial(emb, pairs, sensitive, config)
    encoded = {eid: model.encode(np.asarray(vec, dtype=float)) for eid, vec in emb.items()}
    save_embeddings(encoded, args.out)
    print(f"debiased {len(encoded)} embeddings at lambda={args.lam}, "
          f"final allocation loss {history[-1].allocation:.6f}", file=sys.stderr)
    return 0


def cmd_allocate(args) -> int:
    ds = _load_dataset(args.data)
    doc = _read_json(args.config)
    merit = MeritWeights(*doc["merit_weights"]) if doc.get("merit_weights") else None
    floors = [FloorConstraint(f["category"], f["label"], int(f["count"]))
              for f in doc.get("floors", ())]
    quotas = [QuotaConstraint(q["category"], q["label"], int(q["count"]))
              for q in doc.get("quotas", ())]
    opt_keys = ("population", "max_generations", "crossover_rate", "mutation_rate",
                "penalty", "rho", "seed")
    config = OptimizerConfig(**{k: doc[k] for k in opt_keys if k in doc})
    policy = SelectionPolicy(weights=tuple(doc.get("policy_weights", (1 / 3, 1 / 3, 1 / 3))),
                             mandatory=tuple(doc.get("mandatory", ())))

    args.embed_dim = int(doc.get("embed_dim", args.embed_dim))
    problem = _problem_from_args(ds, args, merit=merit, floors=floors, quotas=quotas)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    front = run_nsga2(problem, config)
    plan = select_solution(front, policy)
    plan.objective_values, _ = evaluate_objectives(plan, problem.context)
    plan.violations = evaluate_constraints(plan, problem.constraints,
                                           problem.context.candidates, problem.roles_by_id())

    from .service.store import front_to_doc

    _write_json(out / "front.json", front_to_doc(front))
    _write_json(out / "plan.json", plan_to_dict(plan))
    write_trace_csv(front, str(out / "trace.csv"))
    o = plan.objective_values
    print(f"front size {len(front.members)}; selected plan assigns "
          f"{len(plan.assignments)} candidates "
          f"(merit {o.merit:.4f}, diversity {o.diversity:.4f}, preference {o.preference:.4f})",
          file=sys.stderr)
    return 0


def cmd_explain(args) -> int:
    ds = _load_dataset(args.data)
    plan = plan_from_dict(_read_json(args.plan))
    problem = _problem_from_args(ds, args)
    ctx = ExplainContext(problem=problem, plan=plan,
                         policy=SelectionPolicy(weights=tuple(args.weights)),
                         diversity_weight=args.diversity_weight)
    bundle = explain_allocation(args.candidate, args.role, ctx)
    print(bundle.to_text())
    return 0


def cmd_index(args) -> int:
    vectors = load_embeddings(args.embeddings)
    config = IvfConfig(nlist=args.nlist, m=args.m, kmeans_iters=args.kmeans_iters,
                       seed=args.seed)
    index = build_ivfpq(vectors, config)
    save_index(index, args.out)
    print(f"indexed {len(index)} vectors (d={index.d}, nlist={index.nlist}, m={index.m})",
          file=sys.stderr)
    return 0


def cmd_query(args) -> int:
    index = load_index(args.index)
    query = np.asarray(_read_json(args.vector), dtype=float)
    if query.ndim != 1:
        raise ValueError("query vector file must hold a flat JSON array of numbers")
    result = ann_query(index, query, k=args.k, nprobe=args.nprobe,
                       rerank=not args.no_rerank)
    print(canonical_json({"capped": result.capped,
                          "hits": [[i, d] for i, d in result.hits]}), end="")
    return 0


def cmd_eval(args) -> int:
    ds = _load_dataset(args.data)
    plan = plan_from_dict(_read_json(args.plan))
    problem = _problem_from_args(ds, args)
    ctx = problem.context

    unknown = [c for c in plan.assignments if c not in ctx.candidates]
    if unknown:
        raise ValueError(f"plan references unknown candidates: {unknown[:3]}")

    objectives, _ = evaluate_objectives(plan, ctx)
    violations = evaluate_constraints(plan, problem.constraints, ctx.candidates,
                                      problem.roles_by_id())
    report: dict = {
        "assigned": len(plan.assignments),
        "candidates": len(ds.candidates),
        "objectives": {"merit": objectives.merit, "diversity": objectives.diversity,
                       "preference": objectives.preference},
        "violations": [[cid, mag] for cid, mag in violations],
    }

    role_ids = sorted(r.id for r in ds.roles)
    if ds.ground_truth:
        hits = 0
        for cid, rid_true in ds.ground_truth:
            ranked = sorted(role_ids, key=lambda rid: (-ctx.pair_merit(cid, rid), rid))
            hits += rid_true in ranked[: args.k]
        report["top_k"] = {"k": args.k, "pairs": len(ds.ground_truth),
                           "accuracy": hits / len(ds.ground_truth)}

        cids = sorted(ctx.candidates)
        selected = np.array([1 if c in plan.assignments else 0 for c in cids])
        with_gt = {c for c, _ in ds.ground_truth}
        qualified = np.array([1 if c in with_gt else 0 for c in cids])
        scores = np.array([max(ctx.pair_merit(c, r) for r in role_ids) for c in cids])
        labels = {
            cat: np.array([ctx.candidates[c].demographics.group_memberships.get(cat, "unlabeled")
                           for c in cids])
            for cat in sorted({k for c in cids
                               for k in ctx.candidates[c].demographics.group_memberships})
        }
        from .debias import build_fairness_report

        try:
            report["fairness"] = build_fairness_report(selected, qualified, scores, labels).to_dict()
        except ValueError as exc:
            report["fairness"] = {"undefined": str(exc)}
    else:
        report["top_k"] = None
        report["fairness"] = {"undefined": "dataset has no ground-truth pairs"}

    text = canonical_json(report)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_serve(args) -> int:
    from .service.app import serve

    serve(host=args.host, port=args.port, data_dir=args.data_dir)
    return 0


# -- parser ------------------------------------------------------------------------


def _add_embedding_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embeddings", help="entity embedding file (defaults to hashed text)")
    p.add_argument("--graph-state", help="trained node representations for the graph signal")
    p.add_argument("--embed-dim", type=int, default=64,
                   help="hashed embedding width when --embeddings is absent")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gesa",
        description="Fair, explainable candidate-role allocation engine.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("generate", help="synthesize a dataset from a generator spec")
    p.add_argument("--spec", required=True, help="generator spec JSON (seed lives here)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train-graph", help="train node representations by link prediction")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output embedding file")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--skill-threshold", type=float, default=0.5)
    p.add_argument("--loss-csv", help="optional per-epoch loss trace")
    p.set_defaults(func=cmd_train_graph)

    p = sub.add_parser("debias", help="strip demographic signal from embeddings")
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="gradient-reversal strength")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repr-dim", type=int, default=24)
    p.set_defaults(func=cmd_debias)

    p = sub.add_parser("allocate", help="run the optimizer and select a plan")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True,
                   help="JSON: optimizer fields, merit_weights, floors, quotas, "
                        "policy_weights, mandatory, embed_dim")
    p.add_argument("--out", required=True, help="output directory")
    _add_embedding_flags(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("explain", help="explain one candidate-role assignment")
    p.add_argument("--data", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--role", required=True)
    p.add_argument("--weights", type=float, nargs=3, default=(1 / 3, 1 / 3, 1 / 3),
                   metavar=("MERIT", "DIVERSITY", "PREFERENCE"))
    p.add_argument("--diversity-weight", type=float, default=1.0)
    _add_embedding_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("index", help="build a vector index from an embedding file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--nlist", type=int, default=None)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--kmeans-iters", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="query a vector index")
    p.add_argument("--index", required=True)
    p.add_argument("--vector", required=True, help="JSON array of numbers")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--nprobe", type=int, default=8)
    p.add_argument("--no-rerank", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="score a plan against its dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("-k", type=int, default=3, help="rank depth for ground-truth accuracy")
    p.add_argument("--out", help="also write the report JSON here")
    _add_embedding_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP review service")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own usage text
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (InfeasibleProblem, NoCompliantSolution) as exc:
        print(f"gesa: no usable solution: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"gesa: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
