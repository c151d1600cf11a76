"""Command-line entry points: dataset jobs, training, proving, serving.

Everything here is thin plumbing over the library modules; metrics go to
stdout as JSON, progress logs to stderr, artifacts to the paths given.
"""

from __future__ import annotations

import argparse
import json
import sys

from .engine import EngineError, Law, Reflexivity, Rewrite, declare_domain, start_session
from .models import (
    Classifier,
    ArgumentModel,
    ModelError,
    TrainConfig,
    evaluate,
    filter_states,
    load_equivalence_map,
    partition_lemmas,
    pr_curve_csv,
    pr_curve_for,
    recall_at_precision,
    states_for_task,
    train_argument_model,
    train_classifier,
)
from .rewrite import DatasetSpec, GenerationError, OracleError, gen_dataset_records
from .sexpr import ParseError, parse_sexpr, print_sexpr
from .synthesis import (
    ModelPredictor,
    SynthesisError,
    run_benchmark,
    synthesize,
    theorems_from_records,
)
from .terms import TermError, TermStore
from .traces import (
    DatasetError,
    format_table,
    histograms,
    read_dataset,
    split_by_lemma,
    write_dataset,
)

KNOWN_ERRORS = (
    TermError,
    EngineError,
    DatasetError,
    ModelError,
    GenerationError,
    OracleError,
    SynthesisError,
    ParseError,
    OSError,
    ValueError,
)


def _read_dataset(path: str):
    with open(path, encoding="utf-8") as fh:
        return read_dataset(fh.read())


def _parse_ratio(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"ratio must look like 8:1:1, got {text!r}")
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- subcommands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    store = TermStore()
    declare_domain(store)
    spec = DatasetSpec(n_train=args.train, n_test=args.test, length=args.length, seed=args.seed)
    records, manifest = gen_dataset_records(store, spec)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(write_dataset(records, store, manifest))
    lemmas = len({r.lemma for r in records})
    _log(f"wrote {len(records)} records for {lemmas} lemmas to {args.out}")
    return 0


def cmd_stats(args) -> int:
    records, store, _ = _read_dataset(args.infile)
    kind_counts, tactic_counts = histograms(records, store)
    print(format_table(kind_counts, "ast node kinds"))
    print()
    print(format_table(tactic_counts, "tactic classes"))
    return 0


def cmd_split(args) -> int:
    records, _, _ = _read_dataset(args.infile)
    split = split_by_lemma(records, ratio=_parse_ratio(args.ratio), seed=args.seed)
    out = {
        "train": list(split.train),
        "valid": list(split.valid),
        "test": list(split.test),
        "records": {
            "train": split.counts[0],
            "valid": split.counts[1],
            "test": split.counts[2],
        },
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _partitioned_states(records, manifest, task, eq_map, seed):
    toy = manifest.get("kind") == "toy"
    states, space = states_for_task(records, task, toy=toy, eq_map=eq_map)
    if toy:
        train_l, valid_l, test_l = partition_lemmas(records, seed=seed)
    else:
        split = split_by_lemma(records, seed=seed)
        train_l, valid_l, test_l = set(split.train), set(split.valid), set(split.test)
    return (
        filter_states(states, train_l),
        filter_states(states, valid_l),
        filter_states(states, test_l),
        space,
    )


def cmd_train(args) -> int:
    records, store, manifest = _read_dataset(args.infile)
    eq_map = load_equivalence_map(args.classes) if args.classes else None
    cfg = TrainConfig(
        cell=args.cell,
        dim=args.dim,
        level=args.level,
        batch_size=args.batch,
        lr=args.lr,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
    )
    train_states, valid_states, test_states, space = _partitioned_states(
        records, manifest, args.task, eq_map, args.seed
    )
    _log(
        f"task {args.task}: {len(train_states)} train / {len(valid_states)} valid / "
        f"{len(test_states)} test states"
    )
    if args.task == "arg":
        model, history = train_argument_model(store, train_states, valid_states, cfg, log=_log)
        model.save(args.out)
        curve = pr_curve_for(model, store, test_states)
        metrics = {
            "task": "arg",
            "epochs": len(history),
            "test_recall_at_p10": recall_at_precision(curve, 0.10),
            "n_test_states": len(test_states),
        }
    else:
        clf, history = train_classifier(
            store, train_states, valid_states, space, cfg, eq_map=eq_map, log=_log
        )
        clf.save(args.out)
        metrics = evaluate(clf, store, test_states)
        metrics["task"] = args.task
        metrics["epochs"] = len(history)
    _log(f"saved checkpoint to {args.out}")
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    records, store, manifest = _read_dataset(args.infile)
    arrays_meta = _checkpoint_kind(args.ckpt)
    if arrays_meta == "argument":
        model = ArgumentModel.load(args.ckpt)
        states, _ = states_for_task(records, "arg")
        states = _subset(records, states, manifest, args.subset, args.seed)
        curve = pr_curve_for(model, store, states)
        if args.pr_out:
            with open(args.pr_out, "w", encoding="utf-8") as fh:
                fh.write(pr_curve_csv(curve))
        metrics = {
            "task": "arg",
            "n_states": len(states),
            "recall_at_p10": recall_at_precision(curve, 0.10),
        }
    else:
        clf = Classifier.load(args.ckpt)
        task = {"pos": "pos", "tac": "tac", "tac-generic": "tac"}[clf.space.task]
        toy = clf.space.task != "tac-generic"
        states, _ = states_for_task(records, task, toy=toy, eq_map=clf.eq_map, bins=clf.bins)
        states = _subset(records, states, manifest, args.subset, args.seed)
        metrics = evaluate(clf, store, states)
        metrics["task"] = clf.space.task
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return 0


def _checkpoint_kind(path: str) -> str:
    from .embeddings import load_checkpoint

    _, meta = load_checkpoint(path)
    return meta.get("model", "classifier")


def _subset(records, states, manifest, subset: str, seed: int):
    if subset == "all":
        return states
    if manifest.get("kind") == "toy":
        train_l, valid_l, test_l = partition_lemmas(records, seed=seed)
    else:
        split = split_by_lemma(records, seed=seed)
        train_l, valid_l, test_l = set(split.train), set(split.valid), set(split.test)
    chosen = {"train": train_l, "valid": valid_l, "test": test_l}[subset]
    return filter_states(states, chosen)


def _tactic_text(tactic) -> str:
    if isinstance(tactic, Rewrite):
        return f"rewrite {tactic.pos} {tactic.law.value}"
    if isinstance(tactic, Reflexivity):
        return "reflexivity"
    return getattr(tactic, "name", repr(tactic))


def cmd_prove(args) -> int:
    clf = Classifier.load(args.ckpt)
    store = TermStore()
    declare_domain(store)
    statement = parse_sexpr(store, args.theorem)
    predictor = ModelPredictor(clf)
    if args.interactive:
        return _interactive(store, statement, predictor)
    result = synthesize(store, statement, predictor, fallback=args.fallback)
    out = {
        "outcome": result.outcome,
        "fallback_uses": result.fallback_uses,
        "steps": [
            {"state": s.state, "tactic": _tactic_text(s.tactic), "accepted": s.accepted}
            for s in result.steps
        ],
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0 if result.completed else 1


def _interactive(store, statement, predictor) -> int:
    """Suggest-and-confirm REPL; empty input takes the suggestion."""
    session = start_session(store, statement)
    print("commands: <enter>=accept, rewrite <pos> <left|right>, reflexivity, quit")
    while not session.completed:
        sid = session.open_goals[0]
        state = session.state(sid)
        print(f"state {sid}  goal {print_sexpr(store, state.goal)}")
        suggestion = predictor.propose(store, state.ctx, state.goal)
        try:
            line = input(f"[{_tactic_text(suggestion)}]> ").strip()
        except EOFError:
            print()
            return 1
        if line == "quit":
            return 1
        if not line:
            tactic = suggestion
        else:
            words = line.split()
            if words[0] == "reflexivity" and len(words) == 1:
                tactic = Reflexivity()
            elif words[0] == "rewrite" and len(words) == 3 and words[2] in ("left", "right"):
                try:
                    tactic = Rewrite(int(words[1]), Law(words[2]))
                except ValueError:
                    print("bad position")
                    continue
            else:
                print("unrecognized tactic")
                continue
        try:
            session.apply_tactic(sid, tactic)
        except EngineError as exc:
            print(f"rejected: {exc}")
    print("proof complete")
    return 0


def cmd_bench(args) -> int:
    clf = Classifier.load(args.ckpt)
    records, store, manifest = _read_dataset(args.infile)
    theorems = theorems_from_records(store, records, lemma_prefix="thm_test_")
    report = run_benchmark(store, theorems, ModelPredictor(clf))
    with open(args.report, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    _log(f"wrote report to {args.report}")
    print(
        f"strict {report.completed_strict}/{report.n} "
        f"fallback {report.completed_fallback}/{report.n} "
        f"mean_fallback_uses {report.mean_fallback_uses:.3f} "
        f"tactic_accuracy {report.tactic_accuracy:.3f}"
    )
    return 0


def cmd_serve(args) -> int:
    from .protocol import serve

    serve()
    return 0


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proofgym", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a rewrite-domain dataset")
    p.add_argument("--train", type=int, default=400)
    p.add_argument("--test", type=int, default=50)
    p.add_argument("--length", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", help="dataset histograms")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="lemma-level split as JSON")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--ratio", default="8:1:1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--task", choices=("pos", "tac", "arg"), required=True)
    p.add_argument("--level", choices=("kernel", "mid"), default="kernel")
    p.add_argument("--cell", choices=("gru", "treelstm", "tanh"), default="gru")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--classes", help="tactic equivalence map (raw<TAB>class)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--subset", choices=("all", "train", "valid", "test"), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pr-out", help="write the PR curve CSV here (argument task)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prove", help="synthesize a proof for one theorem")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--theorem", required=True)
    p.add_argument("--fallback", action="store_true")
    p.add_argument("--interactive", action="store_true")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("bench", help="strict/fallback benchmark over test theorems")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="line protocol on stdio")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KNOWN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
