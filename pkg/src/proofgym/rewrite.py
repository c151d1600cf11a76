"""The algebraic rewrite benchmark.

Theorems state `forall b:G, X = b` where X is drawn from the grammar
`X ::= b | e | m | X (+) X`, built so that contracting left identities
(`e (+) Y ~> Y`) and right identities (`Y (+) m ~> Y`) reduces X to b. The
length of an expression is its leaf count; a proof of a length-L theorem is
exactly L-1 rewrites plus one reflexivity, since every rewrite removes one
leaf and one operator node.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .engine import (
    CARRIER,
    EQ_SYMBOL,
    GOAL_VAR,
    LEFT_IDENTITY,
    OP_SYMBOL,
    RIGHT_IDENTITY,
    Law,
    ProofSession,
    Reflexivity,
    Rewrite,
    Tactic,
    declare_domain,
    start_session,
)
from .terms import App, Const, TermId, TermStore, Var, op_positions, replace_at


class GenerationError(Exception):
    pass


class OracleError(Exception):
    pass


def gen_expression(store: TermStore, rng: random.Random, length: int) -> TermId:
    """One random expression with exactly `length` leaves that reduces to b.

    Recursive construction: a leaf target is emitted directly; otherwise a
    fair coin picks which side carries the target value and the other side
    gets the matching identity (m on the right of the value, or e on its
    left), with the leaf budget split uniformly between the sides.
    """
    if length < 1:
        raise GenerationError(f"length must be >= 1, got {length}")
    leaf = {
        GOAL_VAR: lambda: store.var(GOAL_VAR),
        LEFT_IDENTITY: lambda: store.const(LEFT_IDENTITY),
        RIGHT_IDENTITY: lambda: store.const(RIGHT_IDENTITY),
    }

    def build(budget: int, target: str) -> TermId:
        if budget == 1:
            return leaf[target]()
        split = rng.randint(1, budget - 1)
        if rng.random() < 0.5:
            left = build(split, target)
            right = build(budget - split, RIGHT_IDENTITY)
        else:
            left = build(split, LEFT_IDENTITY)
            right = build(budget - split, target)
        return store.app(store.const(OP_SYMBOL), [left, right])

    return build(length, GOAL_VAR)


def statement_for(store: TermStore, expr: TermId) -> TermId:
    """Wrap an expression as the closed theorem `forall b:G, expr = b`."""
    goal = store.app(store.const(EQ_SYMBOL), [expr, store.var(GOAL_VAR)])
    return store.prod(GOAL_VAR, store.const(CARRIER), goal)


def eval_word(store: TermStore, tid: TermId) -> tuple[str, ...]:
    """Denotation in the free monoid over {b}: identities vanish, (+) concatenates."""
    term = store.term(tid)
    if isinstance(term, Var):
        return (term.name,)
    if isinstance(term, Const):
        if term.symbol in (LEFT_IDENTITY, RIGHT_IDENTITY):
            return ()
        return (term.symbol,)
    if isinstance(term, App):
        head = store.term(term.head)
        if isinstance(head, Const) and head.symbol == OP_SYMBOL and len(term.args) == 2:
            return eval_word(store, term.args[0][0]) + eval_word(store, term.args[1][0])
    raise OracleError(f"no denotation for term {tid}")


def _moves(store: TermStore, expr: TermId) -> list[tuple[Rewrite, TermId]]:
    """Applicable rewrites in tie-break order: position ascending, LEFT first."""
    out: list[tuple[Rewrite, TermId]] = []
    e_id = store.const(LEFT_IDENTITY)
    m_id = store.const(RIGHT_IDENTITY)
    for pos, node_id in op_positions(store, expr, OP_SYMBOL):
        node = store.term(node_id)
        if len(node.args) != 2:
            continue
        left, right = node.args[0][0], node.args[1][0]
        if left == e_id:
            out.append((Rewrite(pos, Law.LEFT), replace_at(store, expr, pos, right, OP_SYMBOL)))
        if right == m_id:
            out.append((Rewrite(pos, Law.RIGHT), replace_at(store, expr, pos, left, OP_SYMBOL)))
    return out


def oracle_proof(store: TermStore, expr: TermId, target: TermId | None = None) -> list[Tactic]:
    """Depth-first rewrite sequence reducing `expr` to `target`, plus Reflexivity.

    Tries smaller positions first and the left law before the right one, and
    backtracks out of dead ends; the returned proof itself is straight-line.
    """
    if target is None:
        target = store.var(GOAL_VAR)
    dead: set[TermId] = set()

    def dfs(cur: TermId) -> list[Rewrite] | None:
        if cur == target:
            return []
        if cur in dead:
            return None
        for move, nxt in _moves(store, cur):
            rest = dfs(nxt)
            if rest is not None:
                return [move] + rest
        dead.add(cur)
        return None

    steps = dfs(expr)
    if steps is None:
        raise OracleError("expression does not reduce to the target")
    return list(steps) + [Reflexivity()]


def completable(store: TermStore, expr: TermId, target: TermId | None = None) -> bool:
    """Whether the oracle can rewrite `expr` all the way to `target`."""
    try:
        oracle_proof(store, expr, target)
        return True
    except OracleError:
        return False


@dataclass(frozen=True)
class TheoremSpec:
    name: str
    expr: TermId
    statement: TermId
    proof: tuple[Tactic, ...]


@dataclass(frozen=True)
class DatasetSpec:
    n_train: int
    n_test: int
    length: int
    seed: int


def gen_theorems(store: TermStore, spec: DatasetSpec) -> tuple[list[TheoremSpec], list[TheoremSpec]]:
    """Distinct theorems split in generation order: first n_train, then n_test."""
    total = spec.n_train + spec.n_test
    if spec.length < 3 and total > (1 if spec.length == 1 else 2):
        raise GenerationError(
            f"cannot draw {total} distinct expressions of length {spec.length}"
        )
    rng = random.Random(spec.seed)
    seen: set[TermId] = set()
    exprs: list[TermId] = []
    attempts = 0
    while len(exprs) < total:
        attempts += 1
        if attempts > 1000 * total:
            raise GenerationError("uniqueness sampling stalled; length too small for request")
        expr = gen_expression(store, rng, spec.length)
        if expr in seen:
            continue
        seen.add(expr)
        exprs.append(expr)

    def make(expr: TermId, name: str) -> TheoremSpec:
        return TheoremSpec(
            name=name,
            expr=expr,
            statement=statement_for(store, expr),
            proof=tuple(oracle_proof(store, expr)),
        )

    train = [make(e, f"thm_train_{i:04d}") for i, e in enumerate(exprs[: spec.n_train])]
    test = [make(e, f"thm_test_{i:04d}") for i, e in enumerate(exprs[spec.n_train :])]
    return train, test


def prove_with_oracle(store: TermStore, thm: TheoremSpec) -> ProofSession:
    """Run the oracle proof through the engine, returning the finished session."""
    session = start_session(store, thm.statement, lemma=thm.name)
    current = session.open_goals[0]
    for tactic in thm.proof:
        result = session.apply_tactic(current, tactic)
        if isinstance(result, list):
            current = result[0]
    if not session.completed:
        raise OracleError(f"oracle proof left {thm.name} incomplete")
    return session


def gen_dataset_records(store: TermStore, spec: DatasetSpec):
    """Records for all generated theorems plus the manifest describing them."""
    train, test = gen_theorems(store, spec)
    records = []
    for thm in train + test:
        records.extend(prove_with_oracle(store, thm).export_tree())
    manifest = {
        "kind": "toy",
        "n_train": spec.n_train,
        "n_test": spec.n_test,
        "length": spec.length,
        "seed": spec.seed,
    }
    return records, manifest


def enumerate_expressions(store: TermStore, length: int) -> set[TermId]:
    """Every expression the generator can emit at this length (oracle use)."""
    leafset = {
        GOAL_VAR: {store.var(GOAL_VAR)},
        LEFT_IDENTITY: {store.const(LEFT_IDENTITY)},
        RIGHT_IDENTITY: {store.const(RIGHT_IDENTITY)},
    }
    cache: dict[tuple[int, str], set[TermId]] = {}

    def all_of(budget: int, target: str) -> set[TermId]:
        if budget == 1:
            return set(leafset[target])
        key = (budget, target)
        if key in cache:
            return cache[key]
        out: set[TermId] = set()
        op = store.const(OP_SYMBOL)
        for split in range(1, budget):
            for left in all_of(split, target):
                for right in all_of(budget - split, RIGHT_IDENTITY):
                    out.add(store.app(op, [left, right]))
            for left in all_of(split, LEFT_IDENTITY):
                for right in all_of(budget - split, target):
                    out.add(store.app(op, [left, right]))
        cache[key] = out
        return out

    return all_of(length, GOAL_VAR)
