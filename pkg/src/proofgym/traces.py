"""Proof-trace records, the line-delimited dataset format, splits, and stats.

A dataset file is UTF-8 text: one `#manifest <json>` line, then `#term <id>
<sexpr>` lines (ids dense from 0, in first-use order), then one JSON object
per trace record. Term ids inside records index the file's term table;
writing renumbers store ids densely and reading maps them back, so round
trips preserve structure rather than raw id values.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass

from .sexpr import parse_sexpr, print_sexpr
from .terms import App, Prod, TermId, TermStore


@dataclass(frozen=True)
class TacticArg:
    kind: str  # "local" | "global" | "term"
    value: str


@dataclass(frozen=True)
class TacticCall:
    class_name: str
    raw: str
    args: tuple[TacticArg, ...] = ()


@dataclass(frozen=True)
class TraceRecord:
    """One proof state together with the tactic applied at it."""

    lemma: str
    state_id: int
    parent_id: int | None
    ctx: tuple[tuple[str, TermId], ...]
    goal: TermId
    tactic: TacticCall
    children: tuple[int, ...]


class DatasetError(Exception):
    pass


# -- serialization ------------------------------------------------------------


def write_dataset(records: list[TraceRecord], store: TermStore, manifest: dict | None = None) -> str:
    """Render records as dataset text. Deterministic for equal inputs."""
    header = {"version": 1, "kind": "generic"}
    if manifest:
        header.update(manifest)
    remap: dict[TermId, int] = {}

    def file_id(tid: TermId) -> int:
        if tid not in remap:
            remap[tid] = len(remap)
        return remap[tid]

    body: list[str] = []
    for rec in records:
        obj = {
            "lemma": rec.lemma,
            "state_id": rec.state_id,
            "parent_id": rec.parent_id,
            "ctx": [[name, file_id(tid)] for name, tid in rec.ctx],
            "goal": file_id(rec.goal),
            "tactic": {
                "class": rec.tactic.class_name,
                "raw": rec.tactic.raw,
                "args": [{"kind": a.kind, "value": a.value} for a in rec.tactic.args],
            },
            "children": list(rec.children),
        }
        body.append(json.dumps(obj, ensure_ascii=False))

    lines = ["#manifest " + json.dumps(header, sort_keys=True, ensure_ascii=False)]
    table = sorted(remap.items(), key=lambda kv: kv[1])
    for tid, fid in table:
        lines.append(f"#term {fid} {print_sexpr(store, tid)}")
    lines.extend(body)
    return "\n".join(lines) + "\n"


def read_dataset(text: str, store: TermStore | None = None) -> tuple[list[TraceRecord], TermStore, dict]:
    """Parse dataset text into records over a store. Unknown symbols are declared."""
    if store is None:
        store = TermStore()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#manifest "):
        raise DatasetError("line 1: expected a #manifest line")
    try:
        manifest = json.loads(lines[0][len("#manifest ") :])
    except json.JSONDecodeError as exc:
        raise DatasetError(f"line 1: bad manifest json: {exc}") from exc

    table: list[TermId] = []
    records: list[TraceRecord] = []
    seen_states: set[tuple[str, int]] = set()
    in_table = True
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("#term "):
            if not in_table:
                raise DatasetError(f"line {lineno}: term table line after records")
            rest = line[len("#term ") :]
            fid_text, _, sexpr_text = rest.partition(" ")
            try:
                fid = int(fid_text)
            except ValueError:
                raise DatasetError(f"line {lineno}: bad term id {fid_text!r}") from None
            if fid != len(table):
                raise DatasetError(f"line {lineno}: term id {fid} is not dense (expected {len(table)})")
            try:
                table.append(parse_sexpr(store, sexpr_text, auto_declare=True))
            except Exception as exc:
                raise DatasetError(f"line {lineno}: {exc}") from exc
            continue
        in_table = False
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {lineno}: bad record json: {exc}") from exc
        records.append(_record_from_json(obj, table, seen_states, lineno))
    return records, store, manifest


def _record_from_json(
    obj: dict, table: list[TermId], seen: set[tuple[str, int]], lineno: int
) -> TraceRecord:
    def ref(fid: object) -> TermId:
        if not isinstance(fid, int) or not (0 <= fid < len(table)):
            raise DatasetError(f"line {lineno}: dangling term ref {fid!r}")
        return table[fid]

    try:
        lemma = obj["lemma"]
        state_id = obj["state_id"]
        key = (lemma, state_id)
        if key in seen:
            raise DatasetError(f"line {lineno}: duplicate state {state_id} in lemma {lemma!r}")
        seen.add(key)
        tac = obj["tactic"]
        return TraceRecord(
            lemma=lemma,
            state_id=state_id,
            parent_id=obj["parent_id"],
            ctx=tuple((name, ref(fid)) for name, fid in obj["ctx"]),
            goal=ref(obj["goal"]),
            tactic=TacticCall(
                class_name=tac["class"],
                raw=tac["raw"],
                args=tuple(TacticArg(a["kind"], a["value"]) for a in tac["args"]),
            ),
            children=tuple(obj["children"]),
        )
    except KeyError as exc:
        raise DatasetError(f"line {lineno}: missing record key {exc}") from None


# -- lemma-level splits --------------------------------------------------------


@dataclass(frozen=True)
class Split:
    train: tuple[str, ...]
    valid: tuple[str, ...]
    test: tuple[str, ...]
    counts: tuple[int, int, int]  # record counts per split

    def as_dict(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for part in ("train", "valid", "test"):
            for lemma in getattr(self, part):
                out[lemma] = part
        return out


def split_by_lemma(
    records: list[TraceRecord], ratio: tuple[int, int, int] = (8, 1, 1), seed: int = 0
) -> Split:
    """Partition lemmas into train/valid/test, balancing proof-state counts.

    Lemmas are shuffled by seed and greedily assigned to the split whose
    fill (current records / target records) is lowest, ties going to the
    earlier split. Deterministic for equal inputs.
    """
    if any(r <= 0 for r in ratio):
        raise DatasetError(f"ratio parts must be positive, got {ratio}")
    sizes: dict[str, int] = {}
    for rec in records:
        sizes[rec.lemma] = sizes.get(rec.lemma, 0) + 1
    lemmas = sorted(sizes)
    if len(lemmas) < 3:
        raise DatasetError(f"need at least 3 lemmas to split, got {len(lemmas)}")
    random.Random(seed).shuffle(lemmas)
    total = sum(sizes.values())
    denom = sum(ratio)
    targets = [total * r / denom for r in ratio]
    parts: list[list[str]] = [[], [], []]
    filled = [0, 0, 0]
    for lemma in lemmas:
        fill = [filled[i] / targets[i] for i in range(3)]
        pick = fill.index(min(fill))
        parts[pick].append(lemma)
        filled[pick] += sizes[lemma]
    return Split(
        train=tuple(sorted(parts[0])),
        valid=tuple(sorted(parts[1])),
        test=tuple(sorted(parts[2])),
        counts=(filled[0], filled[1], filled[2]),
    )


# -- depth bins -----------------------------------------------------------------


@dataclass(frozen=True)
class DepthBins:
    """Partition of the non-negative integers by inclusive upper bounds.

    K = len(uppers) + 1 classes, 1-based: steps <= uppers[0] is class 1, and
    so on; anything above the last bound lands in class K.
    """

    uppers: tuple[int, ...] = (5, 19)

    def __post_init__(self) -> None:
        if not self.uppers or list(self.uppers) != sorted(set(self.uppers)):
            raise DatasetError(f"bin bounds must be strictly increasing, got {self.uppers}")

    @property
    def n_classes(self) -> int:
        return len(self.uppers) + 1


def bin_depth(steps: int, bins: DepthBins | None = None) -> int:
    if steps < 0:
        raise DatasetError(f"steps must be non-negative, got {steps}")
    bins = bins or DepthBins()
    for i, upper in enumerate(bins.uppers):
        if steps <= upper:
            return i + 1
    return bins.n_classes


# -- corpus statistics ------------------------------------------------------------


def histograms(records: list[TraceRecord], store: TermStore) -> tuple[dict[str, int], dict[str, int]]:
    """(AST node kind counts, tactic class counts) over all records.

    Node kinds are counted per occurrence in the expanded tree view of each
    record's context entry types and goal.
    """
    kind_cache: dict[TermId, Counter] = {}

    def kinds(tid: TermId) -> Counter:
        got = kind_cache.get(tid)
        if got is not None:
            return got
        term = store.term(tid)
        c = Counter({type(term).__name__: 1})
        if isinstance(term, App):
            c.update(kinds(term.head))
            for child, _ in term.args:
                c.update(kinds(child))
        elif isinstance(term, Prod):
            c.update(kinds(term.ty))
            c.update(kinds(term.body))
        kind_cache[tid] = c
        return c

    nodes: Counter = Counter()
    tactics: Counter = Counter()
    for rec in records:
        for _, ty in rec.ctx:
            nodes.update(kinds(ty))
        nodes.update(kinds(rec.goal))
        tactics[rec.tactic.class_name] += 1
    return dict(nodes), dict(tactics)


def format_table(counts: dict[str, int], title: str) -> str:
    """Plot-ready text table, largest first, name-tie-broken."""
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return "\n".join([f"# {title}"] + [f"{name}\t{count}" for name, count in rows])
