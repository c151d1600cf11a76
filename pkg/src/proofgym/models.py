"""Supervised prediction tasks over proof states.

Three classification targets share one architecture (embed the state, apply a
linear head, softmax): remaining-proof-depth bins, the rewrite tactic space
of the toy domain, and a configurable equivalence-classed tactic space for
ingested corpora. A fourth task scores each context entry for appearing as a
tactic argument. Training is deterministic given seeds: fixed shuffles,
per-pass seeds derived from (seed, epoch, batch), Adam updates.
"""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .autodiff import Adam, CompGraph, Tensor, forward_backward, run_forward
from .embeddings import (
    CELLS,
    EmbedConfig,
    EmbedParams,
    StateEmbedder,
    load_checkpoint,
    save_checkpoint,
)
from .engine import Law, Rewrite
from .terms import TermId, TermStore
from .traces import DepthBins, TraceRecord, bin_depth

INFERENCE_SEED = 0


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class LabeledState:
    lemma: str
    ctx: tuple[tuple[str, TermId], ...]
    goal: TermId
    label: int | None = None
    arg_flags: tuple[bool, ...] | None = None


# -- class spaces ----------------------------------------------------------------

TOY_MAX_POS = 9
_LAW_ORDER = (Law.LEFT, Law.RIGHT)


@dataclass(frozen=True)
class ClassSpace:
    task: str
    names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.names)


def encode_toy_tactic(pos: int, law: Law) -> int:
    if not (1 <= pos <= TOY_MAX_POS):
        raise ModelError(f"rewrite position {pos} outside the class space (1..{TOY_MAX_POS})")
    return (pos - 1) * 2 + _LAW_ORDER.index(law) + 1


def decode_toy_tactic(class_id: int) -> Rewrite:
    if not (1 <= class_id <= TOY_MAX_POS * 2):
        raise ModelError(f"class id {class_id} outside the toy tactic space")
    pos, law_ix = divmod(class_id - 1, 2)
    return Rewrite(pos + 1, _LAW_ORDER[law_ix])


def toy_tactic_space() -> ClassSpace:
    names = tuple(
        f"rewrite {p} {law.value}" for p in range(1, TOY_MAX_POS + 1) for law in _LAW_ORDER
    )
    return ClassSpace("tac", names)


def pos_eval_space(bins: DepthBins | None = None) -> ClassSpace:
    bins = bins or DepthBins()
    if bins.n_classes == 3:
        names: tuple[str, ...] = ("close", "medium", "far")
    else:
        names = tuple(f"bin{i}" for i in range(1, bins.n_classes + 1))
    return ClassSpace("pos", names)


def generic_tactic_space(eq_map: dict[str, str]) -> ClassSpace:
    return ClassSpace("tac-generic", tuple(sorted(set(eq_map.values()))))


def load_equivalence_map(path: str) -> dict[str, str]:
    """Tab-separated `raw_name<TAB>class_name` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ModelError(f"{path}:{lineno}: expected 'raw<TAB>class'")
            out[parts[0]] = parts[1]
    return out


def default_equivalence_map() -> dict[str, str]:
    text = resources.files("proofgym.data").joinpath("tactic_classes.tsv").read_text("utf-8")
    out: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        raw, cls = line.split("\t")
        out[raw] = cls
    return out


# -- labels from trace records ------------------------------------------------------


def group_by_lemma(records: list[TraceRecord]) -> dict[str, list[TraceRecord]]:
    out: dict[str, list[TraceRecord]] = {}
    for rec in records:
        out.setdefault(rec.lemma, []).append(rec)
    return out


def _steps_below(records: list[TraceRecord]) -> dict[int, int]:
    """Edge count below each recorded state of one lemma."""
    by_state: dict[int, TraceRecord] = {}
    for rec in records:
        if rec.state_id in by_state:
            raise ModelError(f"duplicate state {rec.state_id} in lemma {rec.lemma!r}")
        by_state[rec.state_id] = rec

    depth: dict[int, int] = {}

    def below(sid: int) -> int:
        if sid in depth:
            return depth[sid]
        rec = by_state.get(sid)
        total = 0 if rec is None else 1 + sum(below(child) for child in rec.children)
        depth[sid] = total
        return total

    for sid in by_state:
        below(sid)
    return {sid: depth[sid] for sid in by_state}


def pos_eval_states(records: list[TraceRecord], bins: DepthBins | None = None) -> list[LabeledState]:
    bins = bins or DepthBins()
    out: list[LabeledState] = []
    for lemma, recs in group_by_lemma(records).items():
        depths = _steps_below(recs)
        for rec in recs:
            out.append(
                LabeledState(lemma, rec.ctx, rec.goal, label=bin_depth(depths[rec.state_id], bins))
            )
    return out


def toy_tactic_states(records: list[TraceRecord]) -> list[LabeledState]:
    out: list[LabeledState] = []
    for rec in records:
        if rec.tactic.class_name != "rewrite":
            continue
        parts = rec.tactic.raw.split()
        if len(parts) != 3:
            raise ModelError(f"unparseable rewrite call {rec.tactic.raw!r}")
        label = encode_toy_tactic(int(parts[1]), Law(parts[2]))
        out.append(LabeledState(rec.lemma, rec.ctx, rec.goal, label=label))
    return out


def generic_tactic_states(
    records: list[TraceRecord], eq_map: dict[str, str]
) -> tuple[list[LabeledState], ClassSpace]:
    space = generic_tactic_space(eq_map)
    index = {name: i + 1 for i, name in enumerate(space.names)}
    out: list[LabeledState] = []
    for rec in records:
        base = rec.tactic.raw.split()[0] if rec.tactic.raw else rec.tactic.class_name
        cls = eq_map.get(base)
        if cls is None:
            raise ModelError(f"tactic {base!r} is not covered by the equivalence map")
        out.append(LabeledState(rec.lemma, rec.ctx, rec.goal, label=index[cls]))
    return out, space


def argument_states(records: list[TraceRecord]) -> list[LabeledState]:
    """States paired with one presence flag per context entry."""
    out: list[LabeledState] = []
    for rec in records:
        if not rec.ctx:
            continue
        locals_used = {a.value for a in rec.tactic.args if a.kind == "local"}
        flags = tuple(name in locals_used for name, _ in rec.ctx)
        out.append(LabeledState(rec.lemma, rec.ctx, rec.goal, arg_flags=flags))
    return out


def states_for_task(
    records: list[TraceRecord],
    task: str,
    toy: bool = True,
    eq_map: dict[str, str] | None = None,
    bins: DepthBins | None = None,
) -> tuple[list[LabeledState], ClassSpace | None]:
    """Labeled states plus the class space (None for the two-way argument task)."""
    if task == "pos":
        bins = bins or DepthBins()
        return pos_eval_states(records, bins), pos_eval_space(bins)
    if task == "tac":
        if toy:
            return toy_tactic_states(records), toy_tactic_space()
        return generic_tactic_states(records, eq_map or default_equivalence_map())
    if task == "arg":
        return argument_states(records), None
    raise ModelError(f"unknown task {task!r}")


def partition_lemmas(
    records: list[TraceRecord],
    test_prefix: str = "thm_test_",
    valid_fraction: float = 0.1,
    seed: int = 0,
) -> tuple[set[str], set[str], set[str]]:
    """(train, valid, test) lemma names: prefix selects test, seed carves valid."""
    names = sorted({rec.lemma for rec in records})
    test = {n for n in names if n.startswith(test_prefix)}
    rest = [n for n in names if n not in test]
    rng = random.Random(seed)
    rng.shuffle(rest)
    n_valid = max(1, round(valid_fraction * len(rest))) if len(rest) > 1 else 0
    return set(rest[n_valid:]), set(rest[:n_valid]), test


def filter_states(states: list[LabeledState], lemmas: set[str]) -> list[LabeledState]:
    return [st for st in states if st.lemma in lemmas]


# -- shared model plumbing ------------------------------------------------------------


@dataclass
class TrainConfig:
    cell: str = "gru"
    dim: int = 128
    level: str = "kernel"  # kernel | mid (mid drops implicit arguments)
    batch_size: int = 32
    lr: float = 0.001
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    dropout: float | None = None

    def __post_init__(self) -> None:
        if self.cell not in CELLS:
            raise ModelError(f"unknown cell {self.cell!r}")
        if self.level not in ("kernel", "mid"):
            raise ModelError(f"unknown level {self.level!r}")


def _pass_seed(seed: int, epoch: int, batch: int) -> int:
    return (seed * 1000 + epoch) * 100_000 + batch + 1


def _chunks(items: list, size: int) -> list[list]:
    return [items[i : i + size] for i in range(0, len(items), size)]


def _snapshot(tensors: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {name: t.value.copy() for name, t in tensors.items()}


def _restore(tensors: dict[str, Tensor], saved: dict[str, np.ndarray]) -> None:
    for name, t in tensors.items():
        t.value = saved[name].copy()


class Classifier:
    """Proof-state classifier: recursive embedding plus a linear softmax head."""

    def __init__(
        self,
        embed: EmbedParams,
        head_w: Tensor,
        head_b: Tensor,
        space: ClassSpace,
        level: str = "kernel",
        bins: DepthBins | None = None,
        dropout: float | None = None,
        eq_map: dict[str, str] | None = None,
    ) -> None:
        self.embed = embed
        self.head_w = head_w
        self.head_b = head_b
        self.space = space
        self.level = level
        self.bins = bins
        self.dropout = dropout
        self.eq_map = eq_map

    @classmethod
    def create(
        cls,
        store: TermStore,
        space: ClassSpace,
        cfg: TrainConfig,
        bins: DepthBins | None = None,
        eq_map: dict[str, str] | None = None,
    ) -> "Classifier":
        embed = EmbedParams.create(list(store.symbols()), cfg.cell, cfg.dim, seed=cfg.seed)
        rng = np.random.default_rng(cfg.seed + 1)
        scale = 1.0 / np.sqrt(cfg.dim)
        head_w = Tensor("head_W", rng.uniform(-scale, scale, (space.n_classes, cfg.dim)))
        head_b = Tensor("head_b", np.zeros(space.n_classes))
        return cls(embed, head_w, head_b, space, cfg.level, bins, cfg.dropout, eq_map)

    def tensors(self) -> dict[str, Tensor]:
        out = dict(self.embed.tensors)
        out[self.head_w.name] = self.head_w
        out[self.head_b.name] = self.head_b
        return out

    def config(self, train: bool, pass_seed: int) -> EmbedConfig:
        return EmbedConfig(
            cell=self.embed.cell,
            dim=self.embed.dim,
            drop_implicit=(self.level == "mid"),
            dropout=self.dropout,
            train=train,
            pass_seed=pass_seed,
        )

    def _logits_node(self, graph: CompGraph, emb: StateEmbedder, state: LabeledState) -> int:
        h = emb.embed_state(state.ctx, state.goal)
        return graph.add(graph.matmul(graph.param(self.head_w), h), graph.param(self.head_b))

    def predict_proba(
        self,
        store: TermStore,
        states: list[LabeledState],
        pass_seed: int = INFERENCE_SEED,
        batched: bool = True,
        chunk: int = 64,
    ) -> np.ndarray:
        rows: list[np.ndarray] = []
        for part in _chunks(states, chunk):
            graph = CompGraph()
            emb = StateEmbedder(graph, self.embed, store, self.config(train=False, pass_seed=pass_seed))
            logit_ids = [self._logits_node(graph, emb, st) for st in part]
            run_forward(graph, batched=batched)
            for nid in logit_ids:
                z = graph.nodes[nid].value
                e = np.exp(z - z.max())
                rows.append(e / e.sum())
        return np.stack(rows) if rows else np.zeros((0, self.space.n_classes))

    def predict(self, store: TermStore, state: LabeledState) -> np.ndarray:
        """Distribution over 1-based class ids for one state."""
        return self.predict_proba(store, [state])[0]

    def save(self, path: str) -> None:
        meta = {
            "model": "classifier",
            "task": self.space.task,
            "classes": list(self.space.names),
            "cell": self.embed.cell,
            "dim": self.embed.dim,
            "level": self.level,
            "dropout": self.dropout,
            "symbols": sorted(self.embed.symbol_index, key=self.embed.symbol_index.get),
            "bins": list(self.bins.uppers) if self.bins else None,
            "eq_map": self.eq_map,
        }
        save_checkpoint(path, self.tensors(), meta)

    @classmethod
    def load(cls, path: str) -> "Classifier":
        arrays, meta = load_checkpoint(path)
        if meta.get("model") != "classifier":
            raise ModelError(f"checkpoint is not a classifier: {meta.get('model')!r}")
        embed = _embed_from_arrays(arrays, meta)
        space = ClassSpace(meta["task"], tuple(meta["classes"]))
        bins = DepthBins(tuple(meta["bins"])) if meta.get("bins") else None
        return cls(
            embed,
            Tensor("head_W", arrays["head_W"]),
            Tensor("head_b", arrays["head_b"]),
            space,
            meta["level"],
            bins,
            meta.get("dropout"),
            meta.get("eq_map"),
        )


def _embed_from_arrays(arrays: dict[str, np.ndarray], meta: dict) -> EmbedParams:
    tensors = {
        name: Tensor(name, arr) for name, arr in arrays.items() if not name.startswith("head_") and not name.startswith("arg_")
    }
    symbol_index = {s: i for i, s in enumerate(meta["symbols"])}
    return EmbedParams(tensors, symbol_index, meta["cell"], meta["dim"])


def train_step(
    clf: Classifier,
    store: TermStore,
    batch: list[LabeledState],
    adam: Adam,
    pass_seed: int,
    batched: bool = True,
) -> float:
    """One Adam update on the mean cross-entropy over the batch."""
    graph = CompGraph()
    graph.dropout_seed = pass_seed + 500_000_000
    emb = StateEmbedder(graph, clf.embed, store, clf.config(train=True, pass_seed=pass_seed))
    losses = []
    for st in batch:
        if st.label is None:
            raise ModelError("state without a label in a training batch")
        logits = clf._logits_node(graph, emb, st)
        losses.append(graph.softmax_xent(logits, st.label - 1))
    loss = graph.vmean(graph.concat(losses))
    value, _ = forward_backward(graph, loss, batched=batched)
    adam.step()
    return value


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    valid_accuracy: float


def train_classifier(
    store: TermStore,
    train_states: list[LabeledState],
    valid_states: list[LabeledState],
    space: ClassSpace,
    cfg: TrainConfig,
    bins: DepthBins | None = None,
    eq_map: dict[str, str] | None = None,
    log=None,
) -> tuple[Classifier, list[EpochStats]]:
    """Minimize mean cross-entropy with Adam; early-stop on validation accuracy."""
    if not train_states:
        raise ModelError("no training states")
    present = {st.label for st in train_states}
    missing = set(range(1, space.n_classes + 1)) - present
    if missing:
        warnings.warn(f"classes absent from training labels: {sorted(missing)}")
    clf = Classifier.create(store, space, cfg, bins, eq_map)
    adam = Adam(clf.tensors(), lr=cfg.lr)
    order = list(train_states)
    rng = random.Random(cfg.seed)
    best_acc = -1.0
    best = _snapshot(clf.tensors())
    history: list[EpochStats] = []
    stale = 0
    for epoch in range(cfg.max_epochs):
        rng.shuffle(order)
        total = 0.0
        batches = _chunks(order, cfg.batch_size)
        for i, batch in enumerate(batches):
            total += train_step(clf, store, batch, adam, _pass_seed(cfg.seed, epoch, i))
        acc = evaluate(clf, store, valid_states)["accuracy"] if valid_states else 0.0
        history.append(EpochStats(epoch, total / max(len(batches), 1), acc))
        if log:
            log(f"epoch {epoch}: loss {history[-1].mean_loss:.4f} valid acc {acc:.4f}")
        if acc > best_acc:
            best_acc = acc
            best = _snapshot(clf.tensors())
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    _restore(clf.tensors(), best)
    return clf, history


def evaluate(clf: Classifier, store: TermStore, states: list[LabeledState]) -> dict:
    """Accuracy, per-class accuracy, and confusion matrix (JSON-ready)."""
    if not states:
        return {"n": 0, "accuracy": 0.0, "per_class": {}, "confusion": []}
    probs = clf.predict_proba(store, states)
    preds = probs.argmax(axis=1) + 1
    k = clf.space.n_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    for st, pred in zip(states, preds):
        confusion[st.label - 1][pred - 1] += 1
    correct = int(np.trace(confusion))
    per_class = {}
    for i, name in enumerate(clf.space.names):
        row = confusion[i].sum()
        if row:
            per_class[name] = float(confusion[i][i] / row)
    return {
        "n": len(states),
        "accuracy": correct / len(states),
        "per_class": per_class,
        "confusion": confusion.tolist(),
    }


# -- argument presence -----------------------------------------------------------------


class ArgumentModel:
    """Scores (state, context entry) pairs for argument presence."""

    def __init__(self, embed: EmbedParams, arg_w: Tensor, arg_b: Tensor, level: str = "kernel", dropout: float | None = None) -> None:
        self.embed = embed
        self.arg_w = arg_w
        self.arg_b = arg_b
        self.level = level
        self.dropout = dropout

    @classmethod
    def create(cls, store: TermStore, cfg: TrainConfig) -> "ArgumentModel":
        embed = EmbedParams.create(list(store.symbols()), cfg.cell, cfg.dim, seed=cfg.seed)
        rng = np.random.default_rng(cfg.seed + 2)
        scale = 1.0 / np.sqrt(2 * cfg.dim)
        arg_w = Tensor("arg_W", rng.uniform(-scale, scale, (2, 2 * cfg.dim)))
        arg_b = Tensor("arg_b", np.zeros(2))
        return cls(embed, arg_w, arg_b, cfg.level, cfg.dropout)

    def tensors(self) -> dict[str, Tensor]:
        out = dict(self.embed.tensors)
        out[self.arg_w.name] = self.arg_w
        out[self.arg_b.name] = self.arg_b
        return out

    def config(self, train: bool, pass_seed: int) -> EmbedConfig:
        return EmbedConfig(
            cell=self.embed.cell,
            dim=self.embed.dim,
            drop_implicit=(self.level == "mid"),
            dropout=self.dropout,
            train=train,
            pass_seed=pass_seed,
        )

    def _pair_logits(self, graph: CompGraph, emb: StateEmbedder, state: LabeledState) -> list[int]:
        env_entries, state_h = _entries_and_state(emb, state)
        out = []
        for entry_h in env_entries:
            joined = graph.concat([state_h, entry_h])
            out.append(graph.add(graph.matmul(graph.param(self.arg_w), joined), graph.param(self.arg_b)))
        return out

    def scores(
        self, store: TermStore, states: list[LabeledState], pass_seed: int = INFERENCE_SEED, chunk: int = 32
    ) -> list[np.ndarray]:
        """Per state: presence probability for each context entry."""
        out: list[np.ndarray] = []
        for part in _chunks(states, chunk):
            graph = CompGraph()
            emb = StateEmbedder(graph, self.embed, store, self.config(train=False, pass_seed=pass_seed))
            per_state = [self._pair_logits(graph, emb, st) for st in part]
            run_forward(graph, batched=True)
            for logit_ids in per_state:
                probs = []
                for nid in logit_ids:
                    z = graph.nodes[nid].value
                    e = np.exp(z - z.max())
                    probs.append(float((e / e.sum())[1]))
                out.append(np.array(probs))
        return out

    def save(self, path: str) -> None:
        meta = {
            "model": "argument",
            "task": "arg",
            "cell": self.embed.cell,
            "dim": self.embed.dim,
            "level": self.level,
            "dropout": self.dropout,
            "symbols": sorted(self.embed.symbol_index, key=self.embed.symbol_index.get),
        }
        save_checkpoint(path, self.tensors(), meta)

    @classmethod
    def load(cls, path: str) -> "ArgumentModel":
        arrays, meta = load_checkpoint(path)
        if meta.get("model") != "argument":
            raise ModelError(f"checkpoint is not an argument model: {meta.get('model')!r}")
        embed = _embed_from_arrays(arrays, meta)
        return cls(embed, Tensor("arg_W", arrays["arg_W"]), Tensor("arg_b", arrays["arg_b"]), meta["level"], meta.get("dropout"))


def _entries_and_state(emb: StateEmbedder, state: LabeledState) -> tuple[list[int], int]:
    """Entry-type embeddings plus the folded state embedding, sharing one pass."""
    state_h, entry_ids = emb.embed_state_with_entries(state.ctx, state.goal)
    return entry_ids, state_h


def train_argument_model(
    store: TermStore,
    train_states: list[LabeledState],
    valid_states: list[LabeledState],
    cfg: TrainConfig,
    max_neg_ratio: float = 4.0,
    pos_weight: float | None = None,
    log=None,
) -> tuple[ArgumentModel, list[EpochStats]]:
    """Weighted two-way training over (state, entry) pairs.

    The positive class weight defaults to the negative/positive ratio of the
    full training set; negatives are subsampled each epoch to at most
    `max_neg_ratio` per positive.
    """
    pairs = [(st, i, st.arg_flags[i]) for st in train_states for i in range(len(st.ctx))]
    n_pos = sum(1 for _, _, flag in pairs if flag)
    n_neg = len(pairs) - n_pos
    if n_pos == 0:
        raise ModelError("argument training needs at least one positive pair")
    if pos_weight is None:
        pos_weight = n_neg / n_pos
    model = ArgumentModel.create(store, cfg)
    adam = Adam(model.tensors(), lr=cfg.lr)
    rng = random.Random(cfg.seed)
    positives = [p for p in pairs if p[2]]
    negatives = [p for p in pairs if not p[2]]
    best_score = -1.0
    best = _snapshot(model.tensors())
    history: list[EpochStats] = []
    stale = 0
    for epoch in range(cfg.max_epochs):
        kept_neg = negatives
        cap = int(max_neg_ratio * len(positives))
        if len(negatives) > cap:
            kept_neg = rng.sample(negatives, cap)
        epoch_pairs = positives + kept_neg
        rng.shuffle(epoch_pairs)
        total = 0.0
        batches = _chunks(epoch_pairs, cfg.batch_size)
        for i, batch in enumerate(batches):
            total += _argument_step(model, store, batch, adam, _pass_seed(cfg.seed, epoch, i), pos_weight)
        score = average_precision(pr_curve_for(model, store, valid_states)) if valid_states else 0.0
        history.append(EpochStats(epoch, total / max(len(batches), 1), score))
        if log:
            log(f"epoch {epoch}: loss {history[-1].mean_loss:.4f} valid AP {score:.4f}")
        if score > best_score:
            best_score = score
            best = _snapshot(model.tensors())
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    _restore(model.tensors(), best)
    return model, history


def _argument_step(
    model: ArgumentModel,
    store: TermStore,
    batch: list[tuple[LabeledState, int, bool]],
    adam: Adam,
    pass_seed: int,
    pos_weight: float,
) -> float:
    graph = CompGraph()
    graph.dropout_seed = pass_seed + 500_000_000
    emb = StateEmbedder(graph, model.embed, store, model.config(train=True, pass_seed=pass_seed))
    cache: dict[int, tuple[list[int], int]] = {}
    losses = []
    for st, entry_ix, flag in batch:
        key = id(st)
        if key not in cache:
            cache[key] = _entries_and_state(emb, st)
        entry_ids, state_h = cache[key]
        joined = graph.concat([state_h, entry_ids[entry_ix]])
        logits = graph.add(graph.matmul(graph.param(model.arg_w), joined), graph.param(model.arg_b))
        xent = graph.softmax_xent(logits, 1 if flag else 0)
        losses.append(graph.affine(xent, pos_weight if flag else 1.0, 0.0))
    loss = graph.vmean(graph.concat(losses))
    value, _ = forward_backward(graph, loss)
    adam.step()
    return value


def pr_curve_for(model: ArgumentModel, store: TermStore, states: list[LabeledState]) -> list[tuple[float, float, float]]:
    scores: list[float] = []
    labels: list[bool] = []
    per_state = model.scores(store, states)
    for st, probs in zip(states, per_state):
        for i, flag in enumerate(st.arg_flags):
            scores.append(float(probs[i]))
            labels.append(bool(flag))
    return pr_curve(scores, labels)


def pr_curve(scores: list[float], labels: list[bool]) -> list[tuple[float, float, float]]:
    """(threshold, precision, recall) at each distinct score, descending.

    Empty when there are no positive labels: precision is undefined at every
    threshold.
    """
    n_pos = sum(labels)
    if n_pos == 0:
        return []
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], not labels[i]))
    out: list[tuple[float, float, float]] = []
    tp = fp = 0
    i = 0
    while i < len(order):
        threshold = scores[order[i]]
        while i < len(order) and scores[order[i]] == threshold:
            if labels[order[i]]:
                tp += 1
            else:
                fp += 1
            i += 1
        out.append((threshold, tp / (tp + fp), tp / n_pos))
    return out


def recall_at_precision(curve: list[tuple[float, float, float]], min_precision: float) -> float:
    eligible = [recall for _, precision, recall in curve if precision >= min_precision]
    return max(eligible) if eligible else 0.0


def average_precision(curve: list[tuple[float, float, float]]) -> float:
    """Area under the PR sweep (step interpolation).

    Unlike recall at a fixed precision floor, this keeps improving as the
    ranking sharpens even when the floor is below the positive base rate, so
    it is the model-selection score for argument training.
    """
    ap = 0.0
    prev_recall = 0.0
    for _, precision, recall in curve:
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def pr_curve_csv(curve: list[tuple[float, float, float]]) -> str:
    lines = ["precision,recall"]
    for _, precision, recall in curve:
        lines.append(f"{precision:.6f},{recall:.6f}")
    return "\n".join(lines) + "\n"
