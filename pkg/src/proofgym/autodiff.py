"""Reverse-mode computation graphs over float64 numpy arrays.

Nodes are appended in topological order, so naive execution is a single
forward sweep and gradients are one reverse sweep with accumulation at
shared nodes. The batched path groups nodes with the same operation,
signature, and dependency depth into stacked numpy calls; it is numerically
equivalent to the naive path up to summation-order effects inside dot
products.

Graphs are re-runnable: parameter nodes read their Tensor's current value on
every forward pass, and `reseed` refreshes the per-pass constants (sampled
vectors, dropout masks) in place, so a built graph can serve many training
steps.
"""

from __future__ import annotations

import numpy as np


class GraphError(ValueError):
    pass


class NumericsError(RuntimeError):
    pass


def seeded_normal(key: tuple[int, ...], dim: int) -> np.ndarray:
    """Standard-normal vector fully determined by the integer key."""
    return np.random.default_rng(key).standard_normal(dim)


class Tensor:
    """Named trainable array with a gradient slot."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value) -> None:
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor({self.name!r}, shape={self.value.shape})"


class Node:
    __slots__ = ("nid", "op", "inputs", "shape", "depth", "aux", "value", "grad")

    def __init__(self, nid, op, inputs, shape, depth, aux) -> None:
        self.nid = nid
        self.op = op
        self.inputs = inputs
        self.shape = shape
        self.depth = depth
        self.aux = aux
        self.value: np.ndarray | None = None
        self.grad: np.ndarray | None = None


class CompGraph:
    def __init__(self, check_finite: bool = True) -> None:
        self.nodes: list[Node] = []
        self.memo: dict = {}
        self.check_finite = check_finite
        self.dropout_seed = 0
        # (nid, key suffix, dim): constants redrawn by reseed(pass_seed).
        self.pass_constants: list[tuple[int, tuple[int, ...], int]] = []
        self._params: dict[str, int] = {}
        self._buckets: list[tuple[tuple, list[int]]] | None = None

    # -- construction -------------------------------------------------------

    def _node(self, tid: int) -> Node:
        return self.nodes[tid]

    def _add(self, op: str, inputs: tuple[int, ...], shape: tuple[int, ...], aux=None) -> int:
        depth = 0
        for i in inputs:
            if not (0 <= i < len(self.nodes)):
                raise GraphError(f"input {i} does not exist")
            depth = max(depth, self.nodes[i].depth + 1)
        node = Node(len(self.nodes), op, inputs, shape, depth, aux)
        self.nodes.append(node)
        self._buckets = None
        return node.nid

    def const(self, value, key=None) -> int:
        if key is not None:
            hit = self.memo.get(("const", key))
            if hit is not None:
                return hit
        arr = np.asarray(value, dtype=np.float64)
        nid = self._add("const", (), arr.shape, None)
        self.nodes[nid].value = arr
        if key is not None:
            self.memo[("const", key)] = nid
        return nid

    def pass_const(self, pass_seed: int, suffix: tuple[int, ...], dim: int) -> int:
        """Constant redrawn from (pass_seed, *suffix) on every reseed."""
        key = ("pass_const",) + suffix
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        nid = self.const(seeded_normal((pass_seed,) + suffix, dim))
        self.pass_constants.append((nid, suffix, dim))
        self.memo[key] = nid
        return nid

    def param(self, tensor: Tensor) -> int:
        hit = self._params.get(tensor.name)
        if hit is not None:
            if self.nodes[hit].aux is not tensor:
                raise GraphError(f"two tensors named {tensor.name!r} in one graph")
            return hit
        nid = self._add("param", (), tensor.value.shape, tensor)
        self._params[tensor.name] = nid
        return nid

    def matmul(self, w: int, x: int) -> int:
        ws, xs = self.nodes[w].shape, self.nodes[x].shape
        if len(ws) != 2 or len(xs) != 1 or ws[1] != xs[0]:
            raise GraphError(f"matmul shapes {ws} @ {xs}")
        return self._add("matmul", (w, x), (ws[0],))

    def _binary(self, op: str, a: int, b: int) -> int:
        sa, sb = self.nodes[a].shape, self.nodes[b].shape
        if sa != sb:
            raise GraphError(f"{op} shapes {sa} vs {sb}")
        return self._add(op, (a, b), sa)

    def add(self, a: int, b: int) -> int:
        return self._binary("add", a, b)

    def mul(self, a: int, b: int) -> int:
        return self._binary("mul", a, b)

    def affine(self, a: int, alpha: float, beta: float) -> int:
        return self._add("affine", (a,), self.nodes[a].shape, (float(alpha), float(beta)))

    def tanh(self, a: int) -> int:
        return self._add("tanh", (a,), self.nodes[a].shape)

    def sigmoid(self, a: int) -> int:
        return self._add("sigmoid", (a,), self.nodes[a].shape)

    def concat(self, parts: list[int]) -> int:
        if not parts:
            raise GraphError("concat of nothing")
        lens = []
        for p in parts:
            shape = self.nodes[p].shape
            if len(shape) != 1:
                raise GraphError(f"concat needs vectors, got {shape}")
            lens.append(shape[0])
        return self._add("concat", tuple(parts), (sum(lens),))

    def gather(self, table: int, row: int) -> int:
        shape = self.nodes[table].shape
        if len(shape) != 2 or not (0 <= row < shape[0]):
            raise GraphError(f"gather row {row} from shape {shape}")
        return self._add("gather", (table,), (shape[1],), int(row))

    def dropout(self, a: int, rate: float) -> int:
        if not (0.0 <= rate < 1.0):
            raise GraphError(f"dropout rate {rate}")
        aux = {"rate": float(rate), "mask": None}
        return self._add("dropout", (a,), self.nodes[a].shape, aux)

    def softmax_xent(self, logits: int, label: int) -> int:
        shape = self.nodes[logits].shape
        if len(shape) != 1 or not (0 <= label < shape[0]):
            raise GraphError(f"label {label} for logits {shape}")
        return self._add("sxent", (logits,), (1,), int(label))

    def vsum(self, a: int) -> int:
        return self._add("sum", (a,), (1,))

    def vmean(self, a: int) -> int:
        if self.nodes[a].shape[0] == 0:
            raise GraphError("mean of empty vector")
        return self._add("mean", (a,), (1,))

    # -- per-pass state -------------------------------------------------------

    def reseed(self, pass_seed: int, dropout_seed: int | None = None) -> None:
        """Redraw per-pass constants and invalidate dropout masks in place."""
        for nid, suffix, dim in self.pass_constants:
            self.nodes[nid].value = seeded_normal((pass_seed,) + suffix, dim)
        if dropout_seed is not None:
            self.dropout_seed = dropout_seed
        for node in self.nodes:
            if node.op == "dropout":
                node.aux["mask"] = None

    def _mask(self, node: Node) -> np.ndarray:
        mask = node.aux["mask"]
        if mask is None:
            rate = node.aux["rate"]
            rng = np.random.default_rng((self.dropout_seed, node.nid))
            keep = rng.random(node.shape) >= rate
            mask = keep.astype(np.float64) / (1.0 - rate)
            node.aux["mask"] = mask
        return mask

    # -- grouping for the batched path ----------------------------------------

    def _signature(self, node: Node) -> tuple:
        op = node.op
        if op == "matmul":
            return (op, node.inputs[0])
        if op == "gather":
            return (op, node.inputs[0])
        if op in ("add", "mul", "tanh", "sigmoid"):
            return (op, node.shape)
        if op == "affine":
            return (op, node.shape, node.aux)
        if op == "dropout":
            return (op, node.shape, node.aux["rate"])
        if op == "concat":
            return (op, tuple(self.nodes[i].shape for i in node.inputs))
        if op in ("sum", "mean", "sxent"):
            return (op, self.nodes[node.inputs[0]].shape)
        return (op, node.nid)  # const/param execute individually

    def buckets(self) -> list[tuple[tuple, list[int]]]:
        if self._buckets is None:
            grouped: dict[tuple, list[int]] = {}
            for node in self.nodes:
                if node.op in ("const", "param"):
                    continue
                key = (node.depth,) + self._signature(node)
                grouped.setdefault(key, []).append(node.nid)
            self._buckets = [(key, grouped[key]) for key in sorted(grouped, key=lambda k: (k[0], grouped[k][0]))]
        return self._buckets


# -- execution ----------------------------------------------------------------


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    # np.where evaluates both branches; the discarded one may overflow to
    # inf/inf, so silence both the overflow and the resulting invalid-divide.
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)), np.exp(x) / (1.0 + np.exp(x)))


def _check(graph: CompGraph, arr: np.ndarray, where: str) -> None:
    if graph.check_finite and not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite value produced by {where}")


def forward_naive(graph: CompGraph) -> None:
    nodes = graph.nodes
    for node in nodes:
        op = node.op
        if op == "const":
            value = node.value
        elif op == "param":
            value = node.aux.value
        elif op == "matmul":
            value = nodes[node.inputs[0]].value @ nodes[node.inputs[1]].value
        elif op == "add":
            value = nodes[node.inputs[0]].value + nodes[node.inputs[1]].value
        elif op == "mul":
            value = nodes[node.inputs[0]].value * nodes[node.inputs[1]].value
        elif op == "affine":
            alpha, beta = node.aux
            value = alpha * nodes[node.inputs[0]].value + beta
        elif op == "tanh":
            value = np.tanh(nodes[node.inputs[0]].value)
        elif op == "sigmoid":
            value = _stable_sigmoid(nodes[node.inputs[0]].value)
        elif op == "concat":
            value = np.concatenate([nodes[i].value for i in node.inputs])
        elif op == "gather":
            value = nodes[node.inputs[0]].value[node.aux]
        elif op == "dropout":
            value = nodes[node.inputs[0]].value * graph._mask(node)
        elif op == "sxent":
            z = nodes[node.inputs[0]].value
            m = z.max()
            lse = m + np.log(np.exp(z - m).sum())
            value = np.array([lse - z[node.aux]])
        elif op == "sum":
            value = np.array([nodes[node.inputs[0]].value.sum()])
        elif op == "mean":
            value = np.array([nodes[node.inputs[0]].value.mean()])
        else:
            raise GraphError(f"unknown op {op}")
        node.value = value
        _check(graph, value, f"{op} node {node.nid}")


def forward_batched(graph: CompGraph) -> None:
    nodes = graph.nodes
    for node in nodes:
        if node.op == "param":
            node.value = node.aux.value
    for key, nids in graph.buckets():
        op = key[1]
        group = [nodes[i] for i in nids]
        if op == "matmul":
            w = nodes[group[0].inputs[0]].value
            xs = np.stack([nodes[n.inputs[1]].value for n in group])
            out = xs @ w.T
        elif op in ("add", "mul"):
            a = np.stack([nodes[n.inputs[0]].value for n in group])
            b = np.stack([nodes[n.inputs[1]].value for n in group])
            out = a + b if op == "add" else a * b
        elif op == "affine":
            alpha, beta = group[0].aux
            out = alpha * np.stack([nodes[n.inputs[0]].value for n in group]) + beta
        elif op == "tanh":
            out = np.tanh(np.stack([nodes[n.inputs[0]].value for n in group]))
        elif op == "sigmoid":
            out = _stable_sigmoid(np.stack([nodes[n.inputs[0]].value for n in group]))
        elif op == "concat":
            cols = [
                np.stack([nodes[n.inputs[j]].value for n in group])
                for j in range(len(group[0].inputs))
            ]
            out = np.concatenate(cols, axis=1)
        elif op == "gather":
            table = nodes[group[0].inputs[0]].value
            out = table[np.array([n.aux for n in group])]
        elif op == "dropout":
            a = np.stack([nodes[n.inputs[0]].value for n in group])
            masks = np.stack([graph._mask(n) for n in group])
            out = a * masks
        elif op == "sxent":
            z = np.stack([nodes[n.inputs[0]].value for n in group])
            m = z.max(axis=1, keepdims=True)
            lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
            labels = np.array([n.aux for n in group])
            out = (lse - z[np.arange(len(group)), labels])[:, None]
        elif op == "sum":
            out = np.stack([nodes[n.inputs[0]].value for n in group]).sum(axis=1, keepdims=True)
        elif op == "mean":
            out = np.stack([nodes[n.inputs[0]].value for n in group]).mean(axis=1, keepdims=True)
        else:
            raise GraphError(f"unknown op {op}")
        _check(graph, out, f"{op} bucket at depth {key[0]}")
        for i, node in enumerate(group):
            node.value = out[i]


def _acc(node: Node, grad: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.zeros(node.shape)
    node.grad += grad


def _softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def backward_naive(graph: CompGraph, loss: int) -> None:
    nodes = graph.nodes
    for node in nodes:
        node.grad = None
    root = nodes[loss]
    if root.shape != (1,):
        raise GraphError(f"loss must be a scalar, got shape {root.shape}")
    root.grad = np.ones(1)
    for node in reversed(nodes):
        if node.grad is None or node.op in ("const", "param"):
            continue
        g = node.grad
        op = node.op
        ins = [nodes[i] for i in node.inputs]
        if op == "matmul":
            w, x = ins
            _acc(w, np.outer(g, x.value))
            _acc(x, w.value.T @ g)
        elif op == "add":
            _acc(ins[0], g)
            _acc(ins[1], g)
        elif op == "mul":
            _acc(ins[0], g * ins[1].value)
            _acc(ins[1], g * ins[0].value)
        elif op == "affine":
            _acc(ins[0], node.aux[0] * g)
        elif op == "tanh":
            _acc(ins[0], g * (1.0 - node.value**2))
        elif op == "sigmoid":
            _acc(ins[0], g * node.value * (1.0 - node.value))
        elif op == "concat":
            off = 0
            for child in ins:
                width = child.shape[0]
                _acc(child, g[off : off + width])
                off += width
        elif op == "gather":
            table = ins[0]
            if table.grad is None:
                table.grad = np.zeros(table.shape)
            table.grad[node.aux] += g
        elif op == "dropout":
            _acc(ins[0], g * node.aux["mask"])
        elif op == "sxent":
            p = _softmax(ins[0].value)
            p[node.aux] -= 1.0
            _acc(ins[0], g[0] * p)
        elif op == "sum":
            _acc(ins[0], np.full(ins[0].shape, g[0]))
        elif op == "mean":
            _acc(ins[0], np.full(ins[0].shape, g[0] / ins[0].shape[0]))
        else:
            raise GraphError(f"unknown op {op}")


def backward_batched(graph: CompGraph, loss: int) -> None:
    nodes = graph.nodes
    for node in nodes:
        node.grad = None
    root = nodes[loss]
    if root.shape != (1,):
        raise GraphError(f"loss must be a scalar, got shape {root.shape}")
    root.grad = np.ones(1)
    for key, nids in reversed(graph.buckets()):
        group = [nodes[i] for i in nids if nodes[i].grad is not None]
        if not group:
            continue
        op = key[1]
        g = np.stack([n.grad for n in group])
        if op == "matmul":
            w = nodes[group[0].inputs[0]]
            xs = np.stack([nodes[n.inputs[1]].value for n in group])
            _acc(w, g.T @ xs)
            dx = g @ w.value
            for i, node in enumerate(group):
                _acc(nodes[node.inputs[1]], dx[i])
        elif op == "add":
            for i, node in enumerate(group):
                _acc(nodes[node.inputs[0]], g[i])
                _acc(nodes[node.inputs[1]], g[i])
        elif op == "mul":
            for i, node in enumerate(group):
                _acc(nodes[node.inputs[0]], g[i] * nodes[node.inputs[1]].value)
                _acc(nodes[node.inputs[1]], g[i] * nodes[node.inputs[0]].value)
        elif op == "affine":
            alpha = group[0].aux[0]
            for i, node in enumerate(group):
                _acc(nodes[node.inputs[0]], alpha * g[i])
        elif op == "tanh":
            vals = np.stack([n.value for n in group])
            da = g * (1.0 - vals**2)
            for i, node in enumerate(group):
                _acc(nodes[node.inputs[0]], da[i])
        elif op == "sigmoid":
            vals = np.stack([n.value for n in group])
            da = g * vals * (1.0 - vals)
            for i, node in enumerate(group):
                _acc(nodes[node.inputs[0]], da[i])
        elif op == "concat":
            off = 0
            for j in range(len(group[0].inputs)):
                width = nodes[group[0].inputs[j]].shape[0]
                cols = g[:, off : off + width]
                for i, node in enumerate(group):
                    _acc(nodes[node.inputs[j]], cols[i])
                off += width
        elif op == "gather":
            table = nodes[group[0].inputs[0]]
            if table.grad is None:
                table.grad = np.zeros(table.shape)
            np.add.at(table.grad, np.array([n.aux for n in group]), g)
        elif op == "dropout":
            for i, node in enumerate(group):
                _acc(nodes[node.inputs[0]], g[i] * node.aux["mask"])
        elif op == "sxent":
            z = np.stack([nodes[n.inputs[0]].value for n in group])
            p = _softmax(z)
            p[np.arange(len(group)), [n.aux for n in group]] -= 1.0
            dz = p * g
            for i, node in enumerate(group):
                _acc(nodes[node.inputs[0]], dz[i])
        elif op == "sum":
            for i, node in enumerate(group):
                child = nodes[node.inputs[0]]
                _acc(child, np.full(child.shape, g[i, 0]))
        elif op == "mean":
            for i, node in enumerate(group):
                child = nodes[node.inputs[0]]
                _acc(child, np.full(child.shape, g[i, 0] / child.shape[0]))
        else:
            raise GraphError(f"unknown op {op}")


def run_forward(graph: CompGraph, batched: bool = True) -> None:
    if batched:
        forward_batched(graph)
    else:
        forward_naive(graph)


def run_backward(graph: CompGraph, loss: int, batched: bool = True) -> dict[str, np.ndarray]:
    """Backpropagate from `loss`; returns and installs per-tensor gradients."""
    if batched:
        backward_batched(graph, loss)
    else:
        backward_naive(graph, loss)
    grads: dict[str, np.ndarray] = {}
    for node in graph.nodes:
        if node.op == "param":
            tensor: Tensor = node.aux
            grad = node.grad if node.grad is not None else np.zeros(tensor.value.shape)
            tensor.grad = grad.copy()
            grads[tensor.name] = tensor.grad
    return grads


def forward_backward(graph: CompGraph, loss: int, batched: bool = True) -> tuple[float, dict[str, np.ndarray]]:
    run_forward(graph, batched=batched)
    grads = run_backward(graph, loss, batched=batched)
    return float(graph.nodes[loss].value[0]), grads


class Adam:
    """Bias-corrected Adam over a fixed set of tensors."""

    def __init__(
        self,
        tensors: dict[str, Tensor],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.tensors = dict(tensors)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros(t.value.shape) for name, t in self.tensors.items()}
        self._v = {name: np.zeros(t.value.shape) for name, t in self.tensors.items()}

    def step(self) -> None:
        self.t += 1
        for name, tensor in self.tensors.items():
            g = tensor.grad
            if g is None:
                continue
            m = self._m[name] = self.beta1 * self._m[name] + (1 - self.beta1) * g
            v = self._v[name] = self.beta2 * self._v[name] + (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            tensor.value = tensor.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
