"""Minimal reverse-mode autodiff over float64 numpy tensors.

Define-by-run: each op evaluates eagerly and records itself on the owning
Graph's tape, so ``gradient`` is a single reverse sweep over the tape.  The op
set is deliberately small; min/max/clip are composed from relu by callers.

Broadcasting in the elementwise ops covers the patterns the models need:
same shape, scalar against anything, and a trailing-axis vector against a
matrix (bias adds).  Gradients are summed back over broadcast axes.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, tensor


class GraphError(ValueError):
    pass


class Node:
    """One tape entry: an op kind, its evaluated value, and its inputs."""

    __slots__ = ("graph", "idx", "op", "value", "inputs", "meta", "requires_grad")

    def __init__(self, graph, idx, op, value, inputs, meta, requires_grad):
        self.graph = graph
        self.idx = idx
        self.op = op
        self.value = value
        self.inputs = inputs
        self.meta = meta
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node({self.op}, shape={self.value.shape}, idx={self.idx})"


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum ``grad`` over the axes that numpy broadcasting introduced."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Graph:
    """Tape of eagerly evaluated nodes supporting one reverse sweep."""

    def __init__(self):
        self._tape: list[Node] = []

    # -- node constructors -------------------------------------------------

    def _record(self, op, value, inputs=(), meta=None, requires_grad=None):
        if requires_grad is None:
            requires_grad = any(n.requires_grad for n in inputs)
        node = Node(self, len(self._tape), op, value, tuple(inputs), meta or {}, requires_grad)
        self._tape.append(node)
        return node

    def constant(self, data) -> Node:
        """Leaf with no gradient (inputs, targets, frozen weights)."""
        return self._record("const", tensor(data), requires_grad=False)

    def leaf(self, data) -> Node:
        """Differentiable leaf (a parameter)."""
        return self._record("leaf", tensor(data), requires_grad=True)

    def _coerce(self, x) -> Node:
        if isinstance(x, Node):
            if x.graph is not self:
                raise GraphError("node belongs to a different graph")
            return x
        return self.constant(x)

    # -- elementwise -------------------------------------------------------

    def add(self, a, b) -> Node:
        a, b = self._coerce(a), self._coerce(b)
        return self._record("add", a.value + b.value, (a, b))

    def sub(self, a, b) -> Node:
        a, b = self._coerce(a), self._coerce(b)
        return self._record("sub", a.value - b.value, (a, b))

    def mul(self, a, b) -> Node:
        a, b = self._coerce(a), self._coerce(b)
        return self._record("mul", a.value * b.value, (a, b))

    def div(self, a, b) -> Node:
        a, b = self._coerce(a), self._coerce(b)
        return self._record("div", a.value / b.value, (a, b))

    def neg(self, a) -> Node:
        a = self._coerce(a)
        return self._record("neg", -a.value, (a,))

    def relu(self, a) -> Node:
        a = self._coerce(a)
        return self._record("relu", np.maximum(a.value, 0.0), (a,))

    def exp(self, a) -> Node:
        a = self._coerce(a)
        return self._record("exp", np.exp(a.value), (a,))

    def log(self, a) -> Node:
        a = self._coerce(a)
        return self._record("log", np.log(a.value), (a,))

    # -- compositions (no new backward rules) -------------------------------

    def maximum(self, a, b) -> Node:
        """max(a, b) = a + relu(b - a)."""
        a, b = self._coerce(a), self._coerce(b)
        return self.add(a, self.relu(self.sub(b, a)))

    def minimum(self, a, b) -> Node:
        """min(a, b) = a - relu(a - b)."""
        a, b = self._coerce(a), self._coerce(b)
        return self.sub(a, self.relu(self.sub(a, b)))

    def clip(self, a, lo: float, hi: float) -> Node:
        return self.minimum(self.maximum(a, self.constant(lo)), self.constant(hi))

    # -- linear algebra ------------------------------------------------------

    def matmul(self, a, b) -> Node:
        """2-D @ 2-D, or batched 3-D @ 2-D ([n,m,k] @ [k,d] -> [n,m,d])."""
        a, b = self._coerce(a), self._coerce(b)
        if b.value.ndim != 2 or a.value.ndim not in (2, 3):
            raise GraphError(f"matmul supports [n,k]@[k,d] or [n,m,k]@[k,d], got {a.shape}@{b.shape}")
        return self._record("matmul", a.value @ b.value, (a, b))

    def softmax(self, a, axis: int = -1) -> Node:
        a = self._coerce(a)
        x = a.value
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out = e / e.sum(axis=axis, keepdims=True)
        return self._record("softmax", out, (a,), {"axis": axis})

    def sum(self, a, axis: int | None = None) -> Node:
        a = self._coerce(a)
        return self._record("sum", np.asarray(a.value.sum(axis=axis)), (a,), {"axis": axis})

    def mean(self, a, axis: int | None = None) -> Node:
        a = self._coerce(a)
        return self._record("mean", np.asarray(a.value.mean(axis=axis)), (a,), {"axis": axis})

    def concat(self, nodes, axis: int = -1) -> Node:
        nodes = [self._coerce(n) for n in nodes]
        if not nodes:
            raise GraphError("concat of zero nodes")
        value = np.concatenate([n.value for n in nodes], axis=axis)
        return self._record("concat", value, tuple(nodes), {"axis": axis})

    def gather(self, a, idx) -> Node:
        """Row lookup: a [r, d] indexed by an integer array -> a[idx].

        Backward scatter-adds into the source rows, so repeated indices
        accumulate (embedding-style lookup).
        """
        a = self._coerce(a)
        idx = np.asarray(idx, dtype=np.intp)
        if a.value.ndim != 2:
            raise GraphError("gather expects a 2-D source")
        return self._record("gather", a.value[idx], (a,), {"idx": idx})

    def attention(self, q, k, v, mask) -> Node:
        """Fused scaled-dot-product attention.

        q: [n, d], k/v: [n, m, d], mask: [n, m] with 1 for valid slots.
        Masked slots get a large negative score before the softmax; every row
        must keep at least one valid slot.
        """
        q, k, v = self._coerce(q), self._coerce(k), self._coerce(v)
        mask = np.asarray(mask, dtype=np.float64)
        n, d = q.value.shape
        if k.value.shape != v.value.shape or k.value.shape[0] != n or k.value.shape[2] != d:
            raise GraphError(f"attention shape mismatch: q{q.shape} k{k.shape} v{v.shape}")
        if mask.shape != k.value.shape[:2]:
            raise GraphError(f"attention mask shape {mask.shape} != {k.value.shape[:2]}")
        if not (mask.sum(axis=1) > 0).all():
            raise GraphError("attention mask leaves a row with no valid slot")
        scale = 1.0 / np.sqrt(d)
        scores = np.einsum("nd,nmd->nm", q.value, k.value) * scale
        scores = np.where(mask > 0, scores, -1e30)
        shifted = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        attn = e / e.sum(axis=1, keepdims=True)
        out = np.einsum("nm,nmd->nd", attn, v.value)
        return self._record("attention", out, (q, k, v), {"mask": mask, "attn": attn, "scale": scale})

    # -- reverse sweep -------------------------------------------------------

    def gradient(self, output: Node, params) -> list[Tensor]:
        """Gradients of a scalar ``output`` w.r.t. each node in ``params``.

        Params that do not influence the output get zero tensors.
        """
        output = self._coerce(output)
        if output.value.size != 1:
            raise GraphError(f"gradient needs a scalar output, got shape {output.value.shape}")
        params = list(params)
        for p in params:
            if not isinstance(p, Node) or p.graph is not self:
                raise GraphError("params must be nodes of this graph")

        grads: dict[int, np.ndarray] = {output.idx: np.ones_like(output.value)}
        for node in reversed(self._tape[: output.idx + 1]):
            g = grads.pop(node.idx, None)
            if g is None or not node.requires_grad:
                continue
            self._backward(node, g, grads)

        out = []
        for p in params:
            out.append(grads.get(p.idx, np.zeros_like(p.value)))
        return out

    def _accum(self, grads, node, g):
        if not node.requires_grad:
            return
        if node.idx in grads:
            grads[node.idx] = grads[node.idx] + g
        else:
            grads[node.idx] = g

    def _backward(self, node: Node, g: np.ndarray, grads: dict) -> None:
        op = node.op
        ins = node.inputs
        if op in ("leaf", "const"):
            # leaves keep their accumulated grad; put it back for collection
            grads[node.idx] = g
            return
        if op == "add":
            a, b = ins
            self._accum(grads, a, _unbroadcast(g, a.value.shape))
            self._accum(grads, b, _unbroadcast(g, b.value.shape))
        elif op == "sub":
            a, b = ins
            self._accum(grads, a, _unbroadcast(g, a.value.shape))
            self._accum(grads, b, _unbroadcast(-g, b.value.shape))
        elif op == "mul":
            a, b = ins
            self._accum(grads, a, _unbroadcast(g * b.value, a.value.shape))
            self._accum(grads, b, _unbroadcast(g * a.value, b.value.shape))
        elif op == "div":
            a, b = ins
            self._accum(grads, a, _unbroadcast(g / b.value, a.value.shape))
            self._accum(grads, b, _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape))
        elif op == "neg":
            self._accum(grads, ins[0], -g)
        elif op == "relu":
            a = ins[0]
            self._accum(grads, a, g * (a.value > 0.0))
        elif op == "exp":
            self._accum(grads, ins[0], g * node.value)
        elif op == "log":
            self._accum(grads, ins[0], g / ins[0].value)
        elif op == "matmul":
            a, b = ins
            if a.value.ndim == 2:
                self._accum(grads, a, g @ b.value.T)
                self._accum(grads, b, a.value.T @ g)
            else:
                self._accum(grads, a, g @ b.value.T)
                self._accum(grads, b, np.einsum("nmk,nmd->kd", a.value, g))
        elif op == "softmax":
            axis = node.meta["axis"]
            s = node.value
            inner = (g * s).sum(axis=axis, keepdims=True)
            self._accum(grads, ins[0], s * (g - inner))
        elif op == "sum":
            a = ins[0]
            axis = node.meta["axis"]
            if axis is None:
                self._accum(grads, a, np.broadcast_to(g, a.value.shape).copy())
            else:
                self._accum(grads, a, np.broadcast_to(np.expand_dims(g, axis), a.value.shape).copy())
        elif op == "mean":
            a = ins[0]
            axis = node.meta["axis"]
            if axis is None:
                n = a.value.size
                self._accum(grads, a, np.broadcast_to(g / n, a.value.shape).copy())
            else:
                n = a.value.shape[axis]
                self._accum(grads, a, np.broadcast_to(np.expand_dims(g / n, axis), a.value.shape).copy())
        elif op == "concat":
            axis = node.meta["axis"]
            sizes = [n.value.shape[axis] for n in ins]
            offsets = np.cumsum([0] + sizes)
            for child, lo, hi in zip(ins, offsets[:-1], offsets[1:]):
                idx = [slice(None)] * node.value.ndim
                idx[axis] = slice(lo, hi)
                self._accum(grads, child, g[tuple(idx)])
        elif op == "gather":
            a = ins[0]
            ga = np.zeros_like(a.value)
            np.add.at(ga, node.meta["idx"], g)
            self._accum(grads, a, ga)
        elif op == "attention":
            q, k, v = ins
            attn = node.meta["attn"]
            mask = node.meta["mask"]
            scale = node.meta["scale"]
            gv = np.einsum("nm,nd->nmd", attn, g)
            gattn = np.einsum("nd,nmd->nm", g, v.value)
            inner = (gattn * attn).sum(axis=1, keepdims=True)
            gscores = attn * (gattn - inner) * (mask > 0)
            self._accum(grads, q, np.einsum("nm,nmd->nd", gscores, k.value) * scale)
            self._accum(grads, k, np.einsum("nm,nd->nmd", gscores, q.value) * scale)
            self._accum(grads, v, gv)
        else:  # pragma: no cover - defensive
            raise GraphError(f"no backward rule for op {op!r}")


def finite_diff_check(build_fn, param: Tensor, h: float = 1e-6) -> float:
    """Max relative gap between analytic and central-difference gradients.

    ``build_fn(graph, param_node) -> scalar node`` must be deterministic.
    The relative gap uses max(1, |analytic|) in the denominator so tiny
    gradients are compared absolutely.  An empty param returns 0.0.
    """
    param = tensor(param)
    g = Graph()
    p = g.leaf(param)
    out = build_fn(g, p)
    (analytic,) = g.gradient(out, [p])

    def value_at(x: np.ndarray) -> float:
        gg = Graph()
        val = np.asarray(build_fn(gg, gg.leaf(x)).value)
        return float(val.reshape(()))

    worst = 0.0
    flat = param.reshape(-1)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + h
        f_hi = value_at(bumped.reshape(param.shape))
        bumped[i] = flat[i] - h
        f_lo = value_at(bumped.reshape(param.shape))
        numeric = (f_hi - f_lo) / (2.0 * h)
        a = float(analytic.reshape(-1)[i])
        worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst
