"""Small dense autodiff kernel used by every network in the package.

Values are plain numpy arrays.  A :class:`Graph` records the operations of
one forward pass; :meth:`Graph.backward` walks them in reverse creation order
and returns a :class:`Gradients` mapping for every parameter of the
:class:`ParamStore` the graph was built against.

The recurrent pieces (GRU step, additive attention, masked softmax
cross-entropy) are fused nodes with hand-written backward passes, which keeps
the Python overhead per decoded token low enough for CPU training.
"""
from __future__ import annotations

import contextlib
import json
import struct
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float32
XENT_EPS = 1e-12

MAGIC = b"ESCBA001"


class NumcoreError(ValueError):
    """Invalid argument to a numeric operation."""


class GraphStateError(RuntimeError):
    """Backward requested on a graph that was already differentiated."""


@contextlib.contextmanager
def precision(dtype):
    """Temporarily change the compute dtype (used by finite-difference checks)."""
    global DTYPE
    old = DTYPE
    DTYPE = np.dtype(dtype).type
    try:
        yield
    finally:
        DTYPE = old


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# plain numeric functions


def softmax(logits, mask=None):
    """Numerically stable softmax of a rank-1 array.

    Masked-out positions get exactly zero probability.
    """
    logits = np.asarray(logits)
    if logits.ndim != 1 or logits.size == 0:
        raise NumcoreError("softmax expects a non-empty rank-1 array")
    if mask is None:
        shifted = logits - logits.max()
        ex = np.exp(shifted)
        return ex / ex.sum()
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.shape:
        raise NumcoreError("mask shape does not match logits")
    if not mask.any():
        raise NumcoreError("softmax mask has no true entry")
    out = np.zeros_like(logits)
    sub = logits[mask]
    ex = np.exp(sub - sub.max())
    out[mask] = ex / ex.sum()
    return out


def cross_entropy(probs, target_index: int) -> float:
    probs = np.asarray(probs)
    if not 0 <= target_index < probs.shape[0]:
        raise NumcoreError(f"target index {target_index} out of range")
    return float(-np.log(probs[target_index] + XENT_EPS))


def gru_cell(x, h_prev, W, U, b):
    """One GRU step on plain arrays.

    ``W`` is (3H, E), ``U`` is (3H, H), ``b`` is (3H,) with gate blocks
    ordered update, reset, candidate.
    """
    x = np.asarray(x)
    h_prev = np.asarray(h_prev)
    H = h_prev.shape[0]
    if W.shape != (3 * H, x.shape[0]) or U.shape != (3 * H, H) or b.shape != (3 * H,):
        raise NumcoreError(
            f"GRU shape mismatch: x{x.shape} h{h_prev.shape} W{W.shape} U{U.shape} b{b.shape}"
        )
    return _gru_forward(x, h_prev, W, U, b)[0]


def _gru_forward(x, h, W, U, b):
    H = h.shape[0]
    a = W @ x + b
    zr = _sigmoid(a[: 2 * H] + U[: 2 * H] @ h)
    z, r = zr[:H], zr[H:]
    rh = r * h
    n = np.tanh(a[2 * H :] + U[2 * H :] @ rh)
    out = (1.0 - z) * h + z * n
    return out, (z, r, n, rh)


# ---------------------------------------------------------------------------
# parameter storage


class ParamStore:
    """Named weight arrays plus the optimizer step counter."""

    def __init__(self, entries=None, step_count: int = 0):
        self.entries: dict[str, np.ndarray] = {}
        self.step_count = step_count
        for name, value in (entries or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> np.ndarray:
        if name in self.entries:
            raise NumcoreError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=DTYPE)
        if arr.ndim == 0 or any(d < 1 for d in arr.shape):
            raise NumcoreError(f"parameter {name!r} needs a positive shape, got {arr.shape}")
        self.entries[name] = arr
        return arr

    def init_uniform(self, name: str, shape, rng: np.random.Generator, scale: float = 0.08):
        return self.add(name, rng.uniform(-scale, scale, size=shape))

    def init_zeros(self, name: str, shape):
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def names(self, prefix: str = "") -> list[str]:
        return [n for n in self.entries if n.startswith(prefix)]

    def copy(self, dtype=None) -> "ParamStore":
        out = ParamStore(step_count=self.step_count)
        for name, value in self.entries.items():
            out.entries[name] = np.array(value, dtype=dtype or value.dtype)
        return out

    def update(self, other: "ParamStore") -> None:
        for name, value in other.entries.items():
            if name in self.entries:
                raise NumcoreError(f"duplicate parameter name {name!r}")
            self.entries[name] = value


class Gradients(dict):
    """Parameter name -> gradient array (same shape as the parameter)."""

    def global_norm(self, names: Iterable[str] | None = None) -> float:
        keys = self.keys() if names is None else names
        return float(np.sqrt(sum(float(np.sum(np.square(self[k], dtype=np.float64))) for k in keys)))

    def clip_(self, max_norm: float, names: Iterable[str] | None = None) -> float:
        norm = self.global_norm(names)
        if norm > max_norm:
            scale = max_norm / (norm + 1e-6)
            for k in (self.keys() if names is None else names):
                self[k] = self[k] * scale
        return norm

    def accumulate(self, other: "Gradients") -> None:
        for k, g in other.items():
            if k in self:
                self[k] = self[k] + g
            else:
                self[k] = g.copy()


class Adam:
    """Adam over a fixed subset of a ParamStore."""

    def __init__(self, names: Sequence[str], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise NumcoreError("learning rate must be positive")
        self.names = list(names)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: ParamStore, grads: Gradients) -> None:
        for name in self.names:
            if name not in grads:
                raise NumcoreError(f"missing gradient for {name!r}")
            if grads[name].shape != params[name].shape:
                raise NumcoreError(f"gradient shape mismatch for {name!r}")
        self.t += 1
        params.step_count += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for name in self.names:
            g = grads[name]
            p = params.entries[name]
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= (self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)).astype(p.dtype)


def adam_step(params: ParamStore, grads: Gradients, lr: float, optimizer: Adam | None = None) -> Adam:
    """Functional wrapper: one Adam update over every entry of ``grads``' store."""
    opt = optimizer or Adam(list(params.entries), lr=lr)
    opt.step(params, grads)
    return opt


# ---------------------------------------------------------------------------
# binary container


def save_container(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write the magic, a length-prefixed JSON header, then raw little-endian payloads."""
    with open(path, "wb") as fh:
        fh.write(dumps_container(tensors, meta))


def dumps_container(tensors: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    index = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        if arr.dtype.kind == "f":
            arr = arr.astype("<f4")
            dtype = "float32"
        elif arr.dtype.kind in "iub":
            arr = arr.astype("<i4")
            dtype = "int32"
        else:
            raise NumcoreError(f"unsupported dtype {arr.dtype} for {name!r}")
        raw = np.ascontiguousarray(arr).tobytes()
        index.append({"name": name, "shape": list(arr.shape), "dtype": dtype, "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": index, "meta": meta or {}}, sort_keys=True,
                        ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(blobs)


def load_container(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        return loads_container(fh.read())


def loads_container(data: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if data[:8] != MAGIC:
        raise NumcoreError("not a checkpoint container (bad magic)")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    base = 16 + hlen
    tensors = {}
    for entry in header["tensors"]:
        dt = np.dtype("<f4") if entry["dtype"] == "float32" else np.dtype("<i4")
        count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        start = base + entry["offset"]
        arr = np.frombuffer(data, dtype=dt, count=count, offset=start).reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(np.float32 if entry["dtype"] == "float32" else np.int32)
    return tensors, header["meta"]


def save_params(path, params: ParamStore, meta: dict | None = None) -> None:
    meta = dict(meta or {})
    meta["step_count"] = params.step_count
    save_container(path, params.entries, meta)


def load_params(path) -> tuple[ParamStore, dict]:
    tensors, meta = load_container(path)
    store = ParamStore(step_count=int(meta.get("step_count", 0)))
    for name, arr in tensors.items():
        store.entries[name] = arr
    return store, meta


# ---------------------------------------------------------------------------
# recorded computation


class Node:
    __slots__ = ("value", "grad", "parents", "backward_fn", "name", "aux")

    def __init__(self, value, parents=(), backward_fn=None, name=None, aux=None):
        self.value = value
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name
        self.aux = aux

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(name={self.name!r}, shape={self.value.shape})"


def _acc(node: Node, g) -> None:
    if node.grad is None:
        node.grad = np.array(g, dtype=node.value.dtype, copy=True)
    else:
        node.grad += g


class Graph:
    """Records one forward pass over a ParamStore.

    ``graph.p(name)`` returns the leaf node for a parameter (cached, so every
    use of a weight accumulates into the same gradient).
    """

    def __init__(self, params: ParamStore):
        self.params = params
        self.nodes: list[Node] = []
        self._leaves: dict[str, Node] = {}
        self._done = False

    # leaves ---------------------------------------------------------------
    def p(self, name: str) -> Node:
        node = self._leaves.get(name)
        if node is None:
            value = self.params[name]
            if value.dtype != DTYPE:
                value = value.astype(DTYPE)
            node = Node(value, name=name)
            self._leaves[name] = node
        return node

    def const(self, value) -> Node:
        return Node(np.asarray(value, dtype=DTYPE))

    def _record(self, value, parents, backward_fn, aux=None) -> Node:
        node = Node(value, tuple(parents), backward_fn, aux=aux)
        self.nodes.append(node)
        return node

    # elementary ops ---------------------------------------------------------
    def embed(self, table: Node, index: int) -> Node:
        def bw(out):
            if table.grad is None:
                table.grad = np.zeros_like(table.value)
            table.grad[index] += out.grad

        return self._record(table.value[index].copy(), (table,), bw)

    def linear(self, W: Node, x: Node, b: Node | None = None) -> Node:
        value = W.value @ x.value
        if b is not None:
            value = value + b.value

        def bw(out):
            g = out.grad
            _acc(W, np.outer(g, x.value))
            _acc(x, W.value.T @ g)
            if b is not None:
                _acc(b, g)

        parents = (W, x) if b is None else (W, x, b)
        return self._record(value, parents, bw)

    def add(self, a: Node, b: Node) -> Node:
        def bw(out):
            _acc(a, out.grad)
            _acc(b, out.grad)

        return self._record(a.value + b.value, (a, b), bw)

    def mul(self, a: Node, b: Node) -> Node:
        def bw(out):
            _acc(a, out.grad * b.value)
            _acc(b, out.grad * a.value)

        return self._record(a.value * b.value, (a, b), bw)

    def add_n(self, nodes: Sequence[Node]) -> Node:
        if not nodes:
            raise NumcoreError("add_n needs at least one node")
        value = nodes[0].value.copy()
        for n in nodes[1:]:
            value = value + n.value

        def bw(out):
            for n in nodes:
                _acc(n, out.grad)

        return self._record(value, tuple(nodes), bw)

    def sum(self, a: Node) -> Node:
        def bw(out):
            _acc(a, np.full_like(a.value, out.grad))

        return self._record(np.asarray(a.value.sum(), dtype=a.value.dtype), (a,), bw)

    def scale(self, a: Node, k: float) -> Node:
        def bw(out):
            _acc(a, out.grad * k)

        return self._record(a.value * k, (a,), bw)

    def tanh(self, a: Node) -> Node:
        value = np.tanh(a.value)

        def bw(out):
            _acc(a, out.grad * (1.0 - value * value))

        return self._record(value, (a,), bw)

    def sigmoid(self, a: Node) -> Node:
        value = _sigmoid(a.value)

        def bw(out):
            _acc(a, out.grad * value * (1.0 - value))

        return self._record(value, (a,), bw)

    def concat(self, parts: Sequence[Node]) -> Node:
        sizes = [p.value.shape[0] for p in parts]
        value = np.concatenate([p.value for p in parts])

        def bw(out):
            start = 0
            for p, n in zip(parts, sizes):
                _acc(p, out.grad[start : start + n])
                start += n

        return self._record(value, tuple(parts), bw)

    def stack(self, rows: Sequence[Node]) -> Node:
        value = np.stack([r.value for r in rows])

        def bw(out):
            for i, r in enumerate(rows):
                _acc(r, out.grad[i])

        return self._record(value, tuple(rows), bw)

    # fused recurrent ops ----------------------------------------------------
    def gru(self, x: Node, h: Node, W: Node, U: Node, b: Node) -> Node:
        H = h.value.shape[0]
        if W.value.shape != (3 * H, x.value.shape[0]) or U.value.shape != (3 * H, H):
            raise NumcoreError("GRU shape mismatch")
        value, (z, r, n, rh) = _gru_forward(x.value, h.value, W.value, U.value, b.value)

        def bw(out):
            g = out.grad
            hv = h.value
            dn_pre = g * z * (1.0 - n * n)
            dz_pre = g * (n - hv) * z * (1.0 - z)
            drh = U.value[2 * H :].T @ dn_pre
            dr_pre = drh * hv * r * (1.0 - r)
            dzr = np.concatenate([dz_pre, dr_pre])
            da = np.concatenate([dzr, dn_pre])
            dU = np.empty_like(U.value)
            dU[: 2 * H] = np.outer(dzr, hv)
            dU[2 * H :] = np.outer(dn_pre, rh)
            _acc(W, np.outer(da, x.value))
            _acc(U, dU)
            _acc(b, da)
            _acc(x, W.value.T @ da)
            _acc(h, g * (1.0 - z) + drh * r + U.value[: 2 * H].T @ dzr)

        return self._record(value, (x, h, W, U, b), bw)

    def attention(self, query: Node, keys: Node, v: Node, Wq: Node, Uk: Node) -> Node:
        """Additive attention over the rows of ``keys``.

        energies e_i = v . tanh(Wq q + Uk k_i), weights = softmax(e),
        context = sum_i weights_i k_i.  Energies and weights are kept in
        ``node.aux``.
        """
        S = keys.value
        if S.ndim != 2 or S.shape[0] == 0:
            raise NumcoreError("attention needs at least one key state")
        p = Wq.value @ query.value
        T = np.tanh(S @ Uk.value.T + p)
        e = T @ v.value
        alpha = softmax(e)
        value = alpha @ S

        def bw(out):
            g = out.grad
            dalpha = S @ g
            de = alpha * (dalpha - alpha @ dalpha)
            dpre = np.outer(de, v.value) * (1.0 - T * T)
            dp = dpre.sum(axis=0)
            _acc(v, T.T @ de)
            _acc(Uk, dpre.T @ S)
            _acc(Wq, np.outer(dp, query.value))
            _acc(query, Wq.value.T @ dp)
            _acc(keys, np.outer(alpha, g) + dpre @ Uk.value)

        return self._record(value, (query, keys, v, Wq, Uk), bw, aux={"energies": e, "weights": alpha})

    def softmax_xent(self, logits: Node, target: int, mask=None) -> Node:
        """-log(p[target] + eps) for p = softmax(logits) restricted to ``mask``."""
        probs = softmax(logits.value, mask)
        if not 0 <= target < probs.shape[0]:
            raise NumcoreError(f"target index {target} out of range")
        pt = probs[target]
        loss = np.asarray(-np.log(pt + XENT_EPS), dtype=logits.value.dtype)

        def bw(out):
            coef = pt / (pt + XENT_EPS)
            d = probs * coef
            d[target] -= coef
            _acc(logits, out.grad * d)

        return self._record(loss, (logits,), bw, aux={"probs": probs})

    def sigmoid_bce(self, logit: Node, label: float) -> Node:
        """Binary cross-entropy of a length-1 logit against a 0/1 label."""
        x = logit.value
        # log(1 + exp(-|x|)) + max(x, 0) - x * y
        loss = np.asarray((np.logaddexp(0.0, x) - x * label).sum(), dtype=x.dtype)
        prob = _sigmoid(x)

        def bw(out):
            _acc(logit, out.grad * (prob - label))

        return self._record(loss, (logit,), bw, aux={"prob": prob})

    # differentiation --------------------------------------------------------
    def backward(self, loss: Node) -> Gradients:
        if self._done:
            raise GraphStateError("backward already ran on this graph; record a new forward pass")
        if loss.value.size != 1:
            raise NumcoreError("backward needs a scalar loss")
        self._done = True
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self.nodes):
            if node.grad is not None and node.backward_fn is not None:
                node.backward_fn(node)
        grads = Gradients()
        for name, value in self.params.entries.items():
            leaf = self._leaves.get(name)
            if leaf is not None and leaf.grad is not None:
                grads[name] = leaf.grad
            else:
                grads[name] = np.zeros_like(value)
        self.nodes = []
        return grads


def finite_difference(loss_fn: Callable[[ParamStore], float], params: ParamStore,
                      names: Iterable[str], step: float = 1e-3) -> Gradients:
    """Central differences of ``loss_fn`` for each entry of the named parameters."""
    grads = Gradients()
    for name in names:
        arr = params.entries[name]
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn(params)
            flat[i] = orig - step
            down = loss_fn(params)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def relative_error(a, b) -> float:
    """Norm-wise relative error between two gradient arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom < 1e-10:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)
