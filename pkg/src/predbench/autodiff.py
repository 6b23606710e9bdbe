"""Small reverse-mode autodiff over numpy arrays.

Backward functions are themselves composed from the primitives here, so
gradients can be differentiated again (needed for Hessian-vector products).
Recording is controlled by a module flag: inside `no_grad()` new tensors
carry no parent links, which keeps plain training backprop cheap.
"""

import numpy as np

_RECORDING = True


class no_grad:
    """Context manager that suppresses graph recording."""

    def __enter__(self):
        global _RECORDING
        self._prev = _RECORDING
        _RECORDING = False
        return self

    def __exit__(self, *exc):
        global _RECORDING
        _RECORDING = self._prev
        return False


class Tensor:
    __slots__ = ("data", "parents", "bwd")

    def __init__(self, data, parents=None, bwd=None):
        self.data = np.asarray(data, dtype=float)
        self.parents = parents if _RECORDING else None
        self.bwd = bwd if _RECORDING else None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def const(data) -> Tensor:
    t = Tensor.__new__(Tensor)
    t.data = np.asarray(data, dtype=float)
    t.parents = None
    t.bwd = None
    return t


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else const(x)


def _unbroadcast(grad: Tensor, shape) -> Tensor:
    """Sum a broadcasted gradient back down to `shape`."""
    if grad.data.shape == shape:
        return grad
    extra = grad.data.ndim - len(shape)
    if extra > 0:
        grad = tsum(grad, axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.data.shape[i] != 1)
    if axes:
        grad = tsum(grad, axis=axes, keepdims=True)
    if grad.data.shape != shape:
        grad = reshape(grad, shape)
    return grad


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return Tensor(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return Tensor(-a.data, (a,), lambda g: (neg(g),))


def sub(a, b) -> Tensor:
    return add(a, neg(b))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return Tensor(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(mul(g, b), a.data.shape), _unbroadcast(mul(g, a), b.data.shape)),
    )


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return Tensor(
        a.data @ b.data,
        (a, b),
        lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g)),
    )


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    return Tensor(a.data.T, (a,), lambda g: (transpose(g),))


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.data.shape
    return Tensor(a.data.reshape(shape), (a,), lambda g: (reshape(g, old),))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = const((a.data > 0).astype(float))
    return Tensor(a.data * mask.data, (a,), lambda g: (mul(g, mask),))


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.tanh(a.data), (a,), None)
    out.bwd = (lambda g: (mul(g, sub(const(1.0), mul(out, out))),)) if out.parents else None
    return out


def absval(a) -> Tensor:
    a = _as_tensor(a)
    sign = const(np.sign(a.data))
    return Tensor(np.abs(a.data), (a,), lambda g: (mul(g, sign),))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.exp(a.data), (a,), None)
    out.bwd = (lambda g: (mul(g, out),)) if out.parents else None
    return out


def log(a) -> Tensor:
    a = _as_tensor(a)
    return Tensor(np.log(a.data), (a,), lambda g: (mul(g, recip(a)),))


def recip(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(1.0 / a.data, (a,), None)
    out.bwd = (lambda g: (neg(mul(g, mul(out, out))),)) if out.parents else None
    return out


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    shape = a.data.shape

    def bwd(g):
        gd = g
        if axis is not None and not keepdims:
            kd = list(shape)
            for ax in (axis if isinstance(axis, tuple) else (axis,)):
                kd[ax] = 1
            gd = reshape(g, tuple(kd))
        return (mul(gd, const(np.ones(shape))),)

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def scale(a, c: float) -> Tensor:
    return mul(a, const(float(c)))


def softmax_cross_entropy(logits: Tensor, onehot: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of `logits` (B x C) against one-hot labels."""
    m = const(logits.data.max(axis=1, keepdims=True))  # constant shift, exact grads
    z = sub(logits, m)
    lse = add(log(tsum(exp(z), axis=1, keepdims=True)), m)
    logp = sub(logits, lse)
    total = neg(tsum(mul(const(onehot), logp)))
    return scale(total, 1.0 / logits.data.shape[0])


def backprop(output: Tensor, wrt: list[Tensor], seed=None, create_graph: bool = False):
    """Gradients of `output` w.r.t. each tensor in `wrt`.

    With create_graph=True the returned gradients carry their own graph and
    can be backpropagated through again.
    """
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack = [(output, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node.parents:
            for p in node.parents:
                if id(p) not in visited:
                    stack.append((p, False))

    grads: dict[int, Tensor] = {}
    if seed is None:
        seed = const(np.ones_like(output.data))
    grads[id(output)] = _as_tensor(seed)
    wrt_ids = {id(w) for w in wrt}

    ctx = _NullCtx() if create_graph else no_grad()
    with ctx:
        for node in reversed(topo):
            if not node.parents:
                continue
            g = grads.get(id(node)) if id(node) in wrt_ids else grads.pop(id(node), None)
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.bwd(g)):
                held = grads.get(id(parent))
                grads[id(parent)] = pg if held is None else add(held, pg)
        out = []
        for w in wrt:
            g = grads.get(id(w))
            out.append(g if g is not None else const(np.zeros_like(w.data)))
    return out


class _NullCtx:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False
