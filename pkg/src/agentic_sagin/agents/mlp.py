"""Small numpy MLP with hand-written reverse mode, Adam, and a flat binary format."""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"SAGMLP"
FORMAT_VERSION = 1
_ACTIVATIONS = ("identity", "tanh")


class Mlp:
    """Fully connected net: rectifier hidden layers, identity or tanh output.

    Weights are stored as ``(fan_in, fan_out)`` so ``y = x @ W + b`` works on a
    single vector or a batch of row vectors.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        out_act: str = "identity",
        rng: np.random.Generator | None = None,
        final_scale: float | None = None,
    ):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        if out_act not in _ACTIVATIONS:
            raise ValueError(f"unknown output activation {out_act!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.out_act = out_act
        rng = rng if rng is not None else np.random.default_rng(0)
        self._allocate()
        n_layers = len(self.sizes) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            bound = 1.0 / np.sqrt(w.shape[0])
            if final_scale is not None and i == n_layers - 1:
                bound = final_scale
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)

    def _allocate(self, flat: np.ndarray | None = None) -> None:
        """Lay every parameter out as a view into one contiguous vector."""
        shapes = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            shapes.extend(((fan_in, fan_out), (fan_out,)))
        self._layout, off = [], 0
        for sh in shapes:
            n = int(np.prod(sh))
            self._layout.append((off, off + n, sh))
            off += n
        self.flat = np.zeros(off) if flat is None else flat
        views = self.unflatten(self.flat)
        self.weights = views[0::2]
        self.biases = views[1::2]

    @property
    def params(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def n_params(self) -> int:
        return self.flat.size

    def copy(self) -> Mlp:
        clone = Mlp.__new__(Mlp)
        clone.sizes = self.sizes
        clone.out_act = self.out_act
        clone._allocate(self.flat.copy())
        return clone

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"expected input of size {self.sizes[0]}, got {x.shape[-1]}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self._check(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w
            h += b
            if i < last:
                np.maximum(h, 0.0, out=h)
        return np.tanh(h, out=h) if self.out_act == "tanh" else h

    __call__ = forward

    def forward_cache(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass that keeps every layer input for :meth:`backward`."""
        h = self._check(x)
        inputs = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w
            h += b
            if i < last:
                np.maximum(h, 0.0, out=h)
                inputs.append(h)
        if self.out_act == "tanh":
            np.tanh(h, out=h)
        inputs.append(h)  # final output, needed for the tanh derivative
        return h, inputs

    def backward(
        self, cache: list[np.ndarray], upstream: np.ndarray, param_grads: bool = True,
        input_grad: bool = True,
    ) -> tuple[np.ndarray | None, np.ndarray | None]:
        """Gradients of ``sum(upstream * output)`` w.r.t. parameters and input.

        Returns ``(flat_grad, dx)``; ``flat_grad`` matches the layout of
        :attr:`flat` (use :meth:`unflatten` for per-array views) and is ``None``
        when ``param_grads`` is false. ``dx`` is ``None`` when ``input_grad`` is
        false, which skips the last matrix product.
        """
        g = np.asarray(upstream, dtype=float)
        out = cache[-1]
        if self.out_act == "tanh":
            g = g * (1.0 - out * out)
        n = len(self.weights)
        flat = np.empty_like(self.flat) if param_grads else None
        views = self.unflatten(flat) if param_grads else None
        for i in range(n - 1, -1, -1):
            if param_grads:
                h_in = cache[i]
                if g.ndim == 1:
                    np.outer(h_in, g, out=views[2 * i])
                    views[2 * i + 1][...] = g
                else:
                    np.matmul(h_in.T, g, out=views[2 * i])
                    g.sum(axis=0, out=views[2 * i + 1])
            if i == 0 and not input_grad:
                break
            g = g @ self.weights[i].T
            if i > 0:
                # cache[i] is the rectified activation; zero where it was clipped.
                g *= cache[i] > 0.0
        return flat, g

    def unflatten(self, flat: np.ndarray) -> list[np.ndarray]:
        """Per-array views of a vector laid out like :attr:`flat`."""
        return [flat[a:b].reshape(sh) for a, b, sh in self._layout]

    def soft_update_from(self, online: Mlp, tau: float) -> None:
        """target <- tau * online + (1 - tau) * target, in place."""
        self.flat *= 1.0 - tau
        self.flat += tau * online.flat

    # -- serialization -----------------------------------------------------

    def to_bytes(self) -> bytes:
        header = MAGIC + struct.pack(
            "<IBI", FORMAT_VERSION, _ACTIVATIONS.index(self.out_act), len(self.sizes)
        )
        header += struct.pack(f"<{len(self.sizes)}I", *self.sizes)
        body = np.ascontiguousarray(self.flat, dtype="<f8").tobytes()
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes, expected_sizes: Sequence[int] | None = None) -> Mlp:
        if not data.startswith(MAGIC):
            raise ValueError("bad magic bytes: not an MLP parameter file")
        off = len(MAGIC)
        version, act, n = struct.unpack_from("<IBI", data, off)
        off += struct.calcsize("<IBI")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        if act >= len(_ACTIVATIONS):
            raise ValueError(f"unknown activation code {act}")
        sizes = struct.unpack_from(f"<{n}I", data, off)
        off += 4 * n
        if expected_sizes is not None and tuple(sizes) != tuple(expected_sizes):
            raise ValueError(f"layer sizes {sizes} do not match expected {tuple(expected_sizes)}")
        net = cls.__new__(cls)
        net.sizes = tuple(sizes)
        net.out_act = _ACTIVATIONS[act]
        count = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
        if len(data) - off != 8 * count:
            raise ValueError("parameter block length does not match the header")
        net._allocate(np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(float))
        off += 8 * count
        if off != len(data):
            raise ValueError("trailing bytes after parameter block")
        return net

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path, expected_sizes: Sequence[int] | None = None) -> Mlp:
        return cls.from_bytes(Path(path).read_bytes(), expected_sizes)


def mlp_forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def mlp_gradients(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Per-array parameter gradients (ordered like ``net.params``) and input gradient."""
    _, cache = net.forward_cache(x)
    flat, dx = net.backward(cache, upstream)
    return net.unflatten(flat), dx


class Adam:
    """Adam on a flat parameter vector, updated in place."""

    def __init__(self, param: np.ndarray, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.param = param
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = np.zeros_like(param)
        self.v = np.zeros_like(param)
        self.t = 0

    def step(self, grad: np.ndarray) -> None:
        """Descend along ``grad``; pass a negated gradient to ascend."""
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        self.m *= self.b1
        self.m += (1.0 - self.b1) * grad
        self.v *= self.b2
        self.v += (1.0 - self.b2) * (grad * grad)
        self.param -= (self.lr / c1) * self.m / (np.sqrt(self.v / c2) + self.eps)
