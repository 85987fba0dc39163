"""Parameter-owning building blocks over the functional ops.

Modules form a tree; parameter and buffer names join with '/' and are the
checkpoint namespace, so renaming an attribute is a format change. Parameter
init is derived from (seed, full parameter name), never from creation order:
two configs that share a submodule tree get bitwise-identical weights for the
shared part, which is what makes the aux-branch on/off comparison and the
checkpoint prune test meaningful.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import ops
from .tensor import Tensor


class Module:
    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}
        self._buffers: dict[str, np.ndarray] = {}
        self._children: dict[str, Module] = {}
        self.training = True

    def add_param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(np.asarray(value, dtype=np.float32), requires_grad=True)
        self._params[name] = t
        return t

    def add_buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float32)
        self._buffers[name] = arr
        return arr

    def add_child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def __setattr__(self, name, value):
        if isinstance(value, Module):
            self.__dict__.setdefault("_children", {})[name] = value
        object.__setattr__(self, name, value)

    def named_modules(self, prefix: str = ""):
        yield prefix, self
        for name, child in self._children.items():
            sub = f"{prefix}/{name}" if prefix else name
            yield from child.named_modules(sub)

    def named_parameters(self, prefix: str = ""):
        for root, mod in self.named_modules(prefix):
            for name, p in mod._params.items():
                yield (f"{root}/{name}" if root else name), p

    def named_buffers(self, prefix: str = ""):
        for root, mod in self.named_modules(prefix):
            for name, b in mod._buffers.items():
                yield (f"{root}/{name}" if root else name), b

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def train(self, mode: bool = True) -> "Module":
        for _, mod in self.named_modules():
            mod.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ModuleList(Module):
    def __init__(self, modules=()) -> None:
        super().__init__()
        self._items: list[Module] = []
        for m in modules:
            self.append(m)

    def append(self, module: Module) -> None:
        self.add_child(str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Module:
        return self._items[i]


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, padding: int = 0, dilation: int = 1,
                 bias: bool = False) -> None:
        super().__init__()
        weight = self.add_param("weight", np.zeros((out_channels, in_channels, kernel, kernel)))
        b = self.add_param("bias", np.zeros(out_channels)) if bias else None
        self.params = ops.Conv2dParams(weight=weight, bias=b, stride=stride,
                                       padding=padding, dilation=dilation)

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.params)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, epsilon: float = 1e-5,
                 zero_init: bool = False) -> None:
        super().__init__()
        self.zero_init = zero_init
        gamma = self.add_param("gamma", np.ones(channels))
        beta = self.add_param("beta", np.zeros(channels))
        rm = self.add_buffer("running_mean", np.zeros(channels))
        rv = self.add_buffer("running_var", np.ones(channels))
        self.params = ops.BatchNormParams(gamma=gamma, beta=beta, running_mean=rm,
                                          running_var=rv, momentum=momentum, epsilon=epsilon)

    def forward(self, x: Tensor) -> Tensor:
        return ops.batch_norm(x, self.params, self.training)


def _name_rng(seed: int, name: str) -> np.random.Generator:
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    h = int.from_bytes(digest, "little")
    return np.random.default_rng([seed, h & 0xFFFFFFFF, h >> 32])


def init_parameters(model: Module, seed: int) -> None:
    """He-init conv weights, BN gamma=1 (or 0 when flagged), biases/offsets 0.

    Each parameter draws from its own (seed, name)-keyed stream.
    """
    for mod_name, mod in model.named_modules():
        if isinstance(mod, Conv2d):
            w = mod.params.weight
            fan_in = int(np.prod(w.shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            rng = _name_rng(seed, f"{mod_name}/weight")
            w.data[...] = rng.normal(0.0, std, size=w.shape).astype(np.float32)
            if mod.params.bias is not None:
                mod.params.bias.data[...] = 0.0
        elif isinstance(mod, BatchNorm2d):
            mod.params.gamma.data[...] = 0.0 if mod.zero_init else 1.0
            mod.params.beta.data[...] = 0.0
            mod.params.running_mean[...] = 0.0
            mod.params.running_var[...] = 1.0
