"""Small reference networks with hand-written forward/backward passes.

Three architectures are registered:

    mlp2    two sigmoid hidden layers (64, 32) and a linear head
    conv-s  one 5x5 valid conv (4 channels), 2x2 average pool, linear head
    linear  a single linear layer (used by closed-form gradient oracles)

Parameters live in one flat float64 vector; the layout table maps layer
names to slices so gradients, checkpoints and selection masks all share
the same indexing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NumericError, UsageError

INIT_STREAM = 0x696E6974

_MLP_HIDDEN = (64, 32)
_CONV_CHANNELS = 4
_CONV_KERNEL = 5
_POOL = 2


@dataclass(frozen=True)
class Architecture:
    name: str
    input_shape: tuple[int, ...]
    n_classes: int

    @property
    def input_size(self) -> int:
        return int(np.prod(self.input_shape))


@dataclass(frozen=True)
class LayerSlot:
    name: str
    shape: tuple[int, ...]
    start: int
    end: int


def make_architecture(name: str, input_shape: tuple[int, ...],
                      n_classes: int) -> Architecture:
    if name not in ("mlp2", "conv-s", "linear"):
        raise UsageError(f"unknown architecture {name!r}")
    if name == "conv-s":
        if len(input_shape) != 2:
            raise UsageError("conv-s expects a 2-d single-channel input")
        if min(input_shape) < _CONV_KERNEL + _POOL - 1:
            raise UsageError(f"conv-s needs inputs of at least "
                             f"{_CONV_KERNEL + _POOL - 1} pixels per side")
    if n_classes < 2:
        raise UsageError("need at least two classes")
    return Architecture(name, tuple(input_shape), n_classes)


def _conv_dims(arch: Architecture) -> tuple[int, int, int, int]:
    h, w = arch.input_shape
    oh, ow = h - _CONV_KERNEL + 1, w - _CONV_KERNEL + 1
    if oh % _POOL or ow % _POOL:
        raise UsageError("conv-s output must tile into 2x2 pools")
    return oh, ow, oh // _POOL, ow // _POOL


def layer_layout(arch: Architecture) -> list[LayerSlot]:
    if arch.name == "mlp2":
        dims = [arch.input_size, *_MLP_HIDDEN, arch.n_classes]
        names = ["fc1", "fc2", "out"]
        shapes = []
        for i, nm in enumerate(names):
            shapes.append((f"{nm}.weight", (dims[i + 1], dims[i])))
            shapes.append((f"{nm}.bias", (dims[i + 1],)))
    elif arch.name == "conv-s":
        _, _, ph, pw = _conv_dims(arch)
        feat = _CONV_CHANNELS * ph * pw
        shapes = [
            ("conv.weight", (_CONV_CHANNELS, _CONV_KERNEL, _CONV_KERNEL)),
            ("conv.bias", (_CONV_CHANNELS,)),
            ("out.weight", (arch.n_classes, feat)),
            ("out.bias", (arch.n_classes,)),
        ]
    else:
        shapes = [
            ("out.weight", (arch.n_classes, arch.input_size)),
            ("out.bias", (arch.n_classes,)),
        ]
    slots = []
    pos = 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        slots.append(LayerSlot(name, shape, pos, pos + size))
        pos += size
    return slots


@dataclass
class ModelState:
    arch: Architecture
    flat: np.ndarray

    def view(self, slot: LayerSlot) -> np.ndarray:
        return self.flat[slot.start:slot.end].reshape(slot.shape)

    @property
    def size(self) -> int:
        return self.flat.size


def build_model(arch: Architecture, seed: int) -> ModelState:
    """Uniform +-1/sqrt(fan_in) init per layer, weight then bias order."""
    rng = np.random.default_rng(np.random.SeedSequence((INIT_STREAM, seed)))
    layout = layer_layout(arch)
    flat = np.empty(layout[-1].end, dtype=np.float64)
    model = ModelState(arch, flat)
    for slot in layout:
        if slot.name.endswith(".weight"):
            fan_in = int(np.prod(slot.shape[1:]))
            bound = 1.0 / math.sqrt(fan_in)
        # bias reuses its weight's fan-in bound, drawn right after it
        flat[slot.start:slot.end] = rng.uniform(-bound, bound,
                                                slot.end - slot.start)
    return model


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.isfinite(a).all():
            raise NumericError(f"non-finite values in layer {name!r}")


def _pool_indices(arch: Architecture) -> np.ndarray:
    h, w = arch.input_shape
    oh, ow = h - _CONV_KERNEL + 1, w - _CONV_KERNEL + 1
    idx = np.empty((oh * ow, _CONV_KERNEL * _CONV_KERNEL), dtype=np.intp)
    k = 0
    for oy in range(oh):
        for ox in range(ow):
            patch = [(oy + ky) * w + (ox + kx)
                     for ky in range(_CONV_KERNEL)
                     for kx in range(_CONV_KERNEL)]
            idx[k] = patch
            k += 1
    return idx


def _forward(model: ModelState, x: np.ndarray) -> dict:
    arch = model.arch
    layout = {s.name: s for s in layer_layout(arch)}
    acts: dict = {"x": x}
    if arch.name == "mlp2":
        w1, b1 = model.view(layout["fc1.weight"]), model.view(layout["fc1.bias"])
        w2, b2 = model.view(layout["fc2.weight"]), model.view(layout["fc2.bias"])
        w3, b3 = model.view(layout["out.weight"]), model.view(layout["out.bias"])
        acts["h1"] = _sigmoid(x @ w1.T + b1)
        acts["h2"] = _sigmoid(acts["h1"] @ w2.T + b2)
        acts["logits"] = acts["h2"] @ w3.T + b3
    elif arch.name == "conv-s":
        oh, ow, ph, pw = _conv_dims(arch)
        wc = model.view(layout["conv.weight"]).reshape(_CONV_CHANNELS, -1)
        bc = model.view(layout["conv.bias"])
        wo, bo = model.view(layout["out.weight"]), model.view(layout["out.bias"])
        idx = _pool_indices(arch)
        patches = x[:, idx]                       # (B, oh*ow, k*k)
        pre = patches @ wc.T + bc                 # (B, oh*ow, C)
        act = _sigmoid(pre)
        grid = act.reshape(-1, oh, ow, _CONV_CHANNELS)
        pooled = grid.reshape(-1, ph, _POOL, pw, _POOL,
                              _CONV_CHANNELS).mean(axis=(2, 4))
        feat = pooled.reshape(x.shape[0], -1)
        acts.update(patches=patches, act=act, feat=feat)
        acts["logits"] = feat @ wo.T + bo
    else:
        wo, bo = model.view(layout["out.weight"]), model.view(layout["out.bias"])
        acts["logits"] = x @ wo.T + bo
    acts["layout"] = layout
    return acts


def forward_logits(model: ModelState, x: np.ndarray) -> np.ndarray:
    return _forward(model, np.asarray(x, dtype=np.float64))["logits"]


def forward_backward(model: ModelState, x: np.ndarray, y: np.ndarray,
                     loss: str = "ce") -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient as a flat vector.

    loss="ce" is softmax cross-entropy on integer labels; loss="mse" is
    0.5 * sum((logits - onehot)^2) averaged over the batch.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[1] != model.arch.input_size:
        raise UsageError(f"expected inputs of shape (B, {model.arch.input_size})")
    if len(x) == 0:
        raise UsageError("empty batch")
    batch = x.shape[0]
    acts = _forward(model, x)
    logits = acts["logits"]
    layout = acts["layout"]
    _check_finite("out", logits)

    if loss == "ce":
        probs = _softmax(logits)
        picked = probs[np.arange(batch), y]
        loss_value = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
        dlogits = probs.copy()
        dlogits[np.arange(batch), y] -= 1.0
        dlogits /= batch
    elif loss == "mse":
        onehot = np.zeros_like(logits)
        onehot[np.arange(batch), y] = 1.0
        diff = logits - onehot
        loss_value = float(0.5 * np.sum(diff * diff) / batch)
        dlogits = diff / batch
    else:
        raise UsageError(f"unknown loss {loss!r}")

    grad = np.zeros_like(model.flat)

    def put(name: str, value: np.ndarray) -> None:
        _check_finite(name, value)
        slot = layout[name]
        grad[slot.start:slot.end] = value.reshape(-1)

    arch = model.arch
    if arch.name == "mlp2":
        h1, h2 = acts["h1"], acts["h2"]
        w2 = model.view(layout["fc2.weight"])
        w3 = model.view(layout["out.weight"])
        put("out.weight", dlogits.T @ h2)
        put("out.bias", dlogits.sum(axis=0))
        dh2 = (dlogits @ w3) * h2 * (1.0 - h2)
        put("fc2.weight", dh2.T @ h1)
        put("fc2.bias", dh2.sum(axis=0))
        dh1 = (dh2 @ w2) * h1 * (1.0 - h1)
        put("fc1.weight", dh1.T @ x)
        put("fc1.bias", dh1.sum(axis=0))
    elif arch.name == "conv-s":
        oh, ow, ph, pw = _conv_dims(arch)
        wo = model.view(layout["out.weight"])
        put("out.weight", dlogits.T @ acts["feat"])
        put("out.bias", dlogits.sum(axis=0))
        dfeat = (dlogits @ wo).reshape(-1, ph, pw, _CONV_CHANNELS)
        dgrid = np.repeat(np.repeat(dfeat, _POOL, axis=1), _POOL, axis=2)
        dgrid /= _POOL * _POOL
        dact = dgrid.reshape(-1, oh * ow, _CONV_CHANNELS)
        dpre = dact * acts["act"] * (1.0 - acts["act"])
        put("conv.weight",
            np.einsum("bpc,bpk->ck", dpre, acts["patches"]))
        put("conv.bias", dpre.sum(axis=(0, 1)))
    else:
        put("out.weight", dlogits.T @ x)
        put("out.bias", dlogits.sum(axis=0))

    if not math.isfinite(loss_value):
        raise NumericError("non-finite loss value")
    return loss_value, grad


def evaluate(model: ModelState, x: np.ndarray, y: np.ndarray,
             batch_size: int = 256) -> tuple[float, float]:
    """(accuracy, mean cross-entropy loss) over a dataset, batched."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if len(x) == 0:
        raise UsageError("cannot evaluate on an empty dataset")
    hits = 0
    loss_sum = 0.0
    for start in range(0, len(x), batch_size):
        xb = x[start:start + batch_size]
        yb = y[start:start + batch_size]
        logits = forward_logits(model, xb)
        probs = _softmax(logits)
        picked = np.maximum(probs[np.arange(len(xb)), yb], 1e-300)
        loss_sum += float(-np.log(picked).sum())
        hits += int((logits.argmax(axis=1) == yb).sum())
    return hits / len(x), loss_sum / len(x)
