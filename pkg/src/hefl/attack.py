"""Gradient-inversion attack against the plaintext-visible update share.

The attacker model: an honest-but-curious server sees, for one client,
the sparse plaintext coordinates of a single-batch gradient (everything
the selection mask left unencrypted) plus the broadcast model weights.
It never sees ciphertext contents, so the attack interface deliberately
accepts only the visible view; encrypted chunks cannot influence it.

Reconstruction follows the deep-leakage recipe: start from a random
image, descend on the squared distance between the visible coordinates
of the true gradient and the gradient the candidate image produces.
The descent direction is obtained by central finite differences over
pixels, which sidesteps second-order backprop at the cost of
2 * n_pixels objective evaluations per step.  Labels are inferred with
the negative-row-mean rule on the final-layer weight gradient when that
slab is fully visible.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, UsageError
from .model import forward_backward, layer_layout, make_architecture
from .model.nets import Architecture, ModelState

ATTACK_STREAM = 0x61746B


@dataclass(frozen=True)
class AttackConfig:
    iterations: int = 300
    restarts: int = 5
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    fd_step: float = 1e-3
    stop_objective: float = 1e-12
    success_ratio: float = 0.1   # success when MSE < ratio * Var(target)


@dataclass(frozen=True)
class VisibleUpdate:
    """The plaintext-visible slice of one client's update."""
    indices: np.ndarray          # sorted int64 coordinates
    values: np.ndarray           # float64, aligned with indices
    total: int

    @property
    def count(self) -> int:
        return int(self.indices.size)


def visible_view(update, total: int) -> VisibleUpdate:
    """Extract the attacker-visible part of a protocol ClientUpdate."""
    if update.plaintext_sparse:
        idx, values = zip(*update.plaintext_sparse)
    else:
        idx, values = (), ()
    return VisibleUpdate(np.asarray(idx, dtype=np.int64),
                         np.asarray(values, dtype=np.float64), total)


@dataclass
class AttackResult:
    reconstruction: np.ndarray
    target: np.ndarray
    input_mse: float
    baseline_mse: float          # MSE of the chosen restart's starting point
    psnr_db: float
    success: bool
    label_true: int
    label_inferred: int | None
    label_used: int
    objective: float
    visible_count: int
    visible_total: int


def infer_label(visible: VisibleUpdate, arch: Architecture) -> int | None:
    """Negative-row-mean rule on the final-layer weight gradient.

    With cross-entropy and non-negative last-layer inputs, the gradient
    row of the true class is the only one with negative mean.  Abstains
    (None) unless every coordinate of that weight slab is visible or
    the sign pattern is ambiguous.
    """
    if visible.count == 0:
        return None
    slot = next(s for s in layer_layout(arch) if s.name == "out.weight")
    span = np.arange(slot.start, slot.end, dtype=np.int64)
    pos = np.searchsorted(visible.indices, span)
    covered = (pos < visible.count) & (
        visible.indices[np.minimum(pos, visible.count - 1)] == span)
    if not covered.all():
        return None
    grad = visible.values[pos].reshape(slot.shape)
    row_means = grad.mean(axis=1)
    negative = np.flatnonzero(row_means < 0)
    if negative.size != 1:
        return None
    return int(negative[0])


def gradient_objective(model: ModelState, x: np.ndarray, label: int,
                       visible: VisibleUpdate) -> float:
    """Sum of squared gaps on the visible gradient coordinates."""
    if visible.count == 0:
        return 0.0
    y = np.array([label], dtype=np.int64)
    _, grad = forward_backward(model, x[None], y)
    gap = grad[visible.indices] - visible.values
    return float(np.dot(gap, gap))


def _fd_gradient(model: ModelState, x: np.ndarray, label: int,
                 visible: VisibleUpdate, h: float) -> np.ndarray:
    flat = x.reshape(-1)
    out = np.empty(flat.size, dtype=np.float64)
    for j in range(flat.size):
        keep = flat[j]
        flat[j] = keep + h
        hi = gradient_objective(model, x, label, visible)
        flat[j] = keep - h
        lo = gradient_objective(model, x, label, visible)
        flat[j] = keep
        out[j] = (hi - lo) / (2.0 * h)
    return out.reshape(x.shape)


def reconstruct(model: ModelState, visible: VisibleUpdate, label: int,
                cfg: AttackConfig, seed: int,
                ) -> tuple[np.ndarray, float, np.ndarray]:
    """Adam descent on the gradient-matching objective.

    Returns (best reconstruction, its objective, its starting image).
    An empty visible view carries no signal: the objective is constant,
    so the first restart's starting image is returned unchanged.
    """
    rng = np.random.default_rng(np.random.SeedSequence((ATTACK_STREAM, seed)))
    size = model.arch.input_size
    best_x = best_init = None
    best_obj = math.inf
    for _ in range(cfg.restarts):
        init = rng.uniform(0.0, 1.0, size=size)
        if visible.count == 0:
            return init, 0.0, init.copy()
        x = init.copy()
        m = np.zeros_like(x)
        v = np.zeros_like(x)
        for t in range(1, cfg.iterations + 1):
            g = _fd_gradient(model, x, label, visible, cfg.fd_step)
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
            m_hat = m / (1.0 - cfg.beta1 ** t)
            v_hat = v / (1.0 - cfg.beta2 ** t)
            x = x - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
            np.clip(x, 0.0, 1.0, out=x)
            if gradient_objective(model, x, label, visible) \
                    < cfg.stop_objective:
                break
        obj = gradient_objective(model, x, label, visible)
        if obj < best_obj:
            best_x, best_obj, best_init = x, obj, init
        if best_obj < cfg.stop_objective:
            break
    return best_x, best_obj, best_init


def attack_example(model: ModelState, visible: VisibleUpdate,
                   target_x: np.ndarray, target_y: int,
                   cfg: AttackConfig | None = None, seed: int = 0,
                   ) -> AttackResult:
    """Run one reconstruction and score it against the ground truth.

    Uses the inferred label when the inference rule fires, otherwise
    falls back to the true label (an upper bound on attacker power;
    the result records which one was used).
    """
    cfg = cfg or AttackConfig()
    target_x = np.asarray(target_x, dtype=np.float64).reshape(-1)
    if target_x.size != model.arch.input_size:
        raise UsageError(
            f"target has {target_x.size} values, the model input wants "
            f"{model.arch.input_size}")
    inferred = infer_label(visible, model.arch)
    label = inferred if inferred is not None else int(target_y)
    x_hat, objective, init = reconstruct(model, visible, label, cfg, seed)
    mse = float(np.mean((x_hat - target_x) ** 2))
    baseline = float(np.mean((init - target_x) ** 2))
    threshold = cfg.success_ratio * float(np.var(target_x))
    psnr = 10.0 * math.log10(1.0 / mse) if mse > 0 else math.inf
    return AttackResult(x_hat, target_x, mse, baseline, psnr,
                        mse < threshold, int(target_y), inferred, label,
                        objective, visible.count, visible.total)


# ---- capture files ---------------------------------------------------------


def load_capture(path: str | Path) -> dict:
    """Read a single-step capture written by the training protocol.

    Only the plaintext-visible fields are surfaced; encrypted chunks in
    the file are ignored by design.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read capture {path}: {exc}", 0) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"capture {path} is not valid JSON: {exc}",
                         0) from None
    try:
        arch = make_architecture(raw["arch"]["name"],
                                 tuple(raw["arch"]["input_shape"]),
                                 raw["arch"]["n_classes"])
        flat = np.frombuffer(
            base64.b64decode(raw["model_flat"]), dtype="<f8").copy()
        model = ModelState(arch, flat)
        visible = VisibleUpdate(
            np.asarray(raw["visible"]["indices"], dtype=np.int64),
            np.asarray(raw["visible"]["values"], dtype=np.float64),
            int(raw["mask"]["total"]))
        x = np.asarray(raw["example"]["x"], dtype=np.float64)
        y = np.asarray(raw["example"]["y"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"capture {path} is malformed: {exc}", 0) from None
    if x.ndim < 2 or x.shape[0] != 1 or x[0].size != arch.input_size:
        raise UsageError(
            "attack captures must hold exactly one example "
            f"(got batch shape {x.shape}); rerun with batch_size 1")
    return {"model": model, "visible": visible, "x": x[0].reshape(-1),
            "y": int(y[0]),
            "round": raw["round"], "client_id": raw["client_id"],
            "encryption_ratio": raw["mask"]["ratio"]}


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Dump a [0, 1] grayscale image as binary PGM."""
    if image.ndim != 2:
        raise UsageError(f"PGM wants a 2-d image, got shape {image.shape}")
    pixels = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + pixels.tobytes())
