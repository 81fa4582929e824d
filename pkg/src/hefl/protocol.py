"""Federated averaging with selectively encrypted pseudo-gradients.

One round:

    1. the server scores the current global state and broadcasts a
       shared selection mask (top-r fraction of coordinates),
    2. every client trains locally, forms the pseudo-gradient
       (w_global - w_local), clips it, encrypts the masked coordinates
       in slot-packed chunks and sends the rest as sparse plaintext,
    3. the server sums ciphertexts client-wise, multiplies by 1/K,
       rescales once, decrypts, and merges with the plaintext mean,
    4. the global model moves by the aggregated update and the round is
       logged.

All randomness is derived from (seed, round, client), so a resumed run
reproduces an uninterrupted one bit for bit.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import ckks
from .errors import (ConfigError, DepthExhaustedError, ProtocolError,
                     UsageError)
from .model import (Dataset, SgdState, build_model, evaluate,
                    forward_backward, layer_layout, load_cifar10_batches,
                    make_architecture, make_toy_dataset, partition_iid,
                    sgd_step)
from .model.nets import Architecture, ModelState
from .sensitivity import SelectionMask, jacobian_map, magnitude_map, select_top_r

CLIENT_STREAM = 0x636C69
KEY_SEED_STREAM = 0x6B7365

# Pseudo-gradient convention: the server applies the mean update with a
# unit step, so the global model lands on the average of client models.
GLOBAL_ETA = 1.0

CHECKPOINT_MAGIC = "hefl-checkpoint"
_STAGES = ("train", "encrypt", "aggregate_he", "aggregate_plain", "decrypt")


@dataclass(frozen=True)
class FlConfig:
    clients: int = 3
    rounds: int = 10
    encryption_ratio: float = 0.1
    sensitivity_method: str = "magnitude"
    local_epochs: int = 2
    batch_size: int = 8
    ckks_profile: str = "test-small"
    seed: int = 0
    dataset: str = "toy"
    arch: str = "mlp2"
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 4e-4
    lr_step_rounds: int = 10
    lr_gamma: float = 0.1
    clip: float = 8.0
    train_size: int = 1536
    test_size: int = 512
    n_classes: int = 10
    input_shape: tuple[int, ...] = (8, 8)
    checkpoint_every: int = 5
    single_step: bool = False
    calibration_batches: int = 2

    def validate(self) -> None:
        if self.clients < 1:
            raise ConfigError("need at least one client")
        if self.rounds < 1:
            raise ConfigError("need at least one round")
        if not 0.0 <= self.encryption_ratio <= 1.0:
            raise ConfigError(
                f"encryption_ratio {self.encryption_ratio} outside [0, 1]")
        if self.sensitivity_method not in ("magnitude", "jacobian"):
            raise ConfigError(
                f"unknown sensitivity_method {self.sensitivity_method!r}")
        if self.local_epochs < 1 or self.batch_size < 1:
            raise ConfigError("local_epochs and batch_size must be positive")
        if self.lr <= 0 or self.clip <= 0:
            raise ConfigError("lr and clip must be positive")
        if self.arch not in ("mlp2", "conv-s", "linear"):
            raise ConfigError(f"unknown arch {self.arch!r}")
        if self.dataset != "toy" and not self.dataset.startswith("cifar10:"):
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        try:
            ckks.get_profile(self.ckks_profile)
        except UsageError as exc:
            raise ConfigError(str(exc)) from None

    def digest(self) -> str:
        payload = {k: list(v) if isinstance(v, tuple) else v
                   for k, v in asdict(self).items()}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def config_from_dict(raw: dict, overrides: dict | None = None) -> FlConfig:
    """Build a config with precedence overrides > raw > defaults."""
    known = {f.name for f in FlConfig.__dataclass_fields__.values()}
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "input_shape" in merged:
        merged["input_shape"] = tuple(merged["input_shape"])
    try:
        cfg = FlConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def load_config(path: str | Path, overrides: dict | None = None) -> FlConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(raw, overrides)


@dataclass
class ClientUpdate:
    client_id: int
    round_index: int                     # 1-based round this update belongs to
    mask_fingerprint: str
    encrypted_chunks: list[ckks.Ciphertext]
    plaintext_sparse: list[tuple[int, float]]
    sample_count: int
    local_loss: float


@dataclass
class RoundRecord:
    round_index: int
    encryption_ratio: float
    sensitivity_method: str
    mask_count: int
    mask_fingerprint: str
    train_accuracy: float
    test_accuracy: float
    avg_train_loss: float
    wall_ms: dict[str, float]

    def to_json(self) -> str:
        body = {
            "round": self.round_index,
            "encryption_ratio": self.encryption_ratio,
            "sensitivity_method": self.sensitivity_method,
            "mask_count": self.mask_count,
            "mask_fingerprint": self.mask_fingerprint,
            "train_accuracy": round(self.train_accuracy, 10),
            "test_accuracy": round(self.test_accuracy, 10),
            "avg_train_loss": round(self.avg_train_loss, 10),
            "wall_ms": {k: round(v, 3) for k, v in self.wall_ms.items()},
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"))


@dataclass
class ExperimentState:
    config: FlConfig
    arch: Architecture
    model: ModelState
    ctx: ckks.CkksContext
    secret_key: ckks.SecretKey
    public_key: ckks.PublicKey
    shards: list[Dataset]
    train_all: Dataset
    test: Dataset
    calibration: list[tuple[np.ndarray, np.ndarray]]
    round_index: int = 0                 # completed rounds
    prev_update: np.ndarray | None = None


def _load_dataset(cfg: FlConfig) -> tuple[Dataset, Dataset, Dataset]:
    if cfg.dataset == "toy":
        shape = tuple(cfg.input_shape)
        train = make_toy_dataset(cfg.train_size, cfg.seed, cfg.n_classes,
                                 shape, split=0)
        test = make_toy_dataset(cfg.test_size, cfg.seed, cfg.n_classes,
                                shape, split=1)
        calib = make_toy_dataset(
            max(cfg.calibration_batches * cfg.batch_size, 1), cfg.seed,
            cfg.n_classes, shape, split=2)
        return train, test, calib
    paths = sorted(Path().glob(cfg.dataset.split(":", 1)[1]))
    full = load_cifar10_batches(list(paths))
    n_test = max(1, len(full) // 6)
    n_calib = max(1, cfg.calibration_batches * cfg.batch_size)
    test = Dataset(full.x[:n_test], full.y[:n_test], full.n_classes,
                   full.input_shape)
    calib = Dataset(full.x[n_test:n_test + n_calib],
                    full.y[n_test:n_test + n_calib], full.n_classes,
                    full.input_shape)
    rest = slice(n_test + n_calib, None)
    train = Dataset(full.x[rest], full.y[rest], full.n_classes,
                    full.input_shape)
    return train, test, calib


def init_experiment(cfg: FlConfig) -> ExperimentState:
    cfg.validate()
    train, test, calib = _load_dataset(cfg)
    if cfg.dataset == "toy":
        arch = make_architecture(cfg.arch, tuple(cfg.input_shape),
                                 cfg.n_classes)
    else:
        shape = train.input_shape if cfg.arch == "conv-s" else \
            (int(np.prod(train.input_shape)),)
        arch = make_architecture(cfg.arch, shape, train.n_classes)
    model = build_model(arch, cfg.seed)
    params = ckks.get_profile(cfg.ckks_profile)
    ctx = ckks.get_context(params)
    sk, pk = ckks.keygen(ctx, _mix(KEY_SEED_STREAM, cfg.seed))
    shards = partition_iid(train, cfg.clients, cfg.seed)
    bs = cfg.batch_size
    batches = [(calib.x[i:i + bs], calib.y[i:i + bs])
               for i in range(0, len(calib), bs)]
    return ExperimentState(cfg, arch, model, ctx, sk, pk, shards, train,
                           test, batches)


def _mix(*parts: int) -> int:
    h = hashlib.sha256(struct.pack(f"<{len(parts)}q", *parts)).digest()
    return int.from_bytes(h[:8], "little")


def round_mask(state: ExperimentState) -> SelectionMask:
    """Shared per-round mask from the broadcast global state."""
    cfg = state.config
    if cfg.sensitivity_method == "jacobian":
        scores = jacobian_map(state.model, state.calibration)
    elif state.prev_update is None:
        scores = magnitude_map(state.model.flat)
    else:
        scores = magnitude_map(state.prev_update)
    return select_top_r(scores, cfg.encryption_ratio)


def local_update_vector(state: ExperimentState,
                        client_id: int) -> tuple[np.ndarray, float]:
    """One client's clipped update for the upcoming round.

    Normal mode: local SGD epochs, then the pseudo-gradient
    (w_global - w_local) / GLOBAL_ETA.  Single-step mode: the raw
    gradient of one batch, for attack evaluation.
    """
    cfg = state.config
    if not 0 <= client_id < cfg.clients:
        raise UsageError(f"client_id {client_id} out of range")
    shard = state.shards[client_id]
    rnd = state.round_index + 1
    rng = np.random.default_rng(np.random.SeedSequence(
        (CLIENT_STREAM, cfg.seed, rnd, client_id)))

    if cfg.single_step:
        take = min(cfg.batch_size, len(shard))
        pick = rng.permutation(len(shard))[:take]
        local_loss, grad = forward_backward(state.model, shard.x[pick],
                                            shard.y[pick])
        update = grad
    else:
        local = ModelState(state.arch, state.model.flat.copy())
        opt = SgdState(base_lr=cfg.lr, momentum=cfg.momentum,
                       weight_decay=cfg.weight_decay,
                       step_size=cfg.lr_step_rounds, gamma=cfg.lr_gamma,
                       epoch=state.round_index)
        local_loss = 0.0
        steps = 0
        for _ in range(cfg.local_epochs):
            order = rng.permutation(len(shard))
            for s in range(0, len(shard), cfg.batch_size):
                sel = order[s:s + cfg.batch_size]
                loss, grad = forward_backward(local, shard.x[sel],
                                              shard.y[sel])
                local = sgd_step(local, grad, opt)
                local_loss += loss
                steps += 1
        local_loss /= max(steps, 1)
        update = (state.model.flat - local.flat) / GLOBAL_ETA
    return np.clip(update, -cfg.clip, cfg.clip), float(local_loss)


def client_update(state: ExperimentState, client_id: int,
                  mask: SelectionMask) -> tuple[ClientUpdate, dict[str, float]]:
    cfg = state.config
    rnd = state.round_index + 1

    t0 = time.perf_counter()
    update, local_loss = local_update_vector(state, client_id)
    train_s = time.perf_counter() - t0

    t1 = time.perf_counter()
    slot = state.ctx.params.slot_count
    selected = update[mask.indices]
    chunks = []
    for j in range(0, selected.size, slot):
        piece = selected[j:j + slot]
        pt = ckks.encode(piece, state.ctx)
        seed = (cfg.seed, rnd, client_id, j // slot)
        chunks.append(ckks.encrypt(pt, state.public_key, state.ctx, seed))
    plain_idx = mask.complement()
    plaintext = list(zip(plain_idx.tolist(), update[plain_idx].tolist()))
    encrypt_s = time.perf_counter() - t1

    return (ClientUpdate(client_id, rnd, mask.fingerprint(), chunks,
                         plaintext, len(state.shards[client_id]), local_loss),
            {"train": train_s, "encrypt": encrypt_s})


def aggregate(state: ExperimentState, updates: list[ClientUpdate],
              mask: SelectionMask) -> tuple[np.ndarray, dict[str, float]]:
    """Mean update across clients: homomorphic on the mask, plain elsewhere."""
    if not updates:
        raise ProtocolError("no client updates to aggregate")
    ids = sorted(u.client_id for u in updates)
    if len(set(ids)) != len(ids):
        raise ProtocolError("duplicate client ids in aggregation")
    fp = mask.fingerprint()
    for u in updates:
        if u.mask_fingerprint != fp:
            raise ProtocolError(
                f"client {u.client_id} used a different mask")
        if u.round_index != state.round_index + 1:
            raise ProtocolError(
                f"client {u.client_id} update targets round {u.round_index}")
    updates = sorted(updates, key=lambda u: u.client_id)
    k = len(updates)
    n_chunks = math.ceil(mask.count / state.ctx.params.slot_count)
    for u in updates:
        if len(u.encrypted_chunks) != n_chunks:
            raise ProtocolError(
                f"client {u.client_id} sent {len(u.encrypted_chunks)} chunks, "
                f"expected {n_chunks}")

    agg = np.zeros(mask.total, dtype=np.float64)

    t0 = time.perf_counter()
    averaged: list[ckks.Ciphertext] = []
    try:
        for j in range(n_chunks):
            acc = updates[0].encrypted_chunks[j]
            for u in updates[1:]:
                acc = ckks.he_add(acc, u.encrypted_chunks[j], state.ctx)
            acc = ckks.rescale(ckks.he_mul_scalar(acc, 1.0 / k, state.ctx),
                               state.ctx)
            averaged.append(acc)
    except DepthExhaustedError as exc:
        raise ConfigError(
            f"modulus chain cannot average this round: {exc}") from exc
    he_s = time.perf_counter() - t0

    t1 = time.perf_counter()
    if mask.count:
        slots = np.concatenate([
            ckks.decode(ckks.decrypt(ct, state.secret_key, state.ctx),
                        state.ctx)
            for ct in averaged])
        agg[mask.indices] = slots[:mask.count]
    decrypt_s = time.perf_counter() - t1

    t2 = time.perf_counter()
    plain_idx = mask.complement()
    if plain_idx.size:
        total = np.zeros(plain_idx.size, dtype=np.float64)
        for u in updates:
            if len(u.plaintext_sparse) != plain_idx.size:
                raise ProtocolError(
                    f"client {u.client_id} sent {len(u.plaintext_sparse)} "
                    f"plaintext entries, expected {plain_idx.size}")
            idx, values = zip(*u.plaintext_sparse)
            if np.any(np.asarray(idx, dtype=np.int64) != plain_idx):
                raise ProtocolError(
                    f"client {u.client_id} plaintext indices disagree with "
                    f"the mask complement")
            total += np.asarray(values, dtype=np.float64)
        agg[plain_idx] = total / k
    plain_s = time.perf_counter() - t2

    return agg, {"aggregate_he": he_s, "aggregate_plain": plain_s,
                 "decrypt": decrypt_s}


def apply_global_update(model: ModelState, agg: np.ndarray) -> ModelState:
    return ModelState(model.arch, model.flat - GLOBAL_ETA * agg)


def _client_workers() -> int:
    raw = os.environ.get("HEFL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"HEFL_THREADS={raw!r} is not an integer") from None


def run_round(state: ExperimentState
              ) -> tuple[RoundRecord, list[ClientUpdate], np.ndarray,
                         SelectionMask]:
    cfg = state.config
    mask = round_mask(state)
    workers = min(_client_workers(), cfg.clients)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda c: client_update(state, c, mask), range(cfg.clients)))
    else:
        results = [client_update(state, c, mask) for c in range(cfg.clients)]
    updates = [r[0] for r in results]
    stage = {"train": sum(r[1]["train"] for r in results),
             "encrypt": sum(r[1]["encrypt"] for r in results)}

    agg, agg_stage = aggregate(state, updates, mask)
    stage.update(agg_stage)

    state.model = apply_global_update(state.model, agg)
    state.prev_update = agg
    state.round_index += 1

    train_acc, train_loss = evaluate(state.model, state.train_all.x,
                                     state.train_all.y)
    test_acc, _ = evaluate(state.model, state.test.x, state.test.y)
    record = RoundRecord(state.round_index, cfg.encryption_ratio,
                         cfg.sensitivity_method, mask.count,
                         mask.fingerprint(), train_acc, test_acc, train_loss,
                         {k: stage[k] * 1000.0 for k in _STAGES})
    return record, updates, agg, mask


# ---- persistence -----------------------------------------------------------


def save_checkpoint(path: str | Path, state: ExperimentState) -> None:
    layout = [[s.name, list(s.shape), s.start, s.end]
              for s in layer_layout(state.arch)]
    header = {
        "format": CHECKPOINT_MAGIC,
        "version": 1,
        "arch": {"name": state.arch.name,
                 "input_shape": list(state.arch.input_shape),
                 "n_classes": state.arch.n_classes},
        "layout": layout,
        "round": state.round_index,
        "param_count": state.model.size,
        "config_digest": state.config.digest(),
        "has_prev_update": state.prev_update is not None,
    }
    head = json.dumps(header, sort_keys=True).encode()
    blob = state.model.flat.astype("<f8").tobytes()
    if state.prev_update is not None:
        blob += state.prev_update.astype("<f8").tobytes()
    Path(path).write_bytes(struct.pack("<I", len(head)) + head + blob)


def load_checkpoint(path: str | Path, cfg: FlConfig,
                    state: ExperimentState) -> None:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint {path}: {exc}") from None
    if len(raw) < 4:
        raise ConfigError("checkpoint truncated")
    head_len = struct.unpack_from("<I", raw)[0]
    try:
        header = json.loads(raw[4:4 + head_len])
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise ConfigError("checkpoint header is not valid JSON") from None
    if header.get("format") != CHECKPOINT_MAGIC or header.get("version") != 1:
        raise ConfigError("not a recognized checkpoint file")
    if header["config_digest"] != cfg.digest():
        raise ConfigError(
            "checkpoint was produced by a different configuration")
    expect = [[s.name, list(s.shape), s.start, s.end]
              for s in layer_layout(state.arch)]
    if header["layout"] != expect:
        raise ConfigError("checkpoint layout does not match the model")
    count = header["param_count"]
    body = raw[4 + head_len:]
    need = count * 8 * (2 if header["has_prev_update"] else 1)
    if len(body) != need:
        raise ConfigError(
            f"checkpoint body is {len(body)} bytes, expected {need}")
    flat = np.frombuffer(body, dtype="<f8", count=count).copy()
    state.model = ModelState(state.arch, flat)
    if header["has_prev_update"]:
        state.prev_update = np.frombuffer(body, dtype="<f8", count=count,
                                          offset=count * 8).copy()
    else:
        state.prev_update = None
    state.round_index = header["round"]


def single_step_batch(state: ExperimentState,
                      client_id: int, round_index: int
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Replay the batch a single-step client drew for a given round."""
    cfg = state.config
    shard = state.shards[client_id]
    rng = np.random.default_rng(np.random.SeedSequence(
        (CLIENT_STREAM, cfg.seed, round_index, client_id)))
    take = min(cfg.batch_size, len(shard))
    pick = rng.permutation(len(shard))[:take]
    return shard.x[pick], shard.y[pick]


def write_capture(path: str | Path, state: ExperimentState,
                  update: ClientUpdate, mask: SelectionMask,
                  model_flat: np.ndarray, example_x: np.ndarray,
                  example_y: np.ndarray) -> None:
    """Attack handoff: one client's visible update plus scoring truth.

    `model_flat` must be the weights the update was computed against,
    not the post-round state.
    """
    idx, values = (zip(*update.plaintext_sparse)
                   if update.plaintext_sparse else ((), ()))
    payload = {
        "round": update.round_index,
        "client_id": update.client_id,
        "arch": {"name": state.arch.name,
                 "input_shape": list(state.arch.input_shape),
                 "n_classes": state.arch.n_classes},
        "mask": {"total": mask.total,
                 "indices": mask.indices.tolist(),
                 "ratio": mask.ratio},
        "visible": {"indices": list(idx), "values": list(values)},
        "encrypted_chunks": [
            base64.b64encode(
                ckks.serialize_ciphertext(ct, state.ctx)).decode()
            for ct in update.encrypted_chunks],
        "ckks_profile": state.config.ckks_profile,
        "model_flat": base64.b64encode(
            model_flat.astype("<f8").tobytes()).decode(),
        "example": {"x": example_x.tolist(), "y": example_y.tolist()},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def run_experiment(cfg: FlConfig, out_dir: str | Path,
                   resume: bool = False) -> dict:
    """Full training run; writes records.jsonl, checkpoints and captures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = init_experiment(cfg)
    records_path = out / "records.jsonl"
    ckpt_path = out / "checkpoint.bin"

    lines: list[str] = []
    if resume:
        if not ckpt_path.exists():
            raise ConfigError(f"cannot resume: {ckpt_path} does not exist")
        load_checkpoint(ckpt_path, cfg, state)
        if records_path.exists():
            kept = records_path.read_text().splitlines()[:state.round_index]
            if len(kept) < state.round_index:
                raise ConfigError(
                    "records.jsonl has fewer rounds than the checkpoint")
            lines = kept

    stage_totals = dict.fromkeys(_STAGES, 0.0)
    while state.round_index < cfg.rounds:
        pre_round_flat = state.model.flat.copy()
        record, updates, _, mask = run_round(state)
        lines.append(record.to_json())
        records_path.write_text("\n".join(lines) + "\n")
        for name in _STAGES:
            stage_totals[name] += record.wall_ms[name]
        if cfg.single_step and record.round_index == 1:
            for u in updates:
                x, y = single_step_batch(state, u.client_id, u.round_index)
                write_capture(out / f"capture_r1_c{u.client_id}.json",
                              state, u, mask, pre_round_flat, x, y)
        if (record.round_index % cfg.checkpoint_every == 0
                or record.round_index == cfg.rounds):
            save_checkpoint(ckpt_path, state)

    train_acc, train_loss = evaluate(state.model, state.train_all.x,
                                     state.train_all.y)
    test_acc, _ = evaluate(state.model, state.test.x, state.test.y)
    summary = {
        "encryption_ratio": cfg.encryption_ratio,
        "sensitivity_method": cfg.sensitivity_method,
        "rounds": cfg.rounds,
        "final_train_accuracy": train_acc,
        "final_test_accuracy": test_acc,
        "final_train_loss": train_loss,
        "stage_totals_ms": stage_totals,
        "total_wall_ms": sum(stage_totals.values()),
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
