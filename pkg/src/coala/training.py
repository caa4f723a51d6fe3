"""Joint optimization loop for the three ablation modes, with a seeded
validation split, checkpointing and deterministic minibatching."""

import gc
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .engine import Sgd, Tensor
from .engine import checkpoint as ckpt
from .losses import LossWeights, contrastive, total_loss
from .networks import CoalaModel, flatten_latent

MODES = ("ae-c", "e-c", "cnn")


class NumericalAbort(RuntimeError):
    """Raised when a training step produces a non-finite loss."""

    def __init__(self, msg, batch_id):
        super().__init__(msg)
        self.batch_id = batch_id


@dataclass
class TrainConfig:
    mode: str = "ae-c"
    epochs: int = 200            # the supervised CNN baseline uses 20
    batch_size: int = 128
    lr: float = 0.005
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    val_fraction: float = 0.10
    checkpoint_every: int = 0    # epochs; 0 = only best/last
    momentum: float = 0.0
    clip_norm: float = 0.0       # 0 = off
    include_positive: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if not (0.0 < self.val_fraction < 1.0):
            raise ValueError("val_fraction must be in (0,1)")


@dataclass
class Dataset:
    """Paired (SpectrogramPatch, TagVector) records; pairing by clip."""
    records: list

    def __len__(self):
        return len(self.records)


def split(dataset, val_fraction, seed):
    """Seeded disjoint train/validation split, stable across runs."""
    q = len(dataset)
    if q < 10:
        raise ValueError(f"need at least 10 records to split, got {q}")
    perm = np.random.default_rng(seed).permutation(q)
    n_val = max(1, int(round(q * val_fraction)))
    val_idx = set(perm[:n_val].tolist())
    train = Dataset([dataset.records[i] for i in perm[n_val:]])
    val = Dataset([dataset.records[i] for i in sorted(val_idx)])
    return train, val


def _stack_batch(records):
    x = np.stack([p.values for p, _ in records])[:, None, :, :].astype(np.float32)
    y = np.stack([t.bits for _, t in records]).astype(np.float32)
    return Tensor(x), Tensor(y)


def _trainable_groups(mode):
    if mode == "ae-c":
        return ("audio_encoder", "audio_decoder", "tag_encoder", "tag_decoder",
                "proj_audio", "proj_tags")
    if mode == "e-c":
        return ("audio_encoder", "tag_encoder", "proj_audio", "proj_tags")
    return ("audio_encoder", "cnn_head")


def _clip_gradients(params, max_norm):
    total = np.sqrt(sum(float((p.grad ** 2).sum()) for p in params if p.grad is not None))
    if total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return total


def validation_losses(model, val, config):
    """Eval-mode total loss and contrastive term over the validation set."""
    model.eval()
    total = 0.0
    xi = 0.0
    n_batches = 0
    bs = config.batch_size
    for i in range(0, len(val) - 1, bs):
        batch = val.records[i:i + bs]
        if len(batch) < 2:
            break
        x, y = _stack_batch(batch)
        loss, parts = total_loss(model, x, y, config.weights, config.mode,
                                 config.include_positive)
        total += parts["total"]
        xi += parts["L_xi"]
        n_batches += 1
    model.train()
    if n_batches == 0:
        raise ValueError("validation set too small for a single batch")
    return total / n_batches, xi / n_batches


@dataclass
class TrainResult:
    model: CoalaModel
    best_arrays: dict
    last_arrays: dict
    best_epoch: int
    log: list


def _snapshot(model):
    return {k: v.copy() for k, v in model.state_arrays().items()}


def train(dataset, config, vocab_size=None, run_dir=None, log_fn=None):
    """Run the optimization; returns a TrainResult.

    Deterministic for fixed (seed, data, config): init, shuffling and
    dropout all derive from config.seed.
    """
    if vocab_size is None:
        vocab_size = len(dataset.records[0][1].bits)
    train_set, val_set = split(dataset, config.val_fraction, config.seed)

    model = CoalaModel(vocab_size, seed=config.seed)
    model.set_dropout_rng(np.random.default_rng(config.seed + 1))
    shuffle_rng = np.random.default_rng(config.seed + 2)

    groups = model.parameter_groups()
    params = [p for g in _trainable_groups(config.mode) for p in groups[g].values()]
    opt = Sgd(params, lr=config.lr, momentum=config.momentum)

    log = []
    best_val = np.inf
    best_epoch = -1
    best_arrays = _snapshot(model)
    last_good = best_arrays
    steps_per_epoch = len(train_set) // config.batch_size
    if steps_per_epoch == 0:
        raise ValueError(f"training split ({len(train_set)}) smaller than one batch "
                         f"({config.batch_size})")

    def emit(record):
        log.append(record)
        if log_fn:
            log_fn(record)

    step = 0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(train_set))
        for k in range(steps_per_epoch):
            idx = order[k * config.batch_size:(k + 1) * config.batch_size]
            x, y = _stack_batch([train_set.records[i] for i in idx])
            loss, parts = total_loss(model, x, y, config.weights, config.mode,
                                     config.include_positive)
            if not np.isfinite(parts["total"]):
                if run_dir:
                    _save(os.path.join(run_dir, "last_good.ckpt"), last_good, config,
                          vocab_size, epoch)
                raise NumericalAbort(
                    f"non-finite loss at epoch {epoch} step {k} "
                    f"(batch ids {[train_set.records[i][1].clip_id for i in idx[:4]]}...)",
                    batch_id=(epoch, k))
            loss.backward()
            if config.clip_norm > 0:
                _clip_gradients(params, config.clip_norm)
            opt.step()
            emit({"step": step, "epoch": epoch, **parts})
            step += 1
        last_good = _snapshot(model)

        val_total, val_xi = validation_losses(model, val_set, config)
        emit({"epoch": epoch, "val_total": val_total, "val_contrastive": val_xi})
        # graph nodes hold reference cycles (closures capture their output
        # tensor); eval-mode graphs are only freed by the cycle collector,
        # so force one per epoch to bound resident memory
        gc.collect()
        if val_total < best_val:
            best_val = val_total
            best_epoch = epoch
            best_arrays = last_good
        if run_dir:
            if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                _save(os.path.join(run_dir, f"epoch_{epoch + 1}.ckpt"),
                      last_good, config, vocab_size, epoch)

    if run_dir:
        _save(os.path.join(run_dir, "last.ckpt"), last_good, config, vocab_size,
              config.epochs - 1)
        _save(os.path.join(run_dir, "best.ckpt"), best_arrays, config, vocab_size,
              best_epoch)
    return TrainResult(model=model, best_arrays=best_arrays,
                       last_arrays=last_good, best_epoch=best_epoch, log=log)


def _config_dict(config, vocab_size, epoch):
    d = {k: v for k, v in vars(config).items() if k != "weights"}
    d["weights"] = vars(config.weights)
    d["vocab_size"] = vocab_size
    d["epoch"] = epoch
    return d


def _save(path, arrays, config, vocab_size, epoch):
    ckpt.save(path, arrays, _config_dict(config, vocab_size, epoch))


def load_model(path):
    """Rebuild a CoalaModel from a checkpoint file."""
    arrays, config = ckpt.load(path)
    model = CoalaModel(config["vocab_size"], seed=config.get("seed", 0))
    model.load_state_arrays(arrays)
    return model, config


def extract_embeddings(model, patches, batch_size=64):
    """Eval-mode encoder embeddings, [num_patches x 1152]."""
    model.eval()
    rows = []
    for i in range(0, len(patches), batch_size):
        chunk = patches[i:i + batch_size]
        x = Tensor(np.stack([p.values for p in chunk])[:, None].astype(np.float32))
        z = model.encode_audio(x)
        rows.append(flatten_latent(z).data)
        del x, z
        gc.collect()          # eval graphs are cyclic; see train()
    return np.concatenate(rows, axis=0)


def retrieval_top1(model, records, batch_size=32, seed=0):
    """Audio->tag in-batch retrieval accuracy (cosine, eval mode)."""
    model.eval()
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    hits = 0
    total = 0
    for i in range(0, len(records) - batch_size + 1, batch_size):
        batch = [records[j] for j in order[i:i + batch_size]]
        x, y = _stack_batch(batch)
        phi_a, phi_t = model.project(model.encode_audio(x), model.encode_tags(y))
        a = phi_a.data / (np.linalg.norm(phi_a.data, axis=1, keepdims=True) + 1e-7)
        t = phi_t.data / (np.linalg.norm(phi_t.data, axis=1, keepdims=True) + 1e-7)
        sim = a @ t.T
        hits += int((sim.argmax(axis=1) == np.arange(len(batch))).sum())
        total += len(batch)
    gc.collect()              # eval graphs are cyclic; see train()
    return hits / max(total, 1)
