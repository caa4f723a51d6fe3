"""Downstream classification harness: clip-level features, train-split
standardization, and a small MLP classifier with repeated runs."""

from dataclasses import dataclass

import numpy as np

from . import audio
from .audio import PATCH_FRAMES, SpectrogramPatch, minmax_scale
from .engine import Linear, Module, ReLU, Sgd, Tensor
from .training import extract_embeddings


@dataclass
class MlpConfig:
    hidden: int = 256
    epochs: int = 200
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    repeats: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def clip_patches(clip, clip_id=""):
    """Consecutive non-overlapping 96-frame patches (each min-max scaled).

    A clip shorter than one patch yields a single zero-padded patch.
    """
    lm = audio.logmel(audio.conform(clip)) if len(clip.samples) else None
    n = lm.shape[0]
    if n < PATCH_FRAMES:
        padded = np.zeros((PATCH_FRAMES, lm.shape[1]), dtype=np.float32)
        padded[:n] = lm
        return [SpectrogramPatch(minmax_scale(padded), clip_id, 0)]
    return [SpectrogramPatch(minmax_scale(lm[o:o + PATCH_FRAMES]), clip_id, o)
            for o in range(0, n - PATCH_FRAMES + 1, PATCH_FRAMES)]


def embedding_clip_feature(model, clip, clip_id=""):
    """Mean of per-patch encoder embeddings, 1152-dim."""
    patches = clip_patches(clip, clip_id)
    return extract_embeddings(model, patches).mean(axis=0)


def mfcc_clip_feature(clip):
    """MFCC low anchor: 20 MFCC + deltas + delta-deltas, mean and std
    through time -> 120 dims."""
    d = audio.descriptors(audio.conform(clip))
    feats = np.concatenate([d.mfcc, d.mfcc_delta, d.mfcc_delta2], axis=0)  # 60 x frames
    return np.concatenate([feats.mean(axis=1), feats.std(axis=1)]).astype(np.float32)


def standardize(train_features, all_features):
    """Zero-mean/unit-variance per dim, statistics from the train split only.
    Constant dims map to zero."""
    mu = train_features.mean(axis=0)
    sigma = train_features.std(axis=0)
    out = np.where(sigma > 0, (all_features - mu) / np.where(sigma > 0, sigma, 1.0), 0.0)
    return out.astype(np.float32)


class Mlp(Module):
    def __init__(self, dim, hidden, classes, rng):
        super().__init__()
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, classes, rng)

    def forward(self, x):
        return self.fc2(self.fc1(x).relu())


def _softmax_ce(logits, onehot):
    shift = logits.data.max(axis=1, keepdims=True)
    lse = (logits - Tensor(shift)).exp().sum(axis=1).log() + Tensor(shift[:, 0])
    return (lse - (logits * Tensor(onehot)).sum(axis=1)).mean()


def _train_mlp(train_x, train_y, test_x, test_y, config, seed):
    classes = int(max(train_y.max(), test_y.max())) + 1
    rng = np.random.default_rng(seed)
    model = Mlp(train_x.shape[1], config.hidden, classes, rng)
    opt = Sgd(model.parameters(), lr=config.lr, momentum=config.momentum)
    onehot = np.eye(classes, dtype=np.float32)[train_y]
    n = len(train_x)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for i in range(0, n, config.batch_size):
            idx = order[i:i + config.batch_size]
            loss = _softmax_ce(model(Tensor(train_x[idx])), onehot[idx])
            loss.backward()
            opt.step()
    model.eval()
    pred = model(Tensor(test_x)).data.argmax(axis=1)
    return float((pred == test_y).mean())


def run_classification(train_x, train_y, test_x, test_y, config):
    """Repeated MLP runs differing only in seed.

    Returns (mean accuracy, std, per-repeat accuracies).
    """
    train_y = np.asarray(train_y, dtype=int)
    test_y = np.asarray(test_y, dtype=int)
    classes = set(np.unique(np.concatenate([train_y, test_y])).tolist())
    missing = classes - set(np.unique(train_y).tolist())
    if missing:
        raise ValueError(f"classes absent from the training split: {sorted(missing)}")
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    accs = [_train_mlp(train_x, train_y, test_x, test_y, config, config.seed + r)
            for r in range(config.repeats)]
    return float(np.mean(accs)), float(np.std(accs)), accs
