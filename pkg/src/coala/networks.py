"""The four networks (audio/tag encoder+decoder), the two projection
heads, and the supervised CNN-baseline head.

Audio encoder: 5 conv blocks (4x4, stride 2, pad 1, 128 filters, BN,
ReLU, dropout 0.25) mapping [B,1,96,96] -> [B,128,3,3]; the decoder
mirrors it with transposed convs and a sigmoid output.  Tag encoder:
1000 -> 512 -> 512 -> 1152 linear blocks; decoder mirrored.  Projection
heads: 1152 -> 1152 affine + ReLU.
"""

import numpy as np

from .engine import (
    BatchNorm, Conv2d, ConvTranspose2d, Dropout, Linear, Module, ReLU,
    Sequential, Sigmoid, Tensor, ShapeError,
)

N_BLOCKS = 5
CHANNELS = 128
KERNEL = (4, 4)
STRIDE = (2, 2)
PADDING = (1, 1)
DROPOUT_RATE = 0.25
LATENT_SHAPE = (128, 3, 3)
EMBED_DIM = 1152            # 128 * 3 * 3
TAG_HIDDEN = (512, 512)


def _conv_block(cin, cout, rng):
    return Sequential(Conv2d(cin, cout, KERNEL, STRIDE, PADDING, rng),
                      BatchNorm(cout), ReLU(), Dropout(DROPOUT_RATE))


class AudioEncoder(Module):
    def __init__(self, rng):
        super().__init__()
        chans = [1] + [CHANNELS] * N_BLOCKS
        self.blocks = [_conv_block(chans[i], chans[i + 1], rng) for i in range(N_BLOCKS)]

    def forward(self, x):
        if x.data.ndim != 4 or x.shape[1:] != (1, 96, 96):
            raise ShapeError(f"audio encoder expects [B,1,96,96], got {x.shape}")
        for block in self.blocks:
            x = block(x)
        return x                     # [B,128,3,3]


class AudioDecoder(Module):
    def __init__(self, rng):
        super().__init__()
        self.blocks = [
            Sequential(ConvTranspose2d(CHANNELS, CHANNELS, KERNEL, STRIDE, PADDING, rng),
                       BatchNorm(CHANNELS), ReLU(), Dropout(DROPOUT_RATE))
            for _ in range(N_BLOCKS - 1)
        ]
        self.out = Sequential(ConvTranspose2d(CHANNELS, 1, KERNEL, STRIDE, PADDING, rng),
                              Sigmoid())

    def forward(self, z):
        if z.data.ndim != 4 or z.shape[1:] != LATENT_SHAPE:
            raise ShapeError(f"audio decoder expects [B,128,3,3], got {z.shape}")
        for block in self.blocks:
            z = block(z)
        return self.out(z)           # [B,1,96,96] in (0,1)


def _linear_block(cin, cout, rng):
    return Sequential(Linear(cin, cout, rng), BatchNorm(cout), ReLU(), Dropout(DROPOUT_RATE))


class TagEncoder(Module):
    def __init__(self, vocab_size, rng):
        super().__init__()
        sizes = [vocab_size, *TAG_HIDDEN, EMBED_DIM]
        self.blocks = [_linear_block(sizes[i], sizes[i + 1], rng) for i in range(3)]
        self.vocab_size = vocab_size

    def forward(self, y):
        if y.shape[-1] != self.vocab_size:
            raise ShapeError(f"tag encoder expects dim {self.vocab_size}, got {y.shape}")
        for block in self.blocks:
            y = block(y)
        return y                     # [B,1152], nonnegative


class TagDecoder(Module):
    def __init__(self, vocab_size, rng):
        super().__init__()
        self.blocks = [_linear_block(EMBED_DIM, TAG_HIDDEN[1], rng),
                       _linear_block(TAG_HIDDEN[1], TAG_HIDDEN[0], rng)]
        self.out = Sequential(Linear(TAG_HIDDEN[0], vocab_size, rng), Sigmoid())

    def forward(self, z):
        for block in self.blocks:
            z = block(z)
        return self.out(z)           # [B,C] in (0,1)


class ProjectionHead(Module):
    """Affine map to the shared 1152-dim space; ReLU keeps the output
    nonnegative."""

    def __init__(self, rng):
        super().__init__()
        self.affine = Linear(EMBED_DIM, EMBED_DIM, rng)

    def forward(self, x):
        return self.affine(x).relu()


class CnnBaselineHead(Module):
    """Two fully connected layers on the flattened latent, sigmoid output."""

    def __init__(self, vocab_size, rng):
        super().__init__()
        self.fc1 = Linear(EMBED_DIM, TAG_HIDDEN[0], rng)
        self.fc2 = Linear(TAG_HIDDEN[0], vocab_size, rng)

    def forward(self, z_flat):
        return self.fc2(self.fc1(z_flat).relu()).sigmoid()


def flatten_latent(z):
    """[B,128,3,3] -> [B,1152], channel-major (C, then T', then F')."""
    return z.reshape(z.shape[0], EMBED_DIM)


class CoalaModel(Module):
    """All parameter sets of the joint objective, plus the baseline head."""

    def __init__(self, vocab_size, seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        # construction order is fixed: it defines the deterministic init stream
        self.audio_encoder = AudioEncoder(rng)
        self.audio_decoder = AudioDecoder(rng)
        self.tag_encoder = TagEncoder(vocab_size, rng)
        self.tag_decoder = TagDecoder(vocab_size, rng)
        self.proj_audio = ProjectionHead(rng)
        self.proj_tags = ProjectionHead(rng)
        self.cnn_head = CnnBaselineHead(vocab_size, rng)
        self.vocab_size = vocab_size
        self.seed = seed

    def encode_audio(self, x):
        return self.audio_encoder(x)

    def decode_audio(self, z):
        return self.audio_decoder(z)

    def encode_tags(self, y):
        return self.tag_encoder(y)

    def decode_tags(self, z):
        return self.tag_decoder(z)

    def project(self, z_audio, z_tags):
        """(Z_a [B,128,3,3], z_t [B,1152]) -> (phi_a, phi_t), both [B,1152]."""
        return self.proj_audio(flatten_latent(z_audio)), self.proj_tags(z_tags)

    def parameter_groups(self):
        """Named parameter sets, matching the per-mode optimizer coupling."""
        return {
            "audio_encoder": dict(self.audio_encoder.named_parameters("audio_encoder.")),
            "audio_decoder": dict(self.audio_decoder.named_parameters("audio_decoder.")),
            "tag_encoder": dict(self.tag_encoder.named_parameters("tag_encoder.")),
            "tag_decoder": dict(self.tag_decoder.named_parameters("tag_decoder.")),
            "proj_audio": dict(self.proj_audio.named_parameters("proj_audio.")),
            "proj_tags": dict(self.proj_tags.named_parameters("proj_tags.")),
            "cnn_head": dict(self.cnn_head.named_parameters("cnn_head.")),
        }

    def state_arrays(self):
        """Everything that goes into a checkpoint: params + BN running stats."""
        arrays = {name: p.data for name, p in self.named_parameters()}
        arrays.update({name: b for name, b in self.named_buffers()})
        return arrays

    def load_state_arrays(self, arrays):
        for name, p in self.named_parameters():
            if name not in arrays:
                raise KeyError(f"checkpoint missing tensor {name}")
            if arrays[name].shape != p.data.shape:
                raise ValueError(
                    f"topology mismatch at {name}: checkpoint {arrays[name].shape}, model {p.data.shape}")
            p.data = arrays[name].astype(np.float32).copy()
        for name, b in self.named_buffers():
            if name not in arrays:
                raise KeyError(f"checkpoint missing buffer {name}")
            b[...] = arrays[name]


def parameter_count(module):
    return sum(p.data.size for p in module.parameters())
