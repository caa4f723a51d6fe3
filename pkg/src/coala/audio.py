"""Audio frontend: WAV IO, conforming to 22050 Hz / 10 s, log-mel patches
with max-energy selection, and frame-level acoustic descriptors."""

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.signal

SAMPLE_RATE = 22050
CLIP_SAMPLES = SAMPLE_RATE * 10
WIN_LENGTH = 1024
HOP_LENGTH = 512          # 50% overlap
N_MELS = 96
PATCH_FRAMES = 96
PATCH_STEP = 12
LOG_FLOOR = 1e-10


class AudioFormatError(ValueError):
    pass


@dataclass
class AudioClip:
    samples: np.ndarray          # mono float32 in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        if len(self.samples) == 0:
            raise ValueError("empty audio clip")
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")


@dataclass
class SpectrogramPatch:
    values: np.ndarray           # [96 frames x 96 mel bands], scaled to [0, 1]
    source_clip_id: str = ""
    frame_offset: int = 0

    def __post_init__(self):
        if self.values.shape != (PATCH_FRAMES, N_MELS):
            raise ValueError(f"patch must be {PATCH_FRAMES}x{N_MELS}, got {self.values.shape}")


@dataclass
class AcousticDescriptors:
    mfcc: np.ndarray             # 20 x frames
    mfcc_delta: np.ndarray
    mfcc_delta2: np.ndarray
    chroma: np.ndarray           # 12 x frames
    centroid: np.ndarray         # 1 x frames, Hz
    bandwidth: np.ndarray        # 1 x frames, Hz


# ----------------------------------------------------------------- WAV IO

def load_wav(path):
    """Read a RIFF/WAVE file (PCM16 or float32), downmixing stereo to mono."""
    with open(path, "rb") as f:
        header = f.read(12)
        if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise AudioFormatError(f"{path}: not a RIFF/WAVE file")
        fmt = None
        data = None
        while True:
            chunk = f.read(8)
            if len(chunk) < 8:
                break
            cid, size = chunk[:4], struct.unpack("<I", chunk[4:])[0]
            payload = f.read(size + (size & 1))[:size]
            if cid == b"fmt ":
                fmt = struct.unpack("<HHIIHH", payload[:16])
            elif cid == b"data":
                data = payload
        if fmt is None or data is None:
            raise AudioFormatError(f"{path}: missing fmt/data chunk")
        audio_format, channels, rate, _, _, bits = fmt
        if audio_format == 1 and bits == 16:
            x = np.frombuffer(data, dtype="<i2").astype(np.float32) / 32768.0
        elif audio_format == 3 and bits == 32:
            x = np.frombuffer(data, dtype="<f4").astype(np.float32)
        else:
            raise AudioFormatError(
                f"{path}: unsupported codec (format tag {audio_format}, {bits}-bit, "
                f"{channels} ch, {rate} Hz); need PCM16 or float32")
        if channels > 1:
            x = x[: len(x) // channels * channels].reshape(-1, channels).mean(axis=1)
        return AudioClip(x.astype(np.float32), rate)


def save_wav(path, clip):
    """Write mono PCM16."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE")
        f.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, clip.sample_rate,
                                      clip.sample_rate * 2, 2, 16))
        f.write(b"data" + struct.pack("<I", len(data)) + data)


def conform(clip):
    """Resample to 22050 Hz (windowed-sinc, Kaiser beta=8) and fix length
    to exactly 10 s by zero-padding or truncation."""
    x = clip.samples
    if clip.sample_rate != SAMPLE_RATE:
        from math import gcd

        g = gcd(SAMPLE_RATE, clip.sample_rate)
        x = scipy.signal.resample_poly(
            x.astype(np.float64), SAMPLE_RATE // g, clip.sample_rate // g,
            window=("kaiser", 8.0)).astype(np.float32)
    if len(x) >= CLIP_SAMPLES:
        x = x[:CLIP_SAMPLES]
    else:
        x = np.concatenate([x, np.zeros(CLIP_SAMPLES - len(x), dtype=np.float32)])
    return AudioClip(np.ascontiguousarray(x, dtype=np.float32), SAMPLE_RATE)


# ------------------------------------------------------------- spectrogram

def _frame(x, win, hop):
    n = (len(x) - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def power_spectrogram(x, win_length=WIN_LENGTH, hop_length=HOP_LENGTH):
    """Hamming-windowed power spectrum, [frames x (win/2+1)]."""
    frames = _frame(x.astype(np.float64), win_length, hop_length)
    window = np.hamming(win_length)
    spec = np.fft.rfft(frames * window, axis=1)
    return (spec.real ** 2 + spec.imag ** 2)


def _hz_to_mel(f):
    # Slaney scale: linear below 1 kHz, log above
    f = np.asanyarray(f, dtype=np.float64)
    mel = f / (200.0 / 3.0)
    log_region = f >= 1000.0
    mel = np.where(log_region, 15.0 + np.log(np.maximum(f, 1e-12) / 1000.0) / (np.log(6.4) / 27.0), mel)
    return mel


def _mel_to_hz(m):
    m = np.asanyarray(m, dtype=np.float64)
    f = m * (200.0 / 3.0)
    return np.where(m >= 15.0, 1000.0 * np.exp((m - 15.0) * (np.log(6.4) / 27.0)), f)


def mel_filterbank(n_mels=N_MELS, n_fft=WIN_LENGTH, sr=SAMPLE_RATE,
                   fmin=0.0, fmax=None):
    """Triangular, area-normalized (Slaney) filterbank, [n_mels x bins]."""
    fmax = fmax or sr / 2.0
    bin_freqs = np.fft.rfftfreq(n_fft, 1.0 / sr)
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    fb = np.zeros((n_mels, len(bin_freqs)))
    for i in range(n_mels):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (bin_freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - bin_freqs) / max(hi - mid, 1e-12)
        fb[i] = np.maximum(0.0, np.minimum(up, down)) * 2.0 / (hi - lo)
    return fb


_MEL_FB = {}


def _cached_fb(n_mels):
    if n_mels not in _MEL_FB:
        _MEL_FB[n_mels] = mel_filterbank(n_mels)
    return _MEL_FB[n_mels]


def logmel(clip, n_mels=N_MELS):
    """[frames x n_mels] log10 mel-band energies of a conformed clip."""
    spec = power_spectrogram(clip.samples)
    mel = spec @ _cached_fb(n_mels).T
    return np.log10(np.maximum(mel, LOG_FLOOR)).astype(np.float32)


def minmax_scale(patch):
    """Scale a patch to [0, 1]; a constant patch maps to all zeros."""
    lo, hi = patch.min(), patch.max()
    if hi - lo <= 0:
        return np.zeros_like(patch, dtype=np.float32)
    return ((patch - lo) / (hi - lo)).astype(np.float32)


def extract_patch(logmel_matrix, clip_id="", step=PATCH_STEP):
    """Max-energy [96 x 96] window among candidates spaced `step` frames
    apart, then min-max scaled to [0, 1].  Ties break to the lowest offset."""
    n = logmel_matrix.shape[0]
    if n < PATCH_FRAMES:
        raise ValueError(f"need at least {PATCH_FRAMES} frames, got {n}")
    offsets = list(range(0, n - PATCH_FRAMES + 1, step))
    energies = [logmel_matrix[o:o + PATCH_FRAMES].sum() for o in offsets]
    best = offsets[int(np.argmax(energies))]
    window = logmel_matrix[best:best + PATCH_FRAMES]
    return SpectrogramPatch(minmax_scale(window), clip_id, best)


# -------------------------------------------------------------- descriptors

def _delta(x, width=9):
    """Local linear-regression slope over a centered window (per row)."""
    half = width // 2
    k = np.arange(-half, half + 1, dtype=np.float64)
    padded = np.pad(x, ((0, 0), (half, half)), mode="edge")
    out = np.zeros_like(x, dtype=np.float64)
    for j, kj in enumerate(k):
        out += kj * padded[:, j:j + x.shape[1]]
    return out / (k * k).sum()


def descriptors(clip):
    """Frame-level MFCC (+deltas), chroma, spectral centroid and bandwidth."""
    spec = power_spectrogram(clip.samples)          # [frames x bins]
    freqs = np.fft.rfftfreq(WIN_LENGTH, 1.0 / clip.sample_rate)

    mel = spec @ _cached_fb(128).T
    logm = np.log10(np.maximum(mel, LOG_FLOOR))
    mfcc = scipy.fft.dct(logm, type=2, norm="ortho", axis=1)[:, :20].T  # 20 x frames
    d1 = _delta(mfcc)
    d2 = _delta(d1)

    # chroma: fold positive-frequency power bins into 12 pitch classes (A440)
    chroma = np.zeros((12, spec.shape[0]))
    pos = freqs > 0
    classes = (np.round(12.0 * np.log2(freqs[pos] / 440.0)).astype(int) + 9) % 12
    for cls in range(12):
        sel = np.zeros_like(freqs, dtype=bool)
        sel[pos] = classes == cls
        chroma[cls] = spec[:, sel].sum(axis=1)

    total = spec.sum(axis=1)
    safe = np.maximum(total, 1e-30)
    centroid = (spec @ freqs) / safe
    centroid[total <= 0] = 0.0
    spread = ((freqs[None, :] - centroid[:, None]) ** 2 * spec).sum(axis=1) / safe
    bandwidth = np.sqrt(np.maximum(spread, 0.0))
    bandwidth[total <= 0] = 0.0

    return AcousticDescriptors(
        mfcc=mfcc, mfcc_delta=d1, mfcc_delta2=d2, chroma=chroma,
        centroid=centroid[None, :], bandwidth=bandwidth[None, :])
