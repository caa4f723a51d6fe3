"""Tag frontend: normalization (stop words, singularization), vocabulary
construction and multi-hot encoding.

The stop-word list and the singularization tables are versioned data
files in this package; no fidelity to any particular third-party NLP
toolkit is claimed.
"""

from dataclasses import dataclass
from importlib import resources

import numpy as np

DEFAULT_VOCAB_SIZE = 1000
DOC_FREQ_CEILING = 0.70


def _load_set(name):
    text = resources.files(__package__).joinpath("data", name).read_text("utf-8")
    return {line.strip() for line in text.splitlines() if line.strip()}


def _load_map(name):
    text = resources.files(__package__).joinpath("data", name).read_text("utf-8")
    out = {}
    for line in text.splitlines():
        if line.strip():
            plural, singular = line.split("\t")
            out[plural.strip()] = singular.strip()
    return out


STOP_WORDS = _load_set("stopwords.txt")
INVARIANT_NOUNS = _load_set("invariant_nouns.txt")
IRREGULAR_PLURALS = _load_map("irregular_plurals.txt")
VES_PLURALS = _load_map("plural_ves.txt")


def singularize(word):
    if word in INVARIANT_NOUNS:
        return word
    if word in IRREGULAR_PLURALS:
        return IRREGULAR_PLURALS[word]
    if word in VES_PLURALS:
        return VES_PLURALS[word]
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if len(word) > 4 and word.endswith(("ses", "xes", "zes", "ches", "shes")):
        return word[:-2]
    if word.endswith("s") and not word.endswith("ss") and len(word) > 3:
        return word[:-1]
    return word


def normalize_tag(raw):
    """Lowercase, drop stop words, singularize.  Returns None when the tag
    is filtered out entirely."""
    word = raw.strip().lower()
    if not word or word in STOP_WORDS:
        return None
    word = singularize(word)
    if not word or word in STOP_WORDS:
        return None
    return word


@dataclass
class Vocabulary:
    tags: list                    # ordered: descending doc frequency, then lexicographic
    index: dict                   # tag -> position
    doc_frequency: dict           # tag -> number of clips carrying it

    @property
    def size(self):
        return len(self.tags)


@dataclass
class TagVector:
    bits: np.ndarray              # {0,1}^C, popcount >= 1
    clip_id: str = ""


def normalized_tag_set(raw_tags):
    return {t for t in (normalize_tag(r) for r in raw_tags) if t is not None}


def build_vocabulary(corpus_tag_lists, max_size=DEFAULT_VOCAB_SIZE):
    """corpus_tag_lists: iterable of per-clip raw tag lists.

    Tags present on more than 70% of clips are removed; the `max_size`
    most frequent remaining tags are kept, ties broken lexicographically.
    """
    counts = {}
    num_clips = 0
    for raw_tags in corpus_tag_lists:
        num_clips += 1
        for tag in normalized_tag_set(raw_tags):
            counts[tag] = counts.get(tag, 0) + 1
    if num_clips == 0:
        raise ValueError("empty corpus")
    kept = {t: c for t, c in counts.items() if c / num_clips <= DOC_FREQ_CEILING}
    ordered = sorted(kept, key=lambda t: (-kept[t], t))[:max_size]
    if not ordered:
        raise ValueError("vocabulary is empty after frequency filtering")
    return Vocabulary(tags=ordered,
                      index={t: i for i, t in enumerate(ordered)},
                      doc_frequency={t: kept[t] for t in ordered})


def encode(raw_tags, vocab, clip_id=""):
    """Multi-hot encode a clip's tags; None when no tag survives."""
    bits = np.zeros(vocab.size, dtype=np.float32)
    for tag in normalized_tag_set(raw_tags):
        pos = vocab.index.get(tag)
        if pos is not None:
            bits[pos] = 1.0
    if bits.sum() == 0:
        return None
    return TagVector(bits=bits, clip_id=clip_id)


def save_vocabulary(path, vocab):
    with open(path, "w", encoding="utf-8") as f:
        for tag in vocab.tags:
            f.write(f"{tag}\t{vocab.doc_frequency[tag]}\n")


def load_vocabulary(path):
    tags, freqs = [], {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                tag, count = line.rstrip("\n").split("\t")
                tags.append(tag)
                freqs[tag] = int(count)
    return Vocabulary(tags=tags, index={t: i for i, t in enumerate(tags)},
                      doc_frequency=freqs)
