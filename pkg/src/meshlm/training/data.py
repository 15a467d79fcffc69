"""Data sources: a deterministic character corpus and the needle task.

The char corpus is ~1 MB of synthetic prose sampled from a fixed 120-word
list with a Zipf-shaped rank distribution. Its seed is a module constant,
independent of any run seed, so every training run sees the same text.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError
from ..numerics.rng import Rng

CORPUS_SEED = 727
CORPUS_CHARS = 1_000_000

WORDS = (
    "the of and to in a is that it was for on are as with his they at be "
    "this have from or had by word but not what all were when we there can "
    "an your which their said if do will each about how up out them then "
    "she many some so these would other into has more her two like him see "
    "time could no make than first been its who now people my made over did "
    "down only way find use may water long little very after called just "
    "where most know get through back much before go good new write our "
    "used me man too any day same right look think also around another came"
).split()
assert len(WORDS) == 120


def make_corpus(n_chars=CORPUS_CHARS):
    """Deterministic synthetic text of at least n_chars characters."""
    rng = Rng(CORPUS_SEED, 0)
    ranks = np.arange(1, len(WORDS) + 1, dtype=np.float64)
    cdf = np.cumsum(1.0 / ranks)
    cdf /= cdf[-1]

    pieces = []
    total = 0
    sentence_in_paragraph = 0
    while total < n_chars:
        n_words = int(rng.integers(4, 13))
        draws = rng.uniform((n_words,))
        words = [WORDS[i] for i in np.searchsorted(cdf, draws)]
        sentence_in_paragraph += 1
        if sentence_in_paragraph >= int(rng.integers(4, 9)):
            sentence = " ".join(words) + ".\n"
            sentence_in_paragraph = 0
        else:
            sentence = " ".join(words) + ". "
        pieces.append(sentence)
        total += len(sentence)
    return "".join(pieces)


class CharVocab:
    """Stable char <-> id maps over the distinct characters of a text."""

    def __init__(self, text):
        self.chars = sorted(set(text))
        self._ids = {c: i for i, c in enumerate(self.chars)}

    @property
    def size(self):
        return len(self.chars)

    def encode(self, text):
        try:
            return np.array([self._ids[c] for c in text], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"character {exc.args[0]!r} not in vocab")

    def decode(self, ids):
        return "".join(self.chars[int(i)] for i in ids)


@dataclass(frozen=True)
class Batch:
    """Next-token pairs: targets are the tokens shifted left by one."""
    tokens: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.tokens.shape != self.targets.shape or self.tokens.ndim != 2:
            raise DataError("tokens/targets must share a 2-D shape")
        if not np.array_equal(self.tokens[:, 1:], self.targets[:, :-1]):
            raise DataError("targets are not the tokens shifted by one")


def batch_from_rows(rows):
    """Batch from raw rows of length seq_len + 1."""
    rows = np.asarray(rows)
    return Batch(tokens=rows[:, :-1].copy(), targets=rows[:, 1:].copy())


class CharSource:
    """Character-level corpus with random-window and sequential batching."""

    def __init__(self, text=None):
        self.text = make_corpus() if text is None else text
        self.vocab = CharVocab(self.text)
        self.ids = self.vocab.encode(self.text)
        self._cursor = 0

    def sample(self, rng, batch, seq_len):
        """Random corpus windows."""
        if len(self.ids) < seq_len + 1:
            raise DataError("corpus shorter than one window")
        starts = rng.integers(0, len(self.ids) - seq_len, (batch,))
        rows = np.stack([self.ids[s:s + seq_len + 1] for s in starts])
        return batch_from_rows(rows)

    def sequential(self, batch, seq_len):
        """Next batch of consecutive windows, wrapping at the corpus end."""
        rows = []
        for _ in range(batch):
            if self._cursor + seq_len + 1 > len(self.ids):
                self._cursor = 0
            rows.append(self.ids[self._cursor:self._cursor + seq_len + 1])
            self._cursor += seq_len
        return batch_from_rows(np.stack(rows))


# ------------------------------------------------------------ needle task --

def needle_alphabet(vocab):
    """(marker, query, payload id range, filler id range) for a vocab size."""
    if vocab < 8:
        raise ConfigError(f"needle task needs vocab >= 8, got {vocab}")
    marker = vocab - 1
    query = vocab - 2
    n_payload = max(2, vocab // 4)
    payload_lo = query - n_payload
    return marker, query, (payload_lo, query), (0, payload_lo)


def needle_task(rng, seq_len, vocab, distance, batch=1):
    """Marker/payload/filler/query sequences probing long-lived information.

    Each row: a marker, then a payload token, filler, and a query marker
    `distance` positions after the payload; the target at the query position
    is the payload itself.
    """
    if not 1 <= distance < seq_len - 2:
        raise ConfigError(f"need 1 <= distance < seq_len - 2, "
                          f"got {distance} vs {seq_len}")
    marker, query, (pay_lo, pay_hi), (fil_lo, fil_hi) = needle_alphabet(vocab)
    rows = np.empty((batch, seq_len + 1), dtype=np.int64)
    for i in range(batch):
        row = rng.integers(fil_lo, fil_hi, (seq_len + 1,))
        payload = int(rng.integers(pay_lo, pay_hi))
        pos = int(rng.integers(1, seq_len - distance))
        row[pos - 1] = marker
        row[pos] = payload
        row[pos + distance] = query
        row[pos + distance + 1] = payload
        rows[i] = row
    return batch_from_rows(rows)


def query_positions(tokens, vocab):
    """Index of the query marker in each row."""
    _, query, _, _ = needle_alphabet(vocab)
    hits = tokens == query
    if not np.all(hits.sum(axis=1) == 1):
        raise DataError("each row must hold exactly one query marker")
    return np.argmax(hits, axis=1)


class NeedleSource:
    """Train-time source of fresh needle batches (no epoch structure)."""

    def __init__(self, vocab, distance=0):
        needle_alphabet(vocab)  # validates the size
        self.vocab = vocab
        self.distance = distance

    def sample(self, rng, batch, seq_len):
        distance = self.distance if self.distance else max(1, seq_len // 2)
        return needle_task(rng, seq_len, self.vocab, distance, batch=batch)

    def sequential(self, batch, seq_len):
        raise ConfigError("needle data has no epoch; disable single_epoch")
