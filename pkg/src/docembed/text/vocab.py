"""Subword vocabulary with reserved special tokens.

Full wordpiece learning is overkill at this scale; the builder keeps the
most frequent whole words, every observed character (as both word-initial
and continuation pieces, so no in-vocabulary character ever falls back to
unknown), and the most frequent "##" word-tail pieces. Greedy
longest-match tokenization over this vocabulary is exact.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

PAD, CLS, SEP, UNK = "[PAD]", "[CLS]", "[SEP]", "[UNK]"
SPECIAL_TOKENS = (PAD, CLS, SEP, UNK)
PAD_ID, CLS_ID, SEP_ID, UNK_ID = 0, 1, 2, 3


@dataclass
class Vocab:
    tokens: list[str]

    def __post_init__(self):
        if tuple(self.tokens[:4]) != SPECIAL_TOKENS:
            raise ValueError(f"vocab must start with {SPECIAL_TOKENS}")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocab contains duplicate tokens")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for token in self.tokens:
                handle.write(token + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as handle:
            tokens = [line.rstrip("\n") for line in handle if line.rstrip("\n")]
        return cls(tokens)


def build_vocab(texts, n_words: int = 8000, n_tails: int = 2000) -> Vocab:
    """Build a vocabulary from raw texts.

    Keeps the ``n_words`` most frequent whole words, all single characters
    (word-initial and "##" continuation forms), and the ``n_tails`` most
    frequent "##" suffix pieces of observed words. Frequency ties break
    lexicographically so the result is deterministic.
    """
    word_counts: Counter[str] = Counter()
    tail_counts: Counter[str] = Counter()
    chars: set[str] = set()
    for text in texts:
        for word in text.split():
            word_counts[word] += 1
            chars.update(word)
    for word, count in word_counts.items():
        for i in range(1, len(word)):
            tail_counts[word[i:]] += count

    tokens = list(SPECIAL_TOKENS)
    seen = set(tokens)

    def add(token):
        if token not in seen:
            seen.add(token)
            tokens.append(token)

    for word, _ in sorted(word_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n_words]:
        add(word)
    for ch in sorted(chars):
        add(ch)
        add("##" + ch)
    for tail, _ in sorted(tail_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n_tails]:
        add("##" + tail)
    return Vocab(tokens)
