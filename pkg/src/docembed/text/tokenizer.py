"""Greedy longest-match subword tokenization."""

from __future__ import annotations

from docembed.text.vocab import CLS_ID, SEP_ID, UNK_ID, Vocab


class WordpieceTokenizer:
    def __init__(self, vocab: Vocab):
        self.vocab = vocab
        self._max_piece = max((len(t) for t in vocab.tokens), default=1)

    def split_word(self, word: str) -> list[str]:
        """Split one whitespace-delimited word into subword pieces.

        At each position the longest matching piece wins; pieces after the
        first carry the "##" continuation prefix. A character with no
        matching piece becomes [UNK] and scanning continues.
        """
        pieces = []
        start = 0
        while start < len(word):
            end = min(len(word), start + self._max_piece)
            piece = None
            while end > start:
                candidate = word[start:end]
                if start > 0:
                    candidate = "##" + candidate
                if candidate in self.vocab:
                    piece = candidate
                    break
                end -= 1
            if piece is None:
                pieces.append("[UNK]")
                start += 1
            else:
                pieces.append(piece)
                start = end
        return pieces

    def tokenize(self, text: str, max_len: int = 512) -> list[int]:
        """Token ids for a text: [CLS] pieces... [SEP], truncated to max_len.

        Truncation keeps the front of the text; the trailing [SEP] always
        survives.
        """
        if max_len < 2:
            raise ValueError("max_len must allow [CLS] and [SEP]")
        ids = [CLS_ID]
        budget = max_len - 2
        for word in text.split():
            if len(ids) - 1 >= budget:
                break
            for piece in self.split_word(word):
                if len(ids) - 1 >= budget:
                    break
                ids.append(self.vocab.id_of(piece) if piece != "[UNK]" else UNK_ID)
        ids.append(SEP_ID)
        return ids
