from docembed.text.vocab import Vocab, build_vocab
from docembed.text.tokenizer import WordpieceTokenizer
from docembed.text.sampling import smooth_expected_counts, resample
from docembed.text.packing import (
    PackerConfig,
    PackedSequence,
    pack_greedy,
    build_mask_and_positions,
)

__all__ = [
    "Vocab",
    "build_vocab",
    "WordpieceTokenizer",
    "smooth_expected_counts",
    "resample",
    "PackerConfig",
    "PackedSequence",
    "pack_greedy",
    "build_mask_and_positions",
]
