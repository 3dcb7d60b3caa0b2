"""Alternate multitask training of the shared encoder.

Each step samples one (language, task) dataset with exponentially smoothed
probabilities, draws a batch from it, and applies exactly one objective:
the contrastive loss for triplet batches or the multi-label loss for topic
batches. Topic documents are packed three to a sequence so both tasks feed
the encoder the same input shape. In-batch negatives can be gathered
across a configurable number of virtual shards, emulating the effect of
data-parallel training on the candidate set size.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from docembed._validation import NumericError, check_is_fitted, check_random_state
from docembed.mining.augment import AugmentedTriplet
from docembed.nn.encoder import (
    EncoderConfig,
    EncoderParams,
    backward_batch,
    forward_batch,
    init_params,
)
from docembed.nn.losses import bce_multilabel, info_nce_batch
from docembed.nn.optim import Adam
from docembed.text.sampling import smooth_expected_counts
from docembed.text.tokenizer import WordpieceTokenizer
from docembed.text.vocab import Vocab, build_vocab
from docembed.topics import TopicExample

TRIPLET_TASK = "triplet"
TOPIC_TASK = "topic"
TOPIC_PACK_SIZE = 3


@dataclass
class TrainConfig:
    temperature: float = 0.05
    batch_size: int = 64
    learning_rate: float = 5e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    steps: int = 1000
    virtual_shards: int = 1
    cross_shard_negatives: bool = True
    smoothing_alpha: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.virtual_shards < 1:
            raise ValueError("virtual_shards must be positive")


@dataclass
class TaskDataset:
    key: tuple[str, str]  # (language, task)
    examples: list

    @property
    def size(self):
        return len(self.examples)


@dataclass
class TripletBatch:
    anchors: list[list[int]]
    positives: list[list[int]]
    negatives: list[list[int]]
    positive_stops: np.ndarray
    negative_stops: np.ndarray


@dataclass
class TopicBatch:
    sequences: list[list[int]]
    positions: list[list[int]]
    seg_ids: list[list[int]]
    labels: np.ndarray  # (docs, topics)
    label_mask: np.ndarray


def sample_task(datasets: list[TaskDataset], alpha: float, seed: int, step: int) -> int:
    """Pick a dataset index; probabilities follow the smoothed sizes."""
    sizes = {i: d.size for i, d in enumerate(datasets)}
    if any(s <= 0 for s in sizes.values()):
        raise ValueError("all datasets must be non-empty")
    if len(datasets) == 1:
        return 0
    smoothed = smooth_expected_counts({str(i): s for i, s in sizes.items()}, alpha)
    weights = np.array([smoothed[str(i)] for i in range(len(datasets))])
    rng = np.random.default_rng([seed, step])
    return int(rng.choice(len(datasets), p=weights / weights.sum()))


def _pad_single_segment(sequences: list[list[int]]):
    """Pad single-document rows; returns (ids, positions, seg_ids)."""
    t_max = max(len(s) for s in sequences)
    n = len(sequences)
    ids = np.zeros((n, t_max), dtype=np.int64)
    positions = np.zeros((n, t_max), dtype=np.int64)
    segs = np.full((n, t_max), -1, dtype=np.int64)
    for i, seq in enumerate(sequences):
        ids[i, : len(seq)] = seq
        positions[i, : len(seq)] = np.arange(len(seq))
        segs[i, : len(seq)] = 0
    return ids, positions, segs


def _pad_packed(sequences, positions, seg_ids):
    t_max = max(len(s) for s in sequences)
    n = len(sequences)
    ids = np.zeros((n, t_max), dtype=np.int64)
    pos = np.zeros((n, t_max), dtype=np.int64)
    segs = np.full((n, t_max), -1, dtype=np.int64)
    for i, (s, p, g) in enumerate(zip(sequences, positions, seg_ids)):
        ids[i, : len(s)] = s
        pos[i, : len(s)] = p
        segs[i, : len(s)] = g
    return ids, pos, segs


def pack_topic_docs(doc_token_ids: list[list[int]], max_len: int):
    """Pack documents into sequences of up to three segments.

    Returns (sequences, positions, seg_ids); documents keep their input
    order, so output row r corresponds to input document r.
    """
    sequences, positions, seg_ids = [], [], []
    cur_ids: list[int] = []
    cur_pos: list[int] = []
    cur_seg: list[int] = []
    n_segs = 0

    def flush():
        nonlocal cur_ids, cur_pos, cur_seg, n_segs
        if cur_ids:
            sequences.append(cur_ids)
            positions.append(cur_pos)
            seg_ids.append(cur_seg)
        cur_ids, cur_pos, cur_seg, n_segs = [], [], [], 0

    for ids in doc_token_ids:
        if n_segs == TOPIC_PACK_SIZE or len(cur_ids) + len(ids) > max_len:
            flush()
        cur_ids = cur_ids + list(ids)
        cur_pos = cur_pos + list(range(len(ids)))
        cur_seg = cur_seg + [n_segs] * len(ids)
        n_segs += 1
    flush()
    return sequences, positions, seg_ids


def train_step(params: EncoderParams, batch, config: TrainConfig, optimizer: Adam):
    """One optimizer update from a single-task batch; returns the loss."""
    if isinstance(batch, TripletBatch):
        out_a, cache_a = forward_batch(params, *_pad_single_segment(batch.anchors))
        out_p, cache_p = forward_batch(params, *_pad_single_segment(batch.positives))
        out_n, cache_n = forward_batch(params, *_pad_single_segment(batch.negatives))
        loss, d_a, d_p, d_n = info_nce_batch(
            out_a.semantic,
            out_p.semantic,
            out_n.semantic,
            tau=config.temperature,
            shard_size=config.batch_size,
            cross_shard=config.cross_shard_negatives,
        )
        grads = backward_batch(params, cache_a, d_semantic=d_a)
        for extra in (
            backward_batch(params, cache_p, d_semantic=d_p, stop_gradient=batch.positive_stops),
            backward_batch(params, cache_n, d_semantic=d_n, stop_gradient=batch.negative_stops),
        ):
            for key, grad in extra.items():
                grads[key] += grad
    elif isinstance(batch, TopicBatch):
        out, cache = forward_batch(params, *_pad_packed(batch.sequences, batch.positions, batch.seg_ids))
        loss, d_logits, _ = bce_multilabel(out.logits, batch.labels, batch.label_mask)
        grads = backward_batch(params, cache, d_logits=d_logits)
    else:
        raise TypeError(f"unknown batch type {type(batch).__name__}")

    if not np.isfinite(loss):
        raise NumericError("non-finite training loss")
    optimizer.step(params.arrays, grads)
    return loss


@dataclass
class TopicTrainingData:
    """Topic examples plus the text and language of each labeled document."""

    examples: list[TopicExample]
    texts: dict[str, str]
    languages: dict[str, str] = field(default_factory=dict)


class DocumentEmbedder(BaseEstimator, TransformerMixin):
    """Trainable document encoder with a scikit-learn estimator surface.

    ``fit`` runs alternate multitask training over augmented triplets and
    (optionally) topic examples; ``transform`` embeds raw texts with the
    trained encoder's unit-norm semantic head.
    """

    def __init__(
        self,
        vocab: Vocab | None = None,
        embed_dim=64,
        num_blocks=1,
        num_heads=4,
        hidden_dim=128,
        semantic_dim=32,
        max_len=512,
        temperature=0.05,
        batch_size=64,
        learning_rate=5e-5,
        adam_beta1=0.9,
        adam_beta2=0.999,
        adam_eps=1e-8,
        steps=1000,
        virtual_shards=1,
        cross_shard_negatives=True,
        smoothing_alpha=0.7,
        seed=0,
    ):
        self.vocab = vocab
        self.embed_dim = embed_dim
        self.num_blocks = num_blocks
        self.num_heads = num_heads
        self.hidden_dim = hidden_dim
        self.semantic_dim = semantic_dim
        self.max_len = max_len
        self.temperature = temperature
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_eps = adam_eps
        self.steps = steps
        self.virtual_shards = virtual_shards
        self.cross_shard_negatives = cross_shard_negatives
        self.smoothing_alpha = smoothing_alpha
        self.seed = seed

    def _train_config(self):
        return TrainConfig(
            temperature=self.temperature,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            steps=self.steps,
            virtual_shards=self.virtual_shards,
            cross_shard_negatives=self.cross_shard_negatives,
            smoothing_alpha=self.smoothing_alpha,
            seed=self.seed,
        )

    def _build_datasets(self, triplets, topics):
        tokenize = self.tokenizer_.tokenize
        by_language: dict[tuple[str, str], list] = {}
        for triplet in triplets:
            item = (
                tokenize(triplet.anchor_text, self.max_len),
                tokenize(triplet.positive_text, self.max_len),
                tokenize(triplet.negative_text, self.max_len),
                bool(triplet.positive_translated),
                bool(triplet.negative_translated),
            )
            by_language.setdefault((triplet.language, TRIPLET_TASK), []).append(item)
        if topics is not None:
            k = len(self.topic_index_)
            for example in topics.examples:
                if example.doc_id not in topics.texts:
                    continue
                labels = np.zeros(k)
                mask = np.zeros(k, dtype=bool)
                for topic in example.positives:
                    labels[self.topic_index_[topic]] = 1.0
                    mask[self.topic_index_[topic]] = True
                for topic in example.negatives:
                    mask[self.topic_index_[topic]] = True
                if not mask.any():
                    continue
                language = topics.languages.get(example.doc_id, "und")
                item = (tokenize(topics.texts[example.doc_id], self.max_len), labels, mask)
                by_language.setdefault((language, TOPIC_TASK), []).append(item)
        return [TaskDataset(key, items) for key, items in sorted(by_language.items())]

    def fit(self, triplets: list[AugmentedTriplet], topics: TopicTrainingData | None = None, metrics_path=None):
        if not triplets:
            raise ValueError("need at least one training triplet")
        vocab = self.vocab
        if vocab is None:
            texts = [t for tr in triplets for t in (tr.anchor_text, tr.positive_text, tr.negative_text)]
            if topics is not None:
                texts.extend(topics.texts.values())
            vocab = build_vocab(texts)
        self.vocab_ = vocab
        self.tokenizer_ = WordpieceTokenizer(vocab)

        topic_ids = sorted({t for e in (topics.examples if topics else []) for t in e.positives | e.negatives})
        self.topic_index_ = {t: i for i, t in enumerate(topic_ids)}

        config = self._train_config()
        encoder_config = EncoderConfig(
            vocab_size=len(vocab),
            embed_dim=self.embed_dim,
            num_blocks=self.num_blocks,
            num_heads=self.num_heads,
            hidden_dim=self.hidden_dim,
            semantic_dim=self.semantic_dim,
            num_topics=max(1, len(topic_ids)),
            max_len=self.max_len,
            seed=self.seed,
        )
        self.params_ = init_params(encoder_config)
        datasets = self._build_datasets(triplets, topics)
        self.history_ = train(self.params_, datasets, config, metrics_path=metrics_path)
        return self

    def transform(self, texts, output="semantic") -> np.ndarray:
        check_is_fitted(self, "params_")
        return encode_texts(self.params_, self.tokenizer_, texts, self.max_len, output)

    def topic_logits(self, texts) -> np.ndarray:
        return self.transform(texts, output="logits")

    def save(self, path) -> None:
        """One-file checkpoint: config header, parameters, vocab, topics."""
        check_is_fitted(self, "params_")
        import json

        header = {
            "format_version": 1,
            "encoder": self.params_.config.__dict__,
            "estimator": {k: v for k, v in self.get_params().items() if k != "vocab"},
            "topics": sorted(self.topic_index_, key=self.topic_index_.get),
        }
        np.savez(
            path,
            __header__=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
            __vocab__=np.array(self.vocab_.tokens),
            **self.params_.arrays,
        )

    @classmethod
    def load(cls, path) -> "DocumentEmbedder":
        import json

        data = np.load(path, allow_pickle=False)
        header = json.loads(bytes(data["__header__"]).decode())
        if header.get("format_version") != 1:
            raise ValueError(f"unsupported checkpoint format: {header.get('format_version')}")
        vocab = Vocab(list(data["__vocab__"]))
        est = cls(vocab=vocab, **header["estimator"])
        est.vocab_ = vocab
        est.tokenizer_ = WordpieceTokenizer(vocab)
        est.topic_index_ = {t: i for i, t in enumerate(header["topics"])}
        config = EncoderConfig(**header["encoder"])
        arrays = {k: data[k] for k in data.files if not k.startswith("__")}
        est.params_ = EncoderParams(config, arrays)
        return est


def encode_texts(params, tokenizer, texts, max_len, output="semantic", chunk=128):
    outputs = []
    texts = list(texts)
    for start in range(0, len(texts), chunk):
        rows = [tokenizer.tokenize(t, max_len) for t in texts[start : start + chunk]]
        out, _ = forward_batch(params, *_pad_single_segment(rows))
        outputs.append(getattr(out, output))
    if not outputs:
        return np.zeros((0,))
    return np.concatenate(outputs, axis=0)


def _draw(rng, n, count):
    if count <= n:
        return rng.choice(n, size=count, replace=False)
    return rng.choice(n, size=count, replace=True)


def train(params: EncoderParams, datasets: list[TaskDataset], config: TrainConfig, metrics_path=None):
    """Alternate training loop; returns per-step (step, task-key, loss).

    A non-finite loss aborts with the step and dataset key in the message.
    """
    if not datasets:
        raise ValueError("no training datasets")
    optimizer = Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    history = []
    writer = None
    handle = None
    if metrics_path is not None:
        handle = open(metrics_path, "w", newline="", encoding="utf-8")
        writer = csv.writer(handle)
        writer.writerow(["step", "language", "task", "loss"])
    try:
        for step in range(config.steps):
            index = sample_task(datasets, config.smoothing_alpha, config.seed, step)
            dataset = datasets[index]
            language, task = dataset.key
            rng = check_random_state([config.seed, step, 1])
            if task == TRIPLET_TASK:
                count = config.batch_size * config.virtual_shards
                picks = _draw(rng, dataset.size, count)
                items = [dataset.examples[i] for i in picks]
                batch = TripletBatch(
                    anchors=[i[0] for i in items],
                    positives=[i[1] for i in items],
                    negatives=[i[2] for i in items],
                    positive_stops=np.array([i[3] for i in items]),
                    negative_stops=np.array([i[4] for i in items]),
                )
            else:
                picks = _draw(rng, dataset.size, config.batch_size)
                items = [dataset.examples[i] for i in picks]
                sequences, positions, seg_ids = pack_topic_docs(
                    [i[0] for i in items], params.config.max_len
                )
                batch = TopicBatch(
                    sequences=sequences,
                    positions=positions,
                    seg_ids=seg_ids,
                    labels=np.stack([i[1] for i in items]),
                    label_mask=np.stack([i[2] for i in items]),
                )
            try:
                loss = train_step(params, batch, config, optimizer)
            except NumericError as exc:
                raise NumericError(
                    f"step {step} on dataset {dataset.key}: {exc}"
                ) from exc
            history.append((step, dataset.key, loss))
            if writer is not None:
                writer.writerow([step, language, task, f"{loss:.6f}"])
    finally:
        if handle is not None:
            handle.close()
    return history
