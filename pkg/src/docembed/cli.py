"""Command-line orchestration of the pipeline stages.

Every stage reads and writes plain files, so each is re-runnable in
isolation. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric
failure. Settings resolve as environment > flag > config file > default.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from docembed._validation import DataError, NumericError
from docembed import corpus as corpus_mod
from docembed.aux_embed import AuxEmbedding, EmbedTables, Space, embed_corpus, load_table, save_table
from docembed.config import load_config_file, resolve
from docembed.evaluation import kmeans_ari, linear_probe, mean_average_precision, spearman_rho
from docembed.mining.augment import title_body
from docembed.mining.pipeline import (
    MiningConfig,
    mine_triplets,
    save_augmented_triplets,
    save_document_triplets,
    load_augmented_triplets,
)
from docembed.neighbors import InvertedFileIndex
from docembed.nn.trainer import DocumentEmbedder, TopicTrainingData
from docembed.synth import load_labeled_pairs, load_translator
from docembed.text.packing import PackerConfig, pack_greedy, save_packed
from docembed.text.tokenizer import WordpieceTokenizer
from docembed.text.vocab import Vocab, build_vocab
from docembed.topics import (
    balance_sample,
    derive_examples,
    load_examples,
    load_hubs,
    load_lexicon,
    mine_hub_topics,
    positive_ratio,
    save_examples,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _require(path, stage_hint):
    if path is None or not os.path.exists(str(path)):
        raise DataError(f"missing artifact {path!r}; run `{stage_hint}` first")
    return path


def _load_corpus(path, min_words=0):
    docs, _ = corpus_mod.ingest(_require(path, "ingest"), min_words=min_words)
    return docs


# ---------------------------------------------------------------- commands


def cmd_ingest(args, cfg):
    min_words = resolve("min_words", args.min_words, cfg, corpus_mod.DEFAULT_MIN_WORDS, int)
    docs, stats = corpus_mod.ingest(args.input, min_words=min_words)
    docs = corpus_mod.dedup(docs)
    corpus_mod.write_corpus(docs, args.output)
    print(f"retained={len(docs)} rejected={stats.rejected} languages={len(stats.per_language)}")
    return EXIT_OK


def cmd_embed_aux(args, cfg):
    docs = _load_corpus(args.corpus)
    tables = EmbedTables(
        entity_table=load_table(_require(args.entity_table, "provide entity table")),
        token_table=load_table(_require(args.token_table, "provide token table")),
    )
    space = Space(args.space)
    embeddings = embed_corpus(docs, space, tables)
    save_table({e.doc_id: e.vector for e in embeddings}, args.output)
    print(f"space={space.value} embedded={len(embeddings)} of {len(docs)}")
    return EXIT_OK


def cmd_build_index(args, cfg):
    table = load_table(_require(args.embeddings, "embed-aux"))
    space = Space(args.space)
    embeddings = [AuxEmbedding(doc_id, space, vec) for doc_id, vec in sorted(table.items())]
    index = InvertedFileIndex(
        num_partitions=resolve("num_partitions", args.num_partitions, cfg, 16, int),
        probes=resolve("probes", args.probes, cfg, 4, int),
        seed=args.seed,
    ).fit(embeddings)
    index.save(args.output)
    print(f"indexed={len(embeddings)} partitions={index.num_partitions}")
    return EXIT_OK


def _mining_config(args, cfg):
    return MiningConfig(
        top_k=resolve("top_k", args.top_k, cfg, 20, int),
        max_pos_days=resolve("max_pos_days", args.max_pos_days, cfg, 1, int),
        min_neg_days=resolve("min_neg_days", args.min_neg_days, cfg, 365, int),
        denoiser_threshold=resolve("denoiser_threshold", args.threshold, cfg, 0.5, float),
        num_partitions=resolve("num_partitions", args.num_partitions, cfg, 8, int),
        probes=resolve("probes", args.probes, cfg, 8, int),
        seed=args.seed,
    )


def cmd_mine_triplets(args, cfg):
    docs = _load_corpus(args.corpus)
    tables = EmbedTables(
        entity_table=load_table(_require(args.entity_table, "provide entity table")),
        token_table=load_table(_require(args.token_table, "provide token table")),
    )
    labeled = load_labeled_pairs(_require(args.labeled_pairs, "provide labeled pairs"))
    translator = load_translator(args.translate_dict) if args.translate_dict else None
    indices = None
    if args.index_dir:
        indices = {}
        for space in Space:
            path = os.path.join(args.index_dir, f"{space.value}.npz")
            if os.path.exists(path):
                indices[space] = InvertedFileIndex.load(path)
    config = _mining_config(args, cfg)
    triplets, augmented = mine_triplets(
        docs, tables, labeled, config, translator=translator, indices=indices
    )
    save_document_triplets(triplets, args.out_triplets)
    save_augmented_triplets(augmented, args.out)
    print(f"document_triplets={len(triplets)} augmented={len(augmented)}")
    return EXIT_OK


def cmd_mine_topics(args, cfg):
    hubs = load_hubs(_require(args.hubs, "provide hubs file"))
    lexicon = load_lexicon(_require(args.lexicon, "provide lexicon"))
    doc_topics = mine_hub_topics(hubs, lexicon)
    examples = derive_examples(doc_topics, hubs, lexicon)
    ratio = resolve("target_pos_ratio", args.balance_ratio, cfg, 0.25, float)
    examples = balance_sample(examples, target_pos_ratio=ratio, seed=args.seed)
    save_examples(examples, args.output)
    print(f"examples={len(examples)} positive_ratio={positive_ratio(examples):.4f}")
    return EXIT_OK


def cmd_pack(args, cfg):
    docs = _load_corpus(args.corpus)
    texts = [title_body(doc) for doc in docs]
    if args.vocab and os.path.exists(args.vocab):
        vocab = Vocab.load(args.vocab)
    else:
        vocab = build_vocab(texts)
        if args.vocab:
            vocab.save(args.vocab)
    tokenizer = WordpieceTokenizer(vocab)
    max_len = resolve("max_len", args.max_len, cfg, 512, int)
    config = PackerConfig(
        capacity=resolve("capacity", args.capacity, cfg, 64, int),
        max_len=max_len,
        min_proportion=resolve("min_proportion", args.min_proportion, cfg, 0.9, float),
    )
    instances = [tokenizer.tokenize(text, max_len) for text in texts]
    packed = pack_greedy(instances, config)
    save_packed(packed, args.output)
    ratio = len(instances) / len(packed) if packed else 0.0
    print(f"instances={len(instances)} packed={len(packed)} compression={ratio:.2f}")
    return EXIT_OK


def _embedder_from_config(args, cfg, vocab=None):
    return DocumentEmbedder(
        vocab=vocab,
        embed_dim=resolve("embed_dim", None, cfg, 64, int),
        num_blocks=resolve("num_blocks", None, cfg, 1, int),
        num_heads=resolve("num_heads", None, cfg, 4, int),
        hidden_dim=resolve("hidden_dim", None, cfg, 128, int),
        semantic_dim=resolve("semantic_dim", None, cfg, 32, int),
        max_len=resolve("max_len", None, cfg, 512, int),
        temperature=resolve("temperature", None, cfg, 0.05, float),
        batch_size=resolve("batch_size", None, cfg, 64, int),
        learning_rate=resolve("learning_rate", None, cfg, 5e-5, float),
        steps=resolve("steps", getattr(args, "steps", None), cfg, 1000, int),
        virtual_shards=resolve("virtual_shards", None, cfg, 1, int),
        cross_shard_negatives=resolve("cross_shard_negatives", None, cfg, True, bool),
        smoothing_alpha=resolve("smoothing_alpha", None, cfg, 0.7, float),
        seed=args.seed,
    )


def _topic_training_data(topics_path, docs):
    examples = load_examples(topics_path)
    texts = {doc.id: title_body(doc) for doc in docs}
    languages = {doc.id: doc.language for doc in docs}
    return TopicTrainingData(examples=examples, texts=texts, languages=languages)


def cmd_train(args, cfg):
    triplets = load_augmented_triplets(_require(args.triplets, "mine-triplets"))
    topics = None
    if args.topics:
        docs = _load_corpus(args.corpus)
        topics = _topic_training_data(_require(args.topics, "mine-topics"), docs)
    embedder = _embedder_from_config(args, cfg)
    embedder.fit(triplets, topics, metrics_path=args.metrics_out)
    embedder.save(args.checkpoint_out)
    final = embedder.history_[-1][2] if embedder.history_ else float("nan")
    print(f"steps={len(embedder.history_)} final_loss={final:.4f}")
    return EXIT_OK


def _read_jsonl(path):
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def cmd_eval(args, cfg):
    embedder = DocumentEmbedder.load(_require(args.checkpoint, "train"))
    rows = _read_jsonl(_require(args.data, "provide an evaluation dataset"))
    report: dict[str, float] = {}
    csv_rows: list[tuple] = []
    vectors = args.vectors

    def encode(texts):
        out = embedder.transform(texts, output=vectors)
        if vectors == "pooled":  # cosine needs unit rows either way
            out = out / np.linalg.norm(out, axis=1, keepdims=True)
        return out

    if args.task == "similarity":
        a = encode([r["text_a"] for r in rows])
        b = encode([r["text_b"] for r in rows])
        sims = np.sum(a * b, axis=1)
        gold = [float(r["score"]) for r in rows]
        report["spearman_rho"] = spearman_rho(sims, gold)
        csv_rows = [("pair", "cosine", "gold")] + [
            (i, f"{s:.6f}", g) for i, (s, g) in enumerate(zip(sims, gold))
        ]
    elif args.task == "clustering":
        embeddings = encode([r["text"] for r in rows])
        labels = [r["cluster"] for r in rows]
        k = len(set(labels))
        report["kmeans_ari"] = kmeans_ari(embeddings, labels, k, seed=args.seed)
        report["clusters"] = k
        csv_rows = [("metric", "value"), ("kmeans_ari", report["kmeans_ari"])]
    elif args.task == "retrieval":
        if args.corpus is None:
            raise DataError("retrieval evaluation needs --corpus for the document pool")
        docs = _load_corpus(args.corpus)
        corpus_ids = [d.id for d in docs]
        corpus_emb = encode([title_body(d) for d in docs])
        queries = [(encode([r["query"]])[0], set(r["relevant_ids"])) for r in rows]
        report[f"map_at_{args.k}"] = mean_average_precision(queries, corpus_ids, corpus_emb, k=args.k)
        csv_rows = [("metric", "value"), (f"map_at_{args.k}", report[f"map_at_{args.k}"])]
    elif args.task == "probe":
        train_rows = [r for r in rows if r.get("split", "train") == "train"]
        test_rows = [r for r in rows if r.get("split") == "test"]
        if not train_rows or not test_rows:
            raise DataError("probe data needs rows with split=train and split=test")
        emb_train = embedder.transform([r["text"] for r in train_rows], output="pooled")
        emb_test = embedder.transform([r["text"] for r in test_rows], output="pooled")
        report["probe_accuracy"] = linear_probe(
            emb_train, [r["label"] for r in train_rows], emb_test, [r["label"] for r in test_rows]
        )
        csv_rows = [("metric", "value"), ("probe_accuracy", report["probe_accuracy"])]
    _write_report(args.report, report)
    if args.csv_out:
        with open(args.csv_out, "w", encoding="utf-8") as handle:
            for row in csv_rows:
                handle.write(",".join(str(v) for v in row) + "\n")
    for key in sorted(report):
        print(f"{key}={report[key]}")
    return EXIT_OK


def _write_report(path, report: dict):
    if path:
        with open(path, "w", encoding="utf-8") as handle:
            for key in sorted(report):
                handle.write(f"{key}={report[key]}\n")


def cmd_synth_e2e(args, cfg):
    from docembed.pipeline_e2e import run_synthetic_experiment

    report = run_synthetic_experiment(
        out_dir=args.out_dir,
        seed=args.seed,
        steps=resolve("steps", args.steps, cfg, 2000, int),
        batch_size=resolve("batch_size", args.batch_size, cfg, 16, int),
        learning_rate=resolve("learning_rate", args.lr, cfg, 2e-3, float),
        verbose=args.verbose,
    )
    for key in sorted(report):
        print(f"{key}={report[key]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="docembed", description=__doc__)
    parser.add_argument("--config", default=None, help="key=value settings file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", help="validate, clean and dedup a JSONL corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--min-words", type=int, default=None)
    p.add_argument("--output", required=True)

    p = sub.add_parser("embed-aux", help="compute one auxiliary embedding space")
    p.add_argument("--corpus", required=True)
    p.add_argument("--entity-table", required=True)
    p.add_argument("--token-table", required=True)
    p.add_argument("--space", choices=[s.value for s in Space], required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("build-index", help="build an inverted-file index over embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--space", choices=[s.value for s in Space], required=True)
    p.add_argument("--num-partitions", type=int, default=None)
    p.add_argument("--probes", type=int, default=None)
    p.add_argument("--output", required=True)

    p = sub.add_parser("mine-triplets", help="mine, filter, denoise and augment triplets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--entity-table", required=True)
    p.add_argument("--token-table", required=True)
    p.add_argument("--labeled-pairs", required=True)
    p.add_argument("--index-dir", default=None)
    p.add_argument("--translate-dict", default=None)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--max-pos-days", type=int, default=None)
    p.add_argument("--min-neg-days", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--num-partitions", type=int, default=None)
    p.add_argument("--probes", type=int, default=None)
    p.add_argument("--out-triplets", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mine-topics", help="mine document-topic examples from hubs")
    p.add_argument("--hubs", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--balance-ratio", type=float, default=None)
    p.add_argument("--output", required=True)

    p = sub.add_parser("pack", help="tokenize and greedily pack a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--capacity", type=int, default=None)
    p.add_argument("--min-proportion", type=float, default=None)
    p.add_argument("--output", required=True)

    p = sub.add_parser("train", help="alternate multitask training")
    p.add_argument("--triplets", required=True)
    p.add_argument("--topics", default=None)
    p.add_argument("--corpus", default=None, help="needed with --topics for document text")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--checkpoint-out", required=True)
    p.add_argument("--metrics-out", default=None)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--task", choices=["similarity", "clustering", "retrieval", "probe"], required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--corpus", default=None, help="retrieval corpus")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--vectors", choices=["semantic", "pooled"], default="semantic",
                   help="embedding used for similarity/clustering/retrieval")
    p.add_argument("--report", default=None)
    p.add_argument("--csv-out", default=None)

    p = sub.add_parser("synth-e2e", help="seeded synthetic end-to-end experiment")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "embed-aux": cmd_embed_aux,
    "build-index": cmd_build_index,
    "mine-triplets": cmd_mine_triplets,
    "mine-topics": cmd_mine_topics,
    "pack": cmd_pack,
    "train": cmd_train,
    "eval": cmd_eval,
    "synth-e2e": cmd_synth_e2e,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    cfg = {}
    if args.config:
        try:
            cfg = load_config_file(args.config)
        except (OSError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_DATA
    try:
        return COMMANDS[args.command](args, cfg)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
