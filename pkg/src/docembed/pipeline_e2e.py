"""The seeded synthetic end-to-end experiment.

Generates a bilingual story corpus, drives the full mining pipeline,
trains the tiny encoder, and evaluates against a randomly initialized
baseline: held-out triplet accuracy, story-clustering ARI, and a frozen
linear probe for topics. The report is a flat key=value file containing no
wall-clock data, so runs with the same seed produce identical reports.
"""

from __future__ import annotations

import json
import os
import sys
import zlib

import numpy as np

from docembed import corpus as corpus_mod
from docembed.evaluation import LinearProbe, kmeans_ari
from docembed.mining.augment import title_body
from docembed.mining.pipeline import (
    MiningConfig,
    augment_document_triplets,
    mine_triplets,
    save_augmented_triplets,
    save_document_triplets,
)
from docembed.nn.trainer import DocumentEmbedder, TopicTrainingData
from docembed.synth import SynthConfig, generate, save_labeled_pairs, save_translation
from docembed.text.vocab import build_vocab
from docembed.topics import (
    HubPage,
    balance_sample,
    derive_examples,
    mine_hub_topics,
    positive_ratio,
    save_examples,
)
from docembed.aux_embed import save_table

SYNTH_MIN_WORDS = 20
HELDOUT_FRACTION_MOD = 5  # anchors hashing to 0 mod 5 are held out


def _progress(verbose, message):
    if verbose:
        print(message, file=sys.stderr)


def _heldout_split(triplets):
    train, held = [], []
    for t in triplets:
        bucket = zlib.crc32(t.anchor_id.encode()) % HELDOUT_FRACTION_MOD
        (held if bucket == 0 else train).append(t)
    return train, held


def _stratified_test_stories(synth, seed):
    """One held-out story per topic (the rest train the probe)."""
    by_topic: dict[int, list[int]] = {}
    for doc_id, story in synth.story_of.items():
        by_topic.setdefault(synth.primary_topic_of[doc_id], []).append(story)
    rng = np.random.default_rng(seed)
    test = set()
    for topic in sorted(by_topic):
        stories = sorted(set(by_topic[topic]))
        if len(stories) > 1:
            test.add(int(rng.choice(stories)))
    return test


def _triplet_accuracy(embedder, triplets, docs_by_id):
    texts = []
    for t in triplets:
        texts.extend(
            [
                title_body(docs_by_id[t.anchor_id]),
                title_body(docs_by_id[t.positive_id]),
                title_body(docs_by_id[t.negative_id]),
            ]
        )
    emb = embedder.transform(texts)
    emb = emb.reshape(len(triplets), 3, -1)
    pos = np.sum(emb[:, 0] * emb[:, 1], axis=1)
    neg = np.sum(emb[:, 0] * emb[:, 2], axis=1)
    return float(np.mean(pos > neg))


def run_synthetic_experiment(
    out_dir,
    seed: int = 0,
    steps: int = 2000,
    batch_size: int = 16,
    learning_rate: float = 2e-3,
    verbose: bool = False,
) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    path = lambda name: os.path.join(out_dir, name)  # noqa: E731

    _progress(verbose, "generating corpus")
    synth = generate(SynthConfig(seed=seed + 7))
    corpus_mod.write_corpus(synth.documents, path("corpus.jsonl"))
    save_table(synth.tables.entity_table, path("entity_table.tsv"))
    save_table(synth.tables.token_table, path("token_table.tsv"))
    save_labeled_pairs(synth.labeled_pairs, path("labeled_pairs.jsonl"))
    save_translation(synth.translation, path("translation.tsv"))
    with open(path("hubs.jsonl"), "w", encoding="utf-8") as handle:
        for hub in synth.hubs:
            handle.write(json.dumps(hub) + "\n")
    with open(path("lexicon.tsv"), "w", encoding="utf-8") as handle:
        for surface in sorted(synth.lexicon):
            handle.write(f"{surface}\t{synth.lexicon[surface]}\n")

    docs, stats = corpus_mod.ingest(path("corpus.jsonl"), min_words=SYNTH_MIN_WORDS)
    docs = corpus_mod.dedup(docs)
    docs_by_id = {d.id: d for d in docs}

    _progress(verbose, "mining triplets")
    mining = MiningConfig(seed=seed)
    doc_triplets, _ = mine_triplets(
        docs, synth.tables, synth.labeled_pairs, mining, translator=None
    )
    train_triplets, held_triplets = _heldout_split(doc_triplets)
    augmented = augment_document_triplets(
        train_triplets, docs_by_id, synth.tables, translator=synth.translator()
    )
    save_document_triplets(doc_triplets, path("triplets.jsonl"))
    save_augmented_triplets(augmented, path("augmented.jsonl"))

    _progress(verbose, "mining topics")
    hubs = [HubPage(h["publisher"], h["title"], h["member_doc_ids"]) for h in synth.hubs]
    lexicon = {k.lower(): v for k, v in synth.lexicon.items()}
    doc_topics = mine_hub_topics(hubs, lexicon)
    examples = balance_sample(derive_examples(doc_topics, hubs, lexicon), seed=seed)
    save_examples(examples, path("topics.jsonl"))
    topics = TopicTrainingData(
        examples=examples,
        texts={d.id: title_body(d) for d in docs},
        languages={d.id: d.language for d in docs},
    )

    vocab = build_vocab([title_body(d) for d in docs])

    def make_embedder(train_steps):
        return DocumentEmbedder(
            vocab=vocab,
            embed_dim=64,
            num_blocks=1,
            num_heads=4,
            hidden_dim=128,
            semantic_dim=32,
            max_len=96,
            batch_size=batch_size,
            virtual_shards=2,
            learning_rate=learning_rate,
            steps=train_steps,
            seed=seed,
        )

    _progress(verbose, "random-init baseline")
    baseline = make_embedder(0).fit(augmented, topics)

    _progress(verbose, f"training {steps} steps")
    embedder = make_embedder(steps).fit(augmented, topics, metrics_path=path("metrics.csv"))
    embedder.save(path("checkpoint.npz"))

    _progress(verbose, "evaluating")
    story_docs = [d for d in docs if d.id in synth.story_of]
    story_labels = [synth.story_of[d.id] for d in story_docs]
    story_texts = [title_body(d) for d in story_docs]

    report: dict[str, object] = {}
    report["corpus_documents"] = len(docs)
    report["rejected_records"] = stats.rejected
    report["document_triplets"] = len(doc_triplets)
    report["train_triplets"] = len(train_triplets)
    report["heldout_triplets"] = len(held_triplets)
    report["augmented_triplets"] = len(augmented)
    report["topic_examples"] = len(examples)
    report["topic_positive_ratio"] = round(positive_ratio(examples), 4)

    report["heldout_triplet_accuracy"] = round(
        _triplet_accuracy(embedder, held_triplets, docs_by_id), 4
    )
    report["heldout_triplet_accuracy_random"] = round(
        _triplet_accuracy(baseline, held_triplets, docs_by_id), 4
    )

    k = len(set(story_labels))
    trained_emb = embedder.transform(story_texts)
    random_emb = baseline.transform(story_texts)
    report["kmeans_ari_trained"] = round(kmeans_ari(trained_emb, story_labels, k, seed=seed), 4)
    report["kmeans_ari_random"] = round(kmeans_ari(random_emb, story_labels, k, seed=seed), 4)

    # probe split is by story (test stories unseen in training) and
    # stratified by topic so every topic keeps train and test stories
    topic_labels = np.array([synth.primary_topic_of[d.id] for d in story_docs])
    test_stories = _stratified_test_stories(synth, seed)
    te = np.array([synth.story_of[d.id] in test_stories for d in story_docs])
    for name, emb_model in (("trained", embedder), ("random", baseline)):
        pooled = emb_model.transform(story_texts, output="pooled")
        probe = LinearProbe(l2=1e-2, seed=seed).fit(pooled[~te], topic_labels[~te])
        report[f"probe_accuracy_{name}"] = round(probe.score(pooled[te], topic_labels[te]), 4)

    report["train_steps"] = steps
    with open(path("report.txt"), "w", encoding="utf-8") as handle:
        for key in sorted(report):
            handle.write(f"{key}={report[key]}\n")
    return report
