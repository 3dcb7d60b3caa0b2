"""Seeded synthetic news corpus for the end-to-end experiment.

The generator builds a bilingual corpus with the structure the mining
pipeline exploits:

* stories: bursts of documents published within a day of each other that
  share entities, a thumbnail, and a story vocabulary (with translated
  surface forms in the second language);
* evergreen distractors: themed documents spread over years that look like
  negatives to the date filter but are really about one perennial topic;
* publisher hubs: per-publisher topic pages supplying document-topic
  labels, plus author-page distractors that match no lexicon entry.

All randomness flows from one seed, so the corpus, the auxiliary tables
and the ground truth are reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from docembed.corpus import Document
from docembed.aux_embed import EmbedTables

HEX_DIGITS = "0123456789abcdef"


@dataclass
class SynthConfig:
    n_stories: int = 20
    docs_per_story: int = 10
    n_evergreen: int = 40
    n_evergreen_themes: int = 5
    n_topics: int = 6
    n_publishers: int = 4
    span_days: int = 3 * 365
    start_day: int = 18263  # 2020-01-02
    languages: tuple[str, ...] = ("en", "xx")
    story_words: int = 16
    topic_words: int = 8
    theme_words: int = 8
    filler_words: int = 60
    body_story_draws: int = 13
    body_topic_draws: int = 3  # primary topic
    body_topic2_draws: int = 2  # secondary topic, when present
    body_filler_draws: int = 22
    body_unique_noise: int = 6  # per-document one-off tokens (boilerplate)
    entity_dim: int = 16
    token_dim: int = 16
    hash_digits: int = 16  # 64-bit thumbnail hash
    seed: int = 7


@dataclass
class SynthCorpus:
    documents: list[Document]
    tables: EmbedTables
    hubs: list[dict]
    lexicon: dict[str, str]  # surface -> topic id
    translation: dict[str, str]  # xx token -> en token
    labeled_pairs: list[tuple[str, str, bool]]
    story_of: dict[str, int] = field(default_factory=dict)
    theme_of: dict[str, int] = field(default_factory=dict)
    primary_topic_of: dict[str, int] = field(default_factory=dict)

    def translator(self):
        mapping = self.translation

        def translate(text: str) -> str:
            return " ".join(mapping.get(tok, tok) for tok in text.split())

        return translate


def _surface(word: str, language: str) -> str:
    return word if language == "en" else "z" + word


def _random_hash(rng, digits):
    return "".join(rng.choice(list(HEX_DIGITS)) for _ in range(digits))


def _flip_hash_bits(rng, hex_hash: str, n_bits: int) -> str:
    bits = []
    for digit in hex_hash:
        value = int(digit, 16)
        bits.extend((value >> shift) & 1 for shift in (3, 2, 1, 0))
    for i in rng.choice(len(bits), size=n_bits, replace=False):
        bits[i] ^= 1
    out = []
    for i in range(0, len(bits), 4):
        out.append(HEX_DIGITS[bits[i] * 8 + bits[i + 1] * 4 + bits[i + 2] * 2 + bits[i + 3]])
    return "".join(out)


def generate(config: SynthConfig | None = None) -> SynthCorpus:
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)

    story_vocab = [[f"s{k}w{j}" for j in range(config.story_words)] for k in range(config.n_stories)]
    topic_vocab = [[f"t{k}w{j}" for j in range(config.topic_words)] for k in range(config.n_topics)]
    theme_vocab = [
        [f"e{k}w{j}" for j in range(config.theme_words)] for k in range(config.n_evergreen_themes)
    ]
    filler = [f"f{j}" for j in range(config.filler_words)]
    all_words = [w for group in story_vocab + topic_vocab + theme_vocab for w in group] + filler

    translation = {_surface(w, "xx"): w for w in all_words}

    # auxiliary tables: one random unit vector per entity / per token surface
    def unit(dim):
        v = rng.normal(size=dim)
        return v / np.linalg.norm(v)

    entity_table: dict[str, np.ndarray] = {}
    token_table: dict[str, np.ndarray] = {}
    for word in all_words:
        vec = unit(config.token_dim)
        for language in config.languages:
            token_table[_surface(word, language)] = vec  # shared concept vector

    story_entities = []
    for k in range(config.n_stories):
        names = [f"ent_s{k}_{i}" for i in range(4)]
        story_entities.append(names)
        for name in names:
            entity_table[name] = unit(config.entity_dim)
    theme_entities = []
    for m in range(config.n_evergreen_themes):
        names = [f"ent_e{m}_{i}" for i in range(4)]
        theme_entities.append(names)
        for name in names:
            entity_table[name] = unit(config.entity_dim)
    common_entities = [f"ent_common_{i}" for i in range(10)]
    for name in common_entities:
        entity_table[name] = unit(config.entity_dim)

    # stories: clustered dates, shared entities/thumbnails, 1-2 topics;
    # the slot grid keeps distinct stories well clear of the one-day
    # positive window
    slots = np.arange(30, config.span_days - 30, 20)
    story_dates = np.sort(rng.choice(slots, size=config.n_stories, replace=False))
    story_dates = story_dates + rng.integers(-5, 6, size=config.n_stories)
    story_topic = [k % config.n_topics for k in range(config.n_stories)]
    story_topic2 = [
        (k + config.n_topics // 2) % config.n_topics if k % 2 == 0 else None
        for k in range(config.n_stories)
    ]
    story_hashes = [_random_hash(rng, config.hash_digits) for _ in range(config.n_stories)]
    theme_hashes = [_random_hash(rng, config.hash_digits) for _ in range(config.n_evergreen_themes)]

    documents: list[Document] = []
    story_of: dict[str, int] = {}
    theme_of: dict[str, int] = {}
    primary_topic_of: dict[str, int] = {}

    def compose(language, story_k=None, theme_m=None):
        words_title: list[str] = []
        words_body: list[str] = []
        if story_k is not None:
            vocab = story_vocab[story_k]
            words_title += list(rng.choice(vocab, size=3, replace=False))
            words_body += list(rng.choice(vocab, size=config.body_story_draws))
            words_body += list(
                rng.choice(topic_vocab[story_topic[story_k]], size=config.body_topic_draws)
            )
            if story_topic2[story_k] is not None:
                words_body += list(
                    rng.choice(topic_vocab[story_topic2[story_k]], size=config.body_topic2_draws)
                )
        else:
            vocab = theme_vocab[theme_m]
            words_title += list(rng.choice(vocab, size=2, replace=False))
            words_body += list(rng.choice(vocab, size=config.body_story_draws + config.body_topic_draws))
        words_title += [rng.choice(filler)]
        words_body += list(rng.choice(filler, size=config.body_filler_draws))
        body = list(words_body)
        rng.shuffle(body)
        title = " ".join(_surface(w, language) for w in words_title)
        text = " ".join(_surface(w, language) for w in body)
        return title, text

    noise_counter = [0]

    def with_noise(body, language):
        extra = []
        for _ in range(config.body_unique_noise):
            extra.append(_surface(f"u{noise_counter[0]}", language))
            noise_counter[0] += 1
        words = body.split() + extra
        rng.shuffle(words)
        return " ".join(words)

    doc_counter = 0
    for k in range(config.n_stories):
        for j in range(config.docs_per_story):
            language = config.languages[j % len(config.languages)]
            doc_id = f"doc{doc_counter:04d}"
            doc_counter += 1
            title, body = compose(language, story_k=k)
            body = with_noise(body, language)
            entities = sorted(rng.choice(story_entities[k], size=3, replace=False))
            entities.append(str(rng.choice(common_entities)))
            anchor_texts = []
            if j % 3 == 0:
                anchor_texts.append(" ".join(title.split()[:2]))  # summarizing anchor
            if j % 5 == 0:
                anchor_texts.append(_surface(str(rng.choice(filler)), language))  # junk anchor
            documents.append(
                Document(
                    id=doc_id,
                    title=title,
                    body=body,
                    anchor_texts=anchor_texts,
                    byline_date=config.start_day + int(story_dates[k]) + int(rng.integers(0, 2)),
                    publisher=f"pub{int(rng.integers(config.n_publishers))}",
                    language=language,
                    entity_ids=entities,
                    image_hash=_flip_hash_bits(rng, story_hashes[k], 4),
                )
            )
            story_of[doc_id] = k
            primary_topic_of[doc_id] = story_topic[k]

    for e in range(config.n_evergreen):
        theme = e % config.n_evergreen_themes
        language = config.languages[e % len(config.languages)]
        doc_id = f"doc{doc_counter:04d}"
        doc_counter += 1
        title, body = compose(language, theme_m=theme)
        body = with_noise(body, language)
        entities = sorted(rng.choice(theme_entities[theme], size=3, replace=False))
        documents.append(
            Document(
                id=doc_id,
                title=title,
                body=body,
                anchor_texts=[],
                byline_date=config.start_day + int(rng.integers(0, config.span_days)),
                publisher=f"pub{int(rng.integers(config.n_publishers))}",
                language=language,
                entity_ids=entities,
                image_hash=_flip_hash_bits(rng, theme_hashes[theme], 4),
            )
        )
        theme_of[doc_id] = theme

    # hubs: one per (publisher, topic) with members, plus author-page noise
    lexicon = {f"area{j}": f"topic{j}" for j in range(config.n_topics)}
    members: dict[tuple[str, int], list[str]] = {}
    for doc in documents:
        doc_topics = []
        if doc.id in story_of:
            k = story_of[doc.id]
            doc_topics.append(story_topic[k])
            if story_topic2[k] is not None:
                doc_topics.append(story_topic2[k])
        else:
            doc_topics.append(theme_of[doc.id] % config.n_topics)
        for t in doc_topics:
            members.setdefault((doc.publisher, t), []).append(doc.id)
    hubs = [
        {"publisher": publisher, "title": f"area{topic}", "member_doc_ids": ids}
        for (publisher, topic), ids in sorted(members.items())
    ]
    for p in range(config.n_publishers):
        staff_docs = [d.id for d in documents if d.publisher == f"pub{p}"][:5]
        if staff_docs:
            hubs.append(
                {"publisher": f"pub{p}", "title": f"staff writer {p}", "member_doc_ids": staff_docs}
            )

    labeled_pairs = _label_pairs(documents, story_of, theme_of, primary_topic_of, rng)

    return SynthCorpus(
        documents=documents,
        tables=EmbedTables(entity_table=entity_table, token_table=token_table),
        hubs=hubs,
        lexicon=lexicon,
        translation=translation,
        labeled_pairs=labeled_pairs,
        story_of=story_of,
        theme_of=theme_of,
        primary_topic_of=primary_topic_of,
    )


def _label_pairs(documents, story_of, theme_of, primary_topic_of, rng, max_true=300):
    """Ground-truth denoiser labels for plausible candidate negatives.

    Same-theme evergreen pairs a year apart are false negatives (label
    False). True negatives are drawn from same-topic pairs of different
    stories, which the text space is likely to retrieve as candidates.
    """
    by_id = {d.id: d for d in documents}
    pairs: list[tuple[str, str, bool]] = []
    evergreen_ids = sorted(theme_of)
    for i, a in enumerate(evergreen_ids):
        for b in evergreen_ids[i + 1 :]:
            if theme_of[a] != theme_of[b]:
                continue
            if abs(by_id[a].byline_date - by_id[b].byline_date) >= 365:
                pairs.append((a, b, False))
    story_ids = sorted(story_of)
    candidates = []
    for i, a in enumerate(story_ids):
        for b in story_ids[i + 1 :]:
            if story_of[a] == story_of[b] or primary_topic_of[a] != primary_topic_of[b]:
                continue
            if abs(by_id[a].byline_date - by_id[b].byline_date) >= 365:
                candidates.append((a, b, True))
    picks = rng.choice(len(candidates), size=min(max_true, len(candidates)), replace=False)
    pairs.extend(candidates[i] for i in sorted(picks))
    return pairs


def save_labeled_pairs(pairs, path) -> None:
    import json

    with open(path, "w", encoding="utf-8") as handle:
        for anchor_id, neighbor_id, is_true_negative in pairs:
            handle.write(
                json.dumps(
                    {
                        "anchor_id": anchor_id,
                        "neighbor_id": neighbor_id,
                        "is_true_negative": bool(is_true_negative),
                    }
                )
                + "\n"
            )


def load_labeled_pairs(path) -> list[tuple[str, str, bool]]:
    import json

    pairs = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                obj = json.loads(line)
                pairs.append((obj["anchor_id"], obj["neighbor_id"], bool(obj["is_true_negative"])))
    return pairs


def save_translation(translation: dict[str, str], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for src in sorted(translation):
            handle.write(f"{src}\t{translation[src]}\n")


def load_translator(path):
    mapping = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if line:
                src, _, dst = line.partition("\t")
                mapping[src] = dst

    def translate(text: str) -> str:
        return " ".join(mapping.get(tok, tok) for tok in text.split())

    return translate
