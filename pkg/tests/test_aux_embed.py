import numpy as np
import pytest

from docembed._validation import DataError
from docembed.aux_embed import (
    EmbedTables,
    Space,
    embed_document,
    hash_to_signs,
    load_table,
    save_table,
)
from docembed.corpus import Document


def doc(**overrides):
    base = dict(id="d1", title="alpha beta", body="", byline_date=10, publisher="p")
    base.update(overrides)
    return Document(**base)


def tables(entity=None, token=None):
    return EmbedTables(entity_table=entity or {}, token_table=token or {})


class TestEntitySpace:
    def test_single_entity_is_its_vector(self):
        t = tables(entity={"e": np.array([1.0, 0.0])})
        emb = embed_document(doc(entity_ids=["e"]), Space.ENTITY, t)
        np.testing.assert_allclose(emb.vector, [1.0, 0.0])

    def test_mean_of_two(self):
        t = tables(entity={"e1": np.array([1.0, 0.0]), "e2": np.array([0.0, 1.0])})
        emb = embed_document(doc(entity_ids=["e1", "e2"]), Space.ENTITY, t)
        np.testing.assert_allclose(emb.vector, [0.5, 0.5])

    def test_unknown_entities_skipped(self):
        t = tables(entity={"e1": np.array([2.0, 0.0])})
        emb = embed_document(doc(entity_ids=["e1", "missing"]), Space.ENTITY, t)
        np.testing.assert_allclose(emb.vector, [2.0, 0.0])

    def test_no_known_entities_absent(self):
        assert embed_document(doc(entity_ids=["x"]), Space.ENTITY, tables()) is None

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        names = [f"e{i}" for i in range(6)]
        t = tables(entity={n: rng.normal(size=4) for n in names})
        a = embed_document(doc(entity_ids=names), Space.ENTITY, t)
        b = embed_document(doc(entity_ids=names[::-1]), Space.ENTITY, t)
        np.testing.assert_allclose(a.vector, b.vector)

    def test_language_agnostic(self):
        t = tables(entity={"e1": np.array([1.0, 2.0])})
        a = embed_document(doc(language="en", entity_ids=["e1"]), Space.ENTITY, t)
        b = embed_document(doc(language="de", entity_ids=["e1"]), Space.ENTITY, t)
        np.testing.assert_array_equal(a.vector, b.vector)


class TestImageSpace:
    def test_bit_to_sign_map(self):
        emb = embed_document(doc(image_hash="f0"), Space.IMAGE, tables())
        np.testing.assert_array_equal(emb.vector, [1, 1, 1, 1, -1, -1, -1, -1])

    def test_missing_hash_absent(self):
        assert embed_document(doc(image_hash=None), Space.IMAGE, tables()) is None

    def test_identical_hashes_identical_vectors(self):
        a = embed_document(doc(image_hash="ab12"), Space.IMAGE, tables())
        b = embed_document(doc(id="d2", image_hash="ab12"), Space.IMAGE, tables())
        np.testing.assert_array_equal(a.vector, b.vector)

    def test_hamming_maps_to_squared_euclidean(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            bits_a = rng.integers(0, 2, size=16)
            flip = rng.integers(0, 2, size=16).astype(bool)
            bits_b = np.where(flip, 1 - bits_a, bits_a)

            def to_hex(bits):
                return "".join(
                    format(b3 * 8 + b2 * 4 + b1 * 2 + b0, "x")
                    for b3, b2, b1, b0 in bits.reshape(-1, 4)
                )

            va = hash_to_signs(to_hex(bits_a))
            vb = hash_to_signs(to_hex(bits_b))
            hamming = int(np.sum(bits_a != bits_b))
            assert np.sum((va - vb) ** 2) == pytest.approx(4 * hamming)


class TestTextSpace:
    def test_title_token_mean(self):
        t = tables(token={"alpha": np.array([1.0, 0.0]), "beta": np.array([0.0, 1.0])})
        emb = embed_document(doc(), Space.TEXT, t)
        np.testing.assert_allclose(emb.vector, [0.5, 0.5])

    def test_unknown_tokens_skipped(self):
        t = tables(token={"alpha": np.array([3.0, 0.0])})
        emb = embed_document(doc(), Space.TEXT, t)
        np.testing.assert_allclose(emb.vector, [3.0, 0.0])

    def test_no_known_tokens_absent(self):
        assert embed_document(doc(title="zzz"), Space.TEXT, tables()) is None


def test_dimension_mismatch_fatal():
    with pytest.raises(DataError):
        EmbedTables(entity_table={"a": np.array([1.0]), "b": np.array([1.0, 2.0])})


def test_table_roundtrip(tmp_path):
    table = {"k1": np.array([1.5, -2.0]), "k2": np.array([0.0, 3.25])}
    path = tmp_path / "table.tsv"
    save_table(table, path)
    loaded = load_table(path)
    assert set(loaded) == {"k1", "k2"}
    np.testing.assert_allclose(loaded["k1"], table["k1"])
