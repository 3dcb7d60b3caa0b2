import numpy as np
import pytest

from docembed.aux_embed import AuxEmbedding, Space
from docembed.neighbors import InvertedFileIndex, IndexConfig, brute_force_topk


def embeddings_from(matrix, prefix="d"):
    return [
        AuxEmbedding(f"{prefix}{i:04d}", Space.TEXT, np.asarray(row, dtype=float))
        for i, row in enumerate(matrix)
    ]


def random_unit(n, d, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class TestConfig:
    def test_probes_bounded(self):
        with pytest.raises(ValueError):
            IndexConfig(num_partitions=4, probes=5)

    def test_metric_cosine_only(self):
        with pytest.raises(ValueError):
            IndexConfig(num_partitions=4, probes=2, metric="euclidean")


class TestBuild:
    def test_single_partition_holds_all(self):
        embs = embeddings_from(random_unit(4, 3, 0))
        index = InvertedFileIndex(num_partitions=1, probes=1).fit(embs)
        assert len(index.partitions_[0]) == 4

    def test_two_separated_clusters_split(self):
        # k-means oracle on 4 points: two tight pairs must become the two
        # partitions
        pts = [[10.0, 0.1], [10.0, -0.1], [-10.0, 0.1], [-10.0, -0.1]]
        embs = embeddings_from(pts)
        index = InvertedFileIndex(num_partitions=2, probes=2, seed=1).fit(embs)
        groups = {tuple(sorted(p)) for p in index.partitions_}
        assert groups == {(0, 1), (2, 3)}

    def test_fewer_points_than_partitions_errors(self):
        embs = embeddings_from(random_unit(3, 2, 0))
        with pytest.raises(ValueError, match="smaller num_partitions"):
            InvertedFileIndex(num_partitions=4, probes=1).fit(embs)

    def test_build_deterministic(self):
        embs = embeddings_from(random_unit(50, 4, 2))
        a = InvertedFileIndex(num_partitions=4, probes=2, seed=9).fit(embs)
        b = InvertedFileIndex(num_partitions=4, probes=2, seed=9).fit(embs)
        np.testing.assert_array_equal(a.assignments_, b.assignments_)
        np.testing.assert_allclose(a.centroids_, b.centroids_)

    def test_mixed_spaces_rejected(self):
        embs = embeddings_from(random_unit(4, 2, 0))
        embs[0] = AuxEmbedding(embs[0].doc_id, Space.ENTITY, embs[0].vector)
        with pytest.raises(ValueError):
            InvertedFileIndex(num_partitions=2, probes=1).fit(embs)


class TestQuery:
    def test_exhaustive_probes_match_brute_force(self):
        embs = embeddings_from(random_unit(60, 6, 3))
        index = InvertedFileIndex(num_partitions=8, probes=8, seed=0).fit(embs)
        for qi in (0, 13, 59):
            got = index.query_topk(embs[qi].vector, 10, exclude_id=embs[qi].doc_id)
            want = brute_force_topk(embs, embs[qi].vector, 10, exclude_id=embs[qi].doc_id)
            assert [n.doc_id for n in got] == [n.doc_id for n in want]
            np.testing.assert_allclose(
                [n.score for n in got], [n.score for n in want], atol=1e-12
            )

    def test_k_larger_than_corpus_saturates(self):
        embs = embeddings_from(random_unit(5, 3, 1))
        index = InvertedFileIndex(num_partitions=2, probes=2).fit(embs)
        hits = index.query_topk(np.ones(3), 50)
        assert len(hits) == 5
        scores = [n.score for n in hits]
        assert scores == sorted(scores, reverse=True)

    def test_query_doc_excluded(self):
        embs = embeddings_from(random_unit(10, 3, 4))
        index = InvertedFileIndex(num_partitions=2, probes=2).fit(embs)
        hits = index.query_topk(embs[0].vector, 10, exclude_id=embs[0].doc_id)
        assert embs[0].doc_id not in [n.doc_id for n in hits]

    def test_probed_subset_of_brute_force_ranking(self):
        embs = embeddings_from(random_unit(80, 8, 5))
        index = InvertedFileIndex(num_partitions=8, probes=2, seed=0).fit(embs)
        q = embs[7].vector
        got = {n.doc_id for n in index.query_topk(q, 15, exclude_id=embs[7].doc_id)}
        everything = {
            n.doc_id for n in brute_force_topk(embs, q, len(embs), exclude_id=embs[7].doc_id)
        }
        assert got <= everything

    def test_equals_brute_force_over_probed_union(self):
        # restricted to the scanned partitions the ranking must be exact
        embs = embeddings_from(random_unit(80, 8, 9))
        index = InvertedFileIndex(num_partitions=8, probes=3, seed=0).fit(embs)
        for qi in (0, 7, 42):
            q = embs[qi].vector
            cd = np.sum((index.centroids_ - q / np.linalg.norm(q)) ** 2, axis=1)
            probed = np.argsort(cd, kind="stable")[: index.probes]
            rows = np.concatenate([index.partitions_[j] for j in probed])
            scanned = [embs[i] for i in rows]
            got = index.query_topk(q, 12, exclude_id=embs[qi].doc_id)
            want = brute_force_topk(scanned, q, 12, exclude_id=embs[qi].doc_id)
            assert [(n.doc_id, round(n.score, 12)) for n in got] == [
                (n.doc_id, round(n.score, 12)) for n in want
            ]

    def test_recall_at_10(self):
        # low-dimensional vectors keep the probe/recall trade-off benign
        X = random_unit(1000, 4, 6)
        embs = embeddings_from(X)
        index = InvertedFileIndex(num_partitions=16, probes=4, seed=0).fit(embs)
        rng = np.random.default_rng(1)
        recalls = []
        for qi in rng.choice(1000, size=100, replace=False):
            got = {n.doc_id for n in index.query_topk(X[qi], 10, exclude_id=embs[qi].doc_id)}
            want = {n.doc_id for n in brute_force_topk(embs, X[qi], 10, exclude_id=embs[qi].doc_id)}
            recalls.append(len(got & want) / 10)
        assert np.mean(recalls) >= 0.9


class TestBruteForce:
    def test_self_similarity_first(self):
        X = random_unit(20, 5, 7)
        embs = embeddings_from(X)
        hits = brute_force_topk(embs, X[3], 5)
        assert hits[0].doc_id == embs[3].doc_id
        assert hits[0].score == pytest.approx(1.0)

    def test_orthogonal_scores_zero(self):
        embs = embeddings_from([[1.0, 0.0], [0.0, 1.0]])
        hits = brute_force_topk(embs, np.array([0.0, 1.0]), 2)
        by_id = {n.doc_id: n.score for n in hits}
        assert by_id["d0000"] == pytest.approx(0.0, abs=1e-12)

    def test_angle_ordering(self):
        # cosine oracle: points at 0, 45 and 90 degrees from the query
        embs = embeddings_from([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        hits = brute_force_topk(embs, np.array([1.0, 0.0]), 3)
        assert [n.doc_id for n in hits] == ["d0000", "d0001", "d0002"]
        np.testing.assert_allclose(
            [n.score for n in hits], [1.0, np.cos(np.pi / 4), 0.0], atol=1e-12
        )

    def test_tie_broken_by_ascending_id(self):
        embs = [
            AuxEmbedding("b", Space.TEXT, np.array([1.0, 0.0])),
            AuxEmbedding("a", Space.TEXT, np.array([2.0, 0.0])),  # same direction
        ]
        hits = brute_force_topk(embs, np.array([1.0, 0.0]), 2)
        assert [n.doc_id for n in hits] == ["a", "b"]

    def test_empty_corpus(self):
        assert brute_force_topk([], np.array([1.0]), 3) == []


def test_save_load_roundtrip(tmp_path):
    embs = embeddings_from(random_unit(30, 4, 8))
    index = InvertedFileIndex(num_partitions=4, probes=2, seed=3).fit(embs)
    path = tmp_path / "index.npz"
    index.save(path)
    loaded = InvertedFileIndex.load(path)
    q = embs[11].vector
    got = loaded.query_topk(q, 5, exclude_id=embs[11].doc_id)
    want = index.query_topk(q, 5, exclude_id=embs[11].doc_id)
    assert [(n.doc_id, n.score) for n in got] == [(n.doc_id, n.score) for n in want]
