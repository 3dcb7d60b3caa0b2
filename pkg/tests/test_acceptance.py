"""Acceptance suite: every release criterion with its stated tolerance.

Each test prints one PASS/FAIL line (visible with `pytest -s` or in the
captured output of a failing run). The end-to-end experiment (criterion 8)
trains for 2000 steps and dominates the suite's runtime; everything else
finishes in seconds.
"""

import itertools
import time
import zlib

import numpy as np
import pytest

from docembed.corpus import dedup
from docembed.evaluation import (
    adjusted_rand_index,
    average_precision,
    mean_average_precision,
    spearman_rho,
)
from docembed.mining.pipeline import MiningConfig, mine_triplets
from docembed.nn.encoder import (
    EncoderConfig,
    backward_batch,
    forward_batch,
    init_params,
)
from docembed.nn.losses import bce_loss, bce_multilabel, info_nce_batch, infonce_loss
from docembed.nn.trainer import TaskDataset, sample_task
from docembed.neighbors import InvertedFileIndex, brute_force_topk
from docembed.aux_embed import AuxEmbedding, Space
from docembed.synth import SynthConfig, generate
from docembed.text.packing import PackerConfig, pack_greedy
from docembed.text.sampling import resample, smooth_expected_counts


def report(criterion, passed, detail):
    print(f"CRITERION {criterion}: {'PASS' if passed else 'FAIL'} - {detail}", flush=True)
    assert passed, f"criterion {criterion}: {detail}"


# ---------------------------------------------------------------- 1: losses


def softmax_nll_bruteforce(sims, target, tau):
    logits = np.asarray(sims, dtype=np.float64) / tau
    probs = np.exp(logits) / np.exp(logits).sum()
    return -np.log(probs[target])


def bce_bruteforce(logits, labels, mask):
    total = 0.0
    for z, y, m in zip(logits, labels, mask):
        if not m:
            continue
        p = 1.0 / (1.0 + np.exp(-z))
        total -= y * np.log(p) + (1 - y) * np.log(1 - p)
    return total


def test_criterion_1_loss_oracles():
    start = time.time()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(500):
        vecs = rng.normal(size=(11, 4))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        a, p, n, *Z = vecs
        tau = rng.uniform(0.05, 1.0)
        ours = infonce_loss(a, p, n, Z, tau)
        sims = [a @ p, a @ n] + [a @ z for z in Z]
        worst = max(worst, abs(ours - softmax_nll_bruteforce(sims, 0, tau)))
    for _ in range(500):
        logits = rng.normal(size=10) * 3
        labels = rng.integers(0, 2, size=10).astype(float)
        mask = rng.integers(0, 2, size=10).astype(bool)
        mask[rng.integers(10)] = True
        ours = bce_loss(logits, labels, mask)
        worst = max(worst, abs(ours - bce_bruteforce(logits, labels, mask)))

    # the tagged worked examples
    a = np.array([1.0, 0.0])
    n = np.array([0.0, 1.0])
    example_1 = abs(infonce_loss(a, a, n, (), 0.05) - np.log(1 + np.exp(-20.0)))
    example_2 = abs(
        bce_loss(np.array([2.0, -1.0]), np.array([1.0, 0.0]), np.array([True, True]))
        - (np.log(1 + np.exp(-2.0)) + np.log(1 + np.exp(-1.0)))
    )
    rngb = np.random.default_rng(7)
    A, P, N = (x / np.linalg.norm(x, axis=1, keepdims=True) for x in rngb.normal(size=(3, 2, 4)))
    batch_loss, *_ = info_nce_batch(A, P, N, tau=0.05)
    C = np.vstack([P, N])
    oracle = np.mean(
        [softmax_nll_bruteforce(C @ A[i], i, 0.05) for i in range(2)]
    )
    example_3 = abs(batch_loss - oracle)

    elapsed = time.time() - start
    ok = worst < 1e-9 and example_1 < 1e-9 and example_2 < 1e-9 and example_3 < 1e-9
    report(1, ok and elapsed < 1.0, f"max |diff|={worst:.2e}, examples ok, {elapsed:.2f}s")


# ------------------------------------------------------------- 2: gradients


def _summed_loss(params, data):
    ids_a, ids_p, ids_n, pos, segs, y, mask = data
    out_a, cache_a = forward_batch(params, ids_a, pos, segs)
    out_p, cache_p = forward_batch(params, ids_p, pos, segs)
    out_n, cache_n = forward_batch(params, ids_n, pos, segs)
    l1, d_a, d_p, d_n = info_nce_batch(out_a.semantic, out_p.semantic, out_n.semantic, tau=0.5)
    l2, d_logits, _ = bce_multilabel(out_a.logits, y, mask)
    return l1 + l2, (cache_a, cache_p, cache_n, d_a, d_p, d_n, d_logits)


def test_criterion_2_gradient_check():
    start = time.time()
    rng = np.random.default_rng(3)
    b, t = 3, 7
    data = (
        rng.integers(4, 24, size=(b, t)),
        rng.integers(4, 24, size=(b, t)),
        rng.integers(4, 24, size=(b, t)),
        np.tile(np.arange(t), (b, 1)),
        np.zeros((b, t), dtype=int),
        rng.integers(0, 2, size=(b, 3)).astype(float),
        np.ones((b, 3), dtype=bool),
    )
    epsilon = 1e-4
    worst_overall = 0.0
    for blocks in (0, 1, 2):
        params = init_params(
            EncoderConfig(
                vocab_size=24, embed_dim=8, num_blocks=blocks, num_heads=2,
                hidden_dim=12, semantic_dim=4, num_topics=3, max_len=16, seed=blocks,
            )
        )
        _, (ca, cp, cn, d_a, d_p, d_n, d_logits) = _summed_loss(params, data)
        grads = backward_batch(params, ca, d_semantic=d_a, d_logits=d_logits)
        for extra in (
            backward_batch(params, cp, d_semantic=d_p),
            backward_batch(params, cn, d_semantic=d_n),
        ):
            for key, grad in extra.items():
                grads[key] += grad
        for key in params.keys():
            flat = params.arrays[key].reshape(-1)
            analytic = grads[key].reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + epsilon
                lp, _ = _summed_loss(params, data)
                flat[i] = original - epsilon
                lm, _ = _summed_loss(params, data)
                flat[i] = original
                fd = (lp - lm) / (2 * epsilon)
                err = abs(fd - analytic[i]) / max(abs(fd), abs(analytic[i]), 1e-6)
                worst_overall = max(worst_overall, err)
    elapsed = time.time() - start
    ok = worst_overall < 1e-4 and elapsed < 30.0
    report(2, ok, f"worst rel err={worst_overall:.2e} over blocks 0/1/2, {elapsed:.1f}s")


# --------------------------------------------------------------- 3: packing


def test_criterion_3_packing():
    start = time.time()
    trace_1 = [len(p) for p in pack_greedy(
        [list(range(300)), list(range(200))], PackerConfig(16, 512, 0.9)
    )]
    lengths = [100, 450, 400, 60]
    stream = []
    tok = 0
    for n in lengths:
        stream.append(list(range(tok, tok + n)))
        tok += n
    trace_2 = [len(p) for p in pack_greedy(stream, PackerConfig(16, 512, 0.8))]
    traces_ok = trace_1 == [500] and trace_2 == [500, 510]

    rng = np.random.default_rng(0)
    config = PackerConfig(capacity=48, max_len=256, min_proportion=0.8)
    instance_lengths = rng.integers(10, 200, size=10_000)
    token = 0
    instances = []
    for n in instance_lengths:
        instances.append(list(range(token, token + int(n))))
        token += int(n)
    packed = pack_greedy(instances, config)
    input_tokens = sum(int(n) for n in instance_lengths)
    output_tokens = sum(len(p) for p in packed)
    conserved = input_tokens == output_tokens
    bounded = all(len(p) <= config.max_len for p in packed)
    rho_ok = all(
        p.flushed or len(p) >= config.min_proportion * config.max_len for p in packed
    )

    # independent re-trace bounds the cache size
    from docembed.text.packing import _Cache

    cache = _Cache()
    max_cache = 0
    for i, instance in enumerate(instances, start=1):
        processed = False
        for pos, (tokens, bounds) in cache:
            if len(instance) + len(tokens) > config.max_len:
                continue
            cache.pop(pos)
            combined = tokens + instance
            processed = True
            if len(combined) >= config.min_proportion * config.max_len:
                pass
            else:
                cache.insert(len(combined), i, combined, bounds + [len(tokens)])
            break
        if not processed:
            cache.insert(len(instance), i, instance, [0])
            if len(cache) > config.capacity:
                cache.pop_first()
        max_cache = max(max_cache, len(cache))
    cache_ok = max_cache <= config.capacity

    compression = 400 / len(pack_greedy([list(range(60))] * 400, PackerConfig(64, 512, 0.9)))
    elapsed = time.time() - start
    ok = traces_ok and conserved and bounded and rho_ok and cache_ok and compression > 5 and elapsed < 30
    report(
        3,
        ok,
        f"traces={trace_1}/{trace_2}, conserved={conserved}, compression={compression:.1f}, {elapsed:.1f}s",
    )


# ------------------------------------------------------------- 4: smoothing


def test_criterion_4_smoothing():
    start = time.time()
    counts = {"a": 1000, "b": 10}
    identity = smooth_expected_counts(counts, 1.0)
    flat = smooth_expected_counts(counts, 0.0)
    m = smooth_expected_counts(counts, 0.7)
    formula_ok = (
        identity == {"a": 1000.0, "b": 10.0}
        and flat["b"] == pytest.approx(1000.0, abs=1e-9)
        and abs(m["b"] - 1000.0 * (10 / 1000) ** 0.7) < 1e-6
        and abs(m["b"] - 39.8107) < 1e-3
    )
    ids = {"en": [f"d{i}" for i in range(8)]}
    totals = [len(resample(ids, {"en": 20.0}, seed=s)) for s in range(10_000)]
    mean_count = np.mean(totals) / 8
    bernoulli_ok = abs(mean_count - 2.5) / 2.5 < 0.05
    elapsed = time.time() - start
    report(4, formula_ok and bernoulli_ok and elapsed < 30,
           f"m2={m['b']:.4f}, resample mean={mean_count:.3f}, {elapsed:.1f}s")


# ------------------------------------------------------------------- 5: ANN


def test_criterion_5_ann_recall():
    start = time.time()
    rng = np.random.default_rng(0)
    n, dim, partitions = 10_000, 32, 256
    X = rng.normal(size=(n, dim))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    embeddings = [AuxEmbedding(f"d{i:05d}", Space.TEXT, X[i]) for i in range(n)]
    index = InvertedFileIndex(
        num_partitions=partitions, probes=partitions // 4, seed=0
    ).fit(embeddings)

    k = 10
    hits = 0
    for block in range(0, n, 1000):
        sims = X[block : block + 1000] @ X.T
        for row in range(sims.shape[0]):
            qi = block + row
            sims[row, qi] = -2.0
            true_top = np.argpartition(-sims[row], k)[:k]
            got = {
                nb.doc_id
                for nb in index.query_topk(X[qi], k, exclude_id=f"d{qi:05d}")
            }
            hits += len(got & {f"d{j:05d}" for j in true_top})
    recall = hits / (n * k)

    small = embeddings[:2000]
    exact_index = InvertedFileIndex(num_partitions=32, probes=32, seed=1).fit(small)
    exact_ok = True
    for qi in range(0, 2000, 97):
        got = exact_index.query_topk(X[qi], 10, exclude_id=f"d{qi:05d}")
        want = brute_force_topk(small, X[qi], 10, exclude_id=f"d{qi:05d}")
        if [(g.doc_id, round(g.score, 12)) for g in got] != [
            (w.doc_id, round(w.score, 12)) for w in want
        ]:
            exact_ok = False
            break
    elapsed = time.time() - start
    ok = recall >= 0.9 and exact_ok and elapsed < 60
    report(5, ok, f"recall@10={recall:.3f} (probes=1/4), exhaustive==brute force: {exact_ok}, {elapsed:.1f}s")


# --------------------------------------------------- 6: date-filter rescans


def test_criterion_6_date_window_rescan():
    start = time.time()
    synth = generate(SynthConfig(seed=7))
    docs = dedup(synth.documents)
    config = MiningConfig(seed=0)
    triplets, _ = mine_triplets(docs, synth.tables, synth.labeled_pairs, config)
    dates = {d.id: d.byline_date for d in docs}
    bad_pos = sum(
        1 for t in triplets if abs(dates[t.anchor_id] - dates[t.positive_id]) > config.max_pos_days
    )
    bad_neg = sum(
        1 for t in triplets if abs(dates[t.anchor_id] - dates[t.negative_id]) < config.min_neg_days
    )
    elapsed = time.time() - start
    ok = bad_pos == 0 and bad_neg == 0 and len(triplets) > 0 and elapsed < 10
    report(6, ok, f"{len(triplets)} triplets, {bad_pos} bad positives, {bad_neg} bad negatives, {elapsed:.1f}s")


# --------------------------------------------------------- 7: metric oracles


def partitions_of(n):
    if n == 0:
        yield []
        return
    for smaller in partitions_of(n - 1):
        top = max(smaller, default=-1)
        for label in range(top + 2):
            yield smaller + [label]


def ari_pair_counting(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    upper = np.triu(np.ones((len(a), len(a)), dtype=bool), 1)
    n11 = int((same_a & same_b & upper).sum())
    n10 = int((same_a & ~same_b & upper).sum())
    n01 = int((~same_a & same_b & upper).sum())
    n00 = int((~same_a & ~same_b & upper).sum())
    numerator = 2.0 * (n11 * n00 - n10 * n01)
    denominator = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00)
    return numerator / denominator if denominator else 0.0


def spearman_rank_difference(pred, gold):
    pred_ranks = np.argsort(np.argsort(pred)) + 1
    gold_ranks = np.argsort(np.argsort(gold)) + 1
    n = len(pred)
    return 1 - 6 * np.sum((pred_ranks - gold_ranks) ** 2) / (n * (n**2 - 1))


def ap_cumulative(ranked, relevant, k):
    flags = np.array([1.0 if r in relevant else 0.0 for r in ranked[:k]])
    precision_at = np.cumsum(flags) / np.arange(1, len(flags) + 1)
    return float((precision_at * flags).sum() / min(len(relevant), k))


def test_criterion_7_metric_oracles():
    start = time.time()
    worst_ari = 0.0
    for n in (2, 3, 4, 5, 6):
        parts = list(partitions_of(n))
        for a in parts:
            for b in parts:
                worst_ari = max(worst_ari, abs(adjusted_rand_index(a, b) - ari_pair_counting(a, b)))
    worst_rho = 0.0
    gold = np.arange(6, dtype=float)
    for perm in itertools.permutations(range(6)):
        pred = np.array(perm, dtype=float)
        worst_rho = max(worst_rho, abs(spearman_rho(pred, gold) - spearman_rank_difference(pred, gold)))
    worst_ap = 0.0
    docs = list("abcdef")
    relevant = {"a", "c", "e"}
    for perm in itertools.permutations(docs):
        for k in (2, 4, 6):
            worst_ap = max(worst_ap, abs(average_precision(list(perm), relevant, k) - ap_cumulative(list(perm), relevant, k)))

    tagged = (
        adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)
        and average_precision(["x", "d1", "y", "d2"], {"d1", "d2"}, 8) == pytest.approx(0.5)
        and spearman_rho([0.1, 0.5, 0.3], [0, 1, 5]) == pytest.approx(0.5)
    )
    elapsed = time.time() - start
    ok = worst_ari < 1e-12 and worst_rho < 1e-12 and worst_ap < 1e-12 and tagged and elapsed < 10
    report(7, ok, f"ARI/rho/AP max diff {worst_ari:.1e}/{worst_rho:.1e}/{worst_ap:.1e}, tagged ok, {elapsed:.1f}s")


# --------------------------------------------------------- 8: end-to-end


def test_criterion_8_synthetic_end_to_end(tmp_path):
    from docembed.pipeline_e2e import run_synthetic_experiment

    start = time.time()
    reports = run_synthetic_experiment(
        tmp_path / "e2e", seed=0, steps=2000, batch_size=12, learning_rate=3e-3
    )
    elapsed = time.time() - start
    checks = {
        "triplets>=100": reports["document_triplets"] >= 100,
        "triplet_acc>=0.9": reports["heldout_triplet_accuracy"] >= 0.9,
        "ari>=0.8": reports["kmeans_ari_trained"] >= 0.8,
        "ari_random<=0.1": reports["kmeans_ari_random"] <= 0.1,
        "probe>=0.8": reports["probe_accuracy_trained"] >= 0.8,
        "probe_random<=0.35": reports["probe_accuracy_random"] <= 0.35,
        "runtime<600s": elapsed < 600,
    }
    detail = ", ".join(
        f"{name}:{'ok' if passed else 'FAIL'}" for name, passed in checks.items()
    )
    values = (
        f"triplets={reports['document_triplets']}, "
        f"acc={reports['heldout_triplet_accuracy']}, "
        f"ari={reports['kmeans_ari_trained']}/{reports['kmeans_ari_random']}, "
        f"probe={reports['probe_accuracy_trained']}/{reports['probe_accuracy_random']}, "
        f"{elapsed:.0f}s"
    )
    report(8, all(checks.values()), f"{values} [{detail}]")


# ------------------------------------------------------- 9: stop-gradient


def test_criterion_9_stop_gradient():
    start = time.time()
    params = init_params(
        EncoderConfig(vocab_size=24, embed_dim=8, num_blocks=1, num_heads=2,
                      hidden_dim=12, semantic_dim=4, num_topics=2, max_len=16, seed=0)
    )
    rng = np.random.default_rng(5)
    b, t = 4, 6
    pos = np.tile(np.arange(t), (b, 1))
    segs = np.zeros((b, t), dtype=int)
    ids_a, ids_p, ids_n = (rng.integers(4, 24, size=(b, t)) for _ in range(3))
    translated = np.array([True, False, True, False])

    out_a, cache_a = forward_batch(params, ids_a, pos, segs)
    out_p, cache_p = forward_batch(params, ids_p, pos, segs)
    out_n, cache_n = forward_batch(params, ids_n, pos, segs)
    _, d_a, d_p, d_n = info_nce_batch(out_a.semantic, out_p.semantic, out_n.semantic, tau=0.1)

    with_stop = backward_batch(params, cache_a, d_semantic=d_a)
    for extra in (
        backward_batch(params, cache_p, d_semantic=d_p, stop_gradient=translated),
        backward_batch(params, cache_n, d_semantic=d_n),
    ):
        for key, grad in extra.items():
            with_stop[key] += grad

    # analytically zero the translated towers' trunk contribution instead
    kept = ~translated
    out_pk, cache_pk = forward_batch(params, ids_p[kept], pos[kept], segs[kept])
    zeroed = backward_batch(params, cache_a, d_semantic=d_a)
    for extra in (
        backward_batch(params, cache_pk, d_semantic=d_p[kept]),
        backward_batch(params, cache_n, d_semantic=d_n),
    ):
        for key, grad in extra.items():
            zeroed[key] += grad

    worst = max(
        float(np.max(np.abs(with_stop[key] - zeroed[key]))) for key in params.trunk_keys()
    )
    elapsed = time.time() - start
    report(9, worst < 1e-9 and elapsed < 10, f"max trunk grad diff={worst:.2e}, {elapsed:.1f}s")


# ------------------------------------------------- 10: task sampling


def test_criterion_10_sampling_frequencies():
    start = time.time()
    sizes = {"en_triplet": 900, "en_topic": 300, "xx_triplet": 100, "xx_topic": 50}
    datasets = [
        TaskDataset((key.split("_")[0], key.split("_")[1]), list(range(size)))
        for key, size in sizes.items()
    ]
    ok = True
    details = []
    for alpha in (0.0, 0.7, 1.0):
        m = smooth_expected_counts({str(i): d.size for i, d in enumerate(datasets)}, alpha)
        target = np.array([m[str(i)] for i in range(len(datasets))])
        target /= target.sum()
        picks = np.bincount(
            [sample_task(datasets, alpha, 11, step) for step in range(10_000)],
            minlength=len(datasets),
        ) / 10_000
        gap = float(np.max(np.abs(picks - target)))
        details.append(f"alpha={alpha}: max gap={gap:.4f}")
        ok = ok and gap < 0.02
    elapsed = time.time() - start
    report(10, ok and elapsed < 10, "; ".join(details) + f", {elapsed:.1f}s")
