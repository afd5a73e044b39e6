"""Index correctness against brute-force oracles."""

import numpy as np
import pytest

from bucketeer.pq import (
    IndexSizeError,
    PQIndex,
    PQParams,
    ann_search,
    build_knn_matrix,
    choose_k,
    explorer_suggest,
    kmeans_fit,
    knn_suggest,
    load_knn_matrix,
    save_knn_matrix,
)


def _index(n=120, d=16, m=4, seed=0, k_cap=64):
    rng = np.random.default_rng(seed)
    vecs = rng.normal(size=(n, d))
    idx = PQIndex.build(vecs, PQParams(m=m, k_cap=k_cap, seed=seed, train_sample=n, kmeans_iters=15))
    return vecs, idx


def test_choose_k():
    assert choose_k(100, 1024) == 10
    assert choose_k(1_000_000, 1024) == 1000
    assert choose_k(2, 1024) == 1
    assert choose_k(1_000_000, 64) == 64


def test_kmeans_deterministic():
    rng_data = np.random.default_rng(1)
    x = rng_data.normal(size=(200, 6))
    a = kmeans_fit(x, 8, np.random.default_rng(5), iters=10)
    b = kmeans_fit(x, 8, np.random.default_rng(5), iters=10)
    np.testing.assert_array_equal(a, b)


def test_kmeans_empty_clusters_reseeded():
    # one tight blob plus a handful of outliers forces empties mid-fit;
    # reseeding must keep every mean finite and every cluster populated
    rng = np.random.default_rng(4)
    x = np.concatenate([rng.normal(0, 0.01, size=(40, 2)), rng.normal(5, 0.01, size=(3, 2))])
    centers = kmeans_fit(x, 8, np.random.default_rng(0), iters=10)
    assert np.isfinite(centers).all()
    d = ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)
    assert np.bincount(d.argmin(axis=1), minlength=8).min() >= 1


def test_adc_matches_reconstruction_oracle():
    vecs, idx = _index()
    rng = np.random.default_rng(9)
    recon = idx.reconstruct()
    for _ in range(5):
        q = rng.normal(size=vecs.shape[1])
        want = ((recon - q) ** 2).sum(axis=1)
        got = idx.adc_distance(q)
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)


def test_symmetric_matches_reconstruction_oracle():
    _, idx = _index(n=80)
    recon = idx.reconstruct()
    for i in (0, 17, 79):
        want = ((recon - recon[i]) ** 2).sum(axis=1)
        got = idx.symmetric_distance(i)
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)


def test_batch_variants_match_loops():
    vecs, idx = _index(n=60)
    rng = np.random.default_rng(3)
    cand = np.arange(0, 60, 2)
    queries = rng.normal(size=(4, vecs.shape[1]))
    batch = idx.batch_adc(cand, queries)
    for j in range(4):
        np.testing.assert_allclose(batch[:, j], idx.adc_distance(queries[j], cand), rtol=1e-12)
    targets = np.array([1, 5, 9])
    sym = idx.batch_symmetric(cand, targets)
    for j, t in enumerate(targets):
        np.testing.assert_allclose(sym[:, j], idx.symmetric_distance(t, cand), rtol=1e-12)


def test_encode_tie_prefers_lower_centroid():
    # two identical centroids: argmin must return the first
    params = PQParams(m=1, k_cap=4, seed=0, train_sample=4)
    codebooks = np.array([[[1.0, 0.0], [1.0, 0.0], [3.0, 0.0]]])
    idx = PQIndex(params, codebooks, np.empty((0, 1), dtype=np.uint8), d=2)
    codes = idx.encode(np.array([[1.0, 0.0]]))
    assert codes[0, 0] == 0


def test_knn_matrix_matches_quadratic_oracle():
    _, idx = _index(n=70, d=8, m=2)
    kn = 5
    got = build_knn_matrix(idx, neighbors=kn)
    recon = idx.reconstruct()
    for i in range(idx.n):
        d = ((recon - recon[i]) ** 2).sum(axis=1)
        d[i] = np.inf
        order = np.lexsort((np.arange(idx.n), d))
        np.testing.assert_array_equal(got[i], order[:kn])


def test_knn_matrix_refuses_over_budget():
    _, idx = _index(n=50)
    with pytest.raises(IndexSizeError):
        build_knn_matrix(idx, neighbors=3, mem_cap_bytes=100)


def test_index_save_load_roundtrip(tmp_path):
    vecs, idx = _index()
    idx.save(tmp_path / "i.bkpq")
    back = PQIndex.load(tmp_path / "i.bkpq")
    np.testing.assert_array_equal(back.codes, idx.codes)
    np.testing.assert_array_equal(back.codebooks, idx.codebooks)
    assert back.params == idx.params
    q = np.random.default_rng(0).normal(size=vecs.shape[1])
    np.testing.assert_array_equal(back.adc_distance(q), idx.adc_distance(q))


def test_knn_matrix_save_load_roundtrip(tmp_path):
    _, idx = _index(n=40)
    mat = build_knn_matrix(idx, neighbors=4)
    save_knn_matrix(tmp_path / "m.bknn", mat)
    np.testing.assert_array_equal(load_knn_matrix(tmp_path / "m.bknn"), mat)


def test_knn_suggest_draws_from_member_neighbors():
    _, idx = _index(n=60)
    mat = build_knn_matrix(idx, neighbors=4)
    members = np.array([3, 10, 25])
    excluded = np.zeros(60, dtype=bool)
    excluded[members] = True
    got = knn_suggest(mat, members, excluded, count=5, rng=np.random.default_rng(0))
    allowed = set(np.unique(mat[members].ravel()).tolist()) - set(members.tolist())
    assert set(got.tolist()) <= allowed
    assert len(got) == min(5, len(allowed))


def test_knn_suggest_empty_members():
    got = knn_suggest(np.zeros((10, 3), dtype=np.int32), np.array([]), np.zeros(10, bool), 5, np.random.default_rng(0))
    assert got.size == 0


def test_ann_exhaustive_matches_oracle():
    vecs, idx = _index(n=90, d=8, m=2)
    members = np.array([2, 40, 77])
    excluded = np.zeros(90, dtype=bool)
    excluded[members] = True
    excluded[:10] = True
    got = ann_search(
        idx, vecs, members, excluded, count=7, rng=np.random.default_rng(0),
        candidate_cap=None, member_cap=None,
    )
    pool = np.flatnonzero(~excluded)
    recon = idx.reconstruct(pool)
    dists = np.stack(
        [((recon - vecs[m]) ** 2).sum(axis=1) for m in members]
    ).min(axis=0)
    order = np.lexsort((pool, dists))
    np.testing.assert_array_equal(got, pool[order[:7]])


def test_explorer_uniform_without_positives():
    _, idx = _index(n=50)
    excluded = np.zeros(50, dtype=bool)
    excluded[10:] = True
    got = explorer_suggest(idx, np.array([]), excluded, count=30, rng=np.random.default_rng(1))
    # pool smaller than count: everything eligible comes back
    assert sorted(got.tolist()) == list(range(10))


def test_explorer_ranks_farthest_first():
    vecs, idx = _index(n=60, d=8, m=2)
    positives = np.array([0, 1, 2])
    excluded = np.zeros(60, dtype=bool)
    excluded[positives] = True
    got = explorer_suggest(
        idx, positives, excluded, count=5, rng=np.random.default_rng(2), multiplier=1000
    )
    pool = np.flatnonzero(~excluded)
    recon = idx.reconstruct()
    dmin = np.stack(
        [((recon[pool] - recon[p]) ** 2).sum(axis=1) for p in positives]
    ).min(axis=0)
    order = np.lexsort((pool, -dmin))
    np.testing.assert_array_equal(got, pool[order[:5]])


def test_explorer_never_returns_excluded():
    _, idx = _index(n=40)
    excluded = np.zeros(40, dtype=bool)
    excluded[::2] = True
    got = explorer_suggest(idx, np.array([1, 3]), excluded, count=10, rng=np.random.default_rng(0))
    assert not excluded[got].any()
