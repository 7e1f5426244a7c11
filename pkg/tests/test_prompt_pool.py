import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from f2ocl.errors import InputError, StateError
from f2ocl.prompt_pool import PromptEntry, PromptPool, insert_class, key_loss, retrieve_top_k, update_key

from oracles import brute_force_ranking, cos


def pool_with_keys(keys, class_ids=None):
    keys = np.asarray(keys, dtype=float)
    pool = PromptPool(keys.shape[1], 2)
    for c, k in zip(class_ids or range(len(keys)), keys):
        pool.add(PromptEntry(c, k / np.linalg.norm(k), np.zeros((2, keys.shape[1]))))
    return pool


def test_insert_into_empty_pool():
    pool = PromptPool(6, 3)
    e = insert_class(pool, 4, seed=0)
    assert len(pool) == 1 and 4 in pool
    assert np.linalg.norm(e.key) == pytest.approx(1.0, abs=1e-15)
    assert e.prompt.shape == (3, 6)
    assert 0.005 < e.prompt.std() < 0.05


def test_duplicate_insert_raises():
    pool = PromptPool(4, 2)
    insert_class(pool, 1, seed=0)
    with pytest.raises(StateError):
        insert_class(pool, 1, seed=0)


def test_insertion_is_deterministic():
    a, b = PromptPool(5, 2), PromptPool(5, 2)
    for c in (3, 0, 9):
        insert_class(a, c, seed=11)
        insert_class(b, c, seed=11)
    for ea, eb in zip(a, b):
        assert ea.class_id == eb.class_id
        np.testing.assert_array_equal(ea.key, eb.key)
        np.testing.assert_array_equal(ea.prompt, eb.prompt)


def test_entries_are_kept_in_class_order():
    pool = PromptPool(3, 1)
    for c in (5, 1, 3):
        insert_class(pool, c, seed=0)
    assert pool.class_ids == [1, 3, 5]


def test_exact_match_is_retrieved():
    q = np.array([0.3, -1.2, 0.4])
    pool = pool_with_keys([q, [1.0, 0, 0], [0, 0, 1.0]], [7, 1, 2])
    assert retrieve_top_k(pool, q, 1)[0].class_id == 7


def test_hand_computed_ranking():
    # cos(q, e1) = 0.9/sqrt(0.82) ~ 0.994 ; cos(q, e2) = 0.1/sqrt(0.82) ~ 0.110
    q = np.array([0.9, 0.1])
    assert cos(q, [1, 0]) == pytest.approx(0.994, abs=5e-4)
    assert cos(q, [0, 1]) == pytest.approx(0.110, abs=5e-4)
    pool = pool_with_keys([[1, 0], [0, 1]], [10, 20])
    assert [e.class_id for e in retrieve_top_k(pool, q, 2)] == [10, 20]


def test_tie_goes_to_smaller_class_id():
    pool = pool_with_keys([[0, 1], [1, 0]], [8, 3])
    assert [e.class_id for e in retrieve_top_k(pool, [1.0, 1.0], 2)] == [3, 8]


def test_result_length_is_capped_by_pool_size():
    pool = pool_with_keys([[1, 0], [0, 1]])
    assert len(retrieve_top_k(pool, [1.0, 0.2], 5)) == 2


def test_empty_pool_raises():
    with pytest.raises(StateError):
        retrieve_top_k(PromptPool(2, 1), [1.0, 0.0], 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 5))
def test_ranking_matches_brute_force(seed, n, k):
    gen = np.random.default_rng(seed)
    keys = gen.standard_normal((n, 4))
    ids = sorted(gen.choice(100, n, replace=False).tolist())
    pool = pool_with_keys(keys, ids)
    q = gen.standard_normal(4)
    got = [e.class_id for e in retrieve_top_k(pool, q, k)]
    assert got == brute_force_ranking(pool.keys(), ids, q)[:k]


def test_key_update_alpha_zero_improves_alignment():
    gen = np.random.default_rng(0)
    for _ in range(20):
        k, q = gen.standard_normal(5), gen.standard_normal(5)
        e = PromptEntry(0, k / np.linalg.norm(k), np.zeros((1, 5)))
        new = update_key(e, q[None], alpha=0.0, beta=1.0, lr=0.1)
        assert cos(new, q) > cos(e.key, q)
        assert np.linalg.norm(new) == pytest.approx(1.0, abs=1e-15)


def test_key_update_fixed_point():
    k = np.array([0.6, 0.8])
    e = PromptEntry(0, k, np.zeros((1, 2)))
    np.testing.assert_allclose(update_key(e, np.stack([k, 2 * k]), 0.5, 0.5, 0.1), k, atol=1e-15)


def test_key_update_hand_example():
    e = PromptEntry(0, np.array([1.0, 0.0]), np.zeros((1, 2)))
    q = np.array([0.0, 1.0])
    new = update_key(e, q[None], 0.5, 0.5, 0.1)
    assert cos(new, q) > cos(e.key, q)
    assert cos(new, e.key) < 1.0
    # the gradient of -(0.5 cos(k,k) + 0.5 cos(k,q)) at k=(1,0) is (0, -0.5)
    np.testing.assert_allclose(new, np.array([1.0, 0.05]) / np.hypot(1.0, 0.05), atol=1e-15)


def test_key_update_is_gradient_step_on_key_loss():
    gen = np.random.default_rng(3)
    k = gen.standard_normal(4) * 2.0
    e = PromptEntry(0, k, np.zeros((1, 4)))
    qs = gen.standard_normal((3, 4))
    h = 1e-6
    grad = np.array([
        (key_loss(k + h * ei, k, qs, 0.3, 0.7) - key_loss(k - h * ei, k, qs, 0.3, 0.7)) / (2 * h)
        for ei in np.eye(4)
    ])
    expected = k - 0.1 * grad
    np.testing.assert_allclose(update_key(e, qs, 0.3, 0.7, 0.1), expected / np.linalg.norm(expected), atol=1e-8)


def test_key_update_rejects_zero_query():
    e = PromptEntry(0, np.array([1.0, 0.0]), np.zeros((1, 2)))
    with pytest.raises(InputError):
        update_key(e, np.zeros((1, 2)), 0.5, 0.5, 0.1)


def test_duplicate_keys_rank_by_class_id():
    gen = np.random.default_rng(8)
    for n in range(2, 40):
        keys = gen.standard_normal((n, 5))
        keys[-1] = keys[0]
        pool = pool_with_keys(keys)
        order = [e.class_id for e in retrieve_top_k(pool, keys[0], n)]
        assert order.index(0) + 1 == order.index(n - 1)
