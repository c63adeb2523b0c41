import numpy as np
import pytest

from cloudsched.costs import (CostParams, migration_cost, migration_cost_age,
                              penalty, server_cost, server_cost_aggregate)


def cfg(M, S, cells):
    N = np.zeros((M, S), dtype=np.int64)
    for (m, s), v in cells.items():
        N[m, s] = v
    return N


def test_server_cost_off_is_zero():
    p = CostParams(model="affine", c0=1.0, c=(2.0, 6.0, 3.0))
    assert server_cost(np.zeros((3, 10), dtype=np.int64), p) == 0.0


def test_server_cost_affine_weights():
    # aggregate (0,0,2) under weights (1,2,6,3): 1 + 3*2 = 7
    p = CostParams(model="affine", c0=1.0, c=(2.0, 6.0, 3.0))
    N = cfg(3, 10, {(2, 0): 1, (2, 9): 1})
    assert server_cost(N, p) == 7.0
    assert server_cost_aggregate((0, 0, 2), p) == 7.0


def test_server_cost_binary():
    p = CostParams(model="binary", c0=1.0)
    assert server_cost(cfg(3, 10, {(0, 3): 2}), p) == 1.0
    assert server_cost(cfg(3, 10, {(1, 1): 1, (2, 2): 1}), p) == 1.0


def test_migration_cost_shortfall():
    n_prev = cfg(1, 3, {(0, 1): 3})        # three jobs served at residual 2
    n_bar = cfg(1, 3, {(0, 0): 1})         # only one continued at residual 1
    assert migration_cost(n_prev, n_bar) == 2


def test_migration_cost_full_continuation_zero():
    n_prev = cfg(2, 4, {(0, 1): 2, (1, 3): 1})
    n_bar = cfg(2, 4, {(0, 0): 2, (1, 2): 2})
    assert migration_cost(n_prev, n_bar) == 0


def test_migration_cost_completing_jobs_free():
    n_prev = cfg(2, 4, {(0, 0): 3, (1, 0): 2})  # only residual-1 jobs
    assert migration_cost(n_prev, np.zeros((2, 4), dtype=np.int64)) == 0


def test_migration_cost_shift_identity():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = rng.integers(0, 4, size=(2, 5)).astype(np.int64)
        shifted = np.zeros_like(n)
        shifted[:, :-1] = n[:, 1:]
        assert migration_cost(n, shifted) == 0


def test_migration_cost_age_cases():
    n = cfg(1, 4, {(0, 1): 3})
    z = cfg(1, 4, {(0, 1): 1})
    tld = cfg(1, 4, {(0, 2): 1})
    assert migration_cost_age(n, z, tld) == 1
    assert migration_cost_age(n, n, np.zeros_like(n)) == 0
    tld_full = cfg(1, 4, {(0, 2): 2})
    assert migration_cost_age(n, z, tld_full) == 0


def test_penalty_linear_combination():
    p0 = CostParams(model="binary", c0=1.0, U=0.0, V=0.0)
    assert penalty([3.0, 4.0], [1, 1], p0) == 0.0
    p = CostParams(model="binary", c0=1.0, U=10.0, V=5.0)
    assert penalty([3.0, 4.0], [1, 1], p) == 5 * 7 + 10 * 2
    pu = CostParams(model="binary", c0=1.0, U=1.0, V=0.0)
    assert penalty([9.0], [4], pu) == 4.0


def test_server_cost_monotone_in_entries():
    p = CostParams(model="affine", c0=2.0, c=(1.0, 3.0))
    rng = np.random.default_rng(5)
    for _ in range(30):
        N = rng.integers(0, 3, size=(2, 4)).astype(np.int64)
        bigger = N.copy()
        bigger[tuple(rng.integers(0, d) for d in N.shape)] += 1
        assert server_cost(bigger, p) >= server_cost(N, p)


def test_cost_params_validation():
    with pytest.raises(ValueError):
        CostParams(model="other")
    with pytest.raises(ValueError):
        CostParams(c0=-1.0)
    with pytest.raises(ValueError):
        CostParams(alpha=1.0)
    with pytest.raises(ValueError):
        CostParams(U=-0.1)
