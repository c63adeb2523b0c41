import numpy as np
import pytest

from cloudsched import queueing
from cloudsched.costs import migration_cost
from cloudsched.queueing import (InternalConsistencyError, advance_known,
                                 advance_offline, advance_unknown, dump_queues,
                                 load_queues, realize_known, realize_offline,
                                 realize_unknown, sample_departures)


def mat(M, S, cells=()):
    a = np.zeros((M, S), dtype=np.int64)
    for (m, s), v in dict(cells).items():
        a[m, s] = v
    return a


# -- realize, residual-size model -------------------------------------------

def test_realize_known_hand_trace():
    # one server, one type, S=2: two jobs continuing into residual 1, but only
    # one prescribed there; the other is preempted at unit cost
    Q = mat(1, 2, {(0, 0): 2})
    n_prev = mat(1, 2, {(0, 1): 2})[None]
    N_bar = mat(1, 2, {(0, 0): 1})[None]
    N = realize_known(Q, n_prev, N_bar)
    assert N[0, 0, 0] == 1 and N.sum() == 1
    assert migration_cost(n_prev[0], N_bar[0]) == 1


def test_realize_known_perfect_continuation():
    n_prev = np.zeros((1, 2, 3), dtype=np.int64)
    n_prev[0, 0, 1] = 2
    n_prev[0, 1, 2] = 1
    N_bar = np.zeros_like(n_prev)
    N_bar[0, :, :-1] = n_prev[0, :, 1:]
    Q = N_bar.sum(axis=0) + 3
    N = realize_known(Q, n_prev, N_bar)
    assert np.array_equal(N, N_bar)
    assert migration_cost(n_prev[0], N[0]) == 0


def test_realize_known_empty_queue_zero():
    Q = mat(2, 3)
    zeros = np.zeros((2, 2, 3), dtype=np.int64)
    N_bar = zeros.copy()
    N_bar[0, 0, 0] = 2
    assert realize_known(Q, zeros, N_bar).sum() == 0


def test_realize_known_precondition_violation():
    Q = mat(1, 2)
    n_prev = mat(1, 2, {(0, 1): 1})[None]
    with pytest.raises(InternalConsistencyError):
        realize_known(Q, n_prev, np.zeros_like(n_prev))


def _random_known_instance(rng, L=3, M=2, S=4):
    n_prev = rng.integers(0, 3, size=(L, M, S)).astype(np.int64)
    cont = np.zeros((M, S), dtype=np.int64)
    cont[:, :-1] = n_prev[:, :, 1:].sum(axis=0)
    Q = cont + rng.integers(0, 5, size=(M, S))
    N_bar = rng.integers(0, 4, size=(L, M, S)).astype(np.int64)
    return Q, n_prev, N_bar


def test_realize_known_postconditions_random():
    rng = np.random.default_rng(42)
    for _ in range(200):
        Q, n_prev, N_bar = _random_known_instance(rng)
        N = realize_known(Q, n_prev, N_bar)
        assert np.all(N <= N_bar)
        assert np.array_equal(N.sum(axis=0), np.minimum(Q, N_bar.sum(axis=0)))
        shifted = np.zeros_like(n_prev)
        shifted[:, :, :-1] = n_prev[:, :, 1:]
        assert np.all(N >= np.minimum(shifted, N_bar))  # kept jobs never dropped


# -- advance, residual-size model -------------------------------------------

def test_advance_known_direct_evaluation():
    Q = mat(1, 2, {(0, 0): 2, (0, 1): 3})
    nbar = mat(1, 2, {(0, 0): 1, (0, 1): 2})
    out = advance_known(Q, nbar, mat(1, 2))
    assert out[0, 0] == (2 - 1) + 0 + 2  # leftover + arrivals + inflow
    assert out[0, 1] == 3 - 2


def test_advance_known_arrivals_only():
    A = mat(2, 3, {(0, 0): 2, (1, 2): 1})
    assert np.array_equal(advance_known(mat(2, 3), mat(2, 3), A), A)


def test_advance_known_over_prescription_clamps():
    Q = mat(1, 1, {(0, 0): 1})
    assert advance_known(Q, mat(1, 1, {(0, 0): 5}), mat(1, 1))[0, 0] == 0


def test_job_conservation_random_traces():
    rng = np.random.default_rng(7)
    for _ in range(100):
        Q, n_prev, N_bar = _random_known_instance(rng)
        N = realize_known(Q, n_prev, N_bar)
        A = rng.integers(0, 3, size=Q.shape).astype(np.int64)
        out = advance_known(Q, N_bar.sum(axis=0), A)
        completions = N[:, :, 0].sum()
        assert out.sum() == Q.sum() + A.sum() - completions


# -- age model ---------------------------------------------------------------

def test_realize_unknown_keeps_survivors():
    Qt = mat(1, 3, {(0, 0): 5, (0, 1): 4})
    n_prev = mat(1, 3, {(0, 0): 3})[None]
    z_prev = mat(1, 3, {(0, 0): 1})[None]
    N_tld = mat(1, 3, {(0, 1): 2})[None]
    N = realize_unknown(Qt, n_prev, z_prev, N_tld)
    assert N[0, 0, 1] == 2  # both surviving jobs kept in place


def test_realize_unknown_no_survivors_unconstrained():
    Qt = mat(1, 3, {(0, 1): 4})
    n_prev = mat(1, 3, {(0, 0): 2})[None]
    z_prev = n_prev.copy()
    N_tld = mat(1, 3, {(0, 1): 3})[None]
    N = realize_unknown(Qt, n_prev, z_prev, N_tld)
    assert N[0, 0, 1] == 3


def test_realize_unknown_zero_prescription():
    Qt = mat(2, 3, {(0, 0): 4})
    zeros = np.zeros((2, 2, 3), dtype=np.int64)
    assert realize_unknown(Qt, zeros, zeros, zeros).sum() == 0


def test_advance_unknown_cases():
    Qt = mat(1, 3, {(0, 0): 2})
    A = mat(1, 3, {(0, 0): 1, (0, 2): 2})
    out = advance_unknown(Qt, mat(1, 3), np.zeros((1, 2), dtype=np.int64), A)
    assert out[0, 0] == 2 + 3  # all arrivals pool at age zero

    # serve two at age 0, one departs: age 1 gains one
    Qt = mat(1, 3, {(0, 0): 4})
    ntld = mat(1, 3, {(0, 0): 2})
    Z = np.array([[1, 0]], dtype=np.int64)
    out = advance_unknown(Qt, ntld, Z, mat(1, 3))
    assert out[0, 0] == 2 and out[0, 1] == 1

    empty = mat(2, 3)
    assert advance_unknown(empty, empty, np.zeros((2, 2), np.int64), empty).sum() == 0


def test_sample_departures_exhaustive_service():
    comp = np.zeros((1, 4, 4), dtype=np.int64)
    comp[0, 0, 0] = 2  # two jobs of size 1 at age 0
    comp[0, 0, 2] = 1  # one job of size 3
    N = np.zeros((1, 1, 4), dtype=np.int64)
    N[0, 0, 0] = 3
    Z, new_comp = sample_departures(N, comp, np.random.default_rng(0))
    assert Z[0, 0, 0] == 2
    assert new_comp[0, 0].sum() == 0 and new_comp[0, 1, 2] == 1


def test_sample_departures_none_served():
    comp = np.zeros((1, 3, 3), dtype=np.int64)
    comp[0, 0, 1] = 2
    N = np.zeros((2, 1, 3), dtype=np.int64)
    Z, new_comp = sample_departures(N, comp, np.random.default_rng(0))
    assert Z.sum() == 0 and np.array_equal(new_comp, comp)


def test_sample_departures_hypergeometric_probability():
    # serve 1 of {size1 x2, size3 x1}: P(depart) = 2/3
    hits = 0
    n = 20000
    rng = np.random.default_rng(123)
    for _ in range(n):
        comp = np.zeros((1, 4, 4), dtype=np.int64)
        comp[0, 0, 0] = 2
        comp[0, 0, 2] = 1
        N = np.zeros((1, 1, 4), dtype=np.int64)
        N[0, 0, 0] = 1
        Z, _ = sample_departures(N, comp, rng)
        hits += int(Z[0, 0, 0])
    p = hits / n
    assert abs(p - 2 / 3) < 4 * np.sqrt((2 / 3) * (1 / 3) / n)


def test_sample_departures_age_cap():
    # served at the oldest age always depart (true size equals age+1)
    comp = np.zeros((1, 3, 3), dtype=np.int64)
    comp[0, 2, 2] = 4
    N = np.zeros((1, 1, 3), dtype=np.int64)
    N[0, 0, 2] = 4
    Z, new_comp = sample_departures(N, comp, np.random.default_rng(5))
    assert new_comp.sum() == 0  # all gone, nothing aged past the cap
    assert Z.shape == (1, 1, 2)


def test_realize_unknown_postconditions_random():
    rng = np.random.default_rng(19)
    L, M, S = 3, 2, 4
    for _ in range(200):
        n_prev = rng.integers(0, 3, size=(L, M, S)).astype(np.int64)
        z_prev = np.zeros_like(n_prev)
        for idx in np.ndindex(*n_prev.shape):
            if n_prev[idx]:
                z_prev[idx] = rng.integers(0, n_prev[idx] + 1)
        base = np.zeros((M, S), dtype=np.int64)
        base[:, 1:] = (n_prev - z_prev)[:, :, :-1].sum(axis=0)
        Qt = base + rng.integers(0, 5, size=(M, S))
        N_tld = rng.integers(0, 4, size=(L, M, S)).astype(np.int64)
        N = realize_unknown(Qt, n_prev, z_prev, N_tld)
        assert np.all(N <= N_tld)
        assert np.array_equal(N.sum(axis=0), np.minimum(Qt, N_tld.sum(axis=0)))
        per_server_base = np.zeros_like(n_prev)
        per_server_base[:, :, 1:] = (n_prev - z_prev)[:, :, :-1]
        assert np.all(N >= np.minimum(per_server_base, N_tld))


# -- migration-delay model ---------------------------------------------------

def test_advance_offline_reduces_to_plain_bookkeeping_without_migrations():
    # continuation: job served at residual 2 at t-1 is served at residual 1 at t
    Q = mat(1, 3, {(0, 0): 1, (0, 2): 2})
    N_prev = mat(1, 3, {(0, 1): 1})[None]
    N = mat(1, 3, {(0, 0): 1, (0, 2): 1})[None]
    A = mat(1, 3, {(0, 1): 1})
    out = advance_offline(Q, N, N_prev, A)
    # served size-1 job leaves; size-3 job served becomes residual 2; arrival lands
    assert out[0, 0] == 0 and out[0, 1] == 2 and out[0, 2] == 1


def test_advance_offline_reinserts_migrated_job():
    # type-(m,2) job served at t-1, dropped at t: re-enters at residual 2
    Q = mat(1, 3, {(0, 0): 1})
    N_prev = mat(1, 3, {(0, 1): 1})[None]
    N = np.zeros_like(N_prev)
    out = advance_offline(Q, N, N_prev, mat(1, 3))
    assert out[0, 0] == 0 and out[0, 1] == 1


def test_advance_offline_workload_identity_random_traces():
    rng = np.random.default_rng(11)
    L, M, S = 3, 2, 4
    svec = np.arange(1, S + 1)
    Q = rng.integers(0, 6, size=(M, S)).astype(np.int64)
    N_prev = np.zeros((L, M, S), dtype=np.int64)
    for _ in range(300):
        N_bar = rng.integers(0, 2, size=(L, M, S)).astype(np.int64)
        N = realize_offline(Q, N_prev, N_bar)
        A = rng.integers(0, 2, size=(M, S)).astype(np.int64)
        out = advance_offline(Q, N, N_prev, A)
        mig = np.maximum(N_prev[:, :, 1:] - N[:, :, :-1], 0).sum(axis=(0, 2))
        lhs = (out * svec).sum(axis=1)
        rhs = (Q * svec).sum(axis=1) - N.sum(axis=(0, 2)) + (A * svec).sum(axis=1) + mig
        assert np.array_equal(lhs, rhs)
        assert out.sum() == Q.sum() + A.sum() - N[:, :, 0].sum()
        assert np.all(out >= 0)
        Q, N_prev = out, N


def test_realize_offline_reserves_migrating_jobs():
    # two servers; server 0 drops its carried-over job, server 1 may not pick
    # it up the same slot (it is mid-migration)
    Q = mat(1, 2, {(0, 0): 1})
    n_prev = np.zeros((2, 1, 2), dtype=np.int64)
    n_prev[0, 0, 1] = 1
    N_bar = np.zeros_like(n_prev)
    N_bar[1, 0, 0] = 1
    N = realize_offline(Q, n_prev, N_bar)
    assert N.sum() == 0
    out = advance_offline(Q, N, n_prev, mat(1, 2))
    assert out[0, 1] == 1 and out[0, 0] == 0  # job re-enters one size up


# -- debug dumps --------------------------------------------------------------

def test_dump_load_roundtrip():
    Q = mat(2, 3, {(0, 0): 4, (1, 2): 7})
    text = dump_queues(Q)
    assert "1 1 4" in text and "2 3 7" in text
    assert np.array_equal(load_queues(text, 2, 3), Q)
    assert dump_queues(mat(1, 1)) == ""
