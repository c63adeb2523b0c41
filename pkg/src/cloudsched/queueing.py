"""Central queue state and exact slot-to-slot evolution for all three models.

Array conventions (all int64):

* ``SizeQueues``  -- (M, S): jobs needing a type-m VM for s more slots
  (s = column index + 1); in-service jobs stay counted until completion.
* ``AgeQueues``   -- (M, S): jobs of type m offered a slots of service so far
  (a = column index); the engine additionally keeps a hidden composition
  table (M, S, S) of true sizes, invisible to schedulers.
* ``ServiceConfig`` -- (M, S) per server, stacked (L, M, S): VMs offered per
  job class; prescribed configs come from a scheduler, actual ones from the
  realization step.
* ``Departures``  -- (L, M, S-1): served jobs that completed at slot end,
  by age class.
"""

from __future__ import annotations

import numpy as np

from . import _core


class InternalConsistencyError(RuntimeError):
    """Queue state and configurations disagree; indicates an evolution bug."""


def _as_int_matrix(x, name):
    a = np.asarray(x, dtype=np.int64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d integer array")
    if np.any(a < 0):
        raise ValueError(f"{name} must be non-negative")
    return a


def _as_config_stack(x, name):
    a = np.asarray(x, dtype=np.int64)
    if a.ndim != 3:
        raise ValueError(f"{name} must be an (L, M, S) integer array")
    if np.any(a < 0):
        raise ValueError(f"{name} must be non-negative")
    return a


def realize_known(Q, n_prev, N_bar) -> np.ndarray:
    """Actual configs from prescribed ones (residual-size model).

    Each server keeps min(prescribed, carried-over) jobs from its previous
    slot, then servers in ascending index order fill the rest of their
    prescription from the shared queues. Guarantees N <= N_bar, per-cell
    total served = min(Q, sum_l N_bar), and that no kept job is dropped.
    """
    Q = _as_int_matrix(Q, "Q")
    n_prev = _as_config_stack(n_prev, "n_prev")
    N_bar = _as_config_stack(N_bar, "N_bar")
    out = np.zeros_like(N_bar)
    if _core.realize_core(Q, n_prev, N_bar, out, 0) != 0:
        raise InternalConsistencyError("carried-over jobs exceed queue contents")
    return out


def realize_offline(Q, n_prev, N_bar) -> np.ndarray:
    """Realization for the migration-delay model.

    Identical to realize_known except that carried-over jobs dropped by their
    server are unavailable to every server this slot (they spend it in
    migration and re-enter the queues one size up), so the shared pool is
    reduced by all carried-over jobs, kept or not. This keeps the
    migration-delay recursion non-negative on every trace.
    """
    Q = _as_int_matrix(Q, "Q")
    n_prev = _as_config_stack(n_prev, "n_prev")
    N_bar = _as_config_stack(N_bar, "N_bar")
    out = np.zeros_like(N_bar)
    if _core.realize_core(Q, n_prev, N_bar, out, 1) != 0:
        raise InternalConsistencyError("carried-over jobs exceed queue contents")
    return out


def advance_known(Q, nbar_total, A) -> np.ndarray:
    """One residual-size queue step under summed prescribed service."""
    Q = _as_int_matrix(Q, "Q")
    nbar_total = _as_int_matrix(nbar_total, "nbar_total")
    A = _as_int_matrix(A, "A")
    out = np.zeros_like(Q)
    _core.advance_known_core(Q, nbar_total, A, out)
    return out


def realize_unknown(Qt, n_prev, z_prev, N_tilde) -> np.ndarray:
    """Actual configs from prescribed ones (age model).

    The carried-over base at age a is n_prev[:, :, a-1] - z_prev[:, :, a-1]
    (served last slot and not departed). Same keep-then-fill procedure and
    guarantees as realize_known.
    """
    Qt = _as_int_matrix(Qt, "Qt")
    n_prev = _as_config_stack(n_prev, "n_prev")
    N_tilde = _as_config_stack(N_tilde, "N_tilde")
    z_prev = np.asarray(z_prev, dtype=np.int64)
    if z_prev.shape != n_prev.shape:
        z = np.zeros_like(n_prev)
        z[:, :, : z_prev.shape[2]] = z_prev
        z_prev = z
    out = np.zeros_like(N_tilde)
    if _core.realize_age_core(Qt, n_prev, z_prev, N_tilde, out) != 0:
        raise InternalConsistencyError("carried-over jobs exceed queue contents")
    return out


def advance_unknown(Qt, ntilde_total, Z_total, A) -> np.ndarray:
    """One age-queue step; age 0 absorbs all arrivals of the type."""
    Qt = _as_int_matrix(Qt, "Qt")
    ntilde_total = _as_int_matrix(ntilde_total, "ntilde_total")
    A = _as_int_matrix(A, "A")
    Z_total = np.asarray(Z_total, dtype=np.int64)
    Zfull = np.zeros_like(Qt)
    Zfull[:, : Z_total.shape[1]] = Z_total
    out = np.zeros_like(Qt)
    if _core.advance_age_core(Qt, ntilde_total, Zfull, A.sum(axis=1), out) != 0:
        raise InternalConsistencyError("age queue went negative")
    return out


def advance_offline(Q, N, N_prev, A) -> np.ndarray:
    """One migration-delay queue step.

    N and N_prev are actual per-server configs at t and t-1. Served jobs move
    down one size; carried-over jobs not re-served regain one slot of work
    (they re-enter one size up after their migration slot).
    """
    Q = _as_int_matrix(Q, "Q")
    N = _as_config_stack(N, "N")
    N_prev = _as_config_stack(N_prev, "N_prev")
    A = _as_int_matrix(A, "A")
    out = np.zeros_like(Q)
    if _core.advance_offline_core(Q, N, N_prev, A, out) != 0:
        raise InternalConsistencyError("migration-delay queue went negative")
    return out


def sample_departures(N, composition, rng: np.random.Generator):
    """Departures of served jobs and the advanced hidden composition.

    For each class (m, a) the sum_l N[l,m,a] served jobs are a uniformly
    random subset of the class; a served job departs iff its true size is
    a+1, the rest advance to age a+1. Returns (Z, new_composition) with Z of
    shape (L, M, S-1). Classes are processed oldest first, servers in
    ascending order, so the draw sequence is reproducible.
    """
    N = _as_config_stack(N, "N")
    comp = np.array(composition, dtype=np.int64, copy=True)
    L, M, S = N.shape
    Z = np.zeros((L, M, S - 1), dtype=np.int64)
    for m in range(M):
        for a in range(S - 1, -1, -1):
            k = int(N[:, m, a].sum())
            if k == 0:
                continue
            row = comp[m, a]
            if k > row.sum():
                raise InternalConsistencyError("served more jobs than the class holds")
            drawn = _draw_subset(row, k, rng)
            d = int(drawn[a])
            rem_d, rem_k = d, k
            for l in range(L):
                z = int(rng.hypergeometric(rem_d, rem_k - rem_d, N[l, m, a])) \
                    if N[l, m, a] > 0 and rem_k > 0 else 0
                if a < S - 1:
                    Z[l, m, a] = z
                rem_d -= z
                rem_k -= int(N[l, m, a])
            comp[m, a] -= drawn
            if a + 1 < S:
                comp[m, a + 1, a + 1:] += drawn[a + 1:]
    return Z, comp


def _draw_subset(row, k, rng):
    """Uniform k-subset of an urn with row[i] balls of color i (exact)."""
    drawn = np.zeros_like(row)
    rem = row.copy()
    tot = int(rem.sum())
    for _ in range(k):
        u = rng.random() * tot
        acc = 0.0
        pick = len(rem) - 1
        for i in range(len(rem)):
            acc += rem[i]
            if u < acc:
                pick = i
                break
        drawn[pick] += 1
        rem[pick] -= 1
        tot -= 1
    return drawn


def dump_queues(Q) -> str:
    """Line-based debug dump, one 'm s count' triple per nonzero cell."""
    Q = np.asarray(Q)
    lines = []
    for m in range(Q.shape[0]):
        for s in range(Q.shape[1]):
            if Q[m, s]:
                lines.append(f"{m + 1} {s + 1} {int(Q[m, s])}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_queues(text: str, M: int, S: int) -> np.ndarray:
    """Inverse of dump_queues."""
    Q = np.zeros((M, S), dtype=np.int64)
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        m, s, c = (int(x) for x in line.split())
        Q[m - 1, s - 1] = c
    return Q
