"""Scheduling policies: per-slot prescribed configurations for every server.

All deciders take the visible queues, the mutable SchedulerState (previous
actual configs and per-policy bookkeeping), the cluster, and CostParams, and
return a prescribed (L, M, S) config stack. The heavy per-server argmaxes are
shared with the simulation kernels (single source of truth); the independent
brute-force oracle at the bottom exists to check them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _core, costs
from .cluster import ClusterModel
from .costs import CostParams


@dataclass
class SchedulerState:
    """Mutable cross-slot scheduler memory.

    n_prev / z_prev are the previous slot's actual configs and departures.
    For the queue-biased policy, stored_F[l] is the bias denominator frozen at
    the server's last migration slot, mig_epoch_t / mig_epoch_backlog record
    that slot and its total weighted backlog, and migration_log collects
    (server, slot, backlog_at_previous_epoch, interval) tuples.
    """

    cluster: ClusterModel
    t: int = 0
    n_prev: np.ndarray = None
    z_prev: np.ndarray = None
    stored_F: np.ndarray = None
    mig_epoch_t: np.ndarray = None
    mig_epoch_backlog: np.ndarray = None
    migration_log: list = field(default_factory=list)

    def __post_init__(self):
        L, M, S = self.cluster.L, self.cluster.M, self.cluster.S
        if self.n_prev is None:
            self.n_prev = np.zeros((L, M, S), dtype=np.int64)
        if self.z_prev is None:
            self.z_prev = np.zeros((L, M, S), dtype=np.int64)
        if self.stored_F is None:
            self.stored_F = np.ones(L, dtype=np.float64)
        if self.mig_epoch_t is None:
            self.mig_epoch_t = np.zeros(L, dtype=np.int64)
        if self.mig_epoch_backlog is None:
            self.mig_epoch_backlog = np.zeros(L, dtype=np.int64)


def size_weights(Q) -> np.ndarray:
    """Per-type workload backlog sum_s s*Q[m,s]."""
    Q = np.asarray(Q, dtype=np.int64)
    s = np.arange(1, Q.shape[1] + 1, dtype=np.int64)
    return (Q @ s).astype(np.float64)


def log_weights(Qt) -> np.ndarray:
    """Per-type logarithmic weight log(1 + total queued jobs)."""
    Qt = np.asarray(Qt, dtype=np.int64)
    return np.array([_core.log_weight(int(t)) for t in Qt.sum(axis=1)], dtype=np.float64)


def bias_F(Q, alpha: float) -> float:
    """Sublinear bias denominator max(1, (sum_{m,s} s*Q[m,s])^alpha)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    wbl = float(size_weights(np.asarray(Q)).sum())
    return max(1.0, wbl ** alpha)


def _shift_cover(n_prev_l: np.ndarray) -> np.ndarray:
    """Continuation demand per cell: jobs served one size above last slot."""
    cover = np.zeros_like(n_prev_l)
    cover[:, :-1] = n_prev_l[:, 1:]
    return cover


def _age_cover(n_prev_l: np.ndarray, z_prev_l: np.ndarray) -> np.ndarray:
    cover = np.zeros_like(n_prev_l)
    cover[:, 1:] = n_prev_l[:, :-1] - z_prev_l[:, :-1]
    return cover


def alg1_decide(Q, state: SchedulerState, cluster: ClusterModel, p: CostParams) -> np.ndarray:
    """Size-aware drift-plus-penalty choice.

    Per server, maximizes sum_m J_m * W_m - V*C1 - U*C2(n_prev, N) over
    feasible configs, J_m the type-m workload backlog; ties go to the largest
    sum q*N, then to the first optimum in lex order.
    """
    Q = np.asarray(Q, dtype=np.int64)
    W, ncfg = cluster.config_arrays()
    table = costs.aggregate_cost_table(W, ncfg, p)
    Jw = size_weights(Q)
    out = np.zeros((cluster.L, cluster.M, cluster.S), dtype=np.int64)
    for l in range(cluster.L):
        cover = _shift_cover(state.n_prev[l])
        _core.dpp_server(W[l], ncfg[l], Q, Jw, cover, table[l], p.V, p.U, out[l])
    return out


def preemptive_baseline_decide(Q, state: SchedulerState, cluster: ClusterModel,
                               p: CostParams = None) -> np.ndarray:
    """Cost-blind max-weight: alg1 with both weighing parameters at zero."""
    blind = CostParams(model=p.model if p else costs.BINARY,
                       c0=p.c0 if p else 1.0, c=p.c if p else (),
                       U=0.0, V=0.0, alpha=p.alpha if p else 0.1)
    return alg1_decide(Q, state, cluster, blind)


def alg2_decide(Qt, state: SchedulerState, cluster: ClusterModel, p: CostParams) -> np.ndarray:
    """Age-based drift-plus-penalty choice with logarithmic queue weights."""
    Qt = np.asarray(Qt, dtype=np.int64)
    W, ncfg = cluster.config_arrays()
    table = costs.aggregate_cost_table(W, ncfg, p)
    Jw = log_weights(Qt)
    out = np.zeros((cluster.L, cluster.M, cluster.S), dtype=np.int64)
    for l in range(cluster.L):
        cover = _age_cover(state.n_prev[l], state.z_prev[l])
        _core.dpp_server(W[l], ncfg[l], Qt, Jw, cover, table[l], p.V, p.U, out[l])
    return out


def qbmw_decide(Q, state: SchedulerState, cluster: ClusterModel, p: CostParams) -> np.ndarray:
    """Queue-biased max-weight for the migration-delay model.

    Configurations that keep every carried-over job in place get their score
    multiplied by 1 + 1/F, F frozen at the server's last migration slot;
    state.t must have been advanced (slot 1 starts with an empty bias set).
    Updates the migration bookkeeping in state.
    """
    Q = np.asarray(Q, dtype=np.int64)
    W, ncfg = cluster.config_arrays()
    table = costs.aggregate_cost_table(W, ncfg, p)
    Jw = size_weights(Q)
    wbl = int(Jw.sum())
    out = np.zeros((cluster.L, cluster.M, cluster.S), dtype=np.int64)
    for l in range(cluster.L):
        cover = _shift_cover(state.n_prev[l])
        member = _core.qbmw_server(W[l], ncfg[l], Q, Jw, cover, table[l], p.V,
                                   state.stored_F[l], 1 if state.t == 1 else 0, out[l])
        if member == 0:
            if state.mig_epoch_t[l] > 0:
                state.migration_log.append(
                    (l, state.t, int(state.mig_epoch_backlog[l]),
                     state.t - int(state.mig_epoch_t[l])))
            state.mig_epoch_t[l] = state.t
            state.mig_epoch_backlog[l] = wbl
            state.stored_F[l] = _core.bias_value(wbl, p.alpha)
    return out


def refined_qbmw_decide(Q, state: SchedulerState, cluster: ClusterModel,
                        p: CostParams) -> np.ndarray:
    """Migration-penalized max-weight: each config pays (sum_m mig_m*J_m)^(1-alpha)."""
    Q = np.asarray(Q, dtype=np.int64)
    W, ncfg = cluster.config_arrays()
    table = costs.aggregate_cost_table(W, ncfg, p)
    Jw = size_weights(Q)
    out = np.zeros((cluster.L, cluster.M, cluster.S), dtype=np.int64)
    for l in range(cluster.L):
        cover = _shift_cover(state.n_prev[l])
        _core.refined_server(W[l], ncfg[l], Q, Jw, cover, table[l], p.V, p.alpha, out[l])
    return out


def nonpreemptive_baseline_decide(Q, state: SchedulerState, cluster: ClusterModel,
                                  frame_len: int) -> np.ndarray:
    """Frame-based no-preemption baseline.

    Running jobs are never preempted; freed capacity is refilled greedily by
    workload weight, admitting only jobs that finish within the current
    frame. Migration cost is identically zero by construction.
    """
    if frame_len < cluster.S:
        raise ValueError("frame_len must be >= S so every job is admissible")
    Q = np.asarray(Q, dtype=np.int64)
    W, ncfg = cluster.config_arrays()
    Jw = size_weights(Q)
    cont_all = np.zeros_like(Q)
    for l in range(cluster.L):
        cont_all += _shift_cover(state.n_prev[l])
    avail = np.maximum(Q - cont_all, 0)
    slots_left = frame_len - (state.t - 1) % frame_len
    out = np.zeros((cluster.L, cluster.M, cluster.S), dtype=np.int64)
    for l in range(cluster.L):
        _core.nonpre_admit(W[l], ncfg[l], avail, state.n_prev[l], Jw, slots_left, out[l])
    return out


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------

class SearchSpaceError(RuntimeError):
    """The exhaustive enumeration would exceed the configured limit."""


def _compositions(total, cells):
    """All ways to place `total` units into `cells` ordered slots."""
    if cells == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, cells - 1):
            yield (first,) + rest


def enumerate_configs(feasible_aggregates, S, limit=2_000_000):
    """Every size-resolved config whose per-type totals form a feasible aggregate.

    Yields (M, S) int64 arrays in lexicographic order of the flattened matrix
    within each aggregate. Refuses when the space exceeds `limit`.
    """
    space = 0
    for agg in feasible_aggregates:
        n = 1
        for w in agg:
            n *= math.comb(w + S - 1, S - 1)
        space += n
    if space > limit:
        raise SearchSpaceError(f"search space {space} exceeds limit {limit}")
    for agg in feasible_aggregates:
        per_type = [list(_compositions(w, S)) for w in agg]
        for rows in itertools.product(*per_type):
            yield np.array(rows, dtype=np.int64)


def brute_force_argmax(score_fn, tie_fn, feasible_aggregates, S, limit=2_000_000):
    """Exhaustive two-level argmax over all size-resolved configs.

    Returns (config, score, tie). Ties on both criteria go to the
    lexicographically smallest flattened matrix. score_fn and tie_fn are
    arbitrary callbacks, so this stays independent of the fast solvers.
    """
    best = None
    for N in enumerate_configs(feasible_aggregates, S, limit):
        sc = score_fn(N)
        ti = tie_fn(N)
        key = tuple(N.ravel())
        if best is None or sc > best[1] or (sc == best[1] and
                                            (ti > best[2] or (ti == best[2] and key < best[3]))):
            best = (N, sc, ti, key)
    return best[0], best[1], best[2]
