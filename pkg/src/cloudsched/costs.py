"""Cost functionals: server running cost, migration costs, weighted penalty.

Service configurations are (M, S) int arrays (VMs offered per job class on
one server). All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AFFINE = "affine"
BINARY = "binary"


@dataclass(frozen=True)
class CostParams:
    """Cost model and weighing parameters.

    c0 is the static per-slot cost of a running server, c[m-1] the per-slot
    cost of one type-m VM (ignored by the binary model). U and V weigh the
    migration and running costs in the schedulers' objectives; alpha in (0,1)
    is the sublinear bias exponent of the migration-averse schedulers.
    """

    model: str = AFFINE
    c0: float = 1.0
    c: tuple[float, ...] = ()
    U: float = 0.0
    V: float = 0.0
    alpha: float = 0.1

    def __post_init__(self):
        if self.model not in (AFFINE, BINARY):
            raise ValueError(f"unknown cost model {self.model!r}")
        if self.c0 < 0 or any(x < 0 for x in self.c):
            raise ValueError("costs must be >= 0")
        if self.U < 0 or self.V < 0:
            raise ValueError("U and V must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    def cvec(self, M: int) -> np.ndarray:
        if self.model == BINARY or not self.c:
            return np.zeros(M, dtype=np.float64)
        if len(self.c) != M:
            raise ValueError("need one per-VM cost per type")
        return np.array(self.c, dtype=np.float64)


def server_cost_aggregate(W, p: CostParams) -> float:
    """Running cost of one server hosting aggregate W (per-type VM counts)."""
    W = np.asarray(W)
    on = 1.0 if W.sum() > 0 else 0.0
    if p.model == BINARY:
        return p.c0 * on
    return p.c0 * on + float(p.cvec(W.shape[0]) @ W)


def server_cost(N, p: CostParams) -> float:
    """Running cost of one server offering service configuration N (M x S)."""
    return server_cost_aggregate(np.asarray(N).sum(axis=1), p)


def migration_cost(n_prev, N_bar) -> int:
    """Jobs preempted when n_prev (actual, t-1) is followed by N_bar (t).

    A job served at residual size s >= 2 continues at size s-1; the shortfall
    (n_prev[m,s] - N_bar[m,s-1])^+ is preempted at unit cost. Completing jobs
    (s = 1) never migrate.
    """
    n_prev = np.asarray(n_prev)
    N_bar = np.asarray(N_bar)
    d = n_prev[:, 1:] - N_bar[:, :-1]
    return int(np.maximum(d, 0).sum())


def migration_cost_age(n_prev, z_prev, N_tilde) -> int:
    """Age-model analog: survivors of age-a service continue at age a+1.

    Counts sum over a <= S-2 of (n_prev[m,a] - z_prev[m,a] - N_tilde[m,a+1])^+.
    """
    n_prev = np.asarray(n_prev)
    z_prev = np.asarray(z_prev)
    N_tilde = np.asarray(N_tilde)
    d = (n_prev[:, :-1] - z_prev[:, : n_prev.shape[1] - 1]) - N_tilde[:, 1:]
    return int(np.maximum(d, 0).sum())


def penalty(server_costs, migration_costs, p: CostParams) -> float:
    """Weighted per-slot penalty V*sum C1 + U*sum C2 over the cluster."""
    return p.V * float(np.sum(server_costs)) + p.U * float(np.sum(migration_costs))


def aggregate_cost_table(W: np.ndarray, ncfg: np.ndarray, p: CostParams) -> np.ndarray:
    """Per-aggregate running cost, (L, ncfg_max), for the padded config arrays."""
    L, _, M = W.shape
    table = np.zeros(W.shape[:2], dtype=np.float64)
    for l in range(L):
        for c in range(int(ncfg[l])):
            table[l, c] = server_cost_aggregate(W[l, c], p)
    return table
