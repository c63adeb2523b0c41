"""Shared helpers for checking the fast per-server solvers against brute force.

The evaluators here score a size-resolved config directly from its matrix
using the cost-module definitions, independently of the solvers' reduced
arithmetic. Loops run in ascending type order so integer-parameter instances
produce bit-identical floats on both paths.
"""

import numpy as np

from cloudsched.cluster import ClusterModel, feasible_from_maximal
from cloudsched.costs import CostParams


def eval_c1(W_agg, p):
    on = 1.0 if sum(W_agg) > 0 else 0.0
    cost = p.c0 * on
    if p.model == "affine" and p.c:
        for m, w in enumerate(W_agg):
            cost += p.c[m] * w
    return cost


def eval_mig_cells(cover_row, row):
    mig = 0
    for s in range(len(row)):
        d = cover_row[s] - row[s]
        if d > 0:
            mig += d
    return mig


def alg1_score_fn(Jw, cover, p):
    def score(N):
        M, S = N.shape
        lin = 0.0
        mig = 0
        W = [int(N[m].sum()) for m in range(M)]
        for m in range(M):
            lin += Jw[m] * W[m]
            mig += eval_mig_cells(cover[m], N[m])
        return lin - p.V * eval_c1(W, p) - p.U * mig
    return score


def refined_score_fn(Jw, cover, p):
    def score(N):
        M, S = N.shape
        lin = 0.0
        migj = 0.0
        W = [int(N[m].sum()) for m in range(M)]
        for m in range(M):
            lin += Jw[m] * W[m]
            d = eval_mig_cells(cover[m], N[m])
            if d > 0:
                migj += d * Jw[m]
        pen = migj ** (1.0 - p.alpha) if migj > 0.0 else 0.0
        return lin - p.V * eval_c1(W, p) - pen
    return score


def qbmw_score_fn(Jw, cover, p, F, first_slot):
    def score(N):
        M, S = N.shape
        lin = 0.0
        member = not first_slot
        W = [int(N[m].sum()) for m in range(M)]
        for m in range(M):
            lin += Jw[m] * W[m]
            for s in range(S):
                if N[m, s] < cover[m, s]:
                    member = False
        bracket = lin - p.V * eval_c1(W, p)
        return (1.0 + 1.0 / F) * bracket if member else bracket
    return score


def tie_fn_for(q):
    def tie(N):
        return int((q * N).sum())
    return tie


def random_instance(rng, max_m=2, max_s=3, max_queue=20, integer_weights=True):
    """Random small single-server instance for oracle comparisons."""
    while True:
        M = int(rng.integers(1, max_m + 1))
        k = int(rng.integers(1, 3))
        maximal = rng.integers(0, 4, size=(k, M))
        maximal = [tuple(int(x) for x in row) for row in maximal]
        if all(sum(w) == 0 for w in maximal):
            maximal = [tuple(1 for _ in range(M))]
        fs = feasible_from_maximal(maximal)
        if len(fs) <= 7:
            break
    S = int(rng.integers(1, max_s + 1))
    cluster = ClusterModel.identical(fs, L=1, S=S)
    q = rng.integers(0, max_queue + 1, size=(M, S)).astype(np.int64)
    aggs = sorted(fs)
    agg = aggs[int(rng.integers(len(aggs)))]
    n_prev = np.zeros((M, S), dtype=np.int64)
    for m in range(M):
        for _ in range(agg[m]):
            n_prev[m, int(rng.integers(S))] += 1
    if integer_weights:
        U = float(rng.integers(0, 30))
        V = float(rng.integers(0, 30))
        c0 = float(rng.integers(0, 5))
        c = tuple(float(x) for x in rng.integers(0, 6, size=M))
    else:
        U, V = float(rng.uniform(0, 30)), float(rng.uniform(0, 30))
        c0, c = float(rng.uniform(0, 5)), tuple(rng.uniform(0, 6, size=M))
    model = "affine" if rng.integers(2) else "binary"
    alpha = float(rng.choice([0.1, 0.25, 0.5, 0.75, 0.9]))
    p = CostParams(model=model, c0=c0, c=c, U=U, V=V, alpha=alpha)
    return cluster, q, n_prev, p
