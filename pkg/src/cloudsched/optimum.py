"""Static-policy benchmarks, exact over the rationals.

The optimal time-average running cost of randomized per-server static
policies lower-bounds every stabilizing scheduler's server cost; it reduces
to a small LP over per-server mixtures of feasible aggregates because both
the running cost and the offered service depend on a config only through its
aggregate. Solved with a two-phase Fraction simplex (Bland's rule), so the
answers carry no float tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cluster import ClusterModel
from .costs import AFFINE, CostParams


class InfeasibleRateError(ValueError):
    """The arrival rates lie outside the capacity region."""


class UnboundedLPError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# two-phase simplex over Fractions
# ---------------------------------------------------------------------------

def _pivot(T, basis, row, col):
    piv = T[row][col]
    T[row] = [x / piv for x in T[row]]
    for i in range(len(T)):
        if i != row and T[i][col] != 0:
            f = T[i][col]
            T[i] = [a - f * b for a, b in zip(T[i], T[row])]
    basis[row] = col


def _run_simplex(T, basis, m, scan, rhs):
    """Minimize the objective in row m; columns 0..scan-1 may enter (Bland)."""
    while True:
        col = -1
        for j in range(scan):
            if T[m][j] < 0:
                col = j
                break
        if col < 0:
            return
        row = -1
        best = None
        for i in range(m):
            if T[i][col] > 0:
                ratio = T[i][rhs] / T[i][col]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[row]):
                    best = ratio
                    row = i
        if row < 0:
            raise UnboundedLPError("LP is unbounded")
        _pivot(T, basis, row, col)


def solve_lp(c, A_eq, b_eq, A_ub, b_ub):
    """Exact min c.x s.t. A_eq x = b_eq, A_ub x <= b_ub, x >= 0.

    All inputs are sequences of Fractions (or ints). Returns (value, x) as
    Fractions. Raises InfeasibleRateError / UnboundedLPError.
    """
    c = [Fraction(v) for v in c]
    n = len(c)
    rows = [[Fraction(v) for v in r] for r in A_eq] + \
           [[Fraction(v) for v in r] for r in A_ub]
    rhs = [Fraction(v) for v in b_eq] + [Fraction(v) for v in b_ub]
    n_ub = len(A_ub)

    # slack variables for the inequalities
    ncols = n + n_ub
    T = []
    for i, (r, b) in enumerate(zip(rows, rhs)):
        row = r + [Fraction(0)] * n_ub + [b]
        if i >= len(A_eq):
            row[n + (i - len(A_eq))] = Fraction(1)
        T.append(row)
    # normalize to b >= 0
    for i in range(len(T)):
        if T[i][-1] < 0:
            T[i] = [-x for x in T[i]]

    # artificials, one per row
    m = len(T)
    for i in range(m):
        art = [Fraction(0)] * m
        art[i] = Fraction(1)
        T[i] = T[i][:-1] + art + [T[i][-1]]
    total = ncols + m
    basis = [ncols + i for i in range(m)]

    # phase 1: drive the artificials to zero
    obj = [Fraction(0)] * (total + 1)
    for j in range(ncols):
        obj[j] = -sum(T[i][j] for i in range(m))
    obj[total] = -sum(T[i][total] for i in range(m))
    T.append(obj)
    _run_simplex(T, basis, m, total, total)
    if -T[m][total] != 0:
        raise InfeasibleRateError("LP infeasible")
    # pivot leftover artificials out of the basis (degenerate rows)
    drop = []
    for i in range(m):
        if basis[i] >= ncols:
            col = -1
            for j in range(ncols):
                if T[i][j] != 0:
                    col = j
                    break
            if col >= 0:
                _pivot(T, basis, i, col)
            else:
                drop.append(i)
    for i in reversed(drop):
        del T[i]
        del basis[i]
    m = len(T) - 1

    # phase 2 with the real objective; artificial columns may not re-enter
    obj = [Fraction(v) for v in c] + [Fraction(0)] * (total - n) + [Fraction(0)]
    for i in range(m):
        cb = obj[basis[i]]
        if cb != 0:
            obj = [a - cb * b for a, b in zip(obj, T[i])]
    T[m] = obj
    _run_simplex(T, basis, m, ncols, total)

    x = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i][total]
    return -T[m][total], x


# ---------------------------------------------------------------------------
# model-specific programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StaticPolicy:
    """Per-server mixture over feasible aggregates plus a workload split.

    mixtures[l] is a tuple of (aggregate, probability); workload_split[l][m]
    is the per-slot type-m workload routed to server l. Probabilities and
    split entries are exact Fractions.
    """

    mixtures: tuple
    workload_split: tuple

    def cost(self, p: CostParams) -> Fraction:
        total = Fraction(0)
        for mix in self.mixtures:
            for w, prob in mix:
                total += prob * _aggregate_cost_exact(w, p)
        return total

    def check(self, cluster: ClusterModel, workload) -> None:
        for l, mix in enumerate(self.mixtures):
            probs = [prob for _, prob in mix]
            if any(pr < 0 for pr in probs) or sum(probs) != 1:
                raise AssertionError("mixture is not a probability distribution")
            for w, _ in mix:
                if not cluster.is_feasible(w, l):
                    raise AssertionError("mixture uses an infeasible config")
            for m in range(cluster.M):
                service = sum(prob * w[m] for w, prob in mix)
                if self.workload_split[l][m] > service:
                    raise AssertionError("split workload exceeds offered service")
        for m in range(cluster.M):
            if sum(sp[m] for sp in self.workload_split) != workload[m]:
                raise AssertionError("workload split does not add up")


def _aggregate_cost_exact(w, p: CostParams) -> Fraction:
    on = 1 if any(x > 0 for x in w) else 0
    cost = Fraction(p.c0) * on
    if p.model == AFFINE and p.c:
        for m, x in enumerate(w):
            cost += Fraction(p.c[m]) * x
    return cost


def exact_workload(rates) -> list[Fraction]:
    """Per-type workload sum_s s*lambda[m,s] with float entries taken exactly."""
    rates = np.asarray(rates, dtype=np.float64)
    M, S = rates.shape
    return [sum(Fraction(float(rates[m, s])) * (s + 1) for s in range(S)) for m in range(M)]


def uniform_workload(L: int, rho, M: int, S: int) -> list[Fraction]:
    """Exact per-type workload of the uniform-over-sizes rate family.

    Each of the S sizes arrives at rate L*rho*m/165, so type m loads
    L*rho*m/165 * S(S+1)/2 per slot. rho given as str/Fraction stays exact
    (floats go through their decimal repr, so 0.8 means 4/5).
    """
    r = Fraction(str(rho)) if isinstance(rho, float) else Fraction(rho)
    ts = Fraction(S * (S + 1), 2)
    return [Fraction(L) * r * m / 165 * ts for m in range(1, M + 1)]


def solve_static_cost(rates, cluster: ClusterModel, p: CostParams, workload=None):
    """Exact optimum server running cost over static randomized policies.

    Minimizes the expected per-slot running cost subject to each type's
    offered service covering its workload. Identical servers collapse to one
    server by symmetry (averaging any feasible policy over servers preserves
    feasibility and cost). Returns (value, StaticPolicy). An exact per-type
    workload (list of Fractions) may be passed to bypass float rates.
    """
    wl = [Fraction(w) for w in workload] if workload is not None else exact_workload(rates)
    M = cluster.M
    if cluster.identical_servers:
        fs = cluster.feasible_sets[0]
        L = cluster.L
        ncfg = len(fs)
        cvec = [_aggregate_cost_exact(w, p) for w in fs]
        A_eq = [[Fraction(1)] * ncfg]
        b_eq = [Fraction(1)]
        A_ub = [[-Fraction(fs[c][m]) for c in range(ncfg)] for m in range(M)]
        b_ub = [-wl[m] / L for m in range(M)]
        value, x = solve_lp(cvec, A_eq, b_eq, A_ub, b_ub)
        mix = tuple((fs[c], x[c]) for c in range(ncfg) if x[c] != 0)
        split = tuple(wl[m] / L for m in range(M))
        policy = StaticPolicy(mixtures=(mix,) * L, workload_split=(split,) * L)
        return L * value, policy

    # heterogeneous: per-server mixtures plus explicit workload split
    sets = cluster.feasible_sets
    L = cluster.L
    offsets = []
    total_pi = 0
    for fs in sets:
        offsets.append(total_pi)
        total_pi += len(fs)
    nvar = total_pi + L * M  # mixtures, then split w[l,m]
    c = [Fraction(0)] * nvar
    for l, fs in enumerate(sets):
        for i, w in enumerate(fs):
            c[offsets[l] + i] = _aggregate_cost_exact(w, p)
    A_eq, b_eq = [], []
    for l, fs in enumerate(sets):
        row = [Fraction(0)] * nvar
        for i in range(len(fs)):
            row[offsets[l] + i] = Fraction(1)
        A_eq.append(row)
        b_eq.append(Fraction(1))
    for m in range(M):
        row = [Fraction(0)] * nvar
        for l in range(L):
            row[total_pi + l * M + m] = Fraction(1)
        A_eq.append(row)
        b_eq.append(wl[m])
    A_ub, b_ub = [], []
    for l, fs in enumerate(sets):
        for m in range(M):
            row = [Fraction(0)] * nvar
            row[total_pi + l * M + m] = Fraction(1)
            for i, w in enumerate(fs):
                row[offsets[l] + i] = -Fraction(w[m])
            A_ub.append(row)
            b_ub.append(Fraction(0))
    value, x = solve_lp(c, A_eq, b_eq, A_ub, b_ub)
    mixtures = []
    split = []
    for l, fs in enumerate(sets):
        mixtures.append(tuple((fs[i], x[offsets[l] + i])
                              for i in range(len(fs)) if x[offsets[l] + i] != 0))
        split.append(tuple(x[total_pi + l * M + m] for m in range(M)))
    return value, StaticPolicy(mixtures=tuple(mixtures), workload_split=tuple(split))


def capacity_boundary(direction, cluster: ClusterModel, workload=None) -> Fraction:
    """Largest rho such that rho * direction is a stabilizable rate matrix.

    The region along a ray is an interval because per-server achievable
    service vectors form a downward-closed convex set; solved as one exact LP
    maximizing rho subject to mixture coverage. An exact per-type workload
    direction may be passed to bypass float rates.
    """
    wl = [Fraction(w) for w in workload] if workload is not None else exact_workload(direction)
    if all(w == 0 for w in wl):
        raise ValueError("direction must be nonzero")
    sets = cluster.feasible_sets
    L, M = cluster.L, cluster.M
    offsets = []
    total = 0
    for fs in sets:
        offsets.append(total)
        total += len(fs)
    nvar = total + 1  # betas then rho
    c = [Fraction(0)] * nvar
    c[total] = Fraction(-1)  # maximize rho
    A_eq, b_eq = [], []
    for l, fs in enumerate(sets):
        row = [Fraction(0)] * nvar
        for i in range(len(fs)):
            row[offsets[l] + i] = Fraction(1)
        A_eq.append(row)
        b_eq.append(Fraction(1))
    A_ub, b_ub = [], []
    for m in range(M):
        if wl[m] == 0:
            continue
        row = [Fraction(0)] * nvar
        row[total] = wl[m]
        for l, fs in enumerate(sets):
            for i, w in enumerate(fs):
                row[offsets[l] + i] = -Fraction(w[m])
        A_ub.append(row)
        b_ub.append(Fraction(0))
    value, _ = solve_lp(c, A_eq, b_eq, A_ub, b_ub)
    return -value


def max_uniform_slack(rates, cluster: ClusterModel, workload=None) -> Fraction:
    """Largest eps such that adding eps to every rate entry stays stabilizable."""
    wl = [Fraction(w) for w in workload] if workload is not None else exact_workload(rates)
    S = cluster.S if rates is None else np.asarray(rates).shape[1]
    ts = Fraction(S * (S + 1), 2)  # workload added per unit of uniform rate
    sets = cluster.feasible_sets
    L, M = cluster.L, cluster.M
    offsets = []
    total = 0
    for fs in sets:
        offsets.append(total)
        total += len(fs)
    nvar = total + 1
    c = [Fraction(0)] * nvar
    c[total] = Fraction(-1)
    A_eq, b_eq = [], []
    for l, fs in enumerate(sets):
        row = [Fraction(0)] * nvar
        for i in range(len(fs)):
            row[offsets[l] + i] = Fraction(1)
        A_eq.append(row)
        b_eq.append(Fraction(1))
    A_ub, b_ub = [], []
    for m in range(M):
        row = [Fraction(0)] * nvar
        row[total] = ts
        for l, fs in enumerate(sets):
            for i, w in enumerate(fs):
                row[offsets[l] + i] = -Fraction(w[m])
        A_ub.append(row)
        b_ub.append(-wl[m])
    value, _ = solve_lp(c, A_eq, b_eq, A_ub, b_ub)
    return -value


# ---------------------------------------------------------------------------
# closed-form performance-bound constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoremBounds:
    """Evaluable constants and bounds from the schedulers' guarantees."""

    B2: float
    B4: float
    k0: float
    K2: float
    queue_bound: float        # on the time-average total weighted backlog
    server_cost_bound: float  # on the time-average prescribed running cost
    migration_bound: float    # on the time-average migration cost


def theorem_bounds(L: int, M: int, S: int, a_max: int, n_max: int, U: float,
                   V: float, epsilon: float, copt_plus_eps: float,
                   sbar_max: float | None = None) -> TheoremBounds:
    """Evaluate the closed-form constants for given system parameters.

    epsilon is the uniform per-entry rate slack used for the perturbed
    optimum copt_plus_eps; sbar_max bounds the mean job size (defaults to S).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if sbar_max is None:
        sbar_max = float(S)
    B2 = (M * S / 2.0) * (S * a_max**2 + 2.0 * (L * n_max) ** 2)
    B4 = float(L * M * S * a_max * n_max + L * M * n_max**2)
    k0 = 1.0 / (M * (n_max**2 + M * S**2 * a_max * n_max))
    K2 = (L * M * (a_max * sbar_max + n_max * sbar_max)
          + L * n_max * math.log1p(S * L * n_max) + M * math.log(S))
    queue_bound = (B2 + U * L * n_max + V * copt_plus_eps) / epsilon
    server_cost_bound = (B2 + U * L * n_max) / V + copt_plus_eps if V > 0 else math.inf
    migration_bound = B4 / U if U > 0 else math.inf
    return TheoremBounds(B2=B2, B4=B4, k0=k0, K2=K2, queue_bound=queue_bound,
                         server_cost_bound=server_cost_bound, migration_bound=migration_bound)


def migration_interval_bound(backlog: float, V: float, alpha: float, k0: float) -> float:
    """Lower bound on the gap until the next migration at a server whose last
    migration saw the given total weighted backlog."""
    base = backlog - 2.0 * V
    if base <= 0:
        return 1.0
    return max(1.0, k0 * base ** (1.0 - alpha))
