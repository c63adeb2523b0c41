"""Slotted simulation loop, metric accumulation, and parameter sweeps.

run() executes one seeded simulation and returns RunMetrics. The default
path is a compiled whole-run kernel; fast=False runs the same slot sequence
through the public module functions (identical random stream, bit-identical
results) and exists so the two can be compared in tests.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _core, costs, queueing, schedulers, workload
from .cluster import ClusterModel
from .costs import BINARY, CostParams
from .queueing import InternalConsistencyError

SCHEDULERS = ("alg1", "alg2", "qbmw", "refined_qbmw", "preemptive", "nonpreemptive")

_MODEL = {
    "alg1": "known", "preemptive": "known", "nonpreemptive": "known",
    "alg2": "age",
    "qbmw": "offline", "refined_qbmw": "offline",
}

VIOLATION_KEYS = (
    "realize_precondition", "c2_identity", "cond1", "conservation",
    "binary_active", "negative_queue", "workload_identity", "composition",
    "migration_interval",
)


def rates_from_spec(spec: dict, cluster: ClusterModel):
    """Materialize a rate matrix from its config description.

    kinds: 'uniform' (rate L*rho*m/165 per cell), 'uniform_normalized' (same
    shape rescaled so rho=1 sits exactly on the cluster's stability
    boundary), 'explicit' (verbatim matrix). Returns (rates, rho-or-None).
    """
    kind = spec.get("kind", "uniform")
    if kind == "explicit":
        rates = np.asarray(spec["matrix"], dtype=np.float64)
        if rates.shape[0] != cluster.M:
            raise ValueError("rate matrix row count must equal M")
        return rates, spec.get("rho")
    rho = float(spec["rho"])
    base = workload.uniform_size_rates(cluster.L, rho, cluster.M, cluster.S)
    if kind == "uniform":
        return base, rho
    if kind == "uniform_normalized":
        from .optimum import capacity_boundary, uniform_workload
        wl = uniform_workload(cluster.L, 1, cluster.M, cluster.S)
        return base * float(capacity_boundary(None, cluster, workload=wl)), rho
    raise ValueError(f"unknown rate kind {kind!r}")


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulation run depends on."""

    cluster: ClusterModel
    rates: np.ndarray
    scheduler: str
    params: CostParams
    T: int
    warmup: int
    seed: int
    a_max: int = 10
    frame_len: int = 60
    rho: float | None = None
    rate_spec: dict | None = None

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if not (self.T > self.warmup >= 0):
            raise ValueError("need T > warmup >= 0")
        rates = np.asarray(self.rates, dtype=np.float64)
        if rates.shape != (self.cluster.M, self.cluster.S):
            raise ValueError("rates must have shape (M, S)")
        if np.any(rates > self.a_max):
            raise workload.RateExceedsBoundError("rate entry exceeds a_max")
        if self.scheduler == "nonpreemptive" and self.frame_len < self.cluster.S:
            raise ValueError("frame_len must be >= S")
        object.__setattr__(self, "rates", rates)

    @property
    def model(self) -> str:
        return _MODEL[self.scheduler]


@dataclass(frozen=True)
class RunMetrics:
    """Time averages over the post-warmup slots plus end-of-run snapshots."""

    scheduler: str
    rho: float | None
    V: float
    U: float
    alpha: float
    seed: int
    T: int
    warmup: int
    mean_queue_len: float
    mean_weighted_backlog: float
    mean_server_cost: float
    mean_active_servers: float
    mean_migrations: float
    mean_migration_cost: float
    final_queue_len: float
    final_weighted_backlog: float
    quarter_queue_means: tuple
    slots: int
    violations: dict
    first_violation_slot: int
    wall_time_s: float

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())


def kernel_seed(seed: int) -> int:
    """Stable 32-bit stream seed derived from the run seed."""
    return int(np.random.SeedSequence(seed).generate_state(1, np.uint32)[0])


def _metrics_from_acc(cfg: RunConfig, acc, viol, wall) -> RunMetrics:
    n = max(float(acc[_core.A_SLOTS]), 1.0)
    quarters = tuple(
        float(acc[_core.A_Q1 + i]) / max(float(acc[_core.A_Q1 + 4 + i]), 1.0)
        for i in range(4))
    return RunMetrics(
        scheduler=cfg.scheduler, rho=cfg.rho, V=cfg.params.V, U=cfg.params.U,
        alpha=cfg.params.alpha, seed=cfg.seed, T=cfg.T, warmup=cfg.warmup,
        mean_queue_len=float(acc[_core.A_QLEN]) / n,
        mean_weighted_backlog=float(acc[_core.A_WBL]) / n,
        mean_server_cost=float(acc[_core.A_SCOST]) / n,
        mean_active_servers=float(acc[_core.A_ACTIVE]) / n,
        mean_migrations=float(acc[_core.A_MIGN]) / n,
        mean_migration_cost=float(acc[_core.A_MIGC]) / n,
        final_queue_len=float(acc[_core.A_FINAL_Q]),
        final_weighted_backlog=float(acc[_core.A_FINAL_W]),
        quarter_queue_means=quarters,
        slots=int(acc[_core.A_SLOTS]),
        violations={k: int(v) for k, v in zip(VIOLATION_KEYS, viol)},
        first_violation_slot=int(viol[_core.V_FIRST_SLOT]),
        wall_time_s=float(wall),
    )


def run(cfg: RunConfig, fast: bool = True) -> RunMetrics:
    """Execute one simulation; deterministic given cfg (bit-identical reruns)."""
    t0 = time.perf_counter()
    W, ncfg = cfg.cluster.config_arrays()
    table = costs.aggregate_cost_table(W, ncfg, cfg.params)
    cvec = cfg.params.cvec(cfg.cluster.M)
    is_binary = 1 if cfg.params.model == BINARY else 0
    acc = np.zeros(_core.ACC_LEN, dtype=np.float64)
    viol = np.zeros(_core.VIOL_LEN, dtype=np.int64)
    q_out = np.zeros((cfg.cluster.M, cfg.cluster.S), dtype=np.int64)
    seed = kernel_seed(cfg.seed)
    p = cfg.params
    model = cfg.model

    if fast:
        if model == "known":
            U, V = (0.0, 0.0) if cfg.scheduler == "preemptive" else (p.U, p.V)
            code = 1 if cfg.scheduler == "nonpreemptive" else 0
            _core.run_known(seed, cfg.T, cfg.warmup, cfg.rates, cfg.a_max, W, ncfg,
                            table, cvec, p.c0, is_binary, U, V, code,
                            cfg.frame_len, acc, viol, q_out)
        elif model == "offline":
            code = 0 if cfg.scheduler == "qbmw" else 1
            k0 = 1.0 / (cfg.cluster.M * (cfg.cluster.N_max**2 +
                        cfg.cluster.M * cfg.cluster.S**2 * cfg.a_max * cfg.cluster.N_max))
            _core.run_offline(seed, cfg.T, cfg.warmup, cfg.rates, cfg.a_max, W, ncfg,
                              table, cvec, p.c0, is_binary, p.V, p.alpha, code,
                              k0, acc, viol, q_out)
        else:
            _core.run_age(seed, cfg.T, cfg.warmup, cfg.rates, cfg.a_max, W, ncfg,
                          table, cvec, p.c0, is_binary, p.U, p.V, acc, viol, q_out)
    else:
        if model == "known":
            _py_run_known(cfg, seed, cvec, is_binary, acc, viol)
        elif model == "offline":
            _py_run_offline(cfg, seed, cvec, is_binary, acc, viol)
        else:
            _py_run_age(cfg, seed, cvec, is_binary, acc, viol)

    return _metrics_from_acc(cfg, acc, viol, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# reference loops built from the public module functions
# ---------------------------------------------------------------------------

def _stamp_first(viol, t):
    if viol[_core.V_FIRST_SLOT] == 0 and viol[:_core.V_FIRST_SLOT].sum() > 0:
        viol[_core.V_FIRST_SLOT] = t


class _Recorder:
    """Mirrors the kernel accumulator arithmetic exactly."""

    def __init__(self, acc, viol, T, warmup):
        self.acc, self.viol, self.T, self.warmup = acc, viol, T, warmup

    def record(self, t, qlen, wbl, scost, active, mign, migc):
        a = self.acc
        qi = (t - 1) * 4 // self.T
        a[_core.A_Q1 + qi] += qlen
        a[_core.A_Q1 + 4 + qi] += 1.0
        if t > self.warmup:
            a[_core.A_SLOTS] += 1.0
            a[_core.A_QLEN] += qlen
            a[_core.A_WBL] += wbl
            a[_core.A_SCOST] += scost
            a[_core.A_ACTIVE] += active
            a[_core.A_MIGN] += mign
            a[_core.A_MIGC] += migc

    def finish(self, qlen, wbl):
        self.acc[_core.A_FINAL_Q] = qlen
        self.acc[_core.A_FINAL_W] = wbl


def _actual_costs(N, cvec, c0, is_binary):
    scost, active = 0.0, 0
    for l in range(N.shape[0]):
        c, on = _core._server_cost_actual(N[l], cvec, c0, is_binary)
        scost += c
        active += on
    return scost, active


def _py_run_known(cfg, seed, cvec, is_binary, acc, viol):
    cluster, p = cfg.cluster, cfg.params
    M, S = cluster.M, cluster.S
    rec = _Recorder(acc, viol, cfg.T, cfg.warmup)
    state = schedulers.SchedulerState(cluster)
    A = np.zeros((M, S), dtype=np.int64)
    _core.rng_seed(seed)
    _core.draw_arrivals(cfg.rates, cfg.a_max, A)
    Q = A.copy()
    svec = np.arange(1, S + 1, dtype=np.int64)
    for t in range(1, cfg.T + 1):
        state.t = t
        if cfg.scheduler == "nonpreemptive":
            N_bar = schedulers.nonpreemptive_baseline_decide(Q, state, cluster, cfg.frame_len)
        elif cfg.scheduler == "preemptive":
            N_bar = schedulers.preemptive_baseline_decide(Q, state, cluster, p)
        else:
            N_bar = schedulers.alg1_decide(Q, state, cluster, p)
        try:
            N = queueing.realize_known(Q, state.n_prev, N_bar)
        except InternalConsistencyError:
            viol[_core.V_PRE] += 1
            N = np.zeros_like(N_bar)
        scost, active = _actual_costs(N, cvec, p.c0, is_binary)
        migc = sum(costs.migration_cost(state.n_prev[l], N_bar[l]) for l in range(cluster.L))
        migc_act = sum(costs.migration_cost(state.n_prev[l], N[l]) for l in range(cluster.L))
        if migc != migc_act:
            viol[_core.V_C2ID] += 1
        floor = np.minimum(N_bar, _shift_all(state.n_prev))
        if np.any(N < floor):
            viol[_core.V_COND1] += int(np.sum(N < floor))
        if is_binary and scost != p.c0 * active:
            viol[_core.V_BINACT] += 1
        rec.record(t, int(Q.sum()), int((Q * svec).sum()), scost, active, migc, migc)
        _core.draw_arrivals(cfg.rates, cfg.a_max, A)
        Qn = queueing.advance_known(Q, N_bar.sum(axis=0), A)
        if Qn.sum() != Q.sum() + A.sum() - N[:, :, 0].sum():
            viol[_core.V_CONSERVE] += 1
        Q = Qn
        state.n_prev = N
        _stamp_first(viol, t)
    rec.finish(int(Q.sum()), int((Q * svec).sum()))


def _shift_all(n_prev):
    out = np.zeros_like(n_prev)
    out[:, :, :-1] = n_prev[:, :, 1:]
    return out


def _py_run_offline(cfg, seed, cvec, is_binary, acc, viol):
    from .optimum import migration_interval_bound

    cluster, p = cfg.cluster, cfg.params
    M, S = cluster.M, cluster.S
    rec = _Recorder(acc, viol, cfg.T, cfg.warmup)
    state = schedulers.SchedulerState(cluster)
    k0 = 1.0 / (M * (cluster.N_max**2 + M * S**2 * cfg.a_max * cluster.N_max))
    A = np.zeros((M, S), dtype=np.int64)
    _core.rng_seed(seed)
    _core.draw_arrivals(cfg.rates, cfg.a_max, A)
    Q = A.copy()
    svec = np.arange(1, S + 1, dtype=np.int64)
    log_before = 0
    for t in range(1, cfg.T + 1):
        state.t = t
        if cfg.scheduler == "qbmw":
            log_before = len(state.migration_log)
            N_bar = schedulers.qbmw_decide(Q, state, cluster, p)
        else:
            N_bar = schedulers.refined_qbmw_decide(Q, state, cluster, p)
        try:
            N = queueing.realize_offline(Q, state.n_prev, N_bar)
        except InternalConsistencyError:
            viol[_core.V_PRE] += 1
            N = np.zeros_like(N_bar)
        if cfg.scheduler == "qbmw":
            for (_, _, backlog, interval) in state.migration_log[log_before:]:
                if interval + 1e-9 < migration_interval_bound(backlog, p.V, p.alpha, k0):
                    viol[_core.V_MIGINT] += 1
        scost, active = _actual_costs(N, cvec, p.c0, is_binary)
        mign = sum(costs.migration_cost(state.n_prev[l], N[l]) for l in range(cluster.L))
        mign_bar = sum(costs.migration_cost(state.n_prev[l], N_bar[l]) for l in range(cluster.L))
        if mign != mign_bar:
            viol[_core.V_C2ID] += 1
        floor = np.minimum(N_bar, _shift_all(state.n_prev))
        if np.any(N < floor):
            viol[_core.V_COND1] += int(np.sum(N < floor))
        if is_binary and scost != p.c0 * active:
            viol[_core.V_BINACT] += 1
        rec.record(t, int(Q.sum()), int((Q * svec).sum()), scost, active, mign, mign)
        _core.draw_arrivals(cfg.rates, cfg.a_max, A)
        try:
            Qn = queueing.advance_offline(Q, N, state.n_prev, A)
        except InternalConsistencyError:
            viol[_core.V_NEGQ] += 1
            Qn = Q + A
        mig_by_type = np.maximum(state.n_prev[:, :, 1:] - N[:, :, :-1], 0).sum(axis=(0, 2))
        lhs = (Qn * svec).sum(axis=1)
        rhs = (Q * svec).sum(axis=1) - N.sum(axis=(0, 2)) + (A * svec).sum(axis=1) + mig_by_type
        viol[_core.V_WLID] += int(np.sum(lhs != rhs))
        if Qn.sum() != Q.sum() + A.sum() - N[:, :, 0].sum():
            viol[_core.V_CONSERVE] += 1
        Q = Qn
        state.n_prev = N
        _stamp_first(viol, t)
    rec.finish(int(Q.sum()), int((Q * svec).sum()))


def _py_run_age(cfg, seed, cvec, is_binary, acc, viol):
    """Reference age-model loop; departure draws mirror the kernel's stream."""
    cluster, p = cfg.cluster, cfg.params
    L, M, S = cluster.L, cluster.M, cluster.S
    rec = _Recorder(acc, viol, cfg.T, cfg.warmup)
    state = schedulers.SchedulerState(cluster)
    A = np.zeros((M, S), dtype=np.int64)
    drawn = np.zeros(S, dtype=np.int64)
    _core.rng_seed(seed)
    _core.draw_arrivals(cfg.rates, cfg.a_max, A)
    Qt = np.zeros((M, S), dtype=np.int64)
    comp = np.zeros((M, S, S), dtype=np.int64)
    Qt[:, 0] = A.sum(axis=1)
    comp[:, 0, :] = A
    ages = np.arange(S, dtype=np.int64)
    sizes = np.arange(1, S + 1, dtype=np.int64)
    resid = sizes[None, None, :] - ages[None, :, None]  # residual work per comp cell
    for t in range(1, cfg.T + 1):
        state.t = t
        qlen_t = int(Qt.sum())
        wbl_t = int((comp * resid).sum())
        N_tld = schedulers.alg2_decide(Qt, state, cluster, p)
        try:
            N = queueing.realize_unknown(Qt, state.n_prev, state.z_prev, N_tld)
        except InternalConsistencyError:
            viol[_core.V_PRE] += 1
            N = np.zeros_like(N_tld)
        Z = np.zeros((L, M, S), dtype=np.int64)
        completions = 0
        for m in range(M):
            for a in range(S - 1, -1, -1):
                ktot = int(N[:, m, a].sum())
                if ktot == 0:
                    continue
                _core.draw_served_sizes(comp[m, a], ktot, drawn)
                d = int(drawn[a])
                completions += d
                rem_d, rem_k = d, ktot
                for l in range(L):
                    z = _core.draw_hypergeometric(rem_d, rem_k - rem_d, N[l, m, a])
                    Z[l, m, a] = z
                    rem_d -= int(z)
                    rem_k -= int(N[l, m, a])
                comp[m, a] -= drawn
                if a + 1 < S:
                    comp[m, a + 1, a + 1:] += drawn[a + 1:]
        scost, active = _actual_costs(N, cvec, p.c0, is_binary)
        migc = sum(costs.migration_cost_age(state.n_prev[l], state.z_prev[l], N_tld[l])
                   for l in range(L))
        migc_act = sum(costs.migration_cost_age(state.n_prev[l], state.z_prev[l], N[l])
                       for l in range(L))
        if migc != migc_act:
            viol[_core.V_C2ID] += 1
        if is_binary and scost != p.c0 * active:
            viol[_core.V_BINACT] += 1
        rec.record(t, qlen_t, wbl_t, scost, active, migc, migc)
        _core.draw_arrivals(cfg.rates, cfg.a_max, A)
        try:
            Qn = queueing.advance_unknown(Qt, N_tld.sum(axis=0), Z.sum(axis=0)[:, :-1], A)
        except InternalConsistencyError:
            viol[_core.V_NEGQ] += 1
            Qn = Qt.copy()
        if Qn.sum() != Qt.sum() + A.sum() - completions:
            viol[_core.V_CONSERVE] += 1
        comp[:, 0, :] += A
        bad = 0
        for m in range(M):
            for a in range(S):
                bad += int(np.count_nonzero(comp[m, a, :a]))
                if comp[m, a].sum() != Qn[m, a]:
                    bad += 1
        viol[_core.V_COMP] += bad
        Qt = Qn
        state.n_prev = N
        state.z_prev = Z
        _stamp_first(viol, t)
    rec.finish(int(Qt.sum()), int((comp * resid).sum()))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_AXES = ("rho", "V", "U", "alpha")


def config_with(cfg: RunConfig, axis: str, value, seed: int) -> RunConfig:
    """New config with one swept parameter replaced and a fresh seed."""
    if axis == "rho":
        if not cfg.rate_spec or cfg.rate_spec.get("kind") == "explicit":
            raise ValueError("rho sweep needs a parametric rate spec")
        spec = dict(cfg.rate_spec, rho=float(value))
        rates, rho = rates_from_spec(spec, cfg.cluster)
        return replace(cfg, rates=rates, rho=rho, rate_spec=spec, seed=seed)
    if axis in ("V", "U", "alpha"):
        params = replace(cfg.params, **{axis: float(value)})
        return replace(cfg, params=params, seed=seed)
    raise ValueError(f"unknown sweep axis {axis!r}")


def sweep_seed(base_seed: int, rep: int) -> int:
    """Replication seeds: rep 0 keeps the base seed, later reps get derived
    ones. Axis values share seeds (common random numbers)."""
    if rep == 0:
        return base_seed
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(rep,))
    return int(ss.generate_state(1, np.uint64)[0] % (2**63))


def sweep(base: RunConfig, axis: str, values, replications: int = 1,
          jobs: int = 1, fast: bool = True) -> list[RunMetrics]:
    """One run per (value, replication), deterministic seeds, stable order."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    values = list(values)
    if not values:
        raise ValueError("values must be nonempty")
    grid = [(vi, rep) for vi in range(len(values)) for rep in range(replications)]
    configs = [config_with(base, axis, values[vi], sweep_seed(base.seed, rep))
               for vi, rep in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_fast if fast else _run_slow, configs))
    else:
        results = [run(c, fast=fast) for c in configs]
    return results


def _run_fast(cfg):
    return run(cfg, fast=True)


def _run_slow(cfg):
    return run(cfg, fast=False)
