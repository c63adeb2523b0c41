"""Acceptance gate: every criterion at its stated tolerance, one line each.

Run with `pytest tests/test_acceptance.py -v -s`. The expensive simulations
are shared across criteria through module-scoped fixtures; identity checks
run inside every simulation and are tallied at the end.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from cloudsched.cluster import ClusterModel
from cloudsched.costs import CostParams
from cloudsched.engine import RunConfig, rates_from_spec, run, sweep
from cloudsched.optimum import (solve_static_cost, capacity_boundary,
                                max_uniform_slack, theorem_bounds,
                                uniform_workload)
from cloudsched.schedulers import (SchedulerState, alg1_decide, alg2_decide,
                                   enumerate_configs, log_weights,
                                   refined_qbmw_decide, size_weights)

from oracle_utils import alg1_score_fn, random_instance, refined_score_fn, tie_fn_for

REFERENCE = ClusterModel.from_maximal([(0, 0, 2), (0, 1, 1), (1, 1, 0)], L=10, S=10)
TWO_TYPE = ClusterModel.from_maximal([(0, 1), (3, 0)], L=10, S=10)
LP_BINARY_08 = 8              # exact optimum at rho = 0.8, c0 = 1
LP_AFFINE_08 = Fraction(208, 3)
REPORTED_AFFINE_OPTIMUM = 56  # figure-caption value, not asserted (see ledger)


def report(criterion: int, ok: bool, detail: str):
    print(f"\nACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def _cfg(cluster, scheduler, params, rho, T, warmup, seed, kind="uniform"):
    spec = {"kind": kind, "rho": rho}
    rates, r = rates_from_spec(spec, cluster)
    return RunConfig(cluster=cluster, rates=rates, scheduler=scheduler,
                     params=params, T=T, warmup=warmup, seed=seed, rho=r,
                     rate_spec=spec)


# ---------------------------------------------------------------------------
# shared simulations
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def throughput_runs():
    """Three schedulers at rho 0.99 and 1.01, T = 5e5 (criterion 2)."""
    setups = {
        "alg1": CostParams(model="affine", c0=1.0, c=(2.0, 6.0, 3.0), U=10.0, V=5.0),
        "alg2": CostParams(model="binary", c0=1.0, U=2.0, V=3.0),
        "qbmw": CostParams(model="binary", c0=1.0, V=10.0, alpha=0.1),
    }
    T = 500_000
    out = {}
    for sched, p in setups.items():
        for rho in (0.99, 1.01):
            out[(sched, rho)] = run(_cfg(REFERENCE, sched, p, rho, T, T // 5, seed=5))
    return out


@pytest.fixture(scope="module")
def consolidation_runs():
    """Migration-averse schedulers, V sweep, five seeds (criterion 3)."""
    out = {}
    for sched in ("qbmw", "refined_qbmw"):
        p = CostParams(model="binary", c0=1.0, V=1.0, alpha=0.1)
        base = _cfg(TWO_TYPE, sched, p, 0.8, T=150_000, warmup=40_000, seed=11,
                    kind="uniform_normalized")
        out[sched] = sweep(base, "V", [1, 5, 10, 20, 40], replications=5, jobs=2)
    return out


@pytest.fixture(scope="module")
def affine_v_runs():
    """Size-aware scheduler, affine weights, V sweep (criterion 4)."""
    p = CostParams(model="affine", c0=1.0, c=(2.0, 6.0, 3.0), U=10.0, V=1.0)
    base = _cfg(REFERENCE, "alg1", p, 0.8, T=200_000, warmup=50_000, seed=11)
    return sweep(base, "V", [1, 5, 10, 20, 40], replications=3, jobs=2)


@pytest.fixture(scope="module")
def migration_u_runs():
    """U sweeps for the two online schedulers (criterion 5)."""
    out = {}
    p1 = CostParams(model="binary", c0=1.0, U=1.0, V=20.0)
    base1 = _cfg(REFERENCE, "alg1", p1, 0.8, T=100_000, warmup=25_000, seed=11)
    out["alg1"] = sweep(base1, "U", [1, 5, 20, 40, 200], replications=3, jobs=2)
    p2 = CostParams(model="binary", c0=1.0, U=1.0, V=6.0)
    base2 = _cfg(REFERENCE, "alg2", p2, 0.8, T=100_000, warmup=25_000, seed=11)
    out["alg2"] = sweep(base2, "U", [1, 5, 20, 40, 200], replications=3, jobs=2)
    return out


def _all_metrics(throughput_runs, consolidation_runs, affine_v_runs, migration_u_runs):
    rows = list(throughput_runs.values())
    for v in consolidation_runs.values():
        rows.extend(v)
    rows.extend(affine_v_runs)
    for v in migration_u_runs.values():
        rows.extend(v)
    return rows


def _means_by_value(rows, axis_attr):
    vals = sorted({getattr(r, axis_attr) for r in rows})
    return vals, {
        v: {f: float(np.mean([getattr(r, f) for r in rows if getattr(r, axis_attr) == v]))
            for f in ("mean_active_servers", "mean_server_cost", "mean_migration_cost",
                      "mean_weighted_backlog")}
        for v in vals
    }


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(20240809)
    t0 = time.time()
    n_instances = 1000
    for _ in range(n_instances):
        cluster, q, n_prev, p = random_instance(rng)
        S = cluster.S
        aggs = sorted(cluster.feasible_sets[0])
        configs = list(enumerate_configs(aggs, S))
        tie_fn = tie_fn_for(q)
        z_prev = np.zeros_like(n_prev)
        for m in range(n_prev.shape[0]):
            for s in range(S):
                if n_prev[m, s]:
                    z_prev[m, s] = rng.integers(0, n_prev[m, s] + 1)

        cover = np.zeros_like(n_prev)
        cover[:, :-1] = n_prev[:, 1:]
        age_cover = np.zeros_like(n_prev)
        age_cover[:, 1:] = n_prev[:, :-1] - z_prev[:, :-1]
        cases = [
            (alg1_decide, alg1_score_fn(size_weights(q), cover, p), None),
            (refined_qbmw_decide, refined_score_fn(size_weights(q), cover, p), None),
            (alg2_decide, alg1_score_fn(log_weights(q), age_cover, p), z_prev),
        ]
        for decider, score_fn, z in cases:
            state = SchedulerState(cluster)
            state.n_prev = n_prev[None].copy()
            if z is not None:
                state.z_prev = z[None].copy()
            state.t = 2
            got = decider(q, state, cluster, p)[0]
            best_score, best_tie = -np.inf, None
            for N in configs:
                sc = score_fn(N)
                if sc > best_score:
                    best_score, best_tie = sc, tie_fn(N)
                elif sc == best_score:
                    ti = tie_fn(N)
                    if ti > best_tie:
                        best_tie = ti
            assert score_fn(got) == best_score
            assert tie_fn(got) == best_tie
    elapsed = time.time() - t0
    report(1, elapsed < 60.0,
           f"3 solvers x {n_instances} random instances match brute force exactly "
           f"({elapsed:.1f}s)")


def test_criterion_2_throughput_optimality(throughput_runs):
    details = []
    ok = True
    for sched in ("alg1", "alg2", "qbmw"):
        stable = throughput_runs[(sched, 0.99)]
        diverging = throughput_runs[(sched, 1.01)]
        q3, q4 = stable.quarter_queue_means[2], stable.quarter_queue_means[3]
        drift = (q4 - q3) / max(q3, 1e-12)
        ratio = diverging.final_queue_len / max(stable.mean_queue_len, 1e-12)
        good = np.isfinite(stable.mean_queue_len) and drift < 0.10 and ratio > 10.0
        ok &= good
        details.append(f"{sched}: mean@0.99={stable.mean_queue_len:.0f} "
                       f"drift={drift:+.3f} final@1.01/mean@0.99={ratio:.0f}x")
    report(2, ok, "; ".join(details))


def test_criterion_3_server_cost_convergence(consolidation_runs):
    wl = [w * Fraction(9, 7) for w in uniform_workload(10, 0.8, 2, 10)]
    lp, _ = solve_static_cost(None, TWO_TYPE, CostParams(model="binary", c0=1.0),
                              workload=wl)
    assert lp == LP_BINARY_08
    ok = True
    details = [f"LP={lp}"]
    for sched, rows in consolidation_runs.items():
        vals, means = _means_by_value(rows, "V")
        curve = [means[v]["mean_active_servers"] for v in vals]
        monotone = all(b <= a * 1.02 for a, b in zip(curve, curve[1:]))
        within = abs(curve[-1] - float(lp)) <= 0.10 * float(lp)
        ok &= monotone and within
        details.append(f"{sched}: active={['%.3f' % c for c in curve]} "
                       f"monotone(2%)={monotone} final within 10% of {lp}={within}")
    report(3, ok, "; ".join(details))


def test_criterion_4_affine_cost_convergence(affine_v_runs):
    vals, means = _means_by_value(affine_v_runs, "V")
    curve = [means[v]["mean_server_cost"] for v in vals]
    monotone = all(b <= a * 1.02 for a, b in zip(curve, curve[1:]))
    target = float(LP_AFFINE_08)
    within = abs(curve[-1] - target) <= 0.10 * target
    report(4, monotone and within,
           f"cost={['%.2f' % c for c in curve]} vs exact LP {target:.3f} "
           f"(reported figure value {REPORTED_AFFINE_OPTIMUM} shown for reference); "
           f"monotone(2%)={monotone}, final within 10%={within}")


def test_criterion_5_migration_cost_decay(migration_u_runs):
    b4 = 9270.0  # stated envelope constant for the reference parameters
    ok = True
    details = []
    for sched, rows in migration_u_runs.items():
        vals, means = _means_by_value(rows, "U")
        curve = [means[u]["mean_migration_cost"] for u in vals]
        monotone = all(b <= a * 1.02 + 1e-3 for a, b in zip(curve, curve[1:]))
        small = curve[-1] < 0.05
        envelope = all(means[u]["mean_migration_cost"] <= b4 / u for u in vals)
        ok &= monotone and small and envelope
        details.append(f"{sched}: mig={['%.4f' % c for c in curve]} U={vals} "
                       f"monotone={monotone} final<0.05={small} B4/U ok={envelope}")
    report(5, ok, "; ".join(details))


def test_criterion_6_migration_interval_bound(throughput_runs, consolidation_runs):
    rows = [m for k, m in throughput_runs.items() if k[0] == "qbmw"]
    rows += consolidation_runs["qbmw"]
    bad = sum(m.violations["migration_interval"] for m in rows)
    report(6, bad == 0,
           f"{len(rows)} biased-max-weight runs, migration-interval violations={bad}")


def test_criterion_7_trace_identities(throughput_runs, consolidation_runs,
                                      affine_v_runs, migration_u_runs):
    rows = _all_metrics(throughput_runs, consolidation_runs, affine_v_runs,
                        migration_u_runs)
    slots = sum(m.T for m in rows)
    by_kind = {}
    for m in rows:
        for k, v in m.violations.items():
            by_kind[k] = by_kind.get(k, 0) + v
    bad = sum(by_kind.values())
    report(7, bad == 0 and slots >= 1_000_000,
           f"{slots} slots across {len(rows)} runs, violations={by_kind}")


def test_criterion_8_lp_sanity(affine_v_runs, migration_u_runs):
    rho_star = capacity_boundary(None, REFERENCE,
                                 workload=uniform_workload(10, 1, 3, 10))
    exact_one = rho_star == 1
    zero_val, _ = solve_static_cost(np.zeros((3, 10)), REFERENCE,
                                    CostParams(model="binary", c0=1.0))
    values = []
    for k in range(1, 11):
        wl = uniform_workload(10, Fraction(k, 10), 3, 10)
        v, _ = solve_static_cost(None, REFERENCE, CostParams(model="binary", c0=1.0),
                                 workload=wl)
        values.append(v)
    monotone = all(a <= b for a, b in zip(values, values[1:]))

    # evaluable performance bounds never violated by the measured averages
    wl08 = uniform_workload(10, 0.8, 3, 10)
    eps = max_uniform_slack(None, REFERENCE, workload=wl08) / 2
    wl_plus = [w + eps * Fraction(55) for w in wl08]
    bounds_ok = True
    for m in affine_v_runs:
        copt_plus, _ = solve_static_cost(
            None, REFERENCE,
            CostParams(model="affine", c0=1.0, c=(2.0, 6.0, 3.0)), workload=wl_plus)
        tb = theorem_bounds(L=10, M=3, S=10, a_max=10, n_max=REFERENCE.N_max,
                            U=m.U, V=m.V, epsilon=float(eps),
                            copt_plus_eps=float(copt_plus))
        bounds_ok &= m.mean_weighted_backlog <= tb.queue_bound
        bounds_ok &= m.mean_server_cost <= tb.server_cost_bound
        bounds_ok &= m.mean_migration_cost <= tb.migration_bound
    for m in migration_u_runs["alg1"]:
        copt_plus, _ = solve_static_cost(
            None, REFERENCE, CostParams(model="binary", c0=1.0), workload=wl_plus)
        tb = theorem_bounds(L=10, M=3, S=10, a_max=10, n_max=REFERENCE.N_max,
                            U=m.U, V=m.V, epsilon=float(eps),
                            copt_plus_eps=float(copt_plus))
        bounds_ok &= m.mean_weighted_backlog <= tb.queue_bound
        bounds_ok &= m.mean_server_cost <= tb.server_cost_bound
        bounds_ok &= m.mean_migration_cost <= tb.migration_bound

    ok = exact_one and zero_val == 0 and monotone and bounds_ok
    report(8, ok,
           f"rho*={rho_star} (exact 1: {exact_one}); zero-rate LP={zero_val}; "
           f"LP monotone along the ray={monotone}; performance bounds hold={bounds_ok}")
