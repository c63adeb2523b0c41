"""Command-line front end: single runs, sweeps, LP benchmarks, figure sweeps.

The experiment file is one JSON document:

    {
      "cluster":   {"L": 10, "S": 10, "maximal": [[0,0,2],[0,1,1],[1,1,0]]},
      "rates":     {"kind": "uniform", "rho": 0.8},
      "costs":     {"cost_model": "affine", "c0": 1, "c": [2,6,3],
                    "U": 10, "V": 5, "alpha": 0.1},
      "scheduler": "alg1",
      "T": 200000, "warmup": 40000, "seed": 42,
      "a_max": 10, "frame_len": 60,
      "sweep":     {"axis": "V", "values": [1,5,10,20,40], "replications": 5},
      "out":       "results.csv"
    }

Cluster alternatives: {"capacity": [...], "demands": [[...], ...]} for
resource-vector form, or {"servers": [{"maximal": ...}, ...]} per server.
Rate kinds: uniform, uniform_normalized (rho=1 rescaled onto the cluster's
exact stability boundary), explicit (verbatim "matrix").

Exit codes: 1 config error, 2 internal-consistency failure during a run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import engine
from .cluster import ClusterModel
from .costs import AFFINE, BINARY, CostParams
from .engine import RunConfig, RunMetrics, rates_from_spec
from .optimum import (InfeasibleRateError, capacity_boundary, solve_static_cost,
                      uniform_workload)
from .queueing import InternalConsistencyError

CSV_HEADER = ("scheduler,rho,V,U,alpha,seed,T,warmup,mean_queue_len,"
              "mean_weighted_backlog,mean_server_cost,mean_active_servers,"
              "mean_migrations,mean_migration_cost")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"missing required field '{where}{key}'")
    return doc[key]


def parse_cluster(doc: dict) -> ClusterModel:
    c = _require(doc, "cluster", "")
    S = int(_require(c, "S", "cluster."))
    if "servers" in c:
        sets = []
        for i, srv in enumerate(c["servers"]):
            if "maximal" in srv:
                from .cluster import feasible_from_maximal
                sets.append(feasible_from_maximal(srv["maximal"]))
            elif "capacity" in srv:
                from .cluster import feasible_from_resources
                sets.append(feasible_from_resources(srv["capacity"], srv["demands"]))
            else:
                raise ConfigError(f"cluster.servers[{i}] needs 'maximal' or 'capacity'")
        return ClusterModel.heterogeneous(sets, S=S)
    L = int(_require(c, "L", "cluster."))
    if "maximal" in c:
        return ClusterModel.from_maximal(c["maximal"], L=L, S=S)
    if "capacity" in c:
        return ClusterModel.from_resources(c["capacity"], _require(c, "demands", "cluster."), L=L, S=S)
    raise ConfigError("cluster needs 'maximal', 'capacity', or 'servers'")


def parse_costs(doc: dict, M: int) -> CostParams:
    c = _require(doc, "costs", "")
    model = c.get("cost_model", AFFINE)
    if model not in (AFFINE, BINARY):
        raise ConfigError(f"costs.cost_model must be 'affine' or 'binary', got {model!r}")
    cvals = tuple(float(x) for x in c.get("c", ()))
    if model == AFFINE and cvals and len(cvals) != M:
        raise ConfigError(f"costs.c must list {M} per-type costs")
    try:
        return CostParams(model=model, c0=float(c.get("c0", 1.0)), c=cvals,
                          U=float(c.get("U", 0.0)), V=float(c.get("V", 0.0)),
                          alpha=float(c.get("alpha", 0.1)))
    except ValueError as e:
        raise ConfigError(f"costs: {e}") from None


def resolve_seed(doc: dict, cli_seed) -> int:
    if cli_seed is not None:
        return int(cli_seed)
    if "seed" in doc:
        return int(doc["seed"])
    env = os.environ.get("CLOUDSCHED_SEED")
    if env is not None:
        return int(env)
    raise ConfigError("missing required field 'seed' (or --seed / CLOUDSCHED_SEED)")


def parse_config(doc: dict, cli_seed=None) -> RunConfig:
    cluster = parse_cluster(doc)
    rates_spec = _require(doc, "rates", "")
    try:
        rates, rho = rates_from_spec(rates_spec, cluster)
    except (KeyError, ValueError) as e:
        raise ConfigError(f"rates: {e}") from None
    params = parse_costs(doc, cluster.M)
    scheduler = _require(doc, "scheduler", "")
    if scheduler not in engine.SCHEDULERS:
        raise ConfigError(f"scheduler must be one of {engine.SCHEDULERS}, got {scheduler!r}")
    T = int(_require(doc, "T", ""))
    warmup = int(doc.get("warmup", T // 5))
    seed = resolve_seed(doc, cli_seed)
    try:
        return RunConfig(cluster=cluster, rates=rates, scheduler=scheduler,
                         params=params, T=T, warmup=warmup, seed=seed,
                         a_max=int(doc.get("a_max", 10)),
                         frame_len=int(doc.get("frame_len", 60)),
                         rho=rho, rate_spec=dict(rates_spec))
    except ValueError as e:
        raise ConfigError(str(e)) from None


_OVERRIDE_ALIASES = {
    "V": ("costs", "V"), "U": ("costs", "U"), "alpha": ("costs", "alpha"),
    "c0": ("costs", "c0"), "cost_model": ("costs", "cost_model"),
    "rho": ("rates", "rho"),
}


def apply_overrides(doc: dict, overrides) -> dict:
    """KEY=VALUE pairs; dotted paths or the common aliases (V, U, alpha, rho...)."""
    doc = json.loads(json.dumps(doc))  # deep copy
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        path = key.split(".") if "." in key else _OVERRIDE_ALIASES.get(key, (key,))
        node = doc
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return doc


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(round(x, 10))
    return str(x)


def csv_row(m: RunMetrics) -> str:
    return ",".join(_fmt(v) for v in (
        m.scheduler, m.rho, m.V, m.U, m.alpha, m.seed, m.T, m.warmup,
        m.mean_queue_len, m.mean_weighted_backlog, m.mean_server_cost,
        m.mean_active_servers, m.mean_migrations, m.mean_migration_cost))


def write_results(results, out_path, effective_doc):
    lines = [CSV_HEADER] + [csv_row(m) for m in results]
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
        sidecar = out_path + ".config.json"
    else:
        sys.stdout.write(text)
        sidecar = "cloudsched_effective_config.json"
    with open(sidecar, "w") as fh:
        json.dump(effective_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _check_violations(results) -> int:
    bad = sum(m.total_violations for m in results)
    if bad:
        for m in results:
            for k, v in m.violations.items():
                if v:
                    print(f"internal-consistency: {k}={v} first at slot "
                          f"{m.first_violation_slot} (scheduler={m.scheduler}, "
                          f"seed={m.seed})", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    doc = _load_doc(args)
    cfg = parse_config(doc, args.seed)
    doc["seed"] = cfg.seed
    if "sweep" in doc:
        return _run_sweep(doc, cfg, args)
    results = [engine.run(cfg)]
    write_results(results, args.out or doc.get("out"), doc)
    return _check_violations(results)


def cmd_sweep(args) -> int:
    doc = _load_doc(args)
    if "sweep" not in doc:
        raise ConfigError("missing required field 'sweep'")
    cfg = parse_config(doc, args.seed)
    doc["seed"] = cfg.seed
    return _run_sweep(doc, cfg, args)


def _run_sweep(doc, cfg, args) -> int:
    sw = doc["sweep"]
    axis = _require(sw, "axis", "sweep.")
    values = _require(sw, "values", "sweep.")
    if axis not in engine.SWEEP_AXES:
        raise ConfigError(f"sweep.axis must be one of {engine.SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ConfigError("sweep.values must be nonempty")
    reps = int(sw.get("replications", 1))
    results = engine.sweep(cfg, axis, values, replications=reps, jobs=args.jobs)
    write_results(results, args.out or doc.get("out"), doc)
    return _check_violations(results)


def cmd_opt(args) -> int:
    doc = _load_doc(args)
    cluster = parse_cluster(doc)
    params = parse_costs(doc, cluster.M)
    spec = _require(doc, "rates", "")
    rates, _ = rates_from_spec(spec, cluster)
    wl = _exact_workload_from_spec(spec, cluster)
    direction = [w / sum(wl) if sum(wl) else w for w in wl] if wl else None
    try:
        value, policy = solve_static_cost(rates, cluster, params, workload=wl)
    except InfeasibleRateError:
        print("infeasible: rates lie outside the capacity region", file=sys.stderr)
        rstar = capacity_boundary(rates, cluster,
                                  workload=_exact_workload_from_spec(
                                      dict(spec, rho=1.0) if "rho" in spec else spec, cluster))
        print(f"boundary rho* = {rstar} = {float(rstar):.9g}", file=sys.stderr)
        return 1
    print(f"optimal static server running cost = {value} = {float(value):.9g}")
    distinct = {mix: [] for mix in policy.mixtures}
    for l, mix in enumerate(policy.mixtures):
        distinct[mix].append(l)
    for mix, servers in distinct.items():
        where = "per-server" if len(servers) == cluster.L else f"servers {servers}"
        print(f"{where} mixture (config: probability):")
        for w, prob in mix:
            print(f"  {tuple(int(x) for x in w)}: {prob} = {float(prob):.9g}")
    base = dict(spec, rho=1.0) if "rho" in spec else spec
    rstar = capacity_boundary(rates, cluster,
                              workload=_exact_workload_from_spec(base, cluster))
    print(f"boundary rho* = {rstar} = {float(rstar):.9g}")
    return 0


def _exact_workload_from_spec(spec, cluster):
    """Exact per-type workload for parametric rate kinds (None for explicit)."""
    kind = spec.get("kind", "uniform")
    if kind == "explicit":
        return None
    wl = uniform_workload(cluster.L, spec["rho"], cluster.M, cluster.S)
    if kind == "uniform_normalized":
        d = uniform_workload(cluster.L, 1, cluster.M, cluster.S)
        rstar = capacity_boundary(None, cluster, workload=d)
        wl = [w * rstar for w in wl]
    return wl


# ---------------------------------------------------------------------------
# figure sweeps
# ---------------------------------------------------------------------------

THREE_TYPE = {"L": 10, "S": 10, "maximal": [[0, 0, 2], [0, 1, 1], [1, 1, 0]]}
TWO_TYPE = {"L": 10, "S": 10, "maximal": [[0, 1], [3, 0]]}
RHO_GRID = [0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.97, 0.99, 1.01]
V_GRID = [1, 5, 10, 20, 40]
U_GRID = [1, 5, 10, 20, 40]
ALPHA_GRID = [0.1, 0.2, 0.3, 0.5, 0.7, 0.9]

AFFINE_COSTS = {"cost_model": "affine", "c0": 1, "c": [2, 6, 3]}
BINARY_COSTS = {"cost_model": "binary", "c0": 1}


def _figure_specs():
    """Sweep recipes per figure id; panels of one figure share a CSV."""

    def base(cluster, costs, sched, rho, rate_kind="uniform", **extra):
        d = {"cluster": cluster, "rates": {"kind": rate_kind, "rho": rho},
             "costs": dict(costs), "scheduler": sched, "T": 200000}
        d["costs"].update(extra)
        return d

    figs = {}
    figs["fig3"] = [(base(THREE_TYPE, AFFINE_COSTS, "alg1", 0.8, V=5, U=10), "rho", RHO_GRID)]
    figs["fig4"] = [(base(THREE_TYPE, AFFINE_COSTS, "alg1", 0.8, U=10), "V", V_GRID)]
    figs["fig5"] = [(base(THREE_TYPE, AFFINE_COSTS, "alg1", 0.8, V=5), "U", U_GRID)]
    figs["fig6"] = [
        (base(THREE_TYPE, BINARY_COSTS, "alg1", 0.8, V=30, U=10), "rho", RHO_GRID),
        (base(THREE_TYPE, BINARY_COSTS, "alg2", 0.8, V=3, U=2), "rho", RHO_GRID),
        (base(THREE_TYPE, BINARY_COSTS, "preemptive", 0.8), "rho", RHO_GRID),
        (base(THREE_TYPE, BINARY_COSTS, "nonpreemptive", 0.8), "rho", RHO_GRID),
    ]
    figs["fig7"] = [
        (base(THREE_TYPE, BINARY_COSTS, "alg1", 0.8, U=10), "V", V_GRID),
        (base(THREE_TYPE, BINARY_COSTS, "alg2", 0.8, U=1), "V", V_GRID),
        (base(THREE_TYPE, BINARY_COSTS, "preemptive", 0.8), "V", [0]),
        (base(THREE_TYPE, BINARY_COSTS, "nonpreemptive", 0.8), "V", [0]),
    ]
    figs["fig8"] = figs["fig7"]  # queue-length-versus-cost view of the same sweep
    figs["fig9"] = [
        (base(TWO_TYPE, BINARY_COSTS, s, 0.8, rate_kind="uniform_normalized",
              V=10, alpha=a), "rho", RHO_GRID)
        for s in ("qbmw", "refined_qbmw") for a in (0.1, 0.2)
    ]
    figs["fig10"] = [
        (base(TWO_TYPE, BINARY_COSTS, s, 0.8, rate_kind="uniform_normalized",
              V=10, alpha=0.1), "V", V_GRID)
        for s in ("qbmw", "refined_qbmw")
    ]
    figs["fig11"] = figs["fig10"]  # queue-length / migration panels of the same sweep
    figs["fig12"] = [
        (base(TWO_TYPE, BINARY_COSTS, s, 0.8, rate_kind="uniform_normalized",
              V=10, alpha=0.1), "alpha", ALPHA_GRID)
        for s in ("qbmw", "refined_qbmw")
    ]
    return figs


def cmd_figures(args) -> int:
    figs = _figure_specs()
    if args.which not in figs:
        raise ConfigError(f"unknown figure id {args.which!r}; choose from {sorted(figs)}")
    os.makedirs(args.outdir, exist_ok=True)
    results = []
    effective = []
    for doc, axis, values in figs[args.which]:
        doc = dict(doc)
        if args.t:
            doc["T"] = args.t
        doc["warmup"] = doc["T"] // 5
        doc["seed"] = args.seed if args.seed is not None else 42
        cfg = parse_config(doc)
        results.extend(engine.sweep(cfg, axis, values,
                                    replications=args.reps, jobs=args.jobs))
        effective.append({"config": doc, "axis": axis, "values": values,
                          "replications": args.reps})
    out = os.path.join(args.outdir, f"{args.which}.csv")
    write_results(results, out, {"figure": args.which, "panels": effective})
    print(f"wrote {out}", file=sys.stderr)
    return _check_violations(results)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _load_doc(args) -> dict:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    return apply_overrides(doc, getattr(args, "override", None))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cloudsched",
                                 description="cloud-cluster scheduling simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment JSON file")
            p.add_argument("--override", action="append", metavar="KEY=VAL",
                           help="override a config field (repeatable)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1, help="parallel replications")

    p = sub.add_parser("run", help="single run (or the config's sweep)")
    common(p)
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="parameter sweep from the config's sweep block")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("opt", help="exact LP benchmark and capacity boundary")
    common(p)
    p.set_defaults(fn=cmd_opt)

    p = sub.add_parser("figures", help="run a documented figure sweep")
    p.add_argument("--which", required=True, help="fig3 .. fig12")
    p.add_argument("--outdir", default="figures")
    p.add_argument("--t", type=int, default=None, help="horizon override")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_figures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except InternalConsistencyError as e:
        print(f"internal-consistency failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
