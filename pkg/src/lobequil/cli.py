"""Batch command-line driver.

Subcommands: ``solve`` (value field + slice CSVs), ``simulate`` (path and
cost CSVs for a named strategy), ``policy`` (inaction-region CSV, strategy
traces, rollout statistics), ``verify`` (full verification suite, nonzero
exit on failure), ``sweep`` (stacked CSV over one parameter axis).  All
outputs are deterministic given the configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import RunConfig, load_config
from .errors import LobequilError
from .market import (Strategy, cost_J, cost_J0, cost_J1, path_rng_seed,
                     replay, simulate_path, strategy_none, strategy_twap)
from .policy import Policy, rollout, synthesize
from .solver import ValueField, solve_qvi
from . import verify as verify_mod

__all__ = ["main"]


def _ensure_out(cfg: RunConfig, out_override: str | None) -> str:
    out = out_override or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    return out


def _solve(cfg: RunConfig) -> ValueField:
    return solve_qvi(cfg.grid, cfg.utility, cfg.penalty, cfg.params,
                     n_sub=cfg.substeps)


def cmd_solve(cfg: RunConfig, out: str) -> int:
    field = _solve(cfg)
    stem = os.path.join(out, "value_field")
    field.save(stem)
    ix0 = int(round((cfg.params.x0 - cfg.grid.x_min) / cfg.grid.dx))
    field.slice_csv(os.path.join(out, "slice_t0_x0.csv"), 0, ix0)
    field.slice_csv(os.path.join(out, "slice_tmid_x0.csv"), cfg.grid.nt // 2, ix0)
    v0 = field.interp(0.0, cfg.params.x0, 0.0, cfg.params.q0)
    print(f"solved {cfg.grid.nt}x{cfg.grid.nx}x{cfg.grid.nk}x{cfg.grid.nq} grid; "
          f"V(0, x0, 0, q0) = {v0:.6f}; artifacts in {out}/")
    return 0


def _build_strategy(name: str, times: np.ndarray, cfg: RunConfig) -> Strategy:
    if name == "none":
        return strategy_none(times)
    if name == "twap":
        return strategy_twap(times, cfg.params.K)
    if name.startswith("jumps:"):
        jumps = []
        for part in name[len("jumps:"):].split(";"):
            t, d = part.split(",")
            jumps.append((float(t), float(d)))
        return Strategy(times=times, rates=np.zeros(len(times) - 1),
                        jumps=tuple(jumps))
    raise LobequilError(f"unknown strategy spec {name!r} "
                        "(use 'none', 'twap', or 'jumps:t,size;t,size')")


def cmd_simulate(cfg: RunConfig, out: str, strategy: str) -> int:
    p = cfg.params
    dt = cfg.sim_dt if cfg.sim_dt is not None else p.T / 100
    rows = []
    costs = []
    for i in range(cfg.n_paths):
        path = simulate_path(p, dt, path_rng_seed(cfg.seed, i))
        strat = _build_strategy(strategy, path.times, cfg)
        r = replay(path, strat, p.q0, cfg.utility, cap_to_book=True)
        dy = np.zeros(len(path.times))
        for j, s in zip(path.jump_idx, path.jump_sizes):
            dy[j] += s
        for j, t in enumerate(path.times):
            rows.append((i, t, path.x[j], r.q[j], r.pi[j], dy[j]))
        args = (cfg.utility, cfg.penalty, p.K, p.q0)
        costs.append({"path": i,
                      "J": cost_J(path, strat, *args, cap_to_book=True),
                      "J0": cost_J0(path, strat, *args, cap_to_book=True),
                      "J1": cost_J1(path, strat, *args, cap_to_book=True)})
    with open(os.path.join(out, "paths.csv"), "w") as f:
        f.write("path,t,x,q,pi,dY\n")
        for row in rows:
            f.write(f"{row[0]},{row[1]:.10g},{row[2]:.10g},{row[3]:.10g},"
                    f"{row[4]:.10g},{row[5]:.10g}\n")
    with open(os.path.join(out, "costs.json"), "w") as f:
        json.dump({"strategy": strategy, "seed": cfg.seed, "dt": dt,
                   "paths": costs}, f, indent=2)
    means = {k: float(np.mean([c[k] for c in costs])) for k in ("J", "J0", "J1")}
    print(f"simulated {cfg.n_paths} paths; mean costs {means}; artifacts in {out}/")
    return 0


def cmd_policy(cfg: RunConfig, out: str, field_stem: str | None) -> int:
    field = ValueField.load(field_stem) if field_stem else _solve(cfg)
    pol = Policy(field)
    g = field.grid
    ix0 = int(round((cfg.params.x0 - g.x_min) / g.dx))
    with open(os.path.join(out, "policy.csv"), "w") as f:
        f.write("t,x,q,interval_start,interval_end\n")
        for it, t in enumerate(g.times):
            for iq, q in enumerate(g.qs):
                for lo, hi in pol._node_intervals(it, ix0, iq):
                    f.write(f"{t:.10g},{g.xs[ix0]:.10g},{q:.10g},"
                            f"{lo:.10g},{hi:.10g}\n")
    dt = cfg.sim_dt if cfg.sim_dt is not None else cfg.params.T / 100
    with open(os.path.join(out, "strategy_traces.csv"), "w") as f:
        f.write("path,t,x,q,pi\n")
        for i in range(min(cfg.n_paths, 5)):
            path = simulate_path(cfg.params, dt, path_rng_seed(cfg.seed, i))
            strat = synthesize(field, path, policy=pol)
            r = replay(path, strat, cfg.params.q0, cfg.utility)
            for j, t in enumerate(path.times):
                f.write(f"{i},{t:.10g},{path.x[j]:.10g},{r.q[j]:.10g},"
                        f"{r.pi[j]:.10g}\n")
    stats = rollout(field, cfg.n_paths, cfg.seed, dt=dt)
    with open(os.path.join(out, "rollout_stats.json"), "w") as f:
        json.dump(stats, f, indent=2)
    print(f"policy V(0) = {stats['value_at_start']:.6f}; rolled-out J1 = "
          f"{stats['policy_J1']['mean']:.6f} +- {stats['policy_J1']['stderr']:.4f}; "
          f"artifacts in {out}/")
    return 0


def cmd_verify(cfg: RunConfig, out: str) -> int:
    field = _solve(cfg)
    checks = verify_mod.run_all(field, seed=cfg.seed,
                                n_paths=min(cfg.n_paths, 400))
    ok = verify_mod.report_to_json(checks, os.path.join(out, "verify_report.json"))
    for c in checks:
        print(f"[{c['status'].upper():4s}] {c['check']}: statistic={c['statistic']:.6g}"
              + (f" tolerance={c['tolerance']:.6g}" if c["tolerance"] is not None else ""))
    return 0 if ok else 1


def cmd_sweep(cfg: RunConfig, out: str, axis: str, values: list[float]) -> int:
    from dataclasses import replace as dreplace
    rows = []
    for val in values:
        if axis == "lambda":
            params = dreplace(cfg.params, lam=val)
            utility = cfg.utility
        elif axis == "gamma":
            from .utility import ExponentialUtility
            utility = ExponentialUtility(a=getattr(cfg.utility, "a", 1.0), gamma=val)
            params = cfg.params
        elif axis == "eta":
            params, utility = cfg.params, cfg.utility
        else:
            raise LobequilError(f"unsupported sweep axis {axis!r} "
                                "(use 'lambda', 'gamma', or 'eta')")
        from .market import PenaltyModel
        penalty = PenaltyModel(utility=utility,
                               eta=val if axis == "eta" else cfg.penalty.eta)
        field = solve_qvi(cfg.grid, utility, penalty, params, n_sub=cfg.substeps)
        v0 = field.interp(0.0, cfg.params.x0, 0.0, cfg.params.q0)
        rows.append((val, v0))
        print(f"{axis}={val}: V(0, x0, 0, q0) = {v0:.6f}")
    with open(os.path.join(out, f"sweep_{axis}.csv"), "w") as f:
        f.write(f"{axis},value_at_start\n")
        for val, v0 in rows:
            f.write(f"{val:.10g},{v0:.12g}\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="lobequil",
                                 description="Equilibrium order-book model: "
                                 "solver, simulator, policy, verification.")
    ap.add_argument("--config", help="TOML run configuration")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="root RNG seed (overrides mc.seed)")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", help="solve the QVI and export the value field")
    p_sim = sub.add_parser("simulate", help="simulate paths under a strategy")
    p_sim.add_argument("--strategy", default="twap",
                       help="'none', 'twap', or 'jumps:t,size;t,size'")
    p_pol = sub.add_parser("policy", help="extract and roll out the policy")
    p_pol.add_argument("--field", help="stem of a saved value field (.npy/.json)")
    sub.add_parser("verify", help="run the verification suite")
    p_sw = sub.add_parser("sweep", help="solve across one parameter axis")
    p_sw.add_argument("--axis", default="lambda")
    p_sw.add_argument("--values", default="0,1,2",
                      help="comma-separated axis values")
    args = ap.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out = _ensure_out(cfg, args.out)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.strategy)
        if args.command == "policy":
            return cmd_policy(cfg, out, args.field)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.axis,
                             [float(v) for v in args.values.split(",")])
    except LobequilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
