"""Command-line entry point.

Subcommands: gen-users, meta-train, evaluate, simulate, serve.  Every
command takes an explicit --seed (with a fixed documented default) so runs
are reproducible byte for byte.  Exit codes: 0 success, 1 runtime failure,
2 usage or validation error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from . import meta, network, runtime, users, world
from .flocking import FlockParams

VALIDATION_USERS = 30  # in-population sample used for the post-training print


@dataclass
class RunConfig:
    """Merged view of scenario file, flock parameters and runtime options."""

    seed: int
    arena: world.Arena
    flock: FlockParams
    runtime_cfg: runtime.RuntimeConfig


def _fail(message: str, code: int = 2) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def load_run_config(args) -> RunConfig:
    """Resolve the scenario (file or built-in) into one episode config."""
    scenario_path = getattr(args, "scenario", None)
    if scenario_path:
        arena, raw = world.load_scenario(scenario_path)
        flock = FlockParams.from_dict(raw.get("flock_params"))
    else:
        arena = world.default_arena()
        flock = FlockParams()
    seed = getattr(args, "seed", 0)
    return RunConfig(
        seed=seed,
        arena=arena,
        flock=flock,
        runtime_cfg=runtime.RuntimeConfig(flock=flock).with_seed(seed),
    )


def cmd_gen_users(args) -> int:
    if args.n < 1:
        return _fail("--n must be >= 1")
    bands = users.load_bands(args.bands) if args.bands else users.default_bands()
    population = users.generate_population(args.n, bands, seed=args.seed)
    users.save_population(args.out, population)
    for ptype, count in users.type_counts(population).items():
        print(f"{ptype}: {count}")
    print(f"wrote {len(population)} users to {args.out}")
    return 0


def cmd_meta_train(args) -> int:
    users_path = Path(args.users)
    if not users_path.exists():
        return _fail(f"users file not found: {users_path}")
    population = users.load_population(users_path)
    if not population:
        return _fail("users file is empty")
    cfg = meta.MetaConfig(
        algo=args.algo,
        inner_lr=args.inner_lr,
        meta_lr=args.meta_lr,
        inner_steps=args.inner_steps,
        epochs=args.epochs,
        batch_size=args.batch_size,
        support_size=args.support_size,
        query_size=args.query_size,
        warmup_steps=args.warmup_steps,
        anchor_steps=args.anchor_steps,
        calibration_steps=args.calibration_steps,
        seed=args.seed,
    )
    params = network.init_params(cfg.seed)
    trained, log = meta.meta_train(params, population, cfg)
    network.save_checkpoint(args.out, trained, trained_with=cfg.algo, seed=cfg.seed)
    log_path = args.log or str(Path(args.out).with_suffix(".log.csv"))
    meta.write_training_log(log_path, log)
    val_users = population[:VALIDATION_USERS]
    val_loss = meta.few_shot_query_loss(trained, val_users, cfg, adapt_steps=2)
    print(f"checkpoint: {args.out}")
    print(f"training log: {log_path}")
    print(f"validation few-shot loss (2 adaptation steps, {len(val_users)} users): {val_loss:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    model_paths = [p for p in args.models.split(",") if p]
    for p in model_paths + [args.users]:
        if not Path(p).exists():
            return _fail(f"file not found: {p}")
    if args.seeds < 1:
        return _fail("--seeds must be >= 1")
    population = users.load_population(args.users)
    run = load_run_config(args)
    seeds = [args.seed + i for i in range(args.seeds)]

    all_rows = []
    durations = {}
    for path in model_paths:
        params, info = network.load_checkpoint(path)
        algo = info.get("trained_with", Path(path).stem)
        rows = runtime.evaluate_suite(
            params, population, run.arena, run.runtime_cfg, seeds, algo=algo
        )
        all_rows.extend(rows)
        durations[algo] = runtime.pooled_mean_duration(rows)
        summary = runtime.summarize_by_type(rows)
        print(f"{algo}: pooled mean phase duration {durations[algo]:.2f} steps")
        for ptype, stats in summary.items():
            print(
                f"  {ptype}: duration {stats['mean_duration']:.2f}±{stats['std_duration']:.2f}"
                f"  phases {stats['mean_phases']:.2f}±{stats['std_phases']:.2f}"
                f"  ({stats['episodes']} episodes)"
            )
    runtime.write_metrics_csv(args.out, all_rows)
    print(f"metrics: {args.out}")
    if "baseline" in durations and durations["baseline"] > 0:
        for algo, dur in durations.items():
            if algo != "baseline":
                print(f"duration ratio {algo}/baseline: {dur / durations['baseline']:.3f}")
    return 0


def cmd_simulate(args) -> int:
    for p in (args.model, args.users):
        if not Path(p).exists():
            return _fail(f"file not found: {p}")
    population = users.load_population(args.users)
    matches = [u for u in population if u.id == args.user_id]
    if not matches:
        return _fail(f"user id {args.user_id} not in {args.users}")
    user = matches[0]
    params, info = network.load_checkpoint(args.model)
    run = load_run_config(args)
    _, report = runtime.run_episode(params, user, run.arena, run.runtime_cfg)
    print(
        f"user {user.id} ({user.ptype.value}) under {info.get('trained_with', '?')}: "
        f"steps={report.total_steps} converged={report.converged} "
        f"phases={report.n_phases} mean_duration={report.mean_phase_duration:.1f} "
        f"final_loss={report.final_loss:.5f}"
    )
    if args.trace:
        runtime.write_trace_jsonl(args.trace, report)
        print(f"trace: {args.trace}")
    if args.path_csv:
        engine = runtime.EpisodeEngine(params, run.arena, run.runtime_cfg)
        engine.tick()
        with open(args.path_csv, "w") as fh:
            fh.write("x,y\n")
            for wp in engine.planned_waypoints():
                fh.write(f"{wp[0]},{wp[1]}\n")
        print(f"planned path: {args.path_csv}")
    return 0


def cmd_serve(args) -> int:
    if not Path(args.model).exists():
        return _fail(f"checkpoint not found: {args.model}")
    if args.scenario and not Path(args.scenario).exists():
        return _fail(f"scenario not found: {args.scenario}")
    if args.ui and not Path(args.ui).is_dir():
        return _fail(f"ui directory not found: {args.ui}")

    import socket

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError:
        print(f"error: port {args.port} unavailable on {args.host}", file=sys.stderr)
        return 1
    finally:
        probe.close()

    from .service import app_from_files

    app = app_from_files(
        args.model, scenario_path=args.scenario, speedup=args.speedup, ui_dir=args.ui
    )
    import uvicorn

    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except OSError:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefflock",
        description="Preference-adaptive flocking: population generation, "
        "meta-training, evaluation, headless episodes and live steering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-users", help="generate a simulated user population (JSONL)")
    p.add_argument("--n", type=int, required=True, help="population size (>= 1)")
    p.add_argument("--seed", type=int, default=7, help="RNG seed (default 7)")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--bands", help="bands JSON overriding the built-in type bands")
    p.set_defaults(func=cmd_gen_users)

    p = sub.add_parser("meta-train", help="train a preference-model checkpoint")
    p.add_argument("--algo", required=True, choices=["maml", "reptile", "baseline"])
    p.add_argument("--users", required=True, help="population JSONL (e.g. 2000 users)")
    p.add_argument("--out", required=True, help="checkpoint JSON path")
    p.add_argument("--log", help="training-log CSV path (default: <out>.log.csv)")
    p.add_argument("--epochs", type=int, default=None,
                   help="training epochs (default 4000 maml / 10000 reptile / 7200 baseline)")
    p.add_argument("--inner-lr", type=float, default=meta.MetaConfig.inner_lr)
    p.add_argument("--meta-lr", type=float, default=None,
                   help="meta step size (default 0.25 maml / 0.25 reptile)")
    p.add_argument("--inner-steps", type=int, default=meta.MetaConfig.inner_steps)
    p.add_argument("--batch-size", type=int, default=meta.MetaConfig.batch_size)
    p.add_argument("--support-size", type=int, default=meta.MetaConfig.support_size)
    p.add_argument("--query-size", type=int, default=meta.MetaConfig.query_size)
    p.add_argument("--warmup-steps", type=int, default=meta.MetaConfig.warmup_steps,
                   help="pooled SGD steps before the meta epochs")
    p.add_argument("--anchor-steps", type=int, default=None,
                   help="pooled SGD steps interleaved after each meta epoch "
                        "(default 24 maml / 0 reptile)")
    p.add_argument("--calibration-steps", type=int,
                   default=meta.MetaConfig.calibration_steps,
                   help="output-layer calibration steps after training")
    p.add_argument("--seed", type=int, default=7, help="RNG seed (default 7)")
    p.set_defaults(func=cmd_meta_train)

    p = sub.add_parser("evaluate", help="run adaptation episodes and write metrics CSV")
    p.add_argument("--models", required=True, help="comma-separated checkpoint paths")
    p.add_argument("--users", required=True, help="held-out users JSONL (e.g. 30 users)")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds per user")
    p.add_argument("--seed", type=int, default=0, help="base episode seed (default 0)")
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.add_argument("--scenario", help="scenario JSON (default: built-in 400 m site)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="run one headless adaptation episode")
    p.add_argument("--model", required=True)
    p.add_argument("--users", required=True)
    p.add_argument("--user-id", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario")
    p.add_argument("--trace", help="write per-step trace JSONL here")
    p.add_argument("--path-csv", help="write the planned waypoint path here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="serve live steering sessions (WebSocket + UI)")
    p.add_argument("--model", required=True)
    p.add_argument("--scenario")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--speedup", type=float, default=1.0,
                   help="simulation speed relative to real time")
    p.add_argument("--ui", help="directory with the built UI bundle to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
