"""Command-line entry points: network generation/import, routing, training, eval, serving."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path as FsPath

from .ddpg import load_model, save_model
from .errors import RoadRlError, ShapeMismatch
from .graph import (
    DEFAULT_OFFSET_CAP,
    DEFAULT_SPEED_LIMIT,
    load_network,
    save_network,
)
from .netgen import NetGenSpec, generate_with_info
from .osm import DRIVABLE_HIGHWAYS, import_osm
from .routing import PathMode, dijkstra
from .sim import RunConfig, World


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else format(x, ".10g")


def cmd_gen_net(args) -> int:
    spec = NetGenSpec(
        height_m=args.height,
        width_m=args.width,
        n_nodes=args.nodes,
        density_pct=args.density,
        seed=args.seed,
    )
    g, info = generate_with_info(spec, default_v=args.default_vmax, offset_cap=args.offset_cap)
    save_network(g, args.out)
    print(
        f"nodes={info['n_nodes']} directed_edges={info['n_edges_directed']} "
        f"realized_density_pct={info['realized_density_pct']:.2f}"
    )
    return 0


def cmd_import_osm(args) -> int:
    data = FsPath(args.infile).read_bytes()
    whitelist = DRIVABLE_HIGHWAYS
    if args.whitelist:
        whitelist = frozenset(s.strip() for s in args.whitelist.split(",") if s.strip())
    g, report = import_osm(
        data, default_v=args.default_vmax, offset_cap=args.offset_cap, whitelist=whitelist
    )
    save_network(g, args.out)
    for line in report.lines():
        print(line)
    print(f"nodes={g.n_nodes} directed_edges={g.n_edges}")
    return 0


def cmd_route(args) -> int:
    g = load_network(args.net)
    path = dijkstra(g, args.start, args.goal, PathMode(args.mode))
    if path is None:
        print("no path")
        return 0
    print(" ".join(str(n) for n in path.nodes))
    print(f"cost={_fmt(path.total_cost)}")
    return 0


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _write_manifest(out_dir: FsPath, cfg: RunConfig, net_path, steps: int) -> None:
    digest = hashlib.sha256(FsPath(net_path).read_bytes()).hexdigest()
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "network_file": str(net_path),
        "network_sha256": digest,
        "started": datetime.now(timezone.utc).isoformat(),
        "steps": steps,
        "out_dir": str(out_dir),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_train(args) -> int:
    g = load_network(args.net)
    cfg = _load_config(args)
    out_dir = FsPath(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    world = World(g, cfg)
    _write_manifest(out_dir, cfg, args.net, args.steps)
    checkpointed = False
    with open(out_dir / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "avg_reward", "epsilon", "critic_loss"])
        for _ in range(args.steps):
            world.tick()
            step = world.tick_no
            if step % cfg.log_interval == 0:
                writer.writerow(
                    [
                        step,
                        _fmt(world.windowed_reward()),
                        _fmt(world.exploration.epsilon),
                        _fmt(world.last_critic_loss),
                    ]
                )
            if cfg.checkpoint_interval > 0 and step % cfg.checkpoint_interval == 0:
                save_model(world.agent, out_dir, step)
                checkpointed = step == args.steps
    if args.steps > 0 and not checkpointed:
        save_model(world.agent, out_dir, world.tick_no)
    print(f"trained steps={world.tick_no} avg_reward={_fmt(world.windowed_reward())}")
    return 0


def cmd_eval(args) -> int:
    g = load_network(args.net)
    cfg = _load_config(args)
    agent = load_model(
        args.actor,
        args.critic,
        actor_lr=cfg.actor_lr,
        critic_lr=cfg.critic_lr,
        tau=cfg.target_rate,
        gamma=cfg.gamma,
        batch_size=cfg.batch_size,
        warmup=cfg.warmup_steps,
    )
    if agent.state_dim != 2:
        raise ShapeMismatch(f"actor expects state width {agent.state_dim}, world provides 2")
    world = World(g, cfg, agent=agent)
    world.set_flags(training=False, exploration=False)
    out = FsPath(args.out)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "action", "v", "v_limit", "reward"])
        veh = world.vehicles[0]
        for _ in range(args.steps):
            world.tick()
            writer.writerow(
                [
                    world.tick_no,
                    _fmt(veh.stats.actions[-1]),
                    _fmt(veh.stats.velocities[-1]),
                    _fmt(veh.frame.v_limit_at(veh.arc)),
                    _fmt(veh.stats.rewards[-1]),
                ]
            )
    mean_reward = world.windowed_reward()
    print(f"evaluated steps={world.tick_no} avg_reward={_fmt(mean_reward)}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import SimulationService, create_app

    g = load_network(args.net)
    cfg = _load_config(args)
    if cfg.tick_hz == 0.0:
        cfg.tick_hz = 10.0  # pace live sessions to real time by default
    world = World(g, cfg)
    if args.actor and args.critic:
        agent = load_model(args.actor, args.critic)
        if agent.state_dim != world.agent.state_dim:
            raise ShapeMismatch("loaded model does not fit the world's state width")
        world.agent = agent
    service = SimulationService(world, model_dir=args.models_dir)
    service.start()
    frontend = FsPath(args.ui_dir) if args.ui_dir else None
    app = create_app(service, frontend_dir=frontend)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        service.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roadrl")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-net", help="generate an artificial road network")
    p.add_argument("--height", type=float, required=True, help="map height in meters")
    p.add_argument("--width", type=float, required=True, help="map width in meters")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--density", type=float, required=True, help="edge density in (0, 100]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--default-vmax", type=float, default=DEFAULT_SPEED_LIMIT)
    p.add_argument("--offset-cap", type=float, default=DEFAULT_OFFSET_CAP)
    p.set_defaults(func=cmd_gen_net)

    p = sub.add_parser("import-osm", help="import an OSM-XML file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--default-vmax", type=float, default=DEFAULT_SPEED_LIMIT)
    p.add_argument("--offset-cap", type=float, default=DEFAULT_OFFSET_CAP)
    p.add_argument("--whitelist", help="comma-separated drivable highway types")
    p.set_defaults(func=cmd_import_osm)

    p = sub.add_parser("route", help="single-pair shortest/fastest path")
    p.add_argument("--net", required=True)
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--goal", type=int, required=True)
    p.add_argument("--mode", choices=[m.value for m in PathMode], default="shortest")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("train", help="headless training run")
    p.add_argument("--net", required=True)
    p.add_argument("--config")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="no-training/no-exploration evaluation")
    p.add_argument("--net", required=True)
    p.add_argument("--actor", required=True)
    p.add_argument("--critic", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", default="trace.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the control server")
    p.add_argument("--net", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--actor")
    p.add_argument("--critic")
    p.add_argument("--models-dir", default="models")
    p.add_argument("--ui-dir", help="directory with the built web client")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-net":
        try:
            NetGenSpec(args.height, args.width, args.nodes, args.density, args.seed)
        except ValueError as exc:
            parser.error(str(exc))
    try:
        return args.func(args)
    except RoadRlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
