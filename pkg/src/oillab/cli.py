"""Command-line entry point: gen-tracks, train, eval, compare, ablate.

All commands are seeded and config-driven; artifacts embed the config hash,
seed, and tool version, and reruns with identical inputs reproduce identical
numerical content.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import ImitationParams, train_bc, train_dagger
from .config import ConfigError, RunConfig, build_config, load_track_dir
from .ddpg import DdpgConfig, DdpgPolicy, train_ddpg
from .env import Env
from .evaluation import (
    EvalConfig,
    EvalResult,
    compare,
    load_result,
    run_evaluation,
    save_result,
)
from .mlp import MlpPolicy, init_weights, load_checkpoint, make_adam, save_checkpoint
from .oil import OilParams, train_oil
from .rewards import RewardConfig
from .teachers import TeacherController, make_default_ensemble, select_teachers
from .track import TrackParams, generate_track, load_track, save_track

DEFAULT_N_STEPS = {"car": 300, "uav": 200}


def make_envs(track_files: list[Path], vehicle: str) -> list[Env]:
    return [Env(track=load_track(f), vehicle=vehicle) for f in track_files]


def _default_n_steps(cfg: RunConfig) -> int:
    return cfg.n_steps if cfg.n_steps else DEFAULT_N_STEPS[cfg.vehicle]


def _reward_config(vehicle: str) -> RewardConfig:
    return RewardConfig(mode="driving" if vehicle == "car" else "uav")


# ----------------------------------------------------------------------
# gen-tracks


def cmd_gen_tracks(args) -> int:
    out = Path(args.out)
    params = TrackParams(
        control_points=args.control_points,
        radius_range=(args.radius_min, args.radius_max),
        width=args.width,
        checkpoint_spacing=args.checkpoint_spacing,
        samples=args.samples,
    )
    cfg = RunConfig(seed=args.seed, out_dir=args.out)
    meta = cfg.artifact_meta()
    for group, count in (("train", args.count_train), ("test", args.count_test)):
        directory = out / group
        directory.mkdir(parents=True, exist_ok=True)
        offset = 0 if group == "train" else 50
        for i in range(count):
            track = generate_track(args.seed * 100 + offset + i, params)
            save_track(track, directory / f"track_{i:02d}.json", meta=meta)
    print(f"wrote {args.count_train} training and {args.count_test} test tracks under {out}")
    return 0


# ----------------------------------------------------------------------
# train


def _train_oil(cfg: RunConfig, envs: list[Env], out: Path):
    ensemble = select_teachers(make_default_ensemble(cfg.vehicle), cfg.teachers)
    params = OilParams(
        n_steps=_default_n_steps(cfg),
        max_episodes=cfg.max_episodes,
        act_steps=cfg.act_steps,
        rounds=cfg.rounds,
        epsilon_mode=cfg.epsilon_mode,
        mc_rollouts=cfg.mc_rollouts,
        step_budget=cfg.step_budget,
    )
    net = init_weights([envs[0].feature_dim, 64, 32, 16, envs[0].action_dim], cfg.seed)
    adam = make_adam(net)
    log_path = out / "train_log.jsonl"
    result = train_oil(
        envs, ensemble, net, adam, params, _reward_config(cfg.vehicle), cfg.seed, log_path
    )
    # prepend the meta record to the round log
    records = log_path.read_text()
    log_path.write_text(json.dumps({"meta": cfg.artifact_meta()}, sort_keys=True) + "\n" + records)
    return result.net, result.adam


def _train_imitation(cfg: RunConfig, envs: list[Env]):
    ensemble = select_teachers(make_default_ensemble(cfg.vehicle), cfg.teachers)
    if cfg.trainer == "bc":
        params = ImitationParams(
            n_steps=_default_n_steps(cfg),
            episodes_per_iter=cfg.episodes_per_iter * cfg.iterations,
            iterations=1,
            train_steps_per_iter=cfg.train_steps_per_iter * cfg.iterations,
        )
        net, adam, _ = train_bc(envs, ensemble, params, cfg.seed)
    else:
        params = ImitationParams(
            n_steps=_default_n_steps(cfg),
            episodes_per_iter=cfg.episodes_per_iter,
            iterations=cfg.iterations,
            train_steps_per_iter=cfg.train_steps_per_iter,
        )
        net, adam, _ = train_dagger(envs, ensemble, params, cfg.seed)
    return net, adam


def _train_ddpg(cfg: RunConfig, envs: list[Env]):
    ddpg_cfg = DdpgConfig(
        beta=0.0 if cfg.vehicle == "car" else 1.0,
        n_steps=_default_n_steps(cfg),
    )
    agent = train_ddpg(envs, ddpg_cfg, cfg.ddpg_steps, cfg.seed)
    return agent.actor, agent.actor_adam


def cmd_train(args) -> int:
    cfg = build_config(
        args.config,
        {
            "vehicle": args.vehicle,
            "trainer": args.trainer,
            "teachers": _parse_int_list(args.teachers),
            "train_tracks": args.tracks,
            "seed": args.seed,
            "out_dir": args.out,
            "rounds": args.rounds,
            "n_steps": args.n_steps,
            "epsilon_mode": args.epsilon,
            "step_budget": args.steps,
            "iterations": args.iterations,
        },
    )
    if not cfg.train_tracks:
        raise ConfigError("train requires --tracks (training track directory)")
    envs = make_envs(load_track_dir(cfg.train_tracks), cfg.vehicle)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if cfg.trainer == "oil":
        net, adam = _train_oil(cfg, envs, out)
    elif cfg.trainer in ("bc", "dagger"):
        net, adam = _train_imitation(cfg, envs)
    elif cfg.trainer == "ddpg":
        net, adam = _train_ddpg(cfg, envs)
    else:
        raise ConfigError(f"unknown trainer {cfg.trainer!r}")

    meta = cfg.artifact_meta()
    meta["trainer"] = cfg.trainer
    meta["vehicle"] = cfg.vehicle
    save_checkpoint(out / "checkpoint.json", net, adam, meta=meta)
    (out / "run_config.json").write_text(
        json.dumps({"config": cfg.resolved(), "meta": meta}, sort_keys=True) + "\n"
    )
    print(f"trained {cfg.trainer} policy; checkpoint at {out / 'checkpoint.json'}")
    return 0


# ----------------------------------------------------------------------
# eval


def _policy_from_checkpoint(path: str, envs: list[Env]):
    net, _ = load_checkpoint(path)
    doc = json.loads(Path(path).read_text())
    meta = doc.get("meta", {})
    if meta.get("trainer") == "ddpg":
        vehicle = meta.get("vehicle", "car")
        return DdpgPolicy(net, envs[0], DdpgConfig(beta=0.0 if vehicle == "car" else 1.0))
    return MlpPolicy(net)


def cmd_eval(args) -> int:
    if (args.checkpoint is None) == (args.teacher is None):
        raise ConfigError("eval needs exactly one of --checkpoint or --teacher")
    envs = make_envs(load_track_dir(args.tracks), args.vehicle)
    eval_cfg = EvalConfig.for_vehicle(args.vehicle)
    if args.laps:
        eval_cfg = EvalConfig(
            vehicle=args.vehicle, laps=args.laps, checkpoint_timeout=eval_cfg.checkpoint_timeout
        )
    if args.timeout:
        eval_cfg = EvalConfig(
            vehicle=args.vehicle, laps=eval_cfg.laps, checkpoint_timeout=args.timeout
        )

    if args.teacher is not None:
        ensemble = make_default_ensemble(args.vehicle)
        specs = select_teachers(ensemble, [args.teacher])
        policy = TeacherController(specs[0], envs[0])
        name = args.name or f"teacher{args.teacher}"
    else:
        policy = _policy_from_checkpoint(args.checkpoint, envs)
        name = args.name or Path(args.checkpoint).parent.name or "policy"

    names = [f.stem for f in load_track_dir(args.tracks)]
    result = run_evaluation(policy, envs, eval_cfg, names)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(vehicle=args.vehicle, seed=args.seed, test_tracks=args.tracks)
    save_result(result, out / f"eval_{name}.json", meta=cfg.artifact_meta())
    (out / f"eval_{name}.tsv").write_text(compare([(name, result)]))
    print(
        f"{name}: error {result.mean_abs_error:.3f} m, time {result.mean_completion_time:.1f} s,"
        f" pass {result.mean_pass_pct:.1f}%, resets {result.total_resets}"
    )
    return 0


# ----------------------------------------------------------------------
# compare


def cmd_compare(args) -> int:
    named: list[tuple[str, EvalResult]] = []
    for path in args.results:
        name = Path(path).stem.removeprefix("eval_")
        named.append((name, load_result(path)))
    table = compare(named)
    if args.out:
        Path(args.out).write_text(table)
    print(table, end="")
    return 0


# ----------------------------------------------------------------------
# ablate


def _ablation_cells(args) -> list[tuple[int, list[int]]]:
    all_teachers = [1, 2, 3, 4, 5]
    if args.n_list:
        n_values = _parse_int_list(args.n_list)
        cells = [(n, all_teachers) for n in n_values]
        if args.subsets:
            cells += [(args.subset_steps, s) for s in _parse_subsets(args.subsets)]
        return cells
    cells = [(n, all_teachers) for n in (60, 180, 300, 600)]
    subsets = _parse_subsets(args.subsets) if args.subsets else [[1, 3, 4], [3]]
    cells += [(args.subset_steps, s) for s in subsets]
    return cells


def cmd_ablate(args) -> int:
    train_files = load_track_dir(args.tracks)
    test_files = load_track_dir(args.test_tracks)
    out = Path(args.out)
    cell_dir = out / "cells"
    cell_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for n_steps, subset in _ablation_cells(args):
        tag = f"N{n_steps}_T{''.join(str(t) for t in subset)}"
        cell_path = cell_dir / f"{tag}.json"
        if cell_path.exists():
            rows.append(json.loads(cell_path.read_text()))
            continue
        cfg = RunConfig(
            vehicle="car",
            trainer="oil",
            teachers=subset,
            train_tracks=args.tracks,
            test_tracks=args.test_tracks,
            seed=args.seed,
            rounds=args.rounds,
            n_steps=n_steps,
            epsilon_mode="single" if len(subset) == 1 else "multi",
        )
        envs = make_envs(train_files, "car")
        with _tmpdir(out / f"work_{tag}") as work:
            net, _ = _train_oil(cfg, envs, work)
        test_envs = make_envs(test_files, "car")
        result = run_evaluation(
            MlpPolicy(net), test_envs, EvalConfig.for_vehicle("car"), [f.stem for f in test_files]
        )
        row = {
            "cell": tag,
            "n_steps": n_steps,
            "teachers": subset,
            "mean_error": result.mean_abs_error,
            "mean_time": result.mean_completion_time,
            "resets": result.total_resets,
            "meta": cfg.artifact_meta(),
        }
        cell_path.write_text(json.dumps(row, sort_keys=True) + "\n")
        rows.append(row)

    lines = ["cell\tn_steps\tteachers\tmean_error\tmean_time\tresets"]
    for row in rows:
        teachers = ",".join(str(t) for t in row["teachers"])
        lines.append(
            f"{row['cell']}\t{row['n_steps']}\t{teachers}"
            f"\t{row['mean_error']:.4f}\t{row['mean_time']:.2f}\t{row['resets']}"
        )
    table = "\n".join(lines) + "\n"
    (out / "ablation.tsv").write_text(table)
    print(table, end="")
    return 0


class _tmpdir:
    """Context manager for a working directory for one ablation cell."""

    def __init__(self, path: Path):
        self.path = path

    def __enter__(self) -> Path:
        self.path.mkdir(parents=True, exist_ok=True)
        return self.path

    def __exit__(self, *exc) -> None:
        pass


# ----------------------------------------------------------------------
# parser


def _parse_int_list(text: str | None) -> list[int] | None:
    if text is None:
        return None
    return [int(t) for t in text.split(",") if t.strip()]


def _parse_subsets(text: str) -> list[list[int]]:
    return [_parse_int_list(part) for part in text.split(";") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oillab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-tracks", help="generate training and test track files")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--count-train", type=int, default=6)
    p.add_argument("--count-test", type=int, default=4)
    p.add_argument("--control-points", type=int, default=10)
    p.add_argument("--radius-min", type=float, default=45.0)
    p.add_argument("--radius-max", type=float, default=65.0)
    p.add_argument("--width", type=float, default=8.0)
    p.add_argument("--checkpoint-spacing", type=float, default=50.0)
    p.add_argument("--samples", type=int, default=512)
    p.set_defaults(func=cmd_gen_tracks)

    p = sub.add_parser("train", help="train a policy")
    p.add_argument("--config")
    p.add_argument("--trainer", choices=["oil", "bc", "dagger", "ddpg"])
    p.add_argument("--vehicle", choices=["car", "uav"])
    p.add_argument("--tracks", help="training track directory")
    p.add_argument("--teachers", help="comma-separated 1-based subset, e.g. 1,3,4")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--rounds", type=int)
    p.add_argument("--n-steps", type=int, dest="n_steps")
    p.add_argument("--epsilon", choices=["single", "multi"])
    p.add_argument("--steps", type=int, help="simulator step budget")
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or a raw teacher")
    p.add_argument("--checkpoint")
    p.add_argument("--teacher", type=int)
    p.add_argument("--tracks", required=True, help="test track directory")
    p.add_argument("--vehicle", choices=["car", "uav"], default="car")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--laps", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--name")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="tabulate saved evaluation results")
    p.add_argument("results", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ablate", help="rollout-length and teacher-subset grid")
    p.add_argument("--tracks", required=True, help="training track directory")
    p.add_argument("--test-tracks", required=True)
    p.add_argument("--out", default="out/ablation")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--rounds", type=int, default=400)
    p.add_argument("--N-list", dest="n_list", help="comma-separated rollout lengths")
    p.add_argument("--subsets", help="semicolon-separated teacher subsets, e.g. '1,3,4;3'")
    p.add_argument("--subset-steps", type=int, default=300)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
