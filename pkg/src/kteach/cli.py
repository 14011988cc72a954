"""Command-line entry point: serve the engine, run scripted teaching sessions,
replay trajectory files, and evaluate result logs."""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .clock import VirtualClock
from .engine import EngineConfig, LiveEngine, load_chain, load_config, load_script, run_scripted
from .errors import KTError
from .metrics import (
    PairedSample,
    append_report,
    duration_overhead,
    read_report_log,
    session_report,
    wilcoxon_signed_rank,
)
from .playback import SimController, TrackingMode, load_trajectory, play
from .scene import count_stacked, load_scene_config, spawn_scene
from .streaming import (
    TOPIC_COMMANDS,
    TOPIC_PLAYBACK,
    TOPIC_SCENE,
    TOPIC_SPHERE,
    TOPIC_STATES,
    TOPIC_TELEMETRY,
)

logger = logging.getLogger(__name__)

_ALL_TOPICS = (TOPIC_COMMANDS, TOPIC_SPHERE, TOPIC_STATES,
               TOPIC_TELEMETRY, TOPIC_SCENE, TOPIC_PLAYBACK)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kteach",
        description="Desk-scale kinesthetic teaching engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the live engine with socket endpoints")
    p_serve.add_argument("--config", required=True, help="engine config file (JSON or key=value)")
    p_serve.add_argument("--urdf", help="override the config's robot description path")
    p_serve.add_argument("--frontend", help="directory with the built browser UI")
    p_serve.add_argument("--run-for", type=float, default=None,
                         help="serve for N seconds then exit (default: until interrupted)")

    p_teach = sub.add_parser("teach", help="drive a scripted teaching session")
    p_teach.add_argument("--config", required=True)
    p_teach.add_argument("--script", required=True, help="JSON Lines of sphere poses and commands")
    p_teach.add_argument("--out", help="trajectory file path (default: out_dir/<session>.jsonl)")
    p_teach.add_argument("--urdf", help="override the config's robot description path")
    p_teach.add_argument("--realtime", action="store_true",
                         help="honor wall-clock timing instead of the virtual clock")
    p_teach.add_argument("--seed", type=int, default=0)
    p_teach.add_argument("--noise-mm", type=float, default=0.0,
                         help="std-dev of Gaussian noise added to sphere positions (mm)")

    p_replay = sub.add_parser("replay", help="replay a trajectory file on the simulated robot")
    p_replay.add_argument("--file", required=True)
    p_replay.add_argument("--config", help="engine config naming the robot chain")
    p_replay.add_argument("--urdf")
    p_replay.add_argument("--base-link")
    p_replay.add_argument("--tip-link")
    p_replay.add_argument("--scene", help="scene config (default: the engine config's)")
    p_replay.add_argument("--mode", choices=[m.value for m in TrackingMode],
                          default=TrackingMode.INSTANT.value)
    p_replay.add_argument("--max-velocity", type=float, default=1.5)
    p_replay.add_argument("--fast", action="store_true",
                          help="virtual clock instead of recorded-rate wall timing")
    p_replay.add_argument("--salvage", action="store_true",
                          help="allow loading an unfinalized file")
    p_replay.add_argument("--report", help="append a session record to this results log")
    p_replay.add_argument("--subject")
    p_replay.add_argument("--condition")

    p_eval = sub.add_parser("eval", help="summarize a results log")
    p_eval.add_argument("--log", required=True)
    p_eval.add_argument("--mode", choices=["histogram", "paired"], default="paired")
    p_eval.add_argument("--alpha", type=float, default=0.05)
    return parser


def _override_urdf(config: EngineConfig, urdf: str | None) -> EngineConfig:
    if not urdf:
        return config
    from dataclasses import replace
    return replace(config, urdf=urdf)


def cmd_serve(args) -> int:
    from .server import UvicornThread, WireServer, build_ws_app, check_port_free
    from .streaming import BufferNode

    config = _override_urdf(load_config(args.config), args.urdf)
    if not Path(config.urdf).exists():
        print(f"error: robot description not found: {config.urdf}", file=sys.stderr)
        return 1
    try:
        check_port_free(config.bind_host, config.tcp_port)
        check_port_free(config.bind_host, config.ws_port)
    except OSError as exc:
        print(f"error: cannot bind {config.bind_host}:{config.tcp_port}/{config.ws_port}: {exc}",
              file=sys.stderr)
        return 1

    engine = LiveEngine(config)
    for topic in _ALL_TOPICS:
        engine.broker.ensure_topic(topic)
    buffer = BufferNode(engine.broker, TOPIC_STATES, config.out_dir)
    wire = WireServer(engine.broker, engine.clock, config.bind_host, config.tcp_port)
    frontend = Path(args.frontend) if args.frontend else None
    web = UvicornThread(build_ws_app(engine.broker, engine.clock, frontend),
                        config.bind_host, config.ws_port)

    buffer.start()
    wire.start()
    web.start()
    engine.start()
    print(f"serving robot '{engine.model_name}' (dof {engine.chain.dof}) from {config.urdf}")
    print(f"topics: {' '.join(engine.broker.topic_names())}")
    print(f"wire: tcp://{config.bind_host}:{config.tcp_port}  "
          f"ws: ws://{config.bind_host}:{config.ws_port}/ws")
    print(f"recordings: {config.out_dir}")
    try:
        if args.run_for is not None:
            time.sleep(args.run_for)
        else:
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        engine.stop()
        wire.stop()
        web.stop()
        buffer.stop()
        engine.broker.close()
    return 0


def cmd_teach(args) -> int:
    config = _override_urdf(load_config(args.config), args.urdf)
    script = load_script(args.script)
    out = Path(args.out) if args.out else Path(config.out_dir) / f"{config.session_id}.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    report = run_scripted(config, script, out, realtime=args.realtime,
                          noise_sigma_mm=args.noise_mm, seed=args.seed)
    print(f"session: {report.session_id}")
    print(f"trajectory: {report.out_path} ({report.states} states, "
          f"{'finalized' if report.finalized else 'UNFINALIZED'})")
    print(f"duration: {report.duration_s:.2f} s  ik_ticks: {report.ik_ticks}  "
          f"record_ticks: {report.record_ticks}")
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    report_path = out.with_suffix(".report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump({
            "session_id": report.session_id,
            "out": str(report.out_path),
            "states": report.states,
            "duration_s": report.duration_s,
            "finalized": report.finalized,
            "ik_ticks": report.ik_ticks,
            "record_ticks": report.record_ticks,
            "warnings": report.warnings,
        }, fh, indent=2)
    return 0


def _replay_chain(args):
    if args.config:
        config = load_config(args.config)
        return load_chain(_override_urdf(config, args.urdf)), config
    if args.urdf and args.base_link and args.tip_link:
        from .urdf import extract_chain, load_urdf
        return extract_chain(load_urdf(args.urdf), args.base_link, args.tip_link), None
    raise KTError("replay needs --config, or --urdf with --base-link and --tip-link")


def cmd_replay(args) -> int:
    chain, config = _replay_chain(args)
    traj, header = load_trajectory(args.file, chain, salvage=args.salvage)
    scene = None
    scene_path = args.scene or (config.scene_config if config else None)
    if scene_path:
        scene = spawn_scene(load_scene_config(scene_path))
    controller = SimController(chain, q0=config.initial_q if config else None,
                               mode=TrackingMode(args.mode),
                               max_velocity=args.max_velocity)
    clock = VirtualClock() if args.fast else None
    result = play(traj, controller, scene, clock=clock)
    print(f"session: {traj.session_id} ({len(traj.states)} states from {header.robot})")
    print(f"duration: {result.duration_s:.2f} s  faults: {result.faults}")
    if scene is not None:
        stacked = count_stacked(result.final_scene)
        print(f"stacked: {stacked}")
    if args.report:
        record = session_report(traj, result, result.final_scene,
                                subject=args.subject, condition=args.condition)
        append_report(args.report, record)
        print(f"report appended to {args.report}")
    return 0


def _histogram(records) -> dict[int, int]:
    counts: dict[int, int] = {}
    for rec in records:
        stacked = rec.get("cubes_stacked")
        if stacked is not None:
            counts[int(stacked)] = counts.get(int(stacked), 0) + 1
    return counts


def cmd_eval(args) -> int:
    records = read_report_log(args.log)
    if args.mode == "histogram":
        counts = _histogram(records)
        total = sum(counts.values()) or 1
        print("stacked  sessions  share")
        for stacked in sorted(counts):
            print(f"{stacked:7d}  {counts[stacked]:8d}  {counts[stacked] / total:5.0%}")
        return 0

    by_subject: dict[str, dict[str, dict]] = {}
    for rec in records:
        subject, condition = rec.get("subject"), rec.get("condition")
        if subject is None or condition is None:
            raise KTError("paired mode needs 'subject' and 'condition' on every record")
        by_subject.setdefault(subject, {})[condition] = rec
    unpaired = sorted(s for s, conds in by_subject.items()
                      if not {"C1", "C2"} <= set(conds))
    if unpaired:
        raise KTError(f"subjects missing one condition: {', '.join(unpaired)}")

    stack_pairs = [PairedSample(s, conds["C1"]["cubes_stacked"], conds["C2"]["cubes_stacked"])
                   for s, conds in sorted(by_subject.items())]
    time_pairs = [PairedSample(s, conds["C1"]["duration_s"], conds["C2"]["duration_s"])
                  for s, conds in sorted(by_subject.items())]

    print(f"subjects: {len(stack_pairs)}")
    print("stacked-count histograms:")
    for cond in ("C1", "C2"):
        counts = _histogram([by_subject[s][cond] for s in sorted(by_subject)])
        line = "  ".join(f"{k}:{v}" for k, v in sorted(counts.items()))
        print(f"  {cond}: {line}")
    overhead = duration_overhead(time_pairs)
    print(f"duration overhead: mean {overhead.mean_diff:+.1f} s "
          f"({overhead.mean_relative:+.0%} of C1)")
    wilcoxon = wilcoxon_signed_rank(stack_pairs, alpha=args.alpha)
    decision = "reject H0" if wilcoxon.reject else "fail to reject H0"
    print(f"wilcoxon (stacked counts, one-tailed alpha={args.alpha}): "
          f"W = {wilcoxon.w:g}, W_c = {wilcoxon.w_critical:g} (n = {wilcoxon.n}) -> {decision}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    args = _build_parser().parse_args(argv)
    handlers = {"serve": cmd_serve, "teach": cmd_teach,
                "replay": cmd_replay, "eval": cmd_eval}
    try:
        return handlers[args.command](args)
    except KTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
