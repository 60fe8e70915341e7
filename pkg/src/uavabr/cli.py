"""Command-line entry point: synth, derive-thresholds, train, eval, compare.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import agent, baselines, report, sensors, traces
from .config import ConfigError, RunConfig, load_config
from .qoe import cdf_csv, summary_csv

log = logging.getLogger("uavabr")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="JSON or key=value config file")
    parser.add_argument("--seed", type=int, default=d)
    parser.add_argument("--out", default=d, help="output directory")
    parser.add_argument("--workers", type=int, default=d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavabr", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic trace corpus")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--duration", type=float, default=None)

    p = sub.add_parser("derive-thresholds", parents=[common], help="derive sensor quantization thresholds")
    p.add_argument("--corpus", default=None)
    p.add_argument("--sensor", required=True)
    p.add_argument("--window", type=int, default=None)

    p = sub.add_parser("train", parents=[common], help="train the actor-critic agent")
    p.add_argument("--corpus", default=None)
    p.add_argument("--episodes", type=int, default=None)

    p = sub.add_parser("eval", parents=[common], help="greedy evaluation of a checkpoint")
    p.add_argument("--corpus", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("test", "all"), default="test")

    p = sub.add_parser("compare", parents=[common], help="paired comparison of policies")
    p.add_argument("--corpus", default=None)
    p.add_argument(
        "--policies",
        default="fixed0,fixed3,buffer_based,rate_based,mpc",
        help="comma list of baseline names and NAME=CHECKPOINT entries",
    )
    p.add_argument("--split", choices=("test", "all"), default="test")
    p.add_argument("--no-random-offsets", action="store_true")
    p.add_argument("--resamples", type=int, default=1000)
    return parser


def _config(args) -> RunConfig:
    overrides = {"seed": args.seed, "out_dir": args.out, "train.workers": args.workers,
                 "corpus": getattr(args, "corpus", None)}
    if getattr(args, "episodes", None) is not None:
        overrides["train.episodes"] = args.episodes
    if getattr(args, "window", None) is not None:
        overrides["quantizer.window"] = args.window
    if getattr(args, "duration", None) is not None:
        overrides["synth.duration"] = args.duration
    return load_config(args.config, **overrides)


def _corpus(cfg: RunConfig) -> traces.TraceCorpus:
    if not cfg.corpus:
        raise ConfigError("corpus: no corpus path given (--corpus or config key 'corpus')")
    return traces.load_corpus(cfg.corpus, split_seed=cfg.seed, train_fraction=cfg.train_fraction)


def cmd_synth(cfg: RunConfig, count: int) -> Path:
    if count <= 0:
        raise ConfigError("count: must be positive")
    out = Path(cfg.out_dir)
    corpus = traces.synthesize_corpus(cfg.synth, count, seed=cfg.seed)
    for tr in corpus.traces:
        traces.write_trace(tr, out / f"{tr.id}.csv")
    manifest = {"count": count, "seed": cfg.seed, "params": asdict(cfg.synth)}
    traces.atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def cmd_derive_thresholds(cfg: RunConfig, sensor: str) -> dict:
    if sensor not in sensors.SENSOR_COLUMNS:
        raise ConfigError(f"sensor: unknown sensor {sensor!r}; valid names: {', '.join(sensors.SENSOR_COLUMNS)}")
    corpus = _corpus(cfg)
    pairs = sensors.sensor_pairs(corpus.traces, sensor, cfg.quantizer)
    result = {"sensor": sensor, "thresholds": sensors.derive_thresholds(pairs, cfg.quantizer)}
    traces.atomic_write_text(Path(cfg.out_dir) / f"thresholds_{sensor}.json", json.dumps(result) + "\n")
    return result


def cmd_train(cfg: RunConfig) -> agent.TrainResult:
    train_set, _ = traces.split(_corpus(cfg))
    out = Path(cfg.out_dir)
    train_cfg = replace(cfg.train, seed=cfg.seed)
    res = agent.train(train_set, cfg.video, cfg.network, train_cfg, cfg.qoe, cfg.quantizer,
                      checkpoint_path=out / "checkpoint.params")
    traces.atomic_write_text(out / "train_log.csv", res.log_csv())
    for episodes, score in res.validation:
        print(f"validation episodes={episodes} mean_qoe={score:.4f}")
    return res


def _eval_set(cfg: RunConfig, which: str):
    corpus = _corpus(cfg)
    return list(corpus.traces) if which == "all" else traces.split(corpus)[1]


def cmd_eval(cfg: RunConfig, checkpoint: str, which: str = "test") -> agent.EvalResult:
    ck = agent.Checkpoint.load(checkpoint)
    if ck.net_cfg.num_actions != len(cfg.video.ladder):
        raise ConfigError("checkpoint action count does not match video.ladder")
    test = _eval_set(cfg, which)
    res = agent.evaluate(test, ck, cfg.video, cfg.qoe, cfg.quantizer)
    out = Path(cfg.out_dir)
    traces.atomic_write_text(out / "summary.csv", summary_csv({"agent": res.summary}))
    for comp, values in res.summary.per_chunk.items():
        traces.atomic_write_text(out / "cdf" / f"agent_{comp}.csv", cdf_csv(values))
    for lg in res.logs:
        traces.atomic_write_text(out / "episodes" / f"{lg.trace_id}.jsonl", lg.to_jsonl())
    return res


def make_policies(spec_list: str, cfg: RunConfig) -> dict:
    policies = {}
    for item in (s.strip() for s in spec_list.split(",")):
        if not item:
            continue
        if "=" in item:
            name, path = item.split("=", 1)
            ck = agent.Checkpoint.load(path)
            if ck.net_cfg.num_actions != len(cfg.video.ladder):
                raise ConfigError(f"{name}: checkpoint action count does not match video.ladder")
            policies[name] = agent.agent_policy(ck, cfg.quantizer)
        else:
            try:
                policies[item] = baselines.make_baseline(item, cfg.video, cfg.baseline, cfg.qoe)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    if not policies:
        raise ConfigError("policies: empty policy list")
    return policies


def cmd_compare(cfg: RunConfig, policy_list: str, which: str = "test", randomize: bool = True,
                resamples: int = 1000) -> report.CompareReport:
    policies = make_policies(policy_list, cfg)
    rep = report.compare(_eval_set(cfg, which), policies, cfg.video, cfg.qoe, seed=cfg.seed,
                         randomize_offsets=randomize, n_resamples=resamples)
    rep.write(cfg.out_dir)
    return rep


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "synth":
            out = cmd_synth(cfg, args.count)
            print(f"wrote {args.count} traces to {out}")
        elif args.command == "derive-thresholds":
            print(json.dumps(cmd_derive_thresholds(cfg, args.sensor)))
        elif args.command == "train":
            res = cmd_train(cfg)
            last = res.rows[-1]
            print(f"trained {last['episodes_seen']} episodes; final mean reward {last['mean_reward']:.4f}")
        elif args.command == "eval":
            res = cmd_eval(cfg, args.checkpoint, args.split)
            print(summary_csv({"agent": res.summary}), end="")
        elif args.command == "compare":
            rep = cmd_compare(cfg, args.policies, args.split, not args.no_random_offsets, args.resamples)
            print(summary_csv({k: r.summary for k, r in rep.results.items()}), end="")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
