"""Command-line entry point: ``lrr {train,eval,diagnose-autocorr,verify}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import diagnostics, verify
from .config import ConfigError, parse_config
from .envs import ENVIRONMENTS
from .errors import DegenerateInputError
from .experiment import evaluate, loads_agent, run_experiment


def _load_config(path):
    try:
        return parse_config(Path(path).read_text())
    except ConfigError as exc:
        raise SystemExit(f"{path}: {exc}") from None


def cmd_train(args):
    cfg = _load_config(args.config)
    out = args.output_dir or cfg.output_dir

    def progress(seed, step, mean):
        if not args.quiet:
            print(f"seed={seed} step={step} mean_return={mean:.3f}", flush=True)

    records = run_experiment(cfg, out, progress)
    for rec in records:
        print(f"seed={rec.seed} final_return={rec.final_return:.3f} "
              f"wall_clock={rec.wall_clock:.1f}s dir={rec.output_dir}")
    return 0


def cmd_eval(args):
    agent, env_name, horizon = loads_agent(Path(args.checkpoint).read_text())
    mean, std = evaluate(agent, env_name, args.horizon or horizon, args.episodes)
    print("environment,mean_return,std_return,episodes")
    print(f"{env_name},{mean!r},{std!r},{args.episodes}")
    return 0


def cmd_diagnose(args):
    cfg = _load_config(args.config)
    names = [cfg.environment] if args.only_config_env else sorted(ENVIRONMENTS)
    reports = []
    for name in names:
        try:
            reports.append(diagnostics.report(name, episodes=cfg.autocorr_episodes,
                                              horizon=cfg.horizon, seed=cfg.seeds[0]))
        except DegenerateInputError as exc:
            print(f"skipping {name}: {exc} (try more episodes or a longer horizon)",
                  file=sys.stderr)
    if args.output:
        diagnostics.write_reports(args.output, reports)
    else:
        diagnostics.write_reports(sys.stdout, reports)
    return 0 if reports else 1


def cmd_verify(args):
    results = verify.verify_propositions()
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lrr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run every seed of an experiment config")
    p.add_argument("config", help="YAML config file")
    p.add_argument("--output-dir", help="override the config's output_dir")
    p.add_argument("--quiet", action="store_true", help="only print the final summary")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved policy checkpoint")
    p.add_argument("checkpoint", help="policy.ckpt written by train")
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose-autocorr",
                       help="lag-1 reward autocorrelation under a random policy")
    p.add_argument("config", help="YAML config (horizon, autocorr_episodes, seeds)")
    p.add_argument("--output", help="write the CSV here instead of stdout")
    p.add_argument("--only-config-env", action="store_true",
                   help="report only the config's environment")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("verify", help="run the property checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
