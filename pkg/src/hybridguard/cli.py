"""``hybridguard`` command line.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure. Failures
print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from threadpoolctl import threadpool_limits

from hybridguard import __version__, pipeline
from hybridguard.errors import ConfigError, HybridGuardError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridguard", description="GAN-balanced two-phase intrusion detection")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config (JSON)")
    common.add_argument("--seed", type=int, help="global seed; overrides the config")
    common.add_argument("--out-dir", help="run directory; overrides the config")
    common.add_argument("--threads", type=int, help="cap BLAS/OpenMP threads")
    common.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("preprocess", parents=[common], help="clean, encode, split and scale")
    gan = sub.add_parser("gan-train", parents=[common], help="train the conditional GAN")
    gan.add_argument("--resume", action="store_true", help="continue from the last checkpoint")
    sample = sub.add_parser("gan-sample", parents=[common], help="draw synthetic rows for one class")
    sample.add_argument("--class", dest="class_name", required=True)
    sample.add_argument("--count", type=int, required=True)
    sample.add_argument("--output")
    sub.add_parser("augment", parents=[common], help="append synthetic rows to the training split")
    sub.add_parser("detect-train", parents=[common], help="fit one two-phase detector per combination")
    sub.add_parser("evaluate", parents=[common], help="score detectors on the original test split")
    sub.add_parser("report", parents=[common], help="collect results into report/")
    sub.add_parser("run", parents=[common], help="every stage in order")
    return parser


def _dispatch(args, config) -> dict:
    if args.command == "preprocess":
        return pipeline.cmd_preprocess(config)
    if args.command == "gan-train":
        return pipeline.cmd_gan_train(config, resume=args.resume)
    if args.command == "gan-sample":
        if args.count < 0:
            raise ConfigError("--count must be non-negative", count=args.count)
        return pipeline.cmd_gan_sample(config, args.class_name, args.count, args.output)
    if args.command == "augment":
        return pipeline.cmd_augment(config)
    if args.command == "detect-train":
        return pipeline.cmd_detect_train(config)
    if args.command == "evaluate":
        return pipeline.cmd_evaluate(config)
    if args.command == "report":
        return pipeline.cmd_report(config)
    return pipeline.run_all(config)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1", threads=args.threads)
        config = pipeline.load_config(args.config, seed=args.seed, out_dir=args.out_dir)
        with threadpool_limits(limits=args.threads):
            result = _dispatch(args, config)
    except HybridGuardError as exc:
        payload = {**exc.to_dict(), "exit_code": exc.exit_code, "command": args.command}
        print(json.dumps(payload, sort_keys=True, default=str), file=sys.stderr)
        return exc.exit_code
    print(json.dumps(result, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
