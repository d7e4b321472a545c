"""``harvsense`` command line.

Exit codes: 0 success, 1 runtime error, 2 usage or config error. Errors
are printed to stderr as one JSON object ``{"error": ..., "message": ...}``;
results go to stdout as JSON.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .. import KERNEL_BACKEND, __version__
from ..errors import ConfigError, HarvsenseError
from ..traces import ingest_trace
from . import pipeline
from .config import CONFIG_ENV, dump_config, load_config

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, out_help: str | None = None):
    p.add_argument("--config", type=Path, default=None,
                   help=f"YAML config file (default: ${CONFIG_ENV}, else built-in defaults)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. scenario.geometry.distance_d=1.5 (repeatable)")
    if out_help:
        p.add_argument("--out", type=Path, default=None, help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="harvsense", description="RF-harvesting sensing toolkit: simulate, preprocess, "
                     "classify and count breaths from harvested-voltage traces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({KERNEL_BACKEND} kernels)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="render a synthetic dataset (traces + manifest)")
    _common(p, "run directory (default: output_dir from config)")

    p = sub.add_parser("preprocess", help="segment the traces of a run into 128-sample vectors")
    _common(p)
    p.add_argument("--run", type=Path, required=True, help="run directory holding manifest.jsonl")

    p = sub.add_parser("count-breaths", help="estimate respiration rate of traces")
    _common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", type=Path, nargs="+", help="trace CSV file(s)")
    src.add_argument("--run", type=Path, help="run directory; counts every manifest trace")

    p = sub.add_parser("train", help="train the CNN on a run's train split")
    _common(p)
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--model", type=Path, default=None, help="model output path (default: RUN/model.zip)")

    p = sub.add_parser("eval", help="evaluate a model on a run's test split")
    _common(p)
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--model", type=Path, default=None, help="model path (default: RUN/model.zip)")
    p.add_argument("--no-plot", action="store_true", help="skip the confusion-matrix figure")

    p = sub.add_parser("sweep", help="re-run the pipeline over values of one parameter")
    _common(p, "sweep directory (default: output_dir from config)")
    p.add_argument("--param", required=True, help=f"one of {sorted(pipeline.SWEEPABLE)}")
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 1.0,1.25,1.5")

    p = sub.add_parser("report", help="summarise a run directory into report.json / report.md")
    p.add_argument("--run", type=Path, required=True)

    p = sub.add_parser("run", help="simulate, preprocess, train/count, evaluate and report in one go")
    _common(p, "run directory (default: output_dir from config)")
    return parser


def _config(args):
    return load_config(args.config, args.overrides)


def _progress(verbose):
    if not verbose:
        return None
    log = logging.getLogger("harvsense.train")
    return lambda epoch, loss, acc: log.info("epoch %d loss %.4f val_acc %.4f", epoch, loss, acc)


def _values(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma-separated numbers, got {text!r}") from None
    if not values:
        raise UsageError("--values is empty")
    return values


def dispatch(args) -> dict:
    cmd = args.command
    if cmd == "report":
        return pipeline.build_report(args.run).to_json()
    cfg = _config(args)
    if cmd == "simulate":
        out = args.out or Path(cfg.output_dir)
        rows = pipeline.simulate_stage(cfg, out)
        return {"run": str(out), "traces": len(rows), "manifest": str(out / "manifest.jsonl"),
                "config_digest": cfg.digest()}
    if cmd == "preprocess":
        dump_config(cfg, args.run / "config.yaml")
        return pipeline.preprocess_stage(cfg, args.run)
    if cmd == "count-breaths":
        if args.run:
            dump_config(cfg, args.run / "config.yaml")
            return pipeline.respiration_stage(cfg, args.run)
        return {"results": [{"trace": str(p), **pipeline.count_trace(cfg, ingest_trace(p)).to_json()}
                            for p in args.trace]}
    if cmd == "train":
        model = pipeline.train_stage(cfg, args.run, args.model, progress=_progress(args.verbose))
        meta = model.training_meta
        return {"model": str(args.model or args.run / "model.zip"), "best_epoch": meta["best_epoch"],
                "best_val_accuracy": meta["best_val_accuracy"], "final_loss": meta["final_loss"]}
    if cmd == "eval":
        return pipeline.eval_stage(cfg, args.run, args.model, plot=not args.no_plot).to_json()
    if cmd == "sweep":
        report = pipeline.run_sweep(cfg, args.param, _values(args.values), args.out,
                                    progress=_progress(args.verbose))
        return report.to_json()
    if cmd == "run":
        return pipeline.run_pipeline(cfg, args.out, progress=_progress(args.verbose)).to_json()
    raise UsageError(f"unknown command {cmd!r}")


def _fail(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code, **extra}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        return _fail("usage", str(exc), EXIT_USAGE)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = dispatch(args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_USAGE)
    except HarvsenseError as exc:
        extra = {}
        for attr in ("path", "row"):
            if getattr(exc, attr, None) is not None:
                extra[attr] = str(getattr(exc, attr)) if attr == "path" else getattr(exc, attr)
        return _fail(type(exc).__name__, str(exc), EXIT_RUNTIME, **extra)
    except OSError as exc:
        return _fail("OSError", str(exc), EXIT_RUNTIME)
    print(json.dumps(result, sort_keys=True, indent=1, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
