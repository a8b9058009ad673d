"""Command-line entry point: ``hybridsim <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from hybridsim import abm, calibration, metrics
from hybridsim.annotators import ContentType, TextAnnotator
from hybridsim.bridge import content_to_attitude
from hybridsim.config import RunConfig, load_config
from hybridsim.dataset import load_dataset, save_dataset, synthetic
from hybridsim.runner import RunAborted, load_core_trace, make_annotator, run_frozen_replicate, run_macro, run_micro

logger = logging.getLogger("hybridsim")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {k: v for k, v in (("seed", args.seed), ("rounds", args.rounds),
                                   ("workers", args.workers)) if v is not None}
    return replace(cfg, **overrides) if overrides else cfg


def _out(args, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.output_dir)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    try:
        result = run_macro(load_dataset(args.data), cfg, out)
    except RunAborted as exc:
        logger.error("%s (partial outputs in %s)", exc, out)
        return 3
    print(json.dumps(result.report, indent=2, sort_keys=True))
    return 0


def cmd_micro(args) -> int:
    cfg = _config(args)
    result = run_micro(load_dataset(args.data), cfg, out_dir=_out(args, cfg))
    print(json.dumps(result.report, indent=2, sort_keys=True))
    return 0


def cmd_replicate(args) -> int:
    cfg = _config(args)
    result = run_frozen_replicate(load_core_trace(args.recording), load_dataset(args.data), cfg,
                                  args.n, _out(args, cfg))
    print(json.dumps(result.mean, indent=2, sort_keys=True))
    return 0


def cmd_calibrate(args) -> int:
    grid = calibration.ParameterGrid.from_json(args.grid) if args.grid else calibration.default_grid(args.model)
    target = metrics.AttitudeTrace.read_csv(args.target)
    ds = load_dataset(args.data)
    initial = abm.Population.from_attitudes({u.id: u.initial_attitude for u in ds.users})
    result = calibration.calibrate(grid, target, initial, args.replications, args.seed, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "calibration.csv").write_text(result.to_csv(), encoding="utf-8")
    best = abm.params_to_dict(result.best)
    (out / "best_params.json").write_text(json.dumps(best, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({"best": best, "objective": result.objective}, indent=2))
    return 0


def cmd_evaluate(args) -> int:
    sim = metrics.AttitudeTrace.read_csv(args.sim)
    real = metrics.AttitudeTrace.read_csv(args.real) if args.real else None
    report = metrics.macro_report(sim, real)
    if args.out:
        metrics.write_report(report, args.out)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_annotate(args) -> int:
    cfg = load_config(args.config) if args.config else replace(RunConfig(), topic=args.topic)
    annotator: TextAnnotator = make_annotator(cfg)
    src = open(args.input, encoding="utf-8") if args.input != "-" else sys.stdin
    dst = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    with src, dst:
        for line in src:
            if not line.strip():
                continue
            rec = json.loads(line)
            text = str(rec.get("text", ""))
            label, intensity = annotator.stance_and_intensity(text)
            rec.update(stance=label.value, intensity=intensity,
                       attitude=content_to_attitude(label, intensity),
                       content_type=annotator.content_type(text).value if text else ContentType.OTHER.value)
            dst.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return 0


def cmd_make_data(args) -> int:
    save_dataset(synthetic(args.core, args.ordinary, args.seed), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def run_args(sp, data=True):
        sp.add_argument("--config", help="run config (JSON or YAML)")
        if data:
            sp.add_argument("--data", required=True, help="dataset directory")
        sp.add_argument("--out", help="output directory (default: config output_dir)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--rounds", type=int)
        sp.add_argument("--workers", type=int)

    sp = sub.add_parser("simulate", help="multi-round hybrid simulation")
    run_args(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("micro", help="single-round replication of core-user responses")
    run_args(sp)
    sp.set_defaults(func=cmd_micro)

    sp = sub.add_parser("replicate", help="rerun the ordinary phase against a recorded core trace")
    run_args(sp)
    sp.add_argument("--recording", required=True, help="core_trace.jsonl from a simulate run")
    sp.add_argument("-n", type=int, default=None, help="replications (default: config)")
    sp.set_defaults(func=cmd_replicate)

    sp = sub.add_parser("calibrate", help="grid-sweep ABM parameters against a trace")
    sp.add_argument("--data", required=True, help="dataset directory (initial attitudes)")
    sp.add_argument("--target", required=True, help="empirical trace CSV (round,mean,std)")
    sp.add_argument("--grid", help="grid JSON; default brackets the reference values")
    sp.add_argument("--model", default="bc", choices=sorted(abm.MODEL_CLASSES))
    sp.add_argument("--replications", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", default="calibration")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("evaluate", help="macro metrics over existing traces")
    sp.add_argument("--sim", required=True)
    sp.add_argument("--real")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("annotate", help="stance, intensity and content type for a JSONL of {text}")
    sp.add_argument("--input", required=True, help="JSONL file or - for stdin")
    sp.add_argument("--out")
    sp.add_argument("--config")
    sp.add_argument("--topic", default="#MeToo")
    sp.set_defaults(func=cmd_annotate)

    sp = sub.add_parser("make-data", help="write a synthetic dataset")
    sp.add_argument("--core", type=int, default=30)
    sp.add_argument("--ordinary", type=int, default=70)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_make_data)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
