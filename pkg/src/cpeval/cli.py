"""Command-line interface.

Subcommands: run | variability | metrics | synth.
Exit codes: 0 success, 1 usage/config error, 2 runtime error.
"""

import argparse
import sys

from .config import load_config
from .data import generate_synthetic, write_dataset_csv
from .errors import ConfigError, CpevalError, DegenerateRequest
from .protocol import (
    run_calibration_variability,
    run_repeated_split,
    run_seed_variability,
)
from .report import (
    atomic_write_text,
    build_report,
    build_variability_report,
    metrics_from_predictions,
    render_confusion_table,
    render_summary,
    to_json,
    write_metrics_csv,
    write_predictions_csv,
    write_trials_csv,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        raise ConfigError(message)


def _base_path(out):
    return out[:-5] if out.endswith(".json") else out


def cmd_run(args):
    cfg = load_config(args.config)
    out = args.out or cfg.output or "report.json"
    result = run_repeated_split(cfg, workers=args.workers)
    report = build_report(result)
    atomic_write_text(out, to_json(report))
    base = _base_path(out)
    write_predictions_csv(base + ".predictions.csv", result)
    write_metrics_csv(base + ".metrics.csv", report)
    if not args.quiet:
        print(render_summary(report))
        print(f"report written to {out}")
    return 0


def cmd_variability(args):
    cfg = load_config(args.config)
    if args.kind == "seed":
        result = run_seed_variability(cfg, args.count)
    elif args.kind == "calibration":
        result = run_calibration_variability(cfg, args.count)
    else:
        raise ConfigError(f"--kind must be seed or calibration, got {args.kind!r}")
    out = args.out or f"variability_{args.kind}.json"
    base = _base_path(out)
    report = build_variability_report(result, cfg.dispersion)
    atomic_write_text(out, to_json(report))
    write_trials_csv(base + ".trials.csv", result)
    if not args.quiet:
        print(f"{args.kind} variability of {result.model_label}: n={result.n_trials}")
        if result.kind == "seed":
            print(f"label flips across seeds: {result.flip_count}")
            print(f"max per-instance probability spread: {result.max_proba_spread}")
        print(f"report written to {out}")
    return 0


def cmd_metrics(args):
    per_eps = metrics_from_predictions(args.predictions)
    for eps_key in sorted(per_eps, key=float, reverse=True):
        node = per_eps[eps_key]
        print(f"epsilon {eps_key} (confidence {(1 - float(eps_key)) * 100:.0f}%)")
        print(render_confusion_table(node["confusion"]))
        for name, rec in node["scenarios"].items():
            if rec["ccr"] is None:
                body = f"undefined ({rec['undefined']})"
            else:
                body = (
                    f"sensitivity={rec['sensitivity']:.4f} "
                    f"specificity={rec['specificity']:.4f} ccr={rec['ccr']:.4f}"
                )
            print(f"  {name:<28} kept={rec['kept']:<5} {body}")
        rates = node["set_rates"]
        print(
            f"  rates: both={rates['both_rate']:.4f} empty={rates['empty_rate']:.4f} "
            f"singleton={rates['singleton_rate']:.4f} "
            f"class_error=(+{rates['error_rate_positive']:.4f}, "
            f"-{rates['error_rate_negative']:.4f})"
        )
        print()
    return 0


def cmd_synth(args):
    ds = generate_synthetic(args.n, args.dim, args.balance, args.separation, args.seed)
    write_dataset_csv(args.out, ds)
    if not args.quiet:
        print(f"wrote {ds.n} instances ({ds.n_positive} active) to {args.out}")
    return 0


def _add_common(p):
    p.add_argument("--out", help="output path")
    p.add_argument("--quiet", action="store_true", help="suppress the text summary")


def build_parser():
    parser = _Parser(prog="cpeval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[], help="run the repeated-split comparison")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("variability", help="run a variability study")
    p.add_argument("--kind", required=True, choices=["seed", "calibration"])
    p.add_argument("--config", required=True)
    p.add_argument("--count", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_variability)

    p = sub.add_parser("metrics", help="recompute metrics from a predictions dump")
    p.add_argument("--predictions", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="write a synthetic dataset CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--balance", type=float, default=0.5)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, DegenerateRequest) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CpevalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
