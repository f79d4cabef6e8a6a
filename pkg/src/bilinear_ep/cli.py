"""Command-line entry point for Monte Carlo experiments."""
import argparse
import sys
import time

from .harness import ALGORITHMS, ExperimentConfig, run_experiment


def build_parser():
    p = argparse.ArgumentParser(
        prog="bilinear-ep",
        description="Simulate cell-free uplink receivers and export SER/NMSE samples.")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--preset", choices=("desk", "paper"), default="desk",
                   help="base protocol before --config and flag overrides")
    p.add_argument("--algo", action="append", choices=ALGORITHMS,
                   help="algorithm to run; repeat for several (default: all)")
    p.add_argument("--T", type=int, help="data symbols per transmission")
    p.add_argument("--iters", type=int, help="EP iterations")
    p.add_argument("--eta", type=float, help="damping factor in [0, 1]")
    p.add_argument("--positions", type=int, help="number of UE position draws")
    p.add_argument("--fadings", type=int, help="transmissions per position")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true")
    return p


def config_from_args(args):
    base = ExperimentConfig.paper() if args.preset == "paper" else ExperimentConfig.desk()
    d = base.to_dict()
    d.pop("P")  # follows K unless the config file sets it
    if args.config:
        import json

        with open(args.config) as fh:
            d.update(json.load(fh))
    overrides = {"algos": args.algo, "T": args.T, "iterations": args.iters,
                 "eta": args.eta, "positions": args.positions, "fadings": args.fadings,
                 "seed": args.seed, "workers": args.workers, "out": args.out}
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(d)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2

    def progress(done, total):
        print(f"position {done}/{total}", file=sys.stderr)

    t0 = time.perf_counter()
    try:
        result = run_experiment(config, progress=None if args.quiet else progress)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        for algo, entry in result.summary["algorithms"].items():
            parts = [f"{m} median={v['median']:.4g}" for m, v in entry.items()
                     if isinstance(v, dict) and v.get("count")]
            print(f"{algo}: " + ", ".join(parts))
        print(f"wrote {config.out} in {time.perf_counter() - t0:.1f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
