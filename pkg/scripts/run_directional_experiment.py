#!/usr/bin/env python3
"""Run the directional attribution experiment and print both eval tables.

Generates a synthetic editing corpus, trains the level model on everything
but a held-out slice, then checks that attribution beats a random-level
baseline on two tasks: explaining agent actions and localizing injected
labeling errors.

    python3 scripts/run_directional_experiment.py
    python3 scripts/run_directional_experiment.py --epochs 3 --out runs/dir13
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from leveltrace.evalharness import report_table, write_report
from leveltrace.experiments import DirectionalConfig, run_directional


def parse_args(argv):
    base = DirectionalConfig()
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sessions", type=int, default=base.n_sessions)
    p.add_argument("--test-sessions", type=int, default=base.n_test)
    p.add_argument("--corpus-seed", type=int, default=base.corpus_seed)
    p.add_argument("--train-seed", type=int, default=base.train_seed)
    p.add_argument("--eval-seed", type=int, default=base.eval_seed)
    p.add_argument("--epochs", type=int, default=base.epochs)
    p.add_argument("--lr", type=float, default=base.lr)
    p.add_argument("--n-random", type=int, default=base.n_random)
    p.add_argument("--min-added", type=int, default=base.min_added)
    p.add_argument(
        "--out",
        type=Path,
        default=None,
        help="directory to write explain/labels reports as JSON and text",
    )
    return p.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    config = DirectionalConfig(
        n_sessions=args.sessions,
        n_test=args.test_sessions,
        corpus_seed=args.corpus_seed,
        train_seed=args.train_seed,
        eval_seed=args.eval_seed,
        epochs=args.epochs,
        lr=args.lr,
        n_random=args.n_random,
        min_added=args.min_added,
    )

    def progress(epoch, loss):
        print(f"epoch {epoch}: mean loss {loss:.6f}", flush=True)

    result = run_directional(config, progress)
    print()
    print(f"corpus: {config.n_sessions} sessions, "
          f"{len(result.corpus.injected)} injected label errors, "
          f"{config.n_test} held out")
    print(f"training: {result.train_seconds:.1f}s, "
          f"fingerprint {result.train.fingerprint[:16]}")
    print()
    print(report_table(result.explain_report))
    print()
    print(report_table(result.labels_report))
    print()
    print(f"total {result.total_seconds:.1f}s")

    if args.out is not None:
        write_report(result.explain_report, str(args.out), "explain")
        write_report(result.labels_report, str(args.out), "labels")
        print(f"reports written under {args.out}")

    explain_ok = result.explain_report.win_rate >= 0.55
    labels_ok = result.labels_report.win_rate > 0.5
    return 0 if (explain_ok and labels_ok) else 1


if __name__ == "__main__":
    sys.exit(main())
