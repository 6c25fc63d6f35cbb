"""Command line entry points.

Verbs:
    gen-data      write a synthetic training corpus (and optional test split)
    train         train a model and responsibility arrays into a run directory
    eval-explain  score responsible levels against agent actions
    eval-labels   score responsible levels against contradiction windows
    serve         expose suggest/explain/session endpoints over HTTP

Exit codes: 0 ok, 2 configuration problem, 3 data problem, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

from . import evalharness, sessionlog, synthetic, training
from .errors import (
    BadParams,
    ConfigError,
    LevelTraceError,
    NumericFailure,
)
from .service import CoCreateService, make_server

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leveltrace",
        description="train, evaluate and serve a tile-level design agent "
        "with training-data attribution",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic session corpus")
    p.add_argument("--config", help="JSON file with generator parameters")
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--out", required=True, help="training corpus path (.jsonl)")
    p.add_argument("--test", help="also write this many-sessions test split here")

    p = sub.add_parser("train", help="train model + responsibility arrays")
    p.add_argument("--config", help="JSON file with training parameters")
    p.add_argument("--sessions", required=True, help="training corpus (.jsonl)")
    p.add_argument("--out", required=True, help="run directory for artifacts")

    for kind in ("eval-explain", "eval-labels"):
        p = sub.add_parser(kind, help=f"run the {kind.split('-')[1]} evaluation")
        p.add_argument("--out", required=True, help="run directory from train")
        p.add_argument("--test", required=True, help="test corpus (.jsonl)")
        p.add_argument("--sessions", help="override train corpus (defaults to run copy)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="serve suggest/explain/session endpoints")
    p.add_argument("--out", required=True, help="run directory from train")
    p.add_argument("--sessions", help="live session store (defaults into run dir)")
    p.add_argument("--bind", default="127.0.0.1:8642", help="host:port")

    return parser


def _load_json_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return raw


def _cmd_gen_data(args) -> int:
    raw = _load_json_config(args.config)
    test_sessions = raw.pop("test_sessions", 10 if args.test else 0)
    if args.test and test_sessions < 1:
        raise ConfigError("test_sessions must be >= 1 when --test is given")
    known = set(synthetic.SyntheticParams.__dataclass_fields__)
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown generator keys: {sorted(extra)}")
    if "motif_palette" in raw:
        raw["motif_palette"] = tuple(raw["motif_palette"])
    try:
        params = synthetic.SyntheticParams(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if args.test and test_sessions >= params.n_sessions:
        raise ConfigError("test_sessions must leave at least one training session")

    corpus = synthetic.gen_synthetic(args.seed, params)
    split = params.n_sessions - test_sessions
    train = corpus.sessions[:split]
    sessionlog.save_sessions(train, args.out)
    print(f"wrote {len(train)} training sessions to {args.out}")
    if args.test:
        test = corpus.sessions[split:]
        sessionlog.save_sessions(test, args.test)
        print(f"wrote {len(test)} test sessions to {args.test}")
    labels_path = args.out + ".labels.json"
    with open(labels_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "seed": corpus.seed,
                "params": dataclasses.asdict(params),
                "injected": [dataclasses.asdict(e) for e in corpus.injected],
            },
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    print(f"wrote {len(corpus.injected)} injected error labels to {labels_path}")
    return 0


def _cmd_train(args) -> int:
    raw = _load_json_config(args.config)
    config = training.TrainConfig.from_dict(raw)
    sessions = sessionlog.load_sessions(args.sessions)
    t0 = time.monotonic()

    def progress(epoch: int, loss: float) -> None:
        dt = time.monotonic() - t0
        print(f"epoch {epoch}: mean loss {loss:.6f} ({dt:.1f}s)", file=sys.stderr)

    result = training.train_model(sessions, config, progress)
    training.save_artifacts(result, args.out, sessions)
    print(f"fingerprint {result.fingerprint}")
    print(f"artifacts written to {args.out}")
    return 0


def _cmd_eval(args, kind: str) -> int:
    params, mrin, train_sessions = training.load_artifacts(args.out)
    if args.sessions:
        train_sessions = sessionlog.load_sessions(args.sessions)
    test_sessions = sessionlog.load_sessions(args.test)
    if kind == "explain":
        report = evalharness.explainability_eval(
            params, mrin, train_sessions, test_sessions, seed=args.seed
        )
        prefix = "explain_report"
    else:
        report = evalharness.labeling_error_eval(
            params, mrin, train_sessions, test_sessions, seed=args.seed
        )
        prefix = "labels_report"
    evalharness.write_report(report, args.out, prefix)
    sys.stdout.write(evalharness.report_table(report))
    return 0


def _cmd_serve(args) -> int:
    params, mrin, train_sessions = training.load_artifacts(args.out)
    live_path = args.sessions or os.path.join(args.out, "live_sessions.jsonl")
    service = CoCreateService(params, mrin, train_sessions, live_path)
    host, sep, port = args.bind.rpartition(":")
    if not sep:
        raise ConfigError(f"--bind must be host:port, got {args.bind!r}")
    try:
        port_no = int(port)
    except ValueError as exc:
        raise ConfigError(f"bad port {port!r}") from exc
    server = make_server(service, host, port_no)
    print(f"serving on http://{host}:{server.server_address[1]}/ (ctrl-c stops)")
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-data":
            return _cmd_gen_data(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval-explain":
            return _cmd_eval(args, "explain")
        if args.command == "eval-labels":
            return _cmd_eval(args, "labels")
        if args.command == "serve":
            return _cmd_serve(args)
        parser.error(f"unknown command {args.command!r}")
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, BadParams) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LevelTraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0
