"""``motionkeys`` command-line entry point.

Subcommands:

serve              run the acquisition server
synth              write a synthetic session (or a two-family pair)
preprocess         write a cleaned copy of a session
segment            list keystroke windows as JSON lines
features           write labelled feature rows as CSV
train              train a model on labelled sessions and save it as XML
evaluate           k-fold cross-validation, or transfer with --eval-session
infer              classify detected keystrokes of a session with a saved model
benchmark-fusion   the eight fusion strategies on a four-label session
benchmark-models   the six hidden-layer / feature combinations

Every subcommand exits with status 1 when a stage fails and 2 on bad usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import ConfigError, RunConfig, add_config_arguments, config_from_args
from .core import SessionFormatError, read_session, write_session
from .evaluation import DEFAULT_EPOCHS
from .experiments import (
    MODEL_FEATURES,
    SCHEMES,
    benchmark_fusion,
    benchmark_models,
    build_features,
    codebook_for,
    infer,
    run_experiment,
    segment_session,
    train_final_model,
)
from .features import FEATURE_KINDS, STAT_NAMES
from .nn.persistence import ModelFormatError, load_model, save_model
from .preprocess import preprocess_pipeline
from .server import AcquisitionServer, ReplayError
from .synthgen import generate_pair, generate_session, toy_config

log = logging.getLogger("motionkeys")

MODEL_CHOICES = tuple(MODEL_FEATURES)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _sessions(paths: Sequence[str]):
    return [read_session(p) for p in paths]


# -- subcommands --------------------------------------------------------------


def cmd_serve(args, config: RunConfig) -> int:
    server = AcquisitionServer(args.output_dir, args.host, args.tcp_port, args.http_port)
    server.start()
    print(json.dumps({"tcp": list(server.tcp_address), "http": list(server.http_address)}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_synth(args, config: RunConfig) -> int:
    synth = toy_config(config.seed) if args.toy else config.synth_config()
    out = Path(args.output)
    if args.pair is not None:
        a, b = generate_pair(synth, args.pair)
        for s in (a, b):
            write_session(s, out / s.session_id)
            print(out / s.session_id)
    else:
        s = generate_session(synth, args.session_id)
        write_session(s, out / s.session_id)
        print(out / s.session_id)
    return 0


def cmd_preprocess(args, config: RunConfig) -> int:
    session = read_session(args.session)
    trace: list[str] = []
    cleaned = preprocess_pipeline(session, config.preprocess, raw=args.raw, trace=trace)
    path = write_session(cleaned, Path(args.output) / cleaned.session_id)
    log.info("stages: %s", ", ".join(trace))
    print(path)
    return 0


def cmd_segment(args, config: RunConfig) -> int:
    session = read_session(args.session)
    labelled = not args.unlabelled
    segs = segment_session(session, args.scheme, config.pipeline(), labelled=labelled)
    lines = [json.dumps({"center": s.center, "t": s.t, "label": s.label, "frames": len(s)}) for s in segs]
    _emit("".join(line + "\n" for line in lines), args.output)
    return 0


def cmd_features(args, config: RunConfig) -> int:
    sessions = _sessions(args.sessions)
    codebook = codebook_for(sessions)
    segs = []
    for s in sessions:
        segs += segment_session(s, args.scheme, config.pipeline())
    fm = build_features(segs, codebook, args.features, config.segmentation.peak_threshold)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.features == "statistical":
        axes = ("gx", "gy", "gz", "ax", "ay", "az")
        head = [f"{a}_{n}" for a in axes for n in STAT_NAMES]
    else:
        frames, dim = fm.sequence_shape
        head = [f"f{i}_c{j}" for i in range(frames) for j in range(dim)]
    w.writerow(["label", *head])
    for label, row in zip(fm.labels, fm.rows):
        w.writerow([label, *(repr(float(v)) for v in row)])
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_train(args, config: RunConfig) -> int:
    sessions = _sessions(args.sessions)
    model, trace = train_final_model(
        args.scheme, args.model, sessions,
        config=config.pipeline(), epochs=config.training.epochs or DEFAULT_EPOCHS, seed=config.seed,
        n_hidden=config.training.hidden, batch=not config.training.online,
    )
    save_model(model, args.output)
    log.info("final training loss %.6f", trace[-1])
    print(args.output)
    return 0


def cmd_evaluate(args, config: RunConfig) -> int:
    train = _sessions(args.sessions)
    evals = _sessions(args.eval_session) if args.eval_session else None
    epochs = config.training.epochs
    report = run_experiment(
        args.scheme, args.model, train, evals,
        config=config.pipeline(), epochs=epochs, folds=config.training.folds, seed=config.seed,
        n_hidden=config.training.hidden, batch=not config.training.online,
    )
    _emit(report.to_json(indent=2) + "\n", args.output)
    sys.stderr.write(report.confusion.to_text() + "\n")
    sys.stderr.write(f"F1 {report.f1_mean:.4f} +/- {report.f1_std:.4f}  "
                     f"reliability {report.reliability_mean:.4f} +/- {report.reliability_std:.4f}\n")
    if args.loss_csv:
        Path(args.loss_csv).write_text(report.loss_csv(), encoding="utf-8")
    return 0


def cmd_infer(args, config: RunConfig) -> int:
    model = load_model(args.model)
    session = read_session(args.session)
    preds = infer(model, session, args.scheme, config.pipeline())
    _emit("".join(json.dumps(p.to_dict()) + "\n" for p in preds), args.output)
    return 0


def _table(rows, fmt: str, columns: Sequence[str]) -> str:
    dicts = [r.to_dict() for r in rows]
    if fmt == "json":
        return json.dumps(dicts, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for d in dicts:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in d.items()})
    return buf.getvalue()


def cmd_benchmark_fusion(args, config: RunConfig) -> int:
    session = read_session(args.session) if args.session else generate_session(toy_config(config.seed))
    rows = benchmark_fusion(
        session, scheme=args.scheme, config=config.pipeline(), epochs=config.training.epochs or DEFAULT_EPOCHS,
        seed=config.seed, n_hidden=args.hidden_units, batch=not config.training.online,
    )
    _emit(_table(rows, args.format, ("name", "dim", "f1_mean", "reliability_mean")), args.output)
    return 0


def cmd_benchmark_models(args, config: RunConfig) -> int:
    sessions = _sessions(args.sessions) if args.sessions else [generate_session(config.synth_config())]
    rows = benchmark_models(
        sessions, scheme=args.scheme, config=config.pipeline(), epochs=config.training.epochs or DEFAULT_EPOCHS,
        folds=config.training.folds, seed=config.seed, n_hidden=config.training.hidden,
        batch=not config.training.online,
    )
    columns = ("name", "hidden", "features", "f1_mean", "f1_std", "reliability_mean", "reliability_std")
    _emit(_table(rows, args.format, columns), args.output)
    return 0


# -- parser -------------------------------------------------------------------


def _scheme(text: str) -> str:
    t = text.strip().lower()
    if t not in SCHEMES:
        raise argparse.ArgumentTypeError(f"choose from {', '.join(SCHEMES)}")
    return t


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="warning", choices=("debug", "info", "warning", "error"))
    add_config_arguments(common)

    parser = argparse.ArgumentParser(prog="motionkeys", description="Keystroke inference from wrist motion sensors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    p = add("serve", cmd_serve, "run the acquisition server")
    p.add_argument("--output-dir", required=True, help="where finished sessions are written")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--tcp-port", type=int, default=9000)
    p.add_argument("--http-port", type=int, default=9080)

    p = add("synth", cmd_synth, "generate a synthetic session")
    p.add_argument("--output", required=True, help="parent directory for the session directory")
    p.add_argument("--session-id")
    p.add_argument("--pair", type=int, metavar="FAMILY", help="also generate the same keys with template FAMILY")
    p.add_argument("--toy", action="store_true", help="four keys (1, 3, *, #), 30 instances each")

    p = add("preprocess", cmd_preprocess, "write a cleaned copy of a session")
    p.add_argument("session")
    p.add_argument("--output", required=True, help="parent directory for the cleaned session")
    p.add_argument("--raw", action="store_true", help="calibration only")

    p = add("segment", cmd_segment, "list keystroke windows as JSON lines")
    p.add_argument("session")
    p.add_argument("--scheme", type=_scheme, default="p-t")
    p.add_argument("--unlabelled", action="store_true", help="keep peaks without a matching label")
    p.add_argument("--output")

    p = add("features", cmd_features, "write labelled feature rows as CSV")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--scheme", type=_scheme, default="p-t")
    p.add_argument("--features", choices=FEATURE_KINDS, default="statistical")
    p.add_argument("--output")

    p = add("train", cmd_train, "train on labelled sessions and save the model")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--scheme", type=_scheme, default="p-t")
    p.add_argument("--model", choices=MODEL_CHOICES, default="rnn-lstm")
    p.add_argument("--output", required=True, help="model XML path")

    p = add("evaluate", cmd_evaluate, "cross-validate, or train on sessions and score --eval-session")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--scheme", type=_scheme, default="p-t")
    p.add_argument("--model", choices=MODEL_CHOICES, default="rnn-lstm")
    p.add_argument("--eval-session", action="append", help="evaluation session (transfer mode); repeatable")
    p.add_argument("--output", help="report JSON path (default stdout)")
    p.add_argument("--loss-csv", help="write per-epoch loss traces here")

    p = add("infer", cmd_infer, "classify detected keystrokes with a saved model")
    p.add_argument("session")
    p.add_argument("--model", required=True, help="model XML path")
    p.add_argument("--scheme", type=_scheme, help="defaults to the model's scheme")
    p.add_argument("--output")

    p = add("benchmark-fusion", cmd_benchmark_fusion, "compare the eight fusion strategies")
    p.add_argument("session", nargs="?", help="four-label session (default: synthetic toy set)")
    p.add_argument("--scheme", type=_scheme, default="p-t")
    p.add_argument("--hidden-units", type=int, default=9)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output")

    p = add("benchmark-models", cmd_benchmark_models, "compare the six hidden-layer / feature combinations")
    p.add_argument("sessions", nargs="*", help="labelled sessions (default: one synthetic session)")
    p.add_argument("--scheme", type=_scheme, default="p-t")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except ConfigError as exc:
        parser.exit(2, f"motionkeys: configuration error: {exc}\n")
    try:
        return args.func(args, config)
    except (ValueError, OSError, SessionFormatError, ModelFormatError, ReplayError) as exc:
        sys.stderr.write(f"motionkeys {args.command}: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
