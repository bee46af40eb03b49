"""``ja4ml`` command line: fingerprint, ingest, train, eval, score.

Exit codes: 0 success, 1 operational error, 2 success with an empty result.
Every subcommand that writes files also writes ``config_echo.json``; feeding
that file to ``ja4ml replay`` reruns the command with identical settings.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import dataset as ds
from .clienthello import ClientHelloError, parse_clienthello
from .features import CategoryEncoder, FeatureVector, MalformedJa4, fit_encoder
from .gbdt import GbdtModel, TrainConfig, train
from .gbdt import _kernels
from .ja4 import compute_ja4
from .metrics import EvalReport, evaluate, render_report
from .pcap import CaptureError, CaptureSource, HandshakeError, extract_clienthello_bytes, open_capture

log = logging.getLogger("ja4ml")

EXIT_OK, EXIT_ERROR, EXIT_EMPTY = 0, 1, 2
ECHO_NAME = "config_echo.json"


class CliError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("JA4ML_SEED")
    if raw is None:
        return ds.DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"JA4ML_SEED must be an integer, got {raw!r}") from None


def write_echo(path: Path | None, subcommand: str, settings: dict) -> None:
    if path is None:
        return
    doc = {"subcommand": subcommand, "settings": settings, "ja4ml_version": "0.1.0"}
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# -- fingerprint -------------------------------------------------------------------


def fingerprint_sources(sources: list[CaptureSource]) -> tuple[list[tuple[str, str]], list[str]]:
    rows, problems = [], []
    for src in sources:
        for cand in open_capture(src):
            try:
                hs = extract_clienthello_bytes(cand)
                fp = compute_ja4(parse_clienthello(hs, cand.transport))
            except (HandshakeError, ClientHelloError) as exc:
                problems.append(f"{cand.flow_id}: {exc}")
                continue
            rows.append((cand.flow_id, fp.full))
    return rows, problems


def _sources_from_args(args) -> list[CaptureSource]:
    transport = "udp-quic" if getattr(args, "quic", False) else "tcp"
    sources = [CaptureSource.from_path(p) for p in args.captures]
    sources += [CaptureSource.from_hex(h, transport) for h in (args.hex or [])]
    return sources


def cmd_fingerprint(args) -> int:
    sources = _sources_from_args(args)
    if not sources:
        raise CliError("give at least one capture file or --hex value")
    rows, problems = fingerprint_sources(sources)
    for p in problems:
        log.warning("skipped candidate %s", p)
    text = "".join(f"{flow}\t{ja4}\n" for flow, ja4 in rows)
    if args.output:
        out = Path(args.output)
        out.write_text(text)
    else:
        sys.stdout.write(text)
    default = out.with_name(out.name + ".config.json") if args.output else None
    write_echo(_echo_path(args, default), "fingerprint", _settings(args))
    return EXIT_OK if rows else EXIT_EMPTY


# -- ingest ----------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    good_bots = tuple(args.good_bot) if args.good_bot else ds.DEFAULT_GOOD_BOTS
    labeled, stats = ds.ingest(args.ja4db, good_bots)
    ds.write_dataset_csv(labeled, out / "dataset.csv")
    if len(labeled) >= 2:
        manifest = ds.split(len(labeled), seed=args.seed, ratio=args.ratio)
        manifest.save(out / "manifest.json")
        stats["split"] = ds.class_balance(labeled, manifest)
        stats["split"]["manifest_digest"] = manifest.digest()
    stats["reference_comparison"] = ds.reference_comparison(stats)
    (out / "stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n")
    write_echo(_echo_path(args, out / ECHO_NAME), "ingest", _settings(args))

    print(f"records {stats['total_records']}  bad_bot {stats['bad_bot']} ({stats['percent']['bad_bot']}%)  "
          f"benign {stats['benign']} ({stats['percent']['benign']}%)  "
          f"good_bot_excluded {stats['good_bot_excluded']} ({stats['percent']['good_bot_excluded']}%)")
    print(f"modeled {stats['modeled']['total']}  missing fingerprint {stats['missing_fingerprint']}  "
          f"malformed {stats['malformed_fingerprint']}")
    if "split" in stats:
        for part in ("train", "test"):
            s = stats["split"][part]
            print(f"{part:5s} rows {s['rows']}  bad_bot {s['bad_bot']}  benign {s['benign']}  "
                  f"bad_bot_fraction {s['bad_bot_fraction']:.4f}")
    print(f"{'quantity':20s}{'observed':>10s}{'reference':>11s}{'delta':>9s}")
    for row in stats["reference_comparison"]:
        print(f"{row['quantity']:20s}{row['observed']:>10d}{row['reference']:>11d}{row['delta']:>+9d}")
    return EXIT_OK if labeled else EXIT_EMPTY


# -- train -----------------------------------------------------------------------------


def _load_split(args) -> tuple[list[ds.LabeledRecord], ds.SplitManifest]:
    data_dir = Path(args.data) if args.data else None
    dataset_path = Path(args.dataset) if args.dataset else data_dir / "dataset.csv"
    manifest_path = Path(args.manifest) if args.manifest else data_dir / "manifest.json"
    records = ds.read_dataset_csv(dataset_path)
    manifest = ds.SplitManifest.load(manifest_path)
    if manifest.n != len(records):
        raise CliError(f"manifest covers {manifest.n} rows but {dataset_path} has {len(records)}")
    return records, manifest


def _xy(encoder: CategoryEncoder, records: list[ds.LabeledRecord]) -> tuple[np.ndarray, np.ndarray]:
    X = encoder.encode_many([r.features for r in records])
    y = np.asarray([r.y for r in records], dtype=np.float64)
    return X, y


def train_from_split(view: ds.DatasetView, manifest: ds.SplitManifest, config: TrainConfig,
                     include_application: bool, backend: str | None = None, log_fn=None):
    """Fit encoder and model on the train indices only; ``view`` records every row touched."""
    rows = view.take(manifest.train_indices)
    encoder = fit_encoder([r.features for r in rows], include_application=include_application)
    X, y = _xy(encoder, rows)
    model = train(X, y, config, feature_names=encoder.columns, backend=backend, log=log_fn)
    return model, encoder


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        n_trees=args.trees,
        max_depth=args.depth,
        learning_rate=args.lr,
        subsample=args.subsample,
        colsample=args.colsample,
        l2_leaf_reg=args.l2,
        min_split_gain=args.gamma,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records, manifest = _load_split(args)
    config = _train_config(args)
    view = ds.DatasetView(records)
    lines = []
    t0 = time.monotonic()

    def log_round(rnd: int, loss: float) -> None:
        lines.append(f"round {rnd:4d} logloss {loss:.6f}")
        if args.verbose:
            print(lines[-1], file=sys.stderr)

    model, encoder = train_from_split(view, manifest, config, args.paper_fidelity, args.backend, log_round)
    leaked = view.accessed & set(manifest.test_indices)
    if leaked:
        raise CliError(f"internal error: training touched {len(leaked)} test rows")
    model.save(out / "model.json")
    encoder.save(out / "encoder.json")
    (out / "train_log.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
    settings = _settings(args)
    settings["train_config"] = asdict(config)
    settings["effective_backend"] = args.backend or _kernels.BACKEND
    write_echo(_echo_path(args, out / ECHO_NAME), "train", settings)
    print(f"trained {len(model.trees)} trees on {len(manifest.train_indices)} rows "
          f"({time.monotonic() - t0:.1f}s, backend {settings['effective_backend']}); "
          f"config n_trees={config.n_trees} max_depth={config.max_depth} learning_rate={config.learning_rate} "
          f"subsample={config.subsample} colsample={config.colsample}")
    if lines:
        print(f"final {lines[-1]}")
    print(f"model digest {model.digest()}")
    return EXIT_OK


# -- eval ------------------------------------------------------------------------------


def _load_model_and_encoder(model_path: str, encoder_path: str | None) -> tuple[GbdtModel, CategoryEncoder]:
    model = GbdtModel.load(model_path)
    enc_path = Path(encoder_path) if encoder_path else Path(model_path).with_name("encoder.json")
    encoder = CategoryEncoder.load(enc_path)
    if encoder.columns != model.feature_names:
        raise CliError(f"encoder columns {encoder.columns} do not match model features {model.feature_names}")
    return model, encoder


def evaluate_split(model: GbdtModel, encoder: CategoryEncoder, records, manifest, threshold: float = 0.5) -> EvalReport:
    rows = [records[i] for i in manifest.test_indices]
    X, y = _xy(encoder, rows)
    scores = model.predict_proba(X)
    return evaluate(y, scores, threshold, model.feature_importance())


def cmd_eval(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model, encoder = _load_model_and_encoder(args.model, args.encoder)
    records, manifest = _load_split(args)
    if not manifest.test_indices:
        raise CliError("manifest has no test rows")
    report = evaluate_split(model, encoder, records, manifest, args.threshold)
    (out / "report.json").write_text(render_report(report, "json"))
    (out / "report.txt").write_text(render_report(report, "text"))
    (out / "roc.csv").write_text(render_report(report, "csv"))
    (out / "importances.csv").write_text(
        "feature,gain\n" + "".join(f"{n},{g!r}\n" for n, g in report.importances)
    )
    write_echo(_echo_path(args, out / ECHO_NAME), "eval", _settings(args))
    sys.stdout.write(render_report(report, "text"))
    return EXIT_OK


# -- score -----------------------------------------------------------------------------


def score_inputs(model: GbdtModel, encoder: CategoryEncoder, inputs: list[str], threshold: float = 0.5):
    """Yield ``(input, ja4, probability)``; inputs are JA4 strings or capture paths."""
    items: list[tuple[str, str]] = []
    for item in inputs:
        if Path(item).is_file():
            rows, problems = fingerprint_sources([CaptureSource.from_path(item)])
            for p in problems:
                log.warning("skipped candidate %s", p)
            items += [(f"{item}:{flow}", ja4) for flow, ja4 in rows]
        else:
            items.append((item, item))
    out = []
    for label, ja4 in items:
        fv = FeatureVector.from_ja4(ja4)
        X = np.asarray([encoder.encode(fv)])
        out.append((label, ja4, float(model.predict_proba(X)[0])))
    return out


def cmd_score(args) -> int:
    model, encoder = _load_model_and_encoder(args.model, args.encoder)
    inputs = list(args.inputs)
    for h in args.hex or []:
        rows, _ = fingerprint_sources([CaptureSource.from_hex(h)])
        inputs += [ja4 for _, ja4 in rows]
    results = score_inputs(model, encoder, inputs, args.threshold)
    write_echo(_echo_path(args, None), "score", _settings(args))
    for label, ja4, p in results:
        verdict = "bad_bot" if p >= args.threshold else "benign"
        print(f"{label}\t{ja4}\t{p:.6f}\t{verdict}")
    return EXIT_OK if results else EXIT_EMPTY


# -- adversarial / replay -----------------------------------------------------------------


def cmd_adversarial(args) -> int:
    from .adversarial import run_all, tap_lines

    verdicts = run_all()
    print("\n".join(tap_lines(verdicts)))
    return EXIT_OK if all(v.status != "fail" for v in verdicts) else EXIT_ERROR


def cmd_replay(args) -> int:
    doc = json.loads(Path(args.echo).read_text())
    ns = argparse.Namespace(**doc["settings"])
    ns.func = COMMANDS[doc["subcommand"]]
    return ns.func(ns)


COMMANDS = {
    "fingerprint": cmd_fingerprint,
    "ingest": cmd_ingest,
    "train": cmd_train,
    "eval": cmd_eval,
    "score": cmd_score,
}

_NOT_SETTINGS = {"func", "log_level"}


def _echo_path(args, default: Path | None) -> Path | None:
    given = getattr(args, "echo_file", None)
    return Path(given) if given else default


def _settings(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_SETTINGS}


def _split_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="directory written by `ingest` (dataset.csv + manifest.json)")
    p.add_argument("--dataset", help="labeled dataset CSV (overrides --data)")
    p.add_argument("--manifest", help="split manifest JSON (overrides --data)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ja4ml", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING")
    parser.add_argument("--echo-file", help="where to write the config echo (default: next to the outputs)")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    seed = default_seed()

    p = sub.add_parser("fingerprint", help="print JA4 fingerprints found in captures or hex ClientHellos")
    p.add_argument("captures", nargs="*", help="classic pcap files")
    p.add_argument("--hex", action="append", help="ClientHello as hex (TLS record or handshake message)")
    p.add_argument("--quic", action="store_true", help="tag --hex input as QUIC (protocol char 'q')")
    p.add_argument("--output", "-o", help="write the listing here instead of stdout")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("ingest", help="label a JA4DB JSON export and split it 80/20")
    p.add_argument("ja4db", help="JA4DB JSON export (array of objects)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--ratio", type=float, default=0.8, help="train fraction")
    p.add_argument("--good-bot", action="append", help="good-crawler identifier (repeatable; replaces defaults)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train the GBDT on the train split")
    _split_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--subsample", type=float, default=0.8)
    p.add_argument("--colsample", type=float, default=0.8)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0, help="minimum split gain")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--paper-fidelity", action="store_true", help="include the application feature")
    p.add_argument("--backend", choices=sorted(_kernels.BACKENDS), default=None)
    p.add_argument("--verbose", "-v", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on the test split")
    _split_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--encoder")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("score", help="score JA4 strings or captures")
    p.add_argument("inputs", nargs="*", help="JA4 strings or pcap paths")
    p.add_argument("--hex", action="append")
    p.add_argument("--model", required=True)
    p.add_argument("--encoder")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("adversarial", help="run the threat-model scenarios (TAP output)")
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("replay", help="rerun a command from its config_echo.json")
    p.add_argument("echo")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except (CliError, CaptureError, ds.DatasetError, MalformedJa4, ValueError, OSError) as exc:
        print(f"ja4ml: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
