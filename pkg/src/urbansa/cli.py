"""Command-line pipeline: ingest, convert, train, eval, infer, analyze, plot.

Exit codes are a stable contract: 0 success, 2 configuration error,
3 backend failure, 4 corpus parse error, 5 missing checkpoint.

Every option may also be supplied through ``--config FILE`` holding flat
``key=value`` lines; explicit flags win over config values.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace
from typing import Callable, Sequence

from . import corpus as corpus_mod
from . import geo, ingest, metrics
from .corpus import ParseError, Polarity, parse_apc, parse_atepc, serialize_atepc, tokenize
from .model import LcfMode, LcfModel, ModelConfig, Vocab
from .train import TrainConfig, TrainingDiverged, split, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_PARSE = 4
EXIT_NO_CHECKPOINT = 5


@dataclass(frozen=True)
class Option:
    flag: str
    type: Callable = str
    default: object = None
    required: bool = False
    is_flag: bool = False
    choices: tuple | None = None
    help: str = ""

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


GLOBAL_OPTIONS = [
    Option("--seed", type=int, default=0, help="seed for all randomness"),
    Option("--config", help="flat key=value config file"),
    Option("--verbose", is_flag=True, help="log progress to stderr"),
]

COMMANDS: dict[str, list[Option]] = {
    "ingest": [
        Option("--fixtures", help="fixture directory (offline backend)"),
        Option("--live", is_flag=True, help="query the live places API"),
        Option("--origin-lat", type=float, default=42.36),
        Option("--origin-lon", type=float, default=-71.06),
        Option("--rows", type=int, default=1),
        Option("--cols", type=int, default=1),
        Option("--spacing-m", type=float, default=1000.0),
        Option("--radius-m", type=float, default=750.0),
        Option("--category", default="park"),
        Option("--rate-limit", type=float, default=10.0, help="live requests per second"),
        Option("--out-dir", default="."),
    ],
    "convert": [
        Option("--from", choices=("apc",), required=True),
        Option("--to", choices=("atepc",), required=True),
        Option("--input", required=True),
        Option("--output", required=True),
    ],
    "train": [
        Option("--corpus", required=True, help="ATEPC-format training file"),
        Option("--out-dir", default="."),
        Option("--train-size", type=int, default=2250),
        Option("--test-size", type=int, default=250),
        Option("--batch-size", type=int, default=16),
        Option("--epochs", type=int, default=6),
        Option("--learning-rate", type=float, default=2e-4),
        Option("--tag-loss-weight", type=float, default=1.0),
        Option("--polarity-loss-weight", type=float, default=1.0),
        Option("--d-model", type=int, default=64),
        Option("--n-heads", type=int, default=4),
        Option("--n-layers", type=int, default=2),
        Option("--max-len", type=int, default=128),
        Option("--srd-threshold", type=float, default=3.0, help="inf disables locality"),
        Option("--lcf-mode", choices=("CDM", "CDW", "FUSION"), default="CDW"),
        Option("--dropout", type=float, default=0.1),
        Option("--save-each-epoch", is_flag=True),
    ],
    "eval": [
        Option("--checkpoint", required=True),
        Option("--corpus", required=True, help="ATEPC-format test file"),
        Option("--out", help="write the JSON report here"),
    ],
    "infer": [
        Option("--checkpoint", required=True),
        Option("--input", default="-", help="text or reviews.jsonl; - for stdin"),
        Option("--output", default="-"),
    ],
    "analyze": [
        Option("--predictions", required=True, help="JSONL output of infer"),
        Option("--reviews", required=True, help="reviews.jsonl from ingest"),
        Option("--out-dir", default="."),
        Option("--cell-size-deg", type=float, default=0.005),
        Option("--top-k", type=int, default=0, help="0 keeps every aspect"),
        Option("--mode", choices=("points", "cells"), default="points"),
    ],
    "plot": [
        Option("--frequency", required=True, help="frequency.csv from analyze"),
        Option("--out", required=True, help="output image path"),
        Option("--top-k", type=int, default=10),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urbansa",
        description="Aspect-based sentiment analysis over geo-located POI reviews.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, options in COMMANDS.items():
        sub = subparsers.add_parser(command)
        for option in options + GLOBAL_OPTIONS:
            if option.is_flag:
                sub.add_argument(option.flag, dest=option.dest, action="store_true",
                                 default=argparse.SUPPRESS, help=option.help)
            else:
                kwargs = {"dest": option.dest, "type": option.type,
                          "default": argparse.SUPPRESS, "help": option.help}
                if option.choices:
                    kwargs["choices"] = option.choices
                sub.add_argument(option.flag, **kwargs)
    return parser


def _load_config(path: str) -> dict[str, str]:
    values = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def resolve_options(args: argparse.Namespace) -> SimpleNamespace:
    """Merge explicit flags over config-file values over defaults."""
    options = COMMANDS[args.command] + GLOBAL_OPTIONS
    by_dest = {option.dest: option for option in options}
    config_path = getattr(args, "config", None)
    config = _load_config(config_path) if config_path else {}
    unknown = set(config) - set(by_dest)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    resolved = {}
    for dest, option in by_dest.items():
        if hasattr(args, dest):
            resolved[dest] = getattr(args, dest)
        elif dest in config:
            resolved[dest] = _bool(config[dest]) if option.is_flag else option.type(config[dest])
        else:
            resolved[dest] = False if option.is_flag else option.default
        if option.required and resolved[dest] is None:
            raise ValueError(f"missing required option {option.flag}")
    return SimpleNamespace(command=args.command, **resolved)


def cmd_ingest(opts: SimpleNamespace) -> int:
    grid = ingest.QueryGrid(
        origin_lat=opts.origin_lat,
        origin_lon=opts.origin_lon,
        rows=opts.rows,
        cols=opts.cols,
        spacing_m=opts.spacing_m,
        radius_m=opts.radius_m,
        category=opts.category,
    )
    if opts.fixtures:
        backend = ingest.FixtureBackend(opts.fixtures)
    elif opts.live:
        backend = ingest.LiveBackend(rate_per_s=opts.rate_limit)
    else:
        raise ValueError("pass --fixtures DIR or --live")
    places, reviews = ingest.collect(grid, backend)
    out_dir = Path(opts.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ingest.write_places(places, out_dir / "places.jsonl")
    ingest.write_reviews(reviews, out_dir / "reviews.jsonl")
    if opts.verbose:
        print(f"collected {len(places)} places, {len(reviews)} reviews", file=sys.stderr)
    return EXIT_OK


def cmd_convert(opts: SimpleNamespace) -> int:
    if getattr(opts, "from") != "apc" or opts.to != "atepc":
        raise ValueError("only --from apc --to atepc is supported")
    text = Path(opts.input).read_text(encoding="utf-8")
    sentences = corpus_mod.apc_to_atepc(parse_apc(text))
    Path(opts.output).write_text(serialize_atepc(sentences), encoding="utf-8")
    return EXIT_OK


def _read_corpus(path: str):
    sentences = parse_atepc(Path(path).read_text(encoding="utf-8"))
    if not sentences:
        raise ValueError(f"{path}: empty corpus")
    return sentences


def cmd_train(opts: SimpleNamespace) -> int:
    sentences = _read_corpus(opts.corpus)
    train_cfg = TrainConfig(
        train_size=opts.train_size,
        test_size=opts.test_size,
        batch_size=opts.batch_size,
        num_epochs=opts.epochs,
        learning_rate=opts.learning_rate,
        tag_loss_weight=opts.tag_loss_weight,
        polarity_loss_weight=opts.polarity_loss_weight,
        seed=opts.seed,
    )
    train_split, _ = split(sentences, train_cfg)
    vocab = Vocab.build(train_split)
    model_cfg = ModelConfig(
        vocab_size=len(vocab),
        d_model=opts.d_model,
        n_heads=opts.n_heads,
        n_layers=opts.n_layers,
        max_len=opts.max_len,
        srd_threshold=opts.srd_threshold,
        lcf_mode=LcfMode(opts.lcf_mode),
        dropout=opts.dropout,
        seed=opts.seed,
    )
    model = LcfModel(model_cfg, vocab)
    out_dir = Path(opts.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def log(stats) -> None:
        if opts.save_each_epoch:
            model.save(out_dir / f"checkpoint.epoch{stats.epoch:03d}.bin")
        if opts.verbose:
            print(json.dumps(stats.to_dict(), sort_keys=True), file=sys.stderr)

    model, history = train(model, sentences, train_cfg, log=log)
    model.save(out_dir / "checkpoint.bin")
    vocab.save(out_dir / "vocab.txt")
    (out_dir / "history.jsonl").write_text(history.to_json_lines(), encoding="utf-8")
    return EXIT_OK


def _load_model(checkpoint: str) -> LcfModel:
    path = Path(checkpoint)
    if not path.exists() or not Path(str(path) + ".json").exists():
        raise FileNotFoundError(f"checkpoint {checkpoint} not found")
    return LcfModel.load(path)


def cmd_eval(opts: SimpleNamespace) -> int:
    model = _load_model(opts.checkpoint)
    sentences = _read_corpus(opts.corpus)
    report = metrics.evaluate(model, sentences)
    sys.stdout.write(metrics.render_table({"model": report}))
    if opts.out:
        Path(opts.out).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def _iter_input_lines(path: str):
    if path == "-":
        yield from sys.stdin
    else:
        with open(path, encoding="utf-8") as handle:
            yield from handle


def cmd_infer(opts: SimpleNamespace) -> int:
    model = _load_model(opts.checkpoint)
    out = sys.stdout if opts.output == "-" else open(opts.output, "w", encoding="utf-8")
    try:
        for line in _iter_input_lines(opts.input):
            line = line.strip()
            if not line:
                continue
            passthrough = {}
            if line.startswith("{"):
                record = json.loads(line)
                text = record["text"]
                passthrough = {
                    key: record[key]
                    for key in ("place_id", "lat", "lon", "timestamp")
                    if key in record
                }
            else:
                text = line
            tokens = tokenize(text)
            if len(tokens) > model.config.max_len:
                print(
                    f"truncating {len(tokens)}-token review to {model.config.max_len}",
                    file=sys.stderr,
                )
                tokens = tokens[: model.config.max_len]
            predictions = model.predict(" ".join(tokens))
            payload = {
                "text": text,
                "aspects": [prediction.to_dict() for prediction in predictions],
                **passthrough,
            }
            out.write(json.dumps(payload, ensure_ascii=False, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_analyze(opts: SimpleNamespace) -> int:
    locations = {
        review.place_id: (review.lat, review.lon)
        for review in ingest.read_reviews(opts.reviews)
    }
    records = []
    for line in Path(opts.predictions).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        payload = json.loads(line)
        if "lat" in payload and "lon" in payload:
            lat, lon = payload["lat"], payload["lon"]
        elif payload.get("place_id") in locations:
            lat, lon = locations[payload["place_id"]]
        else:
            raise ValueError(
                "prediction line has no location and no known place_id; "
                "run infer on reviews.jsonl to keep geo attributes"
            )
        for aspect in payload["aspects"]:
            records.append(
                geo.GeoAspectRecord(
                    aspect=aspect["term"],
                    polarity=Polarity(aspect["polarity"]),
                    lat=lat,
                    lon=lon,
                    place_id=payload.get("place_id", ""),
                    timestamp=payload.get("timestamp", 0),
                )
            )
    k = opts.top_k if opts.top_k > 0 else max(1, len(records))
    tables = [geo.aggregate_frequency(records, polarity, k) for polarity in Polarity]
    out_dir = Path(opts.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "frequency.csv").write_text(geo.frequency_csv(tables), encoding="utf-8")
    if opts.mode == "cells":
        bins = geo.bin_spatial(records, opts.cell_size_deg)
        geojson = geo.export_geojson(bins=bins)
    else:
        geojson = geo.export_geojson(records=records)
    (out_dir / "aspects.geojson").write_text(geojson, encoding="utf-8")
    if opts.verbose:
        print(f"analyzed {len(records)} aspect records", file=sys.stderr)
    return EXIT_OK


def cmd_plot(opts: SimpleNamespace) -> int:
    import csv

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows: dict[str, list[tuple[str, int]]] = {}
    with open(opts.frequency, encoding="utf-8", newline="") as handle:
        for record in csv.DictReader(handle):
            rows.setdefault(record["polarity"], []).append(
                (record["aspect"], int(record["count"]))
            )
    polarities = list(rows)
    fig, axes = plt.subplots(1, max(1, len(polarities)), figsize=(5 * max(1, len(polarities)), 4))
    if len(polarities) <= 1:
        axes = [axes]
    for ax, polarity in zip(axes, polarities):
        top = rows[polarity][: opts.top_k]
        ax.barh([aspect for aspect, _ in reversed(top)], [count for _, count in reversed(top)])
        ax.set_title(polarity)
        ax.set_xlabel("count")
    fig.tight_layout()
    fig.savefig(opts.out)
    plt.close(fig)
    return EXIT_OK


HANDLERS = {
    "ingest": cmd_ingest,
    "convert": cmd_convert,
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "analyze": cmd_analyze,
    "plot": cmd_plot,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve_options(args)
        return HANDLERS[args.command](opts)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ingest.MissingApiKeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ingest.IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except FileNotFoundError as exc:
        message = str(exc)
        print(f"error: {message}", file=sys.stderr)
        return EXIT_NO_CHECKPOINT if "checkpoint" in message else EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
