"""Batch command-line pipeline: graph/ctg exports, corpus mining, training,
prediction, explanation, and evaluation reports.

All outputs are byte-stable: JSON is emitted with sorted keys and a fixed
layout, and every source of randomness is seeded from the config.
"""
import os

# single-threaded kernels keep checkpoint bytes reproducible across runs;
# must happen before numpy loads
for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "OMP_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from commitrisk.corpus import (CommitCorpus, CorpusFormatError, LineOutOfRange,
                               commit_ctg, label_dataset, labels_from_json,
                               labels_to_json, load_corpus, split_cross_project,
                               split_dev_process)
from commitrisk.ctg import change_rate, ctg_from_sources, ctg_to_dot, ctg_to_json
from commitrisk.evaluation import (confusion, make_report, metrics,
                                   training_size_curve)
from commitrisk.graphs import build_rcg, rcg_to_dot, rcg_to_json
from commitrisk.localize import (NotAttentionModel, explain_statements,
                                 format_report, ranking_to_json)
from commitrisk.minic import LexError, ParseError, parse_source
from commitrisk.neural import (CheckpointError, EmptyGraph, HyperParams,
                               Prediction, SkipgramConfig, TrainConfig,
                               build_vocab, load_checkpoint, model_forward,
                               new_model, save_checkpoint, skipgram_pretrain,
                               train)
from commitrisk.neural.embedding import node_content


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 50
    lr: float = 1e-3
    batch: int = 16
    pretrain_epochs: int = 0
    min_count: int = 1


@dataclass(frozen=True)
class SplitSettings:
    kind: str = "cross-project"  # cross-project | dev-process
    ratio: float = 0.8

    def __post_init__(self):
        if self.kind not in ("cross-project", "dev-process"):
            raise ConfigError(f"unknown split kind {self.kind!r}")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    model: HyperParams = field(default_factory=HyperParams)
    train: TrainSettings = field(default_factory=TrainSettings)
    split: SplitSettings = field(default_factory=SplitSettings)
    hop_limit: int | None = None
    explainer: str = "occlusion"
    mine_hops: int = 1

    def __post_init__(self):
        if self.explainer not in ("occlusion", "attention"):
            raise ConfigError(f"unknown explainer {self.explainer!r}")


def _build_section(cls, doc: dict, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: "
                          f"{', '.join(sorted(unknown))}")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {where} config: {exc}") from exc


def load_config(path: str | None, seed_override: int | None) -> PipelineConfig:
    doc = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    allowed = {"seed", "model", "train", "split", "hop_limit",
               "explainer", "mine_hops"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    seed = int(doc.get("seed", 0))
    if seed_override is not None:
        seed = seed_override
    model_doc = dict(doc.get("model", {}))
    if "seed" in model_doc:
        raise ConfigError("set the seed at the top level, not under model")
    model = _build_section(HyperParams, {**model_doc, "seed": seed}, "model")
    cfg = PipelineConfig(
        seed=seed,
        model=model,
        train=_build_section(TrainSettings, doc.get("train", {}), "train"),
        split=_build_section(SplitSettings, doc.get("split", {}), "split"),
        hop_limit=doc.get("hop_limit"),
        explainer=doc.get("explainer", "occlusion"),
        mine_hops=int(doc.get("mine_hops", 1)),
    )
    return cfg


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _read_source(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def cmd_graph(args, cfg: PipelineConfig, out_dir: Path) -> int:
    source = _read_source(args.file)
    rcg = build_rcg(parse_source(source, args.file))
    stem = Path(args.file).stem
    _write_json(out_dir / f"{stem}.rcg.json", rcg_to_json(rcg))
    _write_text(out_dir / f"{stem}.rcg.dot", rcg_to_dot(rcg))
    return 0


def cmd_ctg(args, cfg: PipelineConfig, out_dir: Path) -> int:
    g = ctg_from_sources(_read_source(args.before), _read_source(args.after),
                         trim=not args.no_trim, hop_limit=cfg.hop_limit)
    _write_json(out_dir / "ctg.json", ctg_to_json(g))
    _write_text(out_dir / "ctg.dot", ctg_to_dot(g))
    return 0


def cmd_mine(args, cfg: PipelineConfig, out_dir: Path) -> int:
    corpus = load_corpus(args.corpus)
    labeled = label_dataset(corpus, hops=cfg.mine_hops)
    _write_json(out_dir / "labels.json", labels_to_json(labeled))
    return 0


def _load_labels(args, corpus_path: str):
    path = Path(args.labels) if args.labels else Path(corpus_path) / "labels.json"
    if not path.is_file():
        raise CorpusFormatError(
            f"no labels at {path}; run the mine command first or pass --labels")
    with open(path, encoding="utf-8") as fh:
        return labels_from_json(json.load(fh))


def _split(labeled, cfg: PipelineConfig):
    if cfg.split.kind == "dev-process":
        return split_dev_process(labeled, ratio=cfg.split.ratio)
    return split_cross_project(labeled, ratio=cfg.split.ratio, seed=cfg.seed)


def _commit_graphs(corpus: CommitCorpus, labeled, cfg: PipelineConfig):
    """(LabeledCommit, change graph) pairs for dangerous/safe commits."""
    out = []
    for item in labeled:
        if item.label not in ("dangerous", "safe"):
            continue
        g = commit_ctg(corpus.record(item.id), hop_limit=cfg.hop_limit)
        out.append((item, g))
    return out


def cmd_train(args, cfg: PipelineConfig, out_dir: Path) -> int:
    corpus = load_corpus(args.corpus)
    labeled = _load_labels(args, args.corpus)
    train_side, _ = _split(labeled, cfg)
    dataset = [(g, 1 if item.label == "dangerous" else 0)
               for item, g in _commit_graphs(corpus, train_side, cfg)]
    if not any(g.nodes for g, _ in dataset):
        raise CorpusFormatError("no labeled commits with a nonempty change "
                                "graph in the training split")
    streams = [[node_content(n) for n in g.nodes] for g, _ in dataset if g.nodes]
    vocab = build_vocab(streams, min_count=cfg.train.min_count)
    pretrained = None
    if cfg.train.pretrain_epochs > 0:
        pretrained = skipgram_pretrain(
            streams, vocab,
            SkipgramConfig(dim=cfg.model.d_emb,
                           epochs=cfg.train.pretrain_epochs, seed=cfg.seed))
    model = new_model(vocab, cfg.model, embeddings=pretrained)
    model, history = train(model, dataset,
                           TrainConfig(epochs=cfg.train.epochs, lr=cfg.train.lr,
                                       batch=cfg.train.batch, seed=cfg.seed))
    save_checkpoint(model, out_dir / "checkpoint.json")
    _write_json(out_dir / "history.json", {"history": history})
    return 0


def _predict_commit(model, g):
    """Model prediction with the empty-change policy applied."""
    if not g.nodes:
        return Prediction(probability=0.0, label="safe", logit=0.0), True
    return model_forward(model, g), False


def cmd_predict(args, cfg: PipelineConfig, out_dir: Path) -> int:
    model = load_checkpoint(args.checkpoint)
    g = ctg_from_sources(_read_source(args.before), _read_source(args.after),
                         hop_limit=cfg.hop_limit)
    pred, empty = _predict_commit(model, g)
    if empty:
        doc = {"label": "safe", "probability": 0.0, "empty_change": True}
    else:
        doc = {"label": pred.label, "probability": pred.probability,
               "logit": pred.logit, "empty_change": False}
    _write_json(out_dir / "prediction.json", doc)
    print(json.dumps(doc, sort_keys=True))
    return 0


def cmd_explain(args, cfg: PipelineConfig, out_dir: Path) -> int:
    model = load_checkpoint(args.checkpoint)
    before = _read_source(args.before)
    after = _read_source(args.after)
    g = ctg_from_sources(before, after, hop_limit=cfg.hop_limit)
    if not g.nodes:
        _write_json(out_dir / "ranking.json", [])
        _write_text(out_dir / "report.txt", "no change to explain\n")
        print("no change to explain")
        return 0
    ranking = explain_statements(model, g, explainer=cfg.explainer)
    report = format_report(ranking, before, after, top_k=args.top)
    _write_json(out_dir / "ranking.json", ranking_to_json(ranking))
    _write_text(out_dir / "report.txt", report)
    print(report, end="")
    return 0


def cmd_eval(args, cfg: PipelineConfig, out_dir: Path) -> int:
    model = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    labeled = _load_labels(args, args.corpus)
    train_side, test_side = _split(labeled, cfg)
    test_items = _commit_graphs(corpus, test_side, cfg)
    preds, labels, rates = [], [], []
    for item, g in test_items:
        pred, _ = _predict_commit(model, g)
        preds.append(pred)
        labels.append(item.label)
        rates.append(change_rate(g))
    curve = None
    if args.with_curve:
        train_items = _commit_graphs(corpus, train_side, cfg)

        def train_fn(subset):
            data = [(g, 1 if item.label == "dangerous" else 0)
                    for item, g in subset]
            streams = [[node_content(n) for n in g.nodes]
                       for g, _ in data if g.nodes]
            vocab = build_vocab(streams, min_count=cfg.train.min_count)
            fold_model = new_model(vocab, cfg.model)
            fold_model, _ = train(
                fold_model, data,
                TrainConfig(epochs=cfg.train.epochs, lr=cfg.train.lr,
                            batch=cfg.train.batch, seed=cfg.seed))
            return fold_model

        def eval_fn(fold_model):
            fold_preds = [_predict_commit(fold_model, g)[0]
                          for _, g in test_items]
            return metrics(confusion(fold_preds, labels))

        curve = training_size_curve(train_fn, eval_fn, train_items)
    report = make_report(cfg.split.kind, preds, labels, rates,
                         training_curve=curve)
    _write_json(out_dir / "report.json", report)
    return 0


INPUT_ERRORS = (LexError, ParseError, CorpusFormatError, LineOutOfRange,
                CheckpointError, ConfigError, NotAttentionModel,
                FileNotFoundError, IsADirectoryError, json.JSONDecodeError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commitrisk",
        description="commit-level vulnerability detection pipeline")
    parser.add_argument("--config", help="pipeline config JSON")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out-dir", default=".", help="artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", help="relational code graph of one file")
    p.add_argument("file")
    p.set_defaults(run=cmd_graph)

    p = sub.add_parser("ctg", help="change graph of a file pair")
    p.add_argument("before")
    p.add_argument("after")
    p.add_argument("--no-trim", action="store_true")
    p.set_defaults(run=cmd_ctg)

    p = sub.add_parser("mine", help="mine and label a commit corpus")
    p.add_argument("corpus")
    p.set_defaults(run=cmd_mine)

    p = sub.add_parser("train", help="train a classifier on a corpus")
    p.add_argument("corpus")
    p.add_argument("--labels", help="labels.json (default: <corpus>/labels.json)")
    p.set_defaults(run=cmd_train)

    p = sub.add_parser("predict", help="classify a file pair")
    p.add_argument("checkpoint")
    p.add_argument("before")
    p.add_argument("after")
    p.set_defaults(run=cmd_predict)

    p = sub.add_parser("explain", help="rank suspicious statements")
    p.add_argument("checkpoint")
    p.add_argument("before")
    p.add_argument("after")
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(run=cmd_explain)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("--labels")
    p.add_argument("--with-curve", action="store_true")
    p.set_defaults(run=cmd_eval)
    return parser


def _fail(exc: Exception, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return args.run(args, cfg, out_dir)
    except INPUT_ERRORS as exc:
        return _fail(exc, 2)
    except Exception as exc:  # pragma: no cover - defensive catch-all
        return _fail(exc, 3)


if __name__ == "__main__":
    sys.exit(main())
