"""Command-line interface: ``bilstm-crf {train,eval,tag,check}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Log verbosity comes from ``BILSTM_CRF_LOG_LEVEL`` (default INFO).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import selfcheck
from .corpus import CorpusError, LabeledSentence, LabelSet, read_bio, serialize_bio
from .metrics import format_kv, format_report, score_labels
from .nn_core import NumericError
from .optim import KINDS
from .serialization import load_model, load_pretrained_embeddings, save_model
from .train import TrainConfig, train

log = logging.getLogger("bilstm_crf")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--train", required=True, help="BIO training file")
    p.add_argument("--dev", help="BIO development file (enables best-dev checkpoint)")
    p.add_argument("--model-out", required=True, help="path of the final model file")
    p.add_argument("--best-model-out", help="best-dev checkpoint path (default: <model-out>.best)")
    p.add_argument("--history-out", help="write per-epoch log as TSV")
    p.add_argument("--embed-dim", type=int, default=d.embed_dim)
    p.add_argument("--hidden-dim", type=int, default=d.hidden_dim)
    p.add_argument("--max-len", type=int, default=d.max_len)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--dropout", type=float, default=d.dropout)
    p.add_argument("--optimizer", choices=KINDS, default=d.optimizer)
    p.add_argument("--lr", type=float, default=None,
                   help="learning rate (default: adam 0.001, rmsprop 0.001, gd 0.01)")
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--hard-bio-constraints", action="store_true")
    p.add_argument("--linear-projection", action="store_true",
                   help="unbounded linear emission layer instead of tanh")
    p.add_argument("--min-count", type=int, default=d.min_count)
    p.add_argument("--clip-norm", type=float, default=None)
    p.add_argument("--lr-decay", type=float, default=None,
                   help="multiply the learning rate by this factor every epoch")
    p.add_argument("--stop-at-dev-f1", type=float, default=None)
    p.add_argument("--dtype", choices=("float32", "float64"), default=d.dtype)
    p.add_argument("--pretrained-embeddings", help="text file of '<char> v1 ... vE' lines")
    p.add_argument("--labels", help="comma-separated label inventory (default: 11 BIO labels)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bilstm-crf", description="Character BiLSTM-CRF sequence labeler")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _add_train_args(sub.add_parser("train", help="train a model"))

    p = sub.add_parser("eval", help="score a model on a labeled file")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--report-out", help="write key=value metrics here")
    p.add_argument("--hard-bio-constraints", action="store_true",
                   help="mask invalid BIO transitions at decode time")

    p = sub.add_parser("tag", help="label raw text or an unlabeled column file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="output path (default: stdout)")
    p.add_argument("--format", choices=("auto", "text", "column"), default="auto")
    p.add_argument("--hard-bio-constraints", action="store_true")

    p = sub.add_parser("check", help="run the built-in oracle suite")
    p.add_argument("--crf-instances", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config_from_args(args) -> TrainConfig:
    try:
        return TrainConfig(
            embed_dim=args.embed_dim, hidden_dim=args.hidden_dim, max_len=args.max_len,
            epochs=args.epochs, batch_size=args.batch_size, dropout=args.dropout,
            optimizer=args.optimizer, lr=args.lr, seed=args.seed,
            hard_bio_constraints=args.hard_bio_constraints,
            linear_projection=args.linear_projection, min_count=args.min_count,
            clip_norm=args.clip_norm, lr_decay=args.lr_decay,
            stop_at_dev_f1=args.stop_at_dev_f1, dtype=args.dtype,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_train(args) -> int:
    config = _config_from_args(args)
    try:
        config.optimizer_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    label_set = LabelSet(args.labels.split(",")) if args.labels else LabelSet()
    train_sents = read_bio(args.train, label_set)
    dev_sents = read_bio(args.dev, label_set) if args.dev else None
    log.info("%d training sentences, %d dev sentences", len(train_sents), len(dev_sents or []))

    hook = None
    if args.pretrained_embeddings:
        def hook(model):
            n = load_pretrained_embeddings(args.pretrained_embeddings, model.vocab,
                                           model.params["embedding"])
            log.info("loaded %d pretrained character vectors", n)

    result = train(train_sents, config, dev_sents, label_set, init_hook=hook)
    meta = {"config": config.to_dict(), "epochs_run": len(result.history)}
    save_model(result.model, args.model_out, meta)
    log.info("saved final model to %s", args.model_out)
    best = result.best_model()
    if best is not None:
        path = args.best_model_out or f"{args.model_out}.best"
        save_model(best, path, dict(meta, best_epoch=result.best_epoch,
                                    best_dev_f1=result.best_dev_f1))
        log.info("saved best-dev model (epoch %d, F1 %.4f) to %s",
                 result.best_epoch, result.best_dev_f1, path)
    if args.history_out:
        with open(args.history_out, "w", encoding="utf-8") as f:
            f.write("epoch\tloss\tlr\tdev_f1\n")
            for e in result.history:
                f.write(f"{e.epoch}\t{e.loss!r}\t{e.lr!r}\t{'' if e.dev_f1 is None else repr(e.dev_f1)}\n")
    return EXIT_OK


def _load_for_decoding(args):
    model = load_model(args.model)
    if args.hard_bio_constraints:
        model.hard_bio_constraints = True
    return model


def cmd_eval(args) -> int:
    model = _load_for_decoding(args)
    try:
        gold = read_bio(args.test, model.label_set)
    except CorpusError as exc:
        raise CorpusError(f"{args.test} does not match the model's label set: {exc}") from exc
    pred = model.tag([s.chars for s in gold]) if gold else []
    report = score_labels([s.labels for s in gold], pred, model.label_set.entity_types)
    sys.stdout.write(format_report(report))
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8") as f:
            f.write(format_kv(report))
    return EXIT_OK


def read_untagged(path, fmt: str = "auto") -> list[list[str]]:
    """Character sequences from raw text (one sentence per line) or column format.

    Column input may carry a label column, which is ignored. Whitespace is
    dropped from raw text lines; empty lines are skipped with a warning.
    """
    with open(path, encoding="utf-8") as f:
        lines = [line.rstrip("\r\n") for line in f]
    content = [l for l in lines if l.strip() and not l.startswith("#")]
    if fmt == "auto":
        is_column = bool(content) and all(len(l.replace("\t", " ").split(" ")[0]) == 1 for l in content)
        fmt = "column" if is_column else "text"
    seqs: list[list[str]] = []
    if fmt == "column":
        cur: list[str] = []
        for line in lines:
            if not line.strip():
                if cur:
                    seqs.append(cur)
                    cur = []
            elif not line.startswith("#"):
                token = line.replace("\t", " ").split(" ")[0]
                if len(token) != 1:
                    raise CorpusError(f"token {token!r} is not a single character")
                cur.append(token)
        if cur:
            seqs.append(cur)
        return seqs
    for lineno, line in enumerate(lines, 1):
        chars = [ch for ch in line if not ch.isspace()]
        if not chars:
            log.warning("%s:%d: empty line skipped", path, lineno)
            continue
        seqs.append(chars)
    return seqs


def cmd_tag(args) -> int:
    model = _load_for_decoding(args)
    seqs = read_untagged(args.input, args.format)
    labels = model.tag(seqs) if seqs else []
    text = serialize_bio(LabeledSentence(c, l) for c, l in zip(seqs, labels))
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check(args) -> int:
    results = selfcheck.run_checks(args.crf_instances, args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "tag": cmd_tag, "check": cmd_check}


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("BILSTM_CRF_LOG_LEVEL", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (CorpusError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
