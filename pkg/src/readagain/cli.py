"""Command line: preprocess, train, summarize, evaluate, export-alpha, bench-decode.

Exit codes: 0 success, 2 I/O or format error, 3 numeric abort, 4 artifact mismatch.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

from . import text
from .text import Vocabulary

log = logging.getLogger("readagain")

EXIT_IO, EXIT_NUMERIC, EXIT_MISMATCH = 2, 3, 4


class CliError(Exception):
    def __init__(self, code, msg):
        super().__init__(msg)
        self.code = code


def _read_lines(path):
    try:
        with open(path, encoding="utf-8") as f:
            return f.read().splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise CliError(EXIT_IO, f"cannot read {path}: {e}") from e


def _open_out(path):
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot write {path}: {e}") from e


def _load_model(path, vocab_path=None):
    from .trainer import CheckpointError, load_checkpoint
    try:
        model, _ = load_checkpoint(path)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot read {path}: {e}") from e
    except CheckpointError as e:
        raise CliError(EXIT_MISMATCH, str(e)) from e
    if vocab_path is not None:
        try:
            vocab = Vocabulary.load(vocab_path)
        except OSError as e:
            raise CliError(EXIT_IO, f"cannot read {vocab_path}: {e}") from e
        except ValueError as e:
            raise CliError(EXIT_IO, str(e)) from e
        if vocab != model.vocab:
            raise CliError(EXIT_MISMATCH, f"{vocab_path} does not match the checkpoint vocabulary")
    return model


# -- commands -------------------------------------------------------------------

def cmd_preprocess(args):
    lines = _read_lines(args.inp)
    skipped = 0
    with _open_out(args.out) as out:
        for line in lines:
            if "\t" not in line:
                skipped += 1
                continue
            article, title = line.split("\t", 1)
            k = 2 if args.two_sent else 1
            sents = [text.preprocess(s) for s in text.leading_sentences(article, k)]
            sents = [s for s in sents if s]
            target = text.preprocess(title)
            if not sents or not target:
                skipped += 1
                continue
            out.write(text.format_example(text.Example(sents, target, article)) + "\n")
    if skipped:
        log.warning("skipped %d malformed or empty line(s)", skipped)
    return 0


def cmd_train(args):
    from .trainer import Diverged, TrainingConfig, save_checkpoint, train
    lines = _read_lines(args.corpus)
    try:
        corpus = [text.parse_line(line) for line in lines if line.strip()]
    except ValueError as e:
        raise CliError(EXIT_IO, f"{args.corpus}: {e}") from e
    if not corpus:
        raise CliError(EXIT_IO, f"{args.corpus}: no examples")
    vocab = text.build_vocab(corpus, args.vocab_size)
    try:
        cfg = TrainingConfig(
            d=args.dim, vocab_size=len(vocab), mode=args.mode, cell=args.cell,
            copy=not args.no_copy, epochs=args.epochs, batch_size=args.batch_size,
            lr0=args.lr, decay_after=None if args.no_decay else args.decay_after,
            clip=args.clip, dropout=args.dropout, seed=args.seed)
    except ValueError as e:
        raise CliError(EXIT_IO, str(e)) from e
    history_path = args.history or f"{args.out}.history.csv"
    try:
        model, history = train(cfg, corpus, vocab)
    except Diverged as e:
        save_checkpoint(e.model, args.out, cfg)
        e.history.to_csv(history_path)
        raise CliError(EXIT_NUMERIC, f"training diverged: {e}") from e
    except ValueError as e:
        raise CliError(EXIT_IO, str(e)) from e
    save_checkpoint(model, args.out, cfg)
    history.to_csv(history_path)
    return 0


def cmd_summarize(args):
    from .inference import summarize
    model = _load_model(args.ckpt, args.vocab)
    lines = _read_lines(args.inp)
    with _open_out(args.out) as out:
        for line in lines:
            sents = text.parse_source(line)
            if not sents:
                out.write("\n")
                continue
            if model.cfg.mode.startswith("multi") and len(sents) != 2:
                raise CliError(EXIT_IO, f"{model.cfg.mode} needs two sentences per line")
            out.write(summarize(model, sents, args.beam, args.max_len) + "\n")
    return 0


def cmd_evaluate(args):
    from .rouge import score_corpus
    cands = _read_lines(args.cand)
    refs = _read_lines(args.refs)
    if len(refs) < len(cands):
        raise CliError(EXIT_IO, f"{args.refs} has {len(refs)} lines for {len(cands)} candidates")
    ref_lists = [line.split("\t") for line in refs[: len(cands)]]
    scores = score_corpus(cands, ref_lists, capped=args.mode == "capped-recall")
    for name, s in scores.items():
        print(f"{name.upper()} {s.precision:.5f} {s.recall:.5f} {s.f1:.5f}")
    return 0


def cmd_export_alpha(args):
    from .inference import alpha_rows
    model = _load_model(args.ckpt)
    if model.cfg.mode != "gru":
        raise CliError(EXIT_MISMATCH, f"mode {model.cfg.mode!r} has no importance weights")
    lines = _read_lines(args.inp)
    with _open_out(args.out) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sentence_id", "position", "token", "mean_alpha"])
        for sid, line in enumerate(lines):
            sents = text.parse_source(line)
            if not sents:
                continue
            for pos, tok, a in alpha_rows(model, sents):
                w.writerow([sid, pos, tok, repr(a)])
    return 0


def cmd_bench_decode(args):
    from .rouge import REFERENCE_TIME_RATIO, bench_decode
    sizes = [int(v) for v in args.vocab_sizes.split(",")]
    res = bench_decode(sizes, d=args.dims, reps=args.reps, n_sources=args.sources,
                       steps=args.steps, seed=args.seed)
    print("vocab_size,seconds_per_sentence")
    for V, t in res.items():
        print(f"{V},{t:.6f}")
    lo, hi = min(sizes), max(sizes)
    print(f"# ratio t({hi})/t({lo}) = {res[hi] / res[lo]:.3f} "
          f"(published 69k/2k reference: {REFERENCE_TIME_RATIO:.3f})")
    return 0


def _positive(v):
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="readagain", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("preprocess", help="raw 'article<TAB>title' lines to a corpus TSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--two-sent", action="store_true", help="keep the first two sentences")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train")
    s.add_argument("--corpus", required=True)
    s.add_argument("--vocab-size", type=int, required=True)
    s.add_argument("--mode", choices=["gru", "lstm", "multi-concat", "multi-global"],
                   default="gru")
    s.add_argument("--cell", choices=["gru", "lstm"], default=None,
                   help="cell for the multi-sentence modes (default lstm)")
    s.add_argument("--dim", type=_positive, default=512)
    s.add_argument("--epochs", type=_positive, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--history", default=None)
    s.add_argument("--batch-size", type=_positive, default=64)
    s.add_argument("--lr", type=float, default=2.0)
    s.add_argument("--decay-after", type=int, default=5)
    s.add_argument("--no-decay", action="store_true")
    s.add_argument("--clip", type=float, default=10.0)
    s.add_argument("--dropout", type=float, default=0.2)
    s.add_argument("--no-copy", action="store_true", help="mask every copy slot")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("summarize")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--beam", type=_positive, default=10)
    s.add_argument("--max-len", type=_positive, default=30)
    s.add_argument("--vocab", default=None, help="vocabulary file that must match the checkpoint")
    s.set_defaults(func=cmd_summarize)

    s = sub.add_parser("evaluate")
    s.add_argument("--cand", required=True)
    s.add_argument("--refs", required=True)
    s.add_argument("--mode", choices=["f1", "capped-recall"], default="f1")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("export-alpha")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export_alpha)

    s = sub.add_parser("bench-decode")
    s.add_argument("--dims", type=_positive, default=128)
    s.add_argument("--vocab-sizes", default="2000,5000,15000,30000,64000")
    s.add_argument("--reps", type=_positive, default=3)
    s.add_argument("--sources", type=_positive, default=20)
    s.add_argument("--steps", type=_positive, default=15)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bench_decode)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        log.error("%s", e)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
