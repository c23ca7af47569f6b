"""Command-line interface: `lexmdl <command> ...`.

Exit status is 0 on success, 1 on a usage error and 2 on a data error
(missing or malformed files, unparseable input).
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional


from . import __version__, kernels, phonology
from .channel import ChartError, ChannelTables
from .config import ConfigError, Settings, load_settings
from .corpus import (Alphabet, CorpusError, TextConfig, load_alphabet_file, load_gold_text,
                     load_phonemes, load_text, parse_phoneme_line, render_gold)
from .evaluation import EvaluationError, compression_report, parse_corpus, segmentation_report
from .lexicon import Lexicon, LexiconError, deserialize, serialize, word_cost
from .moves import TraceRow, train
from .multigram import ParseError, initial_lexicon
from .synth import corrupt, generate

_logger = logging.getLogger("lexmdl")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
DATA_ERRORS = (CorpusError, LexiconError, ParseError, ChartError, EvaluationError, ConfigError,
               OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value settings file (flags override it)")
    p.add_argument("--threads", type=int, help="worker threads for the E-step")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_corpus_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("text", "phoneme"), help="corpus type (default text)")
    p.add_argument("--alphabet", help="fixed alphabet file, one glyph per line")
    p.add_argument("--lines", action="store_const", const=True,
                   help="treat every line as an utterance")
    p.add_argument("--no-case-fold", dest="case_fold", action="store_const", const=False)
    p.add_argument("--no-sentence-split", dest="sentence_split", action="store_const",
                   const=False)


def _add_channel_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--channel", dest="channel", action="store_const", const=True,
                   help="noisy phone matching (default in phoneme mode)")
    g.add_argument("--no-channel", dest="channel", action="store_const", const=False)
    p.add_argument("--prune-budget", type=float, help="beam budget (0 = exhaustive)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lexmdl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="learn a lexicon from a corpus")
    p.add_argument("corpus")
    p.add_argument("--iters", type=int, help="maximum outer iterations (default 15)")
    p.add_argument("--em-iters", type=int, help="EM passes per stage (default 3)")
    p.add_argument("--em-mode", choices=("complete", "viterbi"))
    p.add_argument("--out", default="lexicon.tsv", help="lexicon output path")
    p.add_argument("--log", default="dl_trace.tsv", help="description-length trace path")
    p.add_argument("--overhead-bits", type=float, help="extra bits per nonterminal")
    p.add_argument("--audit", action="store_const", const=True,
                   help="check every move against a recomputed description length")
    _add_corpus_opts(p)
    _add_channel_opts(p)
    _add_common(p)

    p = sub.add_parser("segment", help="print segmentations of a corpus")
    p.add_argument("lexicon")
    p.add_argument("corpus")
    p.add_argument("--deep", action="store_true", help="print full bracketings")
    _add_corpus_opts(p)
    _add_channel_opts(p)
    _add_common(p)

    p = sub.add_parser("eval", help="compression and segmentation metrics")
    p.add_argument("lexicon")
    p.add_argument("corpus")
    p.add_argument("--gold", help="gold segmentation file ('|' between regions)")
    p.add_argument("--held-out", action="store_true", help="corpus was not used in training")
    p.add_argument("--out", help="write the TSV report here instead of stdout")
    _add_corpus_opts(p)
    _add_channel_opts(p)
    _add_common(p)

    p = sub.add_parser("inspect", help="ranked table of lexicon entries")
    p.add_argument("lexicon")
    p.add_argument("--top", type=int, help="show only the N most frequent words")
    p.add_argument("--all", action="store_true", help="include terminals")
    _add_common(p)

    p = sub.add_parser("synth", help="sample a corpus from a known lexicon")
    p.add_argument("--lexicon", required=True,
                   help="lexicon file, or lines of 'surface<TAB>weight'")
    p.add_argument("--n", type=int, default=1000, help="number of utterances")
    p.add_argument("--mean-words", type=float, default=6.0, help="mean words per utterance")
    p.add_argument("--corrupt", action="store_true", help="pass phonemes through the channel")
    p.add_argument("--out", help="corpus output path (default stdout)")
    p.add_argument("--gold-out", help="write gold segmentations here")
    p.add_argument("--mode", choices=("text", "phoneme"))
    _add_common(p)

    p = sub.add_parser("channel-score", help="log2 p(phones | phonemes) and best alignment")
    p.add_argument("--pi", required=True, help="underlying phonemes, space separated")
    p.add_argument("--phi", required=True, help="surface phones, space separated")
    _add_common(p)

    p = sub.add_parser("phones", help="phone inventory and feature chart")
    p.add_argument("--dump", action="store_true", help="print the full feature chart")
    _add_common(p)
    return parser


def _settings(args) -> Settings:
    keys = ("mode", "iters", "em_iters", "em_mode", "threads", "seed", "overhead_bits",
            "audit", "channel", "prune_budget", "case_fold", "sentence_split", "lines")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    return load_settings(getattr(args, "config", None), overrides)


def _load_corpus(path, settings: Settings, alphabet: Optional[Alphabet] = None,
                 alphabet_file: Optional[str] = None):
    if settings.mode == "phoneme":
        alpha, utts, gold = load_phonemes(path)
        return alpha, utts, gold
    fixed = load_alphabet_file(alphabet_file) if alphabet_file else None
    cfg = TextConfig(settings.case_fold, settings.sentence_split, settings.lines, fixed)
    alpha, utts = load_text(path, cfg, alphabet)
    return alpha, utts, [None] * len(utts)


def _mode_from_lexicon(args, lex: Lexicon) -> None:
    if getattr(args, "mode", None) is None:
        args.mode = lex.mode


# -- commands ------------------------------------------------------------------
def cmd_train(args) -> int:
    settings = _settings(args)
    alphabet, utts, _ = _load_corpus(args.corpus, settings, alphabet_file=args.alphabet)
    if not utts:
        raise CorpusError(f"{args.corpus}: no utterances")
    lex = initial_lexicon(alphabet, utts, settings.overhead_bits)
    channel = settings.make_channel()
    _logger.info("training on %d utterances (%s mode, channel %s, %s kernels)", len(utts),
                 settings.mode, "on" if channel else "off", kernels.BACKEND)
    with open(args.log, "w", encoding="utf-8") as trace_file:
        trace_file.write("\t".join(TraceRow.HEADER) + "\n")

        def log_row(row: TraceRow) -> None:
            trace_file.write(row.as_tsv() + "\n")
            trace_file.flush()

        lex, trace, audit = train(lex, utts, settings.move_config(), channel, log_row)
    serialize(lex, args.out)
    if audit:
        helped = sum(1 for a in audit if a.helped)
        _logger.info("audit: %d of %d accepted moves reduced the description length",
                     helped, len(audit))
    last = trace[-1]
    print(f"{len(lex)} words, {last.total_bits:.2f} bits "
          f"(input {last.input_bits:.2f}, dictionary {last.dictionary_bits:.2f})")
    return EXIT_OK


def cmd_segment(args) -> int:
    lex = deserialize(args.lexicon)
    _mode_from_lexicon(args, lex)
    settings = _settings(args)
    _, utts, _ = _load_corpus(args.corpus, settings, alphabet=lex.alphabet)
    channel = settings.make_channel()
    for seg in parse_corpus(lex, utts, channel):
        print(seg.render(lex, deep=args.deep))
    return EXIT_OK


def cmd_eval(args) -> int:
    lex = deserialize(args.lexicon)
    _mode_from_lexicon(args, lex)
    settings = _settings(args)
    _, utts, corpus_gold = _load_corpus(args.corpus, settings, alphabet=lex.alphabet)
    channel = settings.make_channel()
    report = compression_report(lex, utts, args.held_out, channel, settings.cost)
    rows = [("metric", "value")] + report.rows()
    gold_utts, gold = None, None
    if args.gold:
        if settings.mode == "phoneme":
            _, gold_utts, gold = load_phonemes(args.gold)
        else:
            gold_utts, gold = load_gold_text(args.gold, lex.alphabet,
                                             TextConfig(settings.case_fold))
    elif any(g is not None for g in corpus_gold):
        gold_utts = [u for u, g in zip(utts, corpus_gold) if g is not None]
        gold = [g for g in corpus_gold if g is not None]
    if gold is not None:
        if any(g is None for g in gold):
            raise CorpusError(f"{args.gold}: every line needs '|' region marks")
        seg = segmentation_report(parse_corpus(lex, gold_utts, channel), gold)
        rows += seg.rows()
    text = "\n".join("\t".join(r) for r in rows) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_inspect(args) -> int:
    lex = deserialize(args.lexicon)
    words = [w for w in lex if args.all or not w.is_terminal]
    words.sort(key=lambda w: (w.code_len, w.id))
    if args.top:
        words = words[:args.top]
    print("rank\t-log2 p\t|rep|\tcount\trep")
    for rank, w in enumerate(words, start=1):
        code = f"{w.code_len:.2f}" if math.isfinite(w.code_len) else "inf"
        cost = word_cost(lex, w.id)
        cost_text = f"{cost:.2f}" if math.isfinite(cost) else "inf"
        print(f"{rank}\t{code}\t{cost_text}\t{w.count:.2f}\t{lex.bracketed(w.id)}")
    return EXIT_OK


def _load_true_lexicon(path, mode: Optional[str]):
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("# lexmdl lexicon"):
        lex = deserialize(path)
        return lex.alphabet, [(w.surface, w.count) for w in lex if w.count > 0]
    mode = mode or "text"
    alphabet = Alphabet.phonemes() if mode == "phoneme" else Alphabet([])
    entries = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        surface, _, weight = line.rpartition("\t")
        if not surface:
            raise CorpusError(f"{path}: line {n}: expected 'surface<TAB>weight'")
        try:
            w = float(weight)
        except ValueError:
            raise CorpusError(f"{path}: line {n}: bad weight {weight!r}") from None
        if mode == "phoneme":
            ids, _ = parse_phoneme_line(surface, n)
        else:
            ids = tuple(alphabet.add(c) for c in surface)
        entries.append((ids, w))
    if not entries:
        raise CorpusError(f"{path}: no entries")
    return alphabet, entries


def cmd_synth(args) -> int:
    settings = _settings(args)
    alphabet, entries = _load_true_lexicon(args.lexicon, args.mode)
    mean = args.mean_words
    utts, gold = generate(entries, args.n, lambda rng: int(rng.geometric(1.0 / mean)),
                          settings.seed)
    if args.corrupt:
        if alphabet.mode != "phoneme":
            raise CorpusError("--corrupt needs a phoneme lexicon")
        utts, gold = corrupt(utts, settings.channel_params(), settings.seed, gold)
    lines = [alphabet.render(u) for u in utts]
    out = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    if args.gold_out:
        from .corpus import Utterance
        gold_lines = [render_gold(alphabet, Utterance(tuple(u)), g) for u, g in zip(utts, gold)]
        Path(args.gold_out).write_text("\n".join(gold_lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_channel_score(args) -> int:
    settings = _settings(args)
    try:
        pi = [phonology.lookup_symbol(t) for t in args.pi.split()]
        phi = [phonology.lookup_symbol(t) for t in args.phi.split()]
    except KeyError as exc:
        raise CorpusError(f"unknown phoneme {exc.args[0]!r}") from None
    if not pi:
        raise CorpusError("--pi must name at least one phoneme")
    tables = ChannelTables(settings.channel_params())
    p = tables.phi_given_pi(pi, phi)
    best, path = tables.best_alignment(pi, phi)
    print(f"log2_p\t{math.log2(p) if p > 0 else float('-inf'):.6f}")
    print(f"best_log2_p\t{math.log2(best) if best > 0 else float('-inf'):.6f}")
    steps = []
    for action, phone in path:
        steps.append(action if phone is None else f"{action}:{phonology.SYMBOLS[phone]}")
    print("alignment\t" + " ".join(steps))
    return EXIT_OK


def cmd_phones(args) -> int:
    if args.dump:
        sys.stdout.write(phonology.dump_chart())
    else:
        print(" ".join(phonology.SYMBOLS))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "segment": cmd_segment, "eval": cmd_eval,
            "inspect": cmd_inspect, "synth": cmd_synth, "channel-score": cmd_channel_score,
            "phones": cmd_phones}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        level = logging.WARNING - 10 * min(2, args.verbose)
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"lexmdl: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:      # parameter validation
        print(f"lexmdl: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
