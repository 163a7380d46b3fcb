"""Command line entry point.

Thread caps are applied to the BLAS environment before numpy is ever
imported, so every numeric module is loaded lazily inside the
subcommand handlers.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.mlse"
BPE_PREFIX = "bpe."
LOG_NAME = "train_log.tsv"
CURVES_NAME = "training_curves.png"
MATRIX_TSV = "error_matrix.tsv"
MATRIX_PNG = "error_matrix.png"

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_threads(n: int):
    if n < 1:
        raise ValueError("--threads must be >= 1")
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def _configure_logging():
    name = os.environ.get("MLSE_LOG", "error").lower()
    if name not in _LOG_LEVELS:
        raise ValueError(f"MLSE_LOG must be one of {sorted(_LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=_LOG_LEVELS[name], format="%(levelname)s %(name)s: %(message)s")


def _read_lines(path) -> list:
    from .corpus import CorpusError

    with open(path, "r", encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f]
    for i, line in enumerate(lines):
        if not line.strip():
            raise CorpusError(f"{path}:{i + 1}: empty line")
    return lines


def _ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_gen_synth(args) -> int:
    from . import corpus
    from .config import write_manifest

    out = _ensure_dir(args.output)
    synth = corpus.gen_synthetic(
        seed=args.seed,
        n_languages=args.languages,
        n_rows=args.rows,
        vocab_size=args.vocab,
        swap_prob=args.swap_prob,
    )
    meta = {
        "seed": str(args.seed),
        "rows": str(synth.size),
        "vocab": str(args.vocab),
        "swap_prob": str(args.swap_prob),
    }
    corpus.write_corpus(synth, out / "synth", metadata=meta)
    write_manifest(out, "gen-synth", None, args.seed, extra={"options": meta})
    print(f"wrote {synth.size} rows x {len(synth.languages)} languages under {out}/synth.*")
    return 0


def cmd_bpe_learn(args) -> int:
    from . import bpe
    from .config import write_manifest

    texts: list = []
    for path in args.inputs:
        texts.extend(_read_lines(path))
    model = bpe.learn_merges(texts, args.merges)
    bpe.save_model(model, args.output)
    write_manifest(
        Path(args.output), "bpe-learn", None, None,
        extra={"inputs": [str(p) for p in args.inputs], "merges": args.merges},
    )
    print(f"learned {len(model.merges)} merges, vocab {model.vocab_size} -> {args.output}")
    return 0


def cmd_bpe_apply(args) -> int:
    from . import bpe

    model = bpe.load_model(args.model)
    lines = _read_lines(args.input)
    encoded = [bpe.apply_merges(line, model) for line in lines]
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            for sent in encoded:
                f.write(" ".join(str(t) for t in sent.tokens) + "\n")
    else:
        for sent in encoded:
            print(" ".join(str(t) for t in sent.tokens))
    return 0


def _prepare_corpus(cfg, seed: int):
    from . import corpus

    if cfg.synthetic is not None:
        allowed = {"rows", "vocab", "swap_prob"}
        unknown = sorted(set(cfg.synthetic) - allowed)
        if unknown:
            raise ValueError(f"unknown keys in corpus.synthetic: {unknown}")
        full = corpus.gen_synthetic(
            seed=seed,
            n_languages=len(cfg.languages),
            n_rows=int(cfg.synthetic.get("rows", 5000)),
            vocab_size=int(cfg.synthetic.get("vocab", 100)),
            swap_prob=float(cfg.synthetic.get("swap_prob", 0.15)),
        )
        if full.languages != tuple(cfg.languages):
            raise ValueError(
                f"synthetic corpora name languages {full.languages}; "
                f"config declares {cfg.languages}"
            )
    else:
        full = corpus.load_parallel({lang: cfg.corpus_train[lang] for lang in cfg.languages})
    full = corpus.filter_corpus(full, max_len=cfg.max_len)
    return corpus.split_dev(full, cfg.dev_size, seed)


def cmd_train(args) -> int:
    from . import bpe
    from .config import load_config, write_manifest
    from .report import save_training_curves
    from .seq2seq import init_model, run_training, save_checkpoint

    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    out = _ensure_dir(args.output)
    train_corpus, dev_corpus = _prepare_corpus(cfg, seed)
    log.info("corpus: %d train rows, %d dev rows", train_corpus.size, dev_corpus.size)

    bpe_models = {}
    train_rows = {}
    dev_rows = {}
    for lang in cfg.languages:
        model = bpe.learn_merges(train_corpus.texts[lang], cfg.bpe_merges)
        bpe.save_model(model, out / f"{BPE_PREFIX}{lang}")
        bpe_models[lang] = model
        train_rows[lang] = [bpe.apply_merges(t, model).tokens for t in train_corpus.texts[lang]]
        dev_rows[lang] = [bpe.apply_merges(t, model).tokens for t in dev_corpus.texts[lang]]

    schedule = cfg.build_schedule()
    model = init_model(
        cfg.languages,
        cfg.encoder,
        cfg.decoder,
        {lang: bpe_models[lang].vocab_size for lang in cfg.languages},
        seed,
    )
    with open(out / LOG_NAME, "w", encoding="utf-8") as log_stream:
        model, records = run_training(
            model,
            train_rows,
            dev_rows,
            schedule,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            lr=cfg.lr,
            clip=cfg.clip,
            lr_min=cfg.lr_min,
            seed=seed,
            eval_sim=cfg.eval_sim,
            sim_metric=cfg.metric,
            log_stream=log_stream,
        )
    save_checkpoint(out / CHECKPOINT_NAME, model)
    save_training_curves(records, out / CURVES_NAME)
    write_manifest(out, "train", cfg.to_dict(), seed)
    last = records[-1]
    sim = "-" if last.dev_sim_error is None else f"{100.0 * last.dev_sim_error:.2f}%"
    print(f"trained {last.epoch} epochs; final train loss {last.train_loss:.4f}, dev error {sim}")
    return 0


def cmd_embed(args) -> int:
    from . import bpe
    from .config import write_manifest
    from .seq2seq import encode_corpus, load_checkpoint
    from .simsearch import EmbeddingMatrix, save_embeddings

    run_dir = Path(args.run_dir)
    model = load_checkpoint(run_dir / CHECKPOINT_NAME)
    model.check_language(args.lang)
    bpe_model = bpe.load_model(run_dir / f"{BPE_PREFIX}{args.lang}")
    lines = _read_lines(args.input)
    rows = [bpe.apply_merges(line, bpe_model).tokens for line in lines]
    data = encode_corpus(model, rows, args.lang)
    save_embeddings(args.output, EmbeddingMatrix(args.lang, data))
    write_manifest(
        Path(args.output), "embed", None, None,
        extra={"run_dir": str(run_dir), "lang": args.lang, "input": str(args.input)},
    )
    print(f"embedded {data.shape[0]} sentences at dimension {data.shape[1]} -> {args.output}")
    return 0


def cmd_eval_sim(args) -> int:
    from .config import write_manifest
    from .report import format_error_matrix, save_error_heatmap
    from .simsearch import load_embeddings, similarity_error_matrix

    if len(args.embeddings) < 2:
        raise ValueError("eval-sim needs at least two embedding files")
    mats = {}
    for path in args.embeddings:
        lang = Path(path).stem
        if lang in mats:
            raise ValueError(f"duplicate language name {lang!r} among embedding files")
        mats[lang] = load_embeddings(path, lang)
    matrix = similarity_error_matrix(mats, metric=args.metric, block_size=args.block_size)
    text = format_error_matrix(matrix)
    out = _ensure_dir(args.output)
    with open(out / MATRIX_TSV, "w", encoding="utf-8") as f:
        f.write(text)
    save_error_heatmap(matrix, out / MATRIX_PNG)
    write_manifest(
        out, "eval-sim", None, None,
        extra={"embeddings": [str(p) for p in args.embeddings], "metric": args.metric},
    )
    sys.stdout.write(text)
    return 0


def cmd_query(args) -> int:
    from .report import format_topk
    from .simsearch import load_embeddings, topk_query

    queries = load_embeddings(args.queries)
    candidates = load_embeddings(args.candidates)
    if not 0 <= args.index < queries.rows:
        raise ValueError(f"--index {args.index} out of range [0, {queries.rows})")
    results = topk_query(queries.data[args.index], candidates, k=args.k, metric=args.metric)
    texts = _read_lines(args.text) if args.text else None
    if texts is not None and len(texts) != candidates.rows:
        raise ValueError(
            f"sidecar has {len(texts)} lines but candidates have {candidates.rows} rows"
        )
    table = format_topk(results, texts)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(table)
    else:
        sys.stdout.write(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlse",
        description="Joint multilingual sentence embeddings: train, export, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    threads = argparse.ArgumentParser(add_help=False)
    threads.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")

    p = sub.add_parser("gen-synth", parents=[threads], help="generate a synthetic parallel corpus")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--languages", type=int, default=3, help="number of languages")
    p.add_argument("--rows", type=int, default=5000)
    p.add_argument("--vocab", type=int, default=100, help="latent word inventory size")
    p.add_argument("--swap-prob", type=float, default=0.15, help="adjacent word swap rate")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("bpe-learn", parents=[threads], help="learn subword merges from text")
    p.add_argument("inputs", nargs="+", help="training text files")
    p.add_argument("--merges", type=int, default=200)
    p.add_argument("--output", required=True, help="model file to write")
    p.set_defaults(func=cmd_bpe_learn)

    p = sub.add_parser("bpe-apply", parents=[threads], help="tokenize text to id rows")
    p.add_argument("model", help="learned subword model file")
    p.add_argument("input", help="text file, one sentence per line")
    p.add_argument("--output", default=None, help="token file (default: stdout)")
    p.set_defaults(func=cmd_bpe_apply)

    p = sub.add_parser("train", parents=[threads], help="train a joint embedding model")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--output", required=True, help="run directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", parents=[threads], help="export sentence embeddings")
    p.add_argument("run_dir", help="training run directory")
    p.add_argument("lang", help="language to encode with")
    p.add_argument("input", help="text file, one sentence per line")
    p.add_argument("--output", required=True, help="embedding matrix file")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval-sim", parents=[threads], help="pairwise similarity-search errors")
    p.add_argument("embeddings", nargs="+", help="embedding files; names give the languages")
    p.add_argument("--metric", choices=["l2", "ip", "cosine"], default="cosine")
    p.add_argument("--block-size", type=int, default=4096)
    p.add_argument("--output", required=True, help="report directory")
    p.set_defaults(func=cmd_eval_sim)

    p = sub.add_parser("query", parents=[threads], help="top-k nearest sentences for one query")
    p.add_argument("queries", help="query embedding file")
    p.add_argument("candidates", help="candidate embedding file")
    p.add_argument("--index", type=int, default=0, help="query row")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--metric", choices=["l2", "ip", "cosine"], default="cosine")
    p.add_argument("--text", default=None, help="candidate sentence sidecar file")
    p.add_argument("--output", default=None, help="result file (default: stdout)")
    p.set_defaults(func=cmd_query)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None:
            _configure_threads(args.threads)
        _configure_logging()
        return args.func(args)
    except (ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if os.environ.get("MLSE_LOG", "").lower() == "debug":
            raise
        return 2


if __name__ == "__main__":
    sys.exit(main())
