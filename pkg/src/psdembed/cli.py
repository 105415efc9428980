"""Command-line pipeline: count -> train -> evaluate, plus diagnostics.

Subcommands share one JSON config file; any flag given on the command line
overrides the corresponding config value. Training appends embeddings to the
output file block by block, so an interrupted run resumes at the last
completed block and still produces a byte-identical final file. Every
subcommand exits 0 on success and nonzero with a one-line
``ERROR <ClassName>: <message>`` on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .blockwise import (
    DEFAULT_PENALTY_TIERS,
    RegularizationSchedule,
    plan_blocks,
    train_blockwise,
)
from .corpus import (
    CooccurrenceCounts,
    Vocabulary,
    build_vocabulary,
    count_cooccurrences,
    iter_token_documents,
)
from .embeddings import append_word2vec_rows, read_partial_word2vec, read_word2vec
from .evaluation import (
    EvalReport,
    analogy_eval,
    load_analogy_dataset,
    load_similarity_dataset,
    similarity_eval,
)
from .genmodel import (
    ModelHandle,
    model_perplexity_report,
    pointwise_interaction,
    trigram_distribution,
)
from .psd_solver import BcdConfig, svd_trap_demo
from .stats import pmi_target, smooth_bigrams, unigram_distribution

__all__ = ["PipelineConfig", "main"]

VOCAB_FILE = "vocab.tsv"
COUNTS_FILE = "counts.tsv"
EMBEDDINGS_FILE = "embeddings.txt"


@dataclass
class PipelineConfig:
    """All pipeline settings; the JSON on disk mirrors these fields."""

    corpus: list = field(default_factory=list)
    workdir: str = "psdembed-work"
    min_count: int = 5
    max_vocab: int | None = None
    window: int = 5
    smoothing: float = 0.02
    cut_fraction: float = 0.0002
    rank: int = 100
    iterations: int = 5
    init_scale: float = 0.5
    convergence_tol: float = 1e-5
    core_size: int | None = None
    block_size: int = 50_000
    penalties: list | None = None
    jobs: int | None = None
    seed: int = 0

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(
                f"unknown config keys in {path}: {sorted(unknown)}"
            )
        config = cls(**data)
        config.validate()
        return config

    def validate(self) -> None:
        checks = [
            (self.min_count >= 1, "min_count must be >= 1"),
            (self.max_vocab is None or self.max_vocab >= 1,
             "max_vocab must be >= 1"),
            (self.window >= 1, "window must be >= 1"),
            (0.0 <= self.smoothing <= 1.0, "smoothing must lie in [0, 1]"),
            (0.0 < self.cut_fraction < 1.0,
             "cut_fraction must lie strictly between 0 and 1"),
            (self.rank >= 1, "rank must be >= 1"),
            (self.iterations >= 1, "iterations must be >= 1"),
            (self.convergence_tol >= 0, "convergence_tol must be >= 0"),
            (self.core_size is None or self.core_size >= 1,
             "core_size must be >= 1"),
            (self.block_size >= 1, "block_size must be >= 1"),
            (self.jobs is None or self.jobs >= 1, "jobs must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(f"invalid config: {message}")
        if self.penalties:
            for tier in self.penalties:
                if len(tier) != 2 or (tier[0] is not None and tier[0] <= 0) \
                        or tier[1] < 0:
                    raise ValueError(
                        f"invalid config: bad penalty tier {tier!r}"
                    )

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.dumps())

    def dumps(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    def schedule(self, core_size: int) -> RegularizationSchedule:
        if self.penalties is None:
            tiers = DEFAULT_PENALTY_TIERS
        elif not self.penalties:
            return RegularizationSchedule.zero()
        else:
            tiers = tuple((edge, value) for edge, value in self.penalties)
        return RegularizationSchedule.tiered(core_size, tiers)

    def resolved_jobs(self) -> int:
        return self.jobs if self.jobs else (os.cpu_count() or 1)


def _load_config(args) -> PipelineConfig:
    config = (PipelineConfig.load(args.config) if args.config
              else PipelineConfig())
    for name in PipelineConfig.__dataclass_fields__:
        value = getattr(args, name, None)
        if value is not None and value != []:
            setattr(config, name, value)
    config.validate()
    return config


def _workdir(config: PipelineConfig) -> Path:
    path = Path(config.workdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_count(config: PipelineConfig) -> int:
    if not config.corpus:
        raise ValueError("no corpus paths given (config 'corpus' or arguments)")
    for path in config.corpus:
        if not Path(path).exists():
            raise FileNotFoundError(f"corpus file not found: {path}")
    workdir = _workdir(config)
    tokens = (token for doc in iter_token_documents(config.corpus)
              for token in doc)
    vocab = build_vocabulary(tokens, min_count=config.min_count,
                             max_size=config.max_vocab)
    counts = count_cooccurrences(iter_token_documents(config.corpus),
                                 vocab, config.window)
    vocab.save_tsv(workdir / VOCAB_FILE)
    counts.save_tsv(workdir / COUNTS_FILE)
    print(f"vocabulary: {len(vocab)} words -> {workdir / VOCAB_FILE}")
    print(f"counts: {counts.pairs.nnz} distinct pairs, "
          f"total {counts.total_pairs:.0f} -> {workdir / COUNTS_FILE}")
    return 0


def _load_artifacts(workdir: Path):
    vocab = Vocabulary.load_tsv(workdir / VOCAB_FILE)
    counts = CooccurrenceCounts.load_tsv(workdir / COUNTS_FILE, vocab.counts)
    return vocab, counts


def _resume_state(path: Path, vocab, rank, groups):
    """Figure out which groups a partial embedding file already covers."""
    declared, words, matrix = read_partial_word2vec(path)
    if (declared != len(vocab) or matrix.shape[1] != rank
            or words != vocab.words[:len(words)]):
        return None
    done_rows = 0
    resume = {}
    core_vectors = None
    for k, group in enumerate(groups):
        if group.stop <= len(words):
            block = matrix[group.start:group.stop].T
            if k == 0:
                core_vectors = block
            else:
                resume[k] = block
            done_rows = group.stop
        else:
            break
    return done_rows, core_vectors, resume


def _truncate_rows(path: Path, header: str, keep_rows: int) -> None:
    with open(path, encoding="utf-8") as handle:
        handle.readline()
        lines = [handle.readline() for _ in range(keep_rows)]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(header)
        handle.writelines(lines)


def cmd_train(config: PipelineConfig) -> int:
    workdir = _workdir(config)
    vocab, counts = _load_artifacts(workdir)
    core_size = (len(vocab) if config.core_size is None
                 else min(config.core_size, len(vocab)))
    plan = plan_blocks(len(vocab), core_size, config.block_size)
    groups = plan.groups()
    solver_config = BcdConfig(rank=config.rank, iterations=config.iterations,
                              init_scale=config.init_scale,
                              convergence_tol=config.convergence_tol)
    out_path = workdir / EMBEDDINGS_FILE
    header = f"{len(vocab)} {config.rank}\n"

    core_vectors = None
    resume: dict[int, np.ndarray] = {}
    done_rows = 0
    if out_path.exists():
        state = _resume_state(out_path, vocab, config.rank, groups)
        if state is not None:
            done_rows, core_vectors, resume = state
            print(f"resuming: {done_rows} of {len(vocab)} rows already done")
    if out_path.exists() and done_rows > 0:
        _truncate_rows(out_path, header, done_rows)
    else:
        out_path.write_text(header, encoding="utf-8")

    writer_state = {"rows": done_rows}

    def on_group_done(index: int, block_vectors: np.ndarray) -> None:
        group = groups[index]
        if group.stop <= writer_state["rows"]:
            return
        append_word2vec_rows(out_path,
                             vocab.words[group.start:group.stop],
                             block_vectors.T)
        writer_state["rows"] = group.stop

    result = train_blockwise(
        counts, plan, config.schedule(core_size), solver_config,
        smoothing=config.smoothing, cut_fraction=config.cut_fraction,
        core_vectors=core_vectors, resume=resume,
        on_group_done=on_group_done, jobs=config.resolved_jobs(),
    )
    for step, error in enumerate(result.solver_errors, 1):
        print(f"core solver iteration {step}: weighted error {error:.6e}")
    print(f"embeddings: {len(vocab)} x {config.rank} -> {out_path}")
    return 0


def _parse_dataset_args(items):
    datasets = []
    for item in items or []:
        name, _, path = item.partition("=")
        if not path:
            name, path = Path(item).stem, item
        datasets.append((name, path))
    return datasets


def cmd_evaluate(config: PipelineConfig, args) -> int:
    workdir = _workdir(config)
    embeddings_path = args.embeddings or workdir / EMBEDDINGS_FILE
    vectors = read_word2vec(embeddings_path)
    report = EvalReport()
    for name, path in _parse_dataset_args(args.similarity):
        dataset = load_similarity_dataset(path)
        report.similarities.append(similarity_eval(vectors, dataset, name))
    for name, path in _parse_dataset_args(args.analogy):
        dataset = load_analogy_dataset(path)
        report.analogies.append(analogy_eval(vectors, dataset, name))
    if not report.similarities and not report.analogies:
        raise ValueError("no datasets given; use --similarity/--analogy")
    table = report.to_markdown()
    print(table, end="")
    out_path = Path(args.output) if args.output else workdir / "evaluation.md"
    out_path.write_text(table, encoding="utf-8")
    out_path.with_suffix(".tsv").write_text(report.to_tsv(), encoding="utf-8")
    print(f"report -> {out_path}")
    return 0


def cmd_svd_trap() -> int:
    print(svd_trap_demo().render())
    return 0


def cmd_diagnose(config: PipelineConfig, args) -> int:
    workdir = _workdir(config)
    vocab, counts = _load_artifacts(workdir)
    embeddings_path = args.embeddings or workdir / EMBEDDINGS_FILE
    vectors = read_word2vec(embeddings_path)
    if vectors.words != vocab.words:
        raise ValueError(
            "embedding file and vocabulary disagree; retrain or point "
            "--embeddings at the matching file"
        )
    unigrams = unigram_distribution(counts)
    smoothed = smooth_bigrams(counts, unigrams, config.smoothing)
    model = ModelHandle(vectors.matrix.T, unigrams,
                        pmi_target(smoothed, unigrams),
                        window=config.window, vocab=vocab)

    paths = args.corpus or config.corpus
    if not paths:
        raise ValueError("no corpus sample given for diagnostics")
    documents = [vocab.encode(tokens)
                 for tokens in iter_token_documents(paths)]
    documents = [doc for doc in documents if doc.size > 0]
    if not documents:
        raise ValueError("corpus sample contains no in-vocabulary tokens")
    rng = np.random.default_rng(config.seed)
    if args.max_docs and len(documents) > args.max_docs:
        chosen = rng.choice(len(documents), size=args.max_docs, replace=False)
        documents = [documents[i] for i in sorted(chosen)]

    report = model_perplexity_report(documents, model)
    out_path = workdir / "diagnostics.tsv"
    out_path.write_text(report.to_tsv(), encoding="utf-8")
    print(report.to_tsv(), end="")

    limit = min(20, len(vocab))
    try:
        joint = trigram_distribution(documents, limit)
        table, expectation = pointwise_interaction(joint)
        supported = table[~np.isnan(table)]
        print(f"pointwise interaction over top-{limit} trigrams: "
              f"expectation {expectation:+.6f}, "
              f"mean |value| {np.abs(supported).mean():.6f}, "
              f"{supported.size} supported outcomes")
    except ValueError as exc:
        print(f"pointwise interaction skipped: {exc}")
    print(f"diagnostics -> {out_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psdembed",
        description="Train and evaluate PMI-factorization word embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--workdir", help="artifact directory")

    p_count = sub.add_parser("count", help="build vocabulary and counts")
    add_common(p_count)
    p_count.add_argument("corpus", nargs="*", help="plain-text corpus files")
    p_count.add_argument("--min-count", dest="min_count", type=int)
    p_count.add_argument("--max-vocab", dest="max_vocab", type=int)
    p_count.add_argument("--window", type=int)

    p_train = sub.add_parser("train", help="train embeddings from counts")
    add_common(p_train)
    p_train.add_argument("--rank", type=int)
    p_train.add_argument("--iterations", type=int)
    p_train.add_argument("--core-size", dest="core_size", type=int)
    p_train.add_argument("--block-size", dest="block_size", type=int)
    p_train.add_argument("--smoothing", type=float)
    p_train.add_argument("--cut-fraction", dest="cut_fraction", type=float)
    p_train.add_argument("--penalties", type=json.loads,
                         help="JSON penalty tiers, e.g. '[[3.2,2],[null,8]]'"
                              " ('[]' disables regularization)")
    p_train.add_argument("--jobs", type=int)

    p_eval = sub.add_parser("evaluate", help="score similarity/analogy sets")
    add_common(p_eval)
    p_eval.add_argument("--embeddings", help="word2vec text file")
    p_eval.add_argument("--similarity", action="append", metavar="NAME=PATH")
    p_eval.add_argument("--analogy", action="append", metavar="NAME=PATH")
    p_eval.add_argument("--output", help="report path (markdown)")

    p_trap = sub.add_parser(
        "svd-trap",
        help="show truncated SVD flipping a correlation sign that the eigen "
             "route preserves",
    )
    add_common(p_trap)

    p_diag = sub.add_parser("diagnose", help="likelihood and interaction "
                                             "diagnostics on a corpus sample")
    add_common(p_diag)
    p_diag.add_argument("corpus", nargs="*", help="sample corpus files")
    p_diag.add_argument("--embeddings", help="word2vec text file")
    p_diag.add_argument("--max-docs", dest="max_docs", type=int, default=200)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "svd-trap":
            return cmd_svd_trap()
        config = _load_config(args)
        if args.command == "count":
            return cmd_count(config)
        if args.command == "train":
            return cmd_train(config)
        if args.command == "evaluate":
            return cmd_evaluate(config, args)
        if args.command == "diagnose":
            return cmd_diagnose(config, args)
        raise ValueError(f"unknown command {args.command!r}")
    except Exception as exc:  # surface one parsable line, nonzero exit
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
