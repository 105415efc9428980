"""Word embeddings by weighted low-rank PSD approximation of a smoothed PMI
matrix, trained at scale with online blockwise ridge regression."""

from .blockwise import (
    BlockPlan,
    RegularizationSchedule,
    plan_blocks,
    ridge_solve_word,
    train_blockwise,
)
from .corpus import (
    CooccurrenceCounts,
    Vocabulary,
    build_vocabulary,
    count_cooccurrences,
    tokenize,
)
from .embeddings import WordVectors, read_word2vec, write_word2vec
from .estimator import PsdEmbedding
from .genmodel import (
    ModelHandle,
    ResidualView,
    bigram_joint,
    document_log_likelihood,
    pointwise_interaction,
    window_conditional,
)
from .psd_solver import BcdConfig, PsdFactor, bcd_solve, psd_approximate
from .stats import (
    pmi_target,
    smooth_bigrams,
    symmetrize,
    unigram_distribution,
    weight_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "BcdConfig",
    "BlockPlan",
    "CooccurrenceCounts",
    "ModelHandle",
    "PsdEmbedding",
    "PsdFactor",
    "RegularizationSchedule",
    "ResidualView",
    "Vocabulary",
    "WordVectors",
    "bcd_solve",
    "bigram_joint",
    "build_vocabulary",
    "count_cooccurrences",
    "document_log_likelihood",
    "plan_blocks",
    "pmi_target",
    "pointwise_interaction",
    "psd_approximate",
    "read_word2vec",
    "ridge_solve_word",
    "smooth_bigrams",
    "symmetrize",
    "tokenize",
    "train_blockwise",
    "unigram_distribution",
    "weight_matrix",
    "window_conditional",
    "write_word2vec",
]
