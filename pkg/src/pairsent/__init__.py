"""Unsupervised aspect-polarity classification from target-opinion pairs.

A document-level polarity classifier is trained without labels by
maximizing a lower bound on the likelihood of opinion words given target
words, extracted from dependency parses or co-occurrence windows. See the
corpus, extraction, model, training, evaluation, and synth modules; the
cli module ties them into a pipeline.
"""

from .corpus import (CorpusError, Document, EmbeddingTable, Sentence, Token,
                     Vocab, bow_features, build_vocab, feature_matrix,
                     load_corpus, load_embeddings, split_corpus)
from .evaluation import (EvaluationError, OpinionLexicon, evaluate_all,
                         evaluate_aspect, hungarian, lexicon_baseline,
                         majority_baseline)
from .extraction import (ExtractionError, WordPair, extract_all, load_pairs,
                         save_pairs, window_extract)
from .model import (Checkpoint, ModelError, OpinionModel, SentimentModel,
                    load_checkpoint, posterior, save_checkpoint)
from .synth import SynthConfig, SynthError, generate
from .training import (TrainConfig, TrainingError, elbo_exact,
                       elbo_negative_sampling, gradient_check,
                       score_function_grad, train)

__version__ = "0.1.0"

__all__ = [
    "Checkpoint", "CorpusError", "Document", "EmbeddingTable",
    "EvaluationError", "ExtractionError", "ModelError", "OpinionLexicon",
    "OpinionModel", "Sentence", "SentimentModel", "SynthConfig", "SynthError",
    "Token", "TrainConfig", "TrainingError", "Vocab", "WordPair",
    "bow_features", "build_vocab", "elbo_exact", "elbo_negative_sampling",
    "evaluate_all", "evaluate_aspect", "extract_all", "feature_matrix",
    "generate", "gradient_check", "hungarian", "lexicon_baseline",
    "load_checkpoint", "load_corpus", "load_embeddings", "load_pairs",
    "majority_baseline", "posterior", "save_checkpoint", "save_pairs",
    "score_function_grad", "split_corpus", "train", "window_extract",
    "__version__",
]
