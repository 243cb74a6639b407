"""Implicit-feedback matrix factorization with a TF-IDF content-similarity regularizer."""

from .data import (Dataset, InteractionEvent, Post, SyntheticScale, generate_synthetic,
                   load_dataset, save_dataset)
from .evaluation import (MetricReport, RelevanceRule, SplitSpec, rmse_mae, run_experiment_grid,
                         split, topk_f1)
from .factorization import (FactorModel, Hyperparams, TrainingReport, gradients, loss, predict,
                            train)
from .profiles import (NormalizationSpec, ProfileSelector, RatingMatrix, WeightTable,
                       build_rating_matrix, category_coverage, feedback_score)
from .similarity import (SimilarityMatrix, TfidfProfile, Vocabulary, build_similarity,
                         build_tfidf, cosine, tokenize)

__version__ = "0.1.0"
