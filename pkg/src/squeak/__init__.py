"""Ridge-leverage-score dictionaries for Nystrom kernel approximation.

Sequential single-pass sampling, merge-tree sampling, Woodbury kernel ridge
regression, and dense oracles to check them.
"""

from .data import DataError, Dataset, load
from .dictionary import Dictionary, DictionaryEntry, DictionaryFormatError, deserialize, init_full, serialize
from .distributed import MergeTree, WorkAccount, build_tree, merge
from .kernels import EvalCounter, KernelSpec, column_on_support, evaluate, gram_matrix
from .nystrom import NystromModel, empirical_risk, fit_krr, nystrom_gap, predict
from .rls import (
    Estimator,
    RlsEstimate,
    clamp_min_estimate,
    effective_dimension,
    estimate_rls_merge,
    estimate_rls_sequential,
    exact_rls,
)
from .sampler import RngStream, ShrinkReport, dict_update, expand, sample_exact_rls
from .sequential import RunReport, SqueakConfig, qbar_from_theorem
from .validate import AccuracyReport, check_accuracy, lemma_suite, projection_error

__version__ = "0.1.0"
