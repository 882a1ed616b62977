"""Error-oriented word embedding pre-training and convolutional scoring
of learner scripts, with a synthetic corpus generator for desk-scale
experiments."""

__version__ = "0.1.0"

from .aa import (
    AaModel,
    AaModelConfig,
    AaTrainConfig,
    aa_batch_loss_grads,
    aa_forward,
    predict,
    train_aa,
)
from .backend import backend_name
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .corpus import (
    CorpusStats,
    NgramInstance,
    Script,
    Token,
    build_corrected_script,
    compute_stats,
    extract_ngrams,
    generate_synthetic_corpus,
    load_corpus,
    parse_annotated_script,
    render_annotated,
    save_corpus,
    tokenize,
)
from .embeddings import (
    EmbeddingMatrix,
    Vocabulary,
    build_vocab,
    init_random,
    load_text_vectors,
    lookup_ngram,
    save_text_vectors,
)
from .metrics import (
    ApReport,
    EvalReport,
    average_precision,
    binary_ngram_labels,
    eswe_errorness,
    pearson,
    rmse,
    spearman,
    sswe_errorness,
)
from .numeric import GradCheckReport, finite_diff_check, sgd_update, uniform_init
from .pretrain import (
    EsweModel,
    PretrainConfig,
    SsweModel,
    eswe_batch_loss_grads,
    eswe_forward,
    sample_noisy,
    sswe_batch_loss_grads,
    sswe_forward,
    train_ecswe,
    train_eswe,
    train_sswe,
)
