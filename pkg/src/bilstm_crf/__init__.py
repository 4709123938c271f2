"""Character-level BiLSTM-CRF sequence labeling in numpy."""

from .corpus import (
    DEFAULT_LABELS,
    CorpusError,
    EncodedBatch,
    LabeledSentence,
    LabelSet,
    Vocabulary,
    build_vocab,
    encode,
    parse_bio,
    read_bio,
    serialize_bio,
    validate_bio,
)
from .crf import TransitionModel, bio_constraint_mask, log_partition, nll_loss, viterbi_decode
from .metrics import extract_spans, format_report, score
from .model import BiLSTMCRF
from .nn_core import NumericError
from .serialization import load_model, save_model
from .train import TrainConfig, train

__version__ = "0.1.0"
