"""Detection and attribution experiments for machine-generated text."""

from .classifier import (
    ClassifierModel,
    LabeledExample,
    TrainConfig,
    load_model,
    predict_scores,
    save_model,
    train,
    train_multi_seed,
)
from .corpus import (
    Document,
    GenerationRecord,
    GenParams,
    ModelCard,
    extract_prompt,
    load_documents,
    read_generations,
    write_generations,
)
from .errors import (
    GendetectError,
    InsufficientDataError,
    ParseError,
    SchemaError,
    TrainingError,
    ValidationError,
)
from .features import FeatureSpec, FeatureVector, Featurizer, featurize, unigram_entropy
from .filtering import (
    FilterPolicy,
    SplitSpec,
    contains_banned_phrase,
    filter_records,
    is_too_short,
    repetition_score,
    split_then_sample,
)
from .harness import (
    ExperimentConfig,
    SizeBinning,
    run_cross_matrix,
    run_experiment,
    run_family,
    run_paired,
    run_size_bin,
    run_source_id,
)
from .metrics import EvalReport, accuracy_with_std, auc_roc, confusion_matrix, macro_f1
from .toylm import (
    NGramLM,
    WatermarkParams,
    WatermarkVerdict,
    detect_watermark,
    generate,
    green_set,
    train_lm,
)

__version__ = "0.1.0"
