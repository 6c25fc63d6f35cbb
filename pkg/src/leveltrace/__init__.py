"""Training-data attribution for a co-creative tile level designer.

The package trains a small convolutional net on recorded design sessions
(one optimizer step per training instance), charges every weight change to
the instance that caused it, and answers "which training level is most
responsible for what the agent just did?" with an actual level the user can
look at.
"""

from .attribution import (
    DeltaLedger,
    Explanation,
    MrinArrays,
    explain,
    finalize,
    load_mrin,
    most_activated_filter,
    most_responsible_instance,
    record_batch,
    save_mrin,
)
from .evalharness import (
    EvalReport,
    LabelErrorExample,
    build_icd,
    detect_label_errors,
    explainability_eval,
    labeling_error_eval,
)
from .neuralnet import (
    AdamConfig,
    NetworkConfig,
    NetworkParams,
    forward,
    init_params,
    load_model,
    mse_loss,
    predict,
    save_model,
)
from .overlap import OverlapResult, local_overlap_ratio, overlap_with_changes
from .service import CoCreateService, Suggestion, make_server, suggest
from .sessionlog import (
    Decision,
    Session,
    TrainingInstance,
    Turn,
    build_training_set,
    load_sessions,
    save_sessions,
    validate_session,
)
from .synthetic import InjectedError, SyntheticCorpus, SyntheticParams, gen_synthetic
from .tilegrid import Change, TileGrid, parse_text_level, render_text_level
from .training import TrainConfig, load_artifacts, save_artifacts, train_model

__version__ = "0.1.0"
