"""Clinical test records to labeled vectors, linear SVM diagnosis, and
diagnostic evaluation."""

__version__ = "0.1.0"

from .encoding import (  # noqa: E402
    EncodingSchema,
    FeatureSpec,
    LabeledDataset,
    LabelRule,
    encode_dataset,
    encode_record,
    standardize,
)
from .metrics import ConfusionMatrix, EvaluationSummary, confusion, summarize  # noqa: E402
from .qp import DualSolution, QpProblem, brute_force_dual, kkt_violation, solve_dual  # noqa: E402
from .report import ModelRegistry, diagnose  # noqa: E402
from .svm import (  # noqa: E402
    PartitionTree,
    SvmModel,
    decision_value,
    load_model,
    margin_distance,
    predict,
    predict_tree,
    save_model,
    train,
    train_partition_tree,
)
