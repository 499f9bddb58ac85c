"""refprog: verification-first referring-expression programs.

Parse and validate a small operator language, execute it over precomputed
scene records with per-operator verification and explicit no-target answers,
and evaluate with target-present / target-absent metrics.
"""

from .errors import (
    ConsistencyError,
    DomainError,
    EngineError,
    InternalError,
    MissingEntry,
    SchemaError,
    TransportError,
    UnrecognizedPosition,
)
from .evaluation import (
    ConfusionCounts,
    EvalItem,
    ExecSettings,
    ItemResult,
    MetricsReport,
    Timing,
    acc_at_05_plus_n,
    evaluate_items,
    load_items,
    run_batch,
    score,
    stiou,
)
from .interp import (
    ExecutionTrace,
    PositionTable,
    StepRecord,
    Verdict,
    default_bank,
    default_positions,
    execute,
)
from .ops import (
    Criteria,
    FINAL_TARGET,
    Number,
    OperatorKind,
    Program,
    Statement,
    StringLiteral,
    VariableRef,
    schema_of,
)
from .parser import ParseError, ParseErrorKind, ProgramSyntaxError, parse_program, serialize_program
from .progen import (
    CannedSource,
    ChatEndpoint,
    Exemplar,
    GenFailure,
    GenSuccess,
    HttpChatEndpoint,
    LlmSource,
    PromptTemplate,
    ScriptedEndpoint,
    default_template,
    extract_program_block,
    generate_program,
    load_canned,
)
from .scene import (
    Box,
    NoTarget,
    Outcome,
    Proposal,
    Scene,
    TargetBox,
    iou,
    load_scene,
    lookup_detections,
    save_scene,
)
from .validator import Diagnostic, Rule, render_feedback, validate_program
from .verify import (
    CategoryBank,
    ThresholdTable,
    VerifyConfig,
    calibrate_table,
    calibrate_threshold,
    load_aux_scores,
    load_threshold_table,
    property_filter,
    save_threshold_table,
    uv_filter,
    uv_score,
)

__version__ = "0.1.0"
