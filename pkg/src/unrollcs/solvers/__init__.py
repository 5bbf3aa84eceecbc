from .classical import fista_run, ista_run, lasso_objective
from .trace import IterationTrace, trace_rows, trace_to_csv
from .unrolled import (
    FEATURES,
    MODEL_KINDS,
    Alista,
    AlistaAT,
    NaAlista,
    UnrolledModel,
    alista_at_forward,
    alista_forward,
    build_model,
    exemption_count,
    na_alista_forward,
    support_schedule,
    support_select_threshold,
)
from .verify import (
    BoundReport,
    assumption_ratio,
    oracle_threshold_run,
    step_size_interval,
    verify_error_bound,
    verify_lemma1,
)
