"""parseqa: quality assessment toolkit for document-parsing output.

Synthesizes labeled parsing-error corpora (rule-based and LLM-guided),
renders checklist judge prompts, parses judge verdicts, scores them with
case/type metrics and an asymmetric reward, and checks alignment against
objective metrics (normalized edit distance, TEDS/S-TEDS).
"""

__version__ = "0.1.0"

from .taxonomy import (  # noqa: F401
    CompatibilityPolicy,
    ElementKind,
    ErrorType,
    ExclusivityClass,
    SynthesisMode,
    all_error_levels,
    all_error_types,
    compatible,
    error_type_by_id,
    resolve_error_type,
)
from .corpus import (  # noqa: F401
    ElementRecord,
    ParsingCase,
    PerturbationReceipt,
    canonically_equal,
    compute_stats,
    normalize_text,
    read_cases,
    read_records,
    write_cases,
    write_records,
)
from .cocl import JudgeOutput, parse_judge_output, render_checklist  # noqa: F401
from .composer import PAPER_TARGET, DistributionTarget, compose_case, sample_plan  # noqa: F401
from .metrics import CaseJudgment, build_report, case_f1, pass_at_k, type_prf  # noqa: F401
from .reward import RewardScore, asymmetric_reward, f1_reward  # noqa: F401
from .objective import alignment_report, edit_distance_norm, levenshtein, teds  # noqa: F401
