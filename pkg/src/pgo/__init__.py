"""Profile-guided cold-start optimizer for serverless Python applications.

Pipeline: merge sampled profiles, build a calling context tree, break down
initialization cost, flag libraries that are expensive to load but barely
used, rewrite their global imports into deferred imports, and re-trigger the
whole loop when the workload's entry-point mix shifts.
"""

from .adaptive import TriggerDecision, TriggerTimeline, Window, delta, probabilities, run_stream
from .cct import (
    CCT,
    CctNode,
    LibraryStats,
    PathMapping,
    attribute_library,
    build_cct,
    classify_phase,
    escalate,
    library_stats,
)
from .config import Config, load_config
from .detector import DetectorConfig, Finding, detect, render_report
from .init_tree import GateResult, InitNode, build_init_tree, gate
from .profile_model import (
    CallFrame,
    ImportTiming,
    InvocationEvent,
    ProfileStore,
    StackSample,
    parse_record,
    serialize_record,
    validate_and_merge,
)
from .rewriter import RewritePlan, apply, plan, scan_imports, verify

__version__ = "0.1.0"
