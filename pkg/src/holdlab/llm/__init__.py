"""Reward generation with a language model in the loop."""

from .feedback import (FEEDBACK_SCHEMA, TRAJECTORY_LIMIT, encode_feedback_json, feedback_document, results_summary,
                       truncate_trajectory, validate_feedback)
from .orchestrator import (REFINE_CAP, SYNTAX_RETRIES, Attempt, EvalOutcome, EvolveConfig, IterationRecord,
                           OrchestrationError, RefinerCriterion, RewardOrchestrator, TrainTestEvaluator, check_gate,
                           extract_program, load_records)
from .providers import (Exchange, HttpProvider, LlmProviderConfig, ProviderError, RecordingProvider, ReplayProvider,
                        make_provider)
from .templates import (TEMPLATE_IDS, PromptContext, PromptTemplate, TemplateError, audit_templates, load_template,
                        render_prompt)

__all__ = [
    "FEEDBACK_SCHEMA", "TRAJECTORY_LIMIT", "encode_feedback_json", "feedback_document", "results_summary",
    "truncate_trajectory", "validate_feedback", "REFINE_CAP", "SYNTAX_RETRIES", "Attempt", "EvalOutcome",
    "EvolveConfig", "IterationRecord", "OrchestrationError", "RefinerCriterion", "RewardOrchestrator",
    "TrainTestEvaluator", "check_gate", "extract_program", "load_records", "Exchange", "HttpProvider",
    "LlmProviderConfig", "ProviderError", "RecordingProvider", "ReplayProvider", "make_provider", "TEMPLATE_IDS",
    "PromptContext", "PromptTemplate", "TemplateError", "audit_templates", "load_template", "render_prompt",
]
