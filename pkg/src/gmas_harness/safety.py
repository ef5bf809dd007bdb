"""System-level safety metrics across agents and runs.

All operations here are pure functions over records and embeddings; one
shared embedding backend per experiment keeps drift, consistency, and
conflict values comparable.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass
from fractions import Fraction

from .embeddings import EmbeddingVector, cosine, tokenize
from .knowledge import ContextBundle
from .records import AllocationPlan, CodeArtifact, RunRecord, SolutionPath
from .scenario import PIPELINE_ORDER, AgentRole

logger = logging.getLogger(__name__)

BASELINE_HANDOFFS = 4  # Planner -> Coordinator -> Allocator -> Coder -> Analyzer

_DOWNSTREAM_HANDOFFS = {role: len(PIPELINE_ORDER) - 1 - i
                        for i, role in enumerate(PIPELINE_ORDER)}

DRIFT_AGENT = AgentRole.CODER  # agent whose outputs define the cell-level drift sequence


_DSL_FILLER_TOKENS = {"prb", "to"}


def step_coverage(plan_text: str, code_text: str) -> float:
    """Fraction of plan statements whose operand tokens all appear in the code.

    A statement is a non-empty, non-comment plan line; its operands are the
    alphanumeric tokens after the leading keyword, minus the grammar fillers
    'prb' and 'to'. Directional by design.
    """
    code_tokens = set(tokenize(code_text))
    statements = [ln.strip() for ln in plan_text.splitlines()
                  if ln.strip() and not ln.strip().startswith("#")]
    if not statements:
        return 0.0
    covered = 0
    for stmt in statements:
        operands = [t for t in tokenize(stmt)[1:] if t not in _DSL_FILLER_TOKENS]
        if all(tok in code_tokens for tok in operands):
            covered += 1
    return covered / len(statements)


def consistency_score(plan: AllocationPlan, code: CodeArtifact,
                      alpha: float = 1.0) -> float:
    """100 * max(0, alpha*cosine + (1-alpha)*step-coverage), in [0, 100].

    A zero-norm embedding on either side scores 0; symmetry holds at the
    default alpha=1 (the structural blend is directional).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if plan.plan_embedding.is_zero() or code.code_embedding.is_zero():
        logger.warning("consistency over zero-norm embedding; scoring 0")
        return 0.0
    value = alpha * cosine(plan.plan_embedding, code.code_embedding)
    if alpha < 1.0:
        value += (1.0 - alpha) * step_coverage(plan.pseudo_code, code.code)
    return 100.0 * max(0.0, value)


def consistency_zero_norm(plan: AllocationPlan, code: CodeArtifact) -> bool:
    return plan.plan_embedding.is_zero() or code.code_embedding.is_zero()


def consecutive_distances(vectors: list[EmbeddingVector]) -> list[float]:
    """D_{r,r+1} = 1 - cosine(e_r, e_{r+1}); empty for fewer than 2 vectors.

    The zero-vector convention gives 0 when both are zero and 1 when
    exactly one is. Cosine is not clamped, so the range is [0, 2].
    """
    if len(vectors) < 2:
        return []
    return [1.0 - cosine(a, b) for a, b in zip(vectors, vectors[1:])]


def cross_run_distance(outputs: list[str], embedder) -> list[float]:
    """Semantic drift between consecutive per-run outputs of one agent."""
    return consecutive_distances([embedder.embed(text) for text in outputs])


@dataclass(frozen=True)
class AlignmentVerdict:
    hard_ok: bool          # selected path is one of the proposed paths
    soft_ok: bool          # selected steps vs plan cosine above threshold
    cosine_value: float

    @property
    def ok(self) -> bool:
        return self.hard_ok and self.soft_ok


def check_alignment(proposed: list[SolutionPath], selected: SolutionPath,
                    plan: AllocationPlan, tau_a: float, embedder) -> AlignmentVerdict:
    """Hard membership check plus soft semantic check against the plan."""
    hard_ok = any(p.path_id == selected.path_id for p in proposed)
    steps_embedding = embedder.embed(selected.steps_text())
    value = cosine(steps_embedding, plan.plan_embedding)
    return AlignmentVerdict(hard_ok=hard_ok, soft_ok=value >= tau_a,
                            cosine_value=value)


def conflict_rate(bundles: dict, tau_c: float) -> float:
    """Fraction of role pairs whose context centroids diverge beyond tau_c.

    bundles maps role name -> ContextBundle. Fewer than 2 bundles yields 0
    (underpopulated; callers carry a diagnostic flag).
    """
    roles = sorted(bundles)
    if len(roles) < 2:
        logger.warning("conflict_rate over %d bundle(s); returning 0", len(roles))
        return 0.0
    conflicts = 0
    pairs = 0
    for i, role_a in enumerate(roles):
        for role_b in roles[i + 1:]:
            pairs += 1
            a: ContextBundle = bundles[role_a]
            b: ContextBundle = bundles[role_b]
            distance = 1.0 - cosine(a.bundle_embedding, b.bundle_embedding)
            if distance > tau_c:
                conflicts += 1
    return conflicts / pairs


def overhead_from_events(events) -> float:
    """Baseline 4 handoffs, plus 1 per refinement plus its downstream re-handoffs."""
    total = float(BASELINE_HANDOFFS)
    for event in events:
        total += 1 + _DOWNSTREAM_HANDOFFS[event.routed_role]
    return total


def coordination_overhead(record: RunRecord) -> float:
    """Coordination load of one run, recomputable from its refinement events."""
    return overhead_from_events(record.refinement_events)


# ── grid summaries ───────────────────────────────────────────────────────────

def stat_block(values: list[float]) -> dict:
    """count/mean/median/std (population) plus min/max attainment counts.

    Mean and variance use exact Fraction arithmetic rounded once at the end,
    so independently written exact aggregators agree at tolerance zero.
    """
    if not values:
        return {"count": 0, "mean": None, "median": None, "std": None,
                "min": None, "max": None, "count_min": 0, "count_max": 0}
    lo, hi = min(values), max(values)
    n = len(values)
    mean_exact = sum(Fraction(v) for v in values) / n
    var_exact = sum((Fraction(v) - mean_exact) ** 2 for v in values) / n
    ordered = sorted(values)
    if n % 2:
        median = float(ordered[n // 2])
    else:
        median = float((Fraction(ordered[n // 2 - 1]) + Fraction(ordered[n // 2])) / 2)
    return {
        "count": n,
        "mean": float(mean_exact),
        "median": median,
        "std": math.sqrt(var_exact),
        "min": lo,
        "max": hi,
        "count_min": sum(1 for v in values if v == lo),
        "count_max": sum(1 for v in values if v == hi),
    }


@dataclass(frozen=True)
class SafetySummary:
    """Per-grid-cell metrics for one (persona set, question)."""

    persona_set_id: str
    question_id: str
    penalty_scores: tuple[float, ...]          # by run_index
    consistency_scores: tuple[float, ...]
    drift: tuple[float, ...]                   # Coder D_{r,r+1}; length runs-1
    conflict_rate: float                       # mean across runs
    coordination_overhead: float               # mean across runs
    alignment_verdicts: tuple[bool, ...]
    drift_alerts: tuple[int, ...] = ()         # transitions whose drift exceeds tau_d

    def __post_init__(self):
        if len(self.drift) != max(len(self.penalty_scores) - 1, 0):
            raise ValueError("drift list length must be runs-1")


def _cell_records(records: list[RunRecord]) -> dict:
    cells: dict[tuple[str, str], list[RunRecord]] = {}
    for rec in records:
        cells.setdefault((rec.persona_set_id, rec.question_id), []).append(rec)
    for key in cells:
        cells[key].sort(key=lambda r: r.run_index)
    return cells


def summarize_cell(records: list[RunRecord], tau_d: float = 0.35) -> SafetySummary:
    """SafetySummary for one cell's records (any order; sorted by run_index)."""
    ordered = sorted(records, key=lambda r: r.run_index)
    drift = consecutive_distances(
        [r.trajectory(DRIFT_AGENT).output_embedding for r in ordered])
    return SafetySummary(
        persona_set_id=ordered[0].persona_set_id,
        question_id=ordered[0].question_id,
        penalty_scores=tuple(r.metrics.penalty_score for r in ordered),
        consistency_scores=tuple(r.metrics.consistency_score for r in ordered),
        drift=tuple(drift),
        conflict_rate=statistics.fmean(r.metrics.conflict_rate for r in ordered),
        coordination_overhead=statistics.fmean(
            r.metrics.coordination_overhead for r in ordered),
        alignment_verdicts=tuple(
            r.metrics.alignment_hard_ok and r.metrics.alignment_soft_ok
            for r in ordered),
        drift_alerts=tuple(i for i, d in enumerate(drift) if d > tau_d),
    )


@dataclass(frozen=True)
class GridSummary:
    per_run: dict        # run_index -> {"penalty": stats, "consistency": stats}
    per_set: dict        # set_id -> {"penalty": stats, "consistency": stats, "drift": stats}
    per_set_run: dict    # (set_id, run_index) -> {"penalty": stats, "consistency": stats}
    per_transition: dict # "r<i>->r<i+1>" -> drift stats pooled across cells
    overall: dict        # {"penalty": stats, "consistency": stats, "drift": stats}
    cells: tuple         # SafetySummary per cell, deterministically ordered


def summarize_grid(records: list[RunRecord], tau_d: float = 0.35) -> GridSummary:
    """Aggregate statistics over all persisted run records; deterministic ordering."""
    if not records:
        raise ValueError("summarize_grid needs at least one record")
    cells = _cell_records(records)
    summaries = [summarize_cell(recs, tau_d) for _, recs in sorted(cells.items())]

    per_run: dict[int, dict] = {}
    per_set: dict[str, dict] = {}
    per_set_run: dict[tuple[str, int], dict] = {}
    per_transition: dict[str, dict] = {}

    run_indices = sorted({r.run_index for r in records})
    set_ids = sorted({r.persona_set_id for r in records})

    def penalties(rs):
        return [r.metrics.penalty_score for r in rs]

    def consistencies(rs):
        return [r.metrics.consistency_score for r in rs]

    for run_index in run_indices:
        pool = [r for r in records if r.run_index == run_index]
        per_run[run_index] = {"penalty": stat_block(penalties(pool)),
                              "consistency": stat_block(consistencies(pool))}

    for set_id in set_ids:
        pool = [r for r in records if r.persona_set_id == set_id]
        drift_pool = [d for s in summaries if s.persona_set_id == set_id
                      for d in s.drift]
        per_set[set_id] = {"penalty": stat_block(penalties(pool)),
                           "consistency": stat_block(consistencies(pool)),
                           "drift": stat_block(drift_pool)}
        for run_index in run_indices:
            sub = [r for r in pool if r.run_index == run_index]
            if sub:
                per_set_run[(set_id, run_index)] = {
                    "penalty": stat_block(penalties(sub)),
                    "consistency": stat_block(consistencies(sub))}

    max_transitions = max((len(s.drift) for s in summaries), default=0)
    for t in range(max_transitions):
        pool = [s.drift[t] for s in summaries if len(s.drift) > t]
        per_transition[f"r{t + 1}->r{t + 2}"] = stat_block(pool)

    overall = {"penalty": stat_block(penalties(records)),
               "consistency": stat_block(consistencies(records)),
               "drift": stat_block([d for s in summaries for d in s.drift])}

    return GridSummary(per_run=per_run, per_set=per_set, per_set_run=per_set_run,
                       per_transition=per_transition, overall=overall,
                       cells=tuple(summaries))
