"""Handover decision logic: the crisp four-branch algorithm and the fuzzy decider.

The crisp path transcribes the staged decision procedure: an SINR trigger
with hysteresis margin, a 10 km/h velocity gate for handovers into LTE-U
microcells, authorization checks on microcell targets, and a proactive or
reactive execution policy chosen by traffic class. Branches are evaluated in
a fixed order and the first satisfied branch wins. The fuzzy path scores the
strongest candidate with the Mamdani decider and applies the same
proactive/reactive/temp-access refinement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .fuzzy import RuleBase, decide_handoff
from .radio import MACRO, MICRO

logger = logging.getLogger(__name__)

REAL_TIME = "real_time"
NON_REAL_TIME = "non_real_time"

VERDICT_NONE = "none"
VERDICT_PROACTIVE = "proactive"
VERDICT_REACTIVE = "reactive_pending"
VERDICT_TEMP_ACCESS = "request_temp_access"

SCENARIO_MACRO_MACRO = "macro_macro"
SCENARIO_MACRO_LTEU = "macro_lteu"
SCENARIO_LTEU_MACRO = "lteu_macro"
SCENARIO_LTEU_LTEU = "lteu_lteu"
SCENARIO_NA = "n/a"


@dataclass
class HandoverConfig:
    hhm_db: float = 3.0  # Handover Hysteresis Margin
    velocity_gate_kmh: float = 10.0
    reactive_threshold_dbm: float = -95.0
    decider: str = "crisp"  # crisp | fuzzy
    fuzzy_threshold: float = 0.5
    pingpong_window_s: float = 5.0

    def __post_init__(self):
        if self.hhm_db < 0:
            raise ValueError("hhm_db must be nonnegative")
        if self.decider not in ("crisp", "fuzzy"):
            raise ValueError(f"decider must be 'crisp' or 'fuzzy', got {self.decider!r}")


@dataclass(frozen=True)
class ServingMeasure:
    cell_id: int
    kind: str
    sinr_db: float


@dataclass(frozen=True)
class CandidateMeasure:
    cell_id: int
    kind: str
    sinr_db: float
    rx_dbm: float
    load_mbps: float
    authorized: bool = True


@dataclass
class Measurement:
    """Per-tick decision inputs for one UE."""

    serving: ServingMeasure
    candidates: list
    speed_kmh: float
    traffic: str = NON_REAL_TIME
    battery_hours: float = 5.0
    # Filled by the engine when mobility prediction ran (macro targets only).
    predicted_macro_id: int = None

    def __post_init__(self):
        if any(c.cell_id == self.serving.cell_id for c in self.candidates):
            raise ValueError("serving cell must not appear among candidates")


@dataclass
class HandoverDecision:
    verdict: str = VERDICT_NONE
    target: int = None
    scenario: str = SCENARIO_NA
    decision_value: float = None  # fuzzy decider output, when it ran

    def __post_init__(self):
        if self.verdict != VERDICT_NONE and self.target is None:
            raise ValueError("non-none verdicts need a target cell")


@dataclass
class UeSessionState:
    pending_reactive: tuple = None  # (target, armed_at_s, scenario)
    last_handover_s: float = None
    prev_cell_id: int = None  # cell left at the previous handover
    handover_count: int = 0
    pingpong_count: int = 0


def _eligible(m: Measurement, kind: str, hhm_db: float):
    threshold = m.serving.sinr_db + hhm_db
    return [c for c in m.candidates if c.kind == kind and c.sinr_db > threshold]


def _best(cands):
    return max(cands, key=lambda c: (c.sinr_db, -c.cell_id))


def _timing_verdict(traffic: str) -> str:
    return VERDICT_PROACTIVE if traffic == REAL_TIME else VERDICT_REACTIVE


def evaluate_crisp_handover(m: Measurement, cfg: HandoverConfig) -> HandoverDecision:
    """Four-branch crisp algorithm; first satisfied SINR trigger wins.

    1. macro->macro: trigger on SINR_target > SINR_serving + HHM; above the
       velocity gate the mobility-predicted macro is used as target.
    2. macro->LTE-U: same trigger; above the gate no handover is performed;
       below it authorization selects handover vs temporary-access request.
    3. LTE-U->LTE-U: trigger plus authorization check on the target.
    4. LTE-U->macro: trigger only; traffic class picks the timing policy.
    """
    fast = m.speed_kmh > cfg.velocity_gate_kmh

    if m.serving.kind == MACRO:
        macro_targets = _eligible(m, MACRO, cfg.hhm_db)
        if macro_targets:
            target = _best(macro_targets)
            if fast and m.predicted_macro_id is not None:
                predicted = [c for c in macro_targets if c.cell_id == m.predicted_macro_id]
                if predicted:
                    target = predicted[0]
            return HandoverDecision(_timing_verdict(m.traffic), target.cell_id, SCENARIO_MACRO_MACRO)

        micro_targets = _eligible(m, MICRO, cfg.hhm_db)
        if micro_targets:
            if fast:
                # UE would quickly leave the microcell: skip the handover.
                return HandoverDecision(VERDICT_NONE, None, SCENARIO_MACRO_LTEU)
            target = _best(micro_targets)
            if target.authorized:
                return HandoverDecision(_timing_verdict(m.traffic), target.cell_id, SCENARIO_MACRO_LTEU)
            return HandoverDecision(VERDICT_TEMP_ACCESS, target.cell_id, SCENARIO_MACRO_LTEU)
    else:
        micro_targets = _eligible(m, MICRO, cfg.hhm_db)
        if micro_targets:
            target = _best(micro_targets)
            if target.authorized:
                return HandoverDecision(_timing_verdict(m.traffic), target.cell_id, SCENARIO_LTEU_LTEU)
            return HandoverDecision(VERDICT_TEMP_ACCESS, target.cell_id, SCENARIO_LTEU_LTEU)

        macro_targets = _eligible(m, MACRO, cfg.hhm_db)
        if macro_targets:
            target = _best(macro_targets)
            return HandoverDecision(_timing_verdict(m.traffic), target.cell_id, SCENARIO_LTEU_MACRO)

    return HandoverDecision(VERDICT_NONE, None, SCENARIO_NA)


def _scenario_for(serving_kind: str, target_kind: str) -> str:
    if serving_kind == MACRO:
        return SCENARIO_MACRO_MACRO if target_kind == MACRO else SCENARIO_MACRO_LTEU
    return SCENARIO_LTEU_MACRO if target_kind == MACRO else SCENARIO_LTEU_LTEU


def evaluate_fuzzy_handover(m: Measurement, rb: RuleBase, cfg: HandoverConfig) -> HandoverDecision:
    """Fuzzy decider on the strongest candidate, then crisp-style refinement.

    Inference errors are downgraded to a 'none' verdict with a warning so a
    malformed custom rule base cannot abort a simulation run.
    """
    if not m.candidates:
        return HandoverDecision(VERDICT_NONE, None, SCENARIO_NA)
    try:
        value, recommend = decide_handoff(rb, m, cfg.fuzzy_threshold)
    except Exception as exc:
        logger.warning("fuzzy decider failed (%s); treating as no handover", exc)
        return HandoverDecision(VERDICT_NONE, None, SCENARIO_NA)

    if not recommend:
        return HandoverDecision(VERDICT_NONE, None, SCENARIO_NA, decision_value=value)

    target = _best(m.candidates)
    scenario = _scenario_for(m.serving.kind, target.kind)
    if target.kind == MICRO and not target.authorized:
        return HandoverDecision(VERDICT_TEMP_ACCESS, target.cell_id, scenario, decision_value=value)
    return HandoverDecision(_timing_verdict(m.traffic), target.cell_id, scenario, decision_value=value)


def advance_session(state: UeSessionState, decision: HandoverDecision,
                    pending_target_rx_dbm, t_s: float, cfg: HandoverConfig,
                    serving_cell_id: int):
    """Apply one decision to the per-UE session state.

    Proactive verdicts execute immediately; reactive verdicts arm a pending
    handover that executes on a later call, once the target's received power
    (pending_target_rx_dbm, measured for the target pending at entry) reaches
    the reactive threshold. A newer decision naming a different target cancels
    a pending reactive. Returns (state, executed_target_or_None, scenario),
    where scenario is the one recorded when the executed handover was decided.
    """
    executed = None
    scenario = decision.scenario

    if decision.verdict == VERDICT_PROACTIVE:
        executed = decision.target
        state.pending_reactive = None
    elif state.pending_reactive is not None and pending_target_rx_dbm is not None \
            and pending_target_rx_dbm >= cfg.reactive_threshold_dbm:
        executed, _, scenario = state.pending_reactive
        state.pending_reactive = None
    elif decision.verdict == VERDICT_REACTIVE:
        if state.pending_reactive is None or state.pending_reactive[0] != decision.target:
            state.pending_reactive = (decision.target, t_s, decision.scenario)
    elif decision.target is not None and state.pending_reactive is not None \
            and state.pending_reactive[0] != decision.target:
        state.pending_reactive = None

    if executed is not None:
        if state.prev_cell_id == executed and state.last_handover_s is not None \
                and t_s - state.last_handover_s <= cfg.pingpong_window_s:
            state.pingpong_count += 1
        state.prev_cell_id = serving_cell_id
        state.last_handover_s = t_s
        state.handover_count += 1
    return state, executed, scenario
