"""hetnetsim: a deterministic LTE-U microcell deployment simulator.

Library layout mirrors the subsystems: `fuzzy` (Mamdani handoff decider),
`radio` (link budgets), `topology` (hex grid and mobility), `handover`
(crisp and fuzzy decision logic), `coexistence` (unlicensed-channel slot
simulator), `authorization` (gateway access control), `engine` (tick loop
and metrics) and `cli` (scenario files, subcommands, CSV output).
"""

from .authorization import AccessGrant, GatewayRegistry
from .coexistence import CoexistConfig, CoexistResult, CoexistRun, MacNode, run_coexistence
from .engine import (
    AuthCellConfig,
    EventRecord,
    Metrics,
    RadioParams,
    ScenarioConfig,
    run_scenario,
    summarize_metrics,
)
from .fuzzy import (
    FuzzyRule,
    LinguisticVariable,
    MembershipFunction,
    NoRuleFired,
    RuleBase,
    RuleParseError,
    decide_handoff,
    default_rule_base,
    defuzzify_centroid,
    eval_membership,
    fuzzify,
    infer,
    parse_rule_base,
    render_rules,
    triangular,
    trapezoidal,
)
from .handover import (
    CandidateMeasure,
    HandoverConfig,
    HandoverDecision,
    Measurement,
    ServingMeasure,
    UeSessionState,
    advance_session,
    evaluate_crisp_handover,
    evaluate_fuzzy_handover,
)
from .radio import (
    LinkBudget,
    TxConfig,
    macro_path_loss_db,
    micro_path_loss_db,
    noise_floor_dbm,
    shadowing_db,
    shannon_throughput_mbps,
    sinr_db,
)
from .topology import (
    CellSite,
    HexGrid,
    UeState,
    build_hex_grid,
    place_microcells,
    predict_target_cell,
    step_ue,
)

__version__ = "0.1.0"
