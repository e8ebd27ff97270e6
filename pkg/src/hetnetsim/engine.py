"""Deterministic fixed-timestep simulation loop.

Per tick: step UEs, redraw per-link shadowing, compute per-candidate SINR
(co-channel interference only between same-kind sites: licensed macros and
unlicensed micros occupy different spectrum), run the configured handover
decider, advance per-UE sessions, drive the authorization registry, and
accrue Shannon throughput for the serving link. Everything is driven by one
seeded RNG, so a (config, seed) pair reproduces the event log bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import radio
from .authorization import GatewayRegistry
from .coexistence import CoexistRun
from .fuzzy import DEFAULT_RESOLUTION, default_rule_base
from .handover import (
    NON_REAL_TIME,
    REAL_TIME,
    VERDICT_TEMP_ACCESS,
    CandidateMeasure,
    HandoverConfig,
    Measurement,
    ServingMeasure,
    UeSessionState,
    advance_session,
    evaluate_crisp_handover,
    evaluate_fuzzy_handover,
)
from .radio import MACRO, MICRO, noise_floor_dbm, shannon_throughput_mbps
from .topology import UeState, build_hex_grid, draw_waypoint, place_microcells, predict_target_cell, step_ue

EVENT_DECIDE = "decide"
EVENT_MEASURE = "measure"
EVENT_EXEC = "handover_exec"
EVENT_TEMP_REQUEST = "temp_request"
EVENT_TEMP_GRANT = "temp_grant"

SCENARIO_KEYS = ("macro_macro", "macro_lteu", "lteu_macro", "lteu_lteu")

# Offered load attributed to each attached UE when reporting cell load.
LOAD_PER_UE_MBPS = 10.0

# Candidates kept per cell kind when building a measurement; decisions only
# ever look at the strongest eligible candidate of each kind.
CANDIDATES_PER_KIND = 4


@dataclass
class RadioParams:
    macro_tx_dbm: float = radio.MACRO_TX_DBM
    micro_tx_dbm: float = radio.MICRO_TX_DBM
    shadowing_sigma_db: float = radio.SHADOWING_SIGMA_DB
    bandwidth_mhz: float = 20.0
    noise_dbm: float = None  # default: thermal floor over bandwidth_mhz
    macro_pl_intercept_db: float = radio.MACRO_PL_INTERCEPT_DB
    macro_pl_slope: float = radio.MACRO_PL_SLOPE
    micro_pl_intercept_db: float = radio.MICRO_PL_INTERCEPT_DB
    micro_pl_slope: float = radio.MICRO_PL_SLOPE

    def resolved_noise_dbm(self) -> float:
        return self.noise_dbm if self.noise_dbm is not None else noise_floor_dbm(self.bandwidth_mhz)


@dataclass
class AuthCellConfig:
    """A closed (non-operator) microcell and its grant policy."""

    cell_id: int
    owner: str = None  # defaults to "owner<cell_id>"
    users: tuple = ()
    auto_grant: bool = True
    grant_delay_s: float = 0.0

    def __post_init__(self):
        if self.owner is None:
            self.owner = f"owner{self.cell_id}"
        if self.grant_delay_s < 0:
            raise ValueError("grant_delay_s must be nonnegative")


@dataclass
class ScenarioConfig:
    seed: int = 42
    sim_time_s: float = 100.0
    dt_s: float = 0.1
    n_macro: int = 4
    micro_per_cell: int = 15
    n_ues: int = 20
    cell_radius_m: float = 2000.0
    v_min_kmh: float = 0.0
    v_max_kmh: float = 30.0
    prediction_horizon_s: float = 5.0
    radio: RadioParams = field(default_factory=RadioParams)
    handover: HandoverConfig = field(default_factory=HandoverConfig)
    fuzzy_resolution: int = DEFAULT_RESOLUTION
    rules_text: str = None  # custom rule-DSL block; None keeps the default rules
    auth_cells: tuple = ()
    coexist: CoexistRun = field(default_factory=CoexistRun)
    out_path: str = "events.csv"

    def validate(self):
        if self.sim_time_s <= 0:
            raise ValueError("sim_time_s must be positive")
        if self.dt_s <= 0:
            raise ValueError("dt_s must be positive")
        if self.dt_s > self.sim_time_s:
            raise ValueError("dt_s must not exceed sim_time_s")
        if self.n_macro < 1:
            raise ValueError("n_macro must be at least 1")
        if self.micro_per_cell < 0:
            raise ValueError("micro_per_cell must be nonnegative")
        if self.n_ues < 0:
            raise ValueError("n_ues must be nonnegative")
        if self.cell_radius_m <= 0:
            raise ValueError("cell_radius_m must be positive")
        if self.v_min_kmh < 0 or self.v_max_kmh < self.v_min_kmh:
            raise ValueError("need 0 <= v_min_kmh <= v_max_kmh")
        if self.prediction_horizon_s < 0:
            raise ValueError("prediction_horizon_s must be nonnegative")
        if self.fuzzy_resolution < 3:
            raise ValueError("fuzzy_resolution must be at least 3")
        n_micro = self.n_macro * self.micro_per_cell
        for ac in self.auth_cells:
            if not self.n_macro <= ac.cell_id < self.n_macro + n_micro:
                raise ValueError(
                    f"auth cell {ac.cell_id} is not a microcell id "
                    f"(valid range {self.n_macro}..{self.n_macro + n_micro - 1})"
                )


@dataclass
class EventRecord:
    t_s: float
    ue_id: int
    event: str
    serving: str = None  # "macro:<id>" / "micro:<id>"
    target: str = None
    sinr_serving_db: float = None
    sinr_target_db: float = None
    decision_value: float = None
    verdict: str = None  # decide: verdict; handover_exec: scenario label


@dataclass
class PerUeMetrics:
    handover_count: int = 0
    pingpong_count: int = 0
    temp_requests: int = 0
    temp_grants: int = 0
    throughput_mbps: float = 0.0
    time_in_microcell_fraction: float = 0.0


@dataclass
class Metrics:
    handover_count: int = 0
    handovers_by_scenario: dict = field(default_factory=lambda: {k: 0 for k in SCENARIO_KEYS})
    pingpong_count: int = 0
    temp_requests: int = 0
    temp_grants: int = 0
    mean_ue_throughput_mbps: float = 0.0
    time_in_microcell_fraction: float = 0.0
    per_ue: dict = field(default_factory=dict)  # ue_id -> PerUeMetrics


def cell_label(kind: str, cell_id: int) -> str:
    return f"{'macro' if kind == MACRO else 'micro'}:{cell_id}"


def _aggregate(per_ue: dict, by_scenario: dict) -> Metrics:
    m = Metrics(handovers_by_scenario=dict(by_scenario), per_ue=per_ue)
    for ue_id in sorted(per_ue):
        u = per_ue[ue_id]
        m.handover_count += u.handover_count
        m.pingpong_count += u.pingpong_count
        m.temp_requests += u.temp_requests
        m.temp_grants += u.temp_grants
    n = len(per_ue)
    if n:
        m.mean_ue_throughput_mbps = sum(per_ue[u].throughput_mbps for u in sorted(per_ue)) / n
        m.time_in_microcell_fraction = sum(per_ue[u].time_in_microcell_fraction for u in sorted(per_ue)) / n
    return m


class _Run:
    """State for one scenario run; kept separate from the public entry point."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)

        self.grid = build_hex_grid(cfg.n_macro, cfg.cell_radius_m, cfg.radio.macro_tx_dbm)
        place_microcells(self.grid, cfg.micro_per_cell, self.rng, cfg.radio.micro_tx_dbm)
        self.cells = self.grid.all_sites()
        self.cell_pos = np.array([c.position for c in self.cells]) if self.cells else np.zeros((0, 2))
        self.is_macro = np.array([c.kind == MACRO for c in self.cells])
        self.tx_dbm = np.array([c.tx.tx_power_dbm for c in self.cells])
        self.labels = [cell_label(c.kind, c.id) for c in self.cells]
        self.macro_idx = np.flatnonzero(self.is_macro)
        self.micro_idx = np.flatnonzero(~self.is_macro)
        self.noise_lin = 10.0 ** (cfg.radio.resolved_noise_dbm() / 10.0)

        # Rule base is parsed up front so bad rule text fails before the run.
        self.rule_base = default_rule_base(cfg.fuzzy_resolution, cfg.rules_text)

        self.registries = {}
        self.closed = {}  # cell_id -> (registry, AuthCellConfig)
        for ac in cfg.auth_cells:
            gw = self.cells[ac.cell_id].gateway_id
            reg = self.registries.setdefault(gw, GatewayRegistry(gw))
            reg.register_microcell(ac.cell_id, ac.owner, ac.users)
            self.closed[ac.cell_id] = (reg, ac)

        self.ues = []
        self.sessions = []
        box = self.grid.bounding_box
        for i in range(cfg.n_ues):
            position = draw_waypoint(self.rng, box)
            speed = float(self.rng.uniform(cfg.v_min_kmh, cfg.v_max_kmh))
            waypoint = draw_waypoint(self.rng, box)
            traffic = REAL_TIME if self.rng.random() < 0.5 else NON_REAL_TIME
            battery = float(self.rng.uniform(0.0, 10.0))
            dists = np.hypot(*(self.cell_pos[self.macro_idx] - np.array(position)).T)
            serving = int(self.macro_idx[int(np.argmin(dists))])
            self.ues.append(UeState(i, position, (0.0, 0.0), serving, traffic, battery,
                                    waypoint=waypoint, speed_setpoint_kmh=speed))
            self.sessions.append(UeSessionState())

        self.events = []
        self.grant_queue = []  # (due_t, cell_id, user, ue_id)
        self.per_ue = {i: PerUeMetrics() for i in range(cfg.n_ues)}
        self.by_scenario = {k: 0 for k in SCENARIO_KEYS}
        self._mb = [0.0] * cfg.n_ues
        self._micro_ticks = [0] * cfg.n_ues

    def _authorized(self, cell_id: int, user: str, t: float) -> bool:
        if cell_id not in self.closed:
            return True  # operator-owned cells are open access
        reg, _ = self.closed[cell_id]
        return reg.check_access(cell_id, user, t)

    def _process_due_grants(self, t: float):
        remaining = []
        for due_t, cell_id, user, ue_id in self.grant_queue:
            if t >= due_t:
                reg, _ = self.closed[cell_id]
                reg.grant_temp_access(cell_id, reg.owner_of(cell_id), user, t_s=t)
                self.events.append(EventRecord(t, ue_id, EVENT_TEMP_GRANT,
                                               target=self.labels[cell_id]))
                self.per_ue[ue_id].temp_grants += 1
            else:
                remaining.append((due_t, cell_id, user, ue_id))
        self.grant_queue = remaining

    def _top_candidates(self, sinr_row, rx_row, serving_id, loads, user, t):
        cands = []
        for idx in (self.macro_idx, self.micro_idx):
            pool = idx[idx != serving_id]
            if pool.size == 0:
                continue
            order = pool[np.argsort(-sinr_row[pool], kind="stable")][:CANDIDATES_PER_KIND]
            for c in order:
                c = int(c)
                cands.append(CandidateMeasure(
                    c, self.cells[c].kind, float(sinr_row[c]), float(rx_row[c]),
                    float(loads[c]), authorized=self._authorized(c, user, t),
                ))
        return cands

    def _tick(self, k: int):
        cfg = self.cfg
        t = k * cfg.dt_s
        self._process_due_grants(t)
        if not self.ues:
            return

        for ue in self.ues:
            step_ue(ue, cfg.dt_s, self.grid, self.rng, cfg.v_min_kmh, cfg.v_max_kmh)

        ue_pos = np.array([ue.position for ue in self.ues])
        dist = np.maximum(np.hypot(ue_pos[:, None, 0] - self.cell_pos[None, :, 0],
                                   ue_pos[:, None, 1] - self.cell_pos[None, :, 1]), 1.0)
        pl_macro = cfg.radio.macro_pl_intercept_db + cfg.radio.macro_pl_slope * np.log10(dist)
        pl_micro = cfg.radio.micro_pl_intercept_db + cfg.radio.micro_pl_slope * np.log10(dist)
        pl = np.where(self.is_macro[None, :], pl_macro, pl_micro)
        shadow = self.rng.normal(0.0, cfg.radio.shadowing_sigma_db, size=dist.shape)
        rx = self.tx_dbm[None, :] - pl - shadow
        lin_rx = 10.0 ** (rx / 10.0)
        tot_macro = (lin_rx * self.is_macro[None, :]).sum(axis=1)
        tot_micro = (lin_rx * (~self.is_macro)[None, :]).sum(axis=1)
        same_kind_total = np.where(self.is_macro[None, :], tot_macro[:, None], tot_micro[:, None])
        sinr = 10.0 * np.log10(lin_rx / (same_kind_total - lin_rx + self.noise_lin))

        loads = np.bincount([ue.serving_cell_id for ue in self.ues],
                            minlength=len(self.cells)) * LOAD_PER_UE_MBPS

        for i, ue in enumerate(self.ues):
            user = f"ue{i}"
            sv = ue.serving_cell_id
            serving_kind = self.cells[sv].kind
            serving = ServingMeasure(sv, serving_kind, float(sinr[i, sv]))
            candidates = self._top_candidates(sinr[i], rx[i], sv, loads, user, t)

            predicted = None
            if serving_kind == MACRO and ue.speed_kmh > cfg.handover.velocity_gate_kmh:
                neighbors = [self.cells[int(j)] for j in self.macro_idx if int(j) != sv]
                if neighbors:
                    predicted = predict_target_cell(ue, neighbors, cfg.prediction_horizon_s)

            m = Measurement(serving, candidates, ue.speed_kmh, ue.traffic,
                            ue.battery_hours, predicted_macro_id=predicted)
            if cfg.handover.decider == "fuzzy":
                decision = evaluate_fuzzy_handover(m, self.rule_base, cfg.handover)
            else:
                decision = evaluate_crisp_handover(m, cfg.handover)

            target_label = self.labels[decision.target] if decision.target is not None else None
            target_sinr = float(sinr[i, decision.target]) if decision.target is not None else None
            self.events.append(EventRecord(
                t, i, EVENT_DECIDE, self.labels[sv], target_label,
                float(sinr[i, sv]), target_sinr, decision.decision_value, decision.verdict,
            ))

            if decision.verdict == VERDICT_TEMP_ACCESS and decision.target in self.closed:
                reg, ac = self.closed[decision.target]
                if not reg.check_access(decision.target, user, t) \
                        and not reg.has_pending_request(decision.target, user):
                    reg.request_temp_access(decision.target, user, session_id=f"{user}-session")
                    self.events.append(EventRecord(
                        t, i, EVENT_TEMP_REQUEST, self.labels[sv], self.labels[decision.target],
                    ))
                    self.per_ue[i].temp_requests += 1
                    if ac.auto_grant:
                        self.grant_queue.append((t + ac.grant_delay_s, decision.target, user, i))

            session = self.sessions[i]
            pending_rx = None
            if session.pending_reactive is not None:
                pending_rx = float(rx[i, session.pending_reactive[0]])
            session, executed, scenario = advance_session(
                session, decision, pending_rx, t, cfg.handover, serving_cell_id=sv)
            if executed is not None:
                self.events.append(EventRecord(
                    t, i, EVENT_EXEC, self.labels[sv], self.labels[executed], verdict=scenario,
                ))
                self.by_scenario[scenario] += 1
                ue.serving_cell_id = executed

            # Throughput and offload accrue on the link measured this tick.
            self._mb[i] += shannon_throughput_mbps(float(sinr[i, sv]), cfg.radio.bandwidth_mhz) * cfg.dt_s
            if serving_kind == MICRO:
                self._micro_ticks[i] += 1

    def finish(self, n_ticks: int) -> Metrics:
        elapsed = n_ticks * self.cfg.dt_s
        for i in range(self.cfg.n_ues):
            u = self.per_ue[i]
            u.handover_count = self.sessions[i].handover_count
            u.pingpong_count = self.sessions[i].pingpong_count
            u.throughput_mbps = self._mb[i] / elapsed if elapsed > 0 else 0.0
            u.time_in_microcell_fraction = self._micro_ticks[i] / n_ticks if n_ticks else 0.0
        return _aggregate(self.per_ue, self.by_scenario)


def run_scenario(cfg: ScenarioConfig):
    """Run one scenario; returns (event_log, metrics)."""
    run = _Run(cfg)
    n_ticks = int(round(cfg.sim_time_s / cfg.dt_s))
    for k in range(n_ticks):
        run._tick(k)
    return run.events, run.finish(n_ticks)


def summarize_metrics(events, bandwidth_mhz: float = 20.0, dt_s: float = 0.1,
                      pingpong_window_s: float = 5.0) -> Metrics:
    """Recompute Metrics from an event log alone.

    The keyword arguments carry the run parameters the log does not encode;
    with the run's own values the result equals the engine's incremental
    metrics exactly. Raises on out-of-order timestamps.
    """
    per_ue = {}
    by_scenario = {k: 0 for k in SCENARIO_KEYS}
    mb = {}
    decide_rows = {}
    micro_rows = {}
    last_exec = {}  # ue -> (t, from_label)
    last_t = None
    for ev in events:
        if last_t is not None and ev.t_s < last_t:
            raise ValueError(f"event log timestamps decrease at t={ev.t_s}")
        last_t = ev.t_s
        u = per_ue.setdefault(ev.ue_id, PerUeMetrics())
        if ev.event == EVENT_DECIDE:
            mb[ev.ue_id] = mb.get(ev.ue_id, 0.0) + \
                shannon_throughput_mbps(ev.sinr_serving_db, bandwidth_mhz) * dt_s
            decide_rows[ev.ue_id] = decide_rows.get(ev.ue_id, 0) + 1
            if ev.serving.startswith("micro:"):
                micro_rows[ev.ue_id] = micro_rows.get(ev.ue_id, 0) + 1
        elif ev.event == EVENT_EXEC:
            u.handover_count += 1
            by_scenario[ev.verdict] += 1
            prev = last_exec.get(ev.ue_id)
            if prev is not None and ev.target == prev[1] and ev.t_s - prev[0] <= pingpong_window_s:
                u.pingpong_count += 1
            last_exec[ev.ue_id] = (ev.t_s, ev.serving)
        elif ev.event == EVENT_TEMP_REQUEST:
            u.temp_requests += 1
        elif ev.event == EVENT_TEMP_GRANT:
            u.temp_grants += 1

    for ue_id, u in per_ue.items():
        ticks = decide_rows.get(ue_id, 0)
        if ticks:
            u.throughput_mbps = mb.get(ue_id, 0.0) / (ticks * dt_s)
            u.time_in_microcell_fraction = micro_rows.get(ue_id, 0) / ticks
    return _aggregate(per_ue, by_scenario)
