"""Slotted single-channel coexistence simulator: LTE-U vs Wi-Fi contenders.

One slot is one transmission opportunity of equal payload. Per slot every
node decides to transmit or defer according to its policy; a lone
transmitter wins the slot, two or more collide and nobody is credited.

Access modes for the LTE-U side:
  greedy - transmit in every slot, no sensing (the no-coexistence baseline)
  abs    - greedy, but muted during Almost Blank Subframes of the 10-slot
           pattern given by abs_ratio
  lbt    - listen-before-talk: transmit only after cca_slots idle slots,
           plus a random deferral counter drawn from [0, cw_min] after every
           transmission so two sensing nodes do not lock step forever

Wi-Fi nodes run a DCF-style CSMA/CA: freeze while the channel is busy or
reserved by another node, count down on idle slots, transmit at zero,
double the contention window on collision and reset it on success. When
wifi_rts_cts is set, a successful burst start also reserves the channel for
the remaining burst so sensing nodes defer.

Successful channel grabs by Wi-Fi and LBT nodes transmit a burst of
burst_slots back-to-back slots, which stands in for a multi-slot TXOP.

Uplink LTE-U UEs model scheduled grants: the gateway assigns slots
ul_lookahead_slots ahead, and at the assigned slot the UE senses the channel
itself, refraining (and counting a licensed-carrier reschedule) if busy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GREEDY = "greedy"
LBT = "lbt"
ABS = "abs"

TECH_GW = "lteu_gw"
TECH_UE_UL = "lteu_ue_ul"
TECH_WIFI = "wifi"

IDLE = "idle"
BUSY = "busy"
COLLISION = "collision"

TRANSMIT = "transmit"
DEFER = "defer"


def _is_power_of_two_minus_one(n: int) -> bool:
    return n >= 0 and (n + 1) & n == 0


@dataclass
class MacNode:
    id: int
    tech: str  # TECH_GW, TECH_UE_UL or TECH_WIFI
    backoff_counter: int = None  # drawn lazily on first contention
    cw: int = 15
    pending_reservation: tuple = None
    tx_slots_won: int = 0
    rescheduled_count: int = 0
    burst_remaining: int = 0

    def reset(self, cw_min: int):
        self.backoff_counter = None
        self.cw = cw_min
        self.pending_reservation = None
        self.tx_slots_won = 0
        self.rescheduled_count = 0
        self.burst_remaining = 0


@dataclass
class CoexistConfig:
    n_slots: int = 10_000
    mode: str = GREEDY
    abs_ratio: float = 0.0
    wifi_rts_cts: bool = False
    cca_slots: int = 1  # clear-channel-assessment window
    ul_lookahead_slots: int = 4  # uplink grants are scheduled this far ahead
    cw_min: int = 15
    cw_max: int = 1023
    burst_slots: int = 8  # TXOP length for Wi-Fi and LBT channel grabs
    nodes: list = field(default_factory=list)

    def validate(self):
        if self.n_slots < 1:
            raise ValueError("n_slots must be at least 1")
        if self.mode not in (GREEDY, LBT, ABS):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.abs_ratio <= 1.0:
            raise ValueError("abs_ratio must lie in [0, 1]")
        if self.cca_slots < 1:
            raise ValueError("cca_slots must be at least 1")
        if self.ul_lookahead_slots < 0:
            raise ValueError("ul_lookahead_slots must be nonnegative")
        if self.burst_slots < 1:
            raise ValueError("burst_slots must be at least 1")
        if not (_is_power_of_two_minus_one(self.cw_min) and _is_power_of_two_minus_one(self.cw_max)):
            raise ValueError("cw_min and cw_max must be powers of two minus one")
        if self.cw_min > self.cw_max:
            raise ValueError("cw_min must not exceed cw_max")


@dataclass
class ChannelState:
    states: list = field(default_factory=list)  # per-slot IDLE/BUSY/COLLISION
    reservation: tuple = None  # (owner_id, until_slot)

    @property
    def current_slot(self) -> int:
        return len(self.states)

    def busy_at(self, slot: int) -> bool:
        return 0 <= slot < len(self.states) and self.states[slot] != IDLE

    def prev_idle(self) -> bool:
        return not self.states or self.states[-1] == IDLE

    def reserved_by_other(self, node_id: int) -> bool:
        if self.reservation is None:
            return False
        owner, until = self.reservation
        return owner != node_id and until >= self.current_slot

    def expire_reservation(self):
        if self.reservation is not None and self.reservation[1] < self.current_slot:
            self.reservation = None


def abs_mask(abs_ratio: float, slot: int) -> bool:
    """True when the slot is muted: the first round(10*ratio) of every 10 slots."""
    if not 0.0 <= abs_ratio <= 1.0:
        raise ValueError("abs_ratio must lie in [0, 1]")
    return (slot % 10) < int(round(10.0 * abs_ratio))


def lbt_decide(history, cca_slots: int) -> str:
    """Transmit iff the last cca_slots slots were all idle (pre-start slots count idle)."""
    if cca_slots < 1:
        raise ValueError("cca_slots must be at least 1")
    window = list(history)[-cca_slots:]
    return TRANSMIT if all(s == IDLE for s in window) else DEFER


def lbt_uplink_grant(slot: int, ul_lookahead_slots: int) -> int:
    """Slot assigned to an uplink grant issued now."""
    if ul_lookahead_slots < 0:
        raise ValueError("ul_lookahead_slots must be nonnegative")
    return slot + ul_lookahead_slots


def execute_uplink_grant(ue: MacNode, channel: ChannelState, scheduled_slot: int) -> bool:
    """UE-side sensing at the assigned slot.

    Returns True when the UE may transmit; on a busy channel it refrains and
    the grant is rescheduled once on the licensed secondary carrier, counted
    in rescheduled_count (that traffic no longer contends here).
    """
    if channel.busy_at(scheduled_slot):
        ue.rescheduled_count += 1
        return False
    return True


def dcf_step(node: MacNode, channel: ChannelState, rng: np.random.Generator) -> str:
    """One CSMA/CA intent decision for a Wi-Fi node.

    Freezes while the previous slot was busy or the channel is reserved by
    another node; otherwise decrements the backoff and transmits at zero.
    Burst continuations transmit unconditionally.
    """
    if node.burst_remaining > 0:
        return TRANSMIT
    if channel.reserved_by_other(node.id):
        return DEFER
    if not channel.prev_idle():
        return DEFER
    if node.backoff_counter is None:
        node.backoff_counter = int(rng.integers(0, node.cw + 1))
    if node.backoff_counter == 0:
        return TRANSMIT
    node.backoff_counter -= 1
    return DEFER


def wifi_on_collision(node: MacNode, cfg: CoexistConfig, rng: np.random.Generator):
    """Binary exponential backoff: double cw up to cw_max, redraw."""
    node.cw = min(2 * (node.cw + 1) - 1, cfg.cw_max)
    node.backoff_counter = int(rng.integers(0, node.cw + 1))
    node.burst_remaining = 0


def wifi_on_success(node: MacNode, cfg: CoexistConfig, rng: np.random.Generator):
    node.cw = cfg.cw_min
    node.backoff_counter = int(rng.integers(0, node.cw + 1))


@dataclass
class CoexistResult:
    n_slots: int
    slots_won: dict  # node_id -> slots
    idle_slots: int
    collision_slots: int
    rescheduled: dict  # node_id -> uplink grants pushed to the licensed carrier
    slot_states: list

    @property
    def utilization(self) -> float:
        return sum(self.slots_won.values()) / self.n_slots


def _gw_intent(node, cfg, channel, rng) -> bool:
    if cfg.mode in (GREEDY, ABS):
        return True
    if node.burst_remaining > 0:
        return True
    if channel.reserved_by_other(node.id):
        return False
    if lbt_decide(channel.states, cfg.cca_slots) == DEFER:
        return False
    if node.backoff_counter is None:
        node.backoff_counter = int(rng.integers(0, cfg.cw_min + 1))
    if node.backoff_counter == 0:
        return True
    node.backoff_counter -= 1
    return False


def run_coexistence(cfg: CoexistConfig, rng: np.random.Generator) -> CoexistResult:
    """Simulate cfg.n_slots of contention; deterministic given the RNG seed."""
    cfg.validate()
    if not cfg.nodes:
        raise ValueError("at least one node is required")

    for node in cfg.nodes:
        node.reset(cfg.cw_min)

    channel = ChannelState()
    idle_slots = 0
    collision_slots = 0
    bursting = {TECH_WIFI} | ({TECH_GW} if cfg.mode == LBT else set())

    for t in range(cfg.n_slots):
        channel.expire_reservation()
        muted = cfg.mode == ABS and abs_mask(cfg.abs_ratio, t)
        intents = []

        for node in cfg.nodes:
            if node.tech == TECH_UE_UL:
                continue
            if node.tech == TECH_GW:
                if muted:
                    node.burst_remaining = 0
                    continue
                if _gw_intent(node, cfg, channel, rng):
                    intents.append(node)
            else:
                if dcf_step(node, channel, rng) == TRANSMIT:
                    intents.append(node)

        # Uplink UEs sense last: they see transmissions already begun this slot.
        for node in cfg.nodes:
            if node.tech != TECH_UE_UL or muted:
                continue
            if t < cfg.ul_lookahead_slots:
                continue  # the first grant, issued at slot 0, lands here
            if intents or channel.reserved_by_other(node.id):
                node.rescheduled_count += 1
            else:
                intents.append(node)

        if not intents:
            channel.states.append(IDLE)
            idle_slots += 1
        elif len(intents) == 1:
            owner = intents[0]
            owner.tx_slots_won += 1
            channel.states.append(BUSY)
            if owner.tech in bursting:
                if owner.burst_remaining > 0:
                    owner.burst_remaining -= 1
                    if owner.burst_remaining == 0:
                        if channel.reservation is not None and channel.reservation[0] == owner.id:
                            channel.reservation = None
                        if owner.tech == TECH_WIFI:
                            wifi_on_success(owner, cfg, rng)
                        else:
                            owner.backoff_counter = int(rng.integers(0, cfg.cw_min + 1))
                elif cfg.burst_slots > 1:
                    owner.burst_remaining = cfg.burst_slots - 1
                    if owner.tech == TECH_WIFI and cfg.wifi_rts_cts:
                        channel.reservation = (owner.id, t + cfg.burst_slots - 1)
                elif owner.tech == TECH_WIFI:
                    wifi_on_success(owner, cfg, rng)
                else:
                    owner.backoff_counter = int(rng.integers(0, cfg.cw_min + 1))
        else:
            channel.states.append(COLLISION)
            collision_slots += 1
            for node in intents:
                if channel.reservation is not None and channel.reservation[0] == node.id:
                    channel.reservation = None
                if node.tech == TECH_WIFI:
                    wifi_on_collision(node, cfg, rng)
                elif node.tech == TECH_GW and cfg.mode == LBT:
                    node.backoff_counter = int(rng.integers(0, cfg.cw_min + 1))
                    node.burst_remaining = 0

    return CoexistResult(
        n_slots=cfg.n_slots,
        slots_won={n.id: n.tx_slots_won for n in cfg.nodes},
        idle_slots=idle_slots,
        collision_slots=collision_slots,
        rescheduled={n.id: n.rescheduled_count for n in cfg.nodes if n.tech == TECH_UE_UL},
        slot_states=channel.states,
    )


@dataclass
class CoexistRun:
    """Declarative description of a coexistence experiment (scenario [coexist] section)."""

    n_slots: int = 10_000
    mode: str = GREEDY
    abs_ratio: float = 0.0
    wifi_rts_cts: bool = False
    cca_slots: int = 1
    ul_lookahead_slots: int = 4
    cw_min: int = 15
    cw_max: int = 1023
    burst_slots: int = 8
    n_lteu_gw: int = 1
    n_wifi: int = 1
    n_lteu_ue: int = 0

    def to_config(self) -> CoexistConfig:
        nodes = []
        for _ in range(self.n_lteu_gw):
            nodes.append(MacNode(len(nodes), TECH_GW))
        for _ in range(self.n_wifi):
            nodes.append(MacNode(len(nodes), TECH_WIFI))
        for _ in range(self.n_lteu_ue):
            nodes.append(MacNode(len(nodes), TECH_UE_UL))
        return CoexistConfig(
            n_slots=self.n_slots, mode=self.mode, abs_ratio=self.abs_ratio,
            wifi_rts_cts=self.wifi_rts_cts, cca_slots=self.cca_slots,
            ul_lookahead_slots=self.ul_lookahead_slots, cw_min=self.cw_min,
            cw_max=self.cw_max, burst_slots=self.burst_slots, nodes=nodes,
        )


def coexist_rows(cfg: CoexistConfig, seeds) -> list:
    """Coexistence sweep rows: each node's joint run vs its standalone run.

    Returns one dict per (seed, node) with keys matching the coexist CSV
    columns: mode, seed, node_id, tech, slots_won, standalone_slots_won,
    utilization (the node's own share of slots in the joint run).
    """
    rows = []
    for seed in seeds:
        joint = run_coexistence(cfg, np.random.default_rng(seed))
        for node in cfg.nodes:
            solo_cfg = CoexistConfig(
                n_slots=cfg.n_slots, mode=cfg.mode, abs_ratio=cfg.abs_ratio,
                wifi_rts_cts=cfg.wifi_rts_cts, cca_slots=cfg.cca_slots,
                ul_lookahead_slots=cfg.ul_lookahead_slots, cw_min=cfg.cw_min,
                cw_max=cfg.cw_max, burst_slots=cfg.burst_slots,
                nodes=[MacNode(node.id, node.tech)],
            )
            solo = run_coexistence(solo_cfg, np.random.default_rng(seed))
            rows.append({
                "mode": cfg.mode,
                "seed": seed,
                "node_id": node.id,
                "tech": node.tech,
                "slots_won": joint.slots_won[node.id],
                "standalone_slots_won": solo.slots_won[node.id],
                "utilization": joint.slots_won[node.id] / cfg.n_slots,
            })
    return rows
