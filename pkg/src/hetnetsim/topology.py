"""Hexagonal macro layout, random microcell placement, and UE mobility.

Macro sites sit on a pointy-top hexagonal lattice with circumradius
`cell_radius_m`, so nearest neighbours are sqrt(3)*radius apart. Microcells
are dropped uniformly inside their parent macro hexagon. UEs follow a
random-waypoint model inside the grid's bounding box; target-cell prediction
projects the UE along its velocity and picks the nearest candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .radio import MACRO, MICRO, TxConfig, macro_tx, micro_tx

KMH_TO_MPS = 1.0 / 3.6

# Axial-coordinate ring walk; fixed order keeps site enumeration deterministic.
_RING_DIRS = [(0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1), (1, 0)]


@dataclass
class CellSite:
    id: int
    kind: str  # MACRO or MICRO
    position: tuple  # (x_m, y_m)
    tx: TxConfig
    gateway_id: int = None  # set for microcells: the gateway serving their cluster


@dataclass
class UeState:
    id: int
    position: tuple  # (x_m, y_m)
    velocity_kmh: tuple  # velocity vector components in km/h
    serving_cell_id: int
    traffic: str = "non_real_time"  # real_time | non_real_time
    battery_hours: float = 5.0
    authorized_cells: set = field(default_factory=set)
    waypoint: tuple = None
    speed_setpoint_kmh: float = 0.0

    @property
    def speed_kmh(self) -> float:
        return math.hypot(*self.velocity_kmh)


@dataclass
class HexGrid:
    cell_radius_m: float
    macros: list
    micros: list = field(default_factory=list)

    @property
    def bounding_box(self):
        """(xmin, ymin, xmax, ymax) covering every macro hexagon."""
        r = self.cell_radius_m
        half_w = math.sqrt(3.0) / 2.0 * r
        xs = [s.position[0] for s in self.macros]
        ys = [s.position[1] for s in self.macros]
        return (min(xs) - half_w, min(ys) - r, max(xs) + half_w, max(ys) + r)

    def all_sites(self):
        return self.macros + self.micros


def _axial_to_xy(q: int, r: int, radius_m: float):
    x = math.sqrt(3.0) * radius_m * (q + r / 2.0)
    y = 1.5 * radius_m * r
    return (x, y)


def _hex_spiral(n: int):
    """First n axial coordinates of the hex spiral around the origin."""
    coords = [(0, 0)]
    ring = 1
    while len(coords) < n:
        q, r = ring, 0
        for dq, dr in _RING_DIRS:
            for _ in range(ring):
                coords.append((q, r))
                q, r = q + dq, r + dr
        ring += 1
    return coords[:n]


def build_hex_grid(n_macro: int, radius_m: float = 2000.0,
                   tx_power_dbm: float = None) -> HexGrid:
    """Macro sites on the hex lattice, first at the origin, then spiral order."""
    if n_macro <= 0:
        raise ValueError("n_macro must be at least 1")
    if radius_m <= 0:
        raise ValueError("cell radius must be positive")
    tx = macro_tx() if tx_power_dbm is None else TxConfig(tx_power_dbm, MACRO, "licensed")
    macros = [
        CellSite(i, MACRO, _axial_to_xy(q, r, radius_m), tx)
        for i, (q, r) in enumerate(_hex_spiral(n_macro))
    ]
    return HexGrid(radius_m, macros)


def point_in_hexagon(point, center, radius_m: float) -> bool:
    """Membership test for a pointy-top hexagon of circumradius radius_m."""
    dx = abs(point[0] - center[0])
    dy = abs(point[1] - center[1])
    eps = 1e-9 * radius_m
    return dx <= math.sqrt(3.0) / 2.0 * radius_m + eps and dy <= radius_m - dx / math.sqrt(3.0) + eps


def place_microcells(grid: HexGrid, per_cell: int, rng: np.random.Generator,
                     tx_power_dbm: float = None) -> list:
    """Drop per_cell microcells uniformly inside each macro hexagon.

    Appends to grid.micros and returns the new sites. Microcell ids continue
    after the macro ids; each carries the gateway id of its parent cluster
    (one gateway per macro hexagon).
    """
    if per_cell < 0:
        raise ValueError("per_cell must be nonnegative")
    tx = micro_tx() if tx_power_dbm is None else TxConfig(tx_power_dbm, MICRO, "unlicensed")
    r = grid.cell_radius_m
    half_w = math.sqrt(3.0) / 2.0 * r
    next_id = len(grid.macros) + len(grid.micros)
    created = []
    for macro in grid.macros:
        cx, cy = macro.position
        for _ in range(per_cell):
            while True:
                x = rng.uniform(cx - half_w, cx + half_w)
                y = rng.uniform(cy - r, cy + r)
                if point_in_hexagon((x, y), macro.position, r):
                    break
            created.append(CellSite(next_id, MICRO, (x, y), tx, gateway_id=macro.id))
            next_id += 1
    grid.micros.extend(created)
    return created


def _clamp_to_box(x, y, box):
    xmin, ymin, xmax, ymax = box
    return (min(max(x, xmin), xmax), min(max(y, ymin), ymax))


def draw_waypoint(rng: np.random.Generator, box):
    xmin, ymin, xmax, ymax = box
    return (rng.uniform(xmin, xmax), rng.uniform(ymin, ymax))


def step_ue(ue: UeState, dt_s: float, grid: HexGrid, rng: np.random.Generator,
            v_min_kmh: float = 0.0, v_max_kmh: float = 30.0) -> UeState:
    """Advance one random-waypoint step; mutates and returns ue.

    Moves toward the current waypoint at the current speed; on arrival draws
    a new waypoint uniform in the bounding box and a new speed uniform in
    [v_min, v_max]. Positions are clamped to the bounding box.
    """
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    box = grid.bounding_box
    if ue.waypoint is None:
        ue.waypoint = draw_waypoint(rng, box)
    speed_mps = ue.speed_setpoint_kmh * KMH_TO_MPS
    if speed_mps <= 0.0:
        ue.velocity_kmh = (0.0, 0.0)
        return ue

    x, y = ue.position
    wx, wy = ue.waypoint
    dist = math.hypot(wx - x, wy - y)
    travel = speed_mps * dt_s
    if dist <= travel:
        # Arrived: snap to the waypoint and redraw; remaining time is dropped.
        ue.position = (wx, wy)
        ue.waypoint = draw_waypoint(rng, box)
        ue.speed_setpoint_kmh = float(rng.uniform(v_min_kmh, v_max_kmh))
        wx, wy = ue.waypoint
        dist = math.hypot(wx - ue.position[0], wy - ue.position[1])
    else:
        ux, uy = (wx - x) / dist, (wy - y) / dist
        ue.position = _clamp_to_box(x + ux * travel, y + uy * travel, box)
        dist = math.hypot(wx - ue.position[0], wy - ue.position[1])

    if dist > 0:
        ux, uy = (wx - ue.position[0]) / dist, (wy - ue.position[1]) / dist
        ue.velocity_kmh = (ux * ue.speed_setpoint_kmh, uy * ue.speed_setpoint_kmh)
    else:
        ue.velocity_kmh = (0.0, 0.0)
    return ue


def predict_target_cell(ue: UeState, candidates, horizon_s: float = 5.0) -> int:
    """Nearest candidate to the UE's projected position; ties go to the lowest id."""
    if not candidates:
        raise ValueError("candidate list must not be empty")
    px = ue.position[0] + ue.velocity_kmh[0] * KMH_TO_MPS * horizon_s
    py = ue.position[1] + ue.velocity_kmh[1] * KMH_TO_MPS * horizon_s
    best = min(candidates, key=lambda c: (math.hypot(c.position[0] - px, c.position[1] - py), c.id))
    return best.id
