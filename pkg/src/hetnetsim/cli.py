"""Command-line front end: scenario files, subcommands, and CSV emission.

Scenario files are line based: `[section]` headers, `key = value` pairs and
`#` comments. Recognized sections are general, radio, handover, fuzzy_rules,
auth and coexist; the body of [fuzzy_rules] is handed verbatim to the rule
parser. Parsing is strict: unknown sections or keys and duplicate keys are
errors, reported with their line number.

Exit codes: 0 success, 1 runtime/simulation error, 2 usage error. The
environment variable HETNET_SEED provides a last-resort seed when neither
the --seed flag nor the scenario file sets one.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .coexistence import ABS, GREEDY, LBT, CoexistRun, coexist_rows
from .engine import AuthCellConfig, RadioParams, ScenarioConfig, run_scenario, summarize_metrics
from .fuzzy import NoRuleFired, default_rule_base, infer
from .handover import HandoverConfig
from .topology import build_hex_grid, place_microcells

import numpy as np

CSV_HEADER = "t_s,ue_id,event,serving,target,sinr_serving_db,sinr_target_db,decision_value,verdict"
COEXIST_HEADER = "mode,seed,node_id,tech,slots_won,standalone_slots_won,utilization"

DEFAULT_SEED = 42
SEED_ENV_VAR = "HETNET_SEED"


class ScenarioError(ValueError):
    """Malformed scenario file or override."""


# ---------------------------------------------------------------------------
# Scenario file parsing
# ---------------------------------------------------------------------------

_SECTIONS = ("general", "radio", "handover", "fuzzy_rules", "auth", "coexist")

_KNOWN_KEYS = {
    "general": {"seed", "sim_time_s", "dt_s", "n_macro", "micro_per_cell", "n_ues",
                "cell_radius_m", "v_min_kmh", "v_max_kmh", "prediction_horizon_s", "out"},
    "radio": {"macro_tx_dbm", "micro_tx_dbm", "shadowing_sigma_db", "bandwidth_mhz",
              "noise_dbm", "macro_pl_intercept_db", "macro_pl_slope",
              "micro_pl_intercept_db", "micro_pl_slope"},
    "handover": {"hhm_db", "velocity_gate_kmh", "reactive_threshold_dbm", "decider",
                 "fuzzy_threshold", "pingpong_window_s", "fuzzy_resolution"},
    "coexist": {"n_slots", "mode", "abs_ratio", "wifi_rts_cts", "cca_slots",
                "ul_lookahead_slots", "cw_min", "cw_max", "burst_slots",
                "n_lteu_gw", "n_wifi", "n_lteu_ue"},
}
_AUTH_BASE_KEYS = {"closed_cells"}
_AUTH_CELL_KEYS = {"owner", "users", "auto_grant", "grant_delay_s"}


def _read_pairs(text: str):
    """First pass: (section, key) -> (value, lineno), plus the raw fuzzy_rules body."""
    pairs = {}
    fuzzy_lines = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        header = raw.split("#", 1)[0].strip()
        is_header = header.startswith("[") and header.endswith("]")
        if section == "fuzzy_rules" and not is_header:
            fuzzy_lines.append(raw)
            continue
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if is_header:
            name = header[1:-1].strip()
            if name not in _SECTIONS:
                raise ScenarioError(f"line {lineno}: unknown section '[{name}]'")
            section = name
            continue
        if section is None:
            raise ScenarioError(f"line {lineno}: key before any [section] header")
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if (section, key) in pairs:
            raise ScenarioError(f"line {lineno}: duplicate key '{key}' in [{section}]")
        pairs[(section, key)] = (value, lineno)
    return pairs, "\n".join(fuzzy_lines)


def _cast_int(value, key, lineno):
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(f"line {lineno}: expected an integer for '{key}', got '{value}'") from None


def _cast_float(value, key, lineno):
    try:
        return float(value)
    except ValueError:
        raise ScenarioError(f"line {lineno}: expected a number for '{key}', got '{value}'") from None


def _cast_bool(value, key, lineno):
    lowered = value.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ScenarioError(f"line {lineno}: expected true/false for '{key}', got '{value}'")


def _split_list(value):
    return [tok for tok in value.replace(",", " ").split() if tok]


class _PairReader:
    def __init__(self, pairs):
        self.pairs = pairs
        self.used = set()

    def has(self, section, key):
        return (section, key) in self.pairs

    def get(self, section, key, default, caster):
        if (section, key) not in self.pairs:
            return default
        self.used.add((section, key))
        value, lineno = self.pairs[(section, key)]
        return caster(value, key, lineno) if caster else value

    def lineno(self, section, key):
        return self.pairs[(section, key)][1]

    def check_positive(self, section, key, value, allow_zero=False):
        bad = value < 0 if allow_zero else value <= 0
        if bad and self.has(section, key):
            raise ScenarioError(f"line {self.lineno(section, key)}: '{key}' must be "
                                f"{'nonnegative' if allow_zero else 'positive'}, got {value}")
        if bad:
            raise ScenarioError(f"'{key}' must be {'nonnegative' if allow_zero else 'positive'}, got {value}")
        return value

    def reject_unknown(self):
        for (section, key), (_, lineno) in self.pairs.items():
            if (section, key) not in self.used:
                raise ScenarioError(f"line {lineno}: unknown key '{key}' in [{section}]")


def _parse_auth(reader: _PairReader):
    raw = reader.get("auth", "closed_cells", "", None)
    if not raw:
        return ()
    _, lineno = reader.pairs[("auth", "closed_cells")]
    cell_ids = [_cast_int(tok, "closed_cells", lineno) for tok in _split_list(raw)]
    cells = []
    for cell_id in cell_ids:
        owner = reader.get("auth", f"owner.{cell_id}", None, None)
        users = tuple(_split_list(reader.get("auth", f"users.{cell_id}", "", None)))
        auto_grant = reader.get("auth", f"auto_grant.{cell_id}", True, _cast_bool)
        delay = reader.get("auth", f"grant_delay_s.{cell_id}", 0.0, _cast_float)
        cells.append(AuthCellConfig(cell_id, owner, users, auto_grant, delay))
    return tuple(cells)


def parse_scenario_file(text: str, overrides=None) -> ScenarioConfig:
    """Parse scenario text (plus optional 'section.key=value' overrides) strictly."""
    pairs, fuzzy_body = _read_pairs(text)
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ScenarioError(f"override must look like section.key=value, got '{item}'")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in _SECTIONS:
            raise ScenarioError(f"override names unknown section '{section}'")
        pairs[(section.strip(), key.strip())] = (value.strip(), 0)

    reader = _PairReader(pairs)
    g = lambda key, default, caster: reader.get("general", key, default, caster)
    cfg = ScenarioConfig(
        seed=g("seed", DEFAULT_SEED, _cast_int),
        sim_time_s=reader.check_positive("general", "sim_time_s", g("sim_time_s", 100.0, _cast_float)),
        dt_s=reader.check_positive("general", "dt_s", g("dt_s", 0.1, _cast_float)),
        n_macro=reader.check_positive("general", "n_macro", g("n_macro", 4, _cast_int)),
        micro_per_cell=reader.check_positive("general", "micro_per_cell",
                                             g("micro_per_cell", 15, _cast_int), allow_zero=True),
        n_ues=reader.check_positive("general", "n_ues", g("n_ues", 20, _cast_int), allow_zero=True),
        cell_radius_m=reader.check_positive("general", "cell_radius_m",
                                            g("cell_radius_m", 2000.0, _cast_float)),
        v_min_kmh=g("v_min_kmh", 0.0, _cast_float),
        v_max_kmh=g("v_max_kmh", 30.0, _cast_float),
        prediction_horizon_s=g("prediction_horizon_s", 5.0, _cast_float),
        out_path=g("out", "events.csv", None),
        radio=RadioParams(
            macro_tx_dbm=reader.get("radio", "macro_tx_dbm", 43.0, _cast_float),
            micro_tx_dbm=reader.get("radio", "micro_tx_dbm", 10.0, _cast_float),
            shadowing_sigma_db=reader.get("radio", "shadowing_sigma_db", 8.0, _cast_float),
            bandwidth_mhz=reader.check_positive("radio", "bandwidth_mhz",
                                                reader.get("radio", "bandwidth_mhz", 20.0, _cast_float)),
            noise_dbm=reader.get("radio", "noise_dbm", None, _cast_float),
            macro_pl_intercept_db=reader.get("radio", "macro_pl_intercept_db", 15.3, _cast_float),
            macro_pl_slope=reader.get("radio", "macro_pl_slope", 37.6, _cast_float),
            micro_pl_intercept_db=reader.get("radio", "micro_pl_intercept_db", 37.0, _cast_float),
            micro_pl_slope=reader.get("radio", "micro_pl_slope", 30.0, _cast_float),
        ),
        handover=HandoverConfig(
            hhm_db=reader.get("handover", "hhm_db", 3.0, _cast_float),
            velocity_gate_kmh=reader.get("handover", "velocity_gate_kmh", 10.0, _cast_float),
            reactive_threshold_dbm=reader.get("handover", "reactive_threshold_dbm", -95.0, _cast_float),
            decider=reader.get("handover", "decider", "crisp", None),
            fuzzy_threshold=reader.get("handover", "fuzzy_threshold", 0.5, _cast_float),
            pingpong_window_s=reader.get("handover", "pingpong_window_s", 5.0, _cast_float),
        ),
        fuzzy_resolution=reader.get("handover", "fuzzy_resolution", 1001, _cast_int),
        rules_text=fuzzy_body.strip() and fuzzy_body or None,
        auth_cells=_parse_auth(reader),
        coexist=CoexistRun(
            n_slots=reader.get("coexist", "n_slots", 10_000, _cast_int),
            mode=reader.get("coexist", "mode", GREEDY, None),
            abs_ratio=reader.get("coexist", "abs_ratio", 0.0, _cast_float),
            wifi_rts_cts=reader.get("coexist", "wifi_rts_cts", False, _cast_bool),
            cca_slots=reader.get("coexist", "cca_slots", 1, _cast_int),
            ul_lookahead_slots=reader.get("coexist", "ul_lookahead_slots", 4, _cast_int),
            cw_min=reader.get("coexist", "cw_min", 15, _cast_int),
            cw_max=reader.get("coexist", "cw_max", 1023, _cast_int),
            burst_slots=reader.get("coexist", "burst_slots", 8, _cast_int),
            n_lteu_gw=reader.get("coexist", "n_lteu_gw", 1, _cast_int),
            n_wifi=reader.get("coexist", "n_wifi", 1, _cast_int),
            n_lteu_ue=reader.get("coexist", "n_lteu_ue", 0, _cast_int),
        ),
    )
    reader.reject_unknown()
    cfg.validate()
    if cfg.handover.decider == "fuzzy" or cfg.rules_text is not None:
        default_rule_base(cfg.fuzzy_resolution, cfg.rules_text)  # fail early on bad rules
    return cfg


def render_scenario(cfg: ScenarioConfig) -> str:
    """Write a config back to scenario-file text; parse_scenario_file round-trips it."""
    lines = ["[general]"]
    lines += [f"seed = {cfg.seed}",
              f"sim_time_s = {cfg.sim_time_s!r}",
              f"dt_s = {cfg.dt_s!r}",
              f"n_macro = {cfg.n_macro}",
              f"micro_per_cell = {cfg.micro_per_cell}",
              f"n_ues = {cfg.n_ues}",
              f"cell_radius_m = {cfg.cell_radius_m!r}",
              f"v_min_kmh = {cfg.v_min_kmh!r}",
              f"v_max_kmh = {cfg.v_max_kmh!r}",
              f"prediction_horizon_s = {cfg.prediction_horizon_s!r}",
              f"out = {cfg.out_path}"]
    r = cfg.radio
    lines += ["", "[radio]",
              f"macro_tx_dbm = {r.macro_tx_dbm!r}",
              f"micro_tx_dbm = {r.micro_tx_dbm!r}",
              f"shadowing_sigma_db = {r.shadowing_sigma_db!r}",
              f"bandwidth_mhz = {r.bandwidth_mhz!r}"]
    if r.noise_dbm is not None:
        lines.append(f"noise_dbm = {r.noise_dbm!r}")
    lines += [f"macro_pl_intercept_db = {r.macro_pl_intercept_db!r}",
              f"macro_pl_slope = {r.macro_pl_slope!r}",
              f"micro_pl_intercept_db = {r.micro_pl_intercept_db!r}",
              f"micro_pl_slope = {r.micro_pl_slope!r}"]
    h = cfg.handover
    lines += ["", "[handover]",
              f"hhm_db = {h.hhm_db!r}",
              f"velocity_gate_kmh = {h.velocity_gate_kmh!r}",
              f"reactive_threshold_dbm = {h.reactive_threshold_dbm!r}",
              f"decider = {h.decider}",
              f"fuzzy_threshold = {h.fuzzy_threshold!r}",
              f"pingpong_window_s = {h.pingpong_window_s!r}",
              f"fuzzy_resolution = {cfg.fuzzy_resolution}"]
    if cfg.auth_cells:
        lines += ["", "[auth]",
                  "closed_cells = " + " ".join(str(ac.cell_id) for ac in cfg.auth_cells)]
        for ac in cfg.auth_cells:
            lines.append(f"owner.{ac.cell_id} = {ac.owner}")
            if ac.users:
                lines.append(f"users.{ac.cell_id} = " + " ".join(ac.users))
            lines.append(f"auto_grant.{ac.cell_id} = {'true' if ac.auto_grant else 'false'}")
            lines.append(f"grant_delay_s.{ac.cell_id} = {ac.grant_delay_s!r}")
    c = cfg.coexist
    lines += ["", "[coexist]",
              f"n_slots = {c.n_slots}",
              f"mode = {c.mode}",
              f"abs_ratio = {c.abs_ratio!r}",
              f"wifi_rts_cts = {'true' if c.wifi_rts_cts else 'false'}",
              f"cca_slots = {c.cca_slots}",
              f"ul_lookahead_slots = {c.ul_lookahead_slots}",
              f"cw_min = {c.cw_min}",
              f"cw_max = {c.cw_max}",
              f"burst_slots = {c.burst_slots}",
              f"n_lteu_gw = {c.n_lteu_gw}",
              f"n_wifi = {c.n_wifi}",
              f"n_lteu_ue = {c.n_lteu_ue}"]
    if cfg.rules_text is not None:
        lines += ["", "[fuzzy_rules]", cfg.rules_text.rstrip("\n")]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _f4(value) -> str:
    return "" if value is None else f"{value:.4f}"


def emit_events_csv(events, sink):
    """Write the event log as CSV: fixed header, 4-decimal floats, \\n endings."""
    try:
        sink.write(CSV_HEADER + "\n")
        for ev in events:
            sink.write(",".join([
                f"{ev.t_s:.4f}",
                str(ev.ue_id),
                ev.event,
                ev.serving or "",
                ev.target or "",
                _f4(ev.sinr_serving_db),
                _f4(ev.sinr_target_db),
                _f4(ev.decision_value),
                ev.verdict or "",
            ]) + "\n")
    except OSError as exc:
        raise RuntimeError(f"failed writing events CSV: {exc}") from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _resolve_seed(flag_seed, pairs) -> int:
    if flag_seed is not None:
        return flag_seed
    if ("general", "seed") in pairs:
        value, lineno = pairs[("general", "seed")]
        return _cast_int(value, "seed", lineno)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ScenarioError(f"{SEED_ENV_VAR} must be an integer, got '{env}'") from None
    return DEFAULT_SEED


def _cmd_run(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise RuntimeError(f"cannot read scenario file: {exc}") from exc
    pairs, _ = _read_pairs(text)
    cfg = parse_scenario_file(text, overrides=args.set)
    cfg = replace(cfg, seed=_resolve_seed(args.seed, pairs))
    out_path = args.out or cfg.out_path

    events, metrics = run_scenario(cfg)
    with open(out_path, "w", encoding="utf-8", newline="") as sink:
        emit_events_csv(events, sink)

    print(f"wrote {len(events)} events to {out_path}")
    print(f"handovers: {metrics.handover_count} {metrics.handovers_by_scenario}")
    print(f"ping-pongs: {metrics.pingpong_count}")
    print(f"temp access: {metrics.temp_requests} requested, {metrics.temp_grants} granted")
    print(f"mean UE throughput: {metrics.mean_ue_throughput_mbps:.2f} Mbps")
    print(f"time in microcell: {metrics.time_in_microcell_fraction:.3f}")
    return 0


def _cmd_fuzzy(args) -> int:
    rules_text = None
    resolution = 1001
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            cfg = parse_scenario_file(f.read())
        rules_text = cfg.rules_text
        resolution = cfg.fuzzy_resolution
    rb = default_rule_base(resolution, rules_text)

    inputs = {}
    for item in args.input:
        if "=" not in item:
            args.parser.error(f"--input must look like name=value, got '{item}'")
        name, value = item.split("=", 1)
        name = name.strip()
        if name not in rb.input_names():
            args.parser.error(f"unknown input '{name}' (expected one of {', '.join(rb.input_names())})")
        try:
            inputs[name] = float(value)
        except ValueError:
            args.parser.error(f"--input {name} needs a numeric value, got '{value}'")
    missing = [n for n in rb.input_names() if n not in inputs]
    if missing:
        args.parser.error(f"missing --input values for: {', '.join(missing)}")

    try:
        value = infer(rb, inputs).crisp
    except NoRuleFired:
        value = 0.0
    print(f"{value:.4f}")
    return 0


def _cmd_coexist(args) -> int:
    run = CoexistRun()
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            run = parse_scenario_file(f.read()).coexist
    if args.slots is not None:
        run.n_slots = args.slots
    if args.mode is not None:
        run.mode = args.mode
    if args.abs_ratio is not None:
        run.abs_ratio = args.abs_ratio
    if args.rts_cts:
        run.wifi_rts_cts = True
    if args.wifi is not None:
        run.n_wifi = args.wifi
    if args.lteu_gw is not None:
        run.n_lteu_gw = args.lteu_gw
    if args.lteu_ue is not None:
        run.n_lteu_ue = args.lteu_ue

    base = args.seed if args.seed is not None else int(os.environ.get(SEED_ENV_VAR, 0))
    seeds = range(base, base + args.seeds)
    rows = coexist_rows(run.to_config(), seeds)

    lines = [COEXIST_HEADER] + [
        f"{r['mode']},{r['seed']},{r['node_id']},{r['tech']},"
        f"{r['slots_won']},{r['standalone_slots_won']},{r['utilization']:.4f}"
        for r in rows
    ]
    _write_lines(lines, args.out)
    return 0


def _cmd_grid(args) -> int:
    grid = build_hex_grid(args.macros, args.radius)
    if args.micros:
        seed = args.seed if args.seed is not None else int(os.environ.get(SEED_ENV_VAR, DEFAULT_SEED))
        place_microcells(grid, args.micros, np.random.default_rng(seed))
    lines = ["x_m,y_m"] + [f"{s.position[0]:.4f},{s.position[1]:.4f}" for s in grid.all_sites()]
    _write_lines(lines, args.out)
    return 0


def _write_lines(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetnetsim",
                                     description="LTE-U microcell deployment simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a full scenario and write the event CSV")
    p_run.add_argument("config", help="scenario file path")
    p_run.add_argument("--seed", type=int, help="seed override (beats file and environment)")
    p_run.add_argument("--out", help="event CSV path (beats [general] out)")
    p_run.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a scenario value after file parse (repeatable)")
    p_run.set_defaults(func=_cmd_run, parser=p_run)

    p_fuzzy = sub.add_parser("fuzzy", help="evaluate one fuzzy handoff decision")
    p_fuzzy.add_argument("--input", action="append", default=[], metavar="NAME=VALUE",
                         help="crisp input, one per variable (repeatable)")
    p_fuzzy.add_argument("--config", help="scenario file supplying custom [fuzzy_rules]")
    p_fuzzy.set_defaults(func=_cmd_fuzzy, parser=p_fuzzy)

    p_coex = sub.add_parser("coexist", help="run a coexistence sweep")
    p_coex.add_argument("--config", help="scenario file supplying [coexist]")
    p_coex.add_argument("--slots", type=int)
    p_coex.add_argument("--mode", choices=[GREEDY, LBT, ABS])
    p_coex.add_argument("--abs-ratio", type=float, dest="abs_ratio")
    p_coex.add_argument("--rts-cts", action="store_true", dest="rts_cts")
    p_coex.add_argument("--wifi", type=int, help="number of Wi-Fi nodes")
    p_coex.add_argument("--lteu-gw", type=int, dest="lteu_gw", help="number of LTE-U gateways")
    p_coex.add_argument("--lteu-ue", type=int, dest="lteu_ue", help="number of LTE-U uplink UEs")
    p_coex.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    p_coex.add_argument("--seed", type=int, help="first seed (default 0)")
    p_coex.add_argument("--out", help="CSV path, '-' for stdout")
    p_coex.set_defaults(func=_cmd_coexist, parser=p_coex)

    p_grid = sub.add_parser("grid", help="print site coordinates as CSV")
    p_grid.add_argument("--macros", type=int, default=4)
    p_grid.add_argument("--radius", type=float, default=2000.0)
    p_grid.add_argument("--micros", type=int, default=0, help="microcells per macro cell")
    p_grid.add_argument("--seed", type=int, help="placement seed when --micros > 0")
    p_grid.add_argument("--out", help="CSV path, '-' for stdout")
    p_grid.set_defaults(func=_cmd_grid, parser=p_grid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, PermissionError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
