import numpy as np
import pytest

from hetnetsim.fuzzy import (
    LinguisticVariable,
    NoRuleFired,
    RuleBase,
    RuleParseError,
    decide_handoff,
    default_rule_base,
    defuzzify_centroid,
    eval_membership,
    evaluate_rule,
    fuzzify,
    handoff_inputs,
    infer,
    parse_rule_base,
    render_rules,
    triangular,
    trapezoidal,
)
from hetnetsim.handover import CandidateMeasure, Measurement, ServingMeasure
from hetnetsim.radio import MACRO, MICRO


# ---------------------------------------------------------------------------
# Membership evaluation
# ---------------------------------------------------------------------------

def test_triangular_peak_is_one():
    assert eval_membership(triangular(0, 5, 10), 5.0) == 1.0


def test_triangular_outside_support_is_zero():
    mf = triangular(0, 5, 10)
    assert eval_membership(mf, -1.0) == 0.0
    assert eval_membership(mf, 11.0) == 0.0


def test_triangular_linear_interpolation():
    # (2.5 - 0) / (5 - 0) by hand
    assert eval_membership(triangular(0, 5, 10), 2.5) == pytest.approx(0.5)


def test_degenerate_edges_keep_peak_at_one():
    assert eval_membership(triangular(0, 0, 10), 0.0) == 1.0
    assert eval_membership(triangular(0, 10, 10), 10.0) == 1.0
    assert eval_membership(triangular(0, 0, 10), -1e-9) == 0.0


def test_trapezoid_plateau_and_slopes():
    mf = trapezoidal(0, 2, 4, 8)
    assert eval_membership(mf, 2.0) == 1.0
    assert eval_membership(mf, 3.0) == 1.0
    assert eval_membership(mf, 4.0) == 1.0
    assert eval_membership(mf, 1.0) == pytest.approx(0.5)
    assert eval_membership(mf, 6.0) == pytest.approx(0.5)


def test_breakpoints_must_be_nondecreasing():
    with pytest.raises(ValueError):
        triangular(5, 3, 10)


def test_membership_stays_in_unit_interval_for_random_points():
    rng = np.random.default_rng(17)
    for _ in range(500):
        pts = np.sort(rng.uniform(-50, 50, size=rng.choice([3, 4])))
        mf = triangular(*pts) if len(pts) == 3 else trapezoidal(*pts)
        for x in rng.uniform(-80, 80, size=10):
            assert 0.0 <= eval_membership(mf, float(x)) <= 1.0


# ---------------------------------------------------------------------------
# Fuzzification
# ---------------------------------------------------------------------------

def _two_term_var():
    return LinguisticVariable(
        "x", (0.0, 10.0), {"low": triangular(0, 0, 10), "high": triangular(0, 10, 10)})


def test_fuzzify_endpoints():
    assert fuzzify(_two_term_var(), 10.0) == {"low": 0.0, "high": 1.0}


def test_fuzzify_symmetric_crossover():
    degrees = fuzzify(_two_term_var(), 5.0)
    assert degrees["low"] == pytest.approx(0.5)
    assert degrees["high"] == pytest.approx(0.5)


def test_fuzzify_clamps_out_of_universe_inputs():
    assert fuzzify(_two_term_var(), 15.0) == {"low": 0.0, "high": 1.0}
    assert fuzzify(_two_term_var(), -3.0) == {"low": 1.0, "high": 0.0}


def test_variable_requires_terms_inside_universe():
    with pytest.raises(ValueError):
        LinguisticVariable("x", (0.0, 1.0), {"too_wide": triangular(-1, 0, 1)})
    with pytest.raises(ValueError):
        LinguisticVariable("x", (0.0, 1.0), {})


# ---------------------------------------------------------------------------
# Rule parsing
# ---------------------------------------------------------------------------

def _verbose_vocabulary():
    """Vocabulary matching the verbose multi-line rule text used below."""
    inputs = [
        LinguisticVariable("SINR_in_db", (-10.0, 30.0),
                           {"near_RTH": triangular(-5, 0, 5)}),
        LinguisticVariable("Velocity_(V)_of_UE_in_kmh/hr", (0.0, 120.0),
                           {"high": trapezoidal(5, 15, 120, 120)}),
        LinguisticVariable("Load_in_Mbps", (0.0, 100.0),
                           {"low": trapezoidal(0, 0, 20, 60)}),
        LinguisticVariable("Latency_in_ms", (0.0, 100.0),
                           {"voice/gaming": trapezoidal(0, 0, 20, 60)}),
        LinguisticVariable("UE_battery_level_in_hrs_left", (0.0, 10.0),
                           {"high": trapezoidal(2, 5, 10, 10)}),
    ]
    output = LinguisticVariable("Handoff_decision_value", (0.0, 1.0),
                                {"handoff": triangular(0, 1, 1)})
    return inputs, output


VERBOSE_RULE_TEXT = """\
If (SINR_in_db is near_RTH) or
(Velocity_(V)_of_UE_in_kmh/hr is
high) or (Load_in_Mbps is low) or
(Latency_in_ms is voice/gaming) or
(UE_battery_level_in_hrs_left is
high) then (Handoff_decision_value is
handoff)
"""


def test_parse_verbose_five_clause_rule():
    inputs, output = _verbose_vocabulary()
    rules = parse_rule_base(VERBOSE_RULE_TEXT, inputs, output)
    assert len(rules) == 1
    rule = rules[0]
    assert len(rule.clauses) == 5
    assert rule.connectives == ("or", "or", "or", "or")
    assert rule.consequent == ("Handoff_decision_value", "handoff")
    assert rule.clauses[0] == ("SINR_in_db", "near_RTH")
    assert rule.clauses[1] == ("Velocity_(V)_of_UE_in_kmh/hr", "high")
    assert rule.clauses[3] == ("Latency_in_ms", "voice/gaming")


def test_parse_empty_input_is_an_error():
    inputs, output = _verbose_vocabulary()
    with pytest.raises(RuleParseError, match="empty rule base"):
        parse_rule_base("", inputs, output)
    with pytest.raises(RuleParseError, match="empty rule base"):
        parse_rule_base("  # only a comment\n", inputs, output)


def test_parse_unknown_term_names_the_token():
    inputs, output = _verbose_vocabulary()
    with pytest.raises(RuleParseError, match="bogus_term"):
        parse_rule_base("if (SINR_in_db is bogus_term) then (Handoff_decision_value is handoff)",
                        inputs, output)


def test_parse_unknown_variable_names_the_token():
    inputs, output = _verbose_vocabulary()
    with pytest.raises(RuleParseError, match="Nope"):
        parse_rule_base("if (Nope is near_RTH) then (Handoff_decision_value is handoff)",
                        inputs, output)


def test_parse_keywords_are_case_insensitive():
    inputs, output = _verbose_vocabulary()
    text = "IF (SINR_in_db IS near_RTH) THEN (Handoff_decision_value IS handoff)"
    rules = parse_rule_base(text, inputs, output)
    assert rules[0].clauses == (("SINR_in_db", "near_RTH"),)


def test_parse_multiple_statements():
    rb = default_rule_base()
    assert len(rb.rules) == 4


def test_render_parse_round_trip():
    rb = default_rule_base()
    text = render_rules(rb.rules)
    reparsed = parse_rule_base(text, rb.inputs, rb.output)
    assert reparsed == rb.rules


# ---------------------------------------------------------------------------
# Rule evaluation
# ---------------------------------------------------------------------------

def _degrees(**kv):
    return {name: {"t": value} for name, value in kv.items()}


def _rule(connectives, names):
    from hetnetsim.fuzzy import FuzzyRule
    return FuzzyRule(tuple((n, "t") for n in names), tuple(connectives), ("out", "t"))


def test_all_or_takes_max():
    rule = _rule(["or", "or"], ["a", "b", "c"])
    assert evaluate_rule(rule, _degrees(a=0.2, b=0.7, c=0.1)) == pytest.approx(0.7)


def test_and_takes_min():
    rule = _rule(["and"], ["a", "b"])
    assert evaluate_rule(rule, _degrees(a=0.2, b=0.7)) == pytest.approx(0.2)


def test_mixed_connectives_apply_left_to_right():
    # (0.3 or 0.6) and 0.5 -> min(max(0.3, 0.6), 0.5) = 0.5
    rule = _rule(["or", "and"], ["a", "b", "c"])
    assert evaluate_rule(rule, _degrees(a=0.3, b=0.6, c=0.5)) == pytest.approx(0.5)


def test_missing_variable_is_an_error():
    rule = _rule(["and"], ["a", "b"])
    with pytest.raises(ValueError, match="b"):
        evaluate_rule(rule, _degrees(a=0.2))


# ---------------------------------------------------------------------------
# Inference and defuzzification
# ---------------------------------------------------------------------------

def _tiny_rule_base(resolution=1001):
    inputs = [LinguisticVariable("x", (0.0, 1.0),
                                 {"on": triangular(0, 1, 1), "off": triangular(0, 0, 1)})]
    output = LinguisticVariable("y", (0.0, 1.0),
                                {"no_handoff": triangular(0, 0, 1), "handoff": triangular(0, 1, 1)})
    rules = parse_rule_base(
        "if (x is on) then (y is handoff)\nif (x is off) then (y is no_handoff)",
        inputs, output)
    return RuleBase(inputs, output, rules, resolution)


def test_full_activation_reproduces_the_consequent_term():
    rb = _tiny_rule_base()
    result = infer(rb, {"x": 1.0})  # on=1, off=0: only the handoff rule fires
    xs = np.linspace(0, 1, rb.resolution)
    assert np.allclose(result.aggregated, rb.output.terms["handoff"](xs))


def test_zero_activation_raises_no_rule_fired():
    inputs = [LinguisticVariable("x", (0.0, 1.0), {"on": triangular(0, 1, 1)})]
    output = LinguisticVariable("y", (0.0, 1.0), {"handoff": triangular(0, 1, 1)})
    rules = parse_rule_base("if (x is on) then (y is handoff)", inputs, output)
    rb = RuleBase(inputs, output, rules)
    with pytest.raises(NoRuleFired):
        infer(rb, {"x": 0.0})


def test_missing_input_is_an_error():
    rb = _tiny_rule_base()
    with pytest.raises(ValueError, match="missing input"):
        infer(rb, {})


def _brute_force_centroid(mu, lo, hi, n):
    # Straight-line summation over the same uniform grid; no numpy, no shared code.
    total = 0.0
    weighted = 0.0
    for k in range(n):
        x = lo + (hi - lo) * k / (n - 1)
        m = mu(x)
        total += m
        weighted += x * m
    return weighted / total


def test_two_rule_aggregation_matches_integration_oracle():
    # Clip levels 0.4 / 0.9 against no_handoff=tri(0,0,1), handoff=tri(0,1,1).
    resolution = 10001
    rb = _tiny_rule_base(resolution)
    oracle = _brute_force_centroid(
        lambda v: max(min(1.0 - v, 0.4), min(v, 0.9)), 0.0, 1.0, resolution)
    xs = np.linspace(0, 1, resolution)
    aggregated = np.maximum(
        np.minimum(rb.output.terms["no_handoff"](xs), 0.4),
        np.minimum(rb.output.terms["handoff"](xs), 0.9))
    assert defuzzify_centroid(aggregated, 0.0, 1.0) == pytest.approx(oracle, abs=1e-12)


def test_inference_crisp_value_matches_oracle_through_full_pipeline():
    resolution = 10001
    rb = _tiny_rule_base(resolution)
    # x = 0.7: handoff clipped at 0.7, no_handoff clipped at 0.3.
    result = infer(rb, {"x": 0.7})
    oracle = _brute_force_centroid(
        lambda v: max(min(1.0 - v, 0.3), min(v, 0.7)), 0.0, 1.0, resolution)
    assert result.crisp == pytest.approx(oracle, abs=1e-12)


def test_centroid_of_symmetric_triangle():
    resolution = 1001
    xs = np.linspace(0, 1, resolution)
    assert defuzzify_centroid(triangular(0, 0.5, 1)(xs), 0, 1) == pytest.approx(
        0.5, abs=1.0 / resolution)


def test_centroid_of_uniform_mass():
    resolution = 501
    assert defuzzify_centroid(np.ones(resolution), 0, 1) == pytest.approx(
        0.5, abs=1.0 / resolution)


def test_centroid_of_clipped_triangle_matches_oracle():
    resolution = 10001
    xs = np.linspace(0, 1, resolution)
    clipped = np.minimum(triangular(0, 1, 1)(xs), 0.5)
    oracle = _brute_force_centroid(lambda v: min(v, 0.5), 0.0, 1.0, resolution)
    assert defuzzify_centroid(clipped, 0, 1) == pytest.approx(oracle, abs=1e-12)


def test_centroid_rejects_empty_set():
    with pytest.raises(ValueError):
        defuzzify_centroid(np.zeros(11), 0, 1)


def test_centroid_of_random_symmetric_sets_is_the_centre():
    rng = np.random.default_rng(5)
    resolution = 1001
    for _ in range(50):
        half = rng.uniform(0, 1, size=resolution // 2)
        mu = np.concatenate([half, [rng.uniform(0.1, 1.0)], half[::-1]])
        centre = rng.uniform(-5, 5)
        width = rng.uniform(0.5, 4.0)
        got = defuzzify_centroid(mu, centre - width, centre + width)
        assert got == pytest.approx(centre, abs=2.0 * (2 * width) / resolution)


# ---------------------------------------------------------------------------
# Handoff decisions on the default rule base
# ---------------------------------------------------------------------------

def _measurement(margin_db, speed_kmh=5.0, load=10.0, traffic="real_time",
                 battery=8.0, authorized=True, target_kind=MICRO):
    serving = ServingMeasure(0, MACRO, 10.0)
    cand = CandidateMeasure(1, target_kind, 10.0 + margin_db, -80.0, load, authorized)
    return Measurement(serving, [cand], speed_kmh, traffic, battery)


def test_favourable_scenario_recommends_handoff_above_080():
    rb = default_rule_base()
    value, recommend = decide_handoff(rb, _measurement(0.0), threshold=0.8)
    assert value > 0.8
    assert recommend


def test_handoff_averse_extremes_stay_below_half():
    rb = default_rule_base()
    m = _measurement(-10.0, speed_kmh=120.0, load=100.0, traffic="non_real_time",
                     battery=0.0, authorized=False)
    value, recommend = decide_handoff(rb, m, threshold=0.5)
    assert value < 0.5
    assert not recommend


def test_zero_threshold_recommends_whenever_a_rule_fires():
    rb = default_rule_base()
    value, recommend = decide_handoff(rb, _measurement(-2.0), threshold=0.0)
    assert value > 0.0
    assert recommend


def test_no_rule_fired_maps_to_zero_and_false():
    rb = default_rule_base(rules_text="if (authorization is no) then (handoff_decision is no_handoff)")
    value, recommend = decide_handoff(rb, _measurement(0.0, authorized=True), threshold=0.0)
    assert value == 0.0
    assert not recommend


def test_handoff_value_monotone_in_sinr_margin():
    rb = default_rule_base()
    rng = np.random.default_rng(23)
    margins = np.linspace(-10, 10, 20)
    for _ in range(5):  # 5 contexts x 20 margins = 100 input vectors
        fixed = dict(
            speed_kmh=float(rng.uniform(0, 120)),
            load=float(rng.uniform(0, 100)),
            traffic=str(rng.choice(["real_time", "non_real_time"])),
            battery=float(rng.uniform(0, 10)),
            authorized=bool(rng.random() < 0.5),
        )
        values = [decide_handoff(rb, _measurement(m, **fixed))[0] for m in margins]
        for a, b in zip(values, values[1:]):
            assert b >= a - 1e-9


def test_resolution_stability_within_002():
    rb_lo = default_rule_base(resolution=101)
    rb_hi = default_rule_base(resolution=10001)
    rng = np.random.default_rng(31)
    for _ in range(50):
        inputs = {
            "sinr_margin_db": float(rng.uniform(-10, 10)),
            "velocity_kmh": float(rng.uniform(0, 120)),
            "load_mbps": float(rng.uniform(0, 100)),
            "latency_ms": float(rng.uniform(0, 100)),
            "battery_hours": float(rng.uniform(0, 10)),
            "authorization": float(rng.integers(0, 2)),
        }
        assert infer(rb_lo, inputs).crisp == pytest.approx(
            infer(rb_hi, inputs).crisp, abs=0.02)


def test_handoff_inputs_encodes_traffic_as_latency():
    inputs = handoff_inputs(1.0, 5.0, 10.0, True, 8.0, True)
    assert inputs["latency_ms"] < 50
    inputs = handoff_inputs(1.0, 5.0, 10.0, False, 8.0, True)
    assert inputs["latency_ms"] > 50


def test_crisp_result_stays_in_output_universe():
    rb = default_rule_base()
    rng = np.random.default_rng(41)
    for _ in range(50):
        m = _measurement(float(rng.uniform(-10, 10)), speed_kmh=float(rng.uniform(0, 120)),
                         load=float(rng.uniform(0, 100)), battery=float(rng.uniform(0, 10)))
        value, _ = decide_handoff(rb, m)
        assert 0.0 <= value <= 1.0
