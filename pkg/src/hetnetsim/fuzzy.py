"""Mamdani fuzzy inference engine for handoff decisions.

Pipeline: fuzzifier (piecewise-linear memberships), rule base with a small
textual rule language, min/max connectives with min-implication and
max-aggregation, and centroid defuzzification over a uniformly sampled
output universe. The decider output lives on [0, 1]; values nearer 1
recommend a handoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRIANGULAR = "triangular"
TRAPEZOIDAL = "trapezoidal"

DEFAULT_RESOLUTION = 1001

# Latency encoding of the two traffic classes (ms) when building handoff inputs.
REAL_TIME_LATENCY_MS = 10.0
NON_REAL_TIME_LATENCY_MS = 90.0

DEFAULT_THRESHOLD = 0.5


class RuleParseError(ValueError):
    """Rule text that does not parse against the vocabulary."""


class NoRuleFired(RuntimeError):
    """Every rule activation was zero; the aggregated output set is empty."""


@dataclass(frozen=True)
class MembershipFunction:
    """Piecewise-linear membership: triangular(a,b,c) or trapezoidal(a,b,c,d).

    Breakpoints must be nondecreasing; equal breakpoints give vertical edges.
    Evaluates to 1.0 exactly on the peak/plateau and 0 outside the support.
    """

    shape: str
    points: tuple

    def __post_init__(self):
        expected = {TRIANGULAR: 3, TRAPEZOIDAL: 4}.get(self.shape)
        if expected is None:
            raise ValueError(f"unknown membership shape {self.shape!r}")
        if len(self.points) != expected:
            raise ValueError(f"{self.shape} takes {expected} breakpoints, got {len(self.points)}")
        if any(b < a for a, b in zip(self.points, self.points[1:])):
            raise ValueError(f"breakpoints must be nondecreasing: {self.points}")

    @property
    def support(self):
        return self.points[0], self.points[-1]

    def __call__(self, x):
        if self.shape == TRIANGULAR:
            lo, peak_lo, peak_hi, hi = self.points[0], self.points[1], self.points[1], self.points[2]
        else:
            lo, peak_lo, peak_hi, hi = self.points
        xs = np.asarray(x, dtype=float)
        y = np.zeros_like(xs)
        if peak_lo > lo:
            rising = (xs >= lo) & (xs < peak_lo)
            y = np.where(rising, (xs - lo) / (peak_lo - lo), y)
        if hi > peak_hi:
            falling = (xs > peak_hi) & (xs <= hi)
            y = np.where(falling, (hi - xs) / (hi - peak_hi), y)
        y = np.where((xs >= peak_lo) & (xs <= peak_hi), 1.0, y)
        return float(y) if np.ndim(x) == 0 else y


def triangular(a, b, c) -> MembershipFunction:
    return MembershipFunction(TRIANGULAR, (float(a), float(b), float(c)))


def trapezoidal(a, b, c, d) -> MembershipFunction:
    return MembershipFunction(TRAPEZOIDAL, (float(a), float(b), float(c), float(d)))


def eval_membership(mf: MembershipFunction, x: float) -> float:
    """Degree of membership of x in [0, 1]; total over all reals."""
    return float(mf(float(x)))


@dataclass(frozen=True)
class LinguisticVariable:
    """Named variable over a closed real universe with named fuzzy terms."""

    name: str
    universe: tuple
    terms: dict
    units: str = ""

    def __post_init__(self):
        lo, hi = self.universe
        if not lo < hi:
            raise ValueError(f"variable '{self.name}': universe must satisfy min < max")
        if not self.terms:
            raise ValueError(f"variable '{self.name}' needs at least one term")
        for term, mf in self.terms.items():
            a, b = mf.support
            if a < lo or b > hi:
                raise ValueError(
                    f"term '{term}' of '{self.name}' lies outside the universe [{lo}, {hi}]"
                )

    def clamp(self, x: float) -> float:
        lo, hi = self.universe
        return min(max(float(x), lo), hi)


def fuzzify(var: LinguisticVariable, x: float) -> dict:
    """Per-term membership degrees of x, clamped to the variable's universe."""
    xc = var.clamp(x)
    return {term: eval_membership(mf, xc) for term, mf in var.terms.items()}


@dataclass(frozen=True)
class FuzzyRule:
    """Antecedent clauses joined left-to-right by explicit and/or connectives."""

    clauses: tuple  # ((variable, term), ...)
    connectives: tuple  # ('and' | 'or', ...), one fewer than clauses
    consequent: tuple  # (output variable, term)

    def __post_init__(self):
        if not self.clauses:
            raise ValueError("rule needs at least one clause")
        if len(self.connectives) != len(self.clauses) - 1:
            raise ValueError("need exactly one connective between consecutive clauses")


@dataclass
class RuleBase:
    """Vocabulary plus rules; immutable by convention once built."""

    inputs: list
    output: LinguisticVariable
    rules: list
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if self.resolution < 3:
            raise ValueError("resolution must be at least 3")
        names = [v.name for v in self.inputs]
        if len(set(names)) != len(names):
            raise ValueError("duplicate input variable names")

    def input_names(self):
        return [v.name for v in self.inputs]


@dataclass
class InferenceResult:
    aggregated: np.ndarray  # sampled output fuzzy set
    crisp: float


# ---------------------------------------------------------------------------
# Rule text parsing
#
# Grammar (keywords case-insensitive, '#' starts a comment):
#   rule   := 'if' clause (('and' | 'or') clause)* 'then' clause
#   clause := '(' variable 'is' term ')'
# Mixed and/or connectives apply left to right with no precedence.
# ---------------------------------------------------------------------------

def _tokenize(text: str):
    stripped = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    tokens = []
    i = 0
    while i < len(stripped):
        ch = stripped[i]
        if ch.isspace():
            i += 1
        elif ch == "(":
            depth, j = 1, i + 1
            while j < len(stripped) and depth:
                if stripped[j] == "(":
                    depth += 1
                elif stripped[j] == ")":
                    depth -= 1
                j += 1
            if depth:
                raise RuleParseError("unbalanced '(' in rule text")
            tokens.append(("group", stripped[i + 1 : j - 1]))
            i = j
        elif ch == ")":
            raise RuleParseError("unbalanced ')' in rule text")
        else:
            j = i
            while j < len(stripped) and not stripped[j].isspace() and stripped[j] not in "()":
                j += 1
            tokens.append(("word", stripped[i:j]))
            i = j
    return tokens


def _parse_clause(group_text: str, vocabulary: dict):
    parts = group_text.split()
    if len(parts) != 3 or parts[1].lower() != "is":
        raise RuleParseError(f"clause must read '(variable is term)', got '({group_text.strip()})'")
    var_name, term = parts[0], parts[2]
    if var_name not in vocabulary:
        raise RuleParseError(f"unknown variable '{var_name}'")
    if term not in vocabulary[var_name].terms:
        raise RuleParseError(f"unknown term '{term}' for variable '{var_name}'")
    return var_name, term


def parse_rule_base(text: str, inputs, output: LinguisticVariable):
    """Parse rule text against a vocabulary into a list of FuzzyRule.

    Raises RuleParseError naming the offending token on unknown variables or
    terms, and on empty input.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise RuleParseError("empty rule base")
    in_vocab = {v.name: v for v in inputs}
    out_vocab = {output.name: output}

    rules = []
    pos = 0

    def expect_word(expected):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos][0] != "word" or tokens[pos][1].lower() != expected:
            got = tokens[pos][1] if pos < len(tokens) else "end of input"
            raise RuleParseError(f"expected '{expected}', got '{got}'")
        pos += 1

    def expect_group():
        nonlocal pos
        if pos >= len(tokens) or tokens[pos][0] != "group":
            got = tokens[pos][1] if pos < len(tokens) else "end of input"
            raise RuleParseError(f"expected a '(variable is term)' clause, got '{got}'")
        body = tokens[pos][1]
        pos += 1
        return body

    while pos < len(tokens):
        expect_word("if")
        clauses = [_parse_clause(expect_group(), in_vocab)]
        connectives = []
        while pos < len(tokens) and tokens[pos][0] == "word" and tokens[pos][1].lower() in ("and", "or"):
            connectives.append(tokens[pos][1].lower())
            pos += 1
            clauses.append(_parse_clause(expect_group(), in_vocab))
        expect_word("then")
        consequent = _parse_clause(expect_group(), out_vocab)
        rules.append(FuzzyRule(tuple(clauses), tuple(connectives), consequent))
    return rules


def render_rules(rules) -> str:
    """Inverse of parse_rule_base: one statement per line."""
    lines = []
    for rule in rules:
        parts = [f"if ({rule.clauses[0][0]} is {rule.clauses[0][1]})"]
        for conn, (var, term) in zip(rule.connectives, rule.clauses[1:]):
            parts.append(f"{conn} ({var} is {term})")
        parts.append(f"then ({rule.consequent[0]} is {rule.consequent[1]})")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def evaluate_rule(rule: FuzzyRule, degrees: dict) -> float:
    """Rule activation from fuzzified degrees; AND=min, OR=max, left-to-right."""

    def degree(var, term):
        if var not in degrees:
            raise ValueError(f"no fuzzified degrees supplied for variable '{var}'")
        return degrees[var][term]

    acc = degree(*rule.clauses[0])
    for conn, clause in zip(rule.connectives, rule.clauses[1:]):
        d = degree(*clause)
        acc = min(acc, d) if conn == "and" else max(acc, d)
    return acc


def defuzzify_centroid(samples, lo: float, hi: float) -> float:
    """Center of mass of a sampled fuzzy set on a uniform grid over [lo, hi]."""
    mu = np.asarray(samples, dtype=float)
    total = float(mu.sum())
    if total <= 0.0:
        raise ValueError("cannot defuzzify an all-zero fuzzy set")
    xs = np.linspace(lo, hi, len(mu))
    return float((xs * mu).sum() / total)


def infer(rb: RuleBase, inputs: dict) -> InferenceResult:
    """Mamdani inference: clip each consequent at its rule activation, aggregate by max.

    Raises NoRuleFired when every activation is zero (callers typically map
    this to a decision value of 0).
    """
    if not rb.rules:
        raise ValueError("rule base has no rules")
    degrees = {}
    for var in rb.inputs:
        if var.name not in inputs:
            raise ValueError(f"missing input for variable '{var.name}'")
        degrees[var.name] = fuzzify(var, inputs[var.name])

    activations = [evaluate_rule(rule, degrees) for rule in rb.rules]
    if max(activations) <= 0.0:
        raise NoRuleFired("no rule fired")

    lo, hi = rb.output.universe
    xs = np.linspace(lo, hi, rb.resolution)
    aggregated = np.zeros(rb.resolution)
    for rule, activation in zip(rb.rules, activations):
        if activation <= 0.0:
            continue
        clipped = np.minimum(rb.output.terms[rule.consequent[1]](xs), activation)
        np.maximum(aggregated, clipped, out=aggregated)
    return InferenceResult(aggregated, defuzzify_centroid(aggregated, lo, hi))


# ---------------------------------------------------------------------------
# Default handoff vocabulary and rules
#
# The shipped vocabulary keeps the velocity crossover at the 10 km/h gate of
# the crisp algorithm and houses the reception threshold at the centre of the
# near_RTH term (margin 0 dB). The output terms are narrowed to the outer
# halves of [0, 1] so a fully fired handoff rule defuzzifies to ~0.833,
# inside the >0.8 "handoff necessary" band.
# ---------------------------------------------------------------------------

def default_vocabulary():
    inputs = [
        LinguisticVariable(
            "sinr_margin_db", (-10.0, 10.0),
            {
                "low": trapezoidal(-10, -10, -5, 0),
                "near_RTH": triangular(-5, 0, 5),
                "high": trapezoidal(-5, 0, 10, 10),
            },
            units="dB",
        ),
        LinguisticVariable(
            "velocity_kmh", (0.0, 120.0),
            {"low": trapezoidal(0, 0, 5, 15), "high": trapezoidal(5, 15, 120, 120)},
            units="km/h",
        ),
        LinguisticVariable(
            "load_mbps", (0.0, 100.0),
            {"low": trapezoidal(0, 0, 20, 60), "high": trapezoidal(20, 60, 100, 100)},
            units="Mbps",
        ),
        LinguisticVariable(
            "latency_ms", (0.0, 100.0),
            {"low": trapezoidal(0, 0, 20, 60), "high": trapezoidal(20, 60, 100, 100)},
            units="ms",
        ),
        LinguisticVariable(
            "battery_hours", (0.0, 10.0),
            {"low": trapezoidal(0, 0, 2, 5), "high": trapezoidal(2, 5, 10, 10)},
            units="h",
        ),
        LinguisticVariable(
            "authorization", (0.0, 1.0),
            {"no": triangular(0, 0, 1), "yes": triangular(0, 1, 1)},
        ),
    ]
    output = LinguisticVariable(
        "handoff_decision", (0.0, 1.0),
        {"no_handoff": triangular(0, 0, 0.5), "handoff": triangular(0.5, 1, 1)},
    )
    return inputs, output


DEFAULT_RULES_TEXT = """\
if (sinr_margin_db is near_RTH) or (sinr_margin_db is high) or (load_mbps is low) or (latency_ms is low) or (battery_hours is high) then (handoff_decision is handoff)
if (sinr_margin_db is low) or (velocity_kmh is high) then (handoff_decision is no_handoff)
if (load_mbps is high) and (latency_ms is high) then (handoff_decision is no_handoff)
if (authorization is no) then (handoff_decision is no_handoff)
"""


def default_rule_base(resolution: int = DEFAULT_RESOLUTION, rules_text: str = None) -> RuleBase:
    """The six-input handoff rule base; pass rules_text to replace the rules."""
    inputs, output = default_vocabulary()
    rules = parse_rule_base(rules_text if rules_text is not None else DEFAULT_RULES_TEXT,
                            inputs, output)
    return RuleBase(inputs, output, rules, resolution)


def handoff_inputs(margin_db, speed_kmh, load_mbps, real_time, battery_hours, authorized):
    """Crisp input vector for the default six-input handoff vocabulary."""
    return {
        "sinr_margin_db": float(margin_db),
        "velocity_kmh": float(speed_kmh),
        "load_mbps": float(load_mbps),
        "latency_ms": REAL_TIME_LATENCY_MS if real_time else NON_REAL_TIME_LATENCY_MS,
        "battery_hours": float(battery_hours),
        "authorization": 1.0 if authorized else 0.0,
    }


def decide_handoff(rb: RuleBase, measurement, threshold: float = DEFAULT_THRESHOLD):
    """Crisp handoff decision value in [0, 1] for the strongest candidate.

    Returns (value, recommend) with recommend = value >= threshold. When no
    rule fires the value is 0 and recommend is False regardless of threshold.
    """
    if not measurement.candidates:
        return 0.0, False
    best = max(measurement.candidates, key=lambda c: (c.sinr_db, -c.cell_id))
    inputs = handoff_inputs(
        best.sinr_db - measurement.serving.sinr_db,
        measurement.speed_kmh,
        best.load_mbps,
        measurement.traffic == "real_time",
        measurement.battery_hours,
        best.authorized,
    )
    try:
        result = infer(rb, inputs)
    except NoRuleFired:
        return 0.0, False
    return result.crisp, result.crisp >= threshold
