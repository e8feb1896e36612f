"""Abduce antecedent values from a seed rule and enumerate new rules.

For each attribute of a seed rule, the attribute is hidden and the model
predicts it from all the others; candidate values that survive the selection
strategy (and are not the seed's own value) become alternatives for that
attribute. The cross product of per-attribute alternatives, minus the seed's
own combination, is depth-first enumerated and materialized as syntactically
valid snort rules.

A candidate value of UNK means "drop the attribute": the materialized rule
omits it. Attributes the seed does not carry receive no candidates unless
allow_insertion is set, so generation is replacement-only by default.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

from .bayes import (
    PosteriorDistribution,
    SmoothedModel,
    predict_above_threshold,
    predict_distribution,
    predict_mle,
    predict_topk,
)
from .encoding import UNK, AttributeVocabulary, EncodedRule, encode_rule
from .errors import RuleforgeError
from .parser import (
    HEADER_ATTRIBUTES,
    VALUE_JOIN,
    ParsedRule,
    RuleOption,
    serialize_rule,
)

DEFAULT_LIMIT = 10_000
DEFAULT_SID_BASE = 250_001

_HEADER_FIELD = {
    "protocol": "protocol",
    "source_ip": "src_addr",
    "source_port": "src_port",
    "target_ip": "dst_addr",
    "target_port": "dst_port",
}


class CombinationOverflow(RuleforgeError):
    """Strict enumeration found more combinations than the limit allows."""


@dataclass(frozen=True)
class Strategy:
    """Candidate selection strategy: mle, topk(k), or threshold(t)."""

    kind: str
    k: int = 0
    t: float = 0.0

    @classmethod
    def mle(cls) -> "Strategy":
        return cls(kind="mle")

    @classmethod
    def topk(cls, k: int) -> "Strategy":
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        return cls(kind="topk", k=k)

    @classmethod
    def threshold(cls, t: float) -> "Strategy":
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {t}")
        return cls(kind="threshold", t=t)

    def select(self, distribution: PosteriorDistribution) -> list[str]:
        if self.kind == "mle":
            return [predict_mle(distribution)]
        if self.kind == "topk":
            return predict_topk(distribution, self.k)
        if self.kind == "threshold":
            return predict_above_threshold(distribution, self.t)
        raise ValueError(f"unknown strategy kind {self.kind!r}")


@dataclass
class SeedObservation:
    """A seed rule paired with its encoding under the model vocabulary."""

    rule: ParsedRule
    encoded: EncodedRule
    seed_sid: int

    @classmethod
    def from_rule(
        cls, rule: ParsedRule, vocab: AttributeVocabulary, rule_id: int = 0
    ) -> "SeedObservation":
        return cls(
            rule=rule,
            encoded=encode_rule(rule, vocab, rule_id=rule_id),
            seed_sid=rule.sid if rule.sid is not None else 0,
        )

    def value_of(self, vocab: AttributeVocabulary, attribute: str) -> str:
        return vocab.value_at(attribute, self.encoded.values[attribute])


@dataclass
class CandidateGraph:
    """Per-attribute value layers; the seed's value always leads each layer."""

    attribute_order: tuple[str, ...]
    layers: dict[str, tuple[str, ...]]

    def total_combinations(self) -> int:
        total = 1
        for attr in self.attribute_order:
            total *= len(self.layers[attr])
        return total


@dataclass
class GeneratedRule:
    """One synthesized rule plus where it came from.

    changes maps every graph attribute to kept/replaced/dropped/inserted.
    sid stays None until materialize_snort_rules allocates the batch.
    """

    rule: ParsedRule
    seed_sid: int
    changes: dict[str, str]
    sid: int | None = None


@dataclass
class EnumerationResult(Sequence):
    """Sequence of GeneratedRule with a truncation marker."""

    rules: list[GeneratedRule] = field(default_factory=list)
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.rules)

    def __getitem__(self, index):
        return self.rules[index]

    def __iter__(self) -> Iterator[GeneratedRule]:
        return iter(self.rules)


def abduce_antecedents(
    model: SmoothedModel,
    seed: SeedObservation,
    strategy: Strategy,
    *,
    allow_insertion: bool = False,
) -> dict[str, list[str]]:
    """Candidate values per attribute, most probable first.

    The strategy filters the full posterior; the seed's own value is then
    removed, so a returned list holds genuine alternatives only. Attributes
    absent from the seed (UNK) yield no candidates unless allow_insertion.
    """
    vocab = model.vocab
    candidates: dict[str, list[str]] = {}
    for attr in vocab.attributes:
        seed_value = seed.value_of(vocab, attr)
        if seed_value == UNK and not allow_insertion:
            candidates[attr] = []
            continue
        distribution = predict_distribution(model, seed.encoded, attr)
        selected = strategy.select(distribution)
        candidates[attr] = [value for value in selected if value != seed_value]
    return candidates


def build_candidate_graph(
    seed: SeedObservation,
    candidates: Mapping[str, Sequence[str]],
    vocab: AttributeVocabulary,
) -> CandidateGraph:
    """Arrange candidates into ordered layers, seed value first.

    UNK is dropped from header-attribute layers: a header position cannot be
    omitted from a rule, so that candidate is unrealizable.
    """
    order = vocab.attributes
    layers: dict[str, tuple[str, ...]] = {}
    for attr in order:
        seed_value = seed.value_of(vocab, attr)
        layer = [seed_value]
        for value in candidates.get(attr, ()):
            if value == seed_value or value in layer:
                continue
            if value == UNK and attr in HEADER_ATTRIBUTES:
                continue
            layer.append(value)
        layers[attr] = tuple(layer)
    return CandidateGraph(attribute_order=order, layers=layers)


def _split_composite(value: str) -> list[str]:
    return value.split(VALUE_JOIN)


def _apply_combination(
    seed_rule: ParsedRule, assignment: Mapping[str, str], seed_values: Mapping[str, str]
) -> tuple[ParsedRule, dict[str, str]]:
    """Build the rule for one combination and record per-attribute changes."""
    changes: dict[str, str] = {}
    header = seed_rule.header
    for attr, value in assignment.items():
        if attr not in _HEADER_FIELD:
            continue
        if value == seed_values[attr]:
            changes[attr] = "kept"
        else:
            header = replace(header, **{_HEADER_FIELD[attr]: value})
            changes[attr] = "replaced"

    new_options: list[RuleOption] = []
    replaced_done: set[str] = set()
    for opt in seed_rule.options:
        key = opt.key
        if key not in assignment:
            new_options.append(opt)  # not modeled: carried over verbatim
            continue
        value = assignment[key]
        if value == seed_values[key]:
            new_options.append(opt)
            changes[key] = "kept"
        elif value == UNK:
            changes[key] = "dropped"
        else:
            changes[key] = "replaced"
            if key not in replaced_done:
                replaced_done.add(key)
                for part in _split_composite(value):
                    new_options.append(RuleOption(key=key, value=part, ordinal=0))
    # attributes the seed lacked, now given a value (insertion path)
    for attr in sorted(assignment):
        if attr in _HEADER_FIELD or attr in changes:
            continue
        value = assignment[attr]
        if value == UNK:
            changes[attr] = "kept"
            continue
        changes[attr] = "inserted"
        for part in _split_composite(value):
            new_options.append(RuleOption(key=attr, value=part, ordinal=0))
    renumbered = tuple(
        RuleOption(key=o.key, value=o.value, ordinal=i) for i, o in enumerate(new_options)
    )
    rule = ParsedRule(
        header=header,
        options=renumbered,
        sid=None,
        rev=None,
        msg=None,
        references=(),
    )
    return rule, changes


def enumerate_rules(
    graph: CandidateGraph,
    seed: SeedObservation,
    limit: int = DEFAULT_LIMIT,
    *,
    strict: bool = False,
) -> EnumerationResult:
    """Depth-first enumeration of all combinations except the seed's own.

    Deterministic: layer order within each attribute and the attribute order
    itself fix the output sequence. Truncates at limit (truncated flag set);
    in strict mode a would-be truncation raises CombinationOverflow instead.
    """
    if limit < 0:
        raise ValueError(f"limit must be >= 0, got {limit}")
    total = graph.total_combinations() - 1
    if strict and total > limit:
        raise CombinationOverflow(f"{total} combinations exceed the limit of {limit}")
    order = graph.attribute_order
    seed_values = {attr: graph.layers[attr][0] for attr in order}
    result = EnumerationResult()
    for combo in itertools.product(*(graph.layers[attr] for attr in order)):
        assignment = dict(zip(order, combo))
        if assignment == seed_values:
            continue
        if len(result.rules) >= limit:
            result.truncated = True
            break
        rule, changes = _apply_combination(seed.rule, assignment, seed_values)
        result.rules.append(
            GeneratedRule(rule=rule, seed_sid=seed.seed_sid, changes=changes)
        )
    return result


def materialize_snort_rules(
    generated: Sequence[GeneratedRule],
    category: str,
    sid_base: int = DEFAULT_SID_BASE,
    *,
    sid_floor: int = DEFAULT_SID_BASE,
) -> str:
    """Assign identity metadata and serialize the batch to rules-file text.

    Each rule gets msg "<CATEGORY> Generated rule alert from ID-<sid>",
    rev 1, and a sequential sid starting at sid_base.
    """
    if sid_base < sid_floor:
        raise ValueError(f"sid_base {sid_base} is below the floor {sid_floor}")
    lines: list[str] = []
    for offset, gen in enumerate(generated):
        sid = sid_base + offset
        gen.sid = sid
        gen.rule.sid = sid
        gen.rule.rev = 1
        gen.rule.msg = f"{category} Generated rule alert from ID-{sid}"
        lines.append(serialize_rule(gen.rule, require_sid=True))
    if not lines:
        return ""
    return "\n".join(lines) + "\n"
