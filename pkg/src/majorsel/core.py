"""Domain types shared by every module: priors, instances, signaling schemes
and policies, plus their JSON documents.

Numbers are either :class:`fractions.Fraction` (exact mode) or ``float``
(float mode).  The mode is decided once per document: string literals and
JSON integers parse to fractions, any JSON float switches the whole document
to float mode.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Mapping, Union

Number = Union[Fraction, float]

FLOAT_PROB_TOL = 1e-12
FLOAT_TOL = 1e-9

SCHEMA_VERSION = 1


class ValidationError(ValueError):
    """Raised when a document or object violates a domain invariant."""


# ----------------------------------------------------------------------
# numeric helpers
# ----------------------------------------------------------------------


def parse_number(raw: Any) -> Number:
    """Parse a decimal/"p/q" string, an int, or a float."""
    if isinstance(raw, bool):
        raise ValidationError(f"not a number: {raw!r}")
    if isinstance(raw, Fraction):
        return raw
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, float):
        if not math.isfinite(raw):
            raise ValidationError(f"non-finite number: {raw!r}")
        return raw
    if isinstance(raw, str):
        try:
            return Fraction(raw.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse number {raw!r}") from exc
    raise ValidationError(f"not a number: {raw!r}")


def is_exact(*values: Any) -> bool:
    return all(isinstance(v, Fraction) for v in values)


def zero(exact: bool) -> Number:
    return Fraction(0) if exact else 0.0


def one(exact: bool) -> Number:
    return Fraction(1) if exact else 1.0


def as_mode(x: Number, exact: bool) -> Number:
    """Coerce ``x`` into the requested numeric mode."""
    if exact:
        if isinstance(x, float):
            raise ValidationError("cannot use a float in exact mode")
        return Fraction(x)
    return float(x)


def close(a: Number, b: Number, tol: float = FLOAT_TOL) -> bool:
    """Equality in exact mode, relative tolerance otherwise."""
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    a, b = float(a), float(b)
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def compare(a: Number, b: Number, tol: float = FLOAT_TOL) -> int:
    """Three-way comparison that treats float near-ties as ties."""
    if close(a, b, tol):
        return 0
    return -1 if a < b else 1


def sums_to_one(s: Number) -> bool:
    if isinstance(s, Fraction):
        return s == 1
    return abs(s - 1) <= FLOAT_PROB_TOL


def fmt(x: Number) -> str:
    """Human-friendly rendering: terminating fractions print as decimals."""
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        d = x.denominator
        for p in (2, 5):
            while d % p == 0:
                d //= p
        if d == 1:
            # terminating decimal
            s = f"{float(x):.15g}"
            if Fraction(s) == x:
                return s
        return f"{x.numerator}/{x.denominator}"
    return repr(x)


def dump_number(x: Number) -> Any:
    """JSON encoding: exact values become "p/q" strings, floats stay floats."""
    if isinstance(x, Fraction):
        return str(x)
    return float(x)


# ----------------------------------------------------------------------
# priors and instances
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDist:
    """Finite-support prior of one agent.

    Values are sorted strictly increasing and non-negative; zero-probability
    atoms are dropped on construction.
    """

    values: tuple
    probs: tuple

    def __post_init__(self) -> None:
        if len(self.values) != len(self.probs):
            raise ValidationError("values and probs differ in length")
        pairs = [(v, p) for v, p in zip(self.values, self.probs)]
        for v, p in pairs:
            if v < 0:
                raise ValidationError(f"negative value {fmt(v)}")
            if p < 0 or p > 1:
                raise ValidationError(f"probability {fmt(p)} outside [0,1]")
        pairs = [(v, p) for v, p in pairs if p != 0]
        if not pairs:
            raise ValidationError("empty support")
        pairs.sort(key=lambda vp: vp[0])
        for (v0, _), (v1, _) in zip(pairs, pairs[1:]):
            if v0 == v1:
                raise ValidationError(f"duplicate support value {fmt(v0)}")
        total = sum(p for _, p in pairs)
        if not sums_to_one(total):
            raise ValidationError(f"probabilities sum to {fmt(total)}")
        object.__setattr__(self, "values", tuple(v for v, _ in pairs))
        object.__setattr__(self, "probs", tuple(p for _, p in pairs))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> "DiscreteDist":
        pairs = list(pairs)
        return cls(tuple(v for v, _ in pairs), tuple(p for _, p in pairs))

    @classmethod
    def point(cls, v: Number) -> "DiscreteDist":
        return cls((v,), (one(isinstance(v, Fraction)),))

    @property
    def support(self) -> list:
        return list(zip(self.values, self.probs))

    @property
    def exact(self) -> bool:
        return is_exact(*self.values, *self.probs)

    @property
    def mean(self) -> Number:
        return sum((v * p for v, p in self.support), zero(self.exact))

    def prob(self, v: Number) -> Number:
        for value, p in self.support:
            if value == v:
                return p
        return zero(self.exact)

    def cdf(self, v: Number) -> Number:
        return sum((p for value, p in self.support if value <= v), zero(self.exact))

    def scaled(self, c: Number) -> "DiscreteDist":
        return DiscreteDist(tuple(v * c for v in self.values), self.probs)


@dataclass(frozen=True)
class Instance:
    """n independent agents with priors supported in [vmin, vmax]."""

    agents: tuple
    vmin: Number = None
    vmax: Number = None

    def __post_init__(self) -> None:
        agents = tuple(self.agents)
        if not agents:
            raise ValidationError("an instance needs at least one agent")
        object.__setattr__(self, "agents", agents)
        lo = min(d.values[0] for d in agents)
        hi = max(d.values[-1] for d in agents)
        if self.vmin is None:
            object.__setattr__(self, "vmin", lo)
        if self.vmax is None:
            object.__setattr__(self, "vmax", hi)
        if self.vmin > lo or self.vmax < hi or self.vmin > self.vmax:
            raise ValidationError(
                f"support [{fmt(lo)}, {fmt(hi)}] not inside "
                f"[{fmt(self.vmin)}, {fmt(self.vmax)}]"
            )

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def exact(self) -> bool:
        return all(d.exact for d in self.agents) and is_exact(self.vmin, self.vmax)

    @property
    def mode(self) -> str:
        return "exact" if self.exact else "float"

    @property
    def V(self) -> Number:
        """Value range ratio; infinite when vmin is zero (Bernoulli instances)."""
        if self.vmin == 0:
            return math.inf
        return self.vmax / self.vmin

    def levels(self) -> list:
        """Sorted distinct support values across all agents."""
        return sorted({v for d in self.agents for v in d.values})

    def expected_max(self) -> Number:
        """E[max_i v_i] via the product of CDFs."""
        prev = zero(self.exact)
        total = zero(self.exact)
        for v in self.levels():
            z = one(self.exact)
            for d in self.agents:
                z *= d.cdf(v)
            total += v * (z - prev)
            prev = z
        return total

    def scaled(self, c: Number) -> "Instance":
        return Instance(
            tuple(d.scaled(c) for d in self.agents), self.vmin * c, self.vmax * c
        )


# ----------------------------------------------------------------------
# mapping rules, selection rules, schemes, policies
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class MappingRule:
    """Per-agent tables ``value -> ((label, prob), ...)``."""

    rows: tuple

    def __post_init__(self) -> None:
        rows = tuple(
            {v: tuple((str(lab), p) for lab, p in out) for v, out in row.items()}
            for row in self.rows
        )
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return len(self.rows)

    def labels(self, i: int) -> list:
        """Labels agent ``i`` can emit with positive probability, first-seen order."""
        seen: dict = {}
        for v in sorted(self.rows[i]):
            for lab, p in self.rows[i][v]:
                if p > 0:
                    seen.setdefault(lab, None)
        return list(seen)


def full_revelation(instance: Instance) -> MappingRule:
    """Identity mapping: each value is sent as its own label."""
    rows = []
    for d in instance.agents:
        rows.append({v: ((fmt(v), one(d.exact)),) for v in d.values})
    return MappingRule(tuple(rows))


def no_information(instance: Instance, label: str = "_") -> MappingRule:
    rows = []
    for d in instance.agents:
        rows.append({v: ((label, one(d.exact)),) for v in d.values})
    return MappingRule(tuple(rows))


@dataclass(frozen=True)
class SignalingScheme:
    mapping: MappingRule
    selection: Any  # a selection rule from majorsel.selection


@dataclass(frozen=True)
class SignalingPolicy:
    """Mixture ``((weight, scheme), ...)`` over independent schemes."""

    components: tuple

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "components", tuple((w, s) for w, s in self.components)
        )

    @classmethod
    def single(cls, scheme: SignalingScheme) -> "SignalingPolicy":
        return cls(((Fraction(1), scheme),))

    @property
    def exact(self) -> bool:
        return all(isinstance(w, Fraction) for w, _ in self.components)


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------


def validate_policy(instance: Instance, policy: SignalingPolicy) -> list[str]:
    """Collect every invariant violation; an empty list means the policy is ok."""
    problems: list[str] = []
    if not policy.components:
        return ["policy has no components"]
    total = sum((w for w, _ in policy.components), Fraction(0))
    for c, (w, _) in enumerate(policy.components):
        if w < 0 or w > 1:
            problems.append(f"component {c}: weight {fmt(w)} outside [0,1]")
    if not sums_to_one(total):
        problems.append(f"component weights sum to {fmt(total)}")
    for c, (_, scheme) in enumerate(policy.components):
        problems.extend(
            f"component {c}: {msg}" for msg in _validate_scheme(instance, scheme)
        )
    return problems


def _validate_scheme(instance: Instance, scheme: SignalingScheme) -> list[str]:
    problems: list[str] = []
    mapping = scheme.mapping
    if mapping.n != instance.n:
        return [f"mapping has {mapping.n} rows for {instance.n} agents"]
    for i, (d, row) in enumerate(zip(instance.agents, mapping.rows)):
        for v in d.values:
            if v not in row:
                problems.append(f"agent {i}: no mapping for value {fmt(v)}")
                continue
            out = row[v]
            s = sum((p for _, p in out), zero(is_exact(*(p for _, p in out))))
            if any(p < 0 or p > 1 for _, p in out):
                problems.append(f"agent {i}, value {fmt(v)}: probability outside [0,1]")
            if not sums_to_one(s):
                problems.append(
                    f"agent {i}, value {fmt(v)}: signal probabilities sum to {fmt(s)}"
                )
    label_sets = [set(mapping.labels(i)) for i in range(mapping.n)]
    problems.extend(scheme.selection.validate(instance.n, label_sets))
    return problems


# ----------------------------------------------------------------------
# JSON documents
# ----------------------------------------------------------------------


def _walk_numbers(obj: Any) -> Iterable[Any]:
    if isinstance(obj, float):
        yield obj
    elif isinstance(obj, dict):
        for v in obj.values():
            yield from _walk_numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _walk_numbers(v)


def _doc_is_float(doc: Any) -> bool:
    if isinstance(doc, dict) and doc.get("mode") in ("exact", "float"):
        return doc["mode"] == "float"
    return any(True for _ in _walk_numbers(doc))


def _num(raw: Any, exact: bool) -> Number:
    x = parse_number(raw)
    if not exact:
        return float(x)
    # a float literal forced into exact mode is read as its shortest decimal
    return Fraction(repr(x)) if isinstance(x, float) else x


def instance_from_doc(doc: Mapping) -> Instance:
    if not isinstance(doc, Mapping) or "agents" not in doc:
        raise ValidationError("instance document needs an 'agents' list")
    exact = not _doc_is_float(doc)
    agents = []
    for i, agent in enumerate(doc["agents"]):
        try:
            support = agent["support"]
            pairs = [(_num(v, exact), _num(p, exact)) for v, p in support]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise ValidationError(f"agent {i}: {exc}") from exc
            raise ValidationError(f"agent {i}: malformed support") from exc
        try:
            agents.append(DiscreteDist.from_pairs(pairs))
        except ValidationError as exc:
            raise ValidationError(f"agent {i}: {exc}") from exc
    vmin = _num(doc["vmin"], exact) if "vmin" in doc else None
    vmax = _num(doc["vmax"], exact) if "vmax" in doc else None
    return Instance(tuple(agents), vmin, vmax)


def instance_to_doc(instance: Instance) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "mode": instance.mode,
        "agents": [
            {"support": [[dump_number(v), dump_number(p)] for v, p in d.support]}
            for d in instance.agents
        ],
        "vmin": dump_number(instance.vmin),
        "vmax": dump_number(instance.vmax),
    }


def load_instance(text: str) -> Instance:
    """Parse and validate an instance document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"parse failure: {exc}") from exc
    return instance_from_doc(doc)


def dump_instance(instance: Instance) -> str:
    return json.dumps(instance_to_doc(instance), indent=2)


def _mapping_from_doc(rows: list, exact: bool) -> MappingRule:
    parsed = []
    for row in rows:
        table = {}
        for value, out in row:
            table[_num(value, exact)] = tuple(
                (str(lab), _num(p, exact)) for lab, p in out
            )
        parsed.append(table)
    return MappingRule(tuple(parsed))


def _mapping_to_doc(mapping: MappingRule) -> list:
    return [
        [
            [dump_number(v), [[lab, dump_number(p)] for lab, p in row[v]]]
            for v in sorted(row)
        ]
        for row in mapping.rows
    ]


def policy_from_doc(doc: Mapping) -> SignalingPolicy:
    from majorsel.selection import selection_from_doc

    if not isinstance(doc, Mapping) or "components" not in doc:
        raise ValidationError("policy document needs a 'components' list")
    exact = not _doc_is_float(doc)
    comps = []
    try:
        for comp in doc["components"]:
            mapping = _mapping_from_doc(comp["mapping"], exact)
            selection = selection_from_doc(comp["selection"], lambda x: _num(x, exact))
            comps.append((_num(comp["weight"], exact), SignalingScheme(mapping, selection)))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed policy document: {exc}") from exc
    return SignalingPolicy(tuple(comps))


def policy_to_doc(policy: SignalingPolicy) -> dict:
    exact = policy.exact and all(
        is_exact(*(p for row in s.mapping.rows for out in row.values() for _, p in out))
        for _, s in policy.components
    )
    return {
        "schema": SCHEMA_VERSION,
        "mode": "exact" if exact else "float",
        "components": [
            {
                "weight": dump_number(w),
                "mapping": _mapping_to_doc(s.mapping),
                "selection": s.selection.to_doc(),
            }
            for w, s in policy.components
        ],
    }


def load_policy(text: str) -> SignalingPolicy:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"parse failure: {exc}") from exc
    return policy_from_doc(doc)


def dump_policy(policy: SignalingPolicy) -> str:
    return json.dumps(policy_to_doc(policy), indent=2)
