"""Bayes updates of one agent's prior under its mapping row, and the
receiver's eligible set."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from majorsel.core import (
    DiscreteDist,
    MappingRule,
    Number,
    ValidationError,
    close,
    is_exact,
    zero,
)


@dataclass(frozen=True)
class LabelPosterior:
    label: str
    q: Number  # probability the label is emitted
    mean: Number
    posterior: DiscreteDist


@dataclass(frozen=True)
class SignalPosterior:
    """Posterior table for one agent, labels in first-emitted order."""

    entries: tuple

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, label: str) -> LabelPosterior:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    @property
    def labels(self) -> list:
        return [e.label for e in self.entries]


def posteriors(dist: DiscreteDist, row: Mapping) -> SignalPosterior:
    """q(label) = sum_v Pr[v] Pr[label|v]; mean(label) = E[v | label].

    Labels emitted with probability zero are omitted.
    """
    exact = dist.exact and is_exact(*(p for out in row.values() for _, p in out))
    joint: dict = {}
    for v, pv in dist.support:
        if v not in row:
            raise ValidationError(f"mapping row has no entry for value {v}")
        for label, p in row[v]:
            if p == 0:
                continue
            cell = joint.setdefault(label, {})
            cell[v] = cell.get(v, zero(exact)) + pv * p
    entries = []
    for label, cell in joint.items():
        mass = list(cell.items())
        q = sum((m for _, m in mass), zero(exact))
        if q == 0:
            continue
        mean = sum((v * m for v, m in mass), zero(exact)) / q
        post = DiscreteDist.from_pairs(_normalise([(v, m / q) for v, m in mass], exact))
        entries.append(LabelPosterior(label, q, mean, post))
    return SignalPosterior(tuple(entries))


def _normalise(pairs: list, exact: bool) -> list:
    if exact:
        return pairs
    # float rounding can leave the sum a few ulps off 1
    s = sum(p for _, p in pairs)
    return [(v, p / s) for v, p in pairs]


def scheme_posteriors(agents: Sequence[DiscreteDist], mapping: MappingRule) -> list:
    return [posteriors(d, row) for d, row in zip(agents, mapping.rows)]


@dataclass(frozen=True)
class ReceiverModel:
    """``Exact`` picks from the argmax; ``Approx(eps)`` from means >= max/(1+eps)."""

    epsilon: Number | None = None

    def __post_init__(self) -> None:
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValidationError("approximate receiver needs epsilon > 0")

    @property
    def exact(self) -> bool:
        return self.epsilon is None

    @classmethod
    def parse(cls, text: str) -> "ReceiverModel":
        if text == "exact":
            return cls()
        if text.startswith("approx:"):
            return cls(Fraction(text.split(":", 1)[1]))
        raise ValidationError(f"unknown receiver model {text!r}")

    def __str__(self) -> str:
        return "exact" if self.exact else f"approx:{self.epsilon}"


EXACT = ReceiverModel()


def Approx(epsilon: Number) -> ReceiverModel:
    return ReceiverModel(epsilon)


def eligible_set(mus: Sequence[Number], model: ReceiverModel = EXACT) -> set:
    if not mus:
        raise ValueError("eligible_set needs at least one posterior mean")
    top = max(mus)
    if model.exact:
        return {i for i, m in enumerate(mus) if close(m, top)}
    floor = top / (1 + model.epsilon)
    return {i for i, m in enumerate(mus) if m >= floor or close(m, floor)}
