"""Selection rules: which receiver-eligible agent gets picked for a joint signal.

Every rule offers ``select(labels, mus, eligible)`` returning a distribution
over agents (or ``None`` to abstain, meaning a uniform split over the eligible
set).  Rules built from random processing orders also offer ``analytic``,
which returns ``Pr[agent i selected | agent i emitted label]`` for every
(agent, label) without enumerating joint signals.  The two routes are computed
differently on purpose: ``select`` averages over predecessor subsets, while
``analytic`` integrates over uniform arrival times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable, Sequence

from majorsel.core import (
    Number,
    ValidationError,
    compare,
    dump_number,
    one,
    sums_to_one,
    zero,
)
from majorsel.posterior import EXACT, ReceiverModel, eligible_set


def _exact_of(*xs) -> bool:
    return all(isinstance(x, Fraction) for x in xs)


def random_order_pass(accepts: Sequence[Number]) -> tuple[list, Number]:
    """Candidates visited in uniformly random order, each accepting
    independently with its probability; returns per-candidate selection
    probabilities and the probability nobody accepts.

    Sums over the size b of the set of candidates preceding each one: a given
    predecessor set has probability b!(s-1-b)!/s!, and the sum over all such
    sets of their rejection products is an elementary symmetric polynomial.
    """
    s = len(accepts)
    exact = _exact_of(*accepts)
    weights = [Fraction(factorial(b) * factorial(s - 1 - b), factorial(s)) for b in range(s)]
    if not exact:
        weights = [float(w) for w in weights]
    out = []
    for c in range(s):
        # e[b] = sum over b-subsets of the others of prod (1 - a_j)
        e = [one(exact)] + [zero(exact)] * (s - 1)
        for j, a in enumerate(accepts):
            if j == c:
                continue
            r = one(exact) - a
            for b in range(s - 1, 0, -1):
                e[b] += e[b - 1] * r
        total = sum((w * eb for w, eb in zip(weights, e)), zero(exact))
        out.append(accepts[c] * total)
    none = one(exact)
    for a in accepts:
        none *= one(exact) - a
    return out, none


# polynomial helpers for the arrival-time route -------------------------


def _poly_mul_linear(poly: list, c0: Number, c1: Number) -> list:
    out = [c0 * poly[0]] + [c0 * poly[d] + c1 * poly[d - 1] for d in range(1, len(poly))]
    out.append(c1 * poly[-1])
    return out


def _poly_integral01(poly: list, exact: bool) -> Number:
    total = zero(exact)
    for d, c in enumerate(poly):
        total += c * (Fraction(1, d + 1) if exact else 1.0 / (d + 1))
    return total


def _mass(post, pred) -> Number:
    exact = all(isinstance(e.q, Fraction) for e in post)
    return sum((e.q for e in post if pred(e)), zero(exact))


def _argmax_lowest(mus: Sequence[Number], among: Sequence[int] | None = None) -> int:
    idx = list(range(len(mus))) if among is None else list(among)
    best = eligible_set([mus[i] for i in idx], EXACT)
    return idx[min(best)]


# ----------------------------------------------------------------------
# rules
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RankingScheme:
    """Pick the first agent of ``order`` among those with the top posterior mean."""

    order: tuple

    kind = "ranking"

    def select(self, labels, mus, eligible):
        top = eligible_set(mus, EXACT)
        for i in self.order:
            if i in top:
                return {i: one(_exact_of(*mus))}
        raise ValidationError("ranking does not cover the argmax set")

    def analytic(self, posts, receiver: ReceiverModel):
        pos = {a: r for r, a in enumerate(self.order)}
        out = []
        for i, post in enumerate(posts):
            table = {}
            for e in post:
                p = one(_exact_of(e.q))
                for j, other in enumerate(posts):
                    if j == i:
                        continue
                    p *= _mass(
                        other,
                        lambda o: compare(o.mean, e.mean) < 0
                        or compare(o.mean, e.mean) == 0 and pos[j] > pos[i],
                    )
                table[e.label] = p
            out.append(table)
        return out

    def validate(self, n, label_sets):
        if sorted(self.order) != list(range(n)):
            return [f"ranking order {list(self.order)} is not a permutation of {n} agents"]
        return []

    def to_doc(self):
        return {"type": self.kind, "order": list(self.order)}


@dataclass(frozen=True)
class RoundedOrder:
    """Full-revelation rounding: among agents holding the top mean, visit in
    random order, accept agent i emitting label l with ``accept[i][l]``;
    if nobody accepts, take the lowest-index top agent."""

    accept: tuple  # per agent: {label: probability}

    kind = "rounded_order"

    def _a(self, i, label):
        return self.accept[i].get(label, 0)

    def select(self, labels, mus, eligible):
        top = sorted(eligible_set(mus, EXACT))
        accepts = [self._a(i, labels[i]) for i in top]
        exact = _exact_of(*mus, *accepts)
        accepts = [Fraction(a) if exact else float(a) for a in accepts]
        probs, none = random_order_pass(accepts)
        dist = {i: p for i, p in zip(top, probs)}
        dist[top[0]] = dist[top[0]] + none
        return dist

    def analytic(self, posts, receiver: ReceiverModel):
        out = []
        for i, post in enumerate(posts):
            table = {}
            for e in post:
                exact = _exact_of(e.q)
                a_i = self._a(i, e.label)
                # others: strictly below, or tied (then a competitor in the pass)
                poly = [one(exact)]
                fallback = one(exact) - a_i
                for j, other in enumerate(posts):
                    if j == i:
                        continue
                    below = _mass(other, lambda o: compare(o.mean, e.mean) < 0)
                    tied = [o for o in other if compare(o.mean, e.mean) == 0]
                    tied_acc = sum((o.q * self._a(j, o.label) for o in tied), zero(exact))
                    tied_mass = sum((o.q for o in tied), zero(exact))
                    poly = _poly_mul_linear(poly, below + tied_mass, -tied_acc)
                    if j < i:
                        fallback *= below
                    else:
                        fallback *= below + tied_mass - tied_acc
                table[e.label] = a_i * _poly_integral01(poly, exact) + fallback
            out.append(table)
        return out

    def validate(self, n, label_sets):
        problems = []
        if len(self.accept) != n:
            return [f"rounded order lists {len(self.accept)} agents, expected {n}"]
        for i, table in enumerate(self.accept):
            for lab, a in table.items():
                if lab not in label_sets[i]:
                    problems.append(f"agent {i}: acceptance for unknown label {lab!r}")
                if a < 0 or a > 1:
                    problems.append(f"agent {i}: acceptance {a} outside [0,1]")
        return problems

    def to_doc(self):
        return {
            "type": self.kind,
            "accept": [
                [[lab, dump_number(a)] for lab, a in sorted(t.items())] for t in self.accept
            ],
        }


@dataclass(frozen=True)
class ThresholdRoundedOrder:
    """Bucket rounding for a target interval [lo, hi].

    If some posterior mean exceeds ``hi`` the highest mean wins.  Otherwise
    agents whose mean lies in [lo, hi] are visited in random order and agent
    i accepts with ``accept[i]``; if nobody accepts the highest mean wins.
    Ties on the highest mean go to the lowest index.
    """

    lo: Number
    hi: Number
    accept: tuple

    kind = "threshold_rounded_order"

    def _inside(self, m) -> bool:
        return compare(m, self.lo) >= 0 and compare(m, self.hi) <= 0

    def _above(self, m) -> bool:
        return compare(m, self.hi) > 0

    def select(self, labels, mus, eligible):
        exact = _exact_of(*mus)
        if any(self._above(m) for m in mus):
            return {_argmax_lowest(mus): one(exact)}
        cand = [i for i, m in enumerate(mus) if self._inside(m)]
        accepts = [self.accept[i] for i in cand]
        exact = exact and _exact_of(*accepts)
        accepts = [Fraction(a) if exact else float(a) for a in accepts]
        probs, none = random_order_pass(accepts)
        dist = {i: p for i, p in zip(cand, probs)}
        j = _argmax_lowest(mus)
        dist[j] = dist.get(j, zero(exact)) + none
        return dist

    def analytic(self, posts, receiver: ReceiverModel):
        # pass-selected agents must be receiver-eligible whatever the others hold
        if receiver.exact or compare(self.hi, self.lo * (1 + receiver.epsilon)) > 0:
            return None
        out = []
        for i, post in enumerate(posts):
            table = {}
            for e in post:
                exact = _exact_of(e.q)

                def beats(j, o, mean=e.mean):
                    c = compare(o.mean, mean)
                    return c < 0 or c == 0 and j > i

                if self._above(e.mean):
                    p = one(exact)
                    for j, other in enumerate(posts):
                        if j != i:
                            p *= _mass(other, lambda o, j=j: beats(j, o))
                    table[e.label] = p
                    continue
                a_i = self.accept[i] if self._inside(e.mean) else zero(exact)
                fallback = one(exact) - a_i
                poly = [one(exact)]
                for j, other in enumerate(posts):
                    if j == i:
                        continue
                    s = zero(exact)
                    for o in other:
                        if not self._above(o.mean) and beats(j, o):
                            s += o.q * (one(exact) - (self.accept[j] if self._inside(o.mean) else 0))
                    fallback *= s
                    low = _mass(other, lambda o: not self._above(o.mean))
                    inside = _mass(other, lambda o: self._inside(o.mean))
                    poly = _poly_mul_linear(poly, low, -inside * self.accept[j])
                p = fallback
                if a_i:
                    p += a_i * _poly_integral01(poly, exact)
                table[e.label] = p
            out.append(table)
        return out

    def validate(self, n, label_sets):
        problems = []
        if len(self.accept) != n:
            return [f"threshold rule lists {len(self.accept)} agents, expected {n}"]
        if self.lo > self.hi:
            problems.append("threshold interval is empty")
        for i, a in enumerate(self.accept):
            if a < 0 or a > 1:
                problems.append(f"agent {i}: acceptance {a} outside [0,1]")
        return problems

    def to_doc(self):
        return {
            "type": self.kind,
            "lo": dump_number(self.lo),
            "hi": dump_number(self.hi),
            "accept": [dump_number(a) for a in self.accept],
        }


@dataclass(frozen=True)
class LargestIndexThenPrefixMax:
    """Agents ``k..n-1`` may emit ``high_label``; the largest such index wins.
    Otherwise the highest mean among agents ``0..k-1`` wins (lowest index on ties)."""

    k: int
    high_label: str = "s"

    kind = "largest_index_prefix_max"

    def select(self, labels, mus, eligible):
        exact = _exact_of(*mus)
        for i in range(len(labels) - 1, self.k - 1, -1):
            if labels[i] == self.high_label:
                return {i: one(exact)}
        return {_argmax_lowest(mus, range(self.k)): one(exact)}

    def _consistent(self, posts) -> bool:
        n = len(posts)
        for i in range(self.k, n):
            for e in posts[i]:
                if e.label != self.high_label:
                    continue
                for j in range(n):
                    if j == i:
                        continue
                    for o in posts[j]:
                        if j > i and j >= self.k and o.label == self.high_label:
                            continue
                        if compare(o.mean, e.mean) > 0:
                            return False
        floor = max(min(o.mean for o in posts[j]) for j in range(self.k))
        for j in range(self.k, n):
            for o in posts[j]:
                if o.label != self.high_label and compare(o.mean, floor) > 0:
                    return False
        return True

    def analytic(self, posts, receiver: ReceiverModel):
        if not self._consistent(posts):
            return None
        n = len(posts)

        def p_high(j):
            try:
                return posts[j][self.high_label].q
            except KeyError:
                return 0

        out = []
        for i, post in enumerate(posts):
            table = {}
            for e in post:
                exact = _exact_of(e.q)
                if i >= self.k:
                    p = one(exact) if e.label == self.high_label else zero(exact)
                    for j in range(i + 1, n):
                        p *= one(exact) - p_high(j)
                else:
                    p = one(exact)
                    for j in range(self.k, n):
                        p *= one(exact) - p_high(j)
                    for j in range(self.k):
                        if j == i:
                            continue
                        p *= _mass(
                            posts[j],
                            lambda o, j=j: compare(o.mean, e.mean) < 0
                            or compare(o.mean, e.mean) == 0 and j > i,
                        )
                table[e.label] = p
            out.append(table)
        return out

    def validate(self, n, label_sets):
        if not 1 <= self.k <= n:
            return [f"prefix size k={self.k} outside [1, {n}]"]
        return []

    def to_doc(self):
        return {"type": self.kind, "k": self.k, "high_label": self.high_label}


@dataclass(frozen=True)
class ExplicitTable:
    """Joint-signal lookup; missing joint signals split uniformly over the eligible set."""

    entries: dict = field(default_factory=dict)

    kind = "table"

    def select(self, labels, mus, eligible):
        return self.entries.get(tuple(labels))

    def analytic(self, posts, receiver):
        return None

    def validate(self, n, label_sets):
        problems = []
        for key, dist in self.entries.items():
            if len(key) != n:
                problems.append(f"table entry {key} has wrong arity")
                continue
            for i, lab in enumerate(key):
                if lab not in label_sets[i]:
                    problems.append(f"table entry {key}: agent {i} never emits {lab!r}")
            if any(not 0 <= a < n for a in dist):
                problems.append(f"table entry {key}: unknown agent index")
            total = sum(dist.values(), Fraction(0))
            if not sums_to_one(total):
                problems.append(f"table entry {key}: selection probabilities sum to {total}")
        return problems

    def to_doc(self):
        return {
            "type": self.kind,
            "entries": [
                {
                    "signals": list(key),
                    "select": [[a, dump_number(p)] for a, p in sorted(dist.items())],
                }
                for key, dist in self.entries.items()
            ],
        }


RULES = {
    cls.kind: cls
    for cls in (RankingScheme, RoundedOrder, ThresholdRoundedOrder, LargestIndexThenPrefixMax, ExplicitTable)
}


def selection_from_doc(doc: dict, num: Callable):
    kind = doc.get("type")
    if kind == "ranking":
        return RankingScheme(tuple(int(i) for i in doc["order"]))
    if kind == "rounded_order":
        return RoundedOrder(tuple({str(l): num(a) for l, a in row} for row in doc["accept"]))
    if kind == "threshold_rounded_order":
        return ThresholdRoundedOrder(
            num(doc["lo"]), num(doc["hi"]), tuple(num(a) for a in doc["accept"])
        )
    if kind == "largest_index_prefix_max":
        return LargestIndexThenPrefixMax(int(doc["k"]), str(doc.get("high_label", "s")))
    if kind == "table":
        entries = {}
        for row in doc.get("entries", []):
            entries[tuple(str(s) for s in row["signals"])] = {
                int(a): num(p) for a, p in row["select"]
            }
        return ExplicitTable(entries)
    raise ValidationError(f"unknown selection rule type {kind!r}")
