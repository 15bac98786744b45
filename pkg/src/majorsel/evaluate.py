"""Per-agent expected utilities of a signaling policy.

``evaluate_exact`` enumerates joint signals lexicographically (scheme, then
label vector) and accumulates in that fixed order.  Conditioning on the joint
signal already integrates the value draw, because the posterior mean is the
conditional expected value.  When the joint space is over budget and the
selection rule admits a closed form, per-label selection probabilities are
used instead.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from majorsel.core import (
    Instance,
    Number,
    SCHEMA_VERSION,
    SignalingPolicy,
    ValidationError,
    close,
    dump_number,
    is_exact,
    sums_to_one,
    zero,
)
from majorsel.grid import BucketGrid, instance_grid
from majorsel.posterior import EXACT, ReceiverModel, eligible_set, scheme_posteriors

DEFAULT_BUDGET = 10**7
# above this many joint outcomes ``auto`` prefers a closed form when one exists
AUTO_ENUMERATE_LIMIT = 10**4


class UtilityModel(enum.Enum):
    VALUE = "value"
    SELECTION = "selection"


class BudgetExceeded(RuntimeError):
    pass


class IneligibleSelection(ValidationError):
    pass


@dataclass(frozen=True)
class EvalReport:
    utilities: tuple
    total: Number
    welfare_opt: Number
    per_scheme: tuple
    mode: str
    receiver: str
    utility: str
    method: str
    stderr: Optional[tuple] = None

    def prefix(self, k: int) -> Number:
        return sum(sorted(self.utilities)[:k], zero(self.mode == "exact"))

    def to_doc(self) -> dict:
        doc = {
            "schema": SCHEMA_VERSION,
            "mode": self.mode,
            "receiver": self.receiver,
            "utility": self.utility,
            "method": self.method,
            "utilities": [dump_number(u) for u in self.utilities],
            "total": dump_number(self.total),
            "welfare_opt": dump_number(self.welfare_opt),
            "per_scheme": [[dump_number(u) for u in row] for row in self.per_scheme],
        }
        if self.stderr is not None:
            doc["stderr"] = [float(s) for s in self.stderr]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), indent=2)


def _policy_exact(instance: Instance, policy: SignalingPolicy) -> bool:
    if not (instance.exact and policy.exact):
        return False
    for _, scheme in policy.components:
        for row in scheme.mapping.rows:
            if not is_exact(*(p for out in row.values() for _, p in out)):
                return False
    return True


def _check_policy(instance: Instance, policy: SignalingPolicy) -> None:
    from majorsel.core import validate_policy

    problems = validate_policy(instance, policy)
    if problems:
        raise ValidationError("; ".join(problems))


def _joint_count(posts) -> int:
    return math.prod(len(p) for p in posts)


def _selection_dist(scheme, labels, mus, receiver, exact):
    eligible = eligible_set(mus, receiver)
    dist = scheme.selection.select(labels, mus, eligible)
    if dist is None:
        share = Fraction(1, len(eligible)) if exact else 1.0 / len(eligible)
        return {i: share for i in sorted(eligible)}
    bad = [i for i, p in dist.items() if p > 0 and i not in eligible]
    if bad:
        raise IneligibleSelection(
            f"selection nominates agent {bad[0]} outside the eligible set "
            f"{sorted(eligible)} on signals {list(labels)}"
        )
    total = sum(dist.values(), zero(exact))
    if not sums_to_one(total):
        raise ValidationError(f"selection probabilities sum to {total} on {list(labels)}")
    return dist


def iter_joint(posts):
    """Joint label outcomes in lexicographic order: (entries, probability)."""
    for combo in itertools.product(*(p.entries for p in posts)):
        prob = combo[0].q
        for e in combo[1:]:
            prob *= e.q
        yield combo, prob


def _scheme_enumerate(instance, scheme, posts, receiver, utility, exact):
    n = instance.n
    u = [zero(exact)] * n
    for combo, prob in iter_joint(posts):
        labels = [e.label for e in combo]
        mus = [e.mean for e in combo]
        dist = _selection_dist(scheme, labels, mus, receiver, exact)
        for i, p in dist.items():
            gain = mus[i] if utility is UtilityModel.VALUE else 1
            u[i] += prob * p * gain
    return u


def _scheme_analytic(instance, scheme, posts, receiver, utility, exact):
    tables = scheme.selection.analytic(posts, receiver)
    if tables is None:
        return None
    u = []
    for post, table in zip(posts, tables):
        acc = zero(exact)
        for e in post:
            gain = e.mean if utility is UtilityModel.VALUE else 1
            acc += e.q * table[e.label] * gain
        u.append(acc)
    return u


def evaluate_exact(
    instance: Instance,
    policy: SignalingPolicy,
    receiver: ReceiverModel = EXACT,
    utility: UtilityModel = UtilityModel.VALUE,
    budget: int = DEFAULT_BUDGET,
    method: str = "auto",
) -> EvalReport:
    """Exact U_i for every agent.

    ``method`` is ``"enumerate"``, ``"analytic"`` or ``"auto"``.  ``auto``
    enumerates small schemes, uses the closed form for larger ones when the
    rule has one, and otherwise enumerates up to ``budget`` joint outcomes.
    """
    if method not in ("auto", "enumerate", "analytic"):
        raise ValueError(f"unknown method {method!r}")
    _check_policy(instance, policy)
    exact = _policy_exact(instance, policy)
    n = instance.n
    total_u = [zero(exact)] * n
    per_scheme = []
    used = set()
    for w, scheme in policy.components:
        posts = scheme_posteriors(instance.agents, scheme.mapping)
        count = _joint_count(posts)
        u = None
        if method == "analytic" or (method == "auto" and count > AUTO_ENUMERATE_LIMIT):
            u = _scheme_analytic(instance, scheme, posts, receiver, utility, exact)
            if u is None and method == "analytic":
                raise ValidationError(f"{scheme.selection.kind} rule has no closed form here")
            if u is not None:
                used.add("analytic")
        if u is None:
            if count > budget:
                raise BudgetExceeded(f"{count} joint signals exceed budget {budget}")
            u = _scheme_enumerate(instance, scheme, posts, receiver, utility, exact)
            used.add("enumerate")
        per_scheme.append(tuple(u))
        total_u = [a + w * b for a, b in zip(total_u, u)]
    return EvalReport(
        utilities=tuple(total_u),
        total=sum(total_u, zero(exact)),
        welfare_opt=instance.expected_max(),
        per_scheme=tuple(per_scheme),
        mode="exact" if exact else "float",
        receiver=str(receiver),
        utility=utility.value,
        method="+".join(sorted(used)),
    )


def evaluate_mc(
    instance: Instance,
    policy: SignalingPolicy,
    receiver: ReceiverModel = EXACT,
    utility: UtilityModel = UtilityModel.VALUE,
    samples: int = 100_000,
    seed: int = 0,
) -> EvalReport:
    """Monte Carlo estimate: draw a scheme, true values, labels, then the
    selected agent.  The Value model credits the selected agent's true value.
    """
    if samples < 1:
        raise ValidationError("samples must be at least 1")
    _check_policy(instance, policy)
    rng = np.random.default_rng(seed)
    n = instance.n
    weights = np.array([float(w) for w, _ in policy.components])
    comp = rng.choice(len(weights), size=samples, p=weights / weights.sum())
    gains = np.zeros((samples, n))
    per_scheme = []
    for c, (_, scheme) in enumerate(policy.components):
        idx = np.flatnonzero(comp == c)
        m = len(idx)
        posts = scheme_posteriors(instance.agents, scheme.mapping)
        label_ix = [{e.label: k for k, e in enumerate(p)} for p in posts]
        values = np.zeros((m, n))
        codes = np.zeros((m, n), dtype=np.int64)
        for i, (d, row) in enumerate(zip(instance.agents, scheme.mapping.rows)):
            vi = rng.choice(len(d.values), size=m, p=_probs(d.probs))
            values[:, i] = np.array([float(v) for v in d.values])[vi]
            draw = rng.random(m)
            for a, v in enumerate(d.values):
                rows = vi == a
                out = [(lab, float(p)) for lab, p in row[v] if p > 0]
                cum = np.cumsum([p for _, p in out])
                pick = np.minimum(np.searchsorted(cum / cum[-1], draw[rows], side="right"), len(out) - 1)
                codes[rows, i] = [label_ix[i][out[k][0]] for k in pick]
        uniq, inverse = np.unique(codes, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        pick_u = rng.random(m)
        chosen = np.empty(m, dtype=np.int64)
        for r, key in enumerate(uniq):
            combo = [posts[i].entries[key[i]] for i in range(n)]
            labels = [e.label for e in combo]
            mus = [e.mean for e in combo]
            dist = _selection_dist(scheme, labels, mus, receiver, False)
            agents = sorted(dist)
            cum = np.cumsum([float(dist[a]) for a in agents])
            rows = inverse == r
            k = np.minimum(np.searchsorted(cum / cum[-1], pick_u[rows], side="right"), len(agents) - 1)
            chosen[rows] = np.array(agents)[k]
        g = values[np.arange(m), chosen] if utility is UtilityModel.VALUE else np.ones(m)
        gains[idx, chosen] = g
        sums = np.bincount(chosen, weights=g, minlength=n)
        per_scheme.append(tuple(float(x) for x in sums / max(m, 1)))
    mean = gains.mean(axis=0)
    stderr = gains.std(axis=0, ddof=1) / math.sqrt(samples) if samples > 1 else np.zeros(n)
    return EvalReport(
        utilities=tuple(float(x) for x in mean),
        total=float(mean.sum()),
        welfare_opt=float(instance.expected_max()),
        per_scheme=tuple(per_scheme),
        mode="float",
        receiver=str(receiver),
        utility=utility.value,
        method=f"mc:{samples}:seed={seed}",
        stderr=tuple(float(s) for s in stderr),
    )


def _probs(ps) -> np.ndarray:
    arr = np.array([float(p) for p in ps])
    return arr / arr.sum()


# ----------------------------------------------------------------------
# bucket decomposition and audits
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class BucketContributions:
    c: tuple  # c[i][k]
    grid: BucketGrid

    def row_sums(self) -> tuple:
        return tuple(sum(row[1:], row[0]) for row in self.c)


def bucket_contributions(
    instance: Instance,
    policy: SignalingPolicy,
    epsilon: Number,
    receiver: ReceiverModel = EXACT,
    budget: int = DEFAULT_BUDGET,
) -> BucketContributions:
    """Value-model utility of each agent split by the bucket holding its
    posterior mean at the moment it is selected."""
    _check_policy(instance, policy)
    grid = instance_grid(instance, epsilon)
    exact = _policy_exact(instance, policy)
    n = instance.n
    c = [[zero(exact)] * grid.K for _ in range(n)]
    for w, scheme in policy.components:
        posts = scheme_posteriors(instance.agents, scheme.mapping)
        if _joint_count(posts) > budget:
            raise BudgetExceeded("joint signal space exceeds budget")
        for combo, prob in iter_joint(posts):
            labels = [e.label for e in combo]
            mus = [e.mean for e in combo]
            dist = _selection_dist(scheme, labels, mus, receiver, exact)
            for i, p in dist.items():
                k = grid.bucket_of(mus[i])
                c[i][k] += w * prob * p * mus[i]
    return BucketContributions(tuple(tuple(r) for r in c), grid)


def sorted_prefixes(u: Sequence[Number]) -> list:
    out, acc = [], None
    for x in sorted(u):
        acc = x if acc is None else acc + x
        out.append(acc)
    return out


def prefix_ratios(u: Sequence[Number], reference: Sequence[Number]) -> list:
    """Per k: reference's k-smallest prefix over u's (0/0 counts as 1)."""
    if len(u) != len(reference):
        raise ValidationError("utility vectors differ in length")
    out = []
    for a, b in zip(sorted_prefixes(u), sorted_prefixes(reference)):
        if _is_zero(a):
            out.append(1 if _is_zero(b) else math.inf)
        else:
            out.append(b / a)
    return out


def _is_zero(x: Number) -> bool:
    return x == 0 if is_exact(x) else abs(x) <= 1e-15


def audit_alpha(u: Sequence[Number], reference: Sequence[Number]) -> Number:
    """Smallest alpha with every k-smallest prefix of u at least 1/alpha of
    the reference's."""
    return max(prefix_ratios(u, reference))
