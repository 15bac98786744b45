"""Hard instance family for majorization and its S_k policies.

Agent i (1-based) has value i+1 with probability 1/i and 1 otherwise, so every
prior mean is 2.  Policy S_k reveals agents 1..k and lets each later agent
flag its high value with a tuned probability x_i; these probabilities make
all flagged agents equally well off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from majorsel.core import (
    DiscreteDist,
    Instance,
    MappingRule,
    Number,
    SignalingPolicy,
    SignalingScheme,
    ValidationError,
    dump_number,
    fmt,
)
from majorsel.evaluate import evaluate_exact
from majorsel.posterior import EXACT, ReceiverModel
from majorsel.selection import LargestIndexThenPrefixMax

HIGH, LOW = "s", "sbar"


def _check(n: int, k: int | None = None) -> None:
    if n < 1:
        raise ValidationError("n must be at least 1")
    if k is not None and not 1 <= k <= n:
        raise ValidationError(f"k={k} outside [1, {n}]")


def make_lb_instance(n: int) -> Instance:
    _check(n)
    agents = []
    for i in range(1, n + 1):
        if i == 1:
            agents.append(DiscreteDist.point(Fraction(2)))
        else:
            agents.append(DiscreteDist.from_pairs([(Fraction(1), 1 - Fraction(1, i)), (Fraction(i + 1), Fraction(1, i))]))
    return Instance(tuple(agents), Fraction(1), Fraction(n + 1))


def H(n: int, k: int) -> Fraction:
    """Tail harmonic sum: sum_{i=k}^{n} 1/(i+1); empty when k > n."""
    return sum((Fraction(1, i + 1) for i in range(k, n + 1)), Fraction(0))


def sk_x(n: int, k: int) -> dict:
    """Flag probability x_i for each agent i in k+1..n (1-based)."""
    _check(n, k)
    base = Fraction(k, k + 1) + H(n, k + 1)
    return {i: Fraction(i, i + 1) / (base - H(n, i + 1)) for i in range(k + 1, n + 1)}


def build_sk_policy(n: int, k: int) -> SignalingPolicy:
    x = sk_x(n, k)
    inst = make_lb_instance(n)
    rows = []
    for i, d in enumerate(inst.agents, start=1):
        if i <= k:
            rows.append({v: ((fmt(v), Fraction(1)),) for v in d.values})
        else:
            high = Fraction(i + 1)
            out = [(HIGH, x[i])] + ([(LOW, 1 - x[i])] if x[i] < 1 else [])
            rows.append({Fraction(1): ((LOW, Fraction(1)),), high: tuple(out)})
    scheme = SignalingScheme(MappingRule(tuple(rows)), LargestIndexThenPrefixMax(k, HIGH))
    return SignalingPolicy.single(scheme)


def sk_utilities_closed_form(n: int, k: int) -> tuple:
    _check(n, k)
    c = 1 / (Fraction(k, k + 1) + H(n, k + 1))
    return tuple(Fraction(j + 1, k + 1) * c if j <= k else c for j in range(1, n + 1))


def sk_prefix_closed_form(n: int, k: int) -> Fraction:
    return Fraction(1, 2) * k * (k + 3) / (k + (k + 1) * H(n, k + 1))


def R(n: int, k: int) -> Fraction:
    """Lower bound on the best achievable sum of the k smallest utilities."""
    _check(n, k)
    return Fraction(1, 2) * (k + 1) / (1 + H(n, k + 1))


def universal_floor(n: int) -> float:
    """No policy on the n-agent family is better than this majorized (natural logs)."""
    return math.log(1 + math.log(1 + n)) / 3


@dataclass(frozen=True)
class LBAudit:
    n: int
    alpha: Number
    worst_k: int
    ratios: tuple
    floor: float

    @property
    def respects_floor(self) -> bool:
        return self.alpha >= self.floor

    def to_doc(self) -> dict:
        return {
            "n": self.n,
            "alpha": _num_doc(self.alpha),
            "alpha_float": float(self.alpha),
            "worst_k": self.worst_k,
            "floor": self.floor,
            "respects_floor": self.respects_floor,
        }


def _num_doc(x):
    return "inf" if x == math.inf else dump_number(x)


def lb_audit_utilities(n: int, utilities) -> LBAudit:
    bounds = [R(n, k) for k in range(1, n + 1)]
    if not all(isinstance(u, Fraction) for u in utilities):
        bounds = [float(b) for b in bounds]
    ratios = []
    acc = None
    for k, u in enumerate(sorted(utilities), start=1):
        acc = u if acc is None else acc + u
        ratios.append(math.inf if acc == 0 else bounds[k - 1] / acc)
    worst = max(range(n), key=lambda k: ratios[k])
    return LBAudit(n, ratios[worst], worst + 1, tuple(ratios), universal_floor(n))


def lb_audit(n: int, policy: SignalingPolicy, receiver: ReceiverModel = EXACT) -> LBAudit:
    report = evaluate_exact(make_lb_instance(n), policy, receiver)
    return lb_audit_utilities(n, report.utilities)
