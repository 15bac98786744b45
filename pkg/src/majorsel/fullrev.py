"""Full-revelation policies whose selection rule is tuned for majorization.

Bernoulli priors: a mixture of rankings realises the lexicographically
optimal point of the polymatroid g(T) = 1 - prod_{i in T}(1 - mu_i).

General priors: the lex-optimal flow of a value-level network is rounded by
visiting top-value agents in random order; each agent keeps at least half of
its flow utility.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from majorsel.core import (
    Instance,
    Number,
    SignalingPolicy,
    SignalingScheme,
    ValidationError,
    fmt,
    full_revelation,
    one,
    zero,
)
from majorsel.evaluate import UtilityModel
from majorsel.flowmajor import (
    FlowNetwork,
    MajorizedPoint,
    PolymatroidSpec,
    decompose_to_rankings,
    lex_optimal_flow,
    polymatroid_lex_point,
)
from majorsel.selection import RankingScheme, RoundedOrder


@dataclass(frozen=True)
class FullRevNetworkParams:
    levels: tuple  # v_1 < ... < v_m
    z: tuple  # z_j = Pr[max <= v_j]
    p: tuple  # p[i][j] = Pr[D_i = v_j | max <= v_j]
    b: tuple


def fullrev_network(
    instance: Instance, utility: UtilityModel = UtilityModel.VALUE
) -> tuple[FlowNetwork, FullRevNetworkParams]:
    """One middle node per value level v_j with capacity z_j * v_j (z_j in the
    selection model) and arcs p_ij * b_j to every agent that can hold v_j."""
    exact = instance.exact
    levels = instance.levels()
    n = instance.n
    z, b = [], []
    p = [[zero(exact)] * len(levels) for _ in range(n)]
    for j, v in enumerate(levels):
        zj = one(exact)
        for d in instance.agents:
            zj *= d.cdf(v)
        z.append(zj)
        b.append(zj * v if utility is UtilityModel.VALUE else zj)
        for i, d in enumerate(instance.agents):
            F = d.cdf(v)
            if F > 0:
                p[i][j] = d.prob(v) / F
    cap = {}
    for i in range(n):
        for j in range(len(levels)):
            c = p[i][j] * b[j]
            if c > 0:
                cap[(j, i)] = c
    params = FullRevNetworkParams(tuple(levels), tuple(z), tuple(tuple(r) for r in p), tuple(b))
    return FlowNetwork(tuple(b), cap, n), params


def fullrev_flow(
    instance: Instance, utility: UtilityModel = UtilityModel.VALUE
) -> tuple[FlowNetwork, FullRevNetworkParams, MajorizedPoint]:
    net, params = fullrev_network(instance, utility)
    return net, params, lex_optimal_flow(net)


def build_fullrev_twomaj_policy(
    instance: Instance, utility: UtilityModel = UtilityModel.VALUE
) -> SignalingPolicy:
    """Reveal everything; among the top-value agents at level v_j, visit in
    random order and accept agent i with probability x_ij / p_ij."""
    _, params, point = fullrev_flow(instance, utility)
    accept = []
    for i in range(instance.n):
        table = {}
        for j, v in enumerate(params.levels):
            y = point.edge_flows.get((j, i))
            pij = params.p[i][j]
            if not y or pij == 0 or params.b[j] == 0:
                continue
            a = y / params.b[j] / pij
            table[fmt(v)] = min(a, one(instance.exact))
        accept.append(table)
    scheme = SignalingScheme(full_revelation(instance), RoundedOrder(tuple(accept)))
    return SignalingPolicy.single(scheme)


def bernoulli_params(instance: Instance) -> tuple[Number, tuple]:
    """(c, mu) for an instance whose agents all take values in {0, c}."""
    highs = {v for d in instance.agents for v in d.values if v != 0}
    if len(highs) > 1:
        raise ValidationError("not a Bernoulli instance: more than one nonzero value")
    c = highs.pop() if highs else one(instance.exact)
    mu = tuple(d.prob(c) for d in instance.agents)
    return c, mu


def build_bernoulli_policy(instance: Instance) -> SignalingPolicy:
    """Full revelation mixed over ranking schemes whose average selection
    probabilities equal the lexicographically optimal polymatroid point."""
    _, mu = bernoulli_params(instance)
    spec = PolymatroidSpec(mu)
    f = polymatroid_lex_point(spec).f
    mixture = decompose_to_rankings(spec, f)
    mapping = full_revelation(instance)
    comps = []
    for w, order in mixture.components:
        weight = Fraction(w) if instance.exact else float(w)
        comps.append((weight, SignalingScheme(mapping, RankingScheme(tuple(order)))))
    return SignalingPolicy(tuple(comps))
