"""Single Mean policies: per value bucket, every agent funnels as much
probability as it can into a common posterior-mean interval [m, eta*m]; the
buckets are mixed uniformly and a lex-optimal flow sets acceptance rates.

Meant for a receiver that accepts any agent within a factor eta of the best
posterior mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from majorsel.core import (
    DiscreteDist,
    Instance,
    MappingRule,
    Number,
    SCHEMA_VERSION,
    SignalingPolicy,
    SignalingScheme,
    compare,
    dump_number,
    one,
    zero,
)
from majorsel.evaluate import UtilityModel, audit_alpha, sorted_prefixes
from majorsel.flowmajor import FlowNetwork, lex_optimal_flow
from majorsel.grid import BucketGrid, instance_grid
from majorsel.lpsolve import solve_maximal_mapping
from majorsel.selection import ThresholdRoundedOrder

DEFAULT_EPSILON = Fraction(1, 4)
IN_LABEL = "A"
OUT_LABEL = "B"


@dataclass(frozen=True)
class AgentBucket:
    beta: Number
    p: Number  # Pr[mean in interval | mean not above it]
    Q: Number  # Pr[mean not above the interval]
    case: str  # "below" | "above" | "inside"
    row: dict  # value -> ((label, prob), ...)


@dataclass(frozen=True)
class BucketParams:
    m: Number
    m_hat: Number
    agents: tuple
    Q: Number


def maximal_mapping_row(dist: DiscreteDist, y: tuple) -> dict:
    """Two-signal mapping: value v goes to the in-interval label with
    probability y_v / Pr[v], otherwise to the residual label."""
    row = {}
    for (v, pv), yv in zip(dist.support, y):
        a = yv / pv
        out = []
        if a > 0:
            out.append((IN_LABEL, a))
        if a < 1:
            out.append((OUT_LABEL, one(dist.exact) - a))
        row[v] = tuple(out)
    return row


def agent_bucket(dist: DiscreteDist, m: Number, m_hat: Number) -> AgentBucket:
    sol = solve_maximal_mapping(dist, m, m_hat)
    unit = one(dist.exact)
    if compare(dist.mean, m) < 0:
        case, p, Q = "below", sol.beta, unit
    elif compare(dist.mean, m_hat) > 0:
        case, p, Q = "above", unit, sol.beta
    else:
        case, p, Q = "inside", unit, unit
    return AgentBucket(sol.beta, p, Q, case, maximal_mapping_row(dist, sol.y))


def bucket_params(instance: Instance, grid: BucketGrid) -> list:
    out = []
    for k in range(grid.K):
        m = grid.lower(k)
        m_hat = m * grid.eta
        agents = tuple(agent_bucket(d, m, m_hat) for d in instance.agents)
        Q = one(instance.exact)
        for a in agents:
            Q *= a.Q
        out.append(BucketParams(m, m_hat, agents, Q))
    return out


def build_pmaj_network(
    instance: Instance,
    grid: BucketGrid,
    params: list,
    utility: UtilityModel = UtilityModel.VALUE,
) -> FlowNetwork:
    """Middle node per bucket with capacity m*Q/K (Q/K in the selection
    model); arc to agent i with capacity p_i times that."""
    b, cap = [], {}
    for k, bp in enumerate(params):
        bk = bp.Q / grid.K
        if utility is UtilityModel.VALUE:
            bk *= bp.m
        b.append(bk)
        for i, a in enumerate(bp.agents):
            c = a.p * bk
            if c > 0:
                cap[(k, i)] = c
    return FlowNetwork(tuple(b), cap, instance.n)


@dataclass(frozen=True)
class SingleMeanPlan:
    grid: BucketGrid
    params: tuple
    b: tuple
    xhat: tuple  # xhat[k][i]
    u_hat: tuple
    utility: UtilityModel

    def to_doc(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "utility": self.utility.value,
            "grid": self.grid.to_doc(),
            "u_hat": [dump_number(u) for u in self.u_hat],
            "buckets": [
                {
                    "m": dump_number(bp.m),
                    "m_hat": dump_number(bp.m_hat),
                    "Q": dump_number(bp.Q),
                    "b": dump_number(self.b[k]),
                    "agents": [
                        {
                            "case": a.case,
                            "beta": dump_number(a.beta),
                            "p": dump_number(a.p),
                            "Q": dump_number(a.Q),
                            "xhat": dump_number(self.xhat[k][i]),
                        }
                        for i, a in enumerate(bp.agents)
                    ],
                }
                for k, bp in enumerate(self.params)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), indent=2)


def build_singlemean_policy(
    instance: Instance,
    epsilon: Number = DEFAULT_EPSILON,
    utility: UtilityModel = UtilityModel.VALUE,
) -> tuple[SignalingPolicy, SingleMeanPlan]:
    if not instance.exact:
        epsilon = float(epsilon)
    grid = instance_grid(instance, epsilon)
    params = bucket_params(instance, grid)
    net = build_pmaj_network(instance, grid, params, utility)
    point = lex_optimal_flow(net)
    exact = instance.exact
    weight = Fraction(1, grid.K) if exact else 1.0 / grid.K
    comps, xhat = [], []
    for k, bp in enumerate(params):
        bk = net.b[k]
        xs, accept = [], []
        for i, a in enumerate(bp.agents):
            y = point.edge_flows.get((k, i), zero(exact))
            x = y / bk if bk > 0 else zero(exact)
            xs.append(x)
            accept.append(min(x / a.p, one(exact)) if a.p > 0 else zero(exact))
        xhat.append(tuple(xs))
        mapping = MappingRule(tuple(a.row for a in bp.agents))
        rule = ThresholdRoundedOrder(bp.m, bp.m_hat, tuple(accept))
        comps.append((weight, SignalingScheme(mapping, rule)))
    plan = SingleMeanPlan(grid, tuple(params), net.b, tuple(xhat), point.f, utility)
    return SignalingPolicy(tuple(comps)), plan


@dataclass(frozen=True)
class Certificate:
    u_hat_prefix: tuple
    achieved_prefix: tuple
    half_ok: tuple  # per k: achieved prefix >= u_hat prefix / 2
    componentwise_ok: bool  # achieved_i >= u_hat_i / 2 for every agent
    reference: tuple  # upper bound on every policy's utilities, prefixwise
    alpha: Number  # measured against ``reference``
    guarantee: Number  # 2 * eta * K

    @property
    def ok(self) -> bool:
        return all(self.half_ok) and self.componentwise_ok and self.alpha <= self.guarantee

    def to_doc(self) -> dict:
        return {
            "u_hat_prefix": [dump_number(x) for x in self.u_hat_prefix],
            "achieved_prefix": [dump_number(x) for x in self.achieved_prefix],
            "half_ok": list(self.half_ok),
            "componentwise_ok": self.componentwise_ok,
            "alpha": dump_number(self.alpha) if self.alpha != float("inf") else "inf",
            "guarantee": dump_number(self.guarantee),
            "ok": self.ok,
        }


def singlemean_certificate(plan: SingleMeanPlan, achieved) -> Certificate:
    """Compare achieved utilities with the flow optimum u_hat.

    Bucketing costs a factor K and counting each bucket at its lower end a
    factor eta (value model only), so eta*K*u_hat bounds what any policy can
    reach prefix by prefix; rounding keeps half of u_hat.
    """
    K, eta = plan.grid.K, plan.grid.eta
    scale = K * eta if plan.utility is UtilityModel.VALUE else K
    reference = tuple(scale * u for u in plan.u_hat)
    up = sorted_prefixes(plan.u_hat)
    ap = sorted_prefixes(achieved)
    half = tuple(compare(a, u / 2) >= 0 for a, u in zip(ap, up))
    comp = all(compare(a, u / 2) >= 0 for a, u in zip(achieved, plan.u_hat))
    return Certificate(
        tuple(up), tuple(ap), half, comp, reference, audit_alpha(achieved, reference), 2 * eta * K
    )
