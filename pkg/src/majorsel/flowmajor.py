"""Majorized (lexicographically max-min) sink inflows of single-source
bipartite networks, the Bernoulli polymatroid, and decomposition of a
polymatroid base into greedy ranking vertices.

A :class:`FlowNetwork` is source -> middle node j (capacity ``b[j]``) ->
sink i (capacity ``cap[(j, i)]``).  Its feasible sink-inflow vectors form a
polymatroid with rank ``g(S) = sum_j min(b_j, sum_{i in S} cap_ji)``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Optional, Sequence

from majorsel.core import (
    Number,
    ValidationError,
    close,
    dump_number,
    is_exact,
    parse_number,
    zero,
)
from majorsel.lpsolve import LinearProgram, solve_lp

MAX_POLYMATROID_DIM = 20
MAX_DECOMPOSE_DIM = 8


@dataclass(frozen=True)
class FlowNetwork:
    b: tuple
    cap: dict  # (middle j, sink i) -> capacity
    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "b", tuple(self.b))
        if any(x < 0 for x in self.b) or any(x < 0 for x in self.cap.values()):
            raise ValidationError("capacities must be non-negative")
        for j, i in self.cap:
            if not (0 <= j < len(self.b) and 0 <= i < self.n):
                raise ValidationError(f"arc ({j}, {i}) references a missing node")

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def exact(self) -> bool:
        return is_exact(*self.b, *self.cap.values())

    def rank(self, sinks) -> Number:
        """Max flow into the sink set ``sinks``."""
        sinks = set(sinks)
        total = zero(self.exact)
        for j, bj in enumerate(self.b):
            into = sum(
                (c for (jj, i), c in self.cap.items() if jj == j and i in sinks),
                zero(self.exact),
            )
            total += min(bj, into)
        return total

    def to_doc(self) -> dict:
        return {
            "n": self.n,
            "b": [dump_number(x) for x in self.b],
            "arcs": [[j, i, dump_number(c)] for (j, i), c in sorted(self.cap.items())],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FlowNetwork":
        floats = any(isinstance(x, float) for x in doc["b"]) or any(
            isinstance(a[2], float) for a in doc.get("arcs", [])
        )

        def num(x):
            v = parse_number(x)
            return float(v) if floats else v

        cap = {(int(j), int(i)): num(c) for j, i, c in doc.get("arcs", [])}
        return cls(tuple(num(x) for x in doc["b"]), cap, int(doc["n"]))


def load_network(text: str) -> FlowNetwork:
    try:
        return FlowNetwork.from_doc(json.loads(text))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed network document: {exc}") from exc


def dump_network(net: FlowNetwork) -> str:
    return json.dumps(net.to_doc(), indent=2)


@dataclass(frozen=True)
class MajorizedPoint:
    f: tuple
    edge_flows: Optional[dict]
    prefix: tuple  # sums of the k smallest f_i, k = 1..n


@dataclass(frozen=True)
class RankingMixture:
    components: tuple  # ((weight, order), ...)


def sorted_prefix(u: Sequence[Number]) -> tuple:
    out, acc = [], None
    for x in sorted(u):
        acc = x if acc is None else acc + x
        out.append(acc)
    return tuple(out)


# ----------------------------------------------------------------------
# max flow (Edmonds-Karp)
# ----------------------------------------------------------------------


def _tol(exact: bool, scale) -> Number:
    return 0 if exact else 1e-12 * max(1.0, float(scale))


def _flow_with_demands(net: FlowNetwork, demand: Sequence[Number]):
    """Max flow when sink i may absorb at most ``demand[i]``.

    Returns (value, arc flows, set of sinks on the source side of a min cut).
    """
    exact = net.exact and is_exact(*demand)
    O = zero(exact)
    M, n = net.m, net.n
    S, T = 0, M + n + 1
    res: dict = {u: {} for u in range(T + 1)}

    def add(u, v, c):
        res[u][v] = res[u].get(v, O) + c
        res[v].setdefault(u, O)

    for j, bj in enumerate(net.b):
        add(S, 1 + j, bj)
    for (j, i), c in net.cap.items():
        add(1 + j, 1 + M + i, c)
    for i in range(n):
        add(1 + M + i, T, demand[i])
    eps = _tol(exact, sum(net.b, O))
    value = O
    while True:
        parent = {S: None}
        q = deque([S])
        while q and T not in parent:
            u = q.popleft()
            for v, r in res[u].items():
                if r > eps and v not in parent:
                    parent[v] = u
                    q.append(v)
        if T not in parent:
            break
        path, v = [], T
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        push = min(res[u][v] for u, v in path)
        for u, v in path:
            res[u][v] -= push
            res[v][u] += push
        value += push
    flows = {}
    for (j, i), c in net.cap.items():
        flows[(j, i)] = c - res[1 + j][1 + M + i]
    reach = set(parent)
    source_side = {i for i in range(n) if 1 + M + i in reach}
    return value, flows, source_side


def flow_feasible(net: FlowNetwork, f: Sequence[Number]) -> bool:
    """Can every sink i receive ``f[i]`` simultaneously?"""
    value, _, _ = _flow_with_demands(net, f)
    return close(value, sum(f, zero(is_exact(*f)))) or value >= sum(f)


# ----------------------------------------------------------------------
# water-filling
# ----------------------------------------------------------------------


def _max_uniform_level(net, fixed: dict, active: list) -> Number:
    """Largest t with (fixed values, t on every active sink) feasible.

    Newton iteration on the parametric min cut: each infeasible level yields
    a violated sink set whose rank pins the next, smaller level.
    """
    exact = net.exact and is_exact(*fixed.values())
    O = zero(exact)
    fixed_sum = sum(fixed.values(), O)
    t = (net.rank(range(net.n)) - fixed_sum) / len(active)
    tol = _tol(exact, sum(net.b, O)) * 100
    for _ in range(10 * (net.n + 1) ** 2 + 100):
        demand = [fixed.get(i, t) for i in range(net.n)]
        value, _, source_side = _flow_with_demands(net, demand)
        if value >= sum(demand, O) - tol:
            return t
        violated = [i for i in range(net.n) if i not in source_side]
        free = [i for i in violated if i not in fixed]
        if not free:
            raise ValidationError("frozen sink values are infeasible")
        t_new = (net.rank(violated) - sum((fixed[i] for i in violated if i in fixed), O)) / len(free)
        if not exact and t_new >= t - tol:
            return t_new
        t = t_new
    raise RuntimeError("water-filling did not converge")


def lex_optimal_flow(net: FlowNetwork) -> MajorizedPoint:
    """Feasible sink inflows maximising every k-smallest prefix at once.

    Raise a common floor on all unfrozen sinks as far as feasibility allows,
    freeze the sinks that cannot go above it, and repeat.
    """
    exact = net.exact
    O = zero(exact)
    n = net.n
    big = sum(net.b, O) + 1
    tol = _tol(exact, big) * 1000
    fixed: dict = {}
    active = list(range(n))
    while active:
        t = _max_uniform_level(net, fixed, active)
        frozen = []
        for i in active:
            demand = [fixed.get(j, t) for j in range(n)]
            demand[i] = big
            value, _, _ = _flow_with_demands(net, demand)
            others = sum((d for j, d in enumerate(demand) if j != i), O)
            if value - others <= t + tol:
                frozen.append(i)
        if not frozen:
            raise RuntimeError("water-filling made no progress")
        for i in frozen:
            fixed[i] = t
        active = [i for i in active if i not in fixed]
    f = tuple(fixed[i] for i in range(n))
    _, flows, _ = _flow_with_demands(net, f)
    return MajorizedPoint(f, flows, sorted_prefix(f))


def prefix_sum_oracle(net: FlowNetwork, k: int) -> Number:
    """Max over feasible flows of the sum of the k smallest sink inflows.

    LP over arc flows y with a threshold t and shortfalls s_i:
    maximise k*t - sum s_i  s.t.  t - s_i <= inflow_i.
    """
    if not 1 <= k <= net.n:
        raise ValidationError(f"k={k} outside [1, {net.n}]")
    exact = net.exact
    O = zero(exact)
    arcs = [(j, i) for (j, i), c in sorted(net.cap.items()) if c > 0 and net.b[j] > 0]
    if not arcs:
        return O
    nv = len(arcs) + 1 + net.n
    t_col = len(arcs)
    c = [O] * nv
    c[t_col] = k if exact else float(k)
    for i in range(net.n):
        c[t_col + 1 + i] = -1
    A, rhs = [], []
    for j, bj in enumerate(net.b):
        row = [O] * nv
        used = False
        for a, (jj, _) in enumerate(arcs):
            if jj == j:
                row[a] = 1
                used = True
        if used:
            A.append(row)
            rhs.append(bj)
    bounds = [(0, None)] * nv
    for a, (j, i) in enumerate(arcs):
        if net.cap[(j, i)] < net.b[j]:
            bounds[a] = (0, net.cap[(j, i)])
    for i in range(net.n):
        row = [O] * nv
        row[t_col] = 1
        row[t_col + 1 + i] = -1
        for a, (_, ii) in enumerate(arcs):
            if ii == i:
                row[a] = -1
        A.append(row)
        rhs.append(O)
    res = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=rhs, bounds=bounds))
    if res.status != "optimal":
        raise RuntimeError(f"prefix-sum LP returned {res.status}")
    return res.value


# ----------------------------------------------------------------------
# Bernoulli polymatroid
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PolymatroidSpec:
    """g(T) = 1 - prod_{i in T} (1 - p_i)."""

    p: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", tuple(self.p))
        if any(not 0 <= x <= 1 for x in self.p):
            raise ValidationError("Bernoulli parameters must lie in [0,1]")

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def exact(self) -> bool:
        return is_exact(*self.p)

    def rank_table(self) -> list:
        """g for every subset, indexed by bitmask (bit i = agent i)."""
        one = Fraction(1) if self.exact else 1.0
        miss = [one]
        for i, pi in enumerate(self.p):
            miss += [m * (one - pi) for m in miss]
        return [one - m for m in miss]

    def g(self, members) -> Number:
        one = Fraction(1) if self.exact else 1.0
        prod = one
        for i in members:
            prod *= one - self.p[i]
        return one - prod


def _check_dim(n: int, limit: int) -> None:
    if n > limit:
        raise ValidationError(f"dimension {n} over budget {limit}")


def _members(mask: int, n: int) -> list:
    return [i for i in range(n) if mask >> i & 1]


def _subset_sums(f: Sequence[Number], exact: bool) -> list:
    sums = [zero(exact)]
    for x in f:
        sums += [s + x for s in sums]
    return sums


def polymatroid_lex_point(spec: PolymatroidSpec) -> MajorizedPoint:
    """Lexicographically optimal base by repeated minimum-ratio contraction.

    At each stage the largest subset minimising (g(T u F) - g(F)) / |T| over
    unfrozen T receives that ratio, then is frozen.
    """
    n = spec.n
    _check_dim(n, MAX_POLYMATROID_DIM)
    exact = spec.exact
    g = spec.rank_table()
    full = (1 << n) - 1
    tol = 0 if exact else 1e-12
    f: list = [None] * n
    frozen = 0
    while frozen != full:
        comp = full & ~frozen
        best, union = None, 0
        sub = comp
        while sub:
            r = (g[sub | frozen] - g[frozen]) / bin(sub).count("1")
            if best is None or r < best - tol:
                best, union = r, sub
            elif r <= best + tol:
                union |= sub
            sub = (sub - 1) & comp
        for i in _members(union, n):
            f[i] = best
        frozen |= union
    return MajorizedPoint(tuple(f), None, sorted_prefix(f))


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    min_slack: Number
    tightest: tuple  # subset with the smallest g(T) - f(T)
    tight_sets: tuple


def polymatroid_feasible(spec: PolymatroidSpec, f: Sequence[Number]) -> Feasibility:
    n = spec.n
    _check_dim(n, MAX_POLYMATROID_DIM)
    exact = spec.exact and is_exact(*f)
    g = spec.rank_table()
    sums = _subset_sums(f, exact)
    tol = 0 if exact else 1e-9
    best, arg, tight = None, 0, []
    if any(x < -tol for x in f):
        neg = next(i for i, x in enumerate(f) if x < -tol)
        return Feasibility(False, f[neg], (neg,), ())
    for mask in range(1, 1 << n):
        slack = g[mask] - sums[mask]
        if best is None or slack < best:
            best, arg = slack, mask
        if abs(slack) <= tol:
            tight.append(tuple(_members(mask, n)))
    return Feasibility(best >= -tol, best, tuple(_members(arg, n)), tuple(tight))


def greedy_vertex(spec: PolymatroidSpec, order: Sequence[int]) -> tuple:
    """Vertex whose k-th ranked agent gets its marginal gain over the first k-1."""
    g = spec.rank_table()
    v = [None] * spec.n
    mask = 0
    for i in order:
        v[i] = g[mask | 1 << i] - g[mask]
        mask |= 1 << i
    return tuple(v)


def decompose_to_rankings(spec: PolymatroidSpec, f_star: Sequence[Number]) -> RankingMixture:
    """Write a base point as a convex combination of greedy ranking vertices.

    Walk: pick a vertex on the smallest face through the current point (order
    agents along a maximal chain of its tight sets), step away from that
    vertex through the point until a new set becomes tight, repeat.  Each
    step lowers the face dimension, so at most n vertices are used.
    """
    n = spec.n
    _check_dim(n, MAX_DECOMPOSE_DIM)
    exact = spec.exact and is_exact(*f_star)
    O = zero(exact)
    g = spec.rank_table()
    full = (1 << n) - 1
    tol = 0 if exact else 1e-12
    x = [Fraction(v) if exact else float(v) for v in f_star]
    feas = polymatroid_feasible(spec, x)
    if not feas.feasible or not close(sum(x, O), g[full]):
        raise ValidationError("target is not a base of the polymatroid (infeasible target)")
    weight_left = Fraction(1) if exact else 1.0
    mixture: dict = {}
    for _ in range(n + 1):
        sums = _subset_sums(x, exact)
        tight = [mask for mask in range(1, full + 1) if abs(g[mask] - sums[mask]) <= tol * 10]
        order, chain = [], 0
        while chain != full:
            nxt = min(
                (t for t in tight if t & chain == chain and t != chain),
                key=lambda t: bin(t).count("1"),
            )
            order += _members(nxt & ~chain, n)
            chain = nxt
        v = greedy_vertex(spec, order)
        if all(abs(a - b) <= tol * 10 for a, b in zip(v, x)):
            mixture[tuple(order)] = mixture.get(tuple(order), O) + weight_left
            break
        vs = _subset_sums(v, exact)
        theta = None
        for mask in range(1, full + 1):
            gap = g[mask] - vs[mask]
            if gap > tol * 10:
                r = (g[mask] - sums[mask]) / gap
                theta = r if theta is None else min(theta, r)
        if theta is None or theta <= 0 or theta >= 1:
            raise RuntimeError("decomposition step failed")
        mixture[tuple(order)] = mixture.get(tuple(order), O) + weight_left * theta
        weight_left *= 1 - theta
        x = [(a - theta * b) / (1 - theta) for a, b in zip(x, v)]
    else:
        raise RuntimeError("decomposition did not terminate")
    return RankingMixture(tuple((w, order) for order, w in mixture.items()))


def mixture_point(spec: PolymatroidSpec, mixture: RankingMixture) -> tuple:
    out = [zero(spec.exact)] * spec.n
    for w, order in mixture.components:
        v = greedy_vertex(spec, order)
        out = [a + w * b for a, b in zip(out, v)]
    return tuple(out)


def bernoulli_network(p: Sequence[Number]) -> FlowNetwork:
    """Middle node per subset T of agents (bitmask order, bit i = agent i)
    with capacity Pr[exactly T have value 1]; arcs to each member of T.

    Arc capacities are unbounded in principle; the node capacity is used,
    which never binds more tightly.
    """
    n = len(p)
    exact = is_exact(*p)
    one = Fraction(1) if exact else 1.0
    b, cap = [], {}
    for mask in range(1 << n):
        w = one
        for i in range(n):
            w *= p[i] if mask >> i & 1 else one - p[i]
        b.append(w)
        for i in _members(mask, n):
            cap[(mask, i)] = w
    return FlowNetwork(tuple(b), cap, n)
