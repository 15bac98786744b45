"""Small dense linear programs.

``solve_lp`` is a two-phase tableau simplex that runs on either fractions
(object arrays, exact pivots) or float64.  Pivoting uses Dantzig's rule and
drops to Bland's rule after a run of degenerate pivots, which rules out
cycling.  Rational programs are first solved in float64; the final basis is
then re-solved and checked for optimality in exact arithmetic, and only if
that check fails does the exact tableau run from scratch.  ``solve_maximal_mapping`` solves the two-constraint program for
funnelling a prior's mass into a target mean interval by a greedy sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from majorsel.core import DiscreteDist, Number, ValidationError, is_exact, zero

FLOAT_EPS = 1e-11
MAX_PIVOTS = 100_000
DEGENERATE_RUN = 50


class LPNumericError(RuntimeError):
    """The simplex could not finish (iteration cap or lost feasibility)."""


@dataclass
class LinearProgram:
    """maximize c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lo <= x <= hi.

    ``bounds`` defaults to (0, None) per variable; ``None`` means unbounded.
    """

    c: list
    A_ub: list = field(default_factory=list)
    b_ub: list = field(default_factory=list)
    A_eq: list = field(default_factory=list)
    b_eq: list = field(default_factory=list)
    bounds: Optional[list] = None

    def __post_init__(self) -> None:
        n = len(self.c)
        if self.bounds is None:
            self.bounds = [(0, None)] * n
        if len(self.bounds) != n:
            raise ValidationError("bounds length differs from objective length")
        for rows, rhs, name in ((self.A_ub, self.b_ub, "ub"), (self.A_eq, self.b_eq, "eq")):
            if len(rows) != len(rhs):
                raise ValidationError(f"A_{name} and b_{name} differ in length")
            if any(len(r) != n for r in rows):
                raise ValidationError(f"A_{name} row length differs from objective length")

    @property
    def exact(self) -> bool:
        nums = list(self.c) + list(self.b_ub) + list(self.b_eq)
        nums += [a for r in self.A_ub for a in r] + [a for r in self.A_eq for a in r]
        nums += [b for lohi in self.bounds for b in lohi if b is not None]
        return all(isinstance(x, (Fraction, int)) for x in nums)


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: Optional[Number] = None
    x: Optional[list] = None
    basis: Optional[list] = field(default=None, repr=False)


def solve_lp(lp: LinearProgram) -> LPResult:
    exact = lp.exact
    conv = Fraction if exact else float
    n = len(lp.c)

    # substitute x = lo + x' (or x = x+ - x- when free) so every column is >= 0
    cols = []  # per original variable: list of (column index, sign)
    shift = []
    upper_rows = []
    ncol = 0
    for j, (lo, hi) in enumerate(lp.bounds):
        if lo is None:
            cols.append([(ncol, 1), (ncol + 1, -1)])
            shift.append(conv(0))
            ncol += 2
            if hi is not None:
                upper_rows.append((j, conv(hi)))
        else:
            cols.append([(ncol, 1)])
            shift.append(conv(lo))
            ncol += 1
            if hi is not None:
                if hi < lo:
                    return LPResult("infeasible")
                upper_rows.append((j, conv(hi)))

    def expand(row):
        out = [conv(0)] * ncol
        for j, a in enumerate(row):
            for col, sign in cols[j]:
                out[col] += sign * conv(a)
        return out

    def shifted(row, rhs):
        return conv(rhs) - sum((conv(a) * shift[j] for j, a in enumerate(row)), conv(0))

    rows, senses, rhs = [], [], []
    for r, b in zip(lp.A_ub, lp.b_ub):
        rows.append(expand(r)); senses.append("<="); rhs.append(shifted(r, b))
    for j, hi in upper_rows:
        r = [0] * n
        r[j] = 1
        rows.append(expand(r)); senses.append("<="); rhs.append(hi - shift[j])
    for r, b in zip(lp.A_eq, lp.b_eq):
        rows.append(expand(r)); senses.append("="); rhs.append(shifted(r, b))
    c = expand(lp.c)
    const = sum((conv(a) * shift[j] for j, a in enumerate(lp.c)), conv(0))

    res = _solve_exact(c, rows, senses, rhs) if exact else _simplex(c, rows, senses, rhs, False)
    if res.status != "optimal":
        return res
    x = []
    for j in range(n):
        val = shift[j]
        for col, sign in cols[j]:
            val += sign * res.x[col]
        x.append(conv(val))
    return LPResult("optimal", conv(res.value + const), x)


def _simplex(c, rows, senses, rhs, exact) -> LPResult:
    m, nvar = len(rows), len(c)
    dtype = object if exact else float
    O = Fraction(0) if exact else 0.0
    I = Fraction(1) if exact else 1.0
    eps = 0 if exact else FLOAT_EPS

    if m == 0:
        if any(cj > eps for cj in c):
            return LPResult("unbounded")
        return LPResult("optimal", O, [O] * nvar)
    nslack = sum(1 for s in senses if s == "<=")
    # decide artificials after normalising rhs >= 0
    A = np.array(rows, dtype=dtype).reshape(m, nvar)
    b = np.array(rhs, dtype=dtype)
    slack = np.zeros((m, nslack), dtype=dtype)
    if exact:
        slack[:] = O
    k = 0
    for i, s in enumerate(senses):
        if s == "<=":
            slack[i, k] = I
            k += 1
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            slack[i] = -slack[i]
            b[i] = -b[i]
    need_art = [i for i in range(m) if not any(slack[i, j] == I for j in range(nslack))]
    nart = len(need_art)
    art = np.zeros((m, nart), dtype=dtype)
    if exact:
        art[:] = O
    for a, i in enumerate(need_art):
        art[i, a] = I
    T = np.concatenate([A, slack, art, b.reshape(m, 1)], axis=1)
    ncols = nvar + nslack + nart
    basis = []
    for i in range(m):
        if i in need_art:
            basis.append(nvar + nslack + need_art.index(i))
        else:
            j = next(j for j in range(nslack) if slack[i, j] == I)
            basis.append(nvar + j)

    if nart:
        # phase 1: maximise -sum(artificials)
        obj = np.zeros(ncols + 1, dtype=dtype)
        if exact:
            obj[:] = O
        obj[nvar + nslack:ncols] = I
        for i in need_art:
            obj -= T[i]
        T, obj, basis, status = _run(T, obj, basis, eps, ncols)
        tol = 0 if exact else 1e-9 * max(1.0, max(float(abs(x)) for x in b))
        if obj[-1] < -tol:
            return LPResult("infeasible")
        # drive remaining artificials out of the basis
        keep = []
        for i in range(T.shape[0]):
            if basis[i] >= nvar + nslack:
                piv = next(
                    (j for j in range(nvar + nslack) if abs(T[i, j]) > eps), None
                )
                if piv is None:
                    continue  # redundant row
                T = _pivot(T, i, piv)
                basis[i] = piv
            keep.append(i)
        T = T[keep]
        basis = [basis[i] for i in keep]
        T = np.concatenate([T[:, : nvar + nslack], T[:, -1:]], axis=1)
        ncols = nvar + nslack

    obj = np.zeros(ncols + 1, dtype=dtype)
    if exact:
        obj[:] = O
    for j, cj in enumerate(c):
        obj[j] = -cj
    for i, bj in enumerate(basis):
        if obj[bj] != 0:
            obj = obj - obj[bj] * T[i]
    T, obj, basis, status = _run(T, obj, basis, eps, ncols)
    if status == "unbounded":
        return LPResult("unbounded")
    x = [O] * ncols
    for i, bj in enumerate(basis):
        x[bj] = T[i, -1]
    if not exact and any(v < -1e-7 for v in x):
        raise LPNumericError("simplex lost primal feasibility")
    full_rank = len(basis) == m
    return LPResult("optimal", obj[-1], x[:nvar], list(basis) if full_rank else None)


def _solve_exact(c, rows, senses, rhs) -> LPResult:
    try:
        approx = _simplex(
            [float(x) for x in c],
            [[float(a) for a in r] for r in rows],
            senses,
            [float(b) for b in rhs],
            False,
        )
    except LPNumericError:
        approx = None
    if approx is not None and approx.status == "optimal" and approx.basis is not None:
        certified = _certify_basis(c, rows, senses, rhs, approx.basis)
        if certified is not None:
            return certified
    return _simplex(c, rows, senses, rhs, True)


def _certify_basis(c, rows, senses, rhs, basis) -> Optional[LPResult]:
    """Exact primal and dual solution for ``basis``; None unless optimal."""
    m, nvar = len(rows), len(c)
    cols: list = [{i: a for i, a in enumerate(col) if a != 0} for col in zip(*rows)] if nvar else []
    slack_row = [i for i, sense in enumerate(senses) if sense == "<="]
    cols += [{i: Fraction(1)} for i in slack_row]
    cost = list(c) + [Fraction(0)] * len(slack_row)
    B = [cols[j] for j in basis]
    # B x_B = rhs, written row-wise
    prim_rows = [dict() for _ in range(m)]
    for k, col in enumerate(B):
        for i, a in col.items():
            prim_rows[i][k] = a
    xb = _sparse_solve(prim_rows, rhs)
    if xb is None or any(v < 0 for v in xb):
        return None
    # B^T y = c_B
    y = _sparse_solve([dict(col) for col in B], [cost[j] for j in basis])
    if y is None:
        return None
    in_basis = set(basis)
    for j, col in enumerate(cols):
        if j not in in_basis and cost[j] - sum(y[i] * a for i, a in col.items()) > 0:
            return None
    x = [Fraction(0)] * nvar
    for k, j in enumerate(basis):
        if j < nvar:
            x[j] = xb[k]
    value = sum((cost[j] * xb[k] for k, j in enumerate(basis)), Fraction(0))
    return LPResult("optimal", value, x, list(basis))


def _sparse_solve(rows: list, rhs: list) -> Optional[list]:
    """Gauss-Jordan on sparse rows ``{column: coefficient}``; None if singular."""
    m = len(rows)
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    holders: dict = {}
    for i, r in enumerate(rows):
        for k in r:
            holders.setdefault(k, set()).add(i)
    pivot_row: dict = {}
    free = set(range(m))
    for k in range(m):
        cand = [i for i in holders.get(k, ()) if i in free]
        if not cand:
            return None
        r = min(cand, key=lambda i: (len(rows[i]), i))
        free.discard(r)
        pivot_row[k] = r
        pr, pv = rows[r], rows[r][k]
        for i in list(holders[k]):
            if i == r:
                continue
            f = rows[i][k] / pv
            for kk, v in pr.items():
                nv = rows[i].get(kk, 0) - f * v
                if nv:
                    if kk not in rows[i]:
                        holders.setdefault(kk, set()).add(i)
                    rows[i][kk] = nv
                elif kk in rows[i]:
                    del rows[i][kk]
                    holders[kk].discard(i)
            rhs[i] -= f * rhs[r]
    return [rhs[pivot_row[k]] / rows[pivot_row[k]][k] for k in range(m)]


def _pivot(T, r, c):
    T = T.copy()
    T[r] = T[r] / T[r, c]
    col = T[:, c].copy()
    col[r] = 0
    T -= np.outer(col, T[r])
    return T


def _run(T, obj, basis, eps, ncols):
    degenerate = 0
    for _ in range(MAX_PIVOTS):
        red = obj[:ncols]
        neg = [j for j in range(ncols) if red[j] < -eps]
        if not neg:
            return T, obj, basis, "optimal"
        bland = degenerate >= DEGENERATE_RUN
        c = neg[0] if bland else min(neg, key=lambda j: (red[j], j))
        colv = T[:, c]
        best, r = None, None
        for i in range(T.shape[0]):
            if colv[i] > eps:
                ratio = T[i, -1] / colv[i]
                if r is None or ratio < best - eps or ratio <= best + eps and basis[i] < basis[r]:
                    best, r = ratio, i
        if r is None:
            return T, obj, basis, "unbounded"
        degenerate = degenerate + 1 if best <= eps else 0
        T = _pivot(T, r, c)
        obj = obj - obj[c] * T[r]
        basis[r] = c
    raise LPNumericError("simplex iteration cap reached")


# ----------------------------------------------------------------------
# maximal mapping
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class MaximalMappingSolution:
    beta: Number
    y: tuple  # per support value, mass routed to the in-interval signal
    values: tuple

    def mean_inside(self) -> Optional[Number]:
        if self.beta == 0:
            return None
        return sum(v * y for v, y in zip(self.values, self.y)) / self.beta


def solve_maximal_mapping(dist: DiscreteDist, m: Number, m_hat: Number) -> MaximalMappingSolution:
    """Largest probability mass whose conditional mean lies in [m, m_hat].

    If the prior mean is inside the interval everything fits.  Otherwise the
    far constraint is slack: below the interval, every value >= m enters in
    full and values under m are added nearest-first until the pooled mean
    reaches m; above the interval it is the mirror image against m_hat.
    """
    if not 0 < m <= m_hat:
        raise ValidationError("need 0 < m <= m_hat")
    exact = dist.exact and is_exact(m, m_hat)
    O = zero(exact)
    values, probs = dist.values, dist.probs
    mu = dist.mean
    y = [O] * len(values)
    if m <= mu <= m_hat:
        return MaximalMappingSolution(sum(probs, O), tuple(probs), values)
    if mu < m:
        target, donors = m, [j for j, v in enumerate(values) if v >= m]
        takers = sorted((j for j, v in enumerate(values) if v < m), key=lambda j: -values[j])
    else:
        target, donors = m_hat, [j for j, v in enumerate(values) if v <= m_hat]
        takers = sorted((j for j, v in enumerate(values) if v > m_hat), key=lambda j: values[j])
    budget = O
    for j in donors:
        y[j] = probs[j]
        budget += abs(values[j] - target) * probs[j]
    for j in takers:
        cost = abs(values[j] - target)
        take = min(probs[j], budget / cost)
        y[j] = take
        budget -= take * cost
        if take < probs[j]:
            break
    return MaximalMappingSolution(sum(y, O), tuple(y), values)


def maximal_mapping_lp(dist: DiscreteDist, m: Number, m_hat: Number) -> LinearProgram:
    """The same program written out for ``solve_lp`` (used as a cross-check)."""
    vals, probs = dist.values, dist.probs
    k = len(vals)
    return LinearProgram(
        c=[1] * k,
        A_ub=[[m - v for v in vals], [v - m_hat for v in vals]],
        b_ub=[0, 0],
        bounds=[(0, p) for p in probs],
    )
