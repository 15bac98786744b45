"""Acceptance criteria 1-9. Each test records a PASS/FAIL line that is
printed in the terminal summary."""

import random
import time
from fractions import Fraction

from conftest import ACCEPTANCE
from majorsel.core import (
    DiscreteDist,
    Instance,
    MappingRule,
    SignalingPolicy,
    SignalingScheme,
    full_revelation,
    instance_from_doc,
    policy_from_doc,
)
from majorsel.evaluate import UtilityModel, evaluate_exact, sorted_prefixes
from majorsel.flowmajor import FlowNetwork, bernoulli_network, lex_optimal_flow, prefix_sum_oracle
from majorsel.fullrev import build_bernoulli_policy, build_fullrev_twomaj_policy, fullrev_flow
from majorsel.lowerbound import (
    build_sk_policy,
    lb_audit,
    lb_audit_utilities,
    make_lb_instance,
    sk_utilities_closed_form,
)
from majorsel.lpsolve import solve_maximal_mapping
from majorsel.posterior import Approx, posteriors
from majorsel.selection import ExplicitTable
from majorsel.singlemean import agent_bucket, build_singlemean_policy, singlemean_certificate

from oracles import grid_maximal_mapping

F = Fraction
EPS = F(1, 4)


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    assert ok, detail


def rand_probs(rng, k, denom):
    cuts = sorted(rng.sample(range(1, denom), k - 1))
    edges = [0] + cuts + [denom]
    return tuple(F(b - a, denom) for a, b in zip(edges, edges[1:]))


def rand_dist(rng, max_values, lo, hi, denom=12):
    k = rng.randint(1, max_values)
    values = sorted(rng.sample(range(lo, hi + 1), k))
    return DiscreteDist(tuple(F(v) for v in values), rand_probs(rng, k, denom))


def rand_instance(rng, max_agents, max_values, lo=1, hi=8):
    n = rng.randint(1, max_agents)
    return Instance(tuple(rand_dist(rng, max_values, lo, hi) for _ in range(n)))


def rand_mapping_row(rng, dist, labels=("a", "b", "c")):
    row = {}
    for v in dist.values:
        k = rng.randint(1, len(labels))
        chosen = rng.sample(labels, k)
        ps = rand_probs(rng, k, 6) if k > 1 else (F(1),)
        row[v] = tuple(zip(chosen, ps))
    return row


def coin_instance(n):
    coin = DiscreteDist.from_pairs([(F(1), F(1, 2)), (F(3), F(1, 2))])
    return Instance((DiscreteDist.point(F(2)),) + (coin,) * (n - 1))


def test_criterion_1_three_agent(fixture_doc):
    inst = instance_from_doc(fixture_doc("three_agent_instance.json"))
    policy = policy_from_doc(fixture_doc("three_agent_policy.json"))
    start = time.perf_counter()
    u = evaluate_exact(inst, policy).utilities
    elapsed = time.perf_counter() - start
    ok = u[2] == F(8, 9) and u[0] == u[1] >= F(10, 9) and elapsed < 1
    record(1, ok, f"U = {tuple(str(x) for x in u)} in {elapsed:.3f}s")


def test_criterion_2_bernoulli_network():
    b = bernoulli_network((F(3, 10), F(3, 5))).b
    record(2, b == (F(7, 25), F(3, 25), F(21, 50), F(9, 50)), f"b = {tuple(str(x) for x in b)}")


def test_criterion_3_bernoulli_prefixes():
    rng = random.Random(3)
    bad = 0
    start = time.perf_counter()
    for _ in range(100):
        n = rng.randint(1, 6)
        mus = tuple(F(rng.randint(0, 20), 20) for _ in range(n))
        inst = Instance(tuple(DiscreteDist.from_pairs([(F(0), 1 - m), (F(1), m)]) for m in mus))
        got = sorted_prefixes(evaluate_exact(inst, build_bernoulli_policy(inst)).utilities)
        net = bernoulli_network(mus)
        want = [prefix_sum_oracle(net, k) for k in range(1, n + 1)]
        bad += list(got) != want
    elapsed = time.perf_counter() - start
    record(3, bad == 0 and elapsed < 30, f"{bad} mismatches over 100 instances in {elapsed:.1f}s")


def test_criterion_4_fullrev_half():
    rng = random.Random(4)
    violations = 0
    for _ in range(100):
        inst = rand_instance(rng, 5, 4)
        _, _, point = fullrev_flow(inst)
        u = evaluate_exact(inst, build_fullrev_twomaj_policy(inst)).utilities
        violations += sum(a < f / 2 for a, f in zip(u, point.f))
    record(4, violations == 0, f"{violations} violations over 100 instances")


def test_criterion_5_singlemean():
    rng = random.Random(5)
    bad = []
    start = time.perf_counter()
    for t in range(50):
        inst = rand_instance(rng, 4, 3)
        for model in UtilityModel:
            policy, plan = build_singlemean_policy(inst, EPS, model)
            u = evaluate_exact(inst, policy, Approx(EPS), model).utilities
            cert = singlemean_certificate(plan, u)
            if not (cert.componentwise_ok and all(cert.half_ok) and cert.alpha <= cert.guarantee):
                bad.append((t, model.value))
    elapsed = time.perf_counter() - start
    record(5, not bad and elapsed < 300, f"{len(bad)} failures over 50 instances x 2 models in {elapsed:.1f}s")


def test_criterion_6_coin():
    inst = coin_instance(5)
    full = SignalingPolicy.single(SignalingScheme(full_revelation(inst), ExplicitTable()))
    fr = min(evaluate_exact(inst, full).utilities)
    policy, _ = build_singlemean_policy(inst, EPS)
    sm = min(evaluate_exact(inst, policy, Approx(EPS)).utilities)
    record(6, fr == F(1, 8) and sm > F(1, 8), f"full revelation min {fr}, single mean min {float(sm):.6f}")


def test_criterion_7_sk_closed_form():
    bad = []
    for n in range(1, 11):
        for k in range(1, n + 1):
            u = evaluate_exact(make_lb_instance(n), build_sk_policy(n, k)).utilities
            if u != sk_utilities_closed_form(n, k):
                bad.append((n, k))
    twelve = evaluate_exact(make_lb_instance(3), build_sk_policy(3, 1)).utilities == (F(12, 13),) * 3
    record(7, not bad and twelve, f"{len(bad)} mismatches for n <= 10; S_1 at n = 3 gives 12/13: {twelve}")


def test_criterion_8_lower_bound():
    failures = []
    worst = {}
    for n in (20, 50):
        inst = make_lb_instance(n)
        audits = {f"S_{k}": lb_audit(n, build_sk_policy(n, k)) for k in range(1, n + 1)}
        audits["fullrev2"] = lb_audit(n, build_fullrev_twomaj_policy(inst))
        policy, plan = build_singlemean_policy(inst, EPS)
        u = evaluate_exact(inst, policy, Approx(EPS)).utilities
        audits["singlemean"] = lb_audit_utilities(n, u)
        cert = singlemean_certificate(plan, u)
        if cert.alpha > cert.guarantee:
            failures.append((n, "singlemean certificate"))
        failures += [(n, name) for name, a in audits.items() if not a.respects_floor]
        worst[n] = min(float(a.alpha) for a in audits.values())
    detail = ", ".join(f"n={n}: min alpha {a:.3f}" for n, a in worst.items())
    record(8, not failures, f"{len(failures)} failures; {detail}")


def test_criterion_9_properties():
    rng = random.Random(9)
    fails = {}

    # martingale and label merging
    bad = 0
    for _ in range(200):
        d = rand_dist(rng, 4, 1, 9)
        post = posteriors(d, rand_mapping_row(rng, d))
        bad += sum(e.q * e.mean for e in post) != d.mean or sum(e.q for e in post) != 1
    fails["martingale"] = bad

    # scale equivariance of evaluation
    bad = 0
    for _ in range(50):
        inst = rand_instance(rng, 3, 3)
        mapping = MappingRule(tuple(rand_mapping_row(rng, d) for d in inst.agents))
        c = F(rng.randint(1, 15), rng.randint(1, 5))
        smap = MappingRule(tuple({v * c: out for v, out in row.items()} for row in mapping.rows))
        u = evaluate_exact(inst, SignalingPolicy.single(SignalingScheme(mapping, ExplicitTable()))).utilities
        su = evaluate_exact(inst.scaled(c), SignalingPolicy.single(SignalingScheme(smap, ExplicitTable()))).utilities
        bad += su != tuple(c * x for x in u)
    fails["scale"] = bad

    # lex-optimal flow against the prefix LP
    bad = 0
    for _ in range(200):
        M, n = rng.randint(1, 12), rng.randint(1, 8)
        b = tuple(rng.randint(0, 20) / rng.randint(1, 6) for _ in range(M))
        cap = {
            (j, i): rng.randint(1, 20) / rng.randint(1, 6)
            for j in range(M)
            for i in range(n)
            if rng.random() < 0.5
        }
        net = FlowNetwork(b, cap, n)
        point = lex_optimal_flow(net)
        for k in range(1, n + 1):
            ref = prefix_sum_oracle(net, k)
            bad += abs(point.prefix[k - 1] - ref) > 1e-9 * max(1.0, ref)
    fails["lexflow"] = bad

    # maximal mapping against a 1e-3 grid search
    bad = 0
    for _ in range(50):
        d = rand_dist(rng, 3, 1, 8, denom=10)
        m = F(rng.randint(1, 8))
        m_hat = m + F(rng.randint(0, 8), 4)
        beta = float(solve_maximal_mapping(d, m, m_hat).beta)
        brute = grid_maximal_mapping(d, m, m_hat)
        bad += brute > beta + 1e-9 or beta - brute > 2e-3
    fails["maximal"] = bad

    # any mapping's (p, Q) is dominated by the maximal two-signal mapping
    bad = 0
    for _ in range(200):
        d = rand_dist(rng, 3, 1, 9)
        row = rand_mapping_row(rng, d)
        m = F(rng.randint(4, 32), 4)
        m_hat = m * F(5, 4)
        post = posteriors(d, row)
        inside = sum((e.q for e in post if m <= e.mean <= m_hat), F(0))
        q_tau = sum((e.q for e in post if e.mean <= m_hat), F(0))
        p_tau = inside / q_tau if q_tau else F(0)
        a = agent_bucket(d, m, m_hat)
        bad += a.Q < q_tau or a.p < p_tau
    fails["collapse"] = bad

    record(9, not any(fails.values()), " ".join(f"{k}:{v}" for k, v in fails.items()))
