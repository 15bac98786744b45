from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from majorsel.core import DiscreteDist, Instance, ValidationError, instance_from_doc
from majorsel.evaluate import UtilityModel, evaluate_exact
from majorsel.grid import make_grid
from majorsel.lpsolve import maximal_mapping_lp, solve_lp
from majorsel.posterior import Approx, posteriors
from majorsel.singlemean import (
    IN_LABEL,
    OUT_LABEL,
    agent_bucket,
    bucket_params,
    build_pmaj_network,
    build_singlemean_policy,
    singlemean_certificate,
)

from strategies import dists, instances, probs

F = Fraction
EPS = F(1, 4)
ONE_FIVE = DiscreteDist.from_pairs([(F(1), F(1, 2)), (F(5), F(1, 2))])


class TestGrid:
    def test_k_for_v5(self):
        assert make_grid(F(1), F(5), EPS).K == 8

    def test_trivial_range(self):
        g = make_grid(F(3), F(3), EPS)
        assert g.K == 1 and g.bucket_of(F(3)) == 0

    def test_exact_power(self):
        g = make_grid(F(2), F(2) * F(5, 4) ** 3, EPS)
        assert g.K == 3
        assert g.upper(2) == g.vmax

    def test_half_open_buckets(self):
        g = make_grid(F(1), F(5), EPS)
        assert g.bucket_of(F(5, 4)) == 1
        assert g.bucket_of(F(5, 4) - F(1, 10**9)) == 0
        assert g.bucket_of(F(5)) == g.K - 1
        with pytest.raises(ValidationError):
            g.bucket_of(F(6))

    def test_rejects(self):
        with pytest.raises(ValidationError):
            make_grid(F(1), F(5), 0)
        with pytest.raises(ValidationError):
            make_grid(F(0), F(5), EPS)

    @given(st.integers(1, 50), st.integers(1, 200), st.fractions(F(1, 20), 2, max_denominator=20))
    def test_covers_range(self, lo, span, eps):
        g = make_grid(F(lo), F(lo + span), eps)
        assert g.upper(g.K - 1) >= g.vmax
        assert g.K == 1 or g.upper(g.K - 2) < g.vmax


class TestBucketParams:
    def test_prior_above_interval(self):
        a = agent_bucket(ONE_FIVE, F(2), F(11, 5))
        assert (a.beta, a.p, a.Q, a.case) == (F(5, 7), 1, F(5, 7), "above")

    def test_prior_inside_reveals_nothing(self):
        a = agent_bucket(ONE_FIVE, F(5, 2), F(3))
        assert (a.p, a.Q, a.case) == (1, 1, "inside")
        assert all(out == ((IN_LABEL, 1),) for out in a.row.values())

    def test_unreachable_bucket(self):
        a = agent_bucket(DiscreteDist.point(F(2)), F(3), F(4))
        assert a.beta == 0 and a.p == 0 and a.case == "below"
        # a below-interval agent never blocks the others, so Q stays 1
        assert a.Q == 1

    def test_three_agent_bucket_of_two(self, fixture_doc):
        inst = instance_from_doc(fixture_doc("three_agent_instance.json"))
        grid = make_grid(inst.vmin, inst.vmax, EPS)
        k = grid.bucket_of(F(2))
        params = bucket_params(inst, grid)[k]
        assert (params.m, params.m_hat) == (F(125, 64), F(625, 256))
        beta = solve_lp(maximal_mapping_lp(ONE_FIVE, params.m, params.m_hat)).value
        assert beta == F(512, 655)
        assert params.Q == beta * beta
        assert (params.agents[2].p, params.agents[2].Q) == (1, 1)

    @given(dists(max_values=4), st.integers(1, 8), st.integers(0, 6))
    def test_realised_mapping(self, d, m, width):
        m, m_hat = F(m), F(m) + F(width, 4)
        a = agent_bucket(d, m, m_hat)
        post = posteriors(d, a.row)
        labels = post.labels
        if a.beta > 0:
            assert post[IN_LABEL].q == a.beta
            assert m <= post[IN_LABEL].mean <= m_hat
        else:
            assert IN_LABEL not in labels
        if OUT_LABEL in labels:
            if a.case == "below":
                assert post[OUT_LABEL].mean < m
            elif a.case == "above":
                assert post[OUT_LABEL].mean > m_hat
        assert sum(e.q * e.mean for e in post) == d.mean

    def test_network_models(self, fixture_doc):
        inst = instance_from_doc(fixture_doc("three_agent_instance.json"))
        grid = make_grid(inst.vmin, inst.vmax, EPS)
        params = bucket_params(inst, grid)
        val = build_pmaj_network(inst, grid, params, UtilityModel.VALUE)
        sel = build_pmaj_network(inst, grid, params, UtilityModel.SELECTION)
        for k, bp in enumerate(params):
            assert sel.b[k] == bp.Q / grid.K
            assert val.b[k] == bp.m * bp.Q / grid.K
            for (j, i), c in val.cap.items():
                assert c == params[j].agents[i].p * val.b[j]
        zero_q = [k for k, bp in enumerate(params) if bp.Q == 0]
        assert all(val.b[k] == 0 for k in zero_q)


class TestMaximalMappingDominance:
    @settings(max_examples=200)
    @given(st.data())
    def test_maximal_mapping_never_worse(self, data):
        """Any mapping's (p, Q) for an interval is dominated by the
        canonical two-signal maximal mapping's."""
        d = data.draw(dists(max_values=3, lo=1, hi=9))
        labels = data.draw(st.integers(2, 3))
        row = {}
        for v in d.values:
            ps = data.draw(probs(labels, 6))
            row[v] = tuple((f"s{t}", p) for t, p in enumerate(ps))
        m = F(data.draw(st.integers(4, 32)), 4)
        m_hat = m * F(5, 4)
        post = posteriors(d, row)
        inside = sum((e.q for e in post if m <= e.mean <= m_hat), F(0))
        q_tau = sum((e.q for e in post if e.mean <= m_hat), F(0))
        p_tau = inside / q_tau if q_tau else F(0)
        a = agent_bucket(d, m, m_hat)
        assert a.Q >= q_tau
        assert a.p >= p_tau


class TestPolicy:
    def test_single_agent(self):
        inst = Instance((DiscreteDist.from_pairs([(F(1), F(1, 3)), (F(4), F(2, 3))]),))
        for eps in (F(1, 4), F(1)):
            policy, _ = build_singlemean_policy(inst, eps)
            assert evaluate_exact(inst, policy, Approx(eps)).utilities == (F(3),)

    def test_plan_feasibility(self, fixture_doc):
        inst = instance_from_doc(fixture_doc("three_agent_instance.json"))
        _, plan = build_singlemean_policy(inst, EPS)
        for k, bp in enumerate(plan.params):
            assert sum(plan.xhat[k]) <= 1
            assert all(x <= a.p for x, a in zip(plan.xhat[k], bp.agents))
        assert plan.to_doc()["grid"]["K"] == 8

    @settings(max_examples=15)
    @given(instances(max_agents=3, max_values=3), st.sampled_from(list(UtilityModel)))
    def test_half_guarantee(self, inst, model):
        policy, plan = build_singlemean_policy(inst, EPS, model)
        u = evaluate_exact(inst, policy, Approx(EPS), model).utilities
        cert = singlemean_certificate(plan, u)
        assert cert.componentwise_ok and all(cert.half_ok)
        assert cert.alpha <= cert.guarantee

    def test_trivial_grid_certificate(self):
        inst = Instance((DiscreteDist.point(F(2)), DiscreteDist.point(F(2))))
        policy, plan = build_singlemean_policy(inst, EPS)
        u = evaluate_exact(inst, policy, Approx(EPS)).utilities
        cert = singlemean_certificate(plan, u)
        assert plan.grid.K == 1 and cert.guarantee == 2 * F(5, 4)
        assert cert.ok

    def test_float_instance(self):
        inst = Instance((DiscreteDist((1.0, 5.0), (0.5, 0.5)), DiscreteDist((2.0,), (1.0,))))
        policy, plan = build_singlemean_policy(inst, 0.25)
        u = evaluate_exact(inst, policy, Approx(0.25)).utilities
        assert all(a >= b / 2 - 1e-9 for a, b in zip(u, plan.u_hat))

    def test_coin_beats_full_revelation(self):
        coin = DiscreteDist.from_pairs([(F(1), F(1, 2)), (F(3), F(1, 2))])
        inst = Instance((DiscreteDist.point(F(2)),) + (coin,) * 4)
        policy, _ = build_singlemean_policy(inst, EPS)
        assert min(evaluate_exact(inst, policy, Approx(EPS)).utilities) > F(1, 8)
