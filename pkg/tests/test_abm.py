import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsim import abm, rng
from hybridsim.abm import (
    BCParams,
    HKParams,
    LorenzParams,
    Message,
    OrdinaryAgentState,
    Population,
    RAParams,
    SJParams,
)

import oracles

S = OrdinaryAgentState
EXACT = 1e-15

attitudes = st.floats(-1.0, 1.0, allow_nan=False)


class TestMessages:
    def test_bc_identity(self):
        m = abm.message_of(BCParams(), S("a", 0.4))
        assert m == Message("a", 0.4)

    def test_ra_segment(self):
        m = abm.message_of(RAParams(0.3, 0.2), S("a", 0.1, 0.2))
        assert m.score == 0.1
        assert m.segment == pytest.approx((-0.1, 0.3), abs=EXACT)

    def test_lorenz_boundary(self):
        assert abm.message_of(LorenzParams(), S("a", -1.0)).score == -1.0

    def test_ra_requires_uncertainty(self):
        with pytest.raises(abm.InvalidStateError):
            abm.message_of(RAParams(), S("a", 0.1, 0.0))


class TestParams:
    def test_sj_order(self):
        with pytest.raises(ValueError):
            SJParams(0.1, acc_thred=0.5, rej_thred=0.5)

    @pytest.mark.parametrize("alpha", [-0.1, 1.1])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            BCParams(alpha=alpha)

    def test_aliases(self):
        p = abm.params_from_dict({"kind": "lorenz", "alpha": 0.1, "lambda": 2.0, "k": 10.0, "tho": 0.5})
        assert p == LorenzParams(alpha=0.1, lam=2.0, k=10.0, rho=0.5)
        assert abm.params_from_dict(abm.params_to_dict(p)) == p

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown model kind"):
            abm.params_from_dict({"kind": "voter"})


class TestUpdates:
    def test_bc(self):
        assert abm.update_bc(S("i", 0.0), Message("j", 0.2), BCParams(0.1, 0.3)) == pytest.approx(0.02, abs=EXACT)
        assert abm.update_bc(S("i", 0.0), Message("j", 0.5), BCParams(0.1, 0.3)) == 0.0
        assert abm.update_bc(S("i", 0.4), Message("j", 0.4), BCParams(0.1, 0.3)) == 0.0

    def test_hk(self):
        msgs = [Message(str(k), v) for k, v in enumerate([0.2, -0.2, 0.9])]
        assert abm.update_hk(S("i", 0.0), msgs, HKParams(0.3)) == pytest.approx(0.0, abs=EXACT)
        assert abm.update_hk(S("i", 0.0), [Message("j", 0.9)], HKParams(0.3)) == 0.0
        assert abm.update_hk(S("i", 0.0), [Message("j", 0.2)], HKParams(0.3)) == pytest.approx(0.1, abs=EXACT)

    def test_hk_ignores_own_message(self):
        msgs = [Message("i", 0.0), Message("j", 0.2)]
        assert abm.update_hk(S("i", 0.0), msgs, HKParams(0.3)) == pytest.approx(0.1, abs=EXACT)

    def test_ra(self):
        p = RAParams(0.3, 0.2)
        msg = abm.message_of(p, S("j", 0.1, 0.2))
        assert abm.update_ra(S("i", 0.0, 0.2), msg, p) == pytest.approx(0.015, abs=EXACT)

    def test_ra_disjoint(self):
        p = RAParams(0.3, 0.1)
        msg = abm.message_of(p, S("j", 0.8, 0.1))
        assert abm.update_ra(S("i", -0.8, 0.1), msg, p) == 0.0

    def test_ra_ratio_exactly_one(self):
        # overlap 0.25, u_j 0.25: h/u_j == 1 exactly in binary floating point
        p = RAParams(0.3, 0.25)
        msg = Message("j", 0.25, (0.0, 0.5))
        assert abm.update_ra(S("i", 0.0, 0.25), msg, p) == 0.0

    def test_ra_missing_segment(self):
        with pytest.raises(abm.ContractError):
            abm.update_ra(S("i", 0.0, 0.2), Message("j", 0.1), RAParams())

    def test_sj(self):
        p = SJParams(0.15, 0.1, 0.8)
        assert abm.update_sj(S("i", 0.0), Message("j", 0.05), p) == pytest.approx(0.0075, abs=EXACT)
        assert abm.update_sj(S("i", 0.0), Message("j", 0.9), p) == pytest.approx(-0.135, abs=EXACT)
        assert abm.update_sj(S("i", 0.0), Message("j", 0.5), p) == 0.0

    def test_lorenz(self):
        p = LorenzParams(alpha=0.1, lam=1.0, k=2.0, rho=1.0, M=1.0, credibility=1.0)
        assert abm.update_lorenz(S("i", 0.0), Message("j", 0.5), p) == pytest.approx(0.04, abs=EXACT)
        assert abm.update_lorenz(S("i", 1.0), Message("j", 0.5), p) == 0.0
        p0 = LorenzParams(alpha=0.1, lam=1.0, k=2.0, rho=0.0)
        assert abm.update_lorenz(S("i", 0.3), Message("j", 0.0), p0) == 0.0

    def test_literal_signs_flip(self):
        msgs = [Message("j", 0.2)]
        assimilative = abm.update_hk(S("i", 0.0), msgs, HKParams(0.3))
        literal = abm.update_hk(S("i", 0.0), msgs, HKParams(0.3, paper_literal_signs=True))
        assert literal == -assimilative
        p = RAParams(0.3, 0.2, paper_literal_signs=True)
        msg = abm.message_of(p, S("j", 0.1, 0.2))
        assert abm.update_ra(S("i", 0.0, 0.2), msg, p) == pytest.approx(-0.015, abs=EXACT)


class TestOracleEquivalence:
    @settings(max_examples=300, deadline=None)
    @given(attitudes, attitudes, st.floats(0, 1), st.floats(0.01, 2.0))
    def test_bc(self, a, m, alpha, eps):
        got = abm.update_bc(S("i", a), Message("j", m), BCParams(alpha, eps))
        assert got == pytest.approx(oracles.bc(a, m, alpha, eps), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(attitudes, st.lists(attitudes, min_size=1, max_size=12), st.floats(0.01, 2.0), st.booleans())
    def test_hk(self, a, others, eps, literal):
        msgs = [Message(f"s{k}", v) for k, v in enumerate(others)]
        got = abm.update_hk(S("i", a), msgs, HKParams(eps, literal))
        assert got == pytest.approx(oracles.hk(a, others, eps, literal), abs=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(attitudes, st.floats(0.01, 1.0), attitudes, st.floats(0.01, 1.0), st.floats(0, 1), st.booleans())
    def test_ra(self, a, ui, m, uj, alpha, literal):
        p = RAParams(alpha, uj, literal)
        msg = abm.message_of(p, S("j", m, uj))
        got = abm.update_ra(S("i", a, ui), msg, p)
        assert got == pytest.approx(oracles.ra(a, ui, m, uj, alpha, literal), abs=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(attitudes, attitudes, st.floats(0, 1), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_sj(self, a, m, alpha, acc, gap):
        p = SJParams(alpha, acc, acc + gap)
        got = abm.update_sj(S("i", a), Message("j", m), p)
        assert got == pytest.approx(oracles.sj(a, m, alpha, acc, acc + gap), abs=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(attitudes, attitudes, st.floats(0, 1), st.floats(0.1, 3.0), st.floats(0.5, 10.0),
           st.floats(0, 1), st.floats(1.0, 2.0), st.floats(0, 1))
    def test_lorenz(self, a, m, alpha, lam, k, rho, M, s):
        p = LorenzParams(alpha, lam, k, rho, M, s)
        got = abm.update_lorenz(S("i", a), Message("j", m), p)
        assert got == pytest.approx(oracles.lorenz(a, m, alpha, lam, k, rho, M, s), abs=1e-12)


class TestSelection:
    def pool(self, params, values, externals=()):
        pop = Population.from_attitudes(values, params)
        return abm.build_pool(params, pop, externals)

    def test_bc_single_candidate(self):
        pool = self.pool(BCParams(0.1, 0.3), {"f": 0.0, "a": 0.2, "b": 0.9})
        for u in np.linspace(0, 0.999, 7):
            assert abm.select_partners(BCParams(0.1, 0.3), "f", pool, u).targets == {"a"}

    def test_bc_nobody_in_bound(self):
        p = BCParams(0.1, 0.1)
        pool = self.pool(p, {"f": 0.0, "a": 0.9, "b": -0.9})
        assert abm.select_partners(p, "f", pool, 0.5).targets == frozenset()

    def test_hk_select_all(self):
        p = HKParams(0.2)
        pool = self.pool(p, {str(i): 0.1 * i for i in range(5)})
        assert abm.select_partners(p, "2", pool, 0.3).targets == {"0", "1", "3", "4"}

    @pytest.mark.parametrize("params", [RAParams(), SJParams(), LorenzParams()])
    def test_random_one_never_self(self, params):
        pool = self.pool(params, {str(i): 0.1 * i for i in range(6)})
        chosen = set()
        for u in np.linspace(0, 0.9999, 50):
            (t,) = abm.select_partners(params, "3", pool, u).targets
            assert t != "3"
            chosen.add(t)
        assert chosen == {"0", "1", "2", "4", "5"}

    def test_singleton_pool_empty(self):
        p = SJParams()
        pool = self.pool(p, {"only": 0.2})
        assert abm.select_partners(p, "only", pool, 0.5).targets == frozenset()

    def test_bc_uniform_over_bound(self):
        # enumerate the draw grid: every in-bound candidate gets an equal share
        p = BCParams(0.1, 0.35)
        values = {"f": 0.0, "a": -0.3, "b": 0.1, "c": 0.1, "d": 0.34, "e": 0.36, "g": -0.5}
        pool = self.pool(p, values)
        counts: dict[str, int] = {}
        for u in (np.arange(4000) + 0.5) / 4000:
            (t,) = abm.select_partners(p, "f", pool, u).targets
            counts[t] = counts.get(t, 0) + 1
        assert counts == {"a": 1000, "b": 1000, "c": 1000, "d": 1000}

    def test_bc_matches_bruteforce_predicate(self):
        gen = np.random.default_rng(5)
        p = BCParams(0.2, 0.25)
        for _ in range(30):
            vals = {f"x{i}": float(v) for i, v in enumerate(gen.uniform(-1, 1, 25))}
            vals["tie"] = vals["x3"]
            pool = self.pool(p, vals)
            idx = abm._BoundIndex(pool.scores)
            u = gen.random(len(pool.ids))
            got = idx.partners(np.arange(len(pool.ids)), p.epsilon, u)
            for i, j in enumerate(got):
                cands = [k for k in range(len(pool.ids))
                         if k != i and abs(pool.scores[k] - pool.scores[i]) < p.epsilon]
                if not cands:
                    assert j == -1
                else:
                    assert j in cands


class TestStepRound:
    def test_two_agent_bc(self):
        pop = Population.from_attitudes({"a": -0.4, "b": 0.4})
        out = abm.step_round(BCParams(0.5, 2.0), pop, [], rng.stream_key(1), 1)
        assert out.attitudes.tolist() == [0.0, 0.0]

    def test_singleton_unchanged(self):
        pop = Population.from_attitudes({"a": 0.3})
        out = abm.step_round(BCParams(0.5, 2.0), pop, [], rng.stream_key(1), 1)
        assert out.attitudes.tolist() == [0.3]

    def test_external_out_of_range(self):
        pop = Population.from_attitudes({"a": 0.3, "b": 0.1})
        with pytest.raises(ValueError, match="outside"):
            abm.step_round(BCParams(), pop, [Message("core", 1.2)], 1, 1)

    def test_external_is_selectable(self):
        pop = Population.from_attitudes({"o": 0.0})
        out = abm.step_round(BCParams(0.1, 1.0), pop, [Message("core", 0.6)], 1, 1)
        assert out.attitudes[0] == pytest.approx(0.06, abs=EXACT)

    def test_ra_external_gets_default_segment(self):
        p = RAParams(0.3, 0.2)
        pop = Population.from_attitudes({"o": 0.0}, p)
        out = abm.step_round(p, pop, [Message("core", 0.1)], 1, 1)
        assert out.attitudes[0] == pytest.approx(0.015, abs=1e-12)

    @pytest.mark.parametrize("params", [BCParams(0.3, 0.5), HKParams(0.4), RAParams(0.3, 0.3),
                                        SJParams(0.2, 0.1, 0.6), LorenzParams(0.3, 1, 2, 0.5)])
    def test_determinism_and_order_independence(self, params):
        gen = np.random.default_rng(11)
        vals = {f"u{i:03d}": float(v) for i, v in enumerate(gen.uniform(-1, 1, 60))}
        items = list(vals.items())
        gen.shuffle(items)
        p1 = Population.from_attitudes(vals, params)
        p2 = Population.from_attitudes(dict(items), params)
        ext = [Message("c2", 0.5), Message("c1", -0.7)]
        key = rng.stream_key(42)
        a = abm.step_round(params, p1, ext, key, 3)
        b = abm.step_round(params, p2, list(reversed(ext)), key, 3)
        c = abm.step_round(params, p1, ext, key, 3, workers=4)
        assert a.attitudes.tobytes() == b.attitudes.tobytes() == c.attitudes.tobytes()

    @pytest.mark.parametrize("params", [BCParams(0.3, 0.5), SJParams(0.2, 0.1, 0.6)])
    def test_round_matches_pairwise_oracle(self, params):
        gen = np.random.default_rng(3)
        vals = {f"u{i}": float(v) for i, v in enumerate(gen.uniform(-1, 1, 30))}
        pop = Population.from_attitudes(vals, params)
        key = rng.stream_key(9)
        out = abm.step_round(params, pop, [], key, 2)
        pool = abm.build_pool(params, pop)
        u = rng.uniforms(key, pop.keys, 2)
        for i, ident in enumerate(pop.ids):
            targets = abm.select_partners(params, ident, pool, u[i]).targets
            a = pop.attitudes[i]
            if not targets:
                expected = a
            else:
                (t,) = targets
                m = pool.scores[pool.ids.index(t)]
                d = (oracles.bc(a, m, params.alpha, params.epsilon) if isinstance(params, BCParams)
                     else oracles.sj(a, m, params.alpha, params.acc_thred, params.rej_thred))
                expected = min(1.0, max(-1.0, a + d))
            assert out.attitudes[i] == pytest.approx(expected, abs=1e-12)

    def test_sequential_mode_runs_and_clamps(self):
        p = SJParams(1.0, 0.1, 0.3)
        pop = Population.from_attitudes({"a": -0.9, "b": 0.9, "c": 0.95})
        out = abm.step_round(p, pop, [], 1, 1, synchronous=False)
        assert np.all(np.abs(out.attitudes) <= 1.0)

    def test_simulate_length(self):
        pop = Population.from_attitudes({"a": -0.4, "b": 0.4, "c": 0.1})
        trace = abm.simulate(BCParams(), pop, 7, seed=3)
        assert len(trace) == 7


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(["bc", "hk", "ra", "sj", "lorenz"]),
           st.lists(attitudes, min_size=2, max_size=30), st.integers(0, 2**32))
    def test_clamped(self, kind, values, seed):
        params = {
            "bc": BCParams(1.0, 2.0), "hk": HKParams(1.0), "ra": RAParams(1.0, 0.8),
            "sj": SJParams(1.0, 0.05, 0.1), "lorenz": LorenzParams(1.0, 1.0, 1.0, 0.0),
        }[kind]
        pop = Population.from_attitudes({str(i): v for i, v in enumerate(values)}, params)
        for att in abm.simulate(params, pop, 5, seed):
            assert np.all(att >= -1.0) and np.all(att <= 1.0)

    @settings(max_examples=200, deadline=None)
    @given(attitudes, attitudes, st.floats(0, 1), st.floats(0.01, 2.0))
    def test_bc_pairwise_contraction(self, a, m, alpha, eps):
        new = a + abm.update_bc(S("i", a), Message("j", m), BCParams(alpha, eps))
        assert abs(new - m) <= abs(a - m) + 1e-15

    @settings(max_examples=100, deadline=None)
    @given(attitudes, st.floats(0, 1))
    def test_zero_delta_identical(self, a, alpha):
        msg = Message("j", a)
        assert abm.update_bc(S("i", a), msg, BCParams(alpha, 0.3)) == 0.0
        assert abm.update_hk(S("i", a), [msg], HKParams(0.3)) == 0.0
        assert abm.update_lorenz(S("i", a), msg, LorenzParams(alpha, rho=1.0)) == 0.0

    def test_hk_hull(self):
        gen = np.random.default_rng(0)
        pop = Population.from_attitudes({str(i): float(v) for i, v in enumerate(gen.uniform(-1, 1, 40))})
        prev = pop.attitudes
        for att in abm.simulate(HKParams(0.3), pop, 30, seed=1):
            assert att.max() <= prev.max() and att.min() >= prev.min()
            prev = att


def test_uniforms_are_address_functions():
    keys = rng.agent_keys(["a", "b", "c"])
    u1 = rng.uniforms(7, keys, 4)
    u2 = rng.uniforms(7, keys[::-1], 4)[::-1]
    assert u1.tobytes() == u2.tobytes()
    assert not np.array_equal(u1, rng.uniforms(7, keys, 5))
    assert np.all((u1 >= 0) & (u1 < 1))


def test_uniforms_roughly_uniform():
    keys = rng.agent_keys(str(i) for i in range(20000))
    u = rng.uniforms(rng.stream_key(1, 0), keys, 1)
    hist, _ = np.histogram(u, bins=10, range=(0, 1))
    assert hist.min() > 1800 and hist.max() < 2200
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 0.03
