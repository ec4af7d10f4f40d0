import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, special

import conflate as C
from conflate import distributions as D
from conflate.errors import InvalidSpec
from conflate.serialization import dump_spec, load_spec, spec_from_dict, spec_to_dict

CONTINUOUS = [
    C.Normal(0.3, 2.0),
    C.Exponential(1.7),
    C.Gamma(2.5, 0.8),
    C.Beta(2.0, 3.5),
    C.Uniform(-1.0, 2.0),
    C.Laplace(1.3),
    C.Pareto(3.0, 2.0),
    C.Cauchy(0.5, 1.5),
    C.ChiSquare(4),
    C.Truncated(C.Normal(0, 1), 0.0, math.inf),
    C.Truncated(C.Exponential(1.0), 1.0, 3.0),
]

DISCRETE = [
    C.Bernoulli(1 / 3),
    C.Geometric(0.3),
    C.DiscreteUniform(7),
    C.Zipf(1.2, 15),
    C.Zeta(2.5),
    C.Poisson(4.0),
    C.Binomial(6, 0.4),
    C.CMP(6.0, 2),
    C.PmfTable({-1.5: 0.25, 0.0: 0.5, 2.0: 0.25}),
]


def _ids(specs):
    return [repr(s)[:40] for s in specs]


class TestEvaluate:
    def test_normal_mode(self):
        assert C.evaluate(C.Normal(0, 1), 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)

    def test_bernoulli_atom(self):
        assert C.evaluate(C.Bernoulli(1 / 3), 1.0) == pytest.approx(1 / 3, abs=1e-16)

    def test_outside_support_is_zero(self):
        assert C.evaluate(C.Uniform(0, 1), 2.0) == 0.0
        assert C.evaluate(C.Geometric(0.5), 0.0) == 0.0
        assert C.evaluate(C.Poisson(2.0), 1.5) == 0.0

    def test_dict_input_is_parsed(self):
        assert C.evaluate({"kind": "exponential", "params": {"mean": 2}}, 0.0) == pytest.approx(0.5)

    def test_rejects_non_specs(self):
        with pytest.raises(InvalidSpec):
            C.evaluate("normal", 0.0)


class TestIntervalProb:
    def test_uniform_half(self):
        assert C.interval_prob(C.Uniform(0, 1), 0.0, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_bernoulli_captures_right_endpoint(self):
        assert C.interval_prob(C.Bernoulli(0.25), 0.5, 1.0) == pytest.approx(0.25, abs=1e-16)
        assert C.interval_prob(C.Bernoulli(0.25), 1.0, 1.5) == 0.0
        assert C.interval_prob(C.Bernoulli(0.25), -0.5, 0.0) == pytest.approx(0.75, abs=1e-16)

    def test_exponential_whole_half_line(self):
        assert C.interval_prob(C.Exponential(1), 0.0, math.inf) == pytest.approx(1.0, abs=1e-15)

    def test_empty_interval_raises(self):
        with pytest.raises(ValueError):
            C.interval_prob(C.Normal(0, 1), 1.0, 1.0)
        with pytest.raises(ValueError):
            C.interval_prob(C.Normal(0, 1), 2.0, 1.0)

    def test_far_tail_keeps_relative_accuracy(self):
        # cdf differences lose everything out here; survival differences do not
        got = C.Normal(0, 1).interval_prob(30.0, 31.0)
        want = special.ndtr(-30.0) - special.ndtr(-31.0)
        assert got == pytest.approx(want, rel=1e-10)

    @pytest.mark.parametrize("spec", CONTINUOUS, ids=_ids(CONTINUOUS))
    def test_matches_quadrature(self, spec):
        lo, hi = spec.quantile_range(1e-3)
        a, b = lo + 0.2 * (hi - lo), lo + 0.7 * (hi - lo)
        q, _ = integrate.quad(lambda x: float(spec.pdf(x)), a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        assert spec.interval_prob(a, b) == pytest.approx(q, abs=1e-8)

    @pytest.mark.parametrize("spec", DISCRETE, ids=_ids(DISCRETE))
    def test_matches_summation(self, spec):
        xs, ps, _ = spec.atoms()
        a, b = float(xs[0]) + 0.5, float(xs[min(len(xs) - 1, 4)])
        want = math.fsum(ps[(xs > a) & (xs <= b)])
        assert spec.interval_prob(a, b) == pytest.approx(want, abs=1e-12)

    @given(st.floats(-5, 5), st.floats(0.01, 3), st.floats(0.01, 3))
    def test_additive_over_adjacent_intervals(self, a, d1, d2):
        s = C.Laplace(1.1)
        whole = s.interval_prob(a, a + d1 + d2)
        parts = s.interval_prob(a, a + d1) + s.interval_prob(a + d1, a + d1 + d2)
        assert whole == pytest.approx(parts, abs=1e-14)


class TestNormalization:
    @pytest.mark.parametrize("spec", CONTINUOUS, ids=_ids(CONTINUOUS))
    def test_density_integrates_to_one(self, spec):
        sup = spec.support()
        pts = [p for p in (spec.median,) if sup.lo < p < sup.hi]
        total = 0.0
        edges = [sup.lo, *pts, sup.hi]
        for a, b in zip(edges, edges[1:]):
            q, _ = integrate.quad(lambda x: float(spec.pdf(x)), a, b, epsabs=1e-13, epsrel=1e-12, limit=400)
            total += q
        assert total == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("spec", DISCRETE, ids=_ids(DISCRETE))
    def test_masses_sum_to_one(self, spec):
        xs, ps, tail = spec.atoms()
        assert np.all(ps > 0)
        # heavy lattice tails (zeta) stop at the atom cap and report the rest
        assert math.fsum(ps) + tail == pytest.approx(1.0, abs=1e-12)
        if spec.kind != "zeta":
            assert tail < 1e-12
            assert math.fsum(ps) == pytest.approx(1.0, abs=1e-10)

    def test_zeta_normalizer_against_direct_sum(self):
        # partial sum plus the Euler-Maclaurin tail, independent of scipy's zeta
        a = 2.5
        k = np.arange(1, 200001, dtype=float)
        n = k[-1]
        tail = n ** (1 - a) / (a - 1) - 0.5 * n**-a
        direct = math.fsum(k**-a) + tail
        assert special.zeta(a, 1) == pytest.approx(direct, rel=1e-12)
        z = C.Zeta(a)
        assert_allclose(z.pdf(k[:50]), k[:50] ** -a / direct, rtol=1e-12)
        assert float(z.sf(10)) == pytest.approx(1 - math.fsum(k[:10] ** -a) / direct, rel=1e-10)

    def test_zipf_masses_direct(self):
        z = C.Zipf(1.2, 15)
        k = np.arange(1, 16, dtype=float)
        assert_allclose(z.pdf(k), k**-1.2 / math.fsum(k**-1.2), rtol=1e-13)

    def test_cmp_masses_direct(self):
        c = C.CMP(6.0, 2)
        k = np.arange(0, 60)
        w = np.array([6.0**i / math.factorial(i) ** 2 for i in k])
        assert_allclose(c.pdf(k.astype(float)), w / math.fsum(w), rtol=1e-12, atol=1e-300)


class TestSupport:
    def test_geometric_lattice(self):
        s = C.support(C.Geometric(0.5))
        assert s.kind == "atoms" and s.is_lattice and s.lo == 1 and s.hi == math.inf

    def test_pareto_interval(self):
        s = C.support(C.Pareto(1.0, 2.0))
        assert (s.kind, s.lo, s.hi) == ("interval", 2.0, math.inf)

    def test_truncated_intersects_window(self):
        s = C.support(C.Truncated(C.Normal(0, 1), 0.0, math.inf))
        assert (s.kind, s.lo, s.hi) == ("interval", 0.0, math.inf)
        s = C.support(C.Truncated(C.Exponential(1), -3.0, 2.0))
        assert (s.lo, s.hi) == (0.0, 2.0)

    def test_finite_atoms(self):
        assert C.support(C.Bernoulli(0.3)).atoms == (0.0, 1.0)


class TestValidate:
    def test_zeta_alpha_two_accepted(self):
        assert C.validate(C.Zeta(2)) == C.Zeta(2)

    def test_zeta_alpha_one_rejected(self):
        with pytest.raises(InvalidSpec):
            C.Zeta(1)

    def test_pmf_renormalized_within_tolerance(self):
        t = C.PmfTable({0: 0.5, 1: 0.5000000001})
        assert math.fsum(m for _, m in t.atoms_) == pytest.approx(1.0, abs=1e-15)

    def test_pmf_rejected_outside_tolerance(self):
        with pytest.raises(InvalidSpec):
            C.PmfTable({0: 0.5, 1: 0.51})

    @pytest.mark.parametrize(
        "make",
        [
            lambda: C.Normal(0, 0),
            lambda: C.Normal(math.nan, 1),
            lambda: C.Exponential(-1),
            lambda: C.Uniform(1, 1),
            lambda: C.Bernoulli(1.5),
            lambda: C.Geometric(0),
            lambda: C.DiscreteUniform(0),
            lambda: C.Binomial(2.5, 0.3),
            lambda: C.CMP(1.0, 0),
            lambda: C.Truncated(C.Uniform(0, 1), 2.0, 3.0),
            lambda: C.PmfTable({0: -0.5, 1: 1.5}),
            lambda: C.PmfTable({}),
        ],
    )
    def test_bad_parameters(self, make):
        with pytest.raises(InvalidSpec):
            make()

    def test_gamma_accepts_real_shape(self):
        assert C.Gamma(2.5, 1.0).mean() == pytest.approx(2.5)


class TestGridDensity:
    def test_normalized_and_exact_cdf(self):
        x = np.linspace(0, 2, 5)
        g = C.GridDensity(x, 3 * x)  # triangle, total 6 before normalization
        assert g.norm == pytest.approx(6.0)
        assert float(g.cdf(1.0)) == pytest.approx(0.25, abs=1e-15)
        assert float(g.ppf(0.25)) == pytest.approx(1.0, abs=1e-12)
        # moments are trapezoid sums of x f(x) on the same points
        assert g.mean() == pytest.approx(0.5 * (0.125 + 0.5 + 1.125 + 2.0 / 2), abs=1e-12)

    def test_rejects_bad_arrays(self):
        with pytest.raises(InvalidSpec):
            C.GridDensity(np.array([0.0, 1.0, 1.0]), np.ones(3))
        with pytest.raises(InvalidSpec):
            C.GridDensity(np.array([0.0, 1.0]), np.array([1.0, -1.0]))
        with pytest.raises(InvalidSpec):
            C.GridDensity(np.array([0.0, 1.0]), np.zeros(2))


class TestTruncated:
    def test_mass_and_density(self):
        t = C.Truncated(C.Normal(0, 1), 0.0, math.inf)
        assert t.mass == pytest.approx(0.5)
        assert float(t.pdf(0.5)) == pytest.approx(2 * C.evaluate(C.Normal(0, 1), 0.5))
        assert float(t.pdf(-0.5)) == 0.0
        assert t.mean() == pytest.approx(math.sqrt(2 / math.pi), rel=1e-9)


class TestSerialization:
    @pytest.mark.parametrize("spec", CONTINUOUS + DISCRETE, ids=_ids(CONTINUOUS + DISCRETE))
    def test_round_trip(self, spec):
        back = load_spec(dump_spec(spec))
        assert spec_to_dict(back) == spec_to_dict(spec)
        assert dump_spec(back) == dump_spec(spec)

    def test_json_field_names(self):
        assert spec_to_dict(C.Poisson(2)) == {"kind": "poisson", "params": {"lambda": 2}}
        assert spec_to_dict(C.Exponential(1.5)) == {"kind": "exponential", "params": {"mean": 1.5}}
        d = spec_to_dict(C.Truncated(C.Normal(0, 1), 0, math.inf))
        assert d["hi"] is None and d["lo"] == 0

    def test_unknown_family_and_fields(self):
        with pytest.raises(InvalidSpec):
            spec_from_dict({"kind": "lognormal", "params": {}})
        with pytest.raises(InvalidSpec):
            spec_from_dict({"kind": "normal", "params": {"mu": 0}})
        with pytest.raises(InvalidSpec):
            spec_from_dict({"kind": "normal", "params": {"mu": 0, "sigma2": 1, "extra": 2}})
        with pytest.raises(InvalidSpec):
            load_spec("{not json")

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(1e-6, 1e6))
    def test_normal_round_trip_bit_exact(self, mu, s2):
        back = load_spec(dump_spec(C.Normal(mu, s2)))
        assert back.mu == mu and back.sigma2 == s2


class TestThreadSafety:
    def test_concurrent_evaluation_matches_serial(self):
        from concurrent.futures import ThreadPoolExecutor

        x = np.linspace(-3, 3, 2001)
        specs = CONTINUOUS[:6]
        serial = [s.pdf(x) for s in specs]
        with ThreadPoolExecutor(4) as pool:
            par = list(pool.map(lambda s: s.pdf(x), specs))
        for a, b in zip(serial, par):
            assert np.array_equal(a, b)


def test_params_exclude_class_constants():
    assert set(C.Normal(0, 1).params()) == {"mu", "sigma2"}
    assert D.FAMILIES["beta_dist"] is C.Beta
