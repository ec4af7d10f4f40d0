import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose
from scipy import stats

import conflate as C
from conflate.dyadic import (
    LEVEL_CAP,
    DyadicMeasure,
    measure_to_csv,
    measure_to_json,
    monotone_step,
    mu_j,
    normalized,
    oracle_conflation,
    tv_to,
)
from conflate.errors import ConflationError, IncompatibleInputs

BERNOULLI_PAIR = [C.Bernoulli(1 / 3), C.Bernoulli(1 / 4)]


def escaping_pair(n_atoms=40):
    """Atoms at k and just left of k, with masses 2^-k: the product mass escapes to infinity."""
    p1 = C.PmfTable({float(k): 2.0**-k for k in range(1, n_atoms + 1)})
    p2 = C.PmfTable({k - 2.0**-k: 2.0**-k for k in range(1, n_atoms + 1)})
    return p1, p2


class TestMuJ:
    @pytest.mark.parametrize("j", range(1, 11))
    def test_bernoulli_pair_every_level(self, j):
        mu = mu_j(BERNOULLI_PAIR, j)
        assert mu.as_dict() == {0.0: pytest.approx(0.5, abs=1e-15), 1.0: pytest.approx(1 / 12, abs=1e-15)}
        assert mu.total_mass == pytest.approx(7 / 12, abs=1e-15)

    @pytest.mark.parametrize("j", [1, 5, 17])
    def test_point_mass_identity(self, j):
        mu = mu_j([C.PmfTable({0.0: 1.0})], j)
        assert mu.as_dict() == {0.0: 1.0}
        assert mu.total_mass == 1.0

    def test_normal_pair_level_one_direct_sum(self):
        mu = mu_j([C.Normal(0, 1), C.Normal(0, 1)], 1, window=(-8, 8))
        k = np.arange(-15, 17)
        lower = stats.norm.cdf(k / 2) - stats.norm.cdf((k - 1) / 2)
        upper = stats.norm.sf((k - 1) / 2) - stats.norm.sf(k / 2)
        cells = np.where(k > 0, upper, lower)
        assert mu.total_mass == pytest.approx(math.fsum(cells**2), abs=1e-15)
        assert_allclose(mu.masses, cells**2, rtol=1e-12)

    def test_tail_bound_covers_outside_mass(self):
        specs = [C.Normal(0, 1), C.Normal(0.5, 2)]
        narrow = mu_j(specs, 3, window=(-1, 1))
        wide = mu_j(specs, 3, window=(-12, 12))
        assert wide.total_mass - narrow.total_mass <= narrow.tail_bound + 1e-15

    def test_invariants(self):
        mu = mu_j([C.Gamma(2, 1), C.Exponential(2)], 6)
        assert np.all(mu.masses > 0)
        assert mu.total_mass <= 1
        assert mu.total_mass == pytest.approx(math.fsum(mu.masses), abs=1e-12)
        assert np.all(np.diff(mu.ks) > 0)

    def test_errors(self):
        with pytest.raises(ValueError):
            mu_j([], 3)
        with pytest.raises(ValueError):
            mu_j(BERNOULLI_PAIR, LEVEL_CAP + 1)
        with pytest.raises(ValueError):
            mu_j(BERNOULLI_PAIR, 0)

    def test_permutation_gives_identical_arrays(self):
        specs = [C.Normal(0.2, 1.3), C.Laplace(0.7), C.Uniform(-2, 3)]
        a = mu_j(specs, 7)
        b = mu_j(specs[::-1], 7)
        assert np.array_equal(a.ks, b.ks) and np.array_equal(a.masses, b.masses)

    def test_serialization(self):
        mu = mu_j(BERNOULLI_PAIR, 2)
        d = json.loads(measure_to_json(mu))
        assert d["level"] == 2 and d["atoms"] == [[0.0, 0.5], [1.0, 1 / 12]]
        assert measure_to_csv(mu).splitlines()[0] == "x,mass"


class TestNormalized:
    def test_example_split(self):
        q = normalized(mu_j(BERNOULLI_PAIR, 4))
        assert q.as_dict() == {0.0: pytest.approx(6 / 7, abs=1e-15), 1.0: pytest.approx(1 / 7, abs=1e-15)}

    def test_probability_input_unchanged(self):
        mu = mu_j([C.PmfTable({0.5: 0.25, 1.0: 0.75})], 3)
        assert normalized(mu).as_dict() == {0.5: 0.25, 1.0: 0.75}

    def test_zero_measure_raises(self):
        zero = DyadicMeasure(1, np.array([], dtype=np.int64), np.array([]), 0.0, (0, -1), 0.0)
        with pytest.raises(IncompatibleInputs):
            normalized(zero)


class TestOracle:
    def test_bernoulli_pair_stable_from_level_one(self):
        rep = oracle_conflation(BERNOULLI_PAIR, j_max=6, tv_tol=0.0)
        assert_allclose(rep.mass_sequence, 7 / 12, atol=1e-15)
        assert rep.approx.as_dict() == {0.0: pytest.approx(6 / 7, abs=1e-15), 1.0: pytest.approx(1 / 7, abs=1e-15)}
        assert rep.monotonicity_ok and not rep.escape_flag

    def test_normal_pair_near_closed_form(self):
        rep = oracle_conflation([C.Normal(0, 1), C.Normal(0, 1)], j_max=12, tv_tol=1e-4)
        assert tv_to(rep, C.Normal(0, 0.5)) <= 0.01
        assert rep.mass_sequence[-1] == pytest.approx(1 / (2 * math.sqrt(math.pi)) * 2.0**-rep.achieved_level, rel=1e-3)

    def test_escaping_mass_is_flagged(self):
        rep = oracle_conflation(list(escaping_pair()), j_max=20, tv_tol=0.0)
        assert rep.escape_flag
        # total mass keeps shrinking geometrically, so the limit is the zero measure
        assert rep.mass_sequence[-1] < 1e-10

    def test_right_closed_cells_separate_atoms_to_the_right(self):
        p1 = C.PmfTable({float(k): 2.0**-k for k in range(1, 41)})
        p2 = C.PmfTable({k + 2.0**-k: 2.0**-k for k in range(1, 41)})
        assert mu_j([p1, p2], 5).total_mass == 0.0
        with pytest.raises(IncompatibleInputs):
            oracle_conflation([p1, p2], j_max=4)

    @pytest.mark.parametrize(
        "specs",
        [
            [C.Gamma(2.0, 1.5), C.Gamma(3.5, 0.5)],
            [C.Normal(1, 2), C.Laplace(1.0)],
            [C.Geometric(0.3), C.Poisson(4.0)],
        ],
        ids=["gamma", "normal-laplace", "geometric-poisson"],
    )
    def test_no_escape_for_ordinary_inputs(self, specs):
        assert not oracle_conflation(specs, j_max=12, tv_tol=0.0).escape_flag

    def test_report_serializes(self):
        rep = oracle_conflation(BERNOULLI_PAIR, j_max=3)
        d = json.loads(rep.to_json())
        assert set(d) >= {"approx", "mass_sequence", "monotonicity_ok", "escape_flag", "achieved_level"}
        assert rep.to_csv().startswith("x,mass\n")


class TestMonotonicity:
    @settings(max_examples=15, deadline=None)
    @given(
        st.floats(-2, 2),
        st.floats(0.3, 3),
        st.floats(-2, 2),
        st.floats(0.3, 3),
    )
    def test_mass_never_grows_under_refinement(self, m1, v1, m2, v2):
        specs = [C.Normal(m1, v1), C.Laplace(math.sqrt(v2)), C.Cauchy(m2, 1.0)]
        window = (-16.0, 16.0)
        prev = mu_j(specs, 1, window)
        for j in range(2, 9):
            mu = mu_j(specs, j, window)
            assert monotone_step(mu, prev)
            assert mu.total_mass <= prev.total_mass + 1e-12
            prev = mu


class TestSuperadditivity:
    """A product of sums dominates the sum of the termwise products."""

    @given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 8)), elements=st.floats(0, 10)))
    def test_random_nonnegative_matrices(self, a):
        lhs = np.prod(a.sum(axis=1))
        rhs = np.sum(np.prod(a, axis=0))
        assert lhs >= rhs * (1 - 1e-12) - 1e-300


def test_errors_are_library_errors():
    assert issubclass(IncompatibleInputs, ConflationError)
