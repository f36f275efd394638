from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.stats import multivariate_normal

from discat.errors import EmptyTable, InputError, MissingValue, OutOfRangeCategory, RaggedRow
from discat.tables import ContingencyTable, read_raw_csv
from fixtures import ENVIOUS_FREQS, envious_counts


def test_from_raw_counts_multiplicities():
    t = ContingencyTable.from_raw([(1, 1), (1, 1), (2, 1)], (2, 2))
    assert t.support() == {(1, 1): 2, (2, 1): 1}
    assert t.total == 3


def test_empty_rows_give_empty_table():
    t = ContingencyTable.from_raw([], (5, 5))
    assert t.total == 0
    with pytest.raises(EmptyTable):
        t.frequency((1, 1))


def test_out_of_range_and_ragged():
    with pytest.raises(OutOfRangeCategory):
        ContingencyTable.from_raw([(1, 3)], (2, 2))
    with pytest.raises(OutOfRangeCategory):
        ContingencyTable.from_raw([(0, 1)], (2, 2))
    with pytest.raises(RaggedRow):
        ContingencyTable.from_raw([(1, 1), (1,)], (2, 2))


def test_frequency_examples():
    t = ContingencyTable.from_raw([(1, 1), (1, 1), (2, 1), (1, 2)], (2, 2))
    assert t.frequency((1, 1)) == 0.5
    assert t.frequency((2, 2)) == 0.0


def test_envious_fixture_cell():
    counts = envious_counts()
    rows = [(x + 1, y + 1) for x in range(5) for y in range(5) for _ in range(counts[x, y])]
    t = ContingencyTable.from_raw(rows, (5, 5))
    assert t.total == 725
    assert t.frequency((4, 2)) == pytest.approx(0.189, abs=5e-4)
    assert np.abs(t.frequencies().reshape(5, 5) - ENVIOUS_FREQS).max() < 1e-3


def test_simulated_center_cell_matches_quadrature():
    # oracle: double integral of the bivariate normal density over the centre rectangle
    rho = 0.5
    dens = multivariate_normal(mean=[0, 0], cov=[[1, rho], [rho, 1]]).pdf
    p33, _ = integrate.dblquad(lambda y, x: dens([x, y]), -0.5, 0.5, -0.5, 0.5, epsabs=1e-12)
    assert p33 == pytest.approx(0.165085, abs=1e-6)  # frozen from the quadrature above
    rng = np.random.default_rng(7)
    z = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=1000)
    codes = np.searchsorted([-1.5, -0.5, 0.5, 1.5], z, side="right") + 1
    t = ContingencyTable.from_codes(codes, (5, 5))
    se = math.sqrt(p33 * (1 - p33) / 1000)
    assert abs(t.frequency((3, 3)) - p33) < 3 * se


rows_strategy = st.lists(
    st.tuples(st.integers(1, 3), st.integers(1, 4), st.integers(1, 2)), min_size=1, max_size=60
)


@given(rows_strategy)
def test_frequencies_sum_to_one_exactly(rows):
    t = ContingencyTable.from_raw(rows, (3, 4, 2))
    total = sum(Fraction(int(n), t.total) for n in t.counts.ravel())
    assert total == 1


@given(rows_strategy, st.randoms(use_true_random=False))
def test_from_raw_permutation_invariant(rows, rnd):
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    a = ContingencyTable.from_raw(rows, (3, 4, 2))
    b = ContingencyTable.from_raw(shuffled, (3, 4, 2))
    assert np.array_equal(a.counts, b.counts)


@settings(max_examples=50)
@given(rows_strategy)
def test_long_csv_round_trip(rows):
    t = ContingencyTable.from_raw(rows, (3, 4, 2))
    back = ContingencyTable.read_long_csv(t.to_long_csv())
    assert back.levels == t.levels
    assert np.array_equal(back.counts, t.counts)


def test_long_csv_errors():
    with pytest.raises(InputError):
        ContingencyTable.read_long_csv("")
    with pytest.raises(InputError):
        ContingencyTable.read_long_csv("c1,c3,count\n1,1,2\n")
    with pytest.raises(MissingValue):
        ContingencyTable.read_long_csv("c1,c2,count\n1,,2\n")
    with pytest.raises(RaggedRow):
        ContingencyTable.read_long_csv("c1,c2,count\n1,2\n")


def test_raw_csv_parsing_and_errors():
    codes, names = read_raw_csv("a,b,c\n1,2,3\n2,2,1\n", ["c", "a"])
    assert names == ["c", "a"]
    assert codes.tolist() == [[3, 1], [1, 2]]
    with pytest.raises(InputError, match="'z'"):
        read_raw_csv("a,b\n1,2\n", ["z"])
    with pytest.raises(MissingValue):
        read_raw_csv("a,b\n1,\n", None)
    with pytest.raises(InputError):
        read_raw_csv("a,b\n1,x\n", None)


def test_table_is_immutable():
    t = ContingencyTable.from_raw([(1, 1)], (2, 2))
    with pytest.raises(ValueError):
        t.counts[0, 0] = 5
