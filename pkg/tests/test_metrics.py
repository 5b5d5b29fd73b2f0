import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symforecast.metrics import SimilarityReport, dtw, euclidean, report, smape


def brute_dtw(a, b):
    """Minimum over every monotone alignment path, enumerated recursively."""
    n, m = len(a), len(b)
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        acc += (a[i] - b[j]) ** 2
        if i == n - 1 and j == m - 1:
            best = min(best, acc)
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return math.sqrt(best)


def small_sequences(max_len):
    for n in range(1, max_len + 1):
        yield from itertools.product((0, 1, 2), repeat=n)


def test_dtw_matches_brute_force_on_short_sequences():
    seqs = list(small_sequences(3))
    for a in seqs:
        for b in seqs:
            assert abs(dtw(a, b) - brute_dtw(a, b)) <= 1e-12


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6),
       st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_dtw_matches_brute_force_on_random_values(a, b):
    assert dtw(a, b) == pytest.approx(brute_dtw(a, b), abs=1e-9)


def test_dtw_examples():
    assert dtw([0, 1, 2], [0, 1, 2]) == 0.0
    assert dtw([0, 1, 2], [0, 2]) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        dtw([], [1.0])


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.floats(-5, 5), min_size=len(a), max_size=len(a)))))
def test_dtw_bounded_by_euclidean_and_symmetric(pair):
    a, b = pair
    assert dtw(a, b) <= euclidean(a, b) + 1e-12
    assert dtw(a, b) == pytest.approx(dtw(b, a), abs=1e-12)


def test_euclidean_examples():
    assert euclidean([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert euclidean([0, 0], [3, 4]) == 5.0
    with pytest.raises(ValueError):
        euclidean([1.0], [1.0, 2.0])


def test_smape_examples():
    assert smape([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert smape([1.0], [-1.0]) == 200.0
    assert smape([3.0], [1.0]) == 100.0
    assert smape([0.0, 3.0], [0.0, 1.0]) == 50.0
    with pytest.raises(ValueError):
        smape([1.0], [1.0, 2.0])


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.floats(-100, 100), min_size=len(a), max_size=len(a)))))
def test_smape_bounded_and_symmetric(pair):
    f, a = pair
    s = smape(f, a)
    assert 0.0 <= s <= 200.0
    assert s == pytest.approx(smape(a, f), abs=1e-12)
    assert euclidean(f, a) >= 0.0


def test_report_identical_inputs_is_zero():
    r = report([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
    assert r == SimilarityReport(0.0, 0.0, 0.0, 0.0, 0.0)


def test_report_on_shifted_trend():
    t = np.arange(10.0)
    r = report(t + 1.0, t)
    assert r.euclidean > 0.0
    assert r.euclidean_diff == 0.0
    assert r.dtw_diff == 0.0


def test_report_fields_match_standalone(rng):
    f, a = rng.normal(size=12), rng.normal(size=12)
    r = report(f, a)
    assert r.euclidean == euclidean(f, a)
    assert r.dtw == dtw(f, a)
    assert r.euclidean_diff == euclidean(np.diff(f), np.diff(a))
    assert r.dtw_diff == dtw(np.diff(f), np.diff(a))
    assert r.smape == smape(f, a)
    assert list(r.as_dict()) == ["euclidean", "dtw", "euclidean_diff", "dtw_diff", "smape"]
    with pytest.raises(ValueError):
        report([1.0], [1.0])
