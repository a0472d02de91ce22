import functools
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from prcwm.core import (BINARY, Alphabet, Permutation, Seed, SymbolString, apply_permutation,
                        as_generator, edit_distance, hamming_distance, parse_text, random_permutation,
                        sub_seed)
from prcwm.errors import AlphabetMismatch, LengthMismatch, SymbolOutOfRange


def letters(word):
    return SymbolString(26, [ord(c) - ord("a") for c in word])


def lev_memo(a, b):
    """Plain recursive Levenshtein, memoized; the reference for the DP."""
    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == 0 or j == 0:
            return i + j
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


symbol_lists = st.lists(st.integers(0, 2), max_size=12)


class TestSymbolString:
    def test_rejects_out_of_range(self):
        with pytest.raises(SymbolOutOfRange):
            SymbolString(2, [0, 2])

    def test_immutable(self):
        s = SymbolString.bits("0101")
        with pytest.raises(AttributeError):
            s.symbols = None
        with pytest.raises(ValueError):
            s.symbols[0] = 1

    def test_text_forms(self):
        assert parse_text("0101", 2) == SymbolString(BINARY, [0, 1, 0, 1])
        assert parse_text("0 1 0 1", 2) == parse_text("0101", 2)
        assert parse_text("3 17 0", 20).to_text() == "3 17 0"
        assert len(parse_text("", 5)) == 0
        with pytest.raises(SymbolOutOfRange):
            parse_text("1 x", 4)

    @given(st.lists(st.integers(0, 9)))
    def test_text_roundtrip(self, xs):
        s = SymbolString(10, xs)
        assert parse_text(s.to_text(), 10) == s

    def test_alphabet_bounds(self):
        Alphabet(1)
        Alphabet(1 << 20)
        with pytest.raises(ValueError):
            Alphabet(0)
        with pytest.raises(ValueError):
            Alphabet((1 << 20) + 1)


class TestHamming:
    def test_examples(self):
        assert hamming_distance(SymbolString.bits("0101"), SymbolString.bits("0101")) == 0
        assert hamming_distance(SymbolString.bits("0101"), SymbolString.bits("1101")) == 1
        assert hamming_distance(SymbolString.bits([0] * 8), SymbolString.bits([1] * 8)) == 8

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            hamming_distance(SymbolString.bits("01"), SymbolString.bits("011"))
        with pytest.raises(AlphabetMismatch):
            hamming_distance(SymbolString(2, [0]), SymbolString(3, [0]))

    @given(st.integers(0, 16).flatmap(lambda n: st.tuples(st.lists(st.integers(0, 1), min_size=n, max_size=n),
                                                          st.lists(st.integers(0, 1), min_size=n, max_size=n))))
    def test_equals_xor_weight(self, pair):
        a, b = (SymbolString.bits(x) for x in pair)
        assert hamming_distance(a, b) == int(np.sum(a.symbols ^ b.symbols))


class TestEditDistance:
    def test_examples(self):
        assert edit_distance(letters("abc"), letters("abc")) == 0
        assert edit_distance(letters("abc"), letters("ab")) == 1
        assert edit_distance(letters("kitten"), letters("sitting")) == 3
        assert lev_memo("kitten", "sitting") == 3

    def test_alphabet_mismatch(self):
        with pytest.raises(AlphabetMismatch):
            edit_distance(SymbolString(2, [0]), SymbolString(3, [0]))

    @given(symbol_lists, symbol_lists)
    def test_matches_recursive_oracle(self, a, b):
        assert edit_distance(SymbolString(3, a), SymbolString(3, b)) == lev_memo(tuple(a), tuple(b))

    @given(symbol_lists, symbol_lists, st.integers(0, 6))
    def test_band_reports_capped_distance(self, a, b, k):
        d = lev_memo(tuple(a), tuple(b))
        assert edit_distance(SymbolString(3, a), SymbolString(3, b), max_dist=k) == min(d, k + 1)

    def test_metric_axioms_exhaustive(self):
        strings = [SymbolString.bits(s) for n in range(6) for s in itertools.product((0, 1), repeat=n)]
        rng = np.random.default_rng(0)
        D = {}
        for a in strings:
            for b in strings:
                D[a, b] = edit_distance(a, b)
        for a in strings:
            assert D[a, a] == 0
            for b in strings:
                assert D[a, b] == D[b, a]
                if len(a) == len(b):
                    assert D[a, b] <= hamming_distance(a, b)
        # triangle inequality on a random sample of triples (the full cube is 63^3)
        idx = rng.integers(0, len(strings), size=(20000, 3))
        for i, j, k in idx:
            a, b, c = strings[i], strings[j], strings[k]
            assert D[a, c] <= D[a, b] + D[b, c]

    def test_long_unequal_lengths(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = tuple(rng.integers(0, 3, size=rng.integers(0, 40)))
            b = tuple(rng.integers(0, 3, size=rng.integers(0, 12)))
            assert edit_distance(SymbolString(3, a), SymbolString(3, b)) == lev_memo(a, b)


class TestPermutation:
    def test_size_one_is_identity(self):
        assert random_permutation(1, Seed(9)) == Permutation.identity(1)

    def test_deterministic(self):
        assert random_permutation(50, Seed(4, "x")) == random_permutation(50, Seed(4, "x"))
        assert random_permutation(50, Seed(4, "x")) != random_permutation(50, Seed(4, "y"))

    def test_reversal(self):
        rev = Permutation.from_forward([2, 1, 0])
        assert apply_permutation(rev, SymbolString(3, [0, 1, 2])) == SymbolString(3, [2, 1, 0])

    def test_identity_and_length(self):
        x = SymbolString(5, [4, 0, 3])
        assert apply_permutation(Permutation.identity(3), x) == x
        with pytest.raises(LengthMismatch):
            apply_permutation(Permutation.identity(4), x)

    @given(st.lists(st.integers(0, 7), min_size=1, max_size=30), st.integers(0, 2 ** 32))
    def test_inverse_law(self, xs, seed):
        pi = random_permutation(len(xs), Seed(seed))
        x = SymbolString(8, xs)
        assert apply_permutation(pi.inverted(), apply_permutation(pi, x)) == x
        assert np.array_equal(pi.inverse[pi.forward], np.arange(len(xs)))

    def test_not_a_bijection(self):
        with pytest.raises(ValueError):
            Permutation.from_forward([0, 0, 1])

    def test_uniform_over_s3(self):
        rng = Seed(17, "perm-chi2").generator()
        perms = list(itertools.permutations(range(3)))
        counts = dict.fromkeys(perms, 0)
        for _ in range(60000):
            counts[tuple(random_permutation(3, rng).forward)] += 1
        freq = np.array(list(counts.values())) / 60000
        sigma = np.sqrt((1 / 6) * (5 / 6) / 60000)
        assert np.all(np.abs(freq - 1 / 6) <= 3 * sigma + 1e-12) or stats.chisquare(list(counts.values())).pvalue > 1e-3


class TestSeed:
    def test_streams(self):
        a = Seed(1, "a").generator().integers(0, 1 << 30, 5)
        assert np.array_equal(a, Seed(1, "a").generator().integers(0, 1 << 30, 5))
        assert not np.array_equal(a, Seed(1, "b").generator().integers(0, 1 << 30, 5))
        assert not np.array_equal(a, Seed(2, "a").generator().integers(0, 1 << 30, 5))

    def test_child_labels(self):
        assert Seed(1).child("x", 2) == Seed(1, "x/2")
        assert Seed(1, "r").child("x") == Seed(1, "r/x")
        assert sub_seed(Seed(1, "r"), "k") == Seed(1, "r/k")

    def test_generator_passthrough(self):
        g = np.random.default_rng(0)
        assert as_generator(g) is g
        assert sub_seed(g, "k") is g
        with pytest.raises(TypeError):
            as_generator(3)

    def test_value_range(self):
        with pytest.raises(ValueError):
            Seed(-1)
        with pytest.raises(ValueError):
            Seed(1 << 64)
