import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from masm_rls.codec import build_codebook, decode, encode, ssk_alphabet


def combinadic_rank(subset):
    return sum(math.comb(c, i + 1) for i, c in enumerate(sorted(subset)))


def test_reference_ssk_codebook():
    cb = build_codebook(8, 1, ssk_alphabet(1.0))
    assert cb.index_bits == 3
    assert cb.subsets == tuple((a,) for a in range(8))
    assert cb.bits_per_block == 3


def test_full_activation_has_no_index_bits():
    cb = build_codebook(2, 2, [1.0])
    assert cb.index_bits == 0 and cb.subsets == ((0, 1),)


def test_lexicographic_matches_combinadic_enumeration():
    cb = build_codebook(4, 2, [1.0, -1.0])
    assert cb.index_bits == 2
    pairs = sorted(itertools.combinations(range(4), 2), key=combinadic_rank)
    assert list(cb.subsets) == pairs[:4]


def test_seeded_random_is_reproducible():
    a = build_codebook(8, 2, [1.0], "seeded-random", seed=5)
    b = build_codebook(8, 2, [1.0], "seeded-random", seed=5)
    assert a.subsets == b.subsets and len(set(a.subsets)) == 16
    with pytest.raises(ValueError):
        build_codebook(8, 2, [1.0], "seeded-random")


@pytest.mark.parametrize("kw", [dict(m_u=2, l_u=3, alphabet=[1.0]),
                                dict(m_u=4, l_u=1, alphabet=[1.0, 2.0, 3.0]),
                                dict(m_u=4, l_u=1, alphabet=[0.0])])
def test_build_codebook_rejects(kw):
    with pytest.raises(ValueError):
        build_codebook(**kw)


def test_encode_examples():
    cb = build_codebook(8, 1, [1.0])
    block = encode(cb, [1, 0, 1])
    assert np.flatnonzero(block).tolist() == [5] and block[5] == 1
    assert np.flatnonzero(encode(cb, [0, 0, 0])).tolist() == [0]
    with pytest.raises(ValueError):
        encode(cb, [1, 0])


def test_decode_examples():
    cb = build_codebook(8, 1, [1.0])
    block = np.zeros(8)
    block[5] = 1
    assert decode(cb, block) == ([1, 0, 1], True)
    bits, valid = decode(cb, np.zeros(8))
    assert not valid and bits == [0, 0, 0]
    block[2] = 1
    assert decode(cb, block)[1] is False


def test_symbols_follow_ascending_antennas():
    cb = build_codebook(4, 2, [1.0, -1.0])
    # index 3 -> subset (0, 3) in colex order; symbol bits 1, 0
    block = encode(cb, [1, 1, 1, 0])
    assert block.tolist() == [-1, 0, 0, 1]


@pytest.mark.parametrize("m_u,l_u,alphabet", [
    (m, l, a) for m in range(1, 9) for l in range(1, min(m, 2) + 1)
    for a in ([1.0], [1.0, -1.0])
])
def test_exhaustive_roundtrip_and_injective(m_u, l_u, alphabet):
    cb = build_codebook(m_u, l_u, alphabet)
    seen = set()
    for bits in itertools.product([0, 1], repeat=cb.bits_per_block):
        block = encode(cb, bits)
        assert np.count_nonzero(block) == l_u
        assert decode(cb, block) == (list(bits), True)
        seen.add(tuple(block))
    assert len(seen) == cb.n_blocks


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=10, max_size=10))
def test_roundtrip_random_bits(bits):
    cb = build_codebook(12, 3, [1.0, -1.0])  # I = 7, S = 1
    assert decode(cb, encode(cb, bits)) == (bits, True)


def test_activity_factor_of_full_vector(rng):
    cb = build_codebook(8, 2, [1.0, -1.0])
    x = np.concatenate([encode(cb, rng.integers(0, 2, cb.bits_per_block)) for _ in range(20)])
    assert np.count_nonzero(x) / x.size == cb.activity_factor == 0.25


def test_codebook_dict_roundtrip():
    cb = build_codebook(6, 2, [1.0, -1.0], "seeded-random", seed=3)
    assert type(cb).from_dict(cb.to_dict()) == cb
