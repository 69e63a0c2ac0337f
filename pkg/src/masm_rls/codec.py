"""Multiple-active spatial modulation (MA-SM) encoder and decoder.

Bit conventions: the first ``I`` bits of a terminal's block are the
big-endian binary representation of the subset index; each following
group of ``S`` bits selects an alphabet entry (list order, no Gray
mapping) for the active antennas in ascending antenna order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["SmCodebook", "build_codebook", "encode", "decode", "ssk_alphabet"]


def ssk_alphabet(power: float = 1.0) -> tuple:
    """Singleton alphabet ``{sqrt(P)}`` of space shift keying."""
    return (complex(math.sqrt(power)),)


def _bits_to_int(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _int_to_bits(value: int, width: int) -> list:
    return [(value >> (width - 1 - j)) & 1 for j in range(width)]


@dataclass(frozen=True)
class SmCodebook:
    """Antenna-subset codebook of one terminal.

    ``subsets`` holds zero-based antenna indices; subset ``i`` is the one
    selected by modulation index ``i``.
    """

    m_u: int
    l_u: int
    index_bits: int
    subsets: tuple
    alphabet: tuple
    policy: str = "lexicographic"
    seed: int | None = None

    def __post_init__(self):
        if len(self.subsets) != 2 ** self.index_bits:
            raise ValueError("codebook must hold 2**I subsets")
        if len(set(self.subsets)) != len(self.subsets):
            raise ValueError("subsets must be distinct")
        for s in self.subsets:
            if len(s) != self.l_u or not all(0 <= a < self.m_u for a in s):
                raise ValueError(f"invalid subset {s}")
        if any(a == 0 for a in self.alphabet):
            raise ValueError("zero is reserved for inactive antennas")

    @property
    def symbol_bits(self) -> int:
        return int(math.log2(len(self.alphabet)))

    @property
    def bits_per_block(self) -> int:
        return self.index_bits + self.l_u * self.symbol_bits

    @property
    def activity_factor(self) -> float:
        return self.l_u / self.m_u

    @property
    def n_blocks(self) -> int:
        """Number of distinct transmit blocks a terminal can send."""
        return 2 ** self.bits_per_block

    def all_blocks(self) -> np.ndarray:
        """Every valid transmit block, row ``r`` encoding the bit string ``r``."""
        out = np.empty((self.n_blocks, self.m_u), dtype=complex)
        for r in range(self.n_blocks):
            out[r] = encode(self, _int_to_bits(r, self.bits_per_block))
        return out

    def to_dict(self) -> dict:
        return {
            "m_u": self.m_u,
            "l_u": self.l_u,
            "alphabet": [[float(np.real(a)), float(np.imag(a))] for a in self.alphabet],
            "subset_policy": self.policy,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SmCodebook":
        alphabet = [complex(re, im) for re, im in d["alphabet"]]
        policy = d.get("subset_policy", "lexicographic")
        return build_codebook(d["m_u"], d["l_u"], alphabet, policy, seed=d.get("seed"))


def _colex_subsets(m_u: int, l_u: int):
    # colexicographic order == combinadic rank order
    combos = itertools.combinations(range(m_u), l_u)
    return sorted(combos, key=lambda c: tuple(reversed(c)))


def build_codebook(m_u: int, l_u: int, alphabet: Sequence[complex],
                   subset_policy: str = "lexicographic",
                   seed: int | None = None) -> SmCodebook:
    """Build the per-terminal codebook.

    Parameters
    ----------
    m_u, l_u : int
        Antennas per terminal and number of active antennas.
    alphabet : sequence of complex
        Symbol alphabet, size a power of two (size one gives SSK).
    subset_policy : {"lexicographic", "seeded-random"}
        ``lexicographic`` keeps the first ``2**I`` subsets in combinadic
        order; ``seeded-random`` draws them uniformly without replacement.
    seed : int, optional
        Required for ``seeded-random``.
    """
    if not 1 <= l_u <= m_u:
        raise ValueError(f"need 1 <= l_u <= m_u, got l_u={l_u}, m_u={m_u}")
    alphabet = tuple(complex(a) for a in alphabet)
    n_sym = len(alphabet)
    if n_sym == 0 or n_sym & (n_sym - 1):
        raise ValueError("alphabet size must be a power of two")
    index_bits = int(math.floor(math.log2(math.comb(m_u, l_u))))
    # floor(log2) via floats can be off by one for huge binomials
    while 2 ** (index_bits + 1) <= math.comb(m_u, l_u):
        index_bits += 1
    while 2 ** index_bits > math.comb(m_u, l_u):
        index_bits -= 1
    pool = _colex_subsets(m_u, l_u)
    if subset_policy == "lexicographic":
        subsets = pool[: 2 ** index_bits]
    elif subset_policy == "seeded-random":
        if seed is None:
            raise ValueError("seeded-random subset policy needs a seed")
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(pool), size=2 ** index_bits, replace=False)
        subsets = [pool[i] for i in pick]
    else:
        raise ValueError(f"unknown subset policy {subset_policy!r}")
    return SmCodebook(m_u, l_u, index_bits, tuple(tuple(s) for s in subsets),
                      alphabet, subset_policy, seed)


def encode(codebook: SmCodebook, bits) -> np.ndarray:
    """Map ``I + Lu*S`` bits to a length-``Mu`` transmit block."""
    bits = [int(b) for b in bits]
    if len(bits) != codebook.bits_per_block:
        raise ValueError(f"expected {codebook.bits_per_block} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("bits must be 0 or 1")
    i = codebook.index_bits
    subset = codebook.subsets[_bits_to_int(bits[:i])]
    s = codebook.symbol_bits
    block = np.zeros(codebook.m_u, dtype=complex)
    for j, antenna in enumerate(subset):
        sym_bits = bits[i + j * s: i + (j + 1) * s]
        block[antenna] = codebook.alphabet[_bits_to_int(sym_bits)]
    return block


def decode(codebook: SmCodebook, block) -> tuple[list, bool]:
    """Invert :func:`encode`.

    Returns ``(bits, valid)``. When the support of ``block`` is not a
    codebook subset, ``valid`` is False and the index bits come from the
    subset nearest in Hamming distance (lowest index on ties); symbol bits
    are then read off that subset's antennas, zeros mapping to symbol 0.
    """
    block = np.asarray(block).ravel()
    if block.size != codebook.m_u:
        raise ValueError("block length does not match m_u")
    support = frozenset(int(a) for a in np.flatnonzero(block != 0))
    best, best_dist = 0, None
    for idx, subset in enumerate(codebook.subsets):
        dist = len(support.symmetric_difference(subset))
        if best_dist is None or dist < best_dist:
            best, best_dist = idx, dist
    valid = best_dist == 0
    bits = _int_to_bits(best, codebook.index_bits)
    alphabet = np.asarray(codebook.alphabet)
    for antenna in codebook.subsets[best]:
        value = block[antenna]
        sym = int(np.argmin(np.abs(alphabet - value))) if value != 0 else 0
        bits += _int_to_bits(sym, codebook.symbol_bits)
    return bits, valid
