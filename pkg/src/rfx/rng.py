"""Seedable PCG32 random streams.

Every stochastic step in the package (bootstrap draws, per-node feature
subsets, importance permutations, range-finder test matrices, power-iteration
starts) draws from PCG32 streams created here, so results are reproducible
bit-for-bit from a single integer seed regardless of platform, numpy version,
or worker count.

A stream is a 2-element uint64 array ``(state, inc)``.  The free functions are
numba-compiled and callable from other jitted kernels; :class:`Pcg32` wraps
them for ordinary Python use.

Stream selectors (the PCG "sequence" constant) namespace the independent
consumers; the seed carries the per-entity index, e.g. per-tree growth uses
``stream(iseed + tree_id, SEQ_TREE)``.
"""

import numpy as np
from numba import njit

_MULT = np.uint64(6364136223846793005)
_MASK32 = np.uint64(0xFFFFFFFF)
_ONE = np.uint64(1)
_U18 = np.uint64(18)
_U27 = np.uint64(27)
_U32 = np.uint64(32)
_U31 = np.uint64(31)
_U59 = np.uint64(59)
_TWO32 = np.uint64(0x100000000)

# Stream selectors, one per independent consumer of randomness.
SEQ_TREE = 1        # bootstrap draws, seed = iseed + tree_id
SEQ_PERMUTE = 2     # importance permutations, seed = iseed + B + b*p + j
SEQ_FACTOR = 3      # randomized range finder test matrix
SEQ_PMAX = 4        # off-diagonal proximity sampling for pmax
SEQ_POWER = 5       # power-iteration start vectors, seed = base + eigenpair index
SEQ_SAMPLE = 6      # viz-export subsampling
SEQ_GROW = 7        # per-node feature subsets, seed = iseed + tree_id


@njit(cache=True)
def pcg32_next(s):
    """Advance the stream; return the next 32-bit output as uint64."""
    old = s[0]
    s[0] = old * _MULT + s[1]
    xorshifted = (((old >> _U18) ^ old) >> _U27) & _MASK32
    rot = (old >> _U59) & _U31
    return ((xorshifted >> rot) | (xorshifted << ((_U32 - rot) & _U31))) & _MASK32


@njit(cache=True)
def make_stream(seed, seq):
    """Initialise a PCG32 stream from ``(seed, seq)``; returns uint64[2]."""
    s = np.zeros(2, dtype=np.uint64)
    s[1] = (np.uint64(seq) << _ONE) | _ONE
    pcg32_next(s)
    s[0] = s[0] + np.uint64(seed)
    pcg32_next(s)
    return s


@njit(cache=True)
def pcg32_bounded(s, bound):
    """Unbiased draw in [0, bound) via rejection (bound as uint64, >= 1)."""
    b = np.uint64(bound)
    threshold = (_TWO32 - b) % b
    while True:
        r = pcg32_next(s)
        if r >= threshold:
            return r % b


@njit(cache=True)
def pcg32_uniform(s):
    """Draw in [0, 1) with 32-bit resolution."""
    return float(pcg32_next(s)) / 4294967296.0


@njit(cache=True)
def shuffle_inplace(s, arr):
    """Fisher-Yates shuffle of a 1-D array."""
    n = arr.shape[0]
    for i in range(n - 1, 0, -1):
        j = int(pcg32_bounded(s, i + 1))
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


@njit(cache=True)
def partial_shuffle(s, arr, k):
    """Partial Fisher-Yates: after the call arr[:k] is a uniform k-subset
    of the original entries, without replacement."""
    n = arr.shape[0]
    for i in range(k):
        j = i + int(pcg32_bounded(s, n - i))
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


@njit(cache=True)
def fill_normals(s, out):
    """Fill a 1-D array with standard normals (Box-Muller)."""
    n = out.shape[0]
    i = 0
    while i < n:
        u1 = (float(pcg32_next(s)) + 1.0) / 4294967296.0
        u2 = float(pcg32_next(s)) / 4294967296.0
        r = np.sqrt(-2.0 * np.log(u1))
        out[i] = r * np.cos(2.0 * np.pi * u2)
        i += 1
        if i < n:
            out[i] = r * np.sin(2.0 * np.pi * u2)
            i += 1


class Pcg32:
    """Python-side handle on a PCG32 stream."""

    def __init__(self, seed: int, seq: int = 0):
        self._s = make_stream(seed, seq)

    def next_u32(self) -> int:
        return int(pcg32_next(self._s))

    def bounded(self, bound: int) -> int:
        return int(pcg32_bounded(self._s, bound))

    def uniform(self) -> float:
        return pcg32_uniform(self._s)

    def normals(self, shape) -> np.ndarray:
        out = np.empty(int(np.prod(shape)), dtype=np.float64)
        fill_normals(self._s, out)
        return out.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        arr = np.arange(n, dtype=np.int64)
        shuffle_inplace(self._s, arr)
        return arr

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        arr = np.arange(n, dtype=np.int64)
        partial_shuffle(self._s, arr, k)
        return arr[:k].copy()

    @property
    def state(self):
        return self._s.copy()
