"""Per-trajectory random streams for numba kernels.

A stream is identified by ``(master_seed, stream_index)`` plus a domain tag
that separates the different kinds of paths drawn for the same trajectory
index.  The identity is mapped to a 256-bit generator state by one block of
the Philox4x64-10 counter-based bijection (key = ``(master_seed,
stream_index)``, counter = ``(1, 0, domain, 0)``; this block is bit-identical
to the first four outputs of :class:`numpy.random.Philox` with the same key and
counter ``(0, 0, domain, 0)``).  Draws inside a trajectory come from
xoshiro256** seeded with that state.

Nothing depends on the order in which trajectories are processed, so any
split of the index range over workers gives the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .exceptions import InvalidArgumentError

# domain tags
DOMAIN_WIENER = 1
DOMAIN_OU = 2
DOMAIN_POINT_PROCESS = 3
DOMAIN_SEQUENTIAL = 4

_MASK64 = (1 << 64) - 1

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_U1 = np.uint64(1)
_U0 = np.uint64(0)
_INV53 = 1.0 / 9007199254740992.0


@dataclass(frozen=True)
class RngStream:
    """Identifies one per-trajectory substream."""

    master_seed: int
    stream_index: int

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MASK64:
            raise InvalidArgumentError("master_seed must fit in 64 unsigned bits")
        if not 0 <= self.stream_index <= _MASK64:
            raise InvalidArgumentError("stream_index must fit in 64 unsigned bits")

    def state(self, domain: int) -> np.ndarray:
        return stream_state(np.uint64(self.master_seed), np.uint64(self.stream_index), np.uint64(domain))


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> np.uint64(32)
    b_lo = b & _LO32
    b_hi = b >> np.uint64(32)
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    mid = (ll >> np.uint64(32)) + (lh & _LO32) + (hl & _LO32)
    hi = a_hi * b_hi + (lh >> np.uint64(32)) + (hl >> np.uint64(32)) + (mid >> np.uint64(32))
    return a * b, hi


@nb.njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x64 bijection of one counter block."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        lo0, hi0 = _mulhilo(_M0, c0)
        lo1, hi1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@nb.njit(cache=True)
def stream_state(master_seed, stream_index, domain):
    """xoshiro256** state for one trajectory."""
    st = np.empty(4, dtype=np.uint64)
    st[0], st[1], st[2], st[3] = philox4x64(_U1, _U0, np.uint64(domain), _U0,
                                            np.uint64(master_seed), np.uint64(stream_index))
    if st[0] == 0 and st[1] == 0 and st[2] == 0 and st[3] == 0:
        st[0] = _W0
    return st


@nb.njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def next_u64(st):
    s0 = st[0]
    s1 = st[1]
    s2 = st[2]
    s3 = st[3]
    out = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    st[0] = s0
    st[1] = s1
    st[2] = s2
    st[3] = s3
    return out


@nb.njit(cache=True)
def next_double(st):
    """Uniform on [0, 1) with 53 random bits."""
    return np.float64(next_u64(st) >> np.uint64(11)) * _INV53


@nb.njit(cache=True)
def next_exponential(st):
    return -np.log1p(-next_double(st))


@nb.njit(cache=True)
def next_normal_pair(st):
    """Two independent N(0, 1) draws (Marsaglia polar method)."""
    while True:
        x = 2.0 * next_double(st) - 1.0
        y = 2.0 * next_double(st) - 1.0
        s = x * x + y * y
        if 0.0 < s < 1.0:
            f = np.sqrt(-2.0 * np.log(s) / s)
            return x * f, y * f


@nb.njit(cache=True)
def fill_raw(st, out):
    for i in range(out.shape[0]):
        out[i] = next_u64(st)


@nb.njit(cache=True)
def fill_normals(st, out):
    n = out.shape[0]
    i = 0
    while i < n:
        z0, z1 = next_normal_pair(st)
        out[i] = z0
        if i + 1 < n:
            out[i + 1] = z1
        i += 2


def raw_u64(stream: RngStream, domain: int, n: int) -> np.ndarray:
    """First ``n`` raw 64-bit outputs of a stream."""
    out = np.empty(n, dtype=np.uint64)
    fill_raw(stream.state(domain), out)
    return out


def standard_normals(stream: RngStream, domain: int, n: int) -> np.ndarray:
    out = np.empty(n, dtype=np.float64)
    fill_normals(stream.state(domain), out)
    return out
