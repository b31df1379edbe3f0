"""Inner loops, in two interchangeable flavours.

Every kernel exists as a vectorised numpy function and as an explicit loop
compiled with ``numba.njit``.  The numba flavour is used when numba imports
and ``JUMPSCOPE_DISABLE_NUMBA`` is unset (or ``0``/``false``); otherwise the
numpy flavour is active.  Both are always importable through ``NUMPY`` and
``NUMBA`` so tests and ``benchmarks/bench_kernels.py`` can compare them.

Index conventions: ``f`` is the array of central differences for nodes
j = 1..J_max stored at positions 0..J_max-1.  Pair ``k`` is (f[k], f[k+1]).
"""

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

PAIR_NONE = 0
PAIR_KINK_WIDE = 1  # second difference above the C^2 ceiling
PAIR_KINK_NARROW = 2  # sign change with trusted signs, above critical level

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_MASK64 = (1 << 64) - 1


def _flag_disabled():
    value = os.environ.get("JUMPSCOPE_DISABLE_NUMBA", "").strip().lower()
    return value not in ("", "0", "false", "no")


# ---------------------------------------------------------------- numpy ----

def _np_central_diff(values, h):
    values = np.asarray(values, dtype=np.float64)
    return (values[2:] - values[:-2]) / (2.0 * h)


def _np_find_runs(flags):
    flags = np.asarray(flags, dtype=bool)
    if flags.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    padded = np.concatenate(([False], flags, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1).astype(np.int64)
    stops = (np.flatnonzero(edges == -1) - 1).astype(np.int64)
    return starts, stops


def _np_classify_pairs(f, usable, kink_thr, crit_thr, sign_floor):
    f = np.asarray(f, dtype=np.float64)
    usable = np.asarray(usable, dtype=bool)
    codes = np.zeros(max(f.size - 1, 0), dtype=np.int8)
    if f.size < 2:
        return codes
    left, right = f[:-1], f[1:]
    ok = usable[:-1] & usable[1:]
    diff = np.abs(right - left)
    wide = ok & (diff > kink_thr)
    narrow = (
        ok
        & ~wide
        & (left * right < 0.0)
        & (np.minimum(np.abs(left), np.abs(right)) > sign_floor)
        & (diff > crit_thr)
    )
    codes[wide] = PAIR_KINK_WIDE
    codes[narrow] = PAIR_KINK_NARROW
    return codes


def _np_sign_segments(f, usable, sign_floor):
    f = np.asarray(f, dtype=np.float64)
    usable = np.asarray(usable, dtype=bool)
    trusted = np.flatnonzero(usable & (np.abs(f) > sign_floor))
    if trusted.size < 2:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    a, b = trusted[:-1], trusted[1:]
    flips = np.sign(f[a]) != np.sign(f[b])
    # every node between a and b must be usable
    blocked = np.concatenate(([0], np.cumsum(~usable)))
    clean = (blocked[b + 1] - blocked[a]) == 0
    keep = flips & clean
    return a[keep].astype(np.int64), b[keep].astype(np.int64)


def _np_splitmix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def _np_hash_uniform(x, seed):
    x = np.ascontiguousarray(x, dtype=np.float64) + 0.0  # fold -0.0 into 0.0
    key = _np_splitmix(np.array([int(seed) & _MASK64], dtype=np.uint64))[0]
    z = _np_splitmix(x.view(np.uint64) ^ key)
    return (z >> _S11).astype(np.float64) * _INV53


NUMPY = SimpleNamespace(
    name="numpy",
    central_diff=_np_central_diff,
    find_runs=_np_find_runs,
    classify_pairs=_np_classify_pairs,
    sign_segments=_np_sign_segments,
    hash_uniform=_np_hash_uniform,
)


# ---------------------------------------------------------------- numba ----

def _lp_central_diff(values, h):
    n = values.shape[0] - 2
    out = np.empty(n, dtype=np.float64)
    scale = 2.0 * h
    for i in range(n):
        out[i] = (values[i + 2] - values[i]) / scale
    return out


def _lp_find_runs(flags):
    n = flags.shape[0]
    starts = np.empty(n, dtype=np.int64)
    stops = np.empty(n, dtype=np.int64)
    count = 0
    i = 0
    while i < n:
        if flags[i]:
            starts[count] = i
            while i + 1 < n and flags[i + 1]:
                i += 1
            stops[count] = i
            count += 1
        i += 1
    return starts[:count], stops[:count]


def _lp_classify_pairs(f, usable, kink_thr, crit_thr, sign_floor):
    n = f.shape[0]
    codes = np.zeros(max(n - 1, 0), dtype=np.int8)
    for k in range(n - 1):
        if not (usable[k] and usable[k + 1]):
            continue
        left = f[k]
        right = f[k + 1]
        diff = abs(right - left)
        if diff > kink_thr:
            codes[k] = 1
        elif (
            left * right < 0.0
            and min(abs(left), abs(right)) > sign_floor
            and diff > crit_thr
        ):
            codes[k] = 2
    return codes


def _lp_sign_segments(f, usable, sign_floor):
    n = f.shape[0]
    seg_a = np.empty(n, dtype=np.int64)
    seg_b = np.empty(n, dtype=np.int64)
    count = 0
    last = -1
    for k in range(n):
        if not usable[k]:
            last = -1
            continue
        if abs(f[k]) > sign_floor:
            if last >= 0 and (f[last] > 0.0) != (f[k] > 0.0):
                seg_a[count] = last
                seg_b[count] = k
                count += 1
            last = k
    return seg_a[:count], seg_b[:count]


def _lp_splitmix(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _lp_hash_uniform_impl(bits, seed):
    key = _nb_splitmix(np.uint64(seed))
    out = np.empty(bits.shape[0], dtype=np.float64)
    for i in range(bits.shape[0]):
        z = _nb_splitmix(bits[i] ^ key)
        out[i] = np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return out


if numba is not None:
    _jit = numba.njit(cache=True, nogil=True)
    _nb_central_diff = _jit(_lp_central_diff)
    _nb_find_runs_impl = _jit(_lp_find_runs)
    _nb_classify_pairs_impl = _jit(_lp_classify_pairs)
    _nb_sign_segments_impl = _jit(_lp_sign_segments)
    _nb_splitmix = _jit(_lp_splitmix)
    _nb_hash_uniform_impl = _jit(_lp_hash_uniform_impl)

    def _nb_central_diff_wrap(values, h):
        return _nb_central_diff(np.ascontiguousarray(values, dtype=np.float64), float(h))

    def _nb_find_runs(flags):
        return _nb_find_runs_impl(np.ascontiguousarray(flags, dtype=np.bool_))

    def _nb_classify_pairs(f, usable, kink_thr, crit_thr, sign_floor):
        return _nb_classify_pairs_impl(
            np.ascontiguousarray(f, dtype=np.float64),
            np.ascontiguousarray(usable, dtype=np.bool_),
            float(kink_thr),
            float(crit_thr),
            float(sign_floor),
        )

    def _nb_sign_segments(f, usable, sign_floor):
        return _nb_sign_segments_impl(
            np.ascontiguousarray(f, dtype=np.float64),
            np.ascontiguousarray(usable, dtype=np.bool_),
            float(sign_floor),
        )

    def _nb_hash_uniform(x, seed):
        x = np.ascontiguousarray(x, dtype=np.float64) + 0.0
        return _nb_hash_uniform_impl(x.view(np.uint64), np.uint64(int(seed) & _MASK64))

    NUMBA = SimpleNamespace(
        name="numba",
        central_diff=_nb_central_diff_wrap,
        find_runs=_nb_find_runs,
        classify_pairs=_nb_classify_pairs,
        sign_segments=_nb_sign_segments,
        hash_uniform=_nb_hash_uniform,
    )
else:  # pragma: no cover
    NUMBA = None

active = NUMPY if (NUMBA is None or _flag_disabled()) else NUMBA
BACKEND = active.name

central_diff = active.central_diff
find_runs = active.find_runs
classify_pairs = active.classify_pairs
sign_segments = active.sign_segments
hash_uniform = active.hash_uniform
