"""Hot numeric kernels.

The inversion counter below is the inner loop of the tau-b rank
correlation and the reason it runs in O(n log n) instead of O(n^2).
By default it is JIT-compiled with numba; setting the environment
variable ``CHAINLENS_PURE_NUMPY=1`` (or running without numba
installed) selects a vectorized pure-numpy fallback instead.
``benchmarks/bench_correlation.py`` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("CHAINLENS_PURE_NUMPY", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

if _FORCE_NUMPY:
    njit = None
else:
    try:
        from numba import njit
    except ImportError:
        njit = None

JIT_ENABLED = njit is not None


def _count_inversions_merge(values):
    # Bottom-up merge sort over a scratch buffer, counting pairs i < j
    # with values[i] > values[j]. Equal values are not inversions, so
    # the left run wins ties.
    n = values.shape[0]
    arr = values.copy()
    buf = np.empty(n, dtype=values.dtype)
    inversions = 0
    width = 1
    while width < n:
        for start in range(0, n, 2 * width):
            mid = min(start + width, n)
            end = min(start + 2 * width, n)
            i = start
            j = mid
            k = start
            while i < mid and j < end:
                if arr[j] < arr[i]:
                    buf[k] = arr[j]
                    j += 1
                    # arr[i:mid] are all > arr[j], each forms an inversion
                    inversions += mid - i
                else:
                    buf[k] = arr[i]
                    i += 1
                k += 1
            while i < mid:
                buf[k] = arr[i]
                i += 1
                k += 1
            while j < end:
                buf[k] = arr[j]
                j += 1
                k += 1
        arr, buf = buf, arr
        width *= 2
    return inversions


if JIT_ENABLED:
    count_inversions_jit = njit(cache=True)(_count_inversions_merge)
else:
    count_inversions_jit = None


def count_inversions_numpy(values: np.ndarray) -> int:
    """Inversion count of ``values`` without numba.

    Runs the merge-sort recurrence one scale at a time: at scale ``w``
    every window of ``2w`` original positions contributes the number of
    (left-half, right-half) pairs that are out of order, and the sum
    over scales is the total inversion count. Each scale is a single
    integer sort plus O(n) bookkeeping.
    """
    n = values.shape[0]
    if n < 2:
        return 0
    # dense value ranks keep the composite sort key inside int64
    _, ranks = np.unique(values, return_inverse=True)
    ranks = ranks.astype(np.int64)
    stride = np.int64(2 * n + 2)  # even, and > 2*max_rank + 1
    idx = np.arange(n, dtype=np.int64)
    total = 0
    width = 1
    while width < n:
        block = idx // (2 * width)
        side = (idx // width) & 1  # 0 = left half, 1 = right half
        # sort by (block, value, side); side last so that on equal
        # values the left half drains first and ties are not counted
        key = block * stride + 2 * ranks + side
        key.sort()
        sorted_side = key & 1
        sorted_block = key // stride
        n_blocks = int(block[-1]) + 1
        left_sizes = np.bincount(block[side == 0], minlength=n_blocks)
        left_before_block = np.concatenate(
            ([0], np.cumsum(left_sizes)[:-1])
        )
        left_running = np.cumsum(sorted_side == 0)
        right_pos = np.flatnonzero(sorted_side == 1)
        right_block = sorted_block[right_pos]
        left_seen = left_running[right_pos] - left_before_block[right_block]
        total += int(np.sum(left_sizes[right_block] - left_seen))
        width *= 2
    return total


def count_inversions(values: np.ndarray) -> int:
    """Number of pairs i < j with values[i] > values[j]."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.shape[0] < 2:
        return 0
    if count_inversions_jit is not None:
        return int(count_inversions_jit(values))
    return count_inversions_numpy(values)
