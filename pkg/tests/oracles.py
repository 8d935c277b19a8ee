"""Independent brute-force oracles used across the test suite.

These deliberately avoid the library's own code paths: different
algorithms, different libraries, so agreement is meaningful.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def levenshtein_oracle(a: str, b: str) -> int:
    """Plain recursive edit distance with memoization."""

    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
            d(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return d(len(a), len(b))


def ols_oracle(values: list[float]) -> tuple[float, float, float]:
    """Slope, intercept and next-point forecast via numpy least squares."""
    n = len(values)
    xs = np.arange(1, n + 1, dtype=float)
    coeffs = np.polyfit(xs, np.asarray(values, dtype=float), 1)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    return slope, intercept, intercept + slope * (n + 1)


def zscores_oracle(values: list[float]) -> list[float]:
    arr = np.asarray(values, dtype=float)
    std = float(arr.std())  # population std
    if std == 0:
        return [0.0] * len(values)
    mean = float(arr.mean())
    return [(v - mean) / std for v in values]


def pearson_oracle(a: list[float], b: list[float]) -> float:
    return float(np.corrcoef(np.asarray(a, float), np.asarray(b, float))[0, 1])


def longest_common_run(a_words: list[str], b_words: list[str]) -> int:
    """O(n*m) longest common contiguous word run."""
    n, m = len(a_words), len(b_words)
    best = 0
    prev = [0] * (m + 1)
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        for j in range(1, m + 1):
            if a_words[i - 1] == b_words[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
        prev = cur
    return best


def s3_oracle(prompt_words: list[str], response_words: list[str], delta: int) -> int:
    return 0 if longest_common_run(prompt_words, response_words) >= delta else 1


def confidence_oracle(flags: tuple[int, ...]) -> str:
    total = sum(flags)
    if total >= 5:
        return "High"
    if 3 <= total <= 4:
        return "Medium"
    return "Low"
