"""Minimum-cost one-to-one assignment for matching predictions to ground truth.

Rectangular cost matrices are padded to square with unit cost, solved, and the
padded pairs discarded, so an unmatched row behaves like a match at zero
similarity. Ties between equally cheap assignments are broken toward the
lowest (row, column) pairs in lexicographic order, which keeps results stable
across runs and platforms.
"""

from __future__ import annotations

import math
from typing import Sequence

PAD_COST = 1.0
TIE_TOLERANCE = 1e-9

_INF = float("inf")


def _validate(cost: Sequence[Sequence[float]]) -> tuple[int, int]:
    n = len(cost)
    if n == 0:
        return 0, 0
    m = len(cost[0])
    for i, row in enumerate(cost):
        if len(row) != m:
            raise ValueError(f"ragged cost matrix: row {i} has {len(row)} entries, expected {m}")
        for j, value in enumerate(row):
            if not math.isfinite(value):
                raise ValueError(f"non-finite cost at ({i}, {j}): {value!r}")
    return n, m


def _pad_square(cost: Sequence[Sequence[float]], n: int, m: int) -> list[list[float]]:
    size = max(n, m)
    padded = [[PAD_COST] * size for _ in range(size)]
    for i in range(n):
        row = padded[i]
        source = cost[i]
        for j in range(m):
            row[j] = float(source[j])
    return padded


def _solve_square(a: list[list[float]], columns: Sequence[int] | None = None) -> tuple[float, list[int]]:
    """Optimal assignment on a square matrix via shortest augmenting paths.

    `columns` restricts the matrix to a subset of its columns (used by the
    tie-break search); defaults to all of them. Returns (total cost, column
    index per row). O(n^3).
    """
    n = len(a)
    cols = list(range(n)) if columns is None else list(columns)
    if n == 0:
        return 0.0, []
    if len(cols) != n:
        raise ValueError("column subset must match row count")

    # Potentials u (rows) and v (columns), both 1-indexed; p[j] is the row
    # matched to column slot j, 0 meaning free. Column slot j corresponds to
    # the real column cols[j - 1].
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [_INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = _INF
            j1 = 0
            row = a[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[cols[j - 1]] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    row_to_col = [0] * n
    total = 0.0
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = cols[j - 1]
    for i, j in enumerate(row_to_col):
        total += a[i][j]
    return total, row_to_col


def _lex_smallest(a: list[list[float]], optimum: float, first: list[int]) -> list[int]:
    """Refine an optimal assignment to the lexicographically smallest one.

    Fixes rows in order; each row takes the smallest column that still allows
    the remaining rows to reach the global optimum. The incumbent solution
    bounds the search, so when the optimum is unique no extra solves happen.
    """
    n = len(a)
    incumbent = list(first)
    free = sorted(range(n))
    prefix_cost = 0.0
    for i in range(n):
        current = incumbent[i]
        for c in free:
            if c >= current:
                break
            remaining = [col for col in free if col != c]
            sub_cost, sub_cols = _solve_square_rows(a, i + 1, remaining)
            if prefix_cost + a[i][c] + sub_cost <= optimum + TIE_TOLERANCE:
                incumbent[i] = c
                incumbent[i + 1:] = sub_cols
                current = c
                break
        prefix_cost += a[i][current]
        free.remove(current)
    return incumbent


def _solve_square_rows(a: list[list[float]], row_start: int, columns: list[int]) -> tuple[float, list[int]]:
    """Assignment for rows row_start.. over the given columns."""
    sub = [a[i] for i in range(row_start, len(a))]
    if not sub:
        return 0.0, []
    return _solve_square(sub, columns)


def hungarian_match(cost: Sequence[Sequence[float]]) -> list[tuple[int, int]]:
    """Match rows to columns minimizing total cost.

    Returns min(n, m) (row, column) pairs sorted by row. Among all
    minimum-cost assignments the lexicographically smallest sequence of pairs
    is returned. Raises ValueError on ragged or non-finite input.
    """
    n, m = _validate(cost)
    if n == 0 or m == 0:
        return []
    padded = _pad_square(cost, n, m)
    total, row_to_col = _solve_square(padded)
    row_to_col = _lex_smallest(padded, total, row_to_col)
    return [(i, j) for i, j in enumerate(row_to_col) if i < n and j < m]


def assignment_cost(cost: Sequence[Sequence[float]], pairs: Sequence[tuple[int, int]]) -> float:
    """Total cost of an explicit pairing, for checks and reporting."""
    return sum(cost[i][j] for i, j in pairs)
