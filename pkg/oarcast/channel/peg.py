"""Progressive edge-growth parity-check construction and alist file I/O."""

import logging
import os
import threading
from pathlib import Path
from typing import List, Union

import numpy as np
from scipy import sparse

from ..core.errors import ConfigurationError


logger = logging.getLogger(__name__)


def _grow(table: np.ndarray) -> np.ndarray:
    """Double the column capacity of a -1 padded adjacency table."""
    wider = np.full((table.shape[0], table.shape[1] * 2), -1, dtype=table.dtype)
    wider[:, :table.shape[1]] = table
    return wider


def _bfs_candidates(
    var: int,
    var_checks: np.ndarray,
    check_vars: np.ndarray,
    m: int
) -> np.ndarray:
    """
    Checks farthest from `var` in the current graph.

    Expands the tree rooted at `var` level by level. Returns the checks not
    reached when the reached set stops growing, or the checks first reached
    at the last level when every check becomes reachable.
    """
    reached_c = np.zeros(m, dtype=bool)
    reached_v = np.zeros(var_checks.shape[0], dtype=bool)
    reached_v[var] = True

    frontier = var_checks[var]
    frontier = frontier[frontier >= 0]
    reached_c[frontier] = True

    while True:
        previous = reached_c.copy()

        vs = check_vars[frontier].ravel()
        vs = np.unique(vs[vs >= 0])
        vs = vs[~reached_v[vs]]
        reached_v[vs] = True

        cs = var_checks[vs].ravel()
        cs = np.unique(cs[cs >= 0])
        cs = cs[~reached_c[cs]]

        if cs.size == 0:
            return np.flatnonzero(~reached_c)

        reached_c[cs] = True
        if reached_c.all():
            return np.flatnonzero(~previous)
        frontier = cs


def peg_construct(n: int, m: int, column_degree: int = 3, seed: int = 2024) -> sparse.csr_matrix:
    """
    Build an m x n parity-check matrix with progressive edge growth.

    Each variable node receives `column_degree` edges. The first edge goes to
    a lowest-degree check; later edges go to a lowest-degree check among
    those farthest from the variable in the graph built so far. Ties are
    broken by a generator seeded with `seed`.

    Args:
        n: Code length (variable nodes)
        m: Number of parity checks
        column_degree: Edges per variable node (>= 2)
        seed: Tie-break seed

    Returns:
        H as a CSR matrix of uint8
    """
    if column_degree < 2 or column_degree > m:
        raise ConfigurationError(f"Column degree {column_degree} invalid for {m} checks")

    rng = np.random.default_rng(seed)
    var_checks = np.full((n, column_degree), -1, dtype=np.int64)
    check_vars = np.full((m, max(4, 2 * column_degree * n // m)), -1, dtype=np.int64)
    check_deg = np.zeros(m, dtype=np.int64)

    for j in range(n):
        for k in range(column_degree):
            if k == 0:
                candidates = np.arange(m)
            else:
                candidates = _bfs_candidates(j, var_checks, check_vars, m)
                if candidates.size == 0:
                    # Every check is already adjacent; fall back to any unused one
                    used = var_checks[j, :k]
                    candidates = np.setdiff1d(np.arange(m), used)

            degs = check_deg[candidates]
            lowest = candidates[degs == degs.min()]
            c = int(lowest[rng.integers(lowest.size)]) if lowest.size > 1 else int(lowest[0])

            var_checks[j, k] = c
            if check_deg[c] == check_vars.shape[1]:
                check_vars = _grow(check_vars)
            check_vars[c, check_deg[c]] = j
            check_deg[c] += 1

    rows = var_checks.T.ravel()
    cols = np.tile(np.arange(n), column_degree)
    H = sparse.csr_matrix(
        (np.ones(rows.size, dtype=np.uint8), (rows, cols)), shape=(m, n)
    )
    logger.debug(
        f"PEG {m}x{n}: column degree {column_degree}, "
        f"check degrees {check_deg.min()}..{check_deg.max()}"
    )
    return H


def write_alist(H: sparse.spmatrix, path: Union[str, Path]):
    """Write a parity-check matrix in MacKay's alist format (1-based indices)."""
    H = sparse.csc_matrix(H)
    m, n = H.shape
    H.sort_indices()
    col_lists: List[np.ndarray] = [H.indices[H.indptr[j]:H.indptr[j + 1]] for j in range(n)]
    Hr = sparse.csr_matrix(H)
    Hr.sort_indices()
    row_lists: List[np.ndarray] = [Hr.indices[Hr.indptr[i]:Hr.indptr[i + 1]] for i in range(m)]

    col_deg = [len(c) for c in col_lists]
    row_deg = [len(r) for r in row_lists]
    max_col, max_row = max(col_deg, default=0), max(row_deg, default=0)

    def padded(idx: np.ndarray, width: int) -> str:
        values = [str(int(i) + 1) for i in idx] + ["0"] * (width - len(idx))
        return " ".join(values)

    lines = [
        f"{n} {m}",
        f"{max_col} {max_row}",
        " ".join(map(str, col_deg)),
        " ".join(map(str, row_deg)),
    ]
    lines += [padded(c, max_col) for c in col_lists]
    lines += [padded(r, max_row) for r in row_lists]

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
    try:
        tmp.write_text("\n".join(lines) + "\n", encoding="ascii")
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def read_alist(path: Union[str, Path]) -> sparse.csr_matrix:
    """
    Read an alist file into an (m x n) CSR matrix.

    Only the column lists are used to build H; the row lists are checked
    against them.
    """
    path = Path(path)
    try:
        tokens = [line.split() for line in path.read_text(encoding="ascii").splitlines() if line.strip()]
        n, m = int(tokens[0][0]), int(tokens[0][1])
        col_deg = [int(v) for v in tokens[2]]
        row_deg = [int(v) for v in tokens[3]]
        col_lines = tokens[4:4 + n]
        row_lines = tokens[4 + n:4 + n + m]
    except (OSError, IndexError, ValueError) as e:
        raise ConfigurationError(f"Cannot read alist file {path}: {e}") from e

    if len(col_deg) != n or len(row_deg) != m or len(col_lines) != n:
        raise ConfigurationError(f"Malformed alist file {path}")

    rows, cols = [], []
    for j, line in enumerate(col_lines):
        for v in line[:col_deg[j]]:
            rows.append(int(v) - 1)
            cols.append(j)

    H = sparse.csr_matrix(
        (np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(m, n)
    )

    if row_lines and len(row_lines) == m:
        row_counts = np.diff(H.indptr)
        if not np.array_equal(row_counts, np.asarray(row_deg)):
            raise ConfigurationError(f"Row and column lists disagree in {path}")

    return H
