"""
Linear assignment and the soft-to-hard correspondence solver.

The assignment solver is the `O(n^3)` Hungarian algorithm with row and column potentials,
run on `cost = max(profit) - profit` padded to a square matrix. Among optimal assignments,
the lexicographically smallest list of pairs is returned: with optimal potentials, an assignment is optimal
exactly when it only uses tight entries (zero reduced cost), so rows pick, in order, their smallest tight column
that still leaves a perfect tight matching for the remaining rows.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from pyrgm.errors import NumericError, ParameterError

Pair = Tuple[int, int]

TIGHT_TOLERANCE = 1e-9
"""Relative tolerance under which a reduced cost counts as zero."""


def _hungarian(cost: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    size = cost.shape[0]
    row_potential = np.zeros(size + 1)
    column_potential = np.zeros(size + 1)
    owner = np.zeros(size + 1, dtype=np.int64)  # owner[j]: 1-based row assigned to column j
    way = np.zeros(size + 1, dtype=np.int64)

    for row in range(1, size + 1):
        owner[0] = row
        column = 0
        slack = np.full(size + 1, np.inf)
        used = np.zeros(size + 1, dtype=bool)
        while True:
            used[column] = True
            current_row = owner[column]
            free = ~used
            free[0] = False
            reduced = cost[current_row - 1] - row_potential[current_row] - column_potential[1:]
            improved = free[1:] & (reduced < slack[1:])
            slack[1:][improved] = reduced[improved]
            way[1:][improved] = column
            candidates = np.where(free, slack, np.inf)
            next_column = int(np.argmin(candidates))
            delta = candidates[next_column]
            row_potential[owner[used]] += delta
            column_potential[used] -= delta
            slack[free] -= delta
            column = next_column
            if owner[column] == 0:
                break
        while column:
            previous = way[column]
            owner[column] = owner[previous]
            column = previous

    assignment = np.empty(size, dtype=np.int64)
    assignment[owner[1:] - 1] = np.arange(size)
    return assignment, row_potential[1:], column_potential[1:]


def _perfect_matching(tight: np.ndarray) -> Optional[np.ndarray]:
    if tight.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    matching = maximum_bipartite_matching(csr_matrix(tight.astype(np.int8)), perm_type="column")
    if np.any(matching < 0):
        return None
    return matching


def _smallest_tight_assignment(tight: np.ndarray, assignment: np.ndarray) -> np.ndarray:
    size = tight.shape[0]
    assignment = assignment.copy()
    taken = np.zeros(size, dtype=bool)
    for row in range(size):
        # the current assignment is a perfect tight matching, so its own column is always feasible
        for column in np.flatnonzero(tight[row] & ~taken):
            if column >= assignment[row]:
                break
            rest_rows = np.arange(row + 1, size)
            free = ~taken
            free[column] = False
            rest_columns = np.flatnonzero(free)
            matching = _perfect_matching(tight[np.ix_(rest_rows, rest_columns)])
            if matching is not None:
                assignment[rest_rows] = rest_columns[matching]
                assignment[row] = column
                break
        taken[assignment[row]] = True
    return assignment


def lap_hungarian(profit: np.ndarray) -> List[Pair]:
    """
    Solve the linear assignment problem, maximizing the total profit.

    Arguments:
        profit: An `(R, C)` matrix of finite profits.

    Raises:
        ParameterError: When the input is not a matrix.
        NumericError: When an entry is not finite.

    Returns:
        `min(R, C)` pairs `(row, column)` sorted by row, the lexicographically smallest optimal assignment.
    """
    profit = np.asarray(profit, dtype=np.float64)
    if profit.ndim != 2:
        raise ParameterError(f"lap_hungarian: expected a matrix, got shape {profit.shape}")
    if not np.all(np.isfinite(profit)):
        raise NumericError("lap_hungarian: non-finite profit")
    rows, columns = profit.shape
    if rows == 0 or columns == 0:
        return []

    size = max(rows, columns)
    cost = np.zeros((size, size))
    cost[:rows, :columns] = profit.max() - profit
    assignment, row_potential, column_potential = _hungarian(cost)

    reduced = cost - row_potential[:, None] - column_potential[None, :]
    tight = np.abs(reduced) <= TIGHT_TOLERANCE * max(1.0, float(np.abs(cost).max()))
    assignment = _smallest_tight_assignment(tight, assignment)
    return [(row, int(assignment[row])) for row in range(rows) if assignment[row] < columns]


class HardCorrespondence:
    """A one-to-one set of matched index pairs between an `N`-point and an `M`-point cloud."""

    def __init__(self, pairs: Sequence[Pair], rows: int, columns: int) -> None:
        """
        Initialization method.

        Arguments:
            pairs: The matched `(i, j)` pairs.
            rows: The source point count `N`.
            columns: The target point count `M`.

        Raises:
            ParameterError: When a pair is out of range or a point is matched twice.
        """
        self.pairs: List[Pair] = sorted((int(i), int(j)) for i, j in pairs)
        """The matched pairs, sorted."""
        self.rows = rows
        self.columns = columns
        sources = [i for i, _ in self.pairs]
        targets = [j for _, j in self.pairs]
        if len(set(sources)) != len(sources) or len(set(targets)) != len(targets):
            raise ParameterError("correspondences must be one-to-one")
        if any(not (0 <= i < rows and 0 <= j < columns) for i, j in self.pairs):
            raise ParameterError(f"correspondence out of range for a {rows}x{columns} matrix")

    def __len__(self) -> int:
        return len(self.pairs)

    def __repr__(self) -> str:
        return f"<HardCorrespondence({len(self)} pairs, {self.rows}x{self.columns})>"

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "HardCorrespondence":
        """
        Build correspondences from a binary matrix.

        Arguments:
            matrix: The `(N, M)` binary matrix.

        Returns:
            The correspondences.
        """
        matrix = np.asarray(matrix)
        rows, columns = np.nonzero(matrix)
        return cls(list(zip(rows.tolist(), columns.tolist())), *matrix.shape)

    @property
    def matrix(self) -> np.ndarray:
        """The binary `(N, M)` matrix."""
        matrix = np.zeros((self.rows, self.columns))
        for i, j in self.pairs:
            matrix[i, j] = 1.0
        return matrix

    @property
    def sources(self) -> np.ndarray:
        """The matched source indices."""
        return np.array([i for i, _ in self.pairs], dtype=np.int64)

    @property
    def targets(self) -> np.ndarray:
        """The matched target indices."""
        return np.array([j for _, j in self.pairs], dtype=np.int64)

    def pairs_with_scores(self, soft: np.ndarray) -> List[Tuple[int, int, float]]:
        """
        Attach the soft correspondence value to every pair.

        Arguments:
            soft: The soft correspondence matrix, with or without slack.

        Returns:
            `(i, j, score)` triples.
        """
        return [(i, j, float(soft[i, j])) for i, j in self.pairs]


def soft_to_hard(soft: np.ndarray, tau: float = 0.5, shape: Optional[Tuple[int, int]] = None) -> HardCorrespondence:
    """
    Convert a soft correspondence into one-to-one matches.

    The slack row and column are dropped. Rows and columns of the remaining block whose sum exceeds `tau`
    are selected, and the assignment maximizing the total soft value is solved on the selected submatrix.

    Arguments:
        soft: The `(N + 1, M + 1)` soft correspondence.
        tau: The confidence threshold, in `[0, 1]`.
        shape: `(N, M)` when the matrix has no slack row and column.

    Raises:
        ParameterError: When `tau` is out of range.

    Returns:
        The hard correspondences.
    """
    if not 0 <= tau <= 1:
        raise ParameterError(f"tau must be in [0, 1], not {tau}")
    soft = np.asarray(soft, dtype=np.float64)
    rows, columns = shape or (soft.shape[0] - 1, soft.shape[1] - 1)
    block = soft[:rows, :columns]
    selected_rows = np.flatnonzero(block.sum(axis=1) > tau)
    selected_columns = np.flatnonzero(block.sum(axis=0) > tau)
    if selected_rows.size == 0 or selected_columns.size == 0:
        return HardCorrespondence([], rows, columns)
    assignment = lap_hungarian(block[np.ix_(selected_rows, selected_columns)])
    pairs = [(selected_rows[i], selected_columns[j]) for i, j in assignment]
    return HardCorrespondence(pairs, rows, columns)
