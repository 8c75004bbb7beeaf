"""
Dense two-phase simplex for small linear programs.

Variables with general bounds are mapped to nonnegative ones (shift, reflect
or split), finite upper bounds become rows, and every row is brought to a
nonnegative right-hand side before slack, surplus and artificial columns are
added. Both phases pivot with Bland's rule, so the solver never cycles and is
deterministic for a given input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9

LE, EQ, GE = "<=", "=", ">="
_RELATIONS = {"<=": LE, "≤": LE, "=": EQ, "==": EQ, ">=": GE, "≥": GE}


@dataclass
class LinearProgram:
    """``maximize objective @ x`` subject to row constraints and bounds.

    ``constraints`` holds ``(coefficients, relation, rhs)`` triples with
    relation one of ``"<="``, ``"="``, ``">="``. Lower bounds default to 0;
    use ``-np.inf`` for a free variable. Upper bounds default to ``+inf``.
    """

    objective: np.ndarray
    constraints: list = field(default_factory=list)
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        n = self.objective.size
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.size != n or self.upper.size != n:
            raise ValueError(f"bounds must have length {n}")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)) or np.any(self.lower == np.inf) \
                or np.any(self.upper == -np.inf):
            raise ValueError("invalid variable bounds")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")
        rows = []
        for i, (coef, rel, rhs) in enumerate(self.constraints):
            coef = np.asarray(coef, dtype=float).reshape(-1)
            if coef.size != n:
                raise ValueError(f"constraint {i} has {coef.size} coefficients, expected {n}")
            if rel not in _RELATIONS:
                raise ValueError(f"constraint {i} has unknown relation {rel!r}")
            if not (np.all(np.isfinite(coef)) and np.isfinite(rhs)):
                raise ValueError(f"constraint {i} has non-finite data")
            rows.append((coef, _RELATIONS[rel], float(rhs)))
        self.constraints = rows

    @property
    def num_vars(self) -> int:
        return self.objective.size


@dataclass
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray]
    value: Optional[float]


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, tab[row])


def _simplex(tab: np.ndarray, basis: list, cost: np.ndarray, allowed: np.ndarray,
             max_iter: int) -> str:
    """Maximize ``cost`` over the canonical tableau in place. Returns a status."""
    for _ in range(max_iter):
        reduced = cost - cost[basis] @ tab[:, :-1]
        candidates = np.flatnonzero(allowed & (reduced > PIVOT_TOL))
        if candidates.size == 0:
            return "optimal"
        col = int(candidates[0])
        column = tab[:, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return "unbounded"
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
    raise RuntimeError("simplex iteration limit reached")


def solve_lp(problem: LinearProgram, max_iter: int = 50_000) -> LPSolution:
    n = problem.num_vars
    lo, hi = problem.lower, problem.upper

    # x = offset + transform @ z with z >= 0
    cols = []
    offset = np.zeros(n)
    extra_rows = []
    for i in range(n):
        if np.isfinite(lo[i]):
            offset[i] = lo[i]
            cols.append((i, 1.0))
            if np.isfinite(hi[i]):
                if hi[i] < lo[i]:
                    return LPSolution("infeasible", None, None)
                extra_rows.append((len(cols) - 1, hi[i] - lo[i]))
        elif np.isfinite(hi[i]):
            offset[i] = hi[i]
            cols.append((i, -1.0))
        else:
            cols.append((i, 1.0))
            cols.append((i, -1.0))
    nz = len(cols)
    transform = np.zeros((n, nz))
    for j, (i, sign) in enumerate(cols):
        transform[i, j] = sign

    a_rows, rels, rhs = [], [], []
    for coef, rel, b in problem.constraints:
        a_rows.append(coef @ transform)
        rels.append(rel)
        rhs.append(b - coef @ offset)
    for j, ub in extra_rows:
        row = np.zeros(nz)
        row[j] = 1.0
        a_rows.append(row)
        rels.append(LE)
        rhs.append(ub)
    m = len(a_rows)
    c_z = problem.objective @ transform
    const = float(problem.objective @ offset)

    if m == 0:
        if np.any(c_z > PIVOT_TOL):
            return LPSolution("unbounded", None, None)
        return LPSolution("optimal", offset.copy(), const)

    A = np.array(a_rows)
    b = np.array(rhs)
    rels = list(rels)
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            rels[i] = {LE: GE, GE: LE, EQ: EQ}[rels[i]]

    n_slack = sum(1 for r in rels if r != EQ)
    n_art = sum(1 for r in rels if r != LE)
    width = nz + n_slack + n_art
    tab = np.zeros((m, width + 1))
    tab[:, :nz] = A
    tab[:, -1] = b
    basis = [0] * m
    is_art = np.zeros(width, dtype=bool)
    s_col, a_col = nz, nz + n_slack
    for i, rel in enumerate(rels):
        if rel == LE:
            tab[i, s_col] = 1.0
            basis[i] = s_col
            s_col += 1
        else:
            if rel == GE:
                tab[i, s_col] = -1.0
                s_col += 1
            tab[i, a_col] = 1.0
            is_art[a_col] = True
            basis[i] = a_col
            a_col += 1

    if n_art:
        phase1 = np.where(is_art, -1.0, 0.0)
        status = _simplex(tab, basis, phase1, np.ones(width, dtype=bool), max_iter)
        if status != "optimal":
            raise RuntimeError("phase 1 did not terminate at an optimum")
        infeas = -phase1[basis] @ tab[:, -1]
        if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max())):
            return LPSolution("infeasible", None, None)
        # drive remaining artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if is_art[basis[i]]:
                nonzero = np.flatnonzero(~is_art & (np.abs(tab[i, :-1]) > PIVOT_TOL))
                if nonzero.size:
                    _pivot(tab, i, int(nonzero[0]))
                    basis[i] = int(nonzero[0])
                    keep.append(i)
            else:
                keep.append(i)
        tab = tab[keep]
        basis = [basis[i] for i in keep]

    cost = np.zeros(width)
    cost[:nz] = c_z
    status = _simplex(tab, basis, cost, ~is_art, max_iter)
    if status == "unbounded":
        return LPSolution("unbounded", None, None)
    z = np.zeros(width)
    z[basis] = tab[:, -1]
    x = offset + transform @ z[:nz]
    return LPSolution("optimal", x, float(problem.objective @ x))
