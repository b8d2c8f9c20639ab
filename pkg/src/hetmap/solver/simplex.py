"""Dense bounded-variable simplex.

Solves ``min c.x  s.t.  A x = b,  lo <= x <= hi`` where the caller already
appended one slack column per row.  Cold starts run a two-phase primal
simplex (Dantzig pricing, Bland's rule once degenerate pivots pile up);
warm starts after bound changes run the dual simplex from the previous basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import blas, inv

FEAS_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 50
BLAND_AFTER = 50

AT_LOWER, AT_UPPER, BASIC, FREE_ZERO = 0, 1, 2, 3


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    x: Optional[np.ndarray]
    objective: float
    basis: Optional[np.ndarray] = None
    state: Optional[np.ndarray] = None
    iterations: int = 0
    binv: Optional[np.ndarray] = None


def invert(B: np.ndarray) -> np.ndarray:
    """Basis inverse.  Slack and artificial columns are signed unit vectors,
    so only the block left after removing them goes through LAPACK."""
    m = len(B)
    nz = B != 0
    unit = np.flatnonzero(nz.sum(axis=0) == 1)
    rows = nz[:, unit].argmax(axis=0)
    _, first = np.unique(rows, return_index=True)
    unit, rows = unit[first], rows[first]
    if len(unit) == 0:
        return np.ascontiguousarray(inv(B, check_finite=False))
    rest_cols = np.setdiff1d(np.arange(m), unit)
    rest_rows = np.setdiff1d(np.arange(m), rows)
    if len(rest_cols) != len(rest_rows):
        raise np.linalg.LinAlgError("singular basis")
    s = B[rows, unit]
    out = np.zeros((m, m))
    out[unit, rows] = 1.0 / s
    if len(rest_cols):
        Vinv = inv(B[np.ix_(rest_rows, rest_cols)], check_finite=False)
        out[np.ix_(rest_cols, rest_rows)] = Vinv
        out[np.ix_(unit, rest_rows)] = -(B[np.ix_(rows, rest_cols)] @ Vinv) / s[:, None]
    return out


def _initial_state(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    st = np.full(len(lo), AT_LOWER)
    no_lo = np.isinf(lo)
    st[no_lo & np.isfinite(hi)] = AT_UPPER
    st[no_lo & np.isinf(hi)] = FREE_ZERO
    return st


def _pivot(Binv: np.ndarray, alpha: np.ndarray, r: int) -> None:
    pr = Binv[r] / alpha[r]
    if Binv.flags.c_contiguous and Binv.dtype == np.float64:
        # rank-1 update in place; the transpose is the Fortran view BLAS wants
        blas.dger(-1.0, pr, alpha, a=Binv.T, overwrite_a=True)
    else:
        Binv -= np.outer(alpha, pr)
    Binv[r] = pr


class BoundedSimplex:
    def __init__(self, A: np.ndarray, b: np.ndarray, c: np.ndarray,
                 lo: np.ndarray, hi: np.ndarray, max_iter: int = 50_000):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.lo = np.asarray(lo, dtype=float).copy()
        self.hi = np.asarray(hi, dtype=float).copy()
        self.m, self.n = self.A.shape
        self.max_iter = max_iter

    @staticmethod
    def _values(A, b, basis, state, lo, hi, Binv) -> np.ndarray:
        x = np.zeros(A.shape[1])
        at_lo, at_hi = state == AT_LOWER, state == AT_UPPER
        x[at_lo] = lo[at_lo]
        x[at_hi] = hi[at_hi]
        x[basis] = 0.0
        x[basis] = Binv @ (b - A @ x)
        return x

    # -- primal ------------------------------------------------------------------

    def _primal(self, A, b, c, lo, hi, basis, state, Binv) -> tuple[str, int]:
        it = 0
        degenerate = 0
        since_refactor = 0
        movable = hi > lo
        while True:
            if it >= self.max_iter:
                return "iteration_limit", it
            x = self._values(A, b, basis, state, lo, hi, Binv)
            d = c - (c[basis] @ Binv) @ A
            up = ((state == AT_LOWER) & movable & (d < -DUAL_TOL)) | \
                 ((state == FREE_ZERO) & (d < -DUAL_TOL))
            down = ((state == AT_UPPER) & movable & (d > DUAL_TOL)) | \
                   ((state == FREE_ZERO) & (d > DUAL_TOL))
            cand = np.flatnonzero(up | down)
            if len(cand) == 0:
                return "optimal", it
            bland = degenerate > BLAND_AFTER
            enter = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1 if up[enter] else -1

            # entering moves by theta*direction; basics by -theta*direction*alpha
            alpha = Binv @ A[:, enter]
            a = direction * alpha
            xb, lb, ub = x[basis], lo[basis], hi[basis]
            ratio = np.full(len(a), math.inf)
            dec = (a > PIVOT_TOL) & np.isfinite(lb)
            inc = (a < -PIVOT_TOL) & np.isfinite(ub)
            ratio[dec] = (xb[dec] - lb[dec]) / a[dec]
            ratio[inc] = (ub[inc] - xb[inc]) / -a[inc]
            np.maximum(ratio, 0.0, out=ratio)
            theta = hi[enter] - lo[enter]
            leave = -1
            rmin = ratio.min() if len(ratio) else math.inf
            if rmin < theta - 1e-12:
                ties = np.flatnonzero(ratio <= rmin + 1e-12)
                if bland:
                    leave = int(ties[np.argmin(basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(a[ties]))])
                theta = ratio[leave]
            if math.isinf(theta):
                return "unbounded", it
            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            it += 1
            if leave < 0:
                state[enter] = AT_UPPER if direction > 0 else AT_LOWER
                continue
            leave_to = AT_LOWER if dec[leave] else AT_UPPER
            _pivot(Binv, alpha, leave)
            state[basis[leave]] = leave_to
            basis[leave] = enter
            state[enter] = BASIC
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                Binv[:] = invert(A[:, basis])
                since_refactor = 0

    def solve(self) -> LPResult:
        """Two-phase primal simplex from the slack basis."""
        A, b, c, lo, hi = self.A, self.b, self.c, self.lo, self.hi
        m, n = self.m, self.n
        if np.any(lo > hi + FEAS_TOL):
            return LPResult("infeasible", None, math.inf)
        state = _initial_state(lo, hi)
        slack = np.arange(n - m, n)
        x = np.where(state == AT_LOWER, lo, np.where(state == AT_UPPER, hi, 0.0))
        x[slack] = 0.0
        struct = np.ones(n, dtype=bool)
        struct[slack] = False
        resid = b - A[:, struct] @ x[struct]
        # slack k has a unit column in row k
        art_rows, art_sign = [], []
        basis = np.empty(m, dtype=int)
        for k in range(m):
            s = slack[k]
            if lo[s] - FEAS_TOL <= resid[k] <= hi[s] + FEAS_TOL:
                basis[k] = s
                state[s] = BASIC
                continue
            bound = lo[s] if resid[k] < lo[s] else hi[s]
            state[s] = AT_LOWER if bound == lo[s] else AT_UPPER
            art_rows.append(k)
            art_sign.append(1.0 if resid[k] - bound > 0 else -1.0)
        na = len(art_rows)
        it1 = 0
        if na:
            A1 = np.hstack([A, np.zeros((m, na))])
            for t, (k, sg) in enumerate(zip(art_rows, art_sign)):
                A1[k, n + t] = sg
                basis[k] = n + t
            lo1 = np.concatenate([lo, np.zeros(na)])
            hi1 = np.concatenate([hi, np.full(na, math.inf)])
            c1 = np.concatenate([np.zeros(n), np.ones(na)])
            st1 = np.concatenate([state, np.full(na, BASIC)])
            Binv = invert(A1[:, basis])
            status, it1 = self._primal(A1, b, c1, lo1, hi1, basis, st1, Binv)
            if status != "optimal":
                return LPResult(status, None, math.inf, iterations=it1)
            x1 = self._values(A1, b, basis, st1, lo1, hi1, Binv)
            if x1[n:].sum() > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
                return LPResult("infeasible", None, math.inf, iterations=it1)
            # drive remaining artificials out of the basis where possible
            for r in range(m):
                if basis[r] < n:
                    continue
                row = Binv[r] @ A1[:, :n]
                cand = [j for j in range(n) if st1[j] != BASIC and abs(row[j]) > 1e-7]
                if cand:
                    j = max(cand, key=lambda j: abs(row[j]))
                    _pivot(Binv, Binv @ A1[:, j], r)
                    st1[basis[r]] = AT_LOWER
                    basis[r] = j
                    st1[j] = BASIC
            if np.any(basis >= n):
                # redundant rows: keep the artificial pinned at zero
                A2, lo2, hi2 = A1, lo1.copy(), hi1.copy()
                hi2[n:] = 0.0
                c2 = np.concatenate([c, np.zeros(na)])
                state2 = st1
            else:
                A2, lo2, hi2, c2 = A, lo, hi, c
                state2 = st1[:n]
            Binv = invert(A2[:, basis])
        else:
            A2, lo2, hi2, c2, state2 = A, lo, hi, c, state
            Binv = np.eye(m)
        status, it2 = self._primal(A2, b, c2, lo2, hi2, basis, state2, Binv)
        if status != "optimal":
            return LPResult(status, None, math.inf, iterations=it1 + it2)
        x = self._values(A2, b, basis, state2, lo2, hi2, Binv)[:n]
        if A2 is not A:
            return LPResult("optimal", x, float(c @ x), iterations=it1 + it2)
        return LPResult("optimal", x, float(c @ x), basis.copy(), state2.copy(),
                        it1 + it2, Binv)

    # -- dual ----------------------------------------------------------------------

    def solve_dual(self, basis: np.ndarray, state: np.ndarray,
                   binv: Optional[np.ndarray] = None) -> LPResult:
        """Dual simplex from a dual-feasible basis, e.g. a parent node's optimum
        after bound changes.  ``binv`` is that basis' inverse if known."""
        A, b, c, lo, hi = self.A, self.b, self.c, self.lo, self.hi
        if np.any(lo > hi + FEAS_TOL):
            return LPResult("infeasible", None, math.inf)
        basis = basis.copy()
        state = state.copy()
        nb = state != BASIC
        state[nb & (state == AT_LOWER) & np.isinf(lo)] = AT_UPPER
        state[nb & (state == AT_UPPER) & np.isinf(hi)] = AT_LOWER
        state[nb & np.isinf(lo) & np.isinf(hi)] = FREE_ZERO
        if binv is not None:
            Binv = binv.copy()
        else:
            try:
                Binv = invert(A[:, basis])
            except (np.linalg.LinAlgError, ValueError):
                return self.solve()
        # restore dual feasibility by flipping boxed nonbasics; otherwise cold start
        d = c - (c[basis] @ Binv) @ A
        bad_lo = nb & (state == AT_LOWER) & (d < -DUAL_TOL)
        bad_hi = nb & (state == AT_UPPER) & (d > DUAL_TOL)
        bad_free = nb & (state == FREE_ZERO) & (np.abs(d) > DUAL_TOL)
        if np.any(bad_free) or np.any(bad_lo & np.isinf(hi)) or np.any(bad_hi & np.isinf(lo)):
            return self.solve()
        state[bad_lo] = AT_UPPER
        state[bad_hi] = AT_LOWER

        it = 0
        since_refactor = 0
        fixed = lo == hi
        while True:
            if it >= self.max_iter:
                return LPResult("iteration_limit", None, math.inf, iterations=it)
            x = self._values(A, b, basis, state, lo, hi, Binv)
            xb = x[basis]
            below = lo[basis] - xb
            above = xb - hi[basis]
            infeas = np.maximum(below, above)
            r = int(np.argmax(infeas))
            if infeas[r] <= FEAS_TOL:
                return LPResult("optimal", x, float(c @ x), basis, state, it, Binv)
            leaving_low = below[r] > above[r]
            d = c - (c[basis] @ Binv) @ A
            rho = Binv[r] @ A
            # x_r = beta - sum rho_j x_j: raising x_r needs rho<0 at lower or rho>0 at upper
            sgn = -1.0 if leaving_low else 1.0
            st = state
            ok = (np.abs(rho) > PIVOT_TOL) & (st != BASIC) & ~((st != FREE_ZERO) & fixed)
            ok &= ((st == AT_LOWER) & (sgn * rho > 0)) | ((st == AT_UPPER) & (sgn * rho < 0)) \
                | (st == FREE_ZERO)
            cand = np.flatnonzero(ok)
            if len(cand) == 0:
                return LPResult("infeasible", None, math.inf, iterations=it)
            ratios = np.abs(d[cand]) / np.abs(rho[cand])
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12]
            enter = int(ties[np.argmax(np.abs(rho[ties]))])
            alpha = Binv @ A[:, enter]
            leave_var = basis[r]
            _pivot(Binv, alpha, r)
            state[leave_var] = AT_LOWER if leaving_low else AT_UPPER
            basis[r] = enter
            state[enter] = BASIC
            it += 1
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                Binv = invert(A[:, basis])
                since_refactor = 0
