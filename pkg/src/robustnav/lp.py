"""Dense linear programming with duality certificates.

Solves  min cost.x  subject to  ineq_matrix @ x <= ineq_rhs,
eq_matrix @ x == eq_rhs, var_lower <= x <= var_upper  with a revised
simplex method (explicit basis inverse, rank-one eta updates, periodic
refactorization).  Optimal solutions carry a dual certificate; infeasible
and unbounded outcomes carry a Farkas vector or an improving ray.

Sensitivity conventions used throughout the package:
    d(value)/d(ineq_rhs_i) = -dual_ineq_i   (dual_ineq >= 0)
    d(value)/d(eq_rhs_j)   =  dual_eq_j
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np


class NumericalFailure(RuntimeError):
    """Pivoting or factorization broke down beyond tolerance escalation."""


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpConfig:
    feas_tol: float = 1e-8        # absolute feasibility tolerance
    opt_tol: float = 1e-9         # relative optimality (reduced cost) tolerance
    max_iters: int = 50_000
    refactor_every: int = 128
    bland_factor: int = 2         # switch to Bland after bland_factor*(m+n) degenerate pivots


@dataclass(frozen=True)
class LpProblem:
    """Standard-form container: min cost.x, ineq rows a_i.x <= b_i, eq rows, box bounds."""

    cost: np.ndarray
    ineq_matrix: np.ndarray = None
    ineq_rhs: np.ndarray = None
    eq_matrix: np.ndarray = None
    eq_rhs: np.ndarray = None
    var_lower: np.ndarray = None
    var_upper: np.ndarray = None

    def __post_init__(self):
        n = len(self.cost)
        object.__setattr__(self, "cost", np.asarray(self.cost, dtype=float))
        for name, rows in (("ineq", self.n_ineq), ("eq", self.n_eq)):
            mat = getattr(self, f"{name}_matrix")
            rhs = getattr(self, f"{name}_rhs")
            if mat is None:
                mat = np.zeros((0, n))
                rhs = np.zeros(0)
            mat = np.atleast_2d(np.asarray(mat, dtype=float))
            rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
            if mat.size == 0:
                mat = mat.reshape(0, n)
            object.__setattr__(self, f"{name}_matrix", mat)
            object.__setattr__(self, f"{name}_rhs", rhs)
        lo = self.var_lower if self.var_lower is not None else np.zeros(n)
        hi = self.var_upper if self.var_upper is not None else np.full(n, np.inf)
        object.__setattr__(self, "var_lower", np.asarray(lo, dtype=float))
        object.__setattr__(self, "var_upper", np.asarray(hi, dtype=float))
        self.validate()

    @property
    def n_vars(self) -> int:
        return len(self.cost)

    @property
    def n_ineq(self) -> int:
        return 0 if self.ineq_rhs is None else len(np.atleast_1d(self.ineq_rhs))

    @property
    def n_eq(self) -> int:
        return 0 if self.eq_rhs is None else len(np.atleast_1d(self.eq_rhs))

    def validate(self):
        n = self.n_vars
        if self.ineq_matrix.shape != (len(self.ineq_rhs), n):
            raise ValueError(
                f"ineq shape {self.ineq_matrix.shape} inconsistent with "
                f"rhs {len(self.ineq_rhs)} and n_vars {n}"
            )
        if self.eq_matrix.shape != (len(self.eq_rhs), n):
            raise ValueError(
                f"eq shape {self.eq_matrix.shape} inconsistent with "
                f"rhs {len(self.eq_rhs)} and n_vars {n}"
            )
        if len(self.var_lower) != n or len(self.var_upper) != n:
            raise ValueError("bound vectors must have length n_vars")
        for arr in (self.cost, self.ineq_matrix, self.ineq_rhs, self.eq_matrix, self.eq_rhs):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError("matrix/cost entries must be finite")
        if np.any(np.isnan(self.var_lower)) or np.any(np.isnan(self.var_upper)):
            raise ValueError("bounds may be +/-inf but not NaN")
        if np.any(self.var_lower > self.var_upper):
            raise ValueError("var_lower exceeds var_upper")

    def dump(self) -> str:
        """Plain-text standard form, one constraint per line (debugging aid)."""
        def term(c, j):
            return f"{c:+.12g}*x{j}"

        lines = ["min " + " ".join(term(c, j) for j, c in enumerate(self.cost))]
        for a, b in zip(self.ineq_matrix, self.ineq_rhs):
            lines.append(" ".join(term(c, j) for j, c in enumerate(a)) + f" <= {b:.12g}")
        for a, b in zip(self.eq_matrix, self.eq_rhs):
            lines.append(" ".join(term(c, j) for j, c in enumerate(a)) + f" == {b:.12g}")
        for j, (lo, hi) in enumerate(zip(self.var_lower, self.var_upper)):
            lines.append(f"{lo:.12g} <= x{j} <= {hi:.12g}")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: LpStatus
    primal: np.ndarray = None
    dual_ineq: np.ndarray = None
    dual_eq: np.ndarray = None
    objective: float = np.nan
    dual_objective: float = np.nan
    iterations: int = 0
    # Farkas certificate over (ineq, eq) rows for INFEASIBLE; improving
    # primal ray for UNBOUNDED.
    farkas: np.ndarray = None
    ray: np.ndarray = None


# ---------------------------------------------------------------------------
# standardization: min c.z, A z = b, z >= 0

_PLUS, _MINUS, _SLACK_UB, _SLACK_BND = range(4)


class _Standard:
    def __init__(self, prob: LpProblem):
        n = prob.n_vars
        lo, hi = prob.var_lower, prob.var_upper
        cols = []          # (kind, orig_var or orig_row)
        shift = np.zeros(n)            # x = shift + sum of column contributions
        col_of_var = [None] * n        # main column per variable
        neg_col_of_var = [None] * n    # for free splits
        bounded_rows = []              # (var j, width) extra rows y_j <= hi-lo

        for j in range(n):
            if np.isfinite(lo[j]):
                shift[j] = lo[j]
                col_of_var[j] = len(cols)
                cols.append((_PLUS, j))
                if np.isfinite(hi[j]):
                    bounded_rows.append((j, hi[j] - lo[j]))
            elif np.isfinite(hi[j]):
                shift[j] = hi[j]
                col_of_var[j] = len(cols)
                cols.append((_MINUS, j))
            else:
                col_of_var[j] = len(cols)
                cols.append((_PLUS, j))
                neg_col_of_var[j] = len(cols)
                cols.append((_MINUS, j))

        n_main = len(cols)
        m_ub, m_eq, m_bnd = prob.n_ineq, prob.n_eq, len(bounded_rows)
        m = m_ub + m_eq + m_bnd
        n_std = n_main + m_ub + m_bnd

        A = np.zeros((m, n_std))
        b = np.zeros(m)
        c = np.zeros(n_std)

        sign = np.ones(n_main)
        for k, (kind, j) in enumerate(cols):
            if kind == _MINUS:
                sign[k] = -1.0

        var_cols = np.array([cols[k][1] for k in range(n_main)])
        # fill main columns for ineq/eq rows
        if m_ub:
            A[:m_ub, :n_main] = prob.ineq_matrix[:, var_cols] * sign
            b[:m_ub] = prob.ineq_rhs - prob.ineq_matrix @ shift
            for i in range(m_ub):
                A[i, n_main + i] = 1.0
        if m_eq:
            A[m_ub:m_ub + m_eq, :n_main] = prob.eq_matrix[:, var_cols] * sign
            b[m_ub:m_ub + m_eq] = prob.eq_rhs - prob.eq_matrix @ shift
        for r, (j, width) in enumerate(bounded_rows):
            row = m_ub + m_eq + r
            A[row, col_of_var[j]] = 1.0
            A[row, n_main + m_ub + r] = 1.0
            b[row] = width
        c[:n_main] = prob.cost[var_cols] * sign

        # normalize b >= 0 for phase 1
        flip = b < 0
        A[flip] *= -1.0
        b[flip] *= -1.0

        self.prob = prob
        self.A, self.b, self.c = A, b, c
        self.c0 = float(prob.cost @ shift)
        self.shift, self.sign = shift, sign
        self.cols, self.n_main = cols, n_main
        self.col_of_var, self.neg_col_of_var = col_of_var, neg_col_of_var
        self.m_ub, self.m_eq, self.m_bnd = m_ub, m_eq, m_bnd
        self.bounded_rows = bounded_rows
        self.row_flip = np.where(flip, -1.0, 1.0)

    def recover_x(self, z: np.ndarray) -> np.ndarray:
        x = self.shift.copy()
        for k, (kind, j) in enumerate(self.cols):
            x[j] += z[k] * (1.0 if kind == _PLUS else -1.0)
        return x

    def recover_ray(self, dz: np.ndarray) -> np.ndarray:
        dx = np.zeros(self.prob.n_vars)
        for k, (kind, j) in enumerate(self.cols):
            dx[j] += dz[k] * (1.0 if kind == _PLUS else -1.0)
        return dx


# ---------------------------------------------------------------------------
# revised simplex core


class _Simplex:
    """Phase-aware revised simplex over A z = b, z >= 0, b >= 0."""

    def __init__(self, A, b, cfg: LpConfig):
        self.A, self.b, self.cfg = A, b, cfg
        self.m, self.n = A.shape
        self.art = np.arange(self.n, self.n + self.m)
        self.basis = self.art.copy()
        self.Binv = np.eye(self.m)
        self.xB = b.copy()
        self.iters = 0
        self.since_refactor = 0

    def _refactor(self):
        B = self._col(self.basis)
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refactorization") from exc
        self.xB = self.Binv @ self.b
        self.since_refactor = 0

    def _col(self, idx):
        out = np.zeros((self.m, len(idx)))
        for k, j in enumerate(idx):
            if j < self.n:
                out[:, k] = self.A[:, j]
            else:
                out[j - self.n, k] = 1.0
        return out

    def _column(self, j):
        if j < self.n:
            return self.A[:, j]
        e = np.zeros(self.m)
        e[j - self.n] = 1.0
        return e

    def run(self, c_ext, allowed, tol_opt, ban_leaving_artificials=False):
        """Minimize c_ext.z over allowed columns; returns 'optimal'|'unbounded'."""
        cfg = self.cfg
        degen = 0
        bland_after = cfg.bland_factor * (self.m + self.n)
        in_basis = np.zeros(self.n + self.m, dtype=bool)
        in_basis[self.basis] = True
        banned = np.zeros(self.n + self.m, dtype=bool)
        allowed_idx = np.flatnonzero(allowed)
        A_allowed = self._col(allowed_idx)
        c_allowed = c_ext[allowed_idx]

        while True:
            if self.iters >= cfg.max_iters:
                raise NumericalFailure("simplex iteration limit exceeded")
            cB = c_ext[self.basis]
            y = self.Binv.T @ cB
            red = c_allowed - A_allowed.T @ y
            scale = 1.0 + np.abs(c_allowed)
            blocked = in_basis[allowed_idx] | banned[allowed_idx]
            cand = np.flatnonzero((red < -tol_opt * scale) & ~blocked)
            if cand.size == 0:
                self.y = y
                return "optimal"
            if degen > bland_after:
                pick = cand[0]  # Bland: lowest index
            else:
                pick = cand[np.argmin(red[cand] / scale[cand])]
            j = int(allowed_idx[pick])
            d = self.Binv @ self._column(j)
            pos = d > cfg.feas_tol
            if not np.any(pos):
                self.ray_col = j
                self.ray_dir = d
                return "unbounded"
            ratios = np.full(self.m, np.inf)
            ratios[pos] = self.xB[pos] / d[pos]
            theta = ratios.min()
            ties = np.flatnonzero(np.isclose(ratios, theta, rtol=0.0, atol=cfg.feas_tol))
            # deterministic tie-break: lowest leaving variable index
            leave = int(ties[np.argmin(self.basis[ties])])
            degen = degen + 1 if theta <= cfg.feas_tol else 0

            out_var = self.basis[leave]
            in_basis[out_var] = False
            if ban_leaving_artificials and out_var >= self.n:
                banned[out_var] = True
            in_basis[j] = True
            self.basis[leave] = j
            # eta update of Binv
            piv = d[leave]
            if abs(piv) < 1e-12:
                self._refactor()
            else:
                row = self.Binv[leave, :] / piv
                self.Binv -= np.outer(d, row)
                self.Binv[leave, :] = row
                self.xB = self.xB - theta * d
                self.xB[leave] = theta
            self.iters += 1
            self.since_refactor += 1
            if self.since_refactor >= cfg.refactor_every:
                self._refactor()
            np.clip(self.xB, 0.0, None, out=self.xB)


def _solve_standard(std: _Standard, cfg: LpConfig):
    m, n = std.A.shape
    sx = _Simplex(std.A, std.b, cfg)

    # phase 1: minimize sum of artificials
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    allowed = np.ones(n + m, dtype=bool)
    status = sx.run(c1, allowed, cfg.opt_tol)
    if status != "optimal":
        raise NumericalFailure("phase 1 terminated abnormally")
    phase1_obj = float(c1[sx.basis] @ sx.xB)
    if phase1_obj > cfg.feas_tol * (1.0 + np.abs(std.b).max(initial=0.0)):
        return "infeasible", sx, phase1_obj

    # phase 2: forbid artificial columns from entering
    c2 = np.concatenate([std.c, np.zeros(m)])
    allowed2 = np.ones(n + m, dtype=bool)
    allowed2[n:] = False
    for j in sx.basis:
        allowed2[j] = True  # basic artificials stay at zero level
    status = sx.run(c2, allowed2, cfg.opt_tol, ban_leaving_artificials=True)
    return status, sx, phase1_obj


def lp_solve(problem: LpProblem, tol: float = 1e-8, config: LpConfig = None) -> LpSolution:
    """Solve the LP, returning a certified solution or a witnessed failure status.

    Raises NumericalFailure if the simplex breaks down even after a
    refactor-every-pivot retry.
    """
    cfg = config or LpConfig(feas_tol=tol)
    try:
        return _lp_solve_once(problem, cfg)
    except NumericalFailure:
        strict = replace(cfg, refactor_every=1, max_iters=cfg.max_iters * 2)
        return _lp_solve_once(problem, strict)


def _lp_solve_once(problem: LpProblem, cfg: LpConfig) -> LpSolution:
    std = _Standard(problem)
    status, sx, _ = _solve_standard(std, cfg)
    n_std = std.A.shape[1]

    if status == "infeasible":
        y = sx.y * std.row_flip  # phase-1 duals in un-normalized row space
        farkas = np.concatenate([
            -y[: std.m_ub],
            -y[std.m_ub: std.m_ub + std.m_eq],
        ])
        return LpSolution(status=LpStatus.INFEASIBLE, farkas=farkas, iterations=sx.iters)

    z = np.zeros(n_std)
    for pos, j in enumerate(sx.basis):
        if j < n_std:
            z[j] = sx.xB[pos]

    if status == "unbounded":
        dz = np.zeros(n_std)
        d = sx.ray_dir
        for pos, j in enumerate(sx.basis):
            if j < n_std:
                dz[j] = -d[pos]
        if sx.ray_col < n_std:
            dz[sx.ray_col] = 1.0
        return LpSolution(
            status=LpStatus.UNBOUNDED,
            primal=std.recover_x(z),
            ray=std.recover_ray(dz),
            iterations=sx.iters,
        )

    x = std.recover_x(z)
    obj = float(problem.cost @ x)

    # row duals back in original row space (d value / d rhs = y_row)
    y = sx.y * std.row_flip
    y_ub = y[: std.m_ub]
    y_eq = y[std.m_ub: std.m_ub + std.m_eq]
    dual_ineq = np.maximum(-y_ub, 0.0)
    dual_eq = y_eq.copy()

    dual_obj = (
        -problem.ineq_rhs @ dual_ineq
        + problem.eq_rhs @ dual_eq
        + _bound_terms(problem, dual_ineq, dual_eq)
    )
    sol = LpSolution(
        status=LpStatus.OPTIMAL,
        primal=x,
        dual_ineq=dual_ineq,
        dual_eq=dual_eq,
        objective=obj,
        dual_objective=float(dual_obj),
        iterations=sx.iters,
    )
    _check_certificates(problem, sol, cfg)
    return sol


def _bound_terms(problem: LpProblem, dual_ineq, dual_eq) -> float:
    # stationarity residual r = c + A_ub' y_ub - A_eq' dual_eq  (y_ub = dual_ineq)
    r = (
        problem.cost
        + problem.ineq_matrix.T @ dual_ineq
        - problem.eq_matrix.T @ dual_eq
    )
    lo, hi = problem.var_lower, problem.var_upper
    p = np.where(np.isfinite(lo), np.maximum(r, 0.0), 0.0)
    q = np.where(np.isfinite(hi), np.maximum(-r, 0.0), 0.0)
    terms = np.where(p > 0, p * np.where(np.isfinite(lo), lo, 0.0), 0.0) - np.where(
        q > 0, q * np.where(np.isfinite(hi), hi, 0.0), 0.0
    )
    return float(terms.sum())


def _check_certificates(problem: LpProblem, sol: LpSolution, cfg: LpConfig):
    x = sol.primal
    res_ineq = problem.ineq_matrix @ x - problem.ineq_rhs if problem.n_ineq else np.zeros(0)
    res_eq = problem.eq_matrix @ x - problem.eq_rhs if problem.n_eq else np.zeros(0)
    scale = 1.0 + abs(sol.objective)
    hi_viol = np.maximum(res_ineq, 0.0).max(initial=0.0)
    eq_viol = np.abs(res_eq).max(initial=0.0)
    lo_viol = np.maximum(problem.var_lower - x, 0.0)
    up_viol = np.maximum(x - problem.var_upper, 0.0)
    bnd_viol = max(lo_viol.max(initial=0.0), up_viol.max(initial=0.0))
    feas = max(hi_viol, eq_viol, bnd_viol)
    gap = abs(sol.objective - sol.dual_objective)
    if feas > 100 * cfg.feas_tol * scale or gap > 1e-6 * scale:
        raise NumericalFailure(
            f"certificate check failed: feas residual {feas:.3e}, gap {gap:.3e}"
        )


def lp_duality_gap(solution: LpSolution, problem: LpProblem) -> float:
    """|primal objective - dual objective| of an Optimal solution."""
    if solution.status is not LpStatus.OPTIMAL:
        raise ValueError("duality gap is defined for Optimal solutions only")
    dual_obj = (
        -problem.ineq_rhs @ solution.dual_ineq
        + problem.eq_rhs @ solution.dual_eq
        + _bound_terms(problem, solution.dual_ineq, solution.dual_eq)
    )
    return float(abs(problem.cost @ solution.primal - dual_obj))
