"""Grid geometry, detection factors, and belief-state recursion.

Beliefs over a V-cell grid carry V+1 slots: slot 0 is the accumulated
capture belief, slots 1..V are per-cell presence beliefs.  One time step
first propagates the cell slots through the object transition matrix,
then applies the position-dependent detection factor and re-normalizes
the capture slot so the total stays at one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionMismatch(ValueError):
    pass


class NegativeBelief(ValueError):
    """A belief entry fell below zero beyond the numerical guard."""


@dataclass(frozen=True)
class GridSpec:
    """Square grid with E edges, V = E*E cells, discounting and path limits."""

    E: int
    gamma: float = 0.95
    tau: int = 4
    d_max: float = 1.0

    def __post_init__(self):
        if self.E < 2:
            raise ValueError("grid edge length must be at least 2")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.tau < 0:
            raise ValueError("horizon must be nonnegative")
        if self.d_max <= 0:
            raise ValueError("max step length must be positive")

    @property
    def V(self) -> int:
        return self.E * self.E

    @property
    def start(self) -> np.ndarray:
        return np.array([self.E / 2.0, self.E / 2.0])

    def cell_centers(self) -> np.ndarray:
        """(V, 2) array of cell centers ((v mod E)+0.5, (v div E)+0.5)."""
        v = np.arange(self.V)
        return np.column_stack([(v % self.E) + 0.5, (v // self.E) + 0.5])

    def cell_of(self, point) -> int:
        x, y = point
        cx = min(int(x), self.E - 1)
        cy = min(int(y), self.E - 1)
        return cy * self.E + cx


@dataclass(frozen=True)
class AgentPath:
    """Positions p_0..p_tau; starts at the grid center, steps at most d_max."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.shape[1] != 2:
            raise DimensionMismatch("positions must be (tau+1, 2)")
        object.__setattr__(self, "positions", pos)

    @property
    def tau(self) -> int:
        return len(self.positions) - 1

    def validate(self, grid: GridSpec, atol: float = 1e-9):
        pos = self.positions
        if not np.allclose(pos[0], grid.start, atol=atol):
            raise ValueError(f"path must start at the grid center {grid.start}")
        steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        if steps.size and steps.max() > grid.d_max + atol:
            raise ValueError("a step exceeds the maximum travel distance")
        if pos.min() < -atol or pos.max() > grid.E + atol:
            raise ValueError("path leaves the grid bounds")
        return self


def check_transition_matrix(M: np.ndarray, V: int = None, tol: float = 1e-9) -> np.ndarray:
    """Validate a row-stochastic transition matrix and return it as float64."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"transition matrix must be square, got {M.shape}")
    if V is not None and M.shape[0] != V:
        raise DimensionMismatch(f"expected {V}x{V}, got {M.shape}")
    if M.min() < -tol or M.max() > 1.0 + tol:
        raise ValueError("transition entries must lie in [0, 1]")
    rows = M.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > tol:
        raise ValueError("transition rows must sum to one")
    return M


def project_rows_to_simplex(M: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and renormalize each row to sum to one."""
    M = np.clip(np.asarray(M, dtype=float), 0.0, 1.0)
    rows = M.sum(axis=1, keepdims=True)
    flat = rows[:, 0] <= 0
    M[flat] = 1.0 / M.shape[1]
    rows = M.sum(axis=1, keepdims=True)
    return M / rows


def initial_belief(grid: GridSpec) -> np.ndarray:
    """Uniform prior over all cells except the agent's start cell; no capture."""
    V = grid.V
    beta = np.full(V + 1, 1.0 / (V - 1))
    beta[0] = 0.0
    beta[V // 2 + 1] = 0.0
    return beta


def detection_factor(grid: GridSpec, p) -> np.ndarray:
    """Per-cell retention factor: scaled Manhattan distance to the agent."""
    p = np.asarray(p, dtype=float)
    centers = grid.cell_centers()
    return (np.abs(centers[:, 0] - p[0]) + np.abs(centers[:, 1] - p[1])) / (grid.V - 1)


def propagate(beta: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Posterior alpha_v = sum_u M_uv beta_u over the non-captured slots."""
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or len(beta) != M.shape[0] + 1:
        raise DimensionMismatch(
            f"prior belief length {beta.shape} does not match transition {M.shape}"
        )
    return M.T @ beta[1:]


def detect_update(alpha_post: np.ndarray, d_vec: np.ndarray, prev_capture: float) -> np.ndarray:
    """Apply the detection factor and fold removed mass into slot 0."""
    alpha_post = np.asarray(alpha_post, dtype=float)
    d_vec = np.asarray(d_vec, dtype=float)
    if alpha_post.shape != d_vec.shape:
        raise DimensionMismatch("posterior and detection factor sizes differ")
    cells = alpha_post * d_vec
    if cells.min(initial=0.0) < -1e-12:
        raise NegativeBelief(f"negative cell belief {cells.min():.3e}")
    beta = np.empty(len(cells) + 1)
    beta[1:] = np.maximum(cells, 0.0)
    beta[0] = 1.0 - beta[1:].sum()
    if beta[0] < prev_capture - 1e-9:
        raise NegativeBelief("capture slot decreased beyond tolerance")
    if beta[0] < 0.0:
        if beta[0] < -1e-12:
            raise NegativeBelief(f"negative capture belief {beta[0]:.3e}")
        beta[0] = 0.0
    return beta


def rollout_beliefs(grid: GridSpec, path: AgentPath, Ms) -> list:
    """Per-object belief sequences beta^0..beta^tau along a fixed path.

    Each step propagates through the object's transition matrix, then
    applies the detection factor of the agent position at that step.
    """
    path.validate(grid)
    out = []
    d_vecs = [detection_factor(grid, p) for p in path.positions]
    for M in Ms:
        M = check_transition_matrix(M, grid.V)
        seq = np.empty((path.tau + 1, grid.V + 1))
        seq[0] = initial_belief(grid)
        for t in range(1, path.tau + 1):
            alpha = propagate(seq[t - 1], M)
            seq[t] = detect_update(alpha, d_vecs[t], seq[t - 1, 0])
        out.append(seq)
    return out


def beliefs_to_csv(sequences) -> str:
    """CSV export (object, t, slot, value), one row per entry."""
    lines = ["object,t,slot,value"]
    for i, seq in enumerate(sequences):
        for t, row in enumerate(np.atleast_2d(seq)):
            for slot, val in enumerate(row):
                lines.append(f"{i},{t},{slot},{val!r}")
    return "\n".join(lines) + "\n"
