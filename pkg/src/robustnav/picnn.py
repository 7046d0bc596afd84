"""Partially input-convex score network and its polytope embedding.

The score g(x, M) is convex in M for any fixed context x as long as the
convex-path mixing weights stay elementwise nonnegative.  The sublevel set
{M : g(x, M) <= q} admits a linear relaxation A k <= b over the stacked
vector k = [M, sigma_1, ..., sigma_L], obtained by splitting each ReLU
equality into the two defining inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class ShapeMismatch(ValueError):
    """Input dimensions do not match the network parameters."""


@dataclass(frozen=True)
class PicnnParams:
    """Weights of an L-layer partially input-convex network.

    Layer l = 0..L-1 computes the recursions
        u_{l+1}     = relu(R_l u_l + r_l)
        sigma_{l+1} = relu(W_l sigma_l + V_l M + b_l)
    with context-modulated weights
        W_l = W_bar_l diag(relu(W_hat_l u_l + w_off_l))   (W_bar_l >= 0)
        V_l = V_bar_l diag(V_hat_l u_l + v_off_l)
        b_l = B_bar_l u_l + b_off_l
    and the final score is W_L sigma_L + V_L M + b_L
    + compactness_epsilon * ||M||^2.
    """

    layers: int
    hidden_dim: int
    context_dim: int
    convex_input_dim: int
    R: tuple
    r: tuple
    W_bar: tuple
    W_hat: tuple
    w_off: tuple
    V_bar: tuple
    V_hat: tuple
    v_off: tuple
    B_bar: tuple
    b_off: tuple
    compactness_epsilon: float = 0.0

    def __post_init__(self):
        L, d, du, V = self.layers, self.hidden_dim, self.context_dim, self.convex_input_dim
        if L < 1 or d < 1 or du < 1 or V < 1:
            raise ShapeMismatch("layers, hidden_dim, context_dim, convex_input_dim must be >= 1")
        if len(self.R) != L or len(self.r) != L:
            raise ShapeMismatch("context path needs one (R, r) pair per layer 0..L-1")
        for group in ("W_bar", "W_hat", "w_off", "V_bar", "V_hat", "v_off", "B_bar", "b_off"):
            if len(getattr(self, group)) != L + 1:
                raise ShapeMismatch(f"{group} needs L+1 entries (layers 0..L)")
        for l in range(L + 1):
            out = d if l < L else 1
            checks = [
                (self.W_bar[l], (out, d)),
                (self.W_hat[l], (d, du)),
                (self.w_off[l], (d,)),
                (self.V_bar[l], (out, V)),
                (self.V_hat[l], (V, du)),
                (self.v_off[l], (V,)),
                (self.B_bar[l], (out, du)),
                (self.b_off[l], (out,)),
            ]
            if l < L:
                checks += [(self.R[l], (du, du)), (self.r[l], (du,))]
            for arr, shape in checks:
                if np.asarray(arr).shape != shape:
                    raise ShapeMismatch(
                        f"layer {l}: expected shape {shape}, got {np.asarray(arr).shape}"
                    )

    @property
    def convexity_ok(self) -> bool:
        return all(np.all(W >= 0.0) for W in self.W_bar)


@dataclass
class PicnnActivations:
    """Context path u_0..u_L, convex path sigma_0..sigma_L, and the score."""

    u: list
    sigma: list
    score: np.ndarray

    def stacked_k(self, M_flat: np.ndarray) -> np.ndarray:
        """k = [M, sigma_1, ..., sigma_L] matching the embedding columns."""
        return np.concatenate([np.atleast_1d(M_flat)] + [np.atleast_1d(s) for s in self.sigma[1:]])


@dataclass(frozen=True)
class EpigraphEmbedding:
    """Linear relaxation A k <= b of the score sublevel set at threshold q."""

    A: np.ndarray
    b: np.ndarray
    layers: int
    hidden_dim: int
    convex_input_dim: int
    q: float

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]


def random_params(
    layers: int,
    hidden_dim: int,
    context_dim: int,
    convex_input_dim: int,
    seed: int = 0,
    compactness_epsilon: float = 0.0,
) -> PicnnParams:
    """Seeded init: mixing weights uniform in [0, 0.5], the rest +/-0.5/sqrt(d)."""
    rng = np.random.default_rng(seed)
    L, d, du, V = layers, hidden_dim, context_dim, convex_input_dim
    s = 0.5 / np.sqrt(d)

    def sym(*shape):
        return rng.uniform(-s, s, size=shape)

    R, r = [], []
    W_bar, W_hat, w_off = [], [], []
    V_bar, V_hat, v_off = [], [], []
    B_bar, b_off = [], []
    for l in range(L + 1):
        out = d if l < L else 1
        if l < L:
            R.append(sym(du, du))
            r.append(sym(du))
        W_bar.append(rng.uniform(0.0, 0.5, size=(out, d)))
        W_hat.append(sym(d, du))
        w_off.append(sym(d))
        V_bar.append(sym(out, V))
        V_hat.append(sym(V, du))
        v_off.append(sym(V))
        B_bar.append(sym(out, du))
        b_off.append(sym(out))
    return PicnnParams(
        layers=L,
        hidden_dim=d,
        context_dim=du,
        convex_input_dim=V,
        R=tuple(R),
        r=tuple(r),
        W_bar=tuple(W_bar),
        W_hat=tuple(W_hat),
        w_off=tuple(w_off),
        V_bar=tuple(V_bar),
        V_hat=tuple(V_hat),
        v_off=tuple(v_off),
        B_bar=tuple(B_bar),
        b_off=tuple(b_off),
        compactness_epsilon=float(compactness_epsilon),
    )


def _relu(a):
    return np.maximum(a, 0.0)


def picnn_forward(params: PicnnParams, x: np.ndarray, M_flat: np.ndarray) -> PicnnActivations:
    """Evaluate the score; accepts a single sample or a leading batch axis."""
    x = np.asarray(x, dtype=float)
    M = np.asarray(M_flat, dtype=float)
    if x.shape[-1] != params.context_dim:
        raise ShapeMismatch(f"context dim {x.shape[-1]} != {params.context_dim}")
    if M.shape[-1] != params.convex_input_dim:
        raise ShapeMismatch(f"convex input dim {M.shape[-1]} != {params.convex_input_dim}")
    batched = x.ndim == 2 or M.ndim == 2
    xb = np.atleast_2d(x)
    Mb = np.atleast_2d(M)
    if xb.shape[0] != Mb.shape[0]:
        if xb.shape[0] == 1:
            xb = np.broadcast_to(xb, (Mb.shape[0], xb.shape[1]))
        elif Mb.shape[0] == 1:
            Mb = np.broadcast_to(Mb, (xb.shape[0], Mb.shape[1]))
        else:
            raise ShapeMismatch("batch sizes of x and M differ")

    L, d = params.layers, params.hidden_dim
    u = [xb]
    sigma = [np.zeros((xb.shape[0], d))]
    for l in range(L + 1):
        ul = u[l]
        gate = _relu(ul @ params.W_hat[l].T + params.w_off[l])          # (B, d)
        vmod = ul @ params.V_hat[l].T + params.v_off[l]                 # (B, V)
        bias = ul @ params.B_bar[l].T + params.b_off[l]                 # (B, out)
        pre = (sigma[l] * gate) @ params.W_bar[l].T + (Mb * vmod) @ params.V_bar[l].T + bias
        if l < L:
            sigma.append(_relu(pre))
            u.append(_relu(ul @ params.R[l].T + params.r[l]))
        else:
            score = pre[:, 0] + params.compactness_epsilon * np.sum(Mb * Mb, axis=1)

    if not batched:
        u = [a[0] for a in u]
        sigma = [s[0] for s in sigma]
        score = score[0]
    return PicnnActivations(u=u, sigma=sigma, score=score)


def picnn_score(params: PicnnParams, x: np.ndarray, M_flat: np.ndarray) -> np.ndarray:
    return picnn_forward(params, x, M_flat).score


def matrix_score(params: PicnnParams, x: np.ndarray, M: np.ndarray) -> float:
    """Score a whole V x V transition matrix as the max over its column scores."""
    V = params.convex_input_dim
    M = np.asarray(M, dtype=float)
    if M.shape != (V, V):
        raise ShapeMismatch(f"expected a {V}x{V} matrix, got {M.shape}")
    return float(np.max(picnn_forward(params, x, M.T).score))


def context_weights(params: PicnnParams, x: np.ndarray):
    """Materialize the x-conditioned layer matrices (W_l, V_l, b_l) for l = 0..L."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.context_dim,):
        raise ShapeMismatch("context_weights expects a single context vector")
    Ws, Vs, bs = [], [], []
    ul = x
    for l in range(params.layers + 1):
        gate = _relu(params.W_hat[l] @ ul + params.w_off[l])
        Ws.append(params.W_bar[l] * gate[None, :])
        Vs.append(params.V_bar[l] * (params.V_hat[l] @ ul + params.v_off[l])[None, :])
        bs.append(params.B_bar[l] @ ul + params.b_off[l])
        if l < params.layers:
            ul = _relu(params.R[l] @ ul + params.r[l])
    return Ws, Vs, bs


def picnn_embed(params: PicnnParams, x: np.ndarray, q: float) -> EpigraphEmbedding:
    """Assemble the relaxed sublevel polytope A k <= b at threshold q.

    Columns of A are [M (V), sigma_1 (d), ..., sigma_L (d)].  The first
    L*d rows encode sigma_l >= 0, the next L*d rows the layer inequalities
    sigma_{l+1} >= W_l sigma_l + V_l M + b_l, and the last row the
    threshold W_L sigma_L + V_L M <= q - b_L.
    """
    if not np.isfinite(q):
        raise ValueError("embedding requires a finite threshold q")
    L, d, V = params.layers, params.hidden_dim, params.convex_input_dim
    Ws, Vs, bs = context_weights(params, x)
    n_rows = 2 * L * d + 1
    n_cols = V + L * d
    A = np.zeros((n_rows, n_cols))
    b = np.zeros(n_rows)

    for l in range(1, L + 1):
        rows = slice((l - 1) * d, l * d)
        cols = slice(V + (l - 1) * d, V + l * d)
        A[rows, cols] = -np.eye(d)

    for l in range(L):
        rows = slice(L * d + l * d, L * d + (l + 1) * d)
        A[rows, :V] = Vs[l]
        if l >= 1:
            A[rows, V + (l - 1) * d: V + l * d] = Ws[l]
        A[rows, V + l * d: V + (l + 1) * d] -= np.eye(d)
        b[L * d + l * d: L * d + (l + 1) * d] = -bs[l]

    A[-1, :V] = Vs[L][0]
    A[-1, V + (L - 1) * d:] = Ws[L][0]
    b[-1] = q - bs[L][0]
    return EpigraphEmbedding(
        A=A, b=b, layers=L, hidden_dim=d, convex_input_dim=V, q=float(q)
    )


def picnn_project_weights(params: PicnnParams) -> PicnnParams:
    """Clamp the convex-path mixing weights to be elementwise nonnegative."""
    return replace(params, W_bar=tuple(np.maximum(W, 0.0) for W in params.W_bar))


# ---------------------------------------------------------------------------
# parameter serialization: shape header + row-major hex-float blocks

_FIELDS = ("R", "r", "W_bar", "W_hat", "w_off", "V_bar", "V_hat", "v_off", "B_bar", "b_off")


def save_params(path: str, params: PicnnParams) -> None:
    lines = [
        "picnn-params v1",
        f"layers {params.layers} hidden {params.hidden_dim} "
        f"context {params.context_dim} convex {params.convex_input_dim} "
        f"epsilon {float(params.compactness_epsilon).hex()}",
    ]
    for name in _FIELDS:
        for l, arr in enumerate(getattr(params, name)):
            arr = np.asarray(arr, dtype=float)
            shape = " ".join(str(s) for s in arr.shape)
            lines.append(f"tensor {name} {l} {len(arr.shape)} {shape}")
            lines.append(" ".join(v.hex() for v in arr.ravel()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path: str) -> PicnnParams:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "picnn-params v1":
        raise ValueError(f"{path} is not a picnn parameter file")
    head = lines[1].split()
    meta = {head[i]: head[i + 1] for i in range(0, len(head), 2)}
    fields = {name: {} for name in _FIELDS}
    i = 2
    while i < len(lines):
        tag, name, l, ndim, *shape = lines[i].split()
        assert tag == "tensor"
        shape = tuple(int(s) for s in shape[: int(ndim)])
        values = np.array([float.fromhex(tok) for tok in lines[i + 1].split()])
        fields[name][int(l)] = values.reshape(shape)
        i += 2
    ordered = {
        name: tuple(fields[name][l] for l in sorted(fields[name])) for name in _FIELDS
    }
    return PicnnParams(
        layers=int(meta["layers"]),
        hidden_dim=int(meta["hidden"]),
        context_dim=int(meta["context"]),
        convex_input_dim=int(meta["convex"]),
        compactness_epsilon=float.fromhex(meta["epsilon"]),
        **ordered,
    )
