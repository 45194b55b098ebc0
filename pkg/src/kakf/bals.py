"""
Pilot-assisted bilinear alternating least squares (BALS) baseline.

With every symbol known, each slice ``Y[i, k] = H D_k(S) G_i D_k(W) X^T`` is
bilinear in ``(H, G_i)``. The iteration alternates two exact LS solves:

* G-step: ``vec(Y[i, k]) = (X D_k(W) kron H D_k(S)) vec(G_i)`` stacked over k.
  The regressor does not depend on i, so all frames are one multi-RHS solve.
* H-step: ``Y[i, k] = H (D_k(S) G_i D_k(W) X^T)`` stacked over (i, k).

``H`` and ``G_i`` are only identified up to ``H diag(c)``, ``diag(c)^-1 G_i``;
:func:`resolve_scaling` removes that with the known first row of ``H``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficientStep, ZeroAnchor
from .linalg_kernels import kronecker, vec

__all__ = ["BalsConfig", "BalsResult", "bals_estimate", "resolve_scaling"]

RANK_RCOND = 1e-10
# relative cost below which the fit is treated as exact
EXACT_FIT = 1e-12


@dataclass(frozen=True)
class BalsConfig:
    max_iter: int = 1000
    tol: float = 1e-6
    init: str = "random"  # "random" or "provided"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.init not in ("random", "provided"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class BalsResult:
    h_hat: np.ndarray
    g_frames_hat: list
    iters: int
    cost_trace: np.ndarray
    converged: bool

    @property
    def g_mat(self):
        return np.stack([vec(g) for g in self.g_frames_hat], axis=1)


def _lstsq(a, b, step):
    sol, _, rank, _ = np.linalg.lstsq(a, b, rcond=RANK_RCOND)
    if rank < a.shape[1]:
        raise RankDeficientStep(step, rank, a.shape[1])
    return sol


def bals_estimate(rd, cd, x_pilot, dims, cfg=BalsConfig(), rng=None, h_init=None):
    """Estimate ``H`` and every ``G_i`` with all of ``X`` known.

    Parameters
    ----------
    rd : ReceivedData or ndarray
        Tall unfolding of the received data, shape (I*T*M, K).
    cd : CodingDesign
    x_pilot : ndarray, shape (T, UL)
    dims : SystemDims
    cfg : BalsConfig
    rng : numpy.random.Generator, optional
        Used for the CN(0, 1) initial ``H`` when ``cfg.init == "random"``.
    h_init : ndarray, optional
        Starting ``H`` when ``cfg.init == "provided"``.

    Returns
    -------
    BalsResult
        ``cost_trace[n]`` is ``||Y - reconstruction||_F`` after iteration n+1.
        ``converged`` is False when ``max_iter`` was reached.
    """
    m, n, t, k, i_frames, ul = dims.m_bs, dims.n_irs, dims.t_slots, dims.k_blocks, dims.i_frames, dims.ul
    y = rd.y_tall if hasattr(rd, "y_tall") else np.asarray(rd)
    tm = t * m
    x = np.asarray(x_pilot)

    if cfg.init == "provided":
        if h_init is None:
            raise ValueError("init='provided' needs h_init")
        h = np.array(h_init, dtype=complex)
    else:
        rng = np.random.default_rng() if rng is None else rng
        h = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2.0)

    # G-step right-hand side: frame i is column i, rows ordered (k, t, m)
    b_g = y.reshape(i_frames, tm, k).transpose(2, 1, 0).reshape(k * tm, i_frames)
    # H-step left-hand side: M x (I K T) concatenation of the slices
    y_cat = y.reshape(i_frames, t, m, k).transpose(2, 0, 3, 1).reshape(m, i_frames * k * t)
    y_norm = np.linalg.norm(y)

    costs = []
    converged = False
    g_mat = None
    it = 0
    for it in range(1, cfg.max_iter + 1):
        q = kronecker(x, h)
        a_g = (cd.psi.T[:, None, :] * q[None, :, :]).reshape(k * tm, -1)
        g_mat = _lstsq(a_g, b_g, "G")

        g_frames = g_mat.T.reshape(i_frames, ul, n).transpose(0, 2, 1)  # [i, n, j]
        inner = cd.s[None, :, :, None] * g_frames[:, None, :, :] * cd.w[None, :, None, :]
        b_cat = (inner @ x.T).transpose(2, 0, 1, 3).reshape(n, i_frames * k * t)
        h = _lstsq(b_cat.T, y_cat.T, "H").T

        cost = float(np.linalg.norm(y_cat - h @ b_cat))
        prev = costs[-1] if costs else None
        costs.append(cost)
        if cost <= EXACT_FIT * y_norm:
            converged = True
            break
        if prev is not None and abs(prev - cost) / prev < cfg.tol:
            converged = True
            break

    g_frames_hat = [g_mat[:, i].reshape(ul, n).T for i in range(i_frames)]
    return BalsResult(h_hat=h, g_frames_hat=g_frames_hat, iters=it, cost_trace=np.array(costs), converged=converged)


def resolve_scaling(h_hat, g_frames_hat, h_row1):
    """Fix the per-IRS-element scaling with the known first row of ``H``.

    ``H_hat[:, n] *= c_n`` and ``G_i[n, :] /= c_n`` with
    ``c_n = h_row1[n] / H_hat[0, n]``.
    """
    first = h_hat[0]
    if np.any(first == 0):
        raise ZeroAnchor("estimated first row of H has a zero entry")
    c = np.asarray(h_row1) / first
    return h_hat * c[None, :], [g / c[:, None] for g in g_frames_hat]
