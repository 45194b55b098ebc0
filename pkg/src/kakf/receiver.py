"""
Two-stage closed-form semi-blind receiver (Khatri-Rao then Kronecker factorization).

Pipeline::

    y_tall --match_filter--> Z = G^T kr Q  (+ noise)
           --krf_stage-----> G_hat (P x I), Q_hat (TM x P)   per-column rank-one fits
           --remove_ambiguity_krf--> column scalings fixed by the known row 1 of Q
           --kf_stage------> X_raw, H_raw                    one rank-one fit of rearranged Q_hat
           --remove_ambiguity_kf---> global scalar fixed by the known row 1 of X
           --detect_symbols

Row 1 of Q is ``X[0, :] kron H[0, :]``; the receiver knows both rows as side
information.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AnchorTooSmall,
    DegenerateInput,
    DimMismatch,
    IdentifiabilityViolation,
    ZeroAnchor,
    ZeroMatrix,
)
from .linalg_kernels import best_rank_one, kronecker, unvec
from .scenario import PSK16

__all__ = [
    "ANCHOR_FLOOR",
    "RANK_ONE_METHOD",
    "KrfOutput",
    "KakfEstimate",
    "SideInfo",
    "match_filter",
    "krf_stage",
    "kf_rearrange",
    "kf_stage",
    "remove_ambiguity_krf",
    "remove_ambiguity_kf",
    "detect_symbols",
    "kakf_run",
]

ANCHOR_FLOOR = 1e-9
# fixed-cost LAPACK route keeps the receiver runtime independent of SNR
RANK_ONE_METHOD = "svd"


@dataclass
class KrfOutput:
    g_hat: np.ndarray  # P x I
    q_hat: np.ndarray  # TM x P
    per_column_residual: np.ndarray  # length P
    n_iter: np.ndarray = None  # power iterations per column
    degenerate: list = field(default_factory=list)  # columns with an all-zero filtered vector
    skipped: list = field(default_factory=list)  # columns whose anchor was too small

    def copy(self):
        return KrfOutput(
            g_hat=self.g_hat.copy(),
            q_hat=self.q_hat.copy(),
            per_column_residual=self.per_column_residual.copy(),
            n_iter=None if self.n_iter is None else self.n_iter.copy(),
            degenerate=list(self.degenerate),
            skipped=list(self.skipped),
        )


@dataclass
class SideInfo:
    """What the receiver knows beyond S and W: row 1 of H and the anchor row of X."""

    h_row1: np.ndarray
    x_anchor: np.ndarray

    @property
    def q_row1(self):
        return kronecker(self.x_anchor[None, :], self.h_row1[None, :])[0]


@dataclass
class KakfEstimate:
    g_hat: np.ndarray  # P x I, column i = vec(G_i)
    h_hat: np.ndarray  # M x N
    x_hat: np.ndarray  # T x UL, soft estimates
    x_detected: np.ndarray  # T x UL, constellation points
    diagnostics: dict

    def g_frames(self, n_irs):
        return [unvec(self.g_hat[:, i], n_irs, self.g_hat.shape[0] // n_irs) for i in range(self.g_hat.shape[1])]


def match_filter(rd, cd):
    """``Z = y_tall @ psi^H / K``; exact inverse of the design when ``psi psi^H = K I``."""
    psi = cd.psi
    p, k = psi.shape
    if k < p:
        raise IdentifiabilityViolation(k, p)
    y = rd.y_tall if hasattr(rd, "y_tall") else np.asarray(rd)
    if y.shape[1] != k:
        raise DimMismatch(f"received data has {y.shape[1]} blocks, design has {k}")
    return (y @ psi.conj().T) / k


def _fit_column(z_col, tm, i_frames, method):
    if not np.any(z_col):
        return None
    t = best_rank_one(unvec(z_col, tm, i_frames), method=method)
    root = np.sqrt(t.sigma)
    resid = max(float(np.sum(np.abs(z_col) ** 2)) - t.sigma ** 2, 0.0)
    return root * t.u, root * t.v.conj(), resid, t.n_iter


def krf_stage(z, dims, workers=None, method=RANK_ONE_METHOD):
    """Factor each column of ``z`` as ``g_p kron q_p`` with a rank-one fit.

    Column ``p`` of ``z`` is reshaped to the (TM) x I matrix ``q_p g_p^T``.
    The P fits are independent; ``workers > 1`` runs them on a thread pool
    and writes each result to its own slot, so the output does not depend on
    scheduling. All-zero columns get zero factors and are listed in
    ``degenerate``.
    """
    tm = dims.t_slots * dims.m_bs
    i_frames = dims.i_frames
    z = np.asarray(z)
    if z.shape != (i_frames * tm, dims.p):
        raise DimMismatch(f"expected Z of shape {(i_frames * tm, dims.p)}, got {z.shape}")
    p = z.shape[1]
    g_hat = np.zeros((p, i_frames), dtype=complex)
    q_hat = np.zeros((tm, p), dtype=complex)
    resid = np.zeros(p)
    n_iter = np.zeros(p, dtype=int)
    degenerate = []

    cols = range(p)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(lambda c: _fit_column(z[:, c], tm, i_frames, method), cols))
    else:
        fits = [_fit_column(z[:, c], tm, i_frames, method) for c in cols]

    for c, fit in enumerate(fits):
        if fit is None:
            degenerate.append(c)
            continue
        q_hat[:, c], g_hat[c], resid[c], n_iter[c] = fit
    return KrfOutput(g_hat=g_hat, q_hat=q_hat, per_column_residual=resid, n_iter=n_iter, degenerate=degenerate)


def kf_rearrange(q_hat, dims):
    """Stack vec of every M x N block of ``q_hat`` as a row.

    Block ``(t, j)`` lands in row ``j*T + t``, so ``X kron H`` maps to
    ``outer(vec(X), vec(H))``.
    """
    t, m, n, ul = dims.t_slots, dims.m_bs, dims.n_irs, dims.ul
    q_hat = np.asarray(q_hat)
    if q_hat.shape != (t * m, ul * n):
        raise DimMismatch(f"expected Q_hat of shape {(t * m, ul * n)}, got {q_hat.shape}")
    blocks = q_hat.reshape(t, m, ul, n)  # [t, m, j, n]
    return blocks.transpose(2, 0, 3, 1).reshape(ul * t, n * m)


def kf_stage(q_hat, dims, method=RANK_ONE_METHOD):
    """Nearest Kronecker product ``X kron H`` to ``q_hat``, up to one complex scalar.

    Returns ``(x_raw, h_raw, triplet)``.
    """
    try:
        trip = best_rank_one(kf_rearrange(q_hat, dims), method=method)
    except ZeroMatrix as exc:
        raise DegenerateInput("Q_hat is identically zero") from exc
    root = np.sqrt(trip.sigma)
    x_raw = unvec(root * trip.u, dims.t_slots, dims.ul)
    h_raw = unvec(root * trip.v.conj(), dims.m_bs, dims.n_irs)
    return x_raw, h_raw, trip


def remove_ambiguity_krf(krf, known_q_row1, raise_on_small=False):
    """Rescale each column pair so row 1 of ``q_hat`` matches the known row.

    Columns whose known entry is below ``ANCHOR_FLOOR`` in magnitude are left
    untouched and listed in ``skipped`` (or raise :class:`AnchorTooSmall`
    when ``raise_on_small``).
    """
    known = np.asarray(known_q_row1)
    out = krf.copy()
    for p in range(out.q_hat.shape[1]):
        if abs(known[p]) < ANCHOR_FLOOR:
            if raise_on_small:
                raise AnchorTooSmall(p, abs(known[p]))
            out.skipped.append(p)
            continue
        delta = out.q_hat[0, p] / known[p]
        if delta == 0:
            out.skipped.append(p)
            continue
        out.q_hat[:, p] /= delta
        out.g_hat[p] *= delta
    return out


def remove_ambiguity_kf(x_raw, h_raw, anchor_row_x):
    """Least-squares scalar ``lam`` with ``x_raw[0] ~ lam * anchor``; returns ``(x_raw/lam, h_raw*lam)``."""
    anchor = np.asarray(anchor_row_x)
    energy = float(np.sum(np.abs(anchor) ** 2))
    if energy == 0.0:
        raise ZeroAnchor("anchor row of X is all zeros")
    lam = np.vdot(anchor, x_raw[0]) / energy
    if lam == 0:
        raise ZeroAnchor("estimated symbol row 1 is orthogonal to the anchor")
    return x_raw / lam, h_raw * lam


def detect_symbols(x_hat, constellation=PSK16, return_indices=False):
    """Nearest-point hard decisions; ties go to the lower constellation index."""
    x_hat = np.asarray(x_hat)
    constellation = np.asarray(constellation)
    dist = np.abs(x_hat[..., None] - constellation)
    idx = np.argmin(dist, axis=-1)
    if return_indices:
        return idx
    return constellation[idx]


def kakf_run(rd, cd, side_info, dims, constellation=PSK16, workers=None, method=RANK_ONE_METHOD):
    """Run the full receiver on one block of received data.

    The known rows are written back into ``x_hat`` and ``h_hat`` after the
    scalar correction.
    """
    if cd.psi.shape[1] < cd.psi.shape[0]:
        raise IdentifiabilityViolation(cd.psi.shape[1], cd.psi.shape[0])
    z = match_filter(rd, cd)
    krf_raw = krf_stage(z, dims, workers=workers, method=method)
    krf = remove_ambiguity_krf(krf_raw, side_info.q_row1)
    x_raw, h_raw, trip = kf_stage(krf.q_hat, dims, method=method)
    x_hat, h_hat = remove_ambiguity_kf(x_raw, h_raw, side_info.x_anchor)
    x_hat[0] = side_info.x_anchor
    h_hat[0] = side_info.h_row1
    diagnostics = {
        "krf_residual": krf.per_column_residual,
        "krf_iterations": krf.n_iter,
        "kf_iterations": trip.n_iter,
        "kf_converged": trip.converged,
        "degenerate_columns": krf.degenerate,
        "skipped_columns": krf.skipped,
    }
    return KakfEstimate(
        g_hat=krf.g_hat,
        h_hat=h_hat,
        x_hat=x_hat,
        x_detected=detect_symbols(x_hat, constellation),
        diagnostics=diagnostics,
    )
