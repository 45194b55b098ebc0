"""
Dense complex linear-algebra primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The vec/unvec
pair is column-major (Fortran order); the identity
``vec(A @ B @ C) == kron(C.T, A) @ vec(B)`` depends on it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ColumnMismatch, LengthMismatch, ZeroMatrix

__all__ = [
    "RankOneTriplet",
    "kronecker",
    "khatri_rao",
    "vec",
    "unvec",
    "dft_matrix",
    "best_rank_one",
    "awgn",
]

POWER_TOL = 1e-13
POWER_MAX_ITER = 500
# eigen-residual bound; the Rayleigh quotient alone settles long before the vector
POWER_RESID_TOL = 1e-10
# magnitude below which an entry of u is skipped by the phase convention
PHASE_FLOOR = 1e-12


@dataclass(frozen=True)
class RankOneTriplet:
    """Dominant singular triplet ``m ~ sigma * u @ v.conj().T``.

    ``n_iter`` and ``converged`` report the power iteration that produced it;
    ``converged`` is False when the iteration cap was hit (near-degenerate
    leading singular values).
    """

    sigma: float
    u: np.ndarray
    v: np.ndarray
    n_iter: int = 0
    converged: bool = True

    def matrix(self):
        return self.sigma * np.outer(self.u, self.v.conj())


def _as_matrix(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    return a


def kronecker(a, b):
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    ra, ca = a.shape
    rb, cb = b.shape
    out = a[:, None, :, None] * b[None, :, None, :]
    return out.reshape(ra * rb, ca * cb)


def khatri_rao(a, b):
    """Column-wise Kronecker product of two matrices with equal column count."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ColumnMismatch(f"khatri_rao needs equal column counts, got {a.shape[1]} and {b.shape[1]}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def vec(a):
    return np.asarray(a).reshape(-1, order="F")


def unvec(x, rows, cols):
    x = np.asarray(x)
    if x.size != rows * cols:
        raise LengthMismatch(f"cannot unvec {x.size} entries into {rows}x{cols}")
    return x.reshape(rows, cols, order="F")


def dft_matrix(k):
    """``k x k`` DFT matrix with entries ``exp(-2j*pi*r*c/k)``, zero-based."""
    if k < 1:
        raise ValueError("dft_matrix needs k >= 1")
    r = np.arange(k)
    # reduce the exponent mod k first so large k keeps full phase accuracy
    return np.exp(-2j * np.pi * (np.outer(r, r) % k) / k)


def _fix_phase(u, v):
    idx = np.flatnonzero(np.abs(u) > PHASE_FLOOR)
    if idx.size == 0:
        return u, v
    ph = u[idx[0]] / abs(u[idx[0]])
    u = u * ph.conjugate()
    u[idx[0]] = abs(u[idx[0]])
    return u, v * ph.conjugate()


def best_rank_one(m, tol=POWER_TOL, max_iter=POWER_MAX_ITER, method="power"):
    """Best rank-one approximation of ``m``.

    Parameters
    ----------
    m : array_like, shape (r, c)
        Complex matrix with nonzero Frobenius norm.
    method : {"power", "svd"}
        ``"power"`` runs power iteration on the smaller Gram matrix, so its
        cost grows with the number of iterations. ``"svd"`` takes the leading
        triplet of a LAPACK SVD, which has a fixed cost for a given shape.
    tol : float
        Stop once the relative change of the Rayleigh quotient of the Gram
        matrix drops to ``tol`` and the eigen-residual
        ``||gram x - rq x||`` is below ``POWER_RESID_TOL * rq``.
    max_iter : int
        Iteration cap. Hitting it is not an error; the returned triplet has
        ``converged=False``.

    Returns
    -------
    RankOneTriplet
        ``u`` has length ``r``, ``v`` has length ``c``, and
        ``sigma * outer(u, v.conj())`` minimizes the Frobenius error over all
        rank-one matrices. The first entry of ``u`` above ``1e-12`` in
        magnitude is real and nonnegative.

    Raises
    ------
    ZeroMatrix
        If ``m`` is identically zero.
    """
    m = _as_matrix(m)
    if not np.any(m):
        raise ZeroMatrix("best_rank_one of a zero matrix")
    if method == "svd":
        uu, ss, vh = np.linalg.svd(m, full_matrices=False)
        u, v = _fix_phase(uu[:, 0].copy(), vh[0].conj())
        return RankOneTriplet(sigma=float(ss[0]), u=u, v=v, n_iter=0, converged=True)
    if method != "power":
        raise ValueError(f"unknown method {method!r}")

    # iterate on the smaller Gram matrix; m^H = sigma v u^H swaps the roles
    flip = m.shape[0] < m.shape[1]
    a = m.conj().T if flip else m
    gram = a.conj().T @ a

    # deterministic start: one Gram step applied to the largest-norm column
    j = int(np.argmax(np.sum(np.abs(a) ** 2, axis=0)))
    x = gram[:, j]
    x = x / np.linalg.norm(x)
    rq = np.real(np.vdot(x, gram @ x))
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        y = gram @ x
        x = y / np.linalg.norm(y)
        gx = gram @ x
        rq_new = np.real(np.vdot(x, gx))
        if (abs(rq_new - rq) <= tol * abs(rq_new)
                and np.linalg.norm(gx - rq_new * x) <= POWER_RESID_TOL * abs(rq_new)):
            converged = True
            break
        rq = rq_new

    w = a @ x
    sigma = float(np.linalg.norm(w))
    left = w / sigma
    right = x
    if flip:
        # a = m^H = sigma * left @ right^H  =>  m = sigma * right @ left^H
        left, right = right, left
    u, v = _fix_phase(left.copy(), right.copy())
    return RankOneTriplet(sigma=sigma, u=u, v=v, n_iter=n_iter, converged=converged)


def awgn(shape, sigma, rng):
    """Circularly-symmetric complex Gaussian noise with per-entry variance ``sigma**2``."""
    if sigma < 0:
        raise ValueError("noise standard deviation must be nonnegative")
    if sigma == 0:
        return np.zeros(shape, dtype=complex)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (sigma / np.sqrt(2.0)) * (re + 1j * im)
