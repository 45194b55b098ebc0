"""
Forward model of the IRS-assisted uplink.

The received data is kept as the tall unfolding ``y_tall`` of shape
``(I*T*M, K)``: row ``i*T*M + t*M + m`` holds BS antenna ``m``, slot ``t``,
frame ``i``; column ``k`` is the block index.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, IndexOutOfRange, ZeroSignal
from .linalg_kernels import awgn, khatri_rao, kronecker

__all__ = ["ReceivedData", "received_slice", "assemble_tall", "assemble_tall_slices", "add_noise"]


@dataclass
class ReceivedData:
    y_tall: np.ndarray
    snr_db: float
    noise_sigma: float
    signal_power: float


def received_slice(ch, cd, sf, i, k):
    """Noiseless ``Y[i, k] = H D_k(S) G_i D_k(W) X^T`` (M x T); ``i`` and ``k`` are zero-based."""
    n_frames = len(ch.g_frames)
    n_blocks = cd.s.shape[0]
    if not 0 <= i < n_frames:
        raise IndexOutOfRange(f"frame index {i} outside [0, {n_frames})")
    if not 0 <= k < n_blocks:
        raise IndexOutOfRange(f"block index {k} outside [0, {n_blocks})")
    inner = cd.s[k][:, None] * ch.g_frames[i] * cd.w[k][None, :]
    return ch.h @ inner @ sf.x.T


def assemble_tall(ch, cd, sf):
    """``(G^T kr (X kron H)) @ psi``, the (I*T*M) x K unfolding."""
    q = kronecker(sf.x, ch.h)
    if q.shape[1] != ch.g_mat.shape[0] or cd.psi.shape[0] != q.shape[1]:
        raise DimMismatch(
            f"inconsistent P: X kron H has {q.shape[1]} columns, "
            f"G has {ch.g_mat.shape[0]} rows, psi has {cd.psi.shape[0]} rows"
        )
    return khatri_rao(ch.g_mat.T, q) @ cd.psi


def assemble_tall_slices(ch, cd, sf):
    """Same unfolding built slice by slice; used to cross-check :func:`assemble_tall`."""
    n_frames = len(ch.g_frames)
    n_blocks = cd.s.shape[0]
    cols = []
    for k in range(n_blocks):
        cols.append(np.concatenate([
            received_slice(ch, cd, sf, i, k).reshape(-1, order="F") for i in range(n_frames)
        ]))
    return np.stack(cols, axis=1)


def add_noise(y, snr_db, rng):
    """Add AWGN at a receiver-side SNR.

    The SNR is the ratio of the average per-entry power of ``y`` to the noise
    variance. ``snr_db=inf`` returns ``y`` unchanged (noiseless mode).
    """
    y = np.asarray(y)
    signal_power = float(np.mean(np.abs(y) ** 2))
    if signal_power == 0.0:
        raise ZeroSignal("cannot set an SNR on an all-zero signal")
    if np.isinf(snr_db) and snr_db > 0:
        return ReceivedData(y_tall=y.copy(), snr_db=float("inf"), noise_sigma=0.0, signal_power=signal_power)
    sigma = np.sqrt(signal_power / 10 ** (snr_db / 10))
    return ReceivedData(
        y_tall=y + awgn(y.shape, sigma, rng),
        snr_db=float(snr_db),
        noise_sigma=float(sigma),
        signal_power=signal_power,
    )
