"""
Ground-truth generation for one simulation trial.

Geometry: every array (BS, IRS, UT) is a half-wavelength uniform linear
array. Path gains are CN(0, 1) and all angles are uniform on [0, 2*pi).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IdentifiabilityViolation, InvalidDims, TooFewSlots
from .linalg_kernels import khatri_rao, vec

__all__ = [
    "PSK16",
    "ANCHOR_SYMBOL",
    "SystemDims",
    "ChannelSet",
    "CodingDesign",
    "SymbolFrame",
    "psk_constellation",
    "gen_steering",
    "gen_channels",
    "gen_symbols",
    "build_design",
]


def psk_constellation(order=16):
    """Offset PSK points ``exp(j*pi*(2q+1)/order)``, q = 0..order-1."""
    q = np.arange(order)
    return np.exp(1j * np.pi * (2 * q + 1) / order)


PSK16 = psk_constellation(16)
ANCHOR_SYMBOL = PSK16[0]


@dataclass(frozen=True)
class SystemDims:
    """Integer dimensions of the uplink.

    ``k_blocks >= p`` (with ``p = n_irs * l_ut * n_users``) is enforced at
    construction.
    """

    m_bs: int
    n_irs: int
    n_users: int
    l_ut: int
    k_blocks: int
    t_slots: int
    i_frames: int
    l_h: int = 1
    l_g: int = 1

    def __post_init__(self):
        for name in ("m_bs", "n_irs", "n_users", "l_ut", "k_blocks", "t_slots", "i_frames", "l_h", "l_g"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise InvalidDims(f"{name} must be a positive integer, got {val!r}")
        if self.l_h > min(self.m_bs, self.n_irs):
            raise InvalidDims(f"l_h={self.l_h} exceeds min(M, N)={min(self.m_bs, self.n_irs)}")
        if self.l_g > min(self.n_irs, self.l_ut):
            raise InvalidDims(f"l_g={self.l_g} exceeds min(N, L)={min(self.n_irs, self.l_ut)}")
        if self.k_blocks < self.p:
            raise IdentifiabilityViolation(self.k_blocks, self.p)

    @property
    def ul(self):
        return self.n_users * self.l_ut

    @property
    def p(self):
        return self.n_irs * self.l_ut * self.n_users

    @property
    def rate(self):
        """Per-UT transmission rate 4L(T-1)/(KT) for 16-PSK with one anchor slot."""
        return 4 * self.l_ut * (self.t_slots - 1) / (self.k_blocks * self.t_slots)

    def as_dict(self):
        return {
            "m_bs": self.m_bs,
            "n_irs": self.n_irs,
            "n_users": self.n_users,
            "l_ut": self.l_ut,
            "k_blocks": self.k_blocks,
            "t_slots": self.t_slots,
            "i_frames": self.i_frames,
            "l_h": self.l_h,
            "l_g": self.l_g,
        }


@dataclass
class ChannelSet:
    h: np.ndarray  # M x N
    g_frames: list  # I matrices, each N x UL
    g_mat: np.ndarray = field(default=None)  # P x I, column i = vec(G_i)

    def __post_init__(self):
        if self.g_mat is None:
            self.g_mat = np.stack([vec(g) for g in self.g_frames], axis=1)

    def user_block(self, i, u, l_ut):
        return self.g_frames[i][:, u * l_ut:(u + 1) * l_ut]


@dataclass
class CodingDesign:
    s: np.ndarray  # K x N, IRS phase shifts
    w: np.ndarray  # K x UL, UT coding
    psi: np.ndarray  # P x K, khatri_rao(w.T, s.T)


@dataclass
class SymbolFrame:
    x: np.ndarray  # T x UL

    @property
    def anchor_row(self):
        return self.x[0]

    def data_mask(self):
        """Boolean mask of the symbols that carry data (every row except the anchor)."""
        mask = np.ones(self.x.shape, dtype=bool)
        mask[0] = False
        return mask


def gen_steering(angles, n_elems):
    """Half-wavelength ULA responses, one column per angle."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    n = np.arange(n_elems)[:, None]
    return np.exp(1j * np.pi * n * np.sin(angles)[None, :])


def _cn(rng, size):
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def _geometric(rng, n_rows, n_cols, n_paths):
    """``A diag(gains) B^H`` with rows on an n_rows-ULA and columns on an n_cols-ULA."""
    gains = _cn(rng, n_paths)
    a_rows = gen_steering(rng.uniform(0.0, 2 * np.pi, n_paths), n_rows)
    a_cols = gen_steering(rng.uniform(0.0, 2 * np.pi, n_paths), n_cols)
    return (a_rows * gains) @ a_cols.conj().T


def gen_channels(dims, rng):
    """Draw the quasi-static IRS-BS channel and I independent frames of UT-IRS channels.

    ``h`` is M x N (BS rows, IRS columns). Each per-user block
    ``G_{u,i}`` is N x L (IRS rows, UT antenna columns) and ``g_frames[i]``
    concatenates the U blocks horizontally.
    """
    h = _geometric(rng, dims.m_bs, dims.n_irs, dims.l_h)
    g_frames = []
    for _ in range(dims.i_frames):
        blocks = [_geometric(rng, dims.n_irs, dims.l_ut, dims.l_g) for _ in range(dims.n_users)]
        g_frames.append(np.hstack(blocks))
    return ChannelSet(h=h, g_frames=g_frames)


def gen_symbols(dims, rng, constellation=PSK16):
    if dims.t_slots < 2:
        raise TooFewSlots(f"need T >= 2 (one anchor row plus data), got T={dims.t_slots}")
    idx = rng.integers(0, len(constellation), size=(dims.t_slots - 1, dims.ul))
    x = np.empty((dims.t_slots, dims.ul), dtype=complex)
    x[0] = constellation[0]
    x[1:] = constellation[idx]
    return SymbolFrame(x=x)


def build_design(dims):
    """DFT-based IRS phase and UT coding matrices with row-orthogonal ``psi``.

    ``S[k, n] = w^(k n)`` and ``W[k, j] = w^(k j N)`` with ``w = exp(-2j pi / K)``,
    so row ``j*N + n`` of ``psi`` is row ``j*N + n`` of the K-point DFT.
    """
    k, n, ul = dims.k_blocks, dims.n_irs, dims.ul
    if k < dims.p:
        raise IdentifiabilityViolation(k, dims.p)
    kk = np.arange(k)[:, None]
    s = np.exp(-2j * np.pi * ((kk * np.arange(n)[None, :]) % k) / k)
    w = np.exp(-2j * np.pi * ((kk * np.arange(ul)[None, :] * n) % k) / k)
    psi = khatri_rao(w.T, s.T)
    return CodingDesign(s=s, w=w, psi=psi)
