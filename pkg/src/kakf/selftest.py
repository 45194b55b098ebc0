"""Quick property checks on desk-scale dimensions, run by ``kakf selftest``."""

import numpy as np

from .linalg_kernels import best_rank_one, khatri_rao, kronecker
from .receiver import SideInfo, kakf_run
from .scenario import SystemDims, build_design, gen_channels, gen_symbols
from .signal_model import add_noise, assemble_tall, assemble_tall_slices

DESK = SystemDims(m_bs=4, n_irs=8, n_users=2, l_ut=2, k_blocks=32, t_slots=2, i_frames=2)


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def check_design_orthogonality(rng):
    worst = 0.0
    for n, u, l, extra in [(1, 1, 1, 0), (2, 1, 2, 0), (4, 2, 2, 3), (8, 2, 2, 0), (3, 3, 1, 7)]:
        d = SystemDims(m_bs=2, n_irs=n, n_users=u, l_ut=l, k_blocks=n * u * l + extra, t_slots=2, i_frames=1)
        psi = build_design(d).psi
        err = np.abs(psi @ psi.conj().T / d.k_blocks - np.eye(d.p)).max()
        worst = max(worst, err)
    return worst <= 1e-10, f"max |psi psi^H / K - I| = {worst:.2e}"


def check_forward_model(rng):
    worst = 0.0
    for _ in range(20):
        ch, sf = gen_channels(DESK, rng), gen_symbols(DESK, rng)
        cd = build_design(DESK)
        worst = max(worst, _rel(assemble_tall_slices(ch, cd, sf), assemble_tall(ch, cd, sf)))
    return worst <= 1e-10, f"slice vs Khatri-Rao relative gap = {worst:.2e}"


def check_noiseless_recovery(rng):
    cd = build_design(DESK)
    worst = 0.0
    errors = 0
    for _ in range(10):
        ch, sf = gen_channels(DESK, rng), gen_symbols(DESK, rng)
        rd = add_noise(assemble_tall(ch, cd, sf), np.inf, rng)
        est = kakf_run(rd, cd, SideInfo(ch.h[0], sf.anchor_row), DESK)
        worst = max(worst, _rel(est.h_hat, ch.h) ** 2, _rel(est.g_hat, ch.g_mat) ** 2)
        errors += int(np.sum(est.x_detected != sf.x))
    return worst <= 1e-10 and errors == 0, f"worst NMSE = {worst:.2e}, symbol errors = {errors}"


def check_kernels(rng):
    worst = 0.0
    for _ in range(50):
        r, c = rng.integers(1, 9, size=2)
        m = rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c))
        lam = np.linalg.eigvalsh(m.conj().T @ m)[-1]
        worst = max(worst, abs(best_rank_one(m).sigma ** 2 - lam) / lam)
    a = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    b = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    kr_ok = all(np.array_equal(khatri_rao(a, b)[:, p], kronecker(a[:, p], b[:, p])[:, 0]) for p in range(4))
    return worst <= 1e-9 and kr_ok, f"rank-one sigma^2 rel. err = {worst:.2e}, khatri-rao exact = {kr_ok}"


CHECKS = [
    ("design orthogonality", check_design_orthogonality),
    ("forward model dual construction", check_forward_model),
    ("noiseless exact recovery", check_noiseless_recovery),
    ("kernel oracles", check_kernels),
]


def run_selftest(seed=0, out=print):
    rng = np.random.default_rng(seed)
    all_ok = True
    for name, fn in CHECKS:
        ok, msg = fn(rng)
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {msg}")
    return all_ok
