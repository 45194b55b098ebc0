import numpy as np
import pytest

from kakf.bals import BalsConfig, bals_estimate, resolve_scaling
from kakf.errors import RankDeficientStep, ZeroAnchor
from kakf.scenario import ChannelSet, build_design, gen_channels, gen_symbols
from kakf.signal_model import add_noise, assemble_tall, received_slice


def setup(d, rng, snr_db=np.inf):
    ch, sf, cd = gen_channels(d, rng), gen_symbols(d, rng), build_design(d)
    return ch, sf, cd, add_noise(assemble_tall(ch, cd, sf), snr_db, rng)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_config_validation():
    with pytest.raises(ValueError):
        BalsConfig(max_iter=0)
    with pytest.raises(ValueError):
        BalsConfig(tol=0.0)
    with pytest.raises(ValueError):
        BalsConfig(init="svd")


def test_ground_truth_init_is_fixed_point(desk_dims, rng):
    ch, sf, cd, rd = setup(desk_dims, rng)
    res = bals_estimate(rd, cd, sf.x, desk_dims, BalsConfig(init="provided"), h_init=ch.h)
    assert res.iters == 1
    assert res.converged
    assert res.cost_trace[-1] <= 1e-10 * np.linalg.norm(rd.y_tall)


def test_provided_init_needs_h(desk_dims, rng):
    ch, sf, cd, rd = setup(desk_dims, rng)
    with pytest.raises(ValueError):
        bals_estimate(rd, cd, sf.x, desk_dims, BalsConfig(init="provided"))


def test_random_init_noiseless_converges(desk_dims):
    rng = np.random.default_rng(71)
    for _ in range(10):
        ch, sf, cd, rd = setup(desk_dims, rng)
        res = bals_estimate(rd, cd, sf.x, desk_dims, rng=rng)
        assert res.cost_trace[-1] <= 1e-6 * np.linalg.norm(rd.y_tall)
        h_hat, g_hat = resolve_scaling(res.h_hat, res.g_frames_hat, ch.h[0])
        assert rel(h_hat, ch.h) <= 1e-6
        for g, g0 in zip(g_hat, ch.g_frames):
            assert rel(g, g0) <= 1e-6


def test_cost_non_increasing(desk_dims):
    rng = np.random.default_rng(72)
    for snr in (0.0, 10.0, 30.0):
        for _ in range(5):
            ch, sf, cd, rd = setup(desk_dims, rng, snr)
            trace = bals_estimate(rd, cd, sf.x, desk_dims, BalsConfig(tol=1e-12, max_iter=60), rng=rng).cost_trace
            # exact LS half-steps; allow only round-off
            assert np.all(np.diff(trace) <= 1e-12 * trace[:-1])


def test_reconstruction_matches_slices(desk_dims, rng):
    ch, sf, cd, rd = setup(desk_dims, rng, 15.0)
    res = bals_estimate(rd, cd, sf.x, desk_dims, rng=rng)
    est = ChannelSet(h=res.h_hat, g_frames=res.g_frames_hat)
    total = 0.0
    tm = desk_dims.t_slots * desk_dims.m_bs
    for i in range(desk_dims.i_frames):
        for k in range(desk_dims.k_blocks):
            y_ik = rd.y_tall[i * tm:(i + 1) * tm, k].reshape(desk_dims.m_bs, desk_dims.t_slots, order="F")
            total += np.linalg.norm(y_ik - received_slice(est, cd, sf, i, k)) ** 2
    assert np.sqrt(total) == pytest.approx(res.cost_trace[-1], rel=1e-10)


def test_iteration_cap_reported(desk_dims, rng):
    ch, sf, cd, rd = setup(desk_dims, rng, 0.0)
    res = bals_estimate(rd, cd, sf.x, desk_dims, BalsConfig(max_iter=2, tol=1e-15), rng=rng)
    assert res.iters == 2
    assert not res.converged


def test_rank_deficient_regressor(desk_dims, rng):
    ch, sf, cd, rd = setup(desk_dims, rng)
    with pytest.raises(RankDeficientStep):
        bals_estimate(rd, cd, sf.x, desk_dims, BalsConfig(init="provided"), h_init=np.zeros_like(ch.h))


def test_iterations_grow_at_low_snr(desk_dims):
    rng = np.random.default_rng(73)
    iters = {0.0: [], 30.0: []}
    for _ in range(40):
        ch, sf = gen_channels(desk_dims, rng), gen_symbols(desk_dims, rng)
        cd = build_design(desk_dims)
        y = assemble_tall(ch, cd, sf)
        for snr in iters:
            iters[snr].append(bals_estimate(add_noise(y, snr, rng), cd, sf.x, desk_dims, rng=rng).iters)
    assert np.mean(iters[0.0]) > np.mean(iters[30.0])


def test_resolve_scaling(rng):
    h = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    g = [rng.standard_normal((4, 2)) + 0j for _ in range(2)]
    c = np.array([2.0, -1j, 0.5, 3 + 1j])
    h2, g2 = resolve_scaling(h / c, [gi * c[:, None] for gi in g], h[0])
    np.testing.assert_allclose(h2, h, atol=1e-12)
    for a, b in zip(g2, g):
        np.testing.assert_allclose(a, b, atol=1e-12)
    bad = h.copy()
    bad[0, 1] = 0
    with pytest.raises(ZeroAnchor):
        resolve_scaling(bad, g, h[0])
