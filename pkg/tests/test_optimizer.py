import numpy as np
import pytest
from oracle_utils import direct_m_subset_residual, quadratic_z_minimizer

from holoshift import (
    AdmmState,
    CodecParams,
    InvalidConfig,
    OptimizerParams,
    ShiftMode,
    ShiftSpec,
    apply_shift,
    compress_to_ratio,
    default_params,
    encode_baseline,
    m_subset_residual,
    optimize,
    standard_shift_grid,
    z_update,
)

CYC = ShiftMode.CYCLIC
PAD = ShiftMode.REPLICATE_PAD


def make_state(x, shifts, rng):
    z = [apply_shift(x, s) + rng.normal(0, 5, size=apply_shift(x, s).shape) for s in shifts]
    return AdmmState(z_hat=z, u=[np.zeros_like(a) for a in z], y_hat=[None] * len(shifts))


def test_default_params_opt2_k4_ratio50():
    p = default_params("opt2", K=4, m=2, N=65536, ratio=50.0)
    assert p.mu == 600.0
    assert p.lam == 80.0
    assert p.beta == 90.0 / 65536
    assert p.iterations == 35


def test_default_params_optk_k4_ratio50():
    p = default_params("optk", K=4, m=4, N=65536, ratio=50.0)
    assert p.mu == 500.0
    assert p.lam == 40.0
    assert p.beta == 50.0 / 65536


def test_default_params_overrides():
    assert default_params("opt2", K=9, m=2, N=1000).lam == 81.0
    assert default_params("opt2", K=4, m=2, N=1000, ratio=25.0).beta == 65.0 / 1000
    assert default_params("optk", K=4, m=4, N=1000, ratio=25.0).beta == 120.0 / 1000
    # Unlisted ratios fall back to the ratio-50 formulas.
    assert default_params("opt2", K=4, m=2, N=1000, ratio=40.0).beta == 90.0 / 1000


def test_default_params_profile_m_mismatch():
    with pytest.raises(InvalidConfig):
        default_params("opt2", K=4, m=3, N=100)
    with pytest.raises(InvalidConfig):
        default_params("optk", K=4, m=2, N=100)
    with pytest.raises(InvalidConfig):
        default_params("best", K=4, m=4, N=100)


def test_optimizer_params_validation():
    with pytest.raises(InvalidConfig):
        OptimizerParams(m=1, K=4, mu=1.0, lam=1.0, beta=1.0)
    with pytest.raises(InvalidConfig):
        OptimizerParams(m=5, K=4, mu=1.0, lam=1.0, beta=1.0)
    with pytest.raises(InvalidConfig):
        OptimizerParams(m=2, K=4, mu=1.0, lam=1.0, beta=0.0)
    with pytest.raises(InvalidConfig):
        OptimizerParams(m=2, K=4, mu=1.0, lam=1.0, beta=1.0, iterations=0)


def test_z_update_collapses_to_y_tilde_when_unweighted():
    rng = np.random.default_rng(10)
    x = rng.uniform(0, 255, size=(6, 6))
    shifts = [ShiftSpec(0, 0, CYC), ShiftSpec(1, 2, CYC)]
    state = make_state(x, shifts, rng)
    p = OptimizerParams(m=2, K=2, mu=0.0, lam=0.0, beta=0.01)
    y_tilde = rng.uniform(0, 255, size=(6, 6))
    assert np.array_equal(z_update(1, x, y_tilde, state, p, shifts), y_tilde)


def test_z_update_dominated_by_fidelity_at_huge_lam():
    rng = np.random.default_rng(11)
    x = rng.uniform(0, 255, size=(6, 6))
    shifts = [ShiftSpec(2, 1, CYC), ShiftSpec(0, 3, CYC)]
    state = make_state(x, shifts, rng)
    p = OptimizerParams(m=2, K=2, mu=0.0, lam=1e14, beta=0.01)
    y_tilde = rng.uniform(0, 255, size=(6, 6))
    out = z_update(0, x, y_tilde, state, p, shifts)
    assert np.allclose(out, apply_shift(x, shifts[0]), atol=1e-6)


def test_z_update_matches_quadratic_oracle_small():
    rng = np.random.default_rng(12)
    for _ in range(5):
        h, w = rng.integers(4, 9, size=2)
        K = int(rng.integers(2, 5))
        m = int(rng.integers(2, K + 1))
        x = rng.uniform(0, 255, size=(h, w))
        offsets = [(int(rng.integers(0, h)), int(rng.integers(0, w))) for _ in range(K)]
        shifts = [ShiftSpec(dy, dx, CYC) for dy, dx in offsets]
        state = make_state(x, shifts, rng)
        mu, lam, beta = rng.uniform(0.1, 100, size=3)
        p = OptimizerParams(m=m, K=K, mu=float(mu), lam=float(lam), beta=float(beta))
        i = int(rng.integers(0, K))
        y_tilde = rng.uniform(0, 255, size=(h, w))
        got = z_update(i, x, y_tilde, state, p, shifts)
        want = quadratic_z_minimizer(
            i, x, y_tilde, state.z_hat, offsets, float(mu), float(lam), float(beta), m
        )
        rel = np.abs(got - want).max() / max(1.0, np.abs(want).max())
        assert rel <= 1e-8


@pytest.mark.parametrize("mode", [CYC, PAD])
def test_m_subset_residual_matches_enumeration(mode):
    rng = np.random.default_rng(13)
    x = rng.uniform(0, 255, size=(5, 7))
    for K in (2, 3, 4):
        offsets = [(int(rng.integers(0, 4)), int(rng.integers(0, 4))) for _ in range(K)]
        back = [rng.uniform(0, 255, size=x.shape) for _ in range(K)]
        for m in range(2, K + 1):
            for i in range(K):
                got = m_subset_residual(i, x, back, m)
                want = direct_m_subset_residual(i, x, back, m)
                assert np.allclose(got, want, rtol=1e-13, atol=1e-9)


def test_single_unweighted_iteration_equals_baseline(natural_crop):
    shifts = standard_shift_grid(4)
    codec = CodecParams(theta=18.0)
    p = OptimizerParams(m=4, K=4, mu=0.0, lam=0.0, beta=1e-4, theta=18.0, iterations=1)
    ps, trace = optimize(natural_crop, shifts, codec, p)
    base = encode_baseline(natural_crop, shifts, codec)
    assert [a.data for a in ps.packets] == [b.data for b in base.packets]
    assert len(trace.rows) == 1
    assert ps.mode_tag == 4


def test_unweighted_iterations_reach_codec_fixed_point(natural_crop):
    img = natural_crop[:32, :32]
    shifts = [ShiftSpec(0, 0, CYC), ShiftSpec(3, 3, CYC)]
    codec = CodecParams(theta=14.0)
    runs = {}
    for iters in (2, 3):
        p = OptimizerParams(m=2, K=2, mu=0.0, lam=0.0, beta=1e-4, theta=14.0, iterations=iters)
        ps, _ = optimize(img, shifts, codec, p)
        runs[iters] = [pkt.data for pkt in ps.packets]
    assert runs[2] == runs[3]


def test_optimize_shift_count_mismatch(natural_crop):
    p = OptimizerParams(m=2, K=3, mu=1.0, lam=1.0, beta=1e-4, theta=18.0, iterations=1)
    with pytest.raises(InvalidConfig):
        optimize(natural_crop, standard_shift_grid(4), CodecParams(theta=18.0), p)


def test_optimize_cost_descends_on_natural_crop(natural_image):
    x = natural_image[:64, :64]
    shifts = standard_shift_grid(4)
    base = CodecParams(theta=32.0)
    _, theta = compress_to_ratio(apply_shift(x, shifts[0]), 50.0, base)
    p = default_params("optk", K=4, m=4, N=x.size, ratio=50.0, theta=theta)
    p.iterations = 8
    ps, trace = optimize(x, shifts, base, p)
    assert len(trace.rows) == 8
    assert trace.rows[-1].lagrangian < trace.rows[0].lagrangian
    assert ps.codec.theta == theta


def test_trace_csv_shape(natural_crop):
    shifts = standard_shift_grid(4)
    p = OptimizerParams(m=4, K=4, mu=10.0, lam=1.0, beta=1e-4, theta=25.0, iterations=3)
    _, trace = optimize(natural_crop, shifts, CodecParams(theta=25.0), p)
    lines = trace.to_csv().strip().split("\n")
    assert lines[0] == "iteration,total_bits,avg_m_mse,avg_1_mse,lagrangian"
    assert len(lines) == 4
    assert lines[1].startswith("1,")
