import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trident.geometry import SwitchDims, compound_p1, compound_p2
from trident.rates import (
    cb_service_floor,
    r2_from_r1,
    r2_slice,
    r3,
    r4,
    r5,
    rate_bounds,
    stability_drift,
    verify_throughput_identity,
    vimoq_service_floor,
)
from trident.traffic import TrafficSpec, rate_matrix

DIMS2 = SwitchDims.symmetric(2)  # N = 4
DIMS3 = SwitchDims.symmetric(3)  # N = 9


def random_admissible(rng, N):
    mat = rng.random((N, N))
    return mat / max(mat.sum(axis=1).max(), mat.sum(axis=0).max())


@pytest.fixture
def lam4():
    return random_admissible(np.random.default_rng(42), 4)


def test_r2_rows_carry_row_sums(lam4):
    p1 = compound_p1(DIMS2)
    r2 = r2_from_r1(lam4, p1, DIMS2)
    rows = lam4.sum(axis=1)
    for u in range(4):
        nz = np.nonzero(p1.entries[u])[0]
        assert len(nz) == 2
        assert np.allclose(r2[u, nz], rows[u] / 2)
        assert np.allclose(np.delete(r2[u], nz), 0.0)


def test_r2_uniform_full_load_entries():
    r1 = rate_matrix(TrafficSpec("uniform_bernoulli", 1.0), DIMS2)
    r2 = r2_from_r1(r1, compound_p1(DIMS2), DIMS2)
    nz = r2[r2 > 0]
    assert np.allclose(nz, 0.5)
    assert nz.size == 4 * 2


def test_r2_zero_matrix():
    r2 = r2_from_r1(np.zeros((4, 4)), compound_p1(DIMS2), DIMS2)
    assert not r2.any()


def test_r2_rejects_inadmissible():
    bad = np.full((4, 4), 0.3)  # rows sum to 1.2
    with pytest.raises(ValueError):
        r2_from_r1(bad, compound_p1(DIMS2), DIMS2)


def test_r2_slices_partition_r2(lam4):
    p1 = compound_p1(DIMS2)
    whole = r2_from_r1(lam4, p1, DIMS2)
    total = np.zeros_like(whole)
    for j in range(2):
        for d in range(2):
            total += r2_slice(lam4, p1, DIMS2, j, d)
    assert np.allclose(total, whole)


def test_r2_per_om_aggregate_structure(lam4):
    # summed over an OM's two ports, row u carries
    # (lam[u, 2j] + lam[u, 2j+1])/2 at the schedule's nonzero positions
    p1 = compound_p1(DIMS2)
    for j in range(2):
        agg = r2_slice(lam4, p1, DIMS2, j, 0) + r2_slice(lam4, p1, DIMS2, j, 1)
        for u in range(4):
            nz = np.nonzero(p1.entries[u])[0]
            want = (lam4[u, 2 * j] + lam4[u, 2 * j + 1]) / 2
            assert np.allclose(agg[u, nz], want)


def test_r2_slice_bounds():
    with pytest.raises(ValueError):
        r2_slice(np.zeros((4, 4)), compound_p1(DIMS2), DIMS2, 2, 0)


def test_single_destination_r1_has_one_nonzero_slice():
    r1 = np.zeros((4, 4))
    r1[:, 3] = 0.2
    p1 = compound_p1(DIMS2)
    for j in range(2):
        for d in range(2):
            s = r2_slice(r1, p1, DIMS2, j, d)
            assert s.any() == (j * 2 + d == 3)


def test_r3_keeps_slice_within_cm_schedule(lam4):
    p1, p2 = compound_p1(DIMS2), compound_p2(DIMS2)
    for j in range(2):
        for d in range(2):
            sl = r2_slice(lam4, p1, DIMS2, j, d)
            out = r3(sl, p2)
            # the CM compound covers every scheduled position of the slice
            assert np.allclose(out, sl)
    # explicit per-entry check for output port (0, 0)
    out00 = r3(r2_slice(lam4, p1, DIMS2, 0, 0), p2)
    for u in range(4):
        nz = np.nonzero(p1.entries[u])[0]
        assert np.allclose(out00[u, nz], lam4[u, 0] / 2)


def test_r3_zero_and_shape_checks():
    p2 = compound_p2(DIMS2)
    assert not r3(np.zeros((4, 4)), p2).any()
    with pytest.raises(ValueError):
        r3(np.zeros((9, 9)), p2)


def test_r3_9x9_has_three_nonzeros_per_occupied_row():
    rng = np.random.default_rng(7)
    lam = random_admissible(rng, 9) + 0.01  # strictly positive
    lam = lam / max(lam.sum(axis=1).max(), lam.sum(axis=0).max())
    p1, p2 = compound_p1(DIMS3), compound_p2(DIMS3)
    out = r3(r2_slice(lam, p1, DIMS3, 1, 2), p2)
    assert ((out > 0).sum(axis=1) == 3).all()


def test_r4_r5_examples(lam4):
    p1, p2 = compound_p1(DIMS2), compound_p2(DIMS2)
    for v in range(4):
        j, d = divmod(v, 2)
        vec = r4(r3(r2_slice(lam4, p1, DIMS2, j, d), p2))
        assert np.allclose(vec, lam4[:, v])
        assert r5(vec) == pytest.approx(lam4[:, v].sum())
    assert r5(np.zeros(4)) == 0.0
    assert not r4(np.zeros((4, 4))).any()


def test_r4_uniform_full_load():
    r1 = rate_matrix(TrafficSpec("uniform_bernoulli", 1.0), DIMS2)
    p1, p2 = compound_p1(DIMS2), compound_p2(DIMS2)
    vec = r4(r3(r2_slice(r1, p1, DIMS2, 0, 0), p2))
    assert np.allclose(vec, 0.25)


def test_r5_bounded_for_admissible(lam4):
    p1, p2 = compound_p1(DIMS2), compound_p2(DIMS2)
    for v in range(4):
        j, d = divmod(v, 2)
        assert r5(r4(r3(r2_slice(lam4, p1, DIMS2, j, d), p2))) <= 1.0 + 1e-9


@pytest.mark.parametrize("n", [2, 3, 4])
def test_throughput_identity_random_matrices(n):
    dims = SwitchDims.symmetric(n)
    rng = np.random.default_rng(n)
    for _ in range(50):
        report = verify_throughput_identity(random_admissible(rng, dims.N), dims)
        assert report.ok
        assert report.max_residual < 1e-12


def test_throughput_identity_identity_matrix():
    report = verify_throughput_identity(np.eye(4) / 4, DIMS2)
    assert report.ok


@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
@settings(max_examples=20)
def test_pipeline_linearity(seed, alpha):
    rng = np.random.default_rng(seed)
    lam = random_admissible(rng, 9)
    p1, p2 = compound_p1(DIMS3), compound_p2(DIMS3)
    for v in (0, 4, 8):
        j, d = divmod(v, 3)
        base = r4(r3(r2_slice(lam, p1, DIMS3, j, d), p2))
        scaled = r4(r3(r2_slice(alpha * lam, p1, DIMS3, j, d), p2))
        assert np.allclose(scaled, alpha * base, atol=1e-12)


def test_pipeline_conservation(lam4):
    p1, p2 = compound_p1(DIMS2), compound_p2(DIMS2)
    total = sum(
        r5(r4(r3(r2_slice(lam4, p1, DIMS2, j, d), p2)))
        for j in range(2)
        for d in range(2)
    )
    assert total == pytest.approx(lam4.sum(), abs=1e-12)


def test_rate_bounds_values():
    b = rate_bounds(DIMS3)
    assert b.lambda_max == pytest.approx(1 / 9)
    assert b.r_vimoq == pytest.approx(1 / 9)
    assert b.r_cm == pytest.approx(1 / 3)
    assert b.r_cb == pytest.approx(1 / 27)
    degenerate = rate_bounds(SwitchDims.symmetric(1))
    assert degenerate.r_cm == 1.0
    assert vimoq_service_floor(DIMS3) == pytest.approx(1 / 9)
    assert cb_service_floor(DIMS3) == pytest.approx(1 / 27)


def test_stability_drift_detects_growth():
    t = np.arange(40_000)
    growing = 0.25 * t + np.random.default_rng(0).normal(0, 5, t.size)
    est = stability_drift(growing, arrival_rate_sum=8.0, service_rate_floor=1 / 16)
    assert est.slope == pytest.approx(0.25, abs=0.01)
    assert est.arrival_rate_sum == 8.0


def test_stability_drift_flat_series():
    rng = np.random.default_rng(1)
    flat = 100 + rng.normal(0, 5, 40_000)
    est = stability_drift(flat)
    assert abs(est.slope) < 0.005
    assert est.mean_occupancy == pytest.approx(100, abs=1)


def test_stability_drift_zero_occupancy():
    est = stability_drift(np.zeros(20_000))
    assert est.slope == 0.0


def test_stability_drift_rejects_short_series():
    with pytest.raises(ValueError):
        stability_drift(np.zeros(5_000))
    with pytest.raises(ValueError):
        stability_drift(np.zeros((100, 100)))
