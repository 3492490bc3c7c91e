"""Generative model: covariance assembly, sampling, moments, serialization."""

import numpy as np
import pytest

from regioncorr.lattice import (
    CompactNoiseCorrelation,
    LinearDecayCorrelation,
    RegionSpec,
)
from regioncorr.model import (
    CovarianceNotPSDError,
    Dataset,
    ModelParams,
    build_signal_covariance,
    factor_covariance,
    load_dataset,
    make_layout,
    noise_variance_from_snr,
    save_dataset,
    signal_factor,
    simulate,
)
from regioncorr.stats import sample_cov, sample_var

MODEL1 = LinearDecayCorrelation(300.0, 0.9)


def two_point_params(r=0.6, **kwargs):
    regions = (RegionSpec("a", (0,), (1,), 1.0),
               RegionSpec("b", (5,), (1,), 1.0))
    table = np.array([[1.0, r], [r, 1.0]])
    return ModelParams(regions=regions, inter_corr=table, intra=MODEL1,
                       **kwargs)


def micro_params(sigma_eps=0.0, sigma_e=0.0, intra=MODEL1, r=0.6):
    """Two 3x3 regions at distance 2."""
    regions = make_layout([("j", (3, 3), 1.0), ("jp", (3, 3), 2.0)], gap=2)
    table = np.array([[1.0, r], [r, 1.0]])
    return ModelParams(regions=regions, inter_corr=table, intra=intra,
                       sigma_eps=sigma_eps, sigma_e=sigma_e)


# ---------------------------------------------------------------------------
# covariance assembly
# ---------------------------------------------------------------------------

def test_covariance_two_single_voxel_regions():
    cov = build_signal_covariance(two_point_params())
    assert cov.tolist() == [[1.0, 0.6], [0.6, 1.0]]


def test_covariance_one_two_voxel_region():
    regions = (RegionSpec("a", (0,), (2,), 1.0),)
    params = ModelParams(regions=regions, inter_corr=np.eye(1),
                         intra=LinearDecayCorrelation(100.0, 0.99))
    cov = build_signal_covariance(params)
    assert cov == pytest.approx(np.array([[1.0, 0.99], [0.99, 1.0]]))


def test_covariance_block_structure():
    params = micro_params()
    cov = build_signal_covariance(params)
    assert cov.shape == (18, 18)
    # cross-region block constant sigma_j sigma_j' r
    assert np.all(cov[:9, 9:] == 1.0 * 2.0 * 0.6)
    # within-region diagonal sigma^2
    assert np.all(np.diag(cov)[:9] == 1.0)
    assert np.all(np.diag(cov)[9:] == 4.0)
    assert np.array_equal(cov, cov.T)


def test_params_validation():
    regions = (RegionSpec("a", (0, 0), (3, 3), 1.0),
               RegionSpec("b", (3, 0), (3, 3), 1.0))  # adjacent: distance 1
    table = np.eye(2)
    # fine with p = 1 ...
    ModelParams(regions=regions, inter_corr=table, intra=MODEL1)
    # ... but too close once the noise support is 2
    with pytest.raises(ValueError, match="noise support"):
        ModelParams(regions=regions, inter_corr=table, intra=MODEL1,
                    noise_corr=CompactNoiseCorrelation((1.0, 0.5)))
    # overlapping regions always rejected
    overlap = (RegionSpec("a", (0, 0), (3, 3), 1.0),
               RegionSpec("b", (2, 0), (3, 3), 1.0))
    with pytest.raises(ValueError):
        ModelParams(regions=overlap, inter_corr=table, intra=MODEL1)
    # asymmetric inter table rejected
    bad = np.array([[1.0, 0.2], [0.3, 1.0]])
    with pytest.raises(ValueError, match="symmetric"):
        two_point_params()  # baseline ok
        ModelParams(regions=(RegionSpec("a", (0,), (1,), 1.0),
                             RegionSpec("b", (5,), (1,), 1.0)),
                    inter_corr=bad, intra=MODEL1)


def test_intra_validation():
    regions = (RegionSpec("a", (0, 0), (5, 5), 1.0),)
    from regioncorr.lattice import TabulatedCorrelation
    increasing = TabulatedCorrelation((1.0, 0.5, 0.9), tail=0.2)
    with pytest.raises(ValueError, match="nonincreasing"):
        ModelParams(regions=regions, inter_corr=np.eye(1), intra=increasing)
    negative = TabulatedCorrelation((1.0, -0.1), tail=-0.1)
    with pytest.raises(ValueError, match=r"\(0, 1\]"):
        ModelParams(regions=regions, inter_corr=np.eye(1), intra=negative)


def test_factor_covariance_paths():
    rng = np.random.default_rng(0)
    # PSD: plain cholesky reproduces the matrix
    a = rng.standard_normal((6, 6))
    cov = a @ a.T + np.eye(6)
    f = factor_covariance(cov, "test")
    assert f @ f.T == pytest.approx(cov)
    # small relative deficit: clipped projection
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    lam = np.array([10.0, 5.0, 2.0, 1.0, 0.5, -10.0 * 5e-4])
    cov = (q * lam) @ q.T
    f = factor_covariance(cov, "test")
    clipped = (q * np.clip(lam, 0, None)) @ q.T
    assert f @ f.T == pytest.approx(clipped, abs=1e-9)
    # large deficit: error naming the context
    lam[-1] = -0.5
    cov = (q * lam) @ q.T
    with pytest.raises(CovarianceNotPSDError, match="offending-params"):
        factor_covariance(cov, "offending-params")


def test_local_noise_covariance_not_psd_raises():
    # support-2 noise with weight 0.9 is far from a valid 2-d correlation
    regions = make_layout([("j", (5, 5), 1.0), ("jp", (5, 5), 1.0)], gap=2)
    params = ModelParams(regions=regions, inter_corr=np.eye(2), intra=MODEL1,
                         noise_corr=CompactNoiseCorrelation((1.0, 0.9)),
                         sigma_eps=1.0)
    with pytest.raises(CovarianceNotPSDError, match="local noise"):
        simulate(params, 10, 0)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def test_simulate_deterministic():
    params = micro_params(sigma_eps=0.5, sigma_e=0.7)
    a = simulate(params, 200, seed=42)
    b = simulate(params, 200, seed=42)
    assert np.array_equal(a.y, b.y)
    c = simulate(params, 200, seed=43)
    assert not np.array_equal(a.y, c.y)


def test_simulate_pure_signal_variance():
    params = ModelParams(regions=(RegionSpec("a", (0,), (1,), 1.0),),
                         inter_corr=np.eye(1), intra=MODEL1)
    ds = simulate(params, 100_000, seed=1)
    se = np.sqrt(2 / 100_000)
    assert sample_var(ds.y[0]) == pytest.approx(1.0, abs=3 * se)


def test_simulate_lag1_autocorrelation_vanishes():
    params = micro_params(sigma_eps=0.3, sigma_e=0.4)
    ds = simulate(params, 20_000, seed=3)
    for row in (0, 5, 17):
        y = ds.y[row]
        lag1 = np.corrcoef(y[:-1], y[1:])[0, 1]
        assert abs(lag1) <= 3 / np.sqrt(ds.T)


def test_simulate_pairwise_covariances_match_model():
    # cov(Y_i, Y_i') = sigma^2 rho + sigma_eps^2 eta + sigma_e^2 (same region)
    #                  sigma_j sigma_j' r + sigma_e^2 (different regions)
    params = micro_params(sigma_eps=0.8, sigma_e=0.6)
    T = 10_000
    ds = simulate(params, T, seed=11)
    var_e = params.sigma_e ** 2

    def check(row_a, row_b, expected):
        got = sample_cov(ds.y[row_a], ds.y[row_b])
        va = sample_var(ds.y[row_a])
        vb = sample_var(ds.y[row_b])
        se = np.sqrt((va * vb + got ** 2) / T)
        assert got == pytest.approx(expected, abs=3 * se), (row_a, row_b)

    # same region j: rows 0 and 1 are (0,0) and (1,0): distance 1
    check(0, 1, 1.0 * MODEL1(1) + 0.0 + var_e)  # eta(1) = 0 for iid noise
    # same voxel variance: sigma^2 + sigma_eps^2 + sigma_e^2
    assert sample_var(ds.y[0]) == pytest.approx(
        1.0 + 0.64 + var_e, abs=3 * np.sqrt(2 / T) * 2)
    # same region, distance 2: rows 0 and 2 are (0,0) and (2,0)
    check(0, 2, 1.0 * MODEL1(2) + var_e)
    # cross region: any j-row vs jp-row
    check(0, 9, 1.0 * 2.0 * 0.6 + var_e)
    check(4, 12, 1.0 * 2.0 * 0.6 + var_e)


def test_simulate_regional_mean_variance_matches_formula():
    from regioncorr.lattice import region_mean_correlation
    params = micro_params(sigma_eps=0.8, sigma_e=0.6)
    T = 10_000
    ds = simulate(params, T, seed=13)
    for rid, sigma in (("j", 1.0), ("jp", 2.0)):
        spec = params.region(rid)
        expected = (sigma ** 2 * region_mean_correlation(spec, params.intra)
                    + params.sigma_eps ** 2
                    * region_mean_correlation(spec, params.noise_corr)
                    + params.sigma_e ** 2)
        got = sample_var(ds.region_mean_series(rid))
        se = expected * np.sqrt(2 / T)
        assert got == pytest.approx(expected, abs=3 * se)


def test_global_noise_shifts_every_pairwise_covariance():
    base = micro_params(sigma_eps=0.0, sigma_e=0.0)
    noisy = micro_params(sigma_eps=0.0, sigma_e=1.0)
    T = 20_000
    ds0 = simulate(base, T, seed=17)
    ds1 = simulate(noisy, T, seed=17)
    # identical seed: the signal component is bit-identical, the global
    # series is simply added on top
    added = ds1.y - ds0.y
    assert np.ptp(added, axis=0) == pytest.approx(np.zeros(T), abs=1e-12)
    rng = np.random.default_rng(0)
    for _ in range(10):
        a, b = rng.integers(0, 18, size=2)
        shift = sample_cov(ds1.y[a], ds1.y[b]) - sample_cov(ds0.y[a], ds0.y[b])
        assert shift == pytest.approx(1.0, abs=3 * np.sqrt(2 / T) * 2)


def test_correlated_local_noise_support2():
    # eta = (1, 0.1): neighbors at distance 1 share noise correlation 0.1
    # (small enough to keep the 8-neighbor max-norm stencil diagonally
    # dominant, hence a valid correlation)
    noise = CompactNoiseCorrelation((1.0, 0.1))
    regions = make_layout([("j", (4, 4), 1.0), ("jp", (4, 4), 1.0)], gap=2)
    params = ModelParams(regions=regions, inter_corr=np.eye(2), intra=MODEL1,
                         noise_corr=noise, sigma_eps=1.0)
    T = 20_000
    ds = simulate(params, T, seed=19)
    # rows 0, 1 at distance 1: cov = rho(1) + 0.1
    got = sample_cov(ds.y[0], ds.y[1])
    assert got == pytest.approx(MODEL1(1) + 0.1, abs=4 * np.sqrt(2 / T) * 2)


def test_snr_conversion():
    params = micro_params()  # sigma_j = 1, sigma_jp = 2
    assert noise_variance_from_snr(0.0, params) == pytest.approx(1.0)
    assert noise_variance_from_snr(10.0, params) == pytest.approx(0.1)
    assert noise_variance_from_snr(-10.0, params) == pytest.approx(10.0)


def test_make_layout_distances():
    regions = make_layout([("a", (20, 20), 1.0), ("b", (40, 40), 2.0),
                           ("c", (10, 10), 1.0)], gap=3)
    from regioncorr.lattice import region_min_distance
    assert region_min_distance(regions[0], regions[1]) == 3
    assert region_min_distance(regions[1], regions[2]) == 3
    assert region_min_distance(regions[0], regions[2]) > 3


# ---------------------------------------------------------------------------
# dataset plumbing and serialization
# ---------------------------------------------------------------------------

def test_dataset_row_lookup():
    params = micro_params()
    ds = simulate(params, 50, seed=5)
    # canonical order: region j rows 0..8, then jp rows 9..17
    assert ds.region_rows("j") == slice(0, 9)
    assert ds.region_rows("jp") == slice(9, 18)
    assert ds.row_of("j", (0, 0)) == 0
    assert ds.row_of("j", (1, 0)) == 1
    assert ds.row_of("j", (0, 1)) == 3
    jp = params.region("jp")
    assert ds.row_of("jp", jp.origin) == 9
    rows = ds.rows_of("j", np.array([[0, 0], [1, 0], [0, 1]]))
    assert rows.tolist() == [0, 1, 3]
    with pytest.raises(ValueError):
        ds.rows_of("j", np.array([[99, 0]]))


def test_dataset_roundtrip(tmp_path):
    params = micro_params(sigma_eps=0.5, sigma_e=0.25)
    ds = simulate(params, 40, seed=7)
    path = tmp_path / "panel.csv"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert np.array_equal(back.y, ds.y)
    assert back.T == ds.T and back.seed == ds.seed
    assert back.params.region_ids == params.region_ids
    assert back.params.targets == params.targets
    assert back.params.sigma_eps == params.sigma_eps
    assert back.params.intra == params.intra
    assert back.params.noise_corr == params.noise_corr
    assert np.array_equal(back.params.inter_corr, params.inter_corr)
    # header is self-describing text
    first = path.read_text().splitlines()[0]
    assert first.startswith("#regioncorr-dataset")


def test_simulate_rejects_tiny_T():
    with pytest.raises(ValueError):
        simulate(micro_params(), 1, seed=0)
