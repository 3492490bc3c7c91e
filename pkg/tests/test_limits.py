"""Closed-form limits against an independent population-moment oracle.

The oracle assembles the full population covariance of the observed
field (signal + local noise + global noise) as a matrix and evaluates
every estimator's large-sample value as quadratic forms at explicit
draw positions.  It never touches the aggregated-sum closed forms, so
agreement pins both routes.
"""

import numpy as np
import pytest

from regioncorr.estimators import EstimatorConfig
from regioncorr.lattice import (
    LinearDecayCorrelation,
    RegionSpec,
    box_voxels,
    neighborhood_mean_correlation,
    paired_neighborhood_mean_correlation,
    pairwise_uniform_distances,
    region_mean_correlation,
    region_voxels,
)
from regioncorr.limits import limit_of
from regioncorr.model import ModelParams, build_signal_covariance, make_layout

MODEL1 = LinearDecayCorrelation(300.0, 0.9)
MODEL2 = LinearDecayCorrelation(100.0, 0.6)

RHO_BAR_1_MODEL1 = 0.9957201646090535


def layout_params(intra=MODEL1, sigma_eps=0.0, sigma_e=0.0, r=0.6,
                  donor_table=None):
    # 7x7 regions host every geometry exercised below (two nu=1 balls at
    # distance up to 2, single balls up to nu=2)
    regions = make_layout([("j", (7, 7), 1.0), ("jp", (7, 7), 2.0),
                           ("k", (7, 7), 1.0), ("kp", (7, 7), 1.0)], gap=2)
    table = np.eye(4)
    table[0, 1] = table[1, 0] = r
    if donor_table:
        for (a, b), val in donor_table.items():
            table[a, b] = table[b, a] = val
    return ModelParams(regions=regions, inter_corr=table, intra=intra,
                       sigma_eps=sigma_eps, sigma_e=sigma_e)


def cfg_for(method, nu=1, delta=1):
    donor = {}
    if method in ("D", "LD", "RD", "LRD"):
        donor = {"donor_k": "k", "donor_kp": "kp"}
    return EstimatorConfig(method=method, target_j="j", target_jp="jp",
                           nu=nu, delta=delta, **donor)


# ---------------------------------------------------------------------------
# the oracle
# ---------------------------------------------------------------------------

class MomentOracle:
    """Population moments of the observed field as explicit matrices."""

    def __init__(self, params: ModelParams):
        self.params = params
        coords = np.vstack([region_voxels(r) for r in params.regions])
        dist = pairwise_uniform_distances(coords)
        self.cov = (build_signal_covariance(params)
                    + params.sigma_eps ** 2 * params.noise_corr.values(dist)
                    + params.sigma_e ** 2)
        sizes = [r.n_voxels for r in params.regions]
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.row0 = dict(zip(params.region_ids, offsets[:-1].astype(int)))

    def voxel_weight(self, rid, coords):
        spec = self.params.region(rid)
        w = np.zeros(len(self.cov))
        local = region_voxels(spec).tolist().index(list(coords))
        w[self.row0[rid] + local] = 1.0
        return w

    def ball_weight(self, rid, center, nu):
        spec = self.params.region(rid)
        w = np.zeros(len(self.cov))
        voxels = region_voxels(spec).tolist()
        for v in box_voxels([c - nu for c in center],
                            (2 * nu + 1,) * spec.ndim).tolist():
            w[self.row0[rid] + voxels.index(v)] = 1.0
        return w / w.sum()

    def region_weight(self, rid):
        spec = self.params.region(rid)
        w = np.zeros(len(self.cov))
        w[self.row0[rid]:self.row0[rid] + spec.n_voxels] = 1.0
        return w / spec.n_voxels

    def c(self, wa, wb):
        return float(wa @ self.cov @ wb)

    def cor(self, wa, wb):
        return self.c(wa, wb) / np.sqrt(self.c(wa, wa) * self.c(wb, wb))

    def cor_tilde(self, w1, w2, w3, w4):
        num = (self.c(w1, w2) - self.c(w1, w4) - self.c(w3, w2)
               + self.c(w3, w4))
        s1 = self.c(w1, w1) - self.c(w1, w3) - self.c(w1, w4) + self.c(w3, w4)
        s2 = self.c(w2, w2) - self.c(w2, w3) - self.c(w2, w4) + self.c(w3, w4)
        return num / np.sqrt(s1 * s2)

    def replicate_ratio(self, a1, a2, b1, b2):
        num = (self.cor(a1, b1) + self.cor(a1, b2) + self.cor(a2, b1)
               + self.cor(a2, b2)) / 4.0
        return num / np.sqrt(self.cor(a1, a2) * self.cor(b1, b2))

    def difference_replicate_ratio(self, a1, a2, b1, b2, wk, wkp):
        num = (self.cor_tilde(a1, b1, wk, wkp) + self.cor_tilde(a1, b2, wk, wkp)
               + self.cor_tilde(a2, b1, wk, wkp)
               + self.cor_tilde(a2, b2, wk, wkp)) / 4.0
        den = (self.cor_tilde(a1, a2, wk, wkp)
               * self.cor_tilde(b1, b2, wk, wkp))
        return num / np.sqrt(den)

    def mean_block_cor(self, rid_a, rid_b):
        d = np.sqrt(np.diag(self.cov))
        R = self.cov / np.outer(d, d)
        sa = slice(self.row0[rid_a],
                   self.row0[rid_a] + self.params.region(rid_a).n_voxels)
        sb = slice(self.row0[rid_b],
                   self.row0[rid_b] + self.params.region(rid_b).n_voxels)
        return float(R[sa, sb].mean())


def oracle_limit(params, cfg, positions="a"):
    """Evaluate the estimator's population value at explicit positions.

    ``positions`` picks one of two distinct draw geometries; under the
    stationary model both must give the same value.  Single voxels and
    ball centers move between the variants; replicate pairs switch the
    translation axis, all inside 7x7 regions.
    """
    o = MomentOracle(params)
    nu, delta = cfg.nu, cfg.delta
    shift = 2 * nu + delta
    b = positions == "b"
    # relative coordinates of the free anchor, clamped to stay inside
    free = nu + (2 if b else 0)
    voxel0 = (1, 2) if b else (0, 0)

    def at(rid, rel):
        return tuple(a + c for a, c in zip(params.region(rid).origin, rel))

    def ball(rid, rel):
        return o.ball_weight(rid, at(rid, rel), nu)

    def vox(rid, rel):
        return o.voxel_weight(rid, at(rid, rel))

    def ball_pair(rid):
        # translated along x for variant a, along y for variant b
        if b:
            c1 = (free, nu)
            c2 = (free, nu + shift)
        else:
            c1 = (nu, free)
            c2 = (nu + shift, free)
        return ball(rid, c1), ball(rid, c2)

    def voxel_pair(rid):
        if b:
            return vox(rid, (2, 0)), vox(rid, (2, delta))
        return vox(rid, (0, 0)), vox(rid, (delta, 0))

    if cfg.method == "CA":
        return o.cor(o.region_weight("j"), o.region_weight("jp"))
    if cfg.method == "AC":
        return o.mean_block_cor("j", "jp")
    if cfg.method == "ACt":
        ca = o.cor(o.region_weight("j"), o.region_weight("jp"))
        return np.sqrt(o.mean_block_cor("j", "j")
                       * o.mean_block_cor("jp", "jp")) * ca
    if cfg.method == "LCA":
        return o.cor(ball("j", (free, nu)), ball("jp", (nu, free)))
    if cfg.method == "R":
        a1, a2 = voxel_pair("j")
        b1, b2 = voxel_pair("jp")
        return o.replicate_ratio(a1, a2, b1, b2)
    if cfg.method == "LR":
        a1, a2 = ball_pair("j")
        b1, b2 = ball_pair("jp")
        return o.replicate_ratio(a1, a2, b1, b2)

    wk_v = vox("k", voxel0)
    wkp_v = vox("kp", voxel0)
    if cfg.method == "D":
        return o.cor_tilde(vox("j", voxel0), vox("jp", voxel0), wk_v, wkp_v)
    if cfg.method == "LD":
        c = (free, nu)
        return o.cor_tilde(ball("j", c), ball("jp", c),
                           ball("k", c), ball("kp", c))
    if cfg.method == "RD":
        a1, a2 = voxel_pair("j")
        b1, b2 = voxel_pair("jp")
        return o.difference_replicate_ratio(a1, a2, b1, b2, wk_v, wkp_v)
    if cfg.method == "LRD":
        a1, a2 = ball_pair("j")
        b1, b2 = ball_pair("jp")
        return o.difference_replicate_ratio(
            a1, a2, b1, b2, ball("k", (free, nu)), ball("kp", (nu, free)))
    raise AssertionError(cfg.method)


ALL_METHODS = ("CA", "AC", "ACt", "LCA", "R", "LR", "D", "LD", "RD", "LRD")


@pytest.mark.parametrize("intra", [MODEL1, MODEL2])
@pytest.mark.parametrize("noise", [dict(),
                                   dict(sigma_eps=0.8),
                                   dict(sigma_e=1.1),
                                   dict(sigma_eps=0.5, sigma_e=0.7)])
def test_limits_match_moment_oracle(intra, noise):
    params = layout_params(intra=intra, **noise)
    for method in ALL_METHODS:
        cfg = cfg_for(method)
        got = limit_of(params, cfg)
        want = oracle_limit(params, cfg)
        assert got == pytest.approx(want, abs=1e-10), method
        # stationarity: a second draw geometry gives the same value
        assert oracle_limit(params, cfg, positions="b") == pytest.approx(
            want, abs=1e-10), method


@pytest.mark.parametrize("nu,delta", [(0, 1), (1, 2), (2, 1)])
def test_limits_match_oracle_other_hyperparameters(nu, delta):
    params = layout_params(intra=MODEL2, sigma_eps=0.6, sigma_e=0.4)
    for method in ("LCA", "R", "LR", "D", "LD", "RD", "LRD"):
        if nu == 2 and method in ("LR", "LRD"):
            continue  # 6x6 regions cannot host two nu=2 balls
        cfg = cfg_for(method, nu=nu, delta=delta)
        assert limit_of(params, cfg) == pytest.approx(
            oracle_limit(params, cfg), abs=1e-10), method


def test_d_family_limits_with_connected_donors():
    donor_table = {(0, 2): 0.2, (0, 3): 0.1, (1, 2): 0.15, (1, 3): 0.25,
                   (2, 3): 0.3}
    params = layout_params(intra=MODEL2, sigma_eps=0.5, sigma_e=0.9,
                           donor_table=donor_table)
    for method in ("D", "LD", "RD", "LRD"):
        cfg = cfg_for(method)
        assert limit_of(params, cfg) == pytest.approx(
            oracle_limit(params, cfg), abs=1e-10), method


def test_d_limit_reduces_when_donors_disconnected():
    params = layout_params(sigma_eps=0.7)
    var_eps = 0.49
    want = (1.0 * 2.0 * 0.6) / np.sqrt((1.0 + var_eps) * (4.0 + var_eps))
    assert limit_of(params, cfg_for("D")) == pytest.approx(want)


def test_alternative_closed_forms_differ_and_are_flagged():
    params = layout_params(sigma_eps=1.0)
    cfg = cfg_for("D")
    main = limit_of(params, cfg)
    alt = limit_of(params, cfg, local_noise_terms=2)
    assert main == pytest.approx(1.2 / np.sqrt(2.0 * 5.0))
    assert alt == pytest.approx(1.2 / np.sqrt(3.0 * 6.0))
    assert oracle_limit(params, cfg) == pytest.approx(main, abs=1e-12)
    # the LCA comparison variant multiplies eta-bar by the global variance
    params2 = layout_params(sigma_eps=1.0, sigma_e=0.5)
    cfg2 = cfg_for("LCA")
    assert limit_of(params2, cfg2) == pytest.approx(
        oracle_limit(params2, cfg2), abs=1e-12)
    assert limit_of(params2, cfg2, neighborhood_noise_term="global") != \
        pytest.approx(limit_of(params2, cfg2), abs=1e-6)


# ---------------------------------------------------------------------------
# frozen values and structural invariants
# ---------------------------------------------------------------------------

def test_frozen_reference_values():
    full = make_layout([("j", (20, 20), 1.0), ("jp", (40, 40), 2.0),
                        ("k", (10, 10), 1.0), ("kp", (10, 10), 1.0)], gap=2)
    table = np.eye(4)
    table[0, 1] = table[1, 0] = 0.6
    with_eps = ModelParams(regions=full, inter_corr=table, intra=MODEL1,
                           sigma_eps=1.0)
    assert limit_of(with_eps, cfg_for("AC")) == pytest.approx(
        0.3794733192202055, abs=1e-15)
    assert limit_of(with_eps, cfg_for("RD")) == pytest.approx(
        0.6020066889632107, abs=1e-12)
    no_noise = ModelParams(regions=full, inter_corr=table, intra=MODEL1)
    assert limit_of(no_noise, cfg_for("LCA")) == pytest.approx(
        0.6 / RHO_BAR_1_MODEL1, abs=1e-12)


def test_no_noise_reduction_table():
    params = layout_params(intra=MODEL2)
    nu, delta, ndim = 1, 1, 2
    rho_d = MODEL2(delta)
    rho_nu = neighborhood_mean_correlation(nu, ndim, MODEL2)
    rho_nd = paired_neighborhood_mean_correlation(nu, delta, ndim, MODEL2)
    rbj = region_mean_correlation(params.region("j"), MODEL2)
    rbjp = region_mean_correlation(params.region("jp"), MODEL2)
    expected = {
        "CA": 0.6 / np.sqrt(rbj * rbjp),
        "AC": 0.6, "ACt": 0.6, "D": 0.6,
        "LCA": 0.6 / rho_nu, "LD": 0.6 / rho_nu,
        "R": 0.6 / rho_d, "RD": 0.6 / rho_d,
        "LR": 0.6 / rho_nd, "LRD": 0.6 / rho_nd,
    }
    for method, want in expected.items():
        assert limit_of(params, cfg_for(method)) == pytest.approx(
            want, abs=1e-12), method


def test_difference_methods_immune_to_global_noise():
    for method in ("D", "LD", "RD", "LRD"):
        vals = [limit_of(layout_params(sigma_eps=0.3, sigma_e=se),
                         cfg_for(method)) for se in (0.0, 1.0, 2.5)]
        assert max(vals) - min(vals) < 1e-14, method


def test_replicate_methods_immune_to_local_noise_without_global():
    for method in ("R", "LR"):
        vals = [limit_of(layout_params(sigma_eps=se), cfg_for(method))
                for se in (0.0, 1.0, 3.0)]
        assert max(vals) - min(vals) < 1e-14, method


def test_ac_attenuation_monotonicity():
    # AC strictly decreases in the local noise level
    vals = [limit_of(layout_params(sigma_eps=se), cfg_for("AC"))
            for se in (0.0, 0.5, 1.0, 2.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    # and strictly increases toward its supremum in the global noise
    vals_e = [limit_of(layout_params(sigma_e=se), cfg_for("AC"))
              for se in (0.0, 0.5, 1.0, 2.0, 8.0)]
    assert all(a < b for a, b in zip(vals_e, vals_e[1:]))
    assert all(v < 1.0 for v in vals_e)
