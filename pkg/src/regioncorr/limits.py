"""Exact almost-sure limits of the inter-correlation estimators.

For T -> infinity every estimator converges to a closed-form function of
the model parameters and of aggregated correlation sums over the
relevant index sets.  This module evaluates those limits exactly (the
aggregated sums are exact integer-weighted averages), which makes it
the oracle against which the Monte Carlo harness checks every method.

Two documented ambiguities in the difference-based (donor) family are
controlled by keyword flags, with defaults fixed by the package's own
Monte Carlo regression tests:

* ``local_noise_terms`` - how many local-noise variance terms enter
  each difference-based denominator factor.  The moment algebra of
  ``s_hat_squared`` gives sigma_j^2 + sigma_eps^2 (one term, the
  default); ``local_noise_terms=2`` evaluates the alternative closed
  form sigma_j^2 + 2 sigma_eps^2 for comparison.
* ``neighborhood_noise_term`` - which noise variance multiplies the
  aggregated noise correlation in the LCA denominator; ``"local"``
  (default) matches the variance of a neighborhood mean,
  ``"global"`` evaluates the alternative form for comparison.
"""

from __future__ import annotations

import numpy as np

from .estimators import D_FAMILY, EstimatorConfig
from .lattice import (
    neighborhood_mean_correlation,
    paired_neighborhood_mean_correlation,
    region_mean_correlation,
)
from .model import ModelParams


def limit_of(params: ModelParams, cfg: EstimatorConfig, *,
             local_noise_terms: int = 1,
             neighborhood_noise_term: str = "local") -> float:
    """Almost-sure limit of the configured estimator under the model.

    The donor-family limits keep the full cross-correlation corrections
    for connected donors; with disconnected donors (all donor rows of
    the inter-correlation table zero) they reduce to the familiar
    simplified forms.
    """
    if local_noise_terms not in (1, 2):
        raise ValueError("local_noise_terms must be 1 or 2")
    if neighborhood_noise_term not in ("local", "global"):
        raise ValueError("neighborhood_noise_term must be 'local' or 'global'")

    ndim = params.ndim
    intra, noise = params.intra, params.noise_corr
    rj = params.region(cfg.target_j)
    rjp = params.region(cfg.target_jp)
    sj, sjp = rj.sigma, rjp.sigma
    r = params.inter_r(cfg.target_j, cfg.target_jp)
    var_eps = params.sigma_eps ** 2
    var_e = params.sigma_e ** 2
    delta = cfg.resolved_delta(params)
    method = cfg.method

    def ratio(num: float, den_j: float, den_jp: float) -> float:
        return float(num / np.sqrt(den_j * den_jp))

    if method == "CA":
        num = sj * sjp * r + var_e
        den = [s ** 2 * region_mean_correlation(spec, intra)
               + var_eps * region_mean_correlation(spec, noise) + var_e
               for spec, s in ((rj, sj), (rjp, sjp))]
        return ratio(num, *den)

    if method in ("AC", "ACt"):
        num = sj * sjp * r + var_e
        return ratio(num, sj ** 2 + var_eps + var_e, sjp ** 2 + var_eps + var_e)

    if method == "LCA":
        num = sj * sjp * r + var_e
        rho_nu = neighborhood_mean_correlation(cfg.nu, ndim, intra)
        eta_nu = neighborhood_mean_correlation(cfg.nu, ndim, noise)
        eta_scale = var_eps if neighborhood_noise_term == "local" else var_e
        den = [s ** 2 * rho_nu + eta_scale * eta_nu + var_e for s in (sj, sjp)]
        return ratio(num, *den)

    if method == "R":
        num = sj * sjp * r + var_e
        rho_d, eta_d = intra(delta), noise(delta)
        den = [s ** 2 * rho_d + var_eps * eta_d + var_e for s in (sj, sjp)]
        return ratio(num, *den)

    if method == "LR":
        num = sj * sjp * r + var_e
        rho_nd = paired_neighborhood_mean_correlation(cfg.nu, delta, ndim, intra)
        eta_nd = paired_neighborhood_mean_correlation(cfg.nu, delta, ndim, noise)
        den = [s ** 2 * rho_nd + var_eps * eta_nd + var_e for s in (sj, sjp)]
        return ratio(num, *den)

    if method in D_FAMILY:
        sk = params.region(cfg.donor_k).sigma
        skp = params.region(cfg.donor_kp).sigma
        r_jk = params.inter_r(cfg.target_j, cfg.donor_k)
        r_jkp = params.inter_r(cfg.target_j, cfg.donor_kp)
        r_jpk = params.inter_r(cfg.target_jp, cfg.donor_k)
        r_jpkp = params.inter_r(cfg.target_jp, cfg.donor_kp)
        r_kkp = params.inter_r(cfg.donor_k, cfg.donor_kp)
        # donor cross terms of cov(Yj - Yk, Yj' - Yk') and of each
        # s_hat_squared factor; all zero for disconnected donors
        tau_num = (-sj * skp * r_jkp - sjp * sk * r_jpk + sk * skp * r_kkp)
        tau_j = (-sj * sk * r_jk - sj * skp * r_jkp + sk * skp * r_kkp)
        tau_jp = (-sjp * sk * r_jpk - sjp * skp * r_jpkp + sk * skp * r_kkp)
        num = sj * sjp * r + tau_num
        c = float(local_noise_terms)

        if method == "D":
            return ratio(num, sj ** 2 + c * var_eps + tau_j,
                         sjp ** 2 + c * var_eps + tau_jp)
        if method == "LD":
            rho_nu = neighborhood_mean_correlation(cfg.nu, ndim, intra)
            eta_nu = neighborhood_mean_correlation(cfg.nu, ndim, noise)
            return ratio(num, sj ** 2 * rho_nu + c * var_eps * eta_nu + tau_j,
                         sjp ** 2 * rho_nu + c * var_eps * eta_nu + tau_jp)
        if method == "RD":
            rho_d, eta_d = intra(delta), noise(delta)
            return ratio(num, sj ** 2 * rho_d + var_eps * eta_d + tau_j,
                         sjp ** 2 * rho_d + var_eps * eta_d + tau_jp)
        # LRD
        rho_nd = paired_neighborhood_mean_correlation(cfg.nu, delta, ndim, intra)
        eta_nd = paired_neighborhood_mean_correlation(cfg.nu, delta, ndim, noise)
        return ratio(num, sj ** 2 * rho_nd + var_eps * eta_nd + tau_j,
                     sjp ** 2 * rho_nd + var_eps * eta_nd + tau_jp)

    raise ValueError(f"no limit implemented for method {method!r}")
