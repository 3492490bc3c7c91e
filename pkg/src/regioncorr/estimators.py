"""Inter-correlation estimators for two target regions of a dataset.

Ten methods estimate the inter-correlation r between the target regions
j and j' of a :class:`~regioncorr.model.Dataset`:

=======  ==========================================================
CA       correlation of the two regions' spatial-average series
AC       average of correlations over all voxel pairs across regions
ACt      CA rescaled by the mean within-region correlations
LCA      average correlation of small-neighborhood means
R        replicate pairs at distance delta, attenuation self-corrected
LR       replicates of neighborhood means
D        difference correlations against two disconnected donor regions
LD       D on neighborhood means
RD       replicate-corrected D
LRD      replicate-corrected D on neighborhood means
=======  ==========================================================

Draw-based methods (everything past ACt) repeat B independent draws of
voxels, pairs or neighborhoods from a sampler seeded by the
configuration, average the per-draw statistics, and discard draws whose
denominators are undefined (nonpositive under a square root).  Results
are a pure function of (dataset, configuration), including the full
draw sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset
from .lattice import (
    sample_neighborhood,
    sample_neighborhood_pair,
    sample_replicate_pair,
    sample_voxel,
)
from .stats import (
    DegenerateSeriesError,
    UndefinedDifferenceCorrelationError,
    cor_tilde,
    sample_cor,
)

METHODS = ("CA", "AC", "ACt", "LCA", "R", "LR", "D", "LD", "RD", "LRD")
D_FAMILY = frozenset({"D", "LD", "RD", "LRD"})
DRAW_BASED = frozenset({"LCA", "R", "LR", "D", "LD", "RD", "LRD"})

_CANONICAL = {m.upper(): m for m in METHODS}


def canonical_method(name: str) -> str:
    """Normalize a method name, raising on unknown ones."""
    try:
        return _CANONICAL[name.upper()]
    except KeyError:
        raise ValueError(
            f"unknown method {name!r}; expected one of {METHODS}") from None


class EstimationError(RuntimeError):
    """Every draw of a draw-based estimator was discarded."""


@dataclass
class EstimatorConfig:
    """Method identifier plus hyperparameters.

    ``delta = None`` resolves to max(p, 1) where p is the local-noise
    support of the dataset being estimated.  Donor regions are required
    exactly for the difference-based methods (D, LD, RD, LRD).
    """

    method: str
    target_j: str
    target_jp: str
    donor_k: str | None = None
    donor_kp: str | None = None
    nu: int = 1
    delta: int | None = None
    B: int = 100
    sampler_seed: int = 0

    def __post_init__(self):
        self.method = canonical_method(self.method)
        if self.target_j == self.target_jp:
            raise ValueError("target regions must differ")
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        if self.delta is not None and self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if self.method in D_FAMILY:
            if self.donor_k is None or self.donor_kp is None:
                raise ValueError(f"method {self.method} requires two donor regions")
            involved = (self.target_j, self.target_jp, self.donor_k, self.donor_kp)
            if len(set(involved)) != 4:
                raise ValueError("donors must be distinct from targets and "
                                 "from each other")
        elif self.donor_k is not None or self.donor_kp is not None:
            raise ValueError(f"method {self.method} takes no donor regions")

    def resolved_delta(self, params) -> int:
        if self.delta is not None:
            return self.delta
        return max(params.noise_corr.support, 1)


@dataclass
class EstimateResult:
    """One scalar estimate plus draw-accounting for draw-based methods."""

    value: float
    draws_used: int
    discarded: int


def _validate(ds: Dataset, cfg: EstimatorConfig) -> None:
    for rid in (cfg.target_j, cfg.target_jp, cfg.donor_k, cfg.donor_kp):
        if rid is not None:
            ds.params.region(rid)  # raises KeyError if missing
    if cfg.method in ("R", "LR", "RD", "LRD"):
        delta = cfg.resolved_delta(ds.params)
        p = ds.params.noise_corr.support
        if delta < p:
            raise ValueError(
                f"delta={delta} must be >= the local-noise support p={p}")


def estimate(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Evaluate one estimator on a dataset."""
    _validate(ds, cfg)
    return _DISPATCH[cfg.method](ds, cfg)


# ---------------------------------------------------------------------------
# aggregate methods: CA, AC, ACt
# ---------------------------------------------------------------------------

def est_ca(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Correlation between the two regions' spatial-average series."""
    value = sample_cor(ds.region_mean_series(cfg.target_j),
                       ds.region_mean_series(cfg.target_jp))
    return EstimateResult(value=value, draws_used=1, discarded=0)


def _unit_rows(y: np.ndarray) -> np.ndarray:
    """Center each row and scale it to unit Euclidean norm.

    For unit rows u, the sample correlation of two voxels is exactly the
    dot product of their rows, so averages of correlations over many
    pairs collapse to dot products of row means.
    """
    yc = y - y.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", yc, yc))
    if np.any(norms == 0.0):
        raise DegenerateSeriesError("degenerate series")
    return yc / norms[:, None]


def est_ac(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Mean sample correlation over all Nj * Nj' cross-region voxel pairs.

    Computed through sufficient statistics (means of unit-normalized
    rows) rather than a literal pair loop; the value is identical.
    """
    uj = _unit_rows(ds.y[ds.region_rows(cfg.target_j)]).mean(axis=0)
    ujp = _unit_rows(ds.y[ds.region_rows(cfg.target_jp)]).mean(axis=0)
    return EstimateResult(value=float(np.dot(uj, ujp)), draws_used=1, discarded=0)


def est_ac_tilde(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Correlation of averages rescaled by mean within-region correlations.

    Multiplies the CA statistic by the square root of the product of the
    two mean within-region pair correlations, cancelling the
    within-region aggregation in CA's denominator; shares its
    large-sample limit with AC.
    """
    uj = _unit_rows(ds.y[ds.region_rows(cfg.target_j)]).mean(axis=0)
    ujp = _unit_rows(ds.y[ds.region_rows(cfg.target_jp)]).mean(axis=0)
    wj = float(np.dot(uj, uj))
    wjp = float(np.dot(ujp, ujp))
    ca = est_ca(ds, cfg).value
    return EstimateResult(value=float(np.sqrt(wj * wjp)) * ca,
                          draws_used=1, discarded=0)


# ---------------------------------------------------------------------------
# draw-based methods
# ---------------------------------------------------------------------------

def _run_draws(cfg: EstimatorConfig, one_draw) -> EstimateResult:
    """Average ``one_draw(rng)`` over B draws, discarding invalid ones.

    ``one_draw`` returns a float or raises
    UndefinedDifferenceCorrelationError / _DiscardDraw to discard.  The
    rng is consumed sequentially so the draw sequence is reproducible
    from the sampler seed alone.
    """
    rng = np.random.default_rng(cfg.sampler_seed)
    total = 0.0
    used = 0
    discarded = 0
    for _ in range(cfg.B):
        try:
            term = one_draw(rng)
        except (UndefinedDifferenceCorrelationError, _DiscardDraw):
            discarded += 1
            continue
        total += term
        used += 1
    if used == 0:
        raise EstimationError(
            f"method {cfg.method}: all {cfg.B} draws were discarded")
    return EstimateResult(value=total / used, draws_used=used,
                          discarded=discarded)


class _DiscardDraw(Exception):
    pass


def est_lca(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Average correlation of one nu-neighborhood mean per target region."""
    rj = ds.params.region(cfg.target_j)
    rjp = ds.params.region(cfg.target_jp)

    def one_draw(rng):
        vj = sample_neighborhood(rj, cfg.nu, rng)
        vjp = sample_neighborhood(rjp, cfg.nu, rng)
        return sample_cor(ds.neighborhood_mean_series(vj),
                          ds.neighborhood_mean_series(vjp))

    return _run_draws(cfg, one_draw)


def _replicate_ratio(cross: list[np.ndarray], within_j: tuple[np.ndarray, np.ndarray],
                     within_jp: tuple[np.ndarray, np.ndarray]) -> float:
    """Four-term mean cross correlation over the root within-pair product.

    ``cross`` holds the four series pairs flattened as
    [(a1, b1), (a1, b2), (a2, b1), (a2, b2)] correlations' inputs; the
    within pairs self-calibrate the attenuation.  Discards the draw when
    the within-pair correlation product is nonpositive.
    """
    num = sum(sample_cor(a, b) for a, b in cross) / 4.0
    den_sq = (sample_cor(*within_j) * sample_cor(*within_jp))
    if den_sq <= 0.0:
        raise _DiscardDraw
    return num / float(np.sqrt(den_sq))


def est_r(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Replicate-pair estimator on single voxel series.

    Each draw takes one ordered pair per target region at uniform
    distance exactly delta, correlates the four cross-region
    combinations and divides by the square root of the product of the
    two within-pair correlations.
    """
    rj = ds.params.region(cfg.target_j)
    rjp = ds.params.region(cfg.target_jp)
    delta = cfg.resolved_delta(ds.params)

    def one_draw(rng):
        i1, i2 = sample_replicate_pair(rj, delta, rng)
        i1p, i2p = sample_replicate_pair(rjp, delta, rng)
        a1, a2 = ds.series(rj.id, i1), ds.series(rj.id, i2)
        b1, b2 = ds.series(rjp.id, i1p), ds.series(rjp.id, i2p)
        return _replicate_ratio(
            [(a1, b1), (a1, b2), (a2, b1), (a2, b2)], (a1, a2), (b1, b2))

    return _run_draws(cfg, one_draw)


def est_lr(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Replicate estimator on nu-neighborhood means.

    Like R, but each replicate is the average series of a
    nu-neighborhood; the two neighborhoods of a region are separated by
    ball-to-ball distance exactly delta.
    """
    rj = ds.params.region(cfg.target_j)
    rjp = ds.params.region(cfg.target_jp)
    delta = cfg.resolved_delta(ds.params)

    def one_draw(rng):
        vj1, vj2 = sample_neighborhood_pair(rj, cfg.nu, delta, rng)
        vjp1, vjp2 = sample_neighborhood_pair(rjp, cfg.nu, delta, rng)
        a1 = ds.neighborhood_mean_series(vj1)
        a2 = ds.neighborhood_mean_series(vj2)
        b1 = ds.neighborhood_mean_series(vjp1)
        b2 = ds.neighborhood_mean_series(vjp2)
        return _replicate_ratio(
            [(a1, b1), (a1, b2), (a2, b1), (a2, b2)], (a1, a2), (b1, b2))

    return _run_draws(cfg, one_draw)


def est_d(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Difference-correlation estimator using two donor regions.

    Each draw takes one voxel from each of j, j', k and k' and evaluates
    the difference correlation of the target series against the donor
    series, which removes any signal shared by all voxels.
    """
    rj = ds.params.region(cfg.target_j)
    rjp = ds.params.region(cfg.target_jp)
    rk = ds.params.region(cfg.donor_k)
    rkp = ds.params.region(cfg.donor_kp)

    def one_draw(rng):
        yi = ds.series(rj.id, sample_voxel(rj, rng))
        yip = ds.series(rjp.id, sample_voxel(rjp, rng))
        yk = ds.series(rk.id, sample_voxel(rk, rng))
        ykp = ds.series(rkp.id, sample_voxel(rkp, rng))
        return cor_tilde(yi, yip, yk, ykp)

    return _run_draws(cfg, one_draw)


def est_ld(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Difference-correlation estimator on nu-neighborhood means."""
    rj = ds.params.region(cfg.target_j)
    rjp = ds.params.region(cfg.target_jp)
    rk = ds.params.region(cfg.donor_k)
    rkp = ds.params.region(cfg.donor_kp)

    def one_draw(rng):
        yi = ds.neighborhood_mean_series(sample_neighborhood(rj, cfg.nu, rng))
        yip = ds.neighborhood_mean_series(sample_neighborhood(rjp, cfg.nu, rng))
        yk = ds.neighborhood_mean_series(sample_neighborhood(rk, cfg.nu, rng))
        ykp = ds.neighborhood_mean_series(sample_neighborhood(rkp, cfg.nu, rng))
        return cor_tilde(yi, yip, yk, ykp)

    return _run_draws(cfg, one_draw)


def _difference_replicate_ratio(a1, a2, b1, b2, yk, ykp) -> float:
    """Replicate ratio built from difference correlations.

    One donor series per donor region is shared by the four numerator
    terms and both denominator terms of the draw.
    """
    num = (cor_tilde(a1, b1, yk, ykp) + cor_tilde(a1, b2, yk, ykp)
           + cor_tilde(a2, b1, yk, ykp) + cor_tilde(a2, b2, yk, ykp)) / 4.0
    den_sq = cor_tilde(a1, a2, yk, ykp) * cor_tilde(b1, b2, yk, ykp)
    if den_sq <= 0.0:
        raise _DiscardDraw
    return num / float(np.sqrt(den_sq))


def est_rd(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Replicate-corrected difference estimator on single voxels."""
    rj = ds.params.region(cfg.target_j)
    rjp = ds.params.region(cfg.target_jp)
    rk = ds.params.region(cfg.donor_k)
    rkp = ds.params.region(cfg.donor_kp)
    delta = cfg.resolved_delta(ds.params)

    def one_draw(rng):
        i1, i2 = sample_replicate_pair(rj, delta, rng)
        i1p, i2p = sample_replicate_pair(rjp, delta, rng)
        yk = ds.series(rk.id, sample_voxel(rk, rng))
        ykp = ds.series(rkp.id, sample_voxel(rkp, rng))
        return _difference_replicate_ratio(
            ds.series(rj.id, i1), ds.series(rj.id, i2),
            ds.series(rjp.id, i1p), ds.series(rjp.id, i2p), yk, ykp)

    return _run_draws(cfg, one_draw)


def est_lrd(ds: Dataset, cfg: EstimatorConfig) -> EstimateResult:
    """Replicate-corrected difference estimator on neighborhood means."""
    rj = ds.params.region(cfg.target_j)
    rjp = ds.params.region(cfg.target_jp)
    rk = ds.params.region(cfg.donor_k)
    rkp = ds.params.region(cfg.donor_kp)
    delta = cfg.resolved_delta(ds.params)

    def one_draw(rng):
        vj1, vj2 = sample_neighborhood_pair(rj, cfg.nu, delta, rng)
        vjp1, vjp2 = sample_neighborhood_pair(rjp, cfg.nu, delta, rng)
        yk = ds.neighborhood_mean_series(sample_neighborhood(rk, cfg.nu, rng))
        ykp = ds.neighborhood_mean_series(sample_neighborhood(rkp, cfg.nu, rng))
        return _difference_replicate_ratio(
            ds.neighborhood_mean_series(vj1), ds.neighborhood_mean_series(vj2),
            ds.neighborhood_mean_series(vjp1), ds.neighborhood_mean_series(vjp2),
            yk, ykp)

    return _run_draws(cfg, one_draw)


_DISPATCH = {
    "CA": est_ca,
    "AC": est_ac,
    "ACt": est_ac_tilde,
    "LCA": est_lca,
    "R": est_r,
    "LR": est_lr,
    "D": est_d,
    "LD": est_ld,
    "RD": est_rd,
    "LRD": est_lrd,
}
