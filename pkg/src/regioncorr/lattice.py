"""Integer-lattice geometry for block regions of voxels.

Voxels are points of Z^d (d = 1, 2 or 3) and every distance is taken in
the uniform (max) norm.  A region of interest is an axis-aligned
rectangular block of voxels; a nu-neighborhood is the (2*nu+1)^d block
of voxels within uniform distance nu of a center.

Besides enumeration and sampling, this module computes exact aggregated
correlation averages: the mean of a distance-indexed correlation
function over all ordered voxel pairs of a block, of a whole region, or
across two neighborhoods separated by a fixed distance.  These averages
are the attenuation constants that appear in the closed-form limits of
the inter-correlation estimators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

Coords = tuple[int, ...]


# ---------------------------------------------------------------------------
# distance-indexed correlation functions
# ---------------------------------------------------------------------------

class CorrelationFunction:
    """A correlation evaluable at any nonnegative integer distance."""

    def values(self, distances: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over an integer distance array."""
        raise NotImplementedError

    def __call__(self, distance: int) -> float:
        return float(self.values(np.asarray([distance]))[0])

    def as_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearDecayCorrelation(CorrelationFunction):
    """Signal intra-correlation rho(d) = max(1 - d/k_max, r_min).

    Equals 1 at distance 0 and decays linearly down to the floor
    ``r_min``.  ``r_min = 1`` yields the constant correlation 1.

    Parameters
    ----------
    k_max : float
        Decay scale (> 0); the correlation loses 1/k_max per lattice step
        until the floor is reached.
    r_min : float
        Floor value in (0, 1].
    """

    k_max: float
    r_min: float

    def __post_init__(self):
        if not self.k_max > 0:
            raise ValueError(f"k_max must be > 0, got {self.k_max}")
        if not 0.0 < self.r_min <= 1.0:
            raise ValueError(f"r_min must be in (0, 1], got {self.r_min}")

    def values(self, distances: np.ndarray) -> np.ndarray:
        d = np.asarray(distances, dtype=np.float64)
        return np.maximum(1.0 - d / self.k_max, self.r_min)

    def as_dict(self) -> dict:
        return {"kind": "linear_decay", "k_max": self.k_max, "r_min": self.r_min}


@dataclass(frozen=True)
class CompactNoiseCorrelation(CorrelationFunction):
    """Local-noise spatial correlation with compact support.

    ``weights[d]`` gives eta(d) for d < p; eta(d) = 0 for d >= p, where
    p = len(weights).  The default single weight (1.0,) means spatially
    uncorrelated noise (p = 1).
    """

    weights: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) < 1 or w[0] != 1.0:
            raise ValueError("noise correlation requires weights[0] == 1")
        if any(abs(x) > 1.0 for x in w):
            raise ValueError("noise correlation weights must lie in [-1, 1]")

    @property
    def support(self) -> int:
        """The support bound p: eta(d) = 0 for all d >= p."""
        return len(self.weights)

    def values(self, distances: np.ndarray) -> np.ndarray:
        d = np.asarray(distances, dtype=np.int64)
        w = np.asarray(self.weights, dtype=np.float64)
        return np.where(d < self.support, w[np.minimum(d, self.support - 1)], 0.0)

    def as_dict(self) -> dict:
        return {"kind": "compact_noise", "weights": list(self.weights)}


@dataclass(frozen=True)
class TabulatedCorrelation(CorrelationFunction):
    """Correlation given by an explicit table, constant beyond it."""

    table: tuple[float, ...]
    tail: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(float(x) for x in self.table))
        if len(self.table) < 1:
            raise ValueError("table must hold at least the distance-0 value")

    def values(self, distances: np.ndarray) -> np.ndarray:
        d = np.asarray(distances, dtype=np.int64)
        t = np.asarray(self.table, dtype=np.float64)
        n = len(self.table)
        return np.where(d < n, t[np.minimum(d, n - 1)], self.tail)

    def as_dict(self) -> dict:
        return {"kind": "table", "table": list(self.table), "tail": self.tail}


def correlation_from_dict(data: dict) -> CorrelationFunction:
    """Inverse of ``CorrelationFunction.as_dict``."""
    kind = data["kind"]
    if kind == "linear_decay":
        return LinearDecayCorrelation(data["k_max"], data["r_min"])
    if kind == "compact_noise":
        return CompactNoiseCorrelation(tuple(data["weights"]))
    if kind == "table":
        return TabulatedCorrelation(tuple(data["table"]), data["tail"])
    raise ValueError(f"unknown correlation kind {kind!r}")


# ---------------------------------------------------------------------------
# regions and neighborhoods
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionSpec:
    """An axis-aligned block of voxels with a label and a signal scale.

    Parameters
    ----------
    id : str
        Region label, unique within a layout.
    origin : tuple of int
        Lattice coordinates of the lowest corner.
    shape : tuple of int
        Positive side lengths, one per dimension.
    sigma : float
        Signal standard deviation sigma_j > 0 of the region.
    """

    id: str
    origin: Coords
    shape: Coords
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(int(c) for c in self.origin))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if len(self.origin) != len(self.shape):
            raise ValueError(f"region {self.id!r}: origin/shape dimension mismatch")
        if not 1 <= len(self.shape) <= 3:
            raise ValueError(f"region {self.id!r}: dimension must be 1, 2 or 3")
        if any(s < 1 for s in self.shape):
            raise ValueError(f"region {self.id!r}: side lengths must be >= 1")
        if not self.sigma > 0:
            raise ValueError(f"region {self.id!r}: sigma must be > 0")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.shape))

    @property
    def upper(self) -> Coords:
        """Inclusive coordinates of the highest corner."""
        return tuple(o + s - 1 for o, s in zip(self.origin, self.shape))

    def contains(self, coords: Sequence[int]) -> bool:
        return all(o <= c <= u for c, o, u in
                   zip(coords, self.origin, self.upper))


@dataclass(frozen=True)
class Neighborhood:
    """The (2*nu+1)^d voxels within uniform distance nu of a center."""

    center: Coords
    nu: int
    region_id: str

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))
        if self.nu < 0:
            raise ValueError("nu must be >= 0")

    @property
    def n_voxels(self) -> int:
        return (2 * self.nu + 1) ** len(self.center)

    def voxels(self) -> np.ndarray:
        origin = tuple(c - self.nu for c in self.center)
        side = 2 * self.nu + 1
        return box_voxels(origin, (side,) * len(self.center))


def box_voxels(origin: Sequence[int], shape: Sequence[int]) -> np.ndarray:
    """Enumerate a block's voxels as an (N, d) integer array.

    The enumeration order is fixed and documented: the first coordinate
    varies fastest, the last slowest, e.g. a 2x2 block at the origin
    yields (0,0), (1,0), (0,1), (1,1).
    """
    axes = [np.arange(o, o + s, dtype=np.int64)
            for o, s in zip(origin, shape)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel(order="F") for g in grids])


def region_voxels(spec: RegionSpec) -> np.ndarray:
    """All voxels of a region, in the documented enumeration order."""
    return box_voxels(spec.origin, spec.shape)


def box_row_index(origin: Coords, shape: Coords, coords: Sequence[int]) -> int:
    """Position of ``coords`` in the ``box_voxels`` enumeration."""
    idx = 0
    stride = 1
    for c, o, s in zip(coords, origin, shape):
        off = int(c) - o
        if not 0 <= off < s:
            raise ValueError(f"coords {tuple(coords)} outside box")
        idx += off * stride
        stride *= s
    return idx


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def uniform_distance(a: Sequence[int], b: Sequence[int]) -> int:
    """Uniform-norm distance max_c |a_c - b_c| between two voxels."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return int(np.max(np.abs(a - b))) if a.size else 0


def pairwise_uniform_distances(coords_a: np.ndarray,
                               coords_b: np.ndarray | None = None) -> np.ndarray:
    """(Na, Nb) matrix of uniform-norm distances between voxel lists."""
    a = np.asarray(coords_a, dtype=np.int64)
    b = a if coords_b is None else np.asarray(coords_b, dtype=np.int64)
    return np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=-1)


def box_min_distance(origin_a: Coords, shape_a: Coords,
                     origin_b: Coords, shape_b: Coords) -> int:
    """Uniform-norm distance between two blocks (0 iff they intersect)."""
    gaps = []
    for oa, sa, ob, sb in zip(origin_a, shape_a, origin_b, shape_b):
        ha, hb = oa + sa - 1, ob + sb - 1
        gaps.append(max(0, ob - ha, oa - hb))
    return max(gaps)


def region_min_distance(a: RegionSpec, b: RegionSpec) -> int:
    return box_min_distance(a.origin, a.shape, b.origin, b.shape)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_voxel(spec: RegionSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one voxel uniformly from a region."""
    return np.array([rng.integers(o, o + s)
                     for o, s in zip(spec.origin, spec.shape)], dtype=np.int64)


def sample_neighborhood(spec: RegionSpec, nu: int,
                        rng: np.random.Generator) -> Neighborhood:
    """Draw a nu-neighborhood uniformly among those fully inside a region.

    The center is uniform over the admissible centers, i.e. the voxels
    whose full nu-ball lies inside the region.

    Raises
    ------
    ValueError
        If some region side is shorter than 2*nu + 1.
    """
    if nu < 0:
        raise ValueError("nu must be >= 0")
    side = 2 * nu + 1
    if any(s < side for s in spec.shape):
        raise ValueError(
            f"region {spec.id!r} with shape {spec.shape} is too small for "
            f"nu={nu} (needs every side >= {side})")
    center = tuple(int(rng.integers(o + nu, o + s - nu))
                   for o, s in zip(spec.origin, spec.shape))
    return Neighborhood(center=center, nu=nu, region_id=spec.id)


def _shell_offsets(ndim: int, delta: int) -> np.ndarray:
    """All integer offsets with uniform norm exactly delta."""
    rng_1d = np.arange(-delta, delta + 1, dtype=np.int64)
    grids = np.meshgrid(*([rng_1d] * ndim), indexing="ij")
    offs = np.column_stack([g.ravel() for g in grids])
    keep = np.max(np.abs(offs), axis=1) == delta
    return offs[keep]


def sample_replicate_pair(spec: RegionSpec, delta: int,
                          rng: np.random.Generator,
                          max_tries: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Draw an ordered voxel pair of a region at uniform distance delta.

    The draw is uniform over all ordered pairs (i1, i2) with both voxels
    in the region and |i2 - i1| = delta, implemented by rejection over
    (first voxel, offset on the distance-delta shell).

    Raises
    ------
    ValueError
        If the region admits no pair at distance delta
        (i.e. every side is <= delta).
    """
    if delta < 1:
        raise ValueError("delta must be >= 1")
    if max(spec.shape) < delta + 1:
        raise ValueError(
            f"region {spec.id!r} with shape {spec.shape} has no voxel pair "
            f"at distance {delta}")
    offsets = _shell_offsets(spec.ndim, delta)
    for _ in range(max_tries):
        i1 = sample_voxel(spec, rng)
        off = offsets[rng.integers(len(offsets))]
        i2 = i1 + off
        if spec.contains(i2):
            return i1, i2
    raise RuntimeError(
        f"rejection sampling failed for region {spec.id!r}, delta={delta}")


def sample_neighborhood_pair(spec: RegionSpec, nu: int, delta: int,
                             rng: np.random.Generator
                             ) -> tuple[Neighborhood, Neighborhood]:
    """Draw two nu-neighborhoods of a region at ball-to-ball distance delta.

    The second center is the first translated by 2*nu + delta along a
    uniformly drawn feasible axis and sign, which puts the two balls at
    uniform set distance exactly delta.  The first center is uniform
    among the positions keeping both balls inside the region.
    """
    if nu < 0 or delta < 1:
        raise ValueError("need nu >= 0 and delta >= 1")
    side = 2 * nu + 1
    shift = 2 * nu + delta
    if any(s < side for s in spec.shape):
        raise ValueError(
            f"region {spec.id!r} too small for nu={nu}")
    feasible = [(axis, sign)
                for axis in range(spec.ndim) if spec.shape[axis] >= side + shift
                for sign in (+1, -1)]
    if not feasible:
        raise ValueError(
            f"region {spec.id!r} with shape {spec.shape} cannot host two "
            f"nu={nu} neighborhoods at distance {delta} "
            f"(needs a side >= {side + shift})")
    axis, sign = feasible[rng.integers(len(feasible))]
    center1 = []
    for c, (o, s) in enumerate(zip(spec.origin, spec.shape)):
        lo, hi = o + nu, o + s - 1 - nu
        if c == axis:
            if sign > 0:
                hi -= shift
            else:
                lo += shift
        center1.append(int(rng.integers(lo, hi + 1)))
    center2 = list(center1)
    center2[axis] += sign * shift
    return (Neighborhood(tuple(center1), nu, spec.id),
            Neighborhood(tuple(center2), nu, spec.id))


# ---------------------------------------------------------------------------
# exact aggregated correlation sums
# ---------------------------------------------------------------------------

def pair_distance_counts(shape: Sequence[int]) -> np.ndarray:
    """counts[D] = number of ordered voxel pairs of a block at distance D.

    Exact integer counts via the separable cumulative formula: the
    number of ordered pairs at distance <= D factorizes over axes as
    prod_c S_c(D) with S_c(D) = sum_{|v| <= min(D, L_c - 1)} (L_c - |v|).
    The counts sum to N^2.
    """
    shape = tuple(int(s) for s in shape)
    dmax = max(shape) - 1
    cums = np.empty(dmax + 1, dtype=np.int64)
    for dist in range(dmax + 1):
        prod = 1
        for length in shape:
            m = min(dist, length - 1)
            prod *= length + 2 * (m * length - m * (m + 1) // 2)
        cums[dist] = prod
    return np.diff(cums, prepend=0)


def cross_pair_distance_counts(origin_a: Coords, shape_a: Coords,
                               origin_b: Coords, shape_b: Coords) -> np.ndarray:
    """counts[D] = ordered pairs (i in A, i' in B) at uniform distance D."""
    ndim = len(shape_a)
    axis_cums = []
    dmax = 0
    for c in range(ndim):
        la, lb = int(shape_a[c]), int(shape_b[c])
        g = int(origin_b[c]) - int(origin_a[c])
        x = np.arange(la, dtype=np.int64)
        y = np.arange(lb, dtype=np.int64)
        dvals = np.abs(g + y[None, :] - x[:, None]).ravel()
        dmax = max(dmax, int(dvals.max()))
        axis_cums.append(dvals)
    cums = np.ones(dmax + 1, dtype=np.int64)
    for dvals in axis_cums:
        hist = np.bincount(dvals, minlength=dmax + 1)
        cums *= np.cumsum(hist)
    return np.diff(cums, prepend=0)


def _mean_over_counts(counts: np.ndarray, corr: CorrelationFunction) -> float:
    weights = corr.values(np.arange(len(counts)))
    total = int(counts.sum())
    return float(np.dot(counts.astype(np.float64), weights) / total)


def mean_correlation_box(shape: Sequence[int], corr: CorrelationFunction) -> float:
    """Average of corr(|i' - i|) over all ordered voxel pairs of a block."""
    return _mean_over_counts(pair_distance_counts(shape), corr)


def mean_correlation_between_boxes(origin_a: Coords, shape_a: Coords,
                                   origin_b: Coords, shape_b: Coords,
                                   corr: CorrelationFunction) -> float:
    """Average of corr(|i' - i|) over ordered pairs across two blocks."""
    counts = cross_pair_distance_counts(origin_a, shape_a, origin_b, shape_b)
    return _mean_over_counts(counts, corr)


def region_mean_correlation(spec: RegionSpec, corr: CorrelationFunction) -> float:
    """Whole-region aggregated correlation (rho-bar or eta-bar of a region)."""
    return mean_correlation_box(spec.shape, corr)


def neighborhood_mean_correlation(nu: int, ndim: int,
                                  corr: CorrelationFunction) -> float:
    """Aggregated correlation over one nu-neighborhood.

    nu = 0 is admitted as the degenerate single-voxel case, where the
    average reduces to corr(0) = 1.
    """
    side = 2 * nu + 1
    return mean_correlation_box((side,) * ndim, corr)


def paired_neighborhood_mean_correlation(nu: int, delta: int, ndim: int,
                                         corr: CorrelationFunction) -> float:
    """Aggregated correlation across two nu-neighborhoods at distance delta.

    The two balls are placed in the canonical axis-aligned arrangement
    (second ball translated by 2*nu + delta along one axis); by symmetry
    of the uniform norm the value does not depend on the chosen axis.
    delta = 0 denotes the degenerate coincident case and reduces to the
    single-neighborhood average.
    """
    side = 2 * nu + 1
    shape = (side,) * ndim
    if delta == 0:
        return mean_correlation_box(shape, corr)
    origin_a = (0,) * ndim
    origin_b = (side - 1 + delta,) + (0,) * (ndim - 1)
    return mean_correlation_between_boxes(origin_a, shape, origin_b, shape, corr)
