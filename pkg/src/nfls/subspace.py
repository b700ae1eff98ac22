"""Covariance estimation, subspace extraction, and grid-search spectra.

The two workhorse surfaces are projections of a data matrix X onto the
one-target steering direction,

    p(theta, r) = tr(P_a X X^H) = ||a^H X||^2 / ||a||^2,

evaluated with X = Y (deterministic ML) or X = U_s (signal-subspace form),
and the classical noise-subspace reciprocal 1 / (a^H U_n U_n^H a).
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InsufficientPeaksError
from .geometry import ArrayGeometry
from .grids import LocationGrid, SpectrumGrid

HERMITIAN_ATOL = 1e-10


@dataclass(frozen=True)
class CovarianceEstimate:
    """Hermitian sample covariance R = Y Y^H / L."""

    r: np.ndarray
    n_samples: int

    @property
    def n(self) -> int:
        return self.r.shape[0]


@dataclass(frozen=True)
class SubspaceDecomposition:
    """Eigenvalues (descending) and signal/noise subspace bases."""

    eigenvalues: np.ndarray
    signal: np.ndarray  # (N, K)
    noise: np.ndarray  # (N, N-K)

    @property
    def k(self) -> int:
        return self.signal.shape[1]


def sample_covariance(y) -> CovarianceEstimate:
    """Sample average R = Y Y^H / L, symmetrized to be exactly Hermitian."""
    ym = np.asarray(getattr(y, "y", y), dtype=complex)
    if ym.ndim != 2 or ym.size == 0:
        raise ValueError("need a non-empty (N, L) snapshot matrix")
    l = ym.shape[1]
    r = ym @ ym.conj().T / l
    r = (r + r.conj().T) / 2.0
    return CovarianceEstimate(r=r, n_samples=l)


def eig_decompose(cov, k: int) -> SubspaceDecomposition:
    """Hermitian eigendecomposition split into K signal and N-K noise directions."""
    r = cov.r if isinstance(cov, CovarianceEstimate) else np.asarray(cov, dtype=complex)
    n = r.shape[0]
    if not (0 <= k < n):
        raise ValueError(f"need 0 <= k < N, got k={k}, N={n}")
    scale = max(np.abs(r).max(), 1.0)
    if np.abs(r - r.conj().T).max() > HERMITIAN_ATOL * scale:
        raise ValueError("covariance is not Hermitian within tolerance")
    w, v = np.linalg.eigh(r)
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    return SubspaceDecomposition(eigenvalues=w, signal=v[:, :k], noise=v[:, k:])


def estimate_num_targets(eigenvalues, ratio: float = 10.0) -> int:
    """Count eigenvalues exceeding ratio * median (noise-floor rule)."""
    w = np.asarray(eigenvalues, dtype=float)
    if np.any(np.diff(w) > 0):
        raise ValueError("eigenvalues must be sorted descending")
    med = np.median(w)
    return int(np.sum(w > ratio * med))


def _as_basis(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        x = x[:, None]
    return x


def _gram_factor(x: np.ndarray) -> np.ndarray:
    """Replace a wide data matrix by a thin factor B with B B^H = X X^H."""
    n = x.shape[0]
    if x.shape[1] <= n:
        return x
    m = x @ x.conj().T
    m = (m + m.conj().T) / 2.0
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)[None, :]


def spectrum_single(x, geometry: ArrayGeometry, wavelength: float, grid: LocationGrid,
                    include_amplitude: bool = False) -> SpectrumGrid:
    """Single-target projection surface tr(P_a(theta,r) X X^H) over the grid.

    With X = Y this is the deterministic-ML single-target spectrum; with
    X = U_s it is the signal-subspace form whose values lie in (0, 1].
    """
    basis = _gram_factor(_as_basis(x))
    power, anorm2 = kernels.projection_power_nearfield(
        geometry.positions, grid.thetas, grid.rs, wavelength, include_amplitude, basis)
    values = power / anorm2
    return SpectrumGrid(grid=grid, values=values,
                        meta={"surface": "projection", "include_amplitude": include_amplitude})


def music_spectrum_noise(noise_basis, geometry: ArrayGeometry, wavelength: float,
                         grid: LocationGrid, include_amplitude: bool = False,
                         clamp_ratio: float = 1e6) -> SpectrumGrid:
    """Noise-subspace reciprocal spectrum 1 / (a^H U_n U_n^H a).

    With the amplitude convention enabled the numerator ||a||^2 is kept.
    Cells whose denominator falls below 1e-15 (exact orthogonality spikes in
    noiseless data) are clamped to clamp_ratio * median(spectrum) and flagged.
    """
    un = _as_basis(noise_basis)
    power, anorm2 = kernels.projection_power_nearfield(
        geometry.positions, grid.thetas, grid.rs, wavelength, include_amplitude, un)
    num = anorm2 if include_amplitude else np.ones_like(power)
    spiked = power < 1e-15
    values = num / np.where(spiked, 1.0, power)
    if spiked.any():
        finite = values[~spiked]
        ceiling = clamp_ratio * (np.median(finite) if finite.size else 1.0)
        values = np.where(spiked, ceiling, values)
    return SpectrumGrid(grid=grid, values=values, flags=spiked,
                        meta={"surface": "music-noise", "include_amplitude": include_amplitude,
                              "clamp_ratio": clamp_ratio, "clamped_cells": int(spiked.sum())})


@dataclass(frozen=True)
class PairFitResult:
    """Two-target subspace fit: objective over all grid-cell pairs."""

    grid: LocationGrid
    scores: np.ndarray  # (G, G) over flattened cells, -inf where A is rank-deficient
    flags: np.ndarray
    best: tuple  # ((theta, r), (theta, r))


def fit_subspace_multi(x, geometry: ArrayGeometry, wavelength: float,
                       grid: LocationGrid, k: int, include_amplitude: bool = False,
                       cond_tol: float = 1e-12):
    """K-target subspace fit tr(P_A X X^H) by exhaustive grid search.

    The search cost grows as (grid cells)^K, so only K <= 2 is supported;
    K = 1 reduces exactly to ``spectrum_single``. Grid tuples at which the
    steering matrix loses column rank are scored -inf and flagged.
    """
    if k not in (1, 2):
        raise ValueError("multi-target fit supports only k in {1, 2}")
    if k == 1:
        return spectrum_single(x, geometry, wavelength, grid, include_amplitude)
    if grid.n_cells > 4096:
        raise ValueError("two-target fit is limited to grids of <= 4096 cells "
                         "(the search cost is quadratic in the cell count)")
    basis = _gram_factor(_as_basis(x))
    # steering matrix over all cells, cell index g = i * n_r + j
    tt, rr = np.meshgrid(grid.thetas, grid.rs, indexing="ij")
    pos = geometry.positions
    from .model import exact_distance, target_location

    cells = np.column_stack([tt.ravel(), rr.ravel()])
    g = cells.shape[0]
    a = np.empty((pos.shape[0], g), dtype=complex)
    for idx in range(g):
        th, r = cells[idx]
        rn = exact_distance(pos, target_location(th, r))
        a[:, idx] = np.exp(-2j * np.pi * (rn - r) / wavelength)
        if include_amplitude:
            a[:, idx] *= r / rn
    gram = a.conj().T @ a  # (G, G)
    m = a.conj().T @ basis  # (G, C)
    cross = m @ m.conj().T  # (G, G): cross[i, j] = a_i^H X X^H a_j
    gii = np.real(np.diag(gram))
    cii = np.real(np.diag(cross))
    # tr(P_[ai aj] X X^H) via the 2x2 gram inverse
    det = gii[:, None] * gii[None, :] - np.abs(gram) ** 2
    numer = (gii[None, :] * cii[:, None] + gii[:, None] * cii[None, :]
             - 2.0 * np.real(gram * cross.conj()))
    flags = det <= cond_tol * np.maximum(gii[:, None] * gii[None, :], 1e-300)
    scores = np.where(flags, -np.inf, numer / np.where(flags, 1.0, det))
    bi, bj = np.unravel_index(int(np.argmax(scores)), scores.shape)
    best = (tuple(cells[bi]), tuple(cells[bj]))
    return PairFitResult(grid=grid, scores=scores, flags=flags, best=best)


@dataclass(frozen=True)
class Peak:
    theta: float
    r: float
    value: float
    i: int
    j: int


@dataclass(frozen=True)
class PeakSet:
    peaks: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.peaks)

    def __len__(self):
        return len(self.peaks)

    def locations(self) -> np.ndarray:
        return np.array([[p.theta, p.r] for p in self.peaks])


@dataclass(frozen=True)
class PeakExclusion:
    """Neighborhood suppressed around an accepted peak.

    A candidate is excluded when BOTH |cos(theta) - cos(theta_peak)| <=
    cos_width AND its distance offset from the peak falls inside the
    distance mainlobe window at the peak's distance (computed from the
    threshold distance d_t when given, else from r_window).
    """

    cos_width: float
    d_t: float | None = None
    r_window: float | None = None

    def covers(self, peak: Peak, theta: float, r: float) -> bool:
        if abs(np.cos(theta) - np.cos(peak.theta)) > self.cos_width:
            return False
        dr = r - peak.r
        if self.d_t is not None:
            lo = -peak.r**2 / (self.d_t + peak.r)
            hi = peak.r**2 / (self.d_t - peak.r) if peak.r < self.d_t else np.inf
            return lo <= dr <= hi
        if self.r_window is not None:
            return abs(dr) <= self.r_window
        return True


def default_exclusion(n: int, spacing: float, wavelength: float,
                      theta0: float = np.pi / 2) -> PeakExclusion:
    """One direction-mainlobe by one distance-mainlobe exclusion box."""
    from .analysis import hpmw_direction, threshold_distance

    return PeakExclusion(cos_width=hpmw_direction(n, spacing, wavelength),
                         d_t=threshold_distance(n, spacing, wavelength, theta0))


def _strict_local_maxima(values: np.ndarray) -> list[tuple[int, int]]:
    """Cells strictly greater than every existing 8-neighbor."""
    nt, nr = values.shape
    pad = np.full((nt + 2, nr + 2), -np.inf)
    pad[1:-1, 1:-1] = values
    mask = np.ones((nt, nr), dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            mask &= values > pad[1 + di:1 + di + nt, 1 + dj:1 + dj + nr]
    return [(int(i), int(j)) for i, j in np.argwhere(mask)]


def find_peaks(spectrum: SpectrumGrid, k: int, exclusion: PeakExclusion | None = None) -> PeakSet:
    """Greedy selection of the K highest strict local maxima.

    Candidates are ordered by value (ties broken by smaller theta index, then
    smaller r index); each accepted peak suppresses candidates inside its
    exclusion neighborhood. Raises InsufficientPeaksError (carrying whatever
    was found) when fewer than K survive.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    grid, values = spectrum.grid, spectrum.values
    cand = _strict_local_maxima(values)
    cand.sort(key=lambda ij: (-values[ij], ij[0], ij[1]))
    accepted: list[Peak] = []
    for i, j in cand:
        if len(accepted) == k:
            break
        th, r = float(grid.thetas[i]), float(grid.rs[j])
        if exclusion is not None and any(exclusion.covers(p, th, r) for p in accepted):
            continue
        accepted.append(Peak(theta=th, r=r, value=float(values[i, j]), i=i, j=j))
    if len(accepted) < k:
        raise InsufficientPeaksError(
            f"found {len(accepted)} local maxima, needed {k}", PeakSet(peaks=accepted))
    return PeakSet(peaks=accepted)
