"""Decoupled direction/distance estimation on symmetric ULAs.

For a symmetric ULA the quadratic (distance-dependent) phase terms of the
Fresnel-regime response cancel in the anti-diagonal entries of the spatial
covariance: entry (p, N+1-p) pairs antenna offsets +delta and -delta, so the
product of responses keeps only exp(-j*2*delta*gamma_k) with the
distance-free electric angle gamma = -2*pi*d*cos(theta)/lambda (the doubled
exponent is what the anti-diagonal product produces). A covariance built
from overlapping windows of that anti-diagonal vector therefore supports a
1-D direction search; each estimated direction then needs only a 1-D
distance search against the full-array noise subspace.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InsufficientPeaksError, NoPeakError
from .geometry import ArrayGeometry, SymmetricULA
from .grids import LocationGrid, SpectrumGrid
from .model import fresnel_validity_radius
from .subspace import (CovarianceEstimate, eig_decompose, music_spectrum_noise,
                       sample_covariance)


def theta_to_gamma(theta: float, spacing: float, wavelength: float) -> float:
    """Electric angle gamma = -2*pi*d*cos(theta)/lambda."""
    return -2.0 * np.pi * spacing * np.cos(theta) / wavelength


def gamma_to_theta(gamma: float, spacing: float, wavelength: float) -> float:
    """Inverse mapping; gamma must satisfy |gamma| <= 2*pi*d/lambda."""
    bound = 2.0 * np.pi * spacing / wavelength
    if abs(gamma) > bound * (1.0 + 1e-12):
        raise ValueError(f"gamma out of range: |{gamma:.6g}| > 2*pi*d/lambda = {bound:.6g}")
    return float(np.arccos(np.clip(-gamma / bound, -1.0, 1.0)))


def anti_diagonal_vector(cov: CovarianceEstimate, denoise_center: bool = True) -> np.ndarray:
    """Anti-diagonal of the covariance, indexed by antenna offset delta.

    Entry delta_p = p - M - 1 equals R[p, N+1-p] (1-based). Only the center
    entry lies on the main diagonal and therefore carries the sigma^2 noise
    power; by default the estimated noise floor (smallest eigenvalue of R) is
    subtracted there to restore the pure-exponential structure.
    """
    r = cov.r if isinstance(cov, CovarianceEstimate) else np.asarray(cov, dtype=complex)
    n = r.shape[0]
    if n % 2 == 0:
        raise ValueError("anti-diagonal vector requires an odd antenna count")
    ybar = np.array([r[p, n - 1 - p] for p in range(n)])
    if denoise_center:
        floor = float(np.linalg.eigvalsh(r)[0])
        m = (n - 1) // 2
        ybar[m] = ybar[m] - floor
    return ybar


def subvector_covariance(ybar: np.ndarray, n_subvectors: int) -> np.ndarray:
    """Rank-restoring covariance from J overlapping windows of the anti-diagonal.

    Window i (1-based) is ybar[i-1 : i-1+Ns] with Ns = 2M+2-J; the result is
    R_tilde = sum_i y_i y_i^H / J.
    """
    n = ybar.size
    j = int(n_subvectors)
    if not (1 <= j <= n):
        raise ValueError(f"need 1 <= J <= {n}, got {j}")
    ns = n + 1 - j
    if ns < 2:
        raise ValueError("subvector length Ns = 2M+2-J must be >= 2")
    rt = np.zeros((ns, ns), dtype=complex)
    for i in range(j):
        w = ybar[i:i + ns]
        rt += np.outer(w, w.conj())
    rt /= j
    return (rt + rt.conj().T) / 2.0


def _find_peaks_1d(xs: np.ndarray, values: np.ndarray, k: int,
                   exclusion_radius: float) -> list[int]:
    """Greedy top-K strict local maxima with a scalar exclusion radius in x."""
    n = values.size
    left = np.concatenate([[-np.inf], values[:-1]])
    right = np.concatenate([values[1:], [-np.inf]])
    cand = np.where((values > left) & (values > right))[0]
    order = cand[np.argsort(-values[cand], kind="stable")]
    picked: list[int] = []
    for idx in order:
        if len(picked) == k:
            break
        if any(abs(xs[idx] - xs[p]) <= exclusion_radius for p in picked):
            continue
        picked.append(int(idx))
    return picked


def direction_music(rt: np.ndarray, k: int, gammas: np.ndarray, half_size: int,
                    spacing: float, wavelength: float) -> tuple[np.ndarray, SpectrumGrid]:
    """K directions from the subvector covariance by 1-D noise-subspace search.

    The steering over the window is a_m = exp(+2j*(M+1-m)*gamma), m = 0..Ns-1,
    a pure ramp in the doubled electric angle (matching the exp(-j*2*delta*gamma)
    structure of the windowed anti-diagonal). Returns the estimated thetas
    (ascending) and the direction spectrum as a SpectrumGrid with a singleton
    distance axis.
    """
    ns = rt.shape[0]
    if ns <= k:
        raise ValueError(f"subvector dimension Ns={ns} must exceed K={k}")
    dec = eig_decompose(rt, k)
    mvec = 2.0 * (half_size + 1 - np.arange(ns, dtype=float))
    power, _ = kernels.projection_power_phase(mvec, np.asarray(gammas, dtype=float),
                                              dec.noise)
    spiked = power < 1e-15
    values = 1.0 / np.where(spiked, 1.0, power)
    if spiked.any():
        finite = values[~spiked]
        values = np.where(spiked, 1e6 * (np.median(finite) if finite.size else 1.0), values)
    # ascending gamma maps to ascending theta
    thetas = np.array([gamma_to_theta(g, spacing, wavelength) for g in gammas])
    sg = SpectrumGrid(grid=LocationGrid(thetas=thetas, rs=np.array([np.nan]),
                                        theta_spacing="linear", r_spacing="linear"),
                      values=values[:, None],
                      meta={"surface": "direction-music", "kind": "direction",
                            "gamma_min": float(np.min(gammas)), "gamma_max": float(np.max(gammas))})
    # exclusion: one mainlobe of the doubled-angle ramp over the window
    picked = _find_peaks_1d(np.asarray(gammas, float), values, k,
                            exclusion_radius=1.4 / ns)
    if len(picked) < k:
        raise InsufficientPeaksError(
            f"direction spectrum has {len(picked)} usable peaks, needed {k}",
            [float(thetas[i]) for i in picked])
    est = np.array(sorted((float(thetas[i]) for i in picked)))
    return est, sg


def distance_music_per_direction(noise_basis: np.ndarray, theta_hat: float,
                                 rs: np.ndarray, geometry: ArrayGeometry,
                                 wavelength: float,
                                 include_amplitude: bool = False) -> tuple[float, SpectrumGrid]:
    """1-D distance search at a fixed direction against the full-array noise subspace."""
    if not (0.0 < theta_hat < np.pi):
        raise ValueError("theta_hat must lie in (0, pi)")
    grid = LocationGrid(thetas=np.array([theta_hat]), rs=np.asarray(rs, dtype=float),
                        theta_spacing="linear", r_spacing="inverse")
    sg = music_spectrum_noise(noise_basis, geometry, wavelength, grid,
                              include_amplitude=include_amplitude)
    values = sg.values[0]
    left = np.concatenate([[-np.inf], values[:-1]])
    right = np.concatenate([values[1:], [-np.inf]])
    cand = np.where((values > left) & (values > right))[0]
    if cand.size == 0:
        raise NoPeakError(f"distance spectrum at theta={theta_hat:.4f} has no strict maximum")
    best = int(cand[np.argmax(values[cand])])
    meta = dict(sg.meta, kind="distance", theta_hat=float(theta_hat))
    return float(grid.rs[best]), SpectrumGrid(grid=grid, values=sg.values, flags=sg.flags,
                                              meta=meta)


@dataclass(frozen=True)
class ModifiedMusicResult:
    pairs: np.ndarray  # (K, 2) rows (theta, r), sorted by theta
    direction_spectrum: SpectrumGrid
    distance_spectra: list = field(default_factory=list)


def modified_music(y, k: int, geometry: ArrayGeometry, wavelength: float,
                   gammas: np.ndarray | None = None, rs: np.ndarray | None = None,
                   n_subvectors: int | None = None, n_gamma: int = 2048,
                   denoise_center: bool = True) -> ModifiedMusicResult:
    """Full decoupled pipeline: K+1 one-dimensional searches.

    Validity requirements, checked up front and reported by name:
    symmetry (odd-count symmetric ULA), spacing (d <= lambda/4 so the doubled
    electric angle is unambiguous), and Fresnel radius (the distance search
    may not extend below 0.5*sqrt(D^3/lambda) where the expansion the method
    relies on breaks down).
    """
    sym = SymmetricULA.from_geometry(geometry)
    if sym.spacing > wavelength / 4.0 * (1.0 + 1e-12):
        raise ValueError(
            f"spacing: modified MUSIC needs d <= lambda/4 (d={sym.spacing:.6g}, "
            f"lambda/4={wavelength / 4.0:.6g})")
    r_fresnel = fresnel_validity_radius(sym.aperture, wavelength)
    if rs is None:
        rs = np.asarray([], dtype=float)
    rs = np.asarray(rs, dtype=float)
    if rs.size == 0:
        raise ValueError("distance grid rs must be provided")
    if rs.min() < r_fresnel * (1.0 - 1e-12):
        raise ValueError(
            f"Fresnel radius: distance grid starts at {rs.min():.4g} m, below the "
            f"validity radius 0.5*sqrt(D^3/lambda) = {r_fresnel:.4g} m")
    m = sym.half_size
    n = sym.n
    j = n_subvectors if n_subvectors is not None else max(1, n // 5)
    if gammas is None:
        bound = 2.0 * np.pi * sym.spacing / wavelength
        eps = bound / n_gamma
        gammas = np.linspace(-bound + eps, bound - eps, n_gamma)
    cov = sample_covariance(y)
    ybar = anti_diagonal_vector(cov, denoise_center=denoise_center)
    rt = subvector_covariance(ybar, j)
    thetas_hat, dir_spec = direction_music(rt, k, gammas, m, sym.spacing, wavelength)
    dec_full = eig_decompose(cov, k)
    pairs = np.empty((k, 2))
    spectra = []
    for i, th in enumerate(thetas_hat):
        r_hat, sg = distance_music_per_direction(dec_full.noise, th, rs, sym, wavelength)
        pairs[i] = (th, r_hat)
        spectra.append(sg)
    return ModifiedMusicResult(pairs=pairs, direction_spectrum=dir_spec,
                               distance_spectra=spectra)
