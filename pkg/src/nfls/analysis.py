"""Theoretical accuracy and resolution limits.

Closed-form direction/distance bounds are stated for a ULA indexed from its
reference end (antenna n at n*d, n = 0..N-1) under the quadratic distance
expansion with unit-amplitude responses and a deterministic (unknown) source;
they remain the documented convention even when scenarios use other arrays.
The numerical Fisher-information path is the authority for the exact model
and for any geometry.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .geometry import ArrayGeometry
from .model import (exact_distance, far_field_steering, fresnel_distance,
                    near_field_steering, target_location, unit_perp, unit_vector)

_SINGULARITY_EPS = 1e-8


def _crb_constants(n: int) -> tuple[float, float]:
    n1 = (8.0 * n - 11.0) * (2.0 * n - 1.0)
    n2 = float(n) * (n**2 - 1.0) * (n**2 - 4.0)
    return n1, n2


def _check_crb_args(n, l, snr, theta):
    if n < 3:
        raise ValueError("closed-form bounds need N >= 3")
    if l < 1:
        raise ValueError("L must be >= 1")
    if snr <= 0:
        raise ValueError("SNR must be positive")
    if not (0.0 < theta < np.pi) or np.sin(theta) == 0.0:
        raise ValueError("theta must lie strictly inside (0, pi): sin(theta) = 0 "
                         "makes the geometry singular")


def crb_theta(n: int, spacing: float, wavelength: float, l: int, snr: float,
              theta: float) -> float:
    """Direction bound 3*N1 / (2*gbar*L*N2*pi^2*sin(theta)^2), in rad^2.

    gbar = SNR*d^2/lambda^2. Independent of target distance.
    """
    _check_crb_args(n, l, snr, theta)
    n1, n2 = _crb_constants(n)
    gbar = snr * spacing**2 / wavelength**2
    return 3.0 * n1 / (2.0 * gbar * l * n2 * np.pi**2 * np.sin(theta) ** 2)


def crb_r(n: int, spacing: float, wavelength: float, l: int, snr: float,
          theta: float, r: float) -> float:
    """Distance bound in m^2; grows without bound as r increases."""
    _check_crb_args(n, l, snr, theta)
    if r <= 0:
        raise ValueError("r must be positive")
    n1, n2 = _crb_constants(n)
    gbar = snr * spacing**2 / wavelength**2
    num = 6.0 * r**2 * (15.0 * r**2 + 30.0 * r * spacing * (n - 1) * np.cos(theta)
                        + spacing**2 * n1 * np.cos(theta) ** 2)
    return num / (gbar * l * n2 * np.pi**2 * spacing**2 * np.sin(theta) ** 4)


@dataclass(frozen=True)
class CrbResult:
    """Both closed-form bounds with the constants of their expressions."""

    crb_theta: float  # rad^2
    crb_r: float  # m^2
    gbar: float  # SNR * d^2 / lambda^2
    n1: float  # (8N-11)(2N-1)
    n2: float  # N(N^2-1)(N^2-4)
    context: dict = field(default_factory=dict, repr=False)


def crb_bounds(n: int, spacing: float, wavelength: float, l: int, snr: float,
               theta: float, r: float) -> CrbResult:
    """Convenience bundle of both bounds at one operating point."""
    n1, n2 = _crb_constants(n)
    return CrbResult(
        crb_theta=crb_theta(n, spacing, wavelength, l, snr, theta),
        crb_r=crb_r(n, spacing, wavelength, l, snr, theta, r),
        gbar=snr * spacing**2 / wavelength**2, n1=n1, n2=n2,
        context={"n": n, "spacing": spacing, "wavelength": wavelength,
                 "l": l, "snr": snr, "theta": theta, "r": r})


@dataclass(frozen=True)
class FimResult:
    """Fisher matrix with conditioning diagnostics.

    ``normalized_eigenvalues`` are the eigenvalues of the unit-diagonal
    (correlation-like) rescaling of the matrix, which makes rank statements
    meaningful across parameters with different physical units; rows with an
    exactly zero diagonal are kept as zero rows.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    normalized_eigenvalues: np.ndarray

    @property
    def condition(self) -> float:
        w = self.eigenvalues
        return float(np.inf if w.min() <= 0 else w.max() / w.min())

    def rank_ratio(self) -> float:
        """Smallest-to-largest normalized eigenvalue (0 for a singular FIM)."""
        w = self.normalized_eigenvalues
        top = w.max()
        if top <= 0:
            return 0.0
        return float(max(w.min(), 0.0) / top)


def fim_numerical(mean_fn, point, l: int = 1, snr: float = 1.0,
                  rel_step: float = 1e-6, project_source: bool = False) -> FimResult:
    """Gaussian-model Fisher matrix by central differences of the mean vector.

    mean_fn maps a parameter vector to the complex mean of one observation;
    F = 2*L*SNR*Re(J^H J) with J the columnwise derivative matrix. With
    project_source=True the derivative matrix is first projected orthogonally
    to the mean itself, which accounts for an unknown deterministic source
    amplitude per sample (the convention under which the closed-form bounds
    hold).
    """
    q0 = np.asarray(point, dtype=float)
    if rel_step <= 0:
        raise ValueError("rel_step must be positive")
    mu0 = np.asarray(mean_fn(q0), dtype=complex)
    jac = np.empty((mu0.size, q0.size), dtype=complex)
    for i in range(q0.size):
        h = rel_step * max(abs(q0[i]), 1.0)
        if q0[i] + h == q0[i]:
            raise ValueError(f"finite-difference step underflow for parameter {i}")
        qp = q0.copy()
        qm = q0.copy()
        qp[i] += h
        qm[i] -= h
        jac[:, i] = (np.asarray(mean_fn(qp), dtype=complex)
                     - np.asarray(mean_fn(qm), dtype=complex)) / (2.0 * h)
    if project_source:
        nrm2 = np.vdot(mu0, mu0).real
        if nrm2 > 0:
            jac = jac - np.outer(mu0, (mu0.conj() @ jac)) / nrm2
    f = 2.0 * l * snr * np.real(jac.conj().T @ jac)
    f = (f + f.T) / 2.0
    eig = np.linalg.eigvalsh(f)
    d = np.sqrt(np.clip(np.diag(f), 0.0, None))
    scale = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 0.0)
    fn = f * np.outer(scale, scale)
    eig_n = np.linalg.eigvalsh(fn)
    return FimResult(matrix=f, eigenvalues=eig, normalized_eigenvalues=eig_n)


def fresnel_fixed_model(n: int, spacing: float, wavelength: float):
    """Mean model (theta, r) -> unit-amplitude response of an end-referenced ULA
    under the quadratic distance expansion; oracle model for the closed forms."""
    offsets = np.arange(n) * spacing

    def mean(q):
        theta, r = q
        rn = fresnel_distance(offsets, theta, r)
        return np.exp(-2j * np.pi * (rn - r) / wavelength)

    return mean


def nearfield_moving_model(geometry: ArrayGeometry, wavelength: float, times):
    """Mean model (r, theta, vr, vtheta) -> stacked exact moving-target means."""
    times = np.asarray(times, dtype=float)
    pos = geometry.positions

    def mean(q):
        r, theta, vr, vtheta = q
        u = unit_vector(theta)
        up = unit_perp(theta)
        proj = pos @ u
        perp = pos @ up
        rn = exact_distance(pos, target_location(theta, r))
        a = np.exp(-2j * np.pi * (rn - r) / wavelength)
        vn = ((r - proj) * vr - perp * vtheta) / rn
        phase = np.exp(-2j * np.pi * np.outer(vn, times) / wavelength)
        return (a[:, None] * phase).ravel()

    return mean


def farfield_moving_model(geometry: ArrayGeometry, wavelength: float, times):
    """Mean model (theta, vr, vtheta) under the planar-wavefront approximation.

    The transverse velocity does not enter the far-field mean at all, so the
    resulting Fisher matrix is structurally singular in that parameter.
    """
    times = np.asarray(times, dtype=float)

    def mean(q):
        theta, vr, _vtheta = q
        b = far_field_steering(geometry, wavelength, theta)
        dop = np.exp(-2j * np.pi * vr * times / wavelength)
        return (b[:, None] * dop[None, :]).ravel()

    return mean


def ambiguity(theta: float, r: float, theta0: float, r0: float,
              geometry: ArrayGeometry, wavelength: float,
              include_amplitude: bool = False) -> complex:
    """Matched-filter response a(theta, r)^H a(theta0, r0)."""
    a = near_field_steering(geometry, wavelength, theta, r, include_amplitude)
    a0 = near_field_steering(geometry, wavelength, theta0, r0, include_amplitude)
    return complex(np.vdot(a, a0))


def lambda1(v: float, v0: float, n: int, spacing: float, wavelength: float) -> float:
    """Direction-cut ambiguity in the cosine variable: a Dirichlet kernel.

    Evaluated along the curve where the quadratic phase terms of the two
    responses cancel, leaving sin(pi*N*d*dv/lambda) / sin(pi*d*dv/lambda)
    with dv = v - v0. The removable singularities evaluate to +-N.
    """
    x = np.pi * spacing * (v - v0) / wavelength
    s = np.sin(x)
    if abs(s) < _SINGULARITY_EPS:
        return float(n * np.cos(n * x) / np.cos(x))
    return float(np.sin(n * x) / s)


def _fresnel_scalar(x: float) -> tuple[float, float]:
    if np.isinf(x):
        return 0.5, 0.5
    if x > 1000.0:
        raise ValueError("argument too large for the quadrature path (eta > 1000)")
    # integrate one half-oscillation at a time: the phase pi*t^2/2 crosses
    # multiples of pi at t = sqrt(2k), so each segment is quadrature-friendly
    edges = np.sqrt(2.0 * np.arange(1, int(np.ceil(x * x / 2.0)) + 1))
    pts = np.concatenate([[0.0], edges[edges < x], [x]])
    ci = si = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        ci += quad(lambda t: np.cos(np.pi * t * t / 2.0), a, b,
                   epsabs=1e-13, epsrel=1e-13)[0]
        si += quad(lambda t: np.sin(np.pi * t * t / 2.0), a, b,
                   epsabs=1e-13, epsrel=1e-13)[0]
    return ci, si


def fresnel_integrals(eta):
    """C(eta) = int_0^eta cos(pi x^2/2) dx and the sine counterpart.

    Adaptive quadrature (piecewise per half-oscillation) to better than 1e-10
    absolute error; odd symmetry is applied for negative arguments and the
    exact (0.5, 0.5) limit is returned for an infinite argument.
    """
    eta_arr = np.atleast_1d(np.asarray(eta, dtype=float))
    c = np.empty_like(eta_arr)
    s = np.empty_like(eta_arr)
    flat_c, flat_s = c.ravel(), s.ravel()
    for i, e in enumerate(eta_arr.ravel()):
        ci, si = _fresnel_scalar(abs(e))
        sign = 1.0 if e >= 0 else -1.0
        flat_c[i] = sign * ci
        flat_s[i] = sign * si
    if np.ndim(eta) == 0:
        return float(c[0]), float(s[0])
    return c, s


def distance_cut_eta(r: float, r0: float, theta0: float, n: int, spacing: float,
                     wavelength: float) -> float:
    """Dimensionless Fresnel argument of the distance-cut ambiguity."""
    if r <= 0 or r0 <= 0:
        raise ValueError("distances must be positive")
    return float(np.sqrt(n**2 * spacing**2 * np.sin(theta0) ** 2 / (2.0 * wavelength)
                         * abs(1.0 / r - 1.0 / r0)))


def lambda2(r: float, theta0: float, r0: float, n: int, spacing: float,
            wavelength: float) -> complex:
    """Distance-cut ambiguity N*(C(eta) + j*S(eta))/eta; equals N at r = r0."""
    eta = distance_cut_eta(r, r0, theta0, n, spacing, wavelength)
    if eta < _SINGULARITY_EPS:
        return complex(n)
    c, s = fresnel_integrals(eta)
    return complex(n * (c + 1j * s) / eta)


def hpmw_direction(n: int, spacing: float, wavelength: float) -> float:
    """Half-power mainlobe half-width of the direction cut, in the cosine variable."""
    return 1.4 * wavelength / (np.pi * n * spacing)


def threshold_distance(n: int, spacing: float, wavelength: float,
                       theta0: float = np.pi / 2) -> float:
    """Distance beyond which the distance mainlobe becomes one-sided infinite.

    d_T = N^2 d^2 sin(theta0)^2 / (5 lambda); at broadside this is about one
    tenth of the Fraunhofer distance of the same array.
    """
    if not (0.0 < theta0 < np.pi):
        raise ValueError("theta0 must lie in (0, pi)")
    return n**2 * spacing**2 * np.sin(theta0) ** 2 / (5.0 * wavelength)


def hpmw_distance(r0: float, d_t: float) -> tuple[float, float]:
    """Distance mainlobe offsets (dr_low, dr_high) around r0.

    dr_low = -r0^2/(d_t + r0) is always finite; dr_high = r0^2/(d_t - r0)
    becomes infinite exactly when r0 >= d_t.
    """
    if r0 <= 0 or d_t <= 0:
        raise ValueError("r0 and d_t must be positive")
    lo = -r0**2 / (d_t + r0)
    hi = np.inf if r0 >= d_t else r0**2 / (d_t - r0)
    return float(lo), float(hi)


@dataclass(frozen=True)
class ResolutionReport:
    """Mainlobe geometry around a reference location."""

    direction_halfwidth_cos: float
    distance_interval: tuple
    d_t: float
    d_fa: float
    context: dict = field(default_factory=dict, repr=False)


def resolution_report(n: int, spacing: float, wavelength: float, theta0: float,
                      r0: float) -> ResolutionReport:
    from .model import fraunhofer_distance

    d_t = threshold_distance(n, spacing, wavelength, theta0)
    return ResolutionReport(
        direction_halfwidth_cos=hpmw_direction(n, spacing, wavelength),
        distance_interval=hpmw_distance(r0, d_t),
        d_t=d_t,
        d_fa=fraunhofer_distance((n - 1) * spacing, wavelength),
        context={"n": n, "spacing": spacing, "wavelength": wavelength,
                 "theta0": theta0, "r0": r0})
