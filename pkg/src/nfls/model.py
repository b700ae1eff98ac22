"""Spherical-wavefront signal model and snapshot synthesis.

Conventions used throughout the toolkit:

* A target at direction theta in (0, pi) and distance r > 0 sits at
  p = r * [cos(theta), sin(theta)].
* The near-field array response is a_n = (r/r_n) exp(-2j*pi*(r_n - r)/lambda)
  with r_n the exact antenna-target distance; the amplitude factor r/r_n is
  applied only when explicitly requested (it is close to 1 whenever the
  target is beyond a few apertures) so estimators and accuracy bounds share
  one convention per experiment.
* SNR means per-antenna received signal power under the unit-amplitude
  convention divided by the noise variance.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CoherentSourceWarning, DegenerateGeometryError, IdentifiabilityError
from .geometry import FREE_SPACE_IMPEDANCE, SPEED_OF_LIGHT, ArrayGeometry
from .rng import substream


def fraunhofer_distance(aperture: float, wavelength: float) -> float:
    """Classical far-field boundary 2 D^2 / lambda."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    if aperture < 0:
        raise ValueError("aperture must be non-negative")
    return 2.0 * aperture**2 / wavelength


def fresnel_validity_radius(aperture: float, wavelength: float) -> float:
    """Distance beyond which the quadratic distance expansion is tight."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    return 0.5 * np.sqrt(aperture**3 / wavelength)


def radiating_field_gain(r, wavelength: float, impedance: float = FREE_SPACE_IMPEDANCE):
    """Radiating-field electric gain -j*eta*exp(-2j*pi*r/lambda)/(2*lambda*r).

    Magnitude falls off as 1/r; the reactive terms (which decay faster and
    matter only within a few wavelengths) are not modeled.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    return -1j * impedance * np.exp(-2j * np.pi * r / wavelength) / (2.0 * wavelength * r)


def unit_vector(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def unit_perp(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)


def target_location(theta: float, r: float) -> np.ndarray:
    return r * unit_vector(theta)


def exact_distance(positions, p) -> np.ndarray:
    """Exact Euclidean antenna-target distances ||s_n - p||."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    p = np.asarray(p, dtype=float)
    return np.sqrt(((positions - p) ** 2).sum(axis=-1))


def farfield_distance(positions, theta: float, r: float) -> np.ndarray:
    """First-order (planar wavefront) distances r - s_n^T u(theta)."""
    if r <= 0:
        raise ValueError("r must be positive")
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    return r - positions @ unit_vector(theta)


def fresnel_distance(axial_offsets, theta: float, r: float) -> np.ndarray:
    """Second-order distance expansion for antennas on the x-axis.

    axial_offsets are the signed antenna coordinates (delta_n * d) along the
    array axis.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    x = np.asarray(axial_offsets, dtype=float)
    return r - x * np.cos(theta) + x**2 * np.sin(theta) ** 2 / (2.0 * r)


def near_field_steering(geometry: ArrayGeometry, wavelength: float, theta: float,
                        r: float, include_amplitude: bool = False) -> np.ndarray:
    """Spherical-wavefront array response at (theta, r)."""
    if r <= 0:
        raise ValueError("r must be positive")
    rn = exact_distance(geometry.positions, target_location(theta, r))
    if np.any(rn == 0.0):
        raise DegenerateGeometryError("target coincides with an antenna")
    a = np.exp(-2j * np.pi * (rn - r) / wavelength)
    if include_amplitude:
        a *= r / rn
    return a


def far_field_steering(geometry: ArrayGeometry, wavelength: float, theta: float) -> np.ndarray:
    """Planar-wavefront steering vector exp(+2j*pi*s_n^T u(theta)/lambda)."""
    proj = geometry.positions @ unit_vector(theta)
    return np.exp(2j * np.pi * proj / wavelength)


@dataclass(frozen=True)
class TargetState:
    """Fixed target: direction (rad), distance (m), equivalent amplitude.

    ``amplitude`` is the complex amplitude of the equivalent source sequence
    as received at the array (channel gain and 1/r path loss folded in). A
    receiver clock offset only rotates that amplitude by exp(2j*pi*fc*tau_o)
    and is therefore folded into the source phase at synthesis time; it is
    not separately identifiable from narrowband single-node data.
    """

    theta: float
    r: float
    amplitude: complex = 1.0 + 0.0j
    clock_offset: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.theta < np.pi):
            raise ValueError("theta must lie strictly inside (0, pi)")
        if self.r <= 0:
            raise ValueError("r must be positive")

    @property
    def location(self) -> np.ndarray:
        return target_location(self.theta, self.r)


@dataclass(frozen=True)
class MotionState(TargetState):
    """Moving target: adds radial and transverse velocity (m/s)."""

    vr: float = 0.0
    vtheta: float = 0.0

    @property
    def velocity(self) -> np.ndarray:
        return self.vr * unit_vector(self.theta) + self.vtheta * unit_perp(self.theta)

    @property
    def speed(self) -> float:
        return float(np.hypot(self.vr, self.vtheta))


@dataclass(frozen=True)
class NoiseModel:
    """Circularly symmetric complex Gaussian noise, variance sigma2 per antenna."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")

    @classmethod
    def from_snr_db(cls, snr_db: float, signal_power: float = 1.0) -> "NoiseModel":
        """Noise level realizing the given per-antenna SNR for unit-amplitude steering."""
        return cls(sigma2=signal_power / 10.0 ** (snr_db / 10.0))

    @property
    def snr_linear(self) -> float:
        if self.sigma2 == 0:
            return np.inf
        return 1.0 / self.sigma2


@dataclass(frozen=True)
class SnapshotMatrix:
    """N x L complex baseband observations across antennas and time samples."""

    y: np.ndarray
    ts: float | None = None
    tc: float | None = None
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex)
        if y.ndim != 2 or y.shape[1] < 1:
            raise ValueError("snapshots must form an (N, L) matrix with L >= 1")
        if not np.all(np.isfinite(y.view(float))):
            raise ValueError("snapshots must be finite")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def l(self) -> int:
        return self.y.shape[1]


def doppler_rates(geometry: ArrayGeometry, state: MotionState) -> np.ndarray:
    """Per-antenna range rates v_n induced by the target motion.

    v_n is the projection of the radial and transverse velocity components
    onto the antenna's line of sight:
    v_n = ((r - s_n^T u) vr - s_n^T u_perp * vtheta) / r_n.
    """
    pos = geometry.positions
    proj = pos @ unit_vector(state.theta)
    perp = pos @ unit_perp(state.theta)
    rn = exact_distance(pos, state.location)
    if np.any(rn == 0.0):
        raise DegenerateGeometryError("target coincides with an antenna")
    return ((state.r - proj) * state.vr - perp * state.vtheta) / rn


def doppler_vector(geometry: ArrayGeometry, wavelength: float, state: MotionState,
                   t: float) -> np.ndarray:
    """Per-antenna Doppler phase rotations exp(-2j*pi*v_n*t/lambda) at time t."""
    vn = doppler_rates(geometry, state)
    return np.exp(-2j * np.pi * vn * t / wavelength)


def _source_sequence(rng: np.random.Generator, n_samples: int, model: str) -> np.ndarray:
    if model == "gaussian":
        x = rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)
        return x / np.sqrt(2.0)
    if model == "phase":
        return np.exp(2j * np.pi * rng.random(n_samples))
    raise ValueError(f"unknown source model '{model}'")


def _check_scene(geometry: ArrayGeometry, targets) -> None:
    if len(targets) >= geometry.n:
        raise IdentifiabilityError(
            f"need fewer targets than antennas (K={len(targets)}, N={geometry.n})")
    locs = [(t.theta, t.r) for t in targets]
    if len(set(locs)) != len(locs):
        raise ValueError("targets must have pairwise distinct (theta, r)")


def _warn_if_coherent(s: np.ndarray) -> None:
    if s.shape[0] < 2:
        return
    sv = np.linalg.svd(s, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        warnings.warn("source sequences are coherent; subspace ranks will collapse",
                      CoherentSourceWarning, stacklevel=3)


def _synthesize(geometry, wavelength, targets, n_samples, noise, seed, source_model,
                ts, tc):
    """Shared synthesis core; fixed targets are the zero-velocity special case."""
    _check_scene(geometry, targets)
    n, k = geometry.n, len(targets)
    y = np.zeros((n, n_samples), dtype=complex)
    s_all = np.empty((k, n_samples), dtype=complex)
    for idx, tgt in enumerate(targets):
        rng = substream(seed, "target", idx)
        s = _source_sequence(rng, n_samples, source_model)
        s = s * tgt.amplitude
        if tgt.clock_offset:
            fc = SPEED_OF_LIGHT / wavelength
            s = s * np.exp(2j * np.pi * fc * tgt.clock_offset)
        s_all[idx] = s
        a = near_field_steering(geometry, wavelength, tgt.theta, tgt.r)
        if isinstance(tgt, MotionState) and (tgt.vr != 0.0 or tgt.vtheta != 0.0):
            vn = doppler_rates(geometry, tgt)
            t = np.arange(1, n_samples + 1) * ts
            phase = np.exp(-2j * np.pi * np.outer(vn, t) / wavelength)
            y += (a[:, None] * phase) * s[None, :]
        else:
            y += a[:, None] * s[None, :]
    _warn_if_coherent(s_all)
    rng_noise = substream(seed, "noise")
    if noise.sigma2 > 0:
        w = rng_noise.standard_normal((n, n_samples)) + 1j * rng_noise.standard_normal((n, n_samples))
        y += np.sqrt(noise.sigma2 / 2.0) * w
    return SnapshotMatrix(y=y, ts=ts, tc=tc,
                          meta={"seed": int(seed), "sigma2": noise.sigma2,
                                "source_model": source_model,
                                "snr_definition": "per-antenna signal power (unit-amplitude steering) / sigma2"})


def synthesize_fixed(geometry: ArrayGeometry, wavelength: float, targets,
                     n_samples: int, noise: NoiseModel, seed: int,
                     source_model: str = "gaussian") -> SnapshotMatrix:
    """Snapshots Y = A(theta, r) S + W for fixed targets.

    Deterministic given ``seed``: per-target source substreams and the noise
    substream are derived from (seed, stream-id).
    """
    return _synthesize(geometry, wavelength, targets, n_samples, noise, seed,
                       source_model, ts=None, tc=None)


def synthesize_moving(geometry: ArrayGeometry, wavelength: float, targets,
                      n_samples: int, ts: float, noise: NoiseModel, seed: int,
                      source_model: str = "gaussian", tc: float | None = None) -> SnapshotMatrix:
    """Snapshots for moving targets; sample l (1-based) is taken at t = l*ts.

    Zero-velocity targets reproduce ``synthesize_fixed`` bit for bit under
    the same seed. Valid within a coherent interval where the displacement
    v*L*ts stays far below every target distance.
    """
    if ts <= 0:
        raise ValueError("ts must be positive")
    return _synthesize(geometry, wavelength, targets, n_samples, noise, seed,
                       source_model, ts=ts, tc=tc)
