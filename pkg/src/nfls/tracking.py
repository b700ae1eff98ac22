"""Moving-target estimation: per-CPI grid DML and multi-CPI extended Kalman filtering.

The filter state is q = [r, theta, vr, vtheta]. Measurements are complex
array snapshots; the filter runs on the real-composite form (real and
imaginary parts stacked), which keeps the state real and preserves the
standard positive-semidefiniteness guarantees of the covariance recursion.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import FilterDivergenceError, TargetPassedOriginError
from .geometry import ArrayGeometry
from .model import (MotionState, doppler_rates, exact_distance, near_field_steering,
                    target_location, unit_perp, unit_vector)


@dataclass(frozen=True)
class FilterState:
    """Filtered state and covariance at one CPI."""

    q: np.ndarray  # [r, theta, vr, vtheta]
    cov: np.ndarray  # 4x4 symmetric PSD
    cpi: int = 0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if q.shape != (4,) or cov.shape != (4, 4):
            raise ValueError("state must be length 4 with a 4x4 covariance")
        if q[0] <= 0:
            raise ValueError("state distance must be positive")
        if not (0.0 < q[1] < np.pi):
            raise ValueError("state direction must lie in (0, pi)")
        cov = (cov + cov.T) / 2.0
        w = np.linalg.eigvalsh(cov)
        if w[0] < -1e-10 * max(np.trace(cov), 1e-300):
            raise ValueError("state covariance must be positive semidefinite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "cov", cov)

    @property
    def r(self):
        return float(self.q[0])

    @property
    def theta(self):
        return float(self.q[1])

    @property
    def vr(self):
        return float(self.q[2])

    @property
    def vtheta(self):
        return float(self.q[3])

    def as_motion(self) -> MotionState:
        return MotionState(theta=self.theta, r=self.r, vr=self.vr, vtheta=self.vtheta)


@dataclass(frozen=True)
class Measurement:
    """Observation for one CPI: by default a single array snapshot taken at
    the CPI midpoint t = tc/2.

    ``times`` extends this to a stacked measurement of several within-CPI
    sample instants; ``y`` is then the length len(times)*N concatenation of
    the per-instant snapshots.

    ``s`` is the equivalent source sample when available. When it is only an
    estimate, ``s_error_var`` carries the variance of its (circular) error so
    the filter can fold the induced rank-one terms into the innovation
    covariance instead of treating the erroneous value as exact.
    """

    y: np.ndarray
    noise_var: float
    s: complex | None = None
    s_error_var: float = 0.0
    times: tuple | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex)
        if y.ndim != 1:
            raise ValueError("measurement must be a flat complex vector")
        if self.noise_var <= 0:
            raise ValueError("noise variance must be positive")
        if self.s_error_var < 0:
            raise ValueError("source error variance must be non-negative")
        if self.times is not None:
            times = tuple(float(t) for t in self.times)
            if not times or y.size % len(times) != 0:
                raise ValueError("stacked measurement length must be len(times)*N")
            object.__setattr__(self, "times", times)
        object.__setattr__(self, "y", y)


def state_transition(q, tc: float) -> np.ndarray:
    """Kinematic step: r += vr*tc, theta += vtheta*tc/r, velocities constant."""
    r, theta, vr, vtheta = np.asarray(q, dtype=float)
    r_next = r + vr * tc
    if r_next <= 0:
        raise TargetPassedOriginError(
            f"state propagation reached r = {r_next:.4g} <= 0")
    return np.array([r_next, theta + vtheta * tc / r, vr, vtheta])


def jacobian_state(q, tc: float) -> np.ndarray:
    """Closed-form gradient of the kinematic step."""
    r, _theta, _vr, vtheta = np.asarray(q, dtype=float)
    return np.array([
        [1.0, 0.0, tc, 0.0],
        [-vtheta * tc / r**2, 1.0, 0.0, tc / r],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


def observation_at(q, geometry: ArrayGeometry, wavelength: float, t: float,
                   include_amplitude: bool = False) -> np.ndarray:
    """Noise-free response a(theta, r) o d(vr, vtheta, t) at sample instant t."""
    r, theta, vr, vtheta = np.asarray(q, dtype=float)
    state = MotionState(theta=theta, r=r, vr=vr, vtheta=vtheta)
    a = near_field_steering(geometry, wavelength, theta, r, include_amplitude)
    vn = doppler_rates(geometry, state)
    return a * np.exp(-2j * np.pi * vn * t / wavelength)


def observation_fn(q, geometry: ArrayGeometry, wavelength: float, tc: float,
                   include_amplitude: bool = False) -> np.ndarray:
    """Noise-free measurement direction g(q) = a(theta, r) o d(vr, vtheta, tc/2)."""
    return observation_at(q, geometry, wavelength, tc / 2.0, include_amplitude)


def _jacobian_obs_analytic(q, geometry, wavelength, tc, t=None):
    """d g / d q for the unit-amplitude convention (N x 4 complex)."""
    r, theta, vr, vtheta = np.asarray(q, dtype=float)
    pos = geometry.positions
    u = unit_vector(theta)
    up = unit_perp(theta)
    proj = pos @ u
    perp = pos @ up
    rn = exact_distance(pos, target_location(theta, r))
    k = 2.0 * np.pi / wavelength
    t = tc / 2.0 if t is None else t
    vn = ((r - proj) * vr - perp * vtheta) / rn
    g = np.exp(-1j * k * ((rn - r) + vn * t))
    drn_dr = (r - proj) / rn
    drn_dth = -r * perp / rn
    dvn_dr = (vr - vn * drn_dr) / rn
    dvn_dth = (-perp * vr + proj * vtheta - vn * drn_dth) / rn
    dvn_dvr = (r - proj) / rn
    dvn_dvt = -perp / rn
    phase_grad = np.stack([
        (drn_dr - 1.0) + t * dvn_dr,
        drn_dth + t * dvn_dth,
        t * dvn_dvr,
        t * dvn_dvt,
    ], axis=1)
    return (-1j * k) * phase_grad * g[:, None]


def _jacobian_obs_fd(q, geometry, wavelength, tc, include_amplitude, step=1e-6,
                     t=None):
    q0 = np.asarray(q, dtype=float)
    t = tc / 2.0 if t is None else t
    out = np.empty((geometry.n, 4), dtype=complex)
    for i in range(4):
        h = step * max(abs(q0[i]), 1.0)
        qp, qm = q0.copy(), q0.copy()
        qp[i] += h
        qm[i] -= h
        out[:, i] = (observation_at(qp, geometry, wavelength, t, include_amplitude)
                     - observation_at(qm, geometry, wavelength, t, include_amplitude)) / (2 * h)
    return out


def jacobian_obs(q, s, geometry: ArrayGeometry, wavelength: float, tc: float,
                 include_amplitude: bool = False, method: str = "analytic",
                 t: float | None = None) -> np.ndarray:
    """Gradient of g(q)*s; analytic by default, finite differences as fallback.

    The analytic path covers the default unit-amplitude convention; with the
    amplitude factor enabled the finite-difference path is used. ``t``
    overrides the default tc/2 sample instant.
    """
    if method == "analytic" and not include_amplitude:
        jac = _jacobian_obs_analytic(q, geometry, wavelength, tc, t=t)
    elif method in ("analytic", "fd"):
        jac = _jacobian_obs_fd(q, geometry, wavelength, tc, include_amplitude, t=t)
    else:
        raise ValueError("method must be 'analytic' or 'fd'")
    return jac * s


def estimate_source_signal(y, q_prior, geometry: ArrayGeometry, wavelength: float,
                           tc: float, include_amplitude: bool = False) -> complex:
    """Least-squares source sample s_hat = g(q)^H y / ||g(q)||^2."""
    g = observation_fn(q_prior, geometry, wavelength, tc, include_amplitude)
    nrm2 = np.vdot(g, g).real
    if nrm2 <= 0:
        raise ValueError("invalid state: predicted response vector is zero")
    return complex(np.vdot(g, np.asarray(y, dtype=complex)) / nrm2)


def kalman_gain_gd(v: np.ndarray, e: np.ndarray, max_iter: int = 5000,
                   tol: float = 1e-10, step_rule: str = "exact",
                   step_size: float | None = None):
    """Kalman gain by gradient descent on ||K V - E||_F^2.

    V is the (PSD) innovation covariance and E = Q_pred G^T; the minimizer is
    the closed-form gain E V^{-1}. step_rule 'exact' performs an exact line
    search each iteration (a single step suffices when V = I); 'fixed' uses
    the given step_size. Returns (K, converged, iterations). When the budget
    is exhausted before the residual tolerance is met, the best iterate is
    returned with converged=False.
    """
    v = np.asarray(v, dtype=float)
    e = np.asarray(e, dtype=float)
    k = np.zeros_like(e)
    scale = max(np.linalg.norm(e), 1e-300)
    if step_rule not in ("exact", "fixed"):
        raise ValueError("step_rule must be 'exact' or 'fixed'")
    if step_rule == "fixed" and (step_size is None or step_size <= 0):
        raise ValueError("fixed step rule needs a positive step_size")
    res = k @ v - e
    for it in range(max_iter):
        if np.linalg.norm(res) / scale <= tol:
            return k, True, it
        grad = 2.0 * res @ v
        if step_rule == "exact":
            gv = grad @ v
            denom = np.sum(gv * gv)
            if denom <= 0:
                return k, True, it
            alpha = np.sum(gv * res) / denom
        else:
            alpha = step_size
        k = k - alpha * grad
        res = k @ v - e
    converged = np.linalg.norm(res) / scale <= tol
    return k, converged, max_iter


def _composite(x):
    return np.concatenate([np.real(x), np.imag(x)], axis=0)


@dataclass(frozen=True)
class EkfStepResult:
    state: FilterState
    s_used: complex
    innovation_nis: float  # normalized innovation squared
    predicted: np.ndarray = field(repr=False, default=None)


def ekf_step(state: FilterState, measurement: Measurement, process_cov: np.ndarray,
             geometry: ArrayGeometry, wavelength: float, tc: float,
             gain_method: str = "closed-form", include_amplitude: bool = False,
             cond_limit: float = 1e12, trace_cap: float = np.inf,
             gd_options: dict | None = None) -> EkfStepResult:
    """One predict/linearize/update cycle.

    Raises FilterDivergenceError (carrying the last valid state) when the
    innovation covariance condition number exceeds cond_limit, the posterior
    covariance trace exceeds trace_cap, or the updated state leaves its valid
    domain.
    """
    rz = np.asarray(process_cov, dtype=float)
    try:
        q_pred = state_transition(state.q, tc)
    except TargetPassedOriginError as exc:
        raise FilterDivergenceError(str(exc), last_state=state, cpi_index=state.cpi) from exc
    if not (0.0 < q_pred[1] < np.pi):
        raise FilterDivergenceError("predicted direction left (0, pi)",
                                    last_state=state, cpi_index=state.cpi)
    h = jacobian_state(state.q, tc)
    p_pred = h @ state.cov @ h.T + rz
    p_pred = (p_pred + p_pred.T) / 2.0
    times = measurement.times if measurement.times is not None else (tc / 2.0,)
    s_i = measurement.s
    if s_i is None:
        if len(times) > 1:
            raise ValueError("per-CPI source estimation supports single-sample "
                             "measurements only")
        s_i = estimate_source_signal(measurement.y, q_pred, geometry, wavelength, tc,
                                     include_amplitude)
    gq = np.concatenate([observation_at(q_pred, geometry, wavelength, t,
                                        include_amplitude) for t in times])
    gc = np.concatenate([jacobian_obs(q_pred, s_i, geometry, wavelength, tc,
                                      include_amplitude, t=t) for t in times])
    g = _composite(gc)  # (2*len(times)*N, 4) real
    n2 = g.shape[0]
    v = g @ p_pred @ g.T + (measurement.noise_var / 2.0) * np.eye(n2)
    if measurement.s_error_var > 0:
        # circular source error e: y - g*s = w - g(q)*e, a rank-one noise term
        gt = _composite(gq)
        gj = _composite(1j * gq)
        v = v + (measurement.s_error_var / 2.0) * (np.outer(gt, gt) + np.outer(gj, gj))
    w = np.linalg.eigvalsh(v)
    if w[0] <= 0 or w[-1] > cond_limit * w[0]:
        raise FilterDivergenceError(
            "innovation covariance is singular or ill-conditioned "
            f"(eigenvalue spread {w[0]:.3g} .. {w[-1]:.3g}, limit {cond_limit:.3g})",
            last_state=state, cpi_index=state.cpi)
    e = p_pred @ g.T
    if gain_method == "closed-form":
        gain = np.linalg.solve(v, e.T).T
    elif gain_method == "gradient-descent":
        opts = gd_options or {}
        gain, _conv, _ = kalman_gain_gd(v, e, **opts)
    else:
        raise ValueError("gain_method must be 'closed-form' or 'gradient-descent'")
    nu = _composite(measurement.y) - _composite(gq * s_i)
    q_new = q_pred + gain @ nu
    p_new = (np.eye(4) - gain @ g) @ p_pred
    p_new = (p_new + p_new.T) / 2.0
    nis = float(nu @ np.linalg.solve(v, nu))
    if np.trace(p_new) > trace_cap:
        raise FilterDivergenceError(
            f"posterior covariance trace {np.trace(p_new):.3g} exceeds cap",
            last_state=state, cpi_index=state.cpi)
    try:
        new_state = FilterState(q=q_new, cov=p_new, cpi=state.cpi + 1)
    except ValueError as exc:
        raise FilterDivergenceError(f"updated state invalid: {exc}",
                                    last_state=state, cpi_index=state.cpi) from exc
    return EkfStepResult(state=new_state, s_used=s_i, innovation_nis=nis,
                         predicted=q_pred)


def track(measurements, init_state: FilterState, process_cov: np.ndarray,
          geometry: ArrayGeometry, wavelength: float, tc: float,
          gain_method: str = "closed-form", include_amplitude: bool = False,
          cond_limit: float = 1e12, trace_cap: float = np.inf):
    """Run the filter over a CPI sequence; returns (states, diagnostics).

    states[i] is the posterior after measurement i. Divergence errors are
    re-raised with the CPI index and the states filtered so far attached, so
    a caller can reinitialize and resume.
    """
    measurements = list(measurements)
    if not measurements:
        raise ValueError("measurement sequence must be non-empty")
    states = []
    diags = {"nis": [], "s_used": []}
    current = init_state
    for i, meas in enumerate(measurements):
        try:
            step = ekf_step(current, meas, process_cov, geometry, wavelength, tc,
                            gain_method=gain_method, include_amplitude=include_amplitude,
                            cond_limit=cond_limit, trace_cap=trace_cap)
        except FilterDivergenceError as exc:
            exc.cpi_index = i
            exc.states_so_far = states
            raise
        current = step.state
        states.append(current)
        diags["nis"].append(step.innovation_nis)
        diags["s_used"].append(step.s_used)
    return states, diags


@dataclass(frozen=True)
class MotionEstimate:
    theta: float
    r: float
    vr: float
    vtheta: float
    objective: float


def moving_dml_single(y, geometry: ArrayGeometry, wavelength: float,
                      thetas, rs, vrs, vthetas, ts: float,
                      include_amplitude: bool = False,
                      max_cells: int = 10**7):
    """Single-target deterministic-ML grid search over (theta, r, vr, vtheta).

    Sample l (1-based) of the snapshot matrix is matched against
    a(theta, r) o d(vr, vtheta, l*ts); the objective is the summed per-sample
    projection power. Returns the argmax cell center as a MotionEstimate.
    """
    ym = np.asarray(getattr(y, "y", y), dtype=complex)
    thetas = np.asarray(thetas, float)
    rs = np.asarray(rs, float)
    vrs = np.asarray(vrs, float)
    vthetas = np.asarray(vthetas, float)
    cells = thetas.size * rs.size * vrs.size * vthetas.size
    if cells > max_cells:
        raise ValueError(f"grid has {cells} cells, exceeding the budget {max_cells}")
    times = np.arange(1, ym.shape[1] + 1) * ts
    obj = kernels.moving_dml_objective(geometry.positions, wavelength, thetas, rs,
                                       vrs, vthetas, times, ym, include_amplitude)
    it, ir, ip, iq = np.unravel_index(int(np.argmax(obj)), obj.shape)
    return MotionEstimate(theta=float(thetas[it]), r=float(rs[ir]),
                          vr=float(vrs[ip]), vtheta=float(vthetas[iq]),
                          objective=float(obj[it, ir, ip, iq])), obj
