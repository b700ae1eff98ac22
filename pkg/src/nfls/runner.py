"""Deterministic experiment execution and artifact emission."""

import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, io, kernels, subspace, symmetric, tracking
from .errors import FilterDivergenceError, ScenarioValidationError
from .grids import LocationGrid, inverse_spaced_rs
from .model import (MotionState, NoiseModel, TargetState, fraunhofer_distance,
                    fresnel_validity_radius, synthesize_fixed, synthesize_moving)
from .rng import substream, trial_seed
from .scenario import Scenario, parse_scenario

SNR_DEFINITION = "per-antenna signal power (unit-amplitude steering) / sigma2"


def _ula_spacing(geometry) -> float:
    x = geometry.positions[:, 0]
    if geometry.n < 2 or not np.allclose(geometry.positions[:, 1], 0.0):
        raise ScenarioValidationError("this command needs a ULA geometry")
    d = np.diff(np.sort(x))
    if not np.allclose(d, d[0], rtol=1e-9):
        raise ScenarioValidationError("this command needs uniform antenna spacing")
    return float(d[0])


def _synthesize(sc: Scenario, seed: int | None = None):
    seed = sc.seed if seed is None else seed
    if sc.moving:
        ts = sc.sampling.get("ts_s")
        if ts is None:
            ts = sc.sampling["tc_s"] / sc.sampling["n_samples"]
        return synthesize_moving(sc.geometry, sc.wavelength, sc.targets,
                                 sc.sampling["n_samples"], ts, sc.noise, seed,
                                 sc.source_model, tc=sc.sampling.get("tc_s"))
    return synthesize_fixed(sc.geometry, sc.wavelength, sc.targets,
                            sc.sampling["n_samples"], sc.noise, seed, sc.source_model)


def _default_grid(sc: Scenario, est: dict) -> LocationGrid:
    d_ap = sc.geometry.aperture
    r_lo = est.get("r_min_m") or fresnel_validity_radius(d_ap, sc.wavelength)
    r_hi = est.get("r_max_m") or fraunhofer_distance(d_ap, sc.wavelength) / 2.0
    th_lo = est.get("theta_min_rad") or np.pi / 4
    th_hi = est.get("theta_max_rad") or 3 * np.pi / 4
    return LocationGrid.regular((th_lo, th_hi), (r_lo, r_hi),
                                int(est.get("n_theta", 256)), int(est.get("n_r", 256)))


def _resolve_k(sc: Scenario, est: dict, eigenvalues) -> int:
    k = est.get("num_targets")
    if k is None:
        k = subspace.estimate_num_targets(eigenvalues,
                                          ratio=float(est.get("k_ratio", 10.0)))
        k = max(1, min(k, sc.geometry.n - 1))
    return int(k)


def _grid_meta(grid: LocationGrid) -> dict:
    return {"theta_min_rad": float(grid.thetas[0]), "theta_max_rad": float(grid.thetas[-1]),
            "n_theta": int(grid.thetas.size), "r_min_m": float(grid.rs[0]),
            "r_max_m": float(grid.rs[-1]), "n_r": int(grid.rs.size),
            "theta_spacing": grid.theta_spacing, "r_spacing": grid.r_spacing}


def run_spectrum(sc: Scenario, out: Path) -> dict:
    est = dict(sc.estimator)
    grid = _default_grid(sc, est)
    methods = est.get("methods", ["dml", "music"])
    include_amp = bool(est.get("include_amplitude", False))
    snap = _synthesize(sc)
    cov = subspace.sample_covariance(snap)
    dec_probe = subspace.eig_decompose(cov, 0)
    k = _resolve_k(sc, est, dec_probe.eigenvalues)
    dec = subspace.eig_decompose(cov, k)
    d_sp = _ula_spacing(sc.geometry)
    excl = subspace.default_exclusion(sc.geometry.n, d_sp, sc.wavelength)
    metrics = {"num_targets": k, "eigenvalue_head": [float(v) for v in dec.eigenvalues[:k + 3]],
               "truth": [[t.theta, t.r] for t in sc.targets], "peaks": {},
               "estimator_resolved": dict(_grid_meta(grid), methods=list(methods),
                                          include_amplitude=include_amp, num_targets=k)}
    for method in methods:
        if method == "dml":
            sg = subspace.spectrum_single(snap.y, sc.geometry, sc.wavelength, grid,
                                          include_amp)
        elif method == "music":
            sg = subspace.spectrum_single(dec.signal, sc.geometry, sc.wavelength, grid,
                                          include_amp)
        elif method == "music-noise":
            sg = subspace.music_spectrum_noise(dec.noise, sc.geometry, sc.wavelength,
                                               grid, include_amp)
        else:
            raise ScenarioValidationError(f"unknown spectrum method '{method}'",
                                          field="estimator.methods")
        io.write_spectrum_csv(out / f"{method}_spectrum.csv", sg,
                              extra_meta={"method": method, "num_targets": k,
                                          "snr_definition": SNR_DEFINITION})
        peaks = subspace.find_peaks(sg, k, excl)
        metrics["peaks"][method] = [[p.theta, p.r, p.value] for p in peaks]
    return metrics


def run_modified_music(sc: Scenario, out: Path) -> dict:
    est = dict(sc.estimator)
    snap = _synthesize(sc)
    k = est.get("num_targets")
    if k is None:
        cov = subspace.sample_covariance(snap)
        k = _resolve_k(sc, est, subspace.eig_decompose(cov, 0).eigenvalues)
    d_ap = sc.geometry.aperture
    r_lo = est.get("r_min_m") or fresnel_validity_radius(d_ap, sc.wavelength)
    r_hi = est.get("r_max_m") or fraunhofer_distance(d_ap, sc.wavelength) / 2.0
    rs = inverse_spaced_rs(r_lo, r_hi, int(est.get("n_r", 256)))
    res = symmetric.modified_music(snap.y, int(k), sc.geometry, sc.wavelength,
                                   rs=rs, n_subvectors=est.get("n_subvectors"),
                                   n_gamma=int(est.get("n_gamma", 2048)))
    io.write_spectrum_csv(out / "direction_spectrum.csv", res.direction_spectrum,
                          extra_meta={"snr_definition": SNR_DEFINITION})
    for i, sg in enumerate(res.distance_spectra):
        io.write_spectrum_csv(out / f"distance_spectrum_{i}.csv", sg,
                              extra_meta={"snr_definition": SNR_DEFINITION})
    return {"num_targets": int(k),
            "pairs": [[float(a), float(b)] for a, b in res.pairs],
            "truth": [[t.theta, t.r] for t in sc.targets],
            "estimator_resolved": {
                "n_subvectors": int(est.get("n_subvectors") or sc.geometry.n // 5),
                "n_gamma": int(est.get("n_gamma", 2048)),
                "r_min_m": float(rs[0]), "r_max_m": float(rs[-1]), "n_r": int(rs.size)}}


def _init_filter_state(sc: Scenario, est: dict, meas0, tc) -> tracking.FilterState:
    init = dict(est.get("init", {}))
    mode = init.get("mode", "matched-filter")
    vel_var = float(init.get("velocity_var", 100.0))
    if mode == "explicit":
        return tracking.FilterState(q=np.asarray(init["q0"], float),
                                    cov=np.diag(np.asarray(init["cov_diag"], float)), cpi=0)
    if mode == "matched-filter":
        # one-snapshot projection peak on a coarse location grid
        grid = LocationGrid.regular(
            (init.get("theta_min_rad", np.pi / 4), init.get("theta_max_rad", 3 * np.pi / 4)),
            (init.get("r_min_m", fresnel_validity_radius(sc.geometry.aperture, sc.wavelength)),
             init.get("r_max_m", fraunhofer_distance(sc.geometry.aperture, sc.wavelength) / 2)),
            int(init.get("n_theta", 96)), int(init.get("n_r", 96)))
        sg = subspace.spectrum_single(meas0.y, sc.geometry, sc.wavelength, grid)
        i, j = sg.argmax_cell()
        th0, r0 = float(grid.thetas[i]), float(grid.rs[j])
        dth = float(np.max(np.abs(np.diff(grid.thetas))))
        dr = float(np.max(np.abs(np.diff(grid.rs))))
        cov = np.diag([max(dr**2, 1e-6), max(dth**2, 1e-8), vel_var, vel_var])
        return tracking.FilterState(q=np.array([r0, th0, 0.0, 0.0]), cov=cov, cpi=0)
    raise ScenarioValidationError(f"unknown init mode '{mode}'", field="estimator.init")


def run_track(sc: Scenario, out: Path) -> dict:
    est = dict(sc.estimator)
    if len(sc.targets) != 1 or not isinstance(sc.targets[0], MotionState):
        raise ScenarioValidationError("track needs exactly one moving target",
                                      field="targets")
    tc = sc.sampling.get("tc_s")
    if tc is None:
        raise ScenarioValidationError("track needs sampling.tc_s", field="sampling.tc_s")
    n_cpi = int(sc.sampling.get("n_cpi") or 100)
    rz = np.diag(np.asarray(est.get("process_cov_diag", [0.0, 0.0, 0.01, 0.01]), float))
    rz_sim = np.diag(np.asarray(est.get("process_cov_sim_diag",
                                        np.diag(rz).tolist()), float))
    source_mode = est.get("source_mode", "estimate")
    error_db = float(est.get("source_error_db", -3.0))
    gain_method = est.get("gain_method", "closed-form")
    tgt = sc.targets[0]
    sigma2 = sc.noise.sigma2
    rng_src = substream(sc.seed, "cpi-source")
    rng_state = substream(sc.seed, "cpi-state")
    rng_meas = substream(sc.seed, "cpi-noise")
    rng_serr = substream(sc.seed, "cpi-source-error")

    truth = np.array([tgt.r, tgt.theta, tgt.vr, tgt.vtheta])

    def make_measurement(q):
        s_i = (rng_src.standard_normal() + 1j * rng_src.standard_normal()) / np.sqrt(2.0)
        s_i = complex(s_i * tgt.amplitude)
        g = tracking.observation_fn(q, sc.geometry, sc.wavelength, tc)
        w = (rng_meas.standard_normal(sc.geometry.n)
             + 1j * rng_meas.standard_normal(sc.geometry.n)) * np.sqrt(sigma2 / 2.0)
        s_known = s_i
        err_var = 0.0
        if source_mode == "known-error":
            mse_lin = 10.0 ** (error_db / 10.0)
            scale = np.sqrt(mse_lin * abs(s_i) ** 2 / 2.0)
            s_known = s_i + complex(scale * (rng_serr.standard_normal()
                                             + 1j * rng_serr.standard_normal()))
            err_var = mse_lin * abs(s_known) ** 2
        return tracking.Measurement(
            y=g * s_i + w, noise_var=sigma2,
            s=None if source_mode == "estimate" else s_known,
            s_error_var=err_var)

    # CPI-0 measurement is used only to initialize; the filter then processes
    # the measurements of CPIs 1..n_cpi
    meas0 = make_measurement(truth)
    truths, meas_list = [], []
    for i in range(n_cpi):
        truth = tracking.state_transition(truth, tc)
        truth = truth + rng_state.standard_normal(4) * np.sqrt(np.diag(rz_sim))
        meas_list.append(make_measurement(truth))
        truths.append(truth.copy())
    init = _init_filter_state(sc, est, meas0, tc)
    cond_limit = float(est.get("cond_limit", 1e12))
    trace_cap = float(est.get("trace_cap", np.inf))
    states, diags = [], {"nis": []}
    current, remaining, offset = init, meas_list, 0
    reinits = 0
    while remaining:
        try:
            got, dg = tracking.track(remaining, current, rz, sc.geometry,
                                     sc.wavelength, tc, gain_method=gain_method,
                                     cond_limit=cond_limit, trace_cap=trace_cap)
            states.extend(got)
            diags["nis"].extend(dg["nis"])
            break
        except FilterDivergenceError as exc:
            # divergence policy: reinitialize from a fresh fixed-target
            # estimate on the CPI that tripped the guard, then resume
            done = exc.states_so_far
            states.extend(done)
            diags["nis"].extend([np.nan] * (len(done) + 1))
            idx = exc.cpi_index
            fresh = _init_filter_state(sc, est, remaining[idx], tc)
            current = tracking.FilterState(q=fresh.q, cov=fresh.cov,
                                           cpi=offset + idx + 1)
            states.append(current)
            offset += idx + 1
            remaining = remaining[idx + 1:]
            reinits += 1
            if reinits > 10:
                raise
    io.write_trajectory_csv(out / "trajectory.csv", states)
    loc_err, vel_err = [], []
    for st, q in zip(states, truths):
        p_hat = st.r * np.array([np.cos(st.theta), np.sin(st.theta)])
        p_true = q[0] * np.array([np.cos(q[1]), np.sin(q[1])])
        u = np.array([np.cos(q[1]), np.sin(q[1])])
        up = np.array([-np.sin(q[1]), np.cos(q[1])])
        u_h = np.array([np.cos(st.theta), np.sin(st.theta)])
        up_h = np.array([-np.sin(st.theta), np.cos(st.theta)])
        v_hat = st.vr * u_h + st.vtheta * up_h
        v_true = q[2] * u + q[3] * up
        loc_err.append(float(np.linalg.norm(p_hat - p_true)))
        vel_err.append(float(np.linalg.norm(v_hat - v_true)))
    io.write_table_csv(out / "errors.csv",
                       ["cpi_index", "location_error_m", "velocity_error_mps"],
                       [(st.cpi, le, ve) for st, le, ve in zip(states, loc_err, vel_err)])
    nis = np.asarray(diags["nis"], dtype=float)
    return {"n_cpi": n_cpi, "location_error_m": loc_err, "velocity_error_mps": vel_err,
            "reinitializations": reinits,
            "mean_nis": float(np.mean(nis[np.isfinite(nis)])) if np.isfinite(nis).any()
            else float("nan"),
            "estimator_resolved": {
                "process_cov_diag": np.diag(rz).tolist(),
                "process_cov_sim_diag": np.diag(rz_sim).tolist(),
                "source_mode": source_mode, "source_error_db": error_db,
                "gain_method": gain_method, "cond_limit": cond_limit,
                "trace_cap": trace_cap if np.isfinite(trace_cap) else None,
                "init": dict(est.get("init", {}), mode=est.get("init", {}).get("mode",
                                                                               "matched-filter"))}}


def run_crb(sc: Scenario, out: Path) -> dict:
    est = dict(sc.estimator)
    d_sp = _ula_spacing(sc.geometry)
    n = sc.geometry.n
    lam = sc.wavelength
    l = sc.sampling["n_samples"]
    snr = sc.noise.snr_linear
    grid = _default_grid(sc, {**est, "n_theta": int(est.get("n_theta", 10)),
                              "n_r": int(est.get("n_r", 10))})
    rows = []
    for th in grid.thetas:
        ct = analysis.crb_theta(n, d_sp, lam, l, snr, th)
        for r in grid.rs:
            rows.append((th, r, ct, analysis.crb_r(n, d_sp, lam, l, snr, th, r)))
    io.write_table_csv(out / "crb.csv",
                       ["theta_rad", "r_m", "crb_theta_rad2", "crb_r_m2"], rows)
    return {"n": n, "spacing_m": d_sp, "n_samples": l, "snr_linear": snr,
            "snr_definition": SNR_DEFINITION, "rows": len(rows),
            "estimator_resolved": _grid_meta(grid)}


def run_af(sc: Scenario, out: Path) -> dict:
    est = dict(sc.estimator)
    d_sp = _ula_spacing(sc.geometry)
    n = sc.geometry.n
    lam = sc.wavelength
    th0 = float(est.get("theta0_rad", np.pi / 2))
    d_t = analysis.threshold_distance(n, d_sp, lam, th0)
    r0 = float(est.get("r0_m", d_t / 4.0))
    n_pts = int(est.get("n_points", 1024))
    hw = analysis.hpmw_direction(n, d_sp, lam)
    v0 = np.cos(th0)
    vs = np.linspace(v0 - 8 * hw, v0 + 8 * hw, n_pts)
    vs = vs[(vs > -1.0) & (vs < 1.0)]
    rows = []
    for v in vs:
        th = float(np.arccos(v))
        r_curve = r0 * np.sin(th) ** 2 / np.sin(th0) ** 2
        l1 = analysis.lambda1(v, v0, n, d_sp, lam)
        af = abs(analysis.ambiguity(th, r_curve, th0, r0, sc.geometry, lam))
        rows.append((v, abs(l1), af))
    io.write_table_csv(out / "af_direction.csv",
                       ["cos_theta", "lambda1_abs", "af_abs"], rows)
    rs = 1.0 / np.linspace(1.0 / (8.0 * r0), 1.0 / (r0 / 4.0), n_pts)
    rows = []
    for r in np.sort(rs):
        l2 = abs(analysis.lambda2(r, th0, r0, n, d_sp, lam))
        af = abs(analysis.ambiguity(th0, r, th0, r0, sc.geometry, lam))
        rows.append((r, l2, af))
    io.write_table_csv(out / "af_distance.csv", ["r_m", "lambda2_abs", "af_abs"], rows)
    rep = analysis.resolution_report(n, d_sp, lam, th0, r0)
    return {"theta0_rad": th0, "r0_m": r0, "d_t_m": rep.d_t, "d_fa_m": rep.d_fa,
            "hpmw_direction_cos": rep.direction_halfwidth_cos,
            "distance_interval_m": [rep.distance_interval[0],
                                    None if np.isinf(rep.distance_interval[1])
                                    else rep.distance_interval[1]],
            "estimator_resolved": {"theta0_rad": th0, "r0_m": r0,
                                   "n_points": n_pts}}


def estimate_single_target(snap_y, k, sc: Scenario, grid: LocationGrid,
                           refine: int = 4, zoom_points: int = 17):
    """Coarse grid peak + pan/zoom local grids + parabolic interpolation.

    The projection surface is a long ridge in (cos(theta), 1/r), so the
    coarse argmax can sit several cells along it; local windows are
    recentered at the same scale while the argmax touches a window border
    and only then shrunk. Returns (theta_hat, r_hat).
    """
    cov = subspace.sample_covariance(snap_y)
    dec = subspace.eig_decompose(cov, k)
    sg = subspace.spectrum_single(dec.signal, sc.geometry, sc.wavelength, grid)
    i, j = sg.argmax_cell()
    th, r = grid.thetas[i], grid.rs[j]
    dv = np.abs(np.diff(np.cos(grid.thetas))).max()
    du = np.abs(np.diff(1.0 / grid.rs)).max()
    last = (sg, grid, i, j)
    zooms = 0
    for _ in range(8 * refine):
        if zooms >= refine:
            break
        v0, u0 = np.cos(th), 1.0 / r
        vs = np.clip(np.linspace(v0 - 2 * dv, v0 + 2 * dv, zoom_points), -1 + 1e-9, 1 - 1e-9)
        us = np.linspace(max(u0 - 2 * du, 1e-9), u0 + 2 * du, zoom_points)
        local = LocationGrid(thetas=np.sort(np.arccos(vs)), rs=np.sort(1.0 / us),
                             theta_spacing="cos", r_spacing="inverse")
        sg = subspace.spectrum_single(dec.signal, sc.geometry, sc.wavelength, local)
        i, j = sg.argmax_cell()
        th, r = local.thetas[i], local.rs[j]
        last = (sg, local, i, j)
        on_border = (i <= 1 or i >= zoom_points - 2
                     or j <= 1 or j >= zoom_points - 2)
        if not on_border:
            dv = np.abs(np.diff(np.cos(local.thetas))).max()
            du = np.abs(np.diff(1.0 / local.rs)).max()
            zooms += 1
    sg, local, i, j = last
    logv = np.log(np.maximum(sg.values, 1e-300))
    v_ax = np.cos(local.thetas)
    u_ax = 1.0 / local.rs
    v_hat, u_hat = v_ax[i], u_ax[j]
    if 0 < i < v_ax.size - 1:
        den = logv[i - 1, j] - 2 * logv[i, j] + logv[i + 1, j]
        if den < 0:
            v_hat = v_ax[i] + 0.5 * (logv[i - 1, j] - logv[i + 1, j]) / den * (v_ax[i + 1] - v_ax[i])
    if 0 < j < u_ax.size - 1:
        den = logv[i, j - 1] - 2 * logv[i, j] + logv[i, j + 1]
        if den < 0:
            u_hat = u_ax[j] + 0.5 * (logv[i, j - 1] - logv[i, j + 1]) / den * (u_ax[j + 1] - u_ax[j])
    return float(np.arccos(np.clip(v_hat, -1, 1))), float(1.0 / u_hat)


def run_monte_carlo(sc: Scenario, out: Path) -> dict:
    est = dict(sc.estimator)
    sweep = est.get("sweep", "snr_db")
    if sweep not in ("snr_db", "n_samples", "r"):
        raise ScenarioValidationError("sweep must be snr_db, n_samples, or r",
                                      field="estimator.sweep")
    values = est.get("values")
    if not values:
        raise ScenarioValidationError("estimator.values must be a non-empty list",
                                      field="estimator.values")
    trials = int(est.get("trials", 200))
    if trials < 1:
        raise ScenarioValidationError("trials must be >= 1", field="estimator.trials")
    if len(sc.targets) != 1:
        raise ScenarioValidationError("monte-carlo sweep needs a single target",
                                      field="targets")
    d_sp = _ula_spacing(sc.geometry)
    grid = _default_grid(sc, {**est, "n_theta": int(est.get("n_theta", 192)),
                              "n_r": int(est.get("n_r", 128))})
    rows = []
    per_trial = {}
    for val in values:
        tgt = sc.targets[0]
        noise = sc.noise
        l = sc.sampling["n_samples"]
        if sweep == "snr_db":
            noise = NoiseModel.from_snr_db(float(val))
        elif sweep == "n_samples":
            l = int(val)
        else:
            tgt = TargetState(theta=tgt.theta, r=float(val), amplitude=tgt.amplitude)
        point_index = values.index(val)
        err_t, err_r = [], []
        for t in range(trials):
            snap = synthesize_fixed(sc.geometry, sc.wavelength, [tgt], l, noise,
                                    trial_seed(sc.seed, point_index * trials + t),
                                    sc.source_model)
            th_h, r_h = estimate_single_target(snap.y, 1, sc, grid)
            err_t.append(th_h - tgt.theta)
            err_r.append(r_h - tgt.r)
        snr_lin = noise.snr_linear
        crb_t = analysis.crb_theta(sc.geometry.n, d_sp, sc.wavelength, l, snr_lin, tgt.theta)
        crb_rr = analysis.crb_r(sc.geometry.n, d_sp, sc.wavelength, l, snr_lin,
                                tgt.theta, tgt.r)
        rows.append((val, float(np.sqrt(np.mean(np.square(err_t)))),
                     float(np.sqrt(np.mean(np.square(err_r)))),
                     crb_t, crb_rr, trials))
        per_trial[str(val)] = {"err_theta": [float(e) for e in err_t],
                               "err_r": [float(e) for e in err_r]}
    io.write_table_csv(out / "monte_carlo.csv",
                       ["sweep_value", "rmse_theta_rad", "rmse_r_m",
                        "crb_theta_rad2", "crb_r_m2", "trials"], rows)
    return {"sweep": sweep, "rows": [[float(r[0]), r[1], r[2], r[3], r[4], r[5]]
                                     for r in rows],
            "per_trial": per_trial, "snr_definition": SNR_DEFINITION,
            "estimator_resolved": dict(_grid_meta(grid), trials=trials,
                                       values=[float(v) for v in values])}


def run_simulate(sc: Scenario, out: Path) -> dict:
    snap = _synthesize(sc)
    io.write_snapshots_csv(out / "snapshots.csv", snap)
    return {"n": snap.n, "n_samples": snap.l,
            "mean_power": float(np.mean(np.abs(snap.y) ** 2)),
            "snr_definition": SNR_DEFINITION}


COMMANDS = {
    "simulate": run_simulate,
    "spectrum": run_spectrum,
    "modified-music": run_modified_music,
    "track": run_track,
    "crb": run_crb,
    "af": run_af,
    "monte-carlo": run_monte_carlo,
}


def run(command: str, scenario, out_dir, seed: int | None = None) -> dict:
    """Execute one pipeline; writes manifest.json, metrics.json and CSVs.

    Returns the metrics dict. (scenario, seed) fully determines all numeric
    outputs; the runtime entry in metrics.json is the only volatile field.
    """
    if command not in COMMANDS:
        raise ScenarioValidationError(f"unknown command '{command}'")
    if isinstance(scenario, Scenario):
        sc = scenario
    else:
        sc = parse_scenario(scenario)
    if seed is not None:
        resolved = dict(sc.resolved, seed=int(seed))
        sc = parse_scenario(resolved)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "scenario": sc.resolved, "version": __version__,
                "kernel_backend": kernels.BACKEND, "snr_definition": SNR_DEFINITION}
    t0 = time.perf_counter()
    metrics = dict(COMMANDS[command](sc, out))
    manifest["estimator_resolved"] = metrics.pop("estimator_resolved", {})
    io.write_json(out / "manifest.json", manifest)
    metrics["runtime_s"] = time.perf_counter() - t0
    metrics["command"] = command
    io.write_json(out / "metrics.json", metrics)
    return metrics
