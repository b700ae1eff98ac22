"""Scenario configs: strict JSON parsing, defaults resolution, validity gating.

Unknown fields are rejected by name. Every default that affects numerics is
materialized into the resolved dict, so the emitted manifest re-parses to an
identical scenario and reproduces identical outputs.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioValidationError
from .geometry import ArrayGeometry, SymmetricULA, Waveform, symmetric_ula, ula
from .model import MotionState, NoiseModel, TargetState, fresnel_validity_radius


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ScenarioValidationError(f"missing required field '{where}.{key}'", field=key)
    return mapping[key]


def _check_keys(mapping: dict, allowed: set, where: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ScenarioValidationError(f"unknown field '{where}.{key}'", field=key)


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(f"field '{where}' must be a number", field=where)
    return float(value)


@dataclass(frozen=True)
class Scenario:
    """Fully resolved experiment description."""

    seed: int
    waveform: Waveform
    geometry: ArrayGeometry
    targets: list
    noise: NoiseModel
    sampling: dict
    source_model: str
    estimator: dict
    resolved: dict = field(repr=False, default_factory=dict)

    @property
    def wavelength(self) -> float:
        return self.waveform.wavelength

    @property
    def moving(self) -> bool:
        return any(isinstance(t, MotionState) and (t.vr or t.vtheta) for t in self.targets)


def _parse_geometry(cfg: dict) -> tuple[ArrayGeometry, dict]:
    kind = _require(cfg, "kind", "geometry")
    if kind == "ula":
        _check_keys(cfg, {"kind", "n", "spacing_m", "reference"}, "geometry")
        n = int(_require(cfg, "n", "geometry"))
        d = _num(_require(cfg, "spacing_m", "geometry"), "geometry.spacing_m")
        ref = cfg.get("reference", "end")
        return ula(n, d, reference=ref), {"kind": kind, "n": n, "spacing_m": d,
                                          "reference": ref}
    if kind == "symmetric-ula":
        _check_keys(cfg, {"kind", "half_size", "spacing_m"}, "geometry")
        m = int(_require(cfg, "half_size", "geometry"))
        d = _num(_require(cfg, "spacing_m", "geometry"), "geometry.spacing_m")
        return symmetric_ula(m, d), {"kind": kind, "half_size": m, "spacing_m": d}
    if kind == "positions":
        _check_keys(cfg, {"kind", "positions_m"}, "geometry")
        pos = _require(cfg, "positions_m", "geometry")
        return ArrayGeometry(positions=np.asarray(pos, dtype=float)), \
            {"kind": kind, "positions_m": [[float(a), float(b)] for a, b in pos]}
    raise ScenarioValidationError(f"unknown geometry kind '{kind}'", field="geometry.kind")


def _parse_target(cfg: dict, idx: int) -> tuple[TargetState, dict]:
    where = f"targets[{idx}]"
    allowed = {"theta_rad", "r_m", "amplitude_re", "amplitude_im", "clock_offset_s",
               "vr_mps", "vtheta_mps"}
    _check_keys(cfg, allowed, where)
    theta = _num(_require(cfg, "theta_rad", where), where + ".theta_rad")
    r = _num(_require(cfg, "r_m", where), where + ".r_m")
    amp = complex(_num(cfg.get("amplitude_re", 1.0), where + ".amplitude_re"),
                  _num(cfg.get("amplitude_im", 0.0), where + ".amplitude_im"))
    tau = _num(cfg.get("clock_offset_s", 0.0), where + ".clock_offset_s")
    resolved = {"theta_rad": theta, "r_m": r, "amplitude_re": amp.real,
                "amplitude_im": amp.imag, "clock_offset_s": tau}
    try:
        if "vr_mps" in cfg or "vtheta_mps" in cfg:
            vr = _num(cfg.get("vr_mps", 0.0), where + ".vr_mps")
            vt = _num(cfg.get("vtheta_mps", 0.0), where + ".vtheta_mps")
            resolved.update({"vr_mps": vr, "vtheta_mps": vt})
            return MotionState(theta=theta, r=r, amplitude=amp, clock_offset=tau,
                               vr=vr, vtheta=vt), resolved
        return TargetState(theta=theta, r=r, amplitude=amp, clock_offset=tau), resolved
    except ValueError as exc:
        raise ScenarioValidationError(f"{where}: {exc}", field=where) from exc


def _parse_noise(cfg: dict) -> tuple[NoiseModel, dict]:
    _check_keys(cfg, {"snr_db", "sigma2"}, "noise")
    if "snr_db" not in cfg and "sigma2" not in cfg:
        raise ScenarioValidationError("noise needs snr_db or sigma2", field="noise")
    if "snr_db" in cfg:
        snr_db = _num(cfg["snr_db"], "noise.snr_db")
        nm = NoiseModel.from_snr_db(snr_db)
        if "sigma2" in cfg:
            # resolved manifests carry both; they must agree
            sigma2 = _num(cfg["sigma2"], "noise.sigma2")
            if not np.isclose(sigma2, nm.sigma2, rtol=1e-12, atol=0):
                raise ScenarioValidationError(
                    "noise.snr_db and noise.sigma2 are inconsistent", field="noise")
        return nm, {"snr_db": snr_db, "sigma2": nm.sigma2}
    sigma2 = _num(cfg["sigma2"], "noise.sigma2")
    return NoiseModel(sigma2=sigma2), {"sigma2": sigma2}


_TOP_KEYS = {"seed", "waveform", "geometry", "targets", "noise", "sampling",
             "source_model", "estimator"}
_SAMPLING_KEYS = {"n_samples", "ts_s", "tc_s", "n_cpi"}


def parse_scenario(text_or_dict) -> Scenario:
    """Parse and validate a scenario; raises ScenarioValidationError naming
    any unknown/malformed field or violated estimator precondition."""
    if isinstance(text_or_dict, (str, bytes)):
        try:
            raw = json.loads(text_or_dict)
        except json.JSONDecodeError as exc:
            raise ScenarioValidationError(f"config is not valid JSON: {exc}") from exc
    else:
        raw = text_or_dict
    if not isinstance(raw, dict):
        raise ScenarioValidationError("config must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "scenario")
    if "seed" not in raw:
        raise ScenarioValidationError("missing required field 'seed'", field="seed")
    seed = raw["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioValidationError("'seed' must be a non-negative integer", field="seed")

    wf_cfg = _require(raw, "waveform", "scenario")
    _check_keys(wf_cfg, {"carrier_hz"}, "waveform")
    fc = _num(_require(wf_cfg, "carrier_hz", "waveform"), "waveform.carrier_hz")
    if fc <= 0:
        raise ScenarioValidationError("waveform.carrier_hz must be positive",
                                      field="waveform.carrier_hz")
    waveform = Waveform(carrier_hz=fc)

    geometry, geo_resolved = _parse_geometry(_require(raw, "geometry", "scenario"))

    tcfgs = _require(raw, "targets", "scenario")
    if not isinstance(tcfgs, list) or not tcfgs:
        raise ScenarioValidationError("'targets' must be a non-empty list", field="targets")
    targets, tgt_resolved = [], []
    for i, tcfg in enumerate(tcfgs):
        t, res = _parse_target(tcfg, i)
        targets.append(t)
        tgt_resolved.append(res)
    if len(targets) >= geometry.n:
        raise ScenarioValidationError(
            f"targets: need K < N (K={len(targets)}, N={geometry.n})", field="targets")

    noise, noise_resolved = _parse_noise(_require(raw, "noise", "scenario"))

    sampling_cfg = raw.get("sampling", {})
    _check_keys(sampling_cfg, _SAMPLING_KEYS, "sampling")
    sampling = {"n_samples": int(sampling_cfg.get("n_samples", 200)),
                "ts_s": sampling_cfg.get("ts_s"),
                "tc_s": sampling_cfg.get("tc_s"),
                "n_cpi": sampling_cfg.get("n_cpi")}
    if sampling["n_samples"] < 1:
        raise ScenarioValidationError("sampling.n_samples must be >= 1",
                                      field="sampling.n_samples")

    source_model = raw.get("source_model", "gaussian")
    if source_model not in ("gaussian", "phase"):
        raise ScenarioValidationError("source_model must be 'gaussian' or 'phase'",
                                      field="source_model")

    estimator = raw.get("estimator", {})
    if not isinstance(estimator, dict):
        raise ScenarioValidationError("'estimator' must be an object", field="estimator")

    resolved = {"seed": seed, "waveform": {"carrier_hz": fc}, "geometry": geo_resolved,
                "targets": tgt_resolved, "noise": noise_resolved, "sampling": sampling,
                "source_model": source_model, "estimator": estimator}
    scenario = Scenario(seed=seed, waveform=waveform, geometry=geometry, targets=targets,
                        noise=noise, sampling=sampling, source_model=source_model,
                        estimator=estimator, resolved=resolved)
    _gate_estimator(scenario)
    return scenario


def _gate_estimator(sc: Scenario) -> None:
    """Check estimator preconditions before any computation runs."""
    kind = sc.estimator.get("kind")
    if kind == "modified-music":
        try:
            sym = SymmetricULA.from_geometry(sc.geometry)
        except ValueError as exc:
            raise ScenarioValidationError(f"estimator: {exc}", field="estimator") from exc
        if sym.spacing > sc.wavelength / 4.0 * (1 + 1e-12):
            raise ScenarioValidationError(
                f"estimator: spacing: modified MUSIC needs d <= lambda/4 "
                f"(d={sym.spacing:.6g}, lambda/4={sc.wavelength / 4:.6g})",
                field="geometry.spacing_m")
        r_ok = fresnel_validity_radius(sym.aperture, sc.wavelength)
        bad = [t.r for t in sc.targets if t.r < r_ok]
        if bad:
            raise ScenarioValidationError(
                f"estimator: Fresnel radius: targets at r={bad} m lie below the "
                f"validity radius {r_ok:.4g} m", field="targets")
    if sc.moving and sc.sampling.get("ts_s") is None and sc.sampling.get("tc_s") is None:
        raise ScenarioValidationError(
            "moving targets need sampling.ts_s or sampling.tc_s", field="sampling")
